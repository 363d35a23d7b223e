//! Seeded synthetic melting-cycle temperature curves with known modes.
//!
//! A curve is a linear heating ramp, a plateau at peak temperature (optionally
//! with an operator dip) and an exponential cool-down, plus Gaussian noise.
//! Randomness comes from [`crate::rng`], so output is a pure function of the
//! parameters and seed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Result};
use crate::rng::{stream_rng, Rng, STREAM_DATAGEN};
use crate::windowing::TimeSeries;

/// Seconds between samples, used for the `duration` metadata.
pub const SAMPLE_PERIOD_S: f64 = 60.0;
/// Cooling stops once the curve is within this fraction of the
/// peak-to-start range above the start temperature.
const COOL_STOP_FRAC: f64 = 0.1;

/// Temporary temperature drop during the plateau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    /// Centre of the dip as a fraction of the plateau.
    pub position_frac: f64,
    /// Depth in °C.
    pub depth: f64,
    /// Width in steps.
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub name: String,
    pub start_temp: f64,
    /// °C per step while heating.
    pub ramp_rate: f64,
    pub peak_temp: f64,
    /// Plateau length as a fraction of the whole cycle.
    pub hold_len_frac: f64,
    pub dip: Option<Dip>,
    /// Initial cooling slope in °C per step.
    pub cool_rate: f64,
    /// Each segment length is scaled by a factor in `1 ± length_jitter`.
    pub length_jitter: f64,
    pub noise_sigma: f64,
}

impl ModeParams {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.hold_len_frac, self.length_jitter];
        let finite = [self.start_temp, self.peak_temp, self.ramp_rate, self.cool_rate, self.noise_sigma];
        if finite.iter().any(|v| !v.is_finite()) || fracs.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid_param(format!("mode {}: values must be finite and fractions in [0, 1]", self.name)));
        }
        if self.hold_len_frac >= 1.0 || self.length_jitter >= 1.0 {
            return Err(invalid_param(format!("mode {}: hold and jitter fractions must be below 1", self.name)));
        }
        if self.peak_temp <= self.start_temp || self.ramp_rate <= 0.0 || self.cool_rate <= 0.0 || self.noise_sigma < 0.0 {
            return Err(invalid_param(format!(
                "mode {}: need peak > start, positive rates and non-negative noise",
                self.name
            )));
        }
        if let Some(d) = self.dip {
            if !(0.0..=1.0).contains(&d.position_frac) || !(d.depth >= 0.0) {
                return Err(invalid_param(format!("mode {}: dip position must be in [0, 1], depth ≥ 0", self.name)));
            }
        }
        Ok(())
    }
}

/// The default four-mode palette: fast-efficient, slow-long,
/// dip-intervention and high-plateau cycles. Modes differ in the relative
/// lengths of their phases and in the dip, so they stay distinct after
/// resampling and min–max scaling.
pub fn default_palette() -> Vec<ModeParams> {
    let base = ModeParams {
        name: String::new(),
        start_temp: 25.0,
        ramp_rate: 20.0,
        peak_temp: 1450.0,
        hold_len_frac: 0.3,
        dip: None,
        cool_rate: 30.0,
        length_jitter: 0.1,
        noise_sigma: 8.0,
    };
    vec![
        ModeParams {
            name: "fast-efficient".into(),
            ramp_rate: 25.0,
            hold_len_frac: 0.15,
            cool_rate: 35.0,
            ..base.clone()
        },
        ModeParams {
            name: "slow-long".into(),
            ramp_rate: 6.0,
            hold_len_frac: 0.2,
            cool_rate: 25.0,
            ..base.clone()
        },
        ModeParams {
            name: "dip-intervention".into(),
            ramp_rate: 15.0,
            hold_len_frac: 0.4,
            cool_rate: 25.0,
            dip: Some(Dip {
                position_frac: 0.5,
                depth: 450.0,
                width: 50,
            }),
            ..base.clone()
        },
        ModeParams {
            name: "high-plateau".into(),
            ramp_rate: 22.0,
            peak_temp: 1550.0,
            hold_len_frac: 0.6,
            cool_rate: 45.0,
            ..base
        },
    ]
}

fn jittered(rng: &mut Rng, len: f64, jitter: f64) -> usize {
    let factor = if jitter > 0.0 { 1.0 + rng.random_range(-jitter..=jitter) } else { 1.0 };
    ((len * factor).round() as usize).max(1)
}

/// One cycle. Metadata: `weight` (tonnes), `energy` (kWh, proportional to
/// weight and the heat above start temperature) and `duration` (seconds).
pub fn gen_melting_curve(params: &ModeParams, seed: u64) -> Result<(TimeSeries, String)> {
    params.validate()?;
    let mut rng = Rng::seed_from_u64(seed);
    let range = params.peak_temp - params.start_temp;
    let ramp_nominal = (range / params.ramp_rate).ceil();
    let cool_nominal = (range / params.cool_rate * (1.0 / COOL_STOP_FRAC).ln()).ceil();
    let hold_nominal = params.hold_len_frac / (1.0 - params.hold_len_frac) * (ramp_nominal + cool_nominal);
    let ramp = jittered(&mut rng, ramp_nominal, params.length_jitter);
    let hold = jittered(&mut rng, hold_nominal, params.length_jitter);
    let cool = jittered(&mut rng, cool_nominal, params.length_jitter);

    let mut values = Vec::with_capacity(ramp + hold + cool);
    // Ramp slope is stretched with the jitter so the ramp still ends at peak.
    let slope = range / ramp as f64;
    values.extend((0..ramp).map(|t| (params.start_temp + slope * t as f64).min(params.peak_temp)));
    let dip_centre = params.dip.map(|d| d.position_frac * hold as f64);
    values.extend((0..hold).map(|t| {
        let mut v = params.peak_temp;
        if let (Some(d), Some(c)) = (params.dip, dip_centre) {
            let half = d.width as f64 / 2.0;
            let off = (t as f64 - c).abs();
            if half > 0.0 && off < half {
                // Raised-cosine notch.
                v -= d.depth * 0.5 * (1.0 + (std::f64::consts::PI * off / half).cos());
            }
        }
        v
    }));
    // Initial cooling slope equals cool_rate.
    let tau = range / params.cool_rate * cool as f64 / cool_nominal;
    values.extend((1..=cool).map(|t| params.start_temp + range * (-(t as f64) / tau).exp()));

    if params.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, params.noise_sigma).map_err(|e| invalid_param(e.to_string()))?;
        values.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    let weight = rng.random_range(8.0..12.0);
    let heat: f64 = values.iter().map(|v| (v - params.start_temp).max(0.0)).sum();
    let metadata = BTreeMap::from([
        ("weight".to_string(), weight),
        ("energy".to_string(), weight * heat * 1e-4),
        ("duration".to_string(), values.len() as f64 * SAMPLE_PERIOD_S),
    ]);
    let series = TimeSeries::new(format!("{}-{seed}", params.name), values)?.with_metadata(metadata);
    Ok((series, params.name.clone()))
}

/// `n_per_mode` curves per mode in shuffled order, with ids `series_0000`…
/// and the index of the generating mode as label.
pub fn gen_dataset(modes: &[ModeParams], n_per_mode: usize, seed: u64) -> Result<(Vec<TimeSeries>, Vec<usize>)> {
    if modes.len() < 2 {
        return Err(invalid_param("a dataset needs at least two modes"));
    }
    if n_per_mode == 0 {
        return Err(invalid_param("n_per_mode must be at least 1"));
    }
    let mut rng = stream_rng(seed, STREAM_DATAGEN);
    let mut items = Vec::with_capacity(modes.len() * n_per_mode);
    for (label, mode) in modes.iter().enumerate() {
        for _ in 0..n_per_mode {
            let (series, _) = gen_melting_curve(mode, rng.next_u64())?;
            items.push((series, label));
        }
    }
    items.shuffle(&mut rng);
    Ok(items
        .into_iter()
        .enumerate()
        .map(|(i, (mut s, l))| {
            s.id = format!("series_{i:04}");
            (s, l)
        })
        .unzip())
}
