//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::Result;
use crate::nn::{Sequential, Tensor};
use crate::Scalar;

/// A chain with cached forward passes and parameter blocks.
pub trait Differentiable<T: Scalar> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>>;
    /// Backpropagates `upstream`, accumulating parameter gradients, and returns
    /// the gradient with respect to the input.
    fn backward_input(&mut self, upstream: Tensor<T>) -> Result<Tensor<T>>;
    fn zero_grad(&mut self);
    fn block_names(&self) -> Vec<String>;
    fn param_pairs(&mut self) -> Vec<(&mut [T], &[T])>;
    /// Identifies the piecewise-linear region (ReLU masks, pooling routes) of
    /// the last forward pass.
    fn activation_signature(&self) -> u64;
}

impl<T: Scalar> Differentiable<T> for Sequential<T> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward(x.clone(), true)
    }
    fn backward_input(&mut self, upstream: Tensor<T>) -> Result<Tensor<T>> {
        self.backward(upstream)
    }
    fn zero_grad(&mut self) {
        Sequential::zero_grad(self)
    }
    fn block_names(&self) -> Vec<String> {
        Sequential::block_names(self)
    }
    fn param_pairs(&mut self) -> Vec<(&mut [T], &[T])> {
        Sequential::param_pairs(self)
    }
    fn activation_signature(&self) -> u64 {
        Sequential::activation_signature(self)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub step: f64,
    /// Check at most this many coordinates per block (all when `None`).
    pub max_coords_per_block: Option<usize>,
    /// Gradients smaller than this are compared in absolute terms.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_coords_per_block: None,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockError {
    pub name: String,
    pub checked: usize,
    /// Coordinates whose ±step perturbation crossed a ReLU or pooling switch.
    pub skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockError>,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_error() < tolerance
    }
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares backpropagated gradients of `⟨r, f(x)⟩` (with a seeded random `r`)
/// against central differences, for every parameter block and the input.
pub fn grad_check<T, M>(model: &mut M, input: &Tensor<T>, cfg: GradCheckConfig) -> Result<GradCheckReport>
where
    T: Scalar,
    M: Differentiable<T>,
{
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
    let out = model.forward_train(input)?;
    let weights = (0..out.len()).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
    let probe = Tensor::from_vec(out.shape().to_vec(), weights)?;
    model.zero_grad();
    let input_grad = model.backward_input(probe.clone())?;
    let base_sig = model.activation_signature();
    let analytic: Vec<Vec<T>> = model.param_pairs().into_iter().map(|(_, g)| g.to_vec()).collect();
    let names = model.block_names();

    let h = T::lit(cfg.step);
    let two_h = cfg.step * 2.0;
    let objective = |m: &mut M, x: &Tensor<T>| -> Result<(f64, u64)> {
        let y = m.forward_train(x)?;
        Ok((y.dot(&probe).as_f64(), m.activation_signature()))
    };
    let pick = |len: usize, rng: &mut Xoshiro256PlusPlus| -> Vec<usize> {
        match cfg.max_coords_per_block {
            Some(c) if c < len => {
                let mut v = sample(rng, len, c).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..len).collect(),
        }
    };

    let mut report = GradCheckReport::default();
    for (b, name) in names.iter().enumerate() {
        let coords = pick(analytic[b].len(), &mut rng);
        let mut block = BlockError {
            name: name.clone(),
            checked: 0,
            skipped: 0,
            max_rel_error: 0.0,
        };
        for j in coords {
            let orig = model.param_pairs()[b].0[j];
            model.param_pairs()[b].0[j] = orig + h;
            let (plus, sp) = objective(model, input)?;
            model.param_pairs()[b].0[j] = orig - h;
            let (minus, sm) = objective(model, input)?;
            model.param_pairs()[b].0[j] = orig;
            if sp != base_sig || sm != base_sig {
                block.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / two_h;
            let err = relative_error(analytic[b][j].as_f64(), numeric, cfg.floor);
            block.max_rel_error = block.max_rel_error.max(err);
            block.checked += 1;
        }
        report.blocks.push(block);
    }

    let mut block = BlockError {
        name: "input".into(),
        checked: 0,
        skipped: 0,
        max_rel_error: 0.0,
    };
    let mut x = input.clone();
    for j in pick(x.len(), &mut rng) {
        let orig = x.data()[j];
        x.data_mut()[j] = orig + h;
        let (plus, sp) = objective(model, &x)?;
        x.data_mut()[j] = orig - h;
        let (minus, sm) = objective(model, &x)?;
        x.data_mut()[j] = orig;
        if sp != base_sig || sm != base_sig {
            block.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / two_h;
        let err = relative_error(input_grad.data()[j].as_f64(), numeric, cfg.floor);
        block.max_rel_error = block.max_rel_error.max(err);
        block.checked += 1;
    }
    report.blocks.push(block);
    // Leave the caches consistent with the unperturbed input.
    model.forward_train(input)?;
    Ok(report)
}
