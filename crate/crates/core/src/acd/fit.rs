use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::image::{OdImage, TissueMask};
use crate::linalg::Vec3;
use crate::{Error, Result};

use super::objective::{objective_and_gradient, AcdHyperparams, ObjectiveBreakdown};
use super::profile::{build_matrix, AcdParams, StainProfile};

/// Fewer tissue pixels than this cannot be fitted.
pub const MIN_TISSUE_PIXELS: usize = 100;

const DECAY_FACTOR: f64 = 0.97;
const DECAY_EVERY: usize = 25;
const CONVERGED_STREAK: usize = 10;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    /// Profile at the lowest objective seen.
    pub profile: StainProfile,
    pub params: AcdParams,
    /// Objective at the start of every iteration.
    pub trace: Vec<ObjectiveBreakdown>,
    /// True if the change-in-objective criterion stopped the run early.
    pub converged: bool,
}

impl FitOutcome {
    pub fn best(&self) -> &ObjectiveBreakdown {
        self.trace
            .iter()
            .min_by(|a, b| a.total.total_cmp(&b.total))
            .expect("trace is never empty")
    }
}

/// Draws `hp.sample_n` tissue pixels: without replacement when the mask has
/// enough, with replacement otherwise.
pub fn sample_tissue(od: &OdImage, mask: &TissueMask, hp: &AcdHyperparams) -> Result<Vec<Vec3>> {
    if mask.width() != od.width() || mask.height() != od.height() {
        return Err(Error::DimensionMismatch("mask and OD image differ in size"));
    }
    let tissue: Vec<usize> = mask.indices().collect();
    if tissue.len() < MIN_TISSUE_PIXELS {
        return Err(Error::InsufficientTissue {
            found: tissue.len(),
            required: MIN_TISSUE_PIXELS,
        });
    }
    let pixels = od.pixels();
    let mut rng = SplitMix64::seed_from_u64(hp.seed);
    let picked = if tissue.len() >= hp.sample_n {
        index::sample(&mut rng, tissue.len(), hp.sample_n)
            .into_iter()
            .map(|i| pixels[tissue[i]])
            .collect()
    } else {
        (0..hp.sample_n)
            .map(|_| pixels[tissue[rng.gen_range(0..tissue.len())]])
            .collect()
    };
    Ok(picked)
}

/// Fits a stain profile to the tissue pixels of `od`.
pub fn fit(
    od: &OdImage,
    mask: &TissueMask,
    hp: &AcdHyperparams,
    init: &AcdParams,
) -> Result<FitOutcome> {
    hp.validate()?;
    let samples = sample_tissue(od, mask, hp)?;
    fit_samples(&samples, hp, init)
}

/// Gradient descent with per-coordinate (Adam) step scaling on a pre-drawn
/// OD sample. The base step decays by 0.97 every 25 iterations; the run
/// stops at `max_iters` or after 10 consecutive iterations with
/// `|ΔL| < tol`.
pub fn fit_samples(samples: &[Vec3], hp: &AcdHyperparams, init: &AcdParams) -> Result<FitOutcome> {
    hp.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut x = init.projected().to_array();
    let mut m = [0.0; 6];
    let mut v = [0.0; 6];
    let mut trace = Vec::with_capacity(hp.max_iters.max(1));
    let mut best = (f64::INFINITY, x);
    let mut streak = 0;
    let mut converged = false;

    let iters = hp.max_iters.max(1);
    for t in 0..iters {
        let params = AcdParams::from_array(x);
        let (breakdown, grad) = objective_and_gradient(samples, &params, hp)?;
        if !breakdown.total.is_finite() {
            break;
        }
        if let Some(prev) = trace.last().map(|b: &ObjectiveBreakdown| b.total) {
            if (breakdown.total - prev).abs() < hp.tol {
                streak += 1;
            } else {
                streak = 0;
            }
        }
        trace.push(breakdown);
        if breakdown.total < best.0 {
            best = (breakdown.total, x);
        }
        if streak >= CONVERGED_STREAK {
            converged = true;
            break;
        }
        if t + 1 == iters {
            break;
        }

        let step = hp.learning_rate * libm::pow(DECAY_FACTOR, (t / DECAY_EVERY) as f64);
        let bias1 = 1.0 - libm::pow(BETA1, (t + 1) as f64);
        let bias2 = 1.0 - libm::pow(BETA2, (t + 1) as f64);
        for i in 0..6 {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
            x[i] -= step * (m[i] / bias1) / (libm::sqrt(v[i] / bias2) + EPSILON);
        }
        x = AcdParams::from_array(x).projected().to_array();
    }

    if trace.is_empty() {
        return Err(Error::InvalidParameter(
            "objective is not finite at the initial point",
        ));
    }
    let params = AcdParams::from_array(best.1);
    Ok(FitOutcome {
        profile: build_matrix(&params)?,
        params,
        trace,
        converged,
    })
}
