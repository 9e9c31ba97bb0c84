//! Finite-difference verification of the analytic objective gradient.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::linalg::{self, Vec3};
use crate::Result;

use super::objective::{objective, AcdHyperparams};
use super::profile::{build_matrix, AcdParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub points: usize,
    pub pixels_per_point: usize,
    /// Central-difference step in parameter units.
    pub step: f64,
    pub rel_tol: f64,
    /// Coordinates whose magnitude is below this are compared absolutely.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            points: 100,
            pixels_per_point: 256,
            step: 1e-5,
            rel_tol: 1e-4,
            abs_floor: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub points: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub max_abs_error_small: f64,
    pub failures: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Objective evaluated through the forward path only (matrix, inverse,
/// densities, objective).
fn forward(samples: &[Vec3], params: &AcdParams, hp: &AcdHyperparams) -> Result<f64> {
    let op = build_matrix(params)?.separation_operator()?;
    let densities: Vec<Vec3> = samples.iter().map(|p| op.mul_vec(p)).collect();
    Ok(objective(&densities, hp)?.total)
}

/// Central differences of the objective in each of the six parameters.
pub fn finite_difference_gradient(
    samples: &[Vec3],
    params: &AcdParams,
    hp: &AcdHyperparams,
    step: f64,
) -> Result<[f64; 6]> {
    let x = params.to_array();
    let mut out = [0.0; 6];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut plus = x;
        let mut minus = x;
        plus[i] += step;
        minus[i] -= step;
        let fp = forward(samples, &AcdParams::from_array(plus), hp)?;
        let fm = forward(samples, &AcdParams::from_array(minus), hp)?;
        *slot = (fp - fm) / (2.0 * step);
    }
    Ok(out)
}

/// Compares `grad` against central differences at `cfg.points` random
/// parameter points, each with its own random pixel sample.
pub fn check_gradient<G>(
    cfg: &GradCheckConfig,
    hp: &AcdHyperparams,
    grad: G,
) -> Result<GradCheckReport>
where
    G: Fn(&[Vec3], &AcdParams, &AcdHyperparams) -> Result<[f64; 6]>,
{
    let mut rng = SplitMix64::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        points: cfg.points,
        coordinates: 0,
        max_rel_error: 0.0,
        max_abs_error_small: 0.0,
        failures: 0,
    };
    for _ in 0..cfg.points {
        let (samples, params) = random_point(&mut rng, cfg.pixels_per_point);
        let analytic = grad(&samples, &params, hp)?;
        let numeric = finite_difference_gradient(&samples, &params, hp, cfg.step)?;
        for (a, f) in analytic.iter().zip(&numeric) {
            report.coordinates += 1;
            let scale = a.abs().max(f.abs());
            let diff = (a - f).abs();
            if !diff.is_finite() {
                report.failures += 1;
            } else if scale < cfg.abs_floor {
                report.max_abs_error_small = report.max_abs_error_small.max(diff);
                if diff >= cfg.abs_floor {
                    report.failures += 1;
                }
            } else {
                let rel = diff / scale;
                report.max_rel_error = report.max_rel_error.max(rel);
                if rel >= cfg.rel_tol {
                    report.failures += 1;
                }
            }
        }
    }
    Ok(report)
}

/// Pixels composed from a random H&E-like basis plus a little off-plane
/// noise, and parameters near (but not at) that basis.
fn random_point(rng: &mut SplitMix64, pixels: usize) -> (Vec<Vec3>, AcdParams) {
    loop {
        let h = linalg::unit_from_angles(rng.gen_range(1.0..1.4), rng.gen_range(0.6..1.0));
        let e = linalg::unit_from_angles(rng.gen_range(1.3..1.5), rng.gen_range(1.2..1.5));
        if linalg::angle_between(&h, &e).to_degrees() < 10.0 {
            continue;
        }
        let off = linalg::normalized(&linalg::cross(&h, &e)).expect("separated");
        let samples = (0..pixels)
            .map(|_| {
                let ch = rng.gen_range(0.2..1.0);
                let ce = rng.gen_range(0.2..1.0);
                let noise = rng.gen_range(-0.05..0.05);
                [0, 1, 2].map(|k| ch * h[k] + ce * e[k] + noise * off[k])
            })
            .collect();
        let (th, ph) = linalg::angles_from_vector(&h).expect("unit");
        let (te, pe) = linalg::angles_from_vector(&e).expect("unit");
        let mut jitter = || rng.gen_range(-0.05..0.05);
        let params = AcdParams {
            theta_h: th + jitter(),
            phi_h: ph + jitter(),
            theta_e: te + jitter(),
            phi_e: pe + jitter(),
            log_wh: rng.gen_range(-1.0..1.0),
            log_we: rng.gen_range(-1.0..1.0),
        };
        return (samples, params);
    }
}
