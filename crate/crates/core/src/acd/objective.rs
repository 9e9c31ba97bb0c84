use crate::linalg::{self, Mat3, Vec3};
use crate::{Error, Result};

use super::profile::{build_matrix, AcdParams};

/// Objective weights and optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcdHyperparams {
    /// Weight of the stain-mixing (saturation) penalty inside the separation term.
    pub lambda_p: f64,
    /// Weight of the stain balance term.
    pub lambda_b: f64,
    /// Weight of the overall intensity term.
    pub lambda_e: f64,
    /// Target share of eosin in the balance term, strictly inside (0, 1).
    pub eta: f64,
    /// Target mean of `h + e` over the sample.
    pub gamma: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Convergence threshold on the per-iteration change of the objective.
    pub tol: f64,
    /// Number of tissue pixels drawn for the fit.
    pub sample_n: usize,
    pub seed: u64,
}

impl Default for AcdHyperparams {
    fn default() -> Self {
        Self {
            lambda_p: 0.02,
            lambda_b: 10.0,
            lambda_e: 1.0,
            eta: 0.6,
            gamma: 0.3,
            learning_rate: 0.1,
            max_iters: 300,
            tol: 1e-7,
            sample_n: 10_000,
            seed: 0,
        }
    }
}

impl AcdHyperparams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(nonneg(self.lambda_p) && nonneg(self.lambda_b) && nonneg(self.lambda_e)) {
            return Err(Error::InvalidParameter("objective weights must be >= 0"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidParameter(
                "eta must lie strictly inside (0, 1)",
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter("gamma must be > 0"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be > 0"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be > 0"));
        }
        if self.sample_n < 100 {
            return Err(Error::InvalidParameter("sample_n must be >= 100"));
        }
        Ok(())
    }
}

/// Objective value split into its terms.
///
/// `total = separation + lambda_b * balance + lambda_e * intensity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBreakdown {
    /// Mean squared residual density plus `lambda_p` times the mean stain-mixing penalty.
    pub separation: f64,
    /// Squared imbalance `((1 - eta) mean(h) - eta mean(e))²`.
    pub balance: f64,
    /// Squared deviation `(gamma - mean(h + e))²`.
    pub intensity: f64,
    pub total: f64,
}

/// Stain-mixing penalty `2|h||e| / (h² + e²)`, in `[0, 1]`; zero at the origin.
///
/// On nonnegative densities this is `2he / (h² + e²)`. Taking magnitudes keeps
/// pixels that a candidate basis pushes to negative density from lowering the
/// penalty, which would otherwise reward collapsing the two stain vectors.
#[inline]
pub fn saturation(h: f64, e: f64) -> f64 {
    let q = h * h + e * e;
    if q == 0.0 {
        0.0
    } else {
        2.0 * (h * e).abs() / q
    }
}

/// Partials of [`saturation`] with respect to `h` and `e` (zero at the origin).
#[inline]
fn saturation_partials(h: f64, e: f64) -> (f64, f64) {
    let q = h * h + e * e;
    if q == 0.0 {
        return (0.0, 0.0);
    }
    let q2 = q * q;
    let diff = e * e - h * h;
    (
        2.0 * e.abs() * sign(h) * diff / q2,
        -2.0 * h.abs() * sign(e) * diff / q2,
    )
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Objective over stain densities of the sampled pixels.
pub fn objective(densities: &[Vec3], hp: &AcdHyperparams) -> Result<ObjectiveBreakdown> {
    if densities.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = densities.len() as f64;
    let (mut sum_h, mut sum_e, mut sum_d2, mut sum_sat) = (0.0, 0.0, 0.0, 0.0);
    for s in densities {
        sum_h += s[0];
        sum_e += s[1];
        sum_d2 += s[2] * s[2];
        sum_sat += saturation(s[0], s[1]);
    }
    Ok(combine(sum_h / n, sum_e / n, sum_d2 / n, sum_sat / n, hp))
}

fn combine(
    mean_h: f64,
    mean_e: f64,
    mean_d2: f64,
    mean_sat: f64,
    hp: &AcdHyperparams,
) -> ObjectiveBreakdown {
    let separation = mean_d2 + hp.lambda_p * mean_sat;
    let balance = square((1.0 - hp.eta) * mean_h - hp.eta * mean_e);
    let intensity = square(hp.gamma - (mean_h + mean_e));
    ObjectiveBreakdown {
        separation,
        balance,
        intensity,
        total: separation + hp.lambda_b * balance + hp.lambda_e * intensity,
    }
}

#[inline]
fn square(v: f64) -> f64 {
    v * v
}

/// Gradient of the objective with respect to the six [`AcdParams`] scalars,
/// evaluated on raw OD samples.
pub fn gradient(od_samples: &[Vec3], params: &AcdParams, hp: &AcdHyperparams) -> Result<[f64; 6]> {
    objective_and_gradient(od_samples, params, hp).map(|(_, g)| g)
}

/// Objective and its analytic gradient in two passes over the sample.
///
/// With `c = M⁻¹ od` and `s = W c`, the sensitivity to the matrix is
/// `∂L/∂M = -M⁻ᵀ W Σ g cᵀ` where `g = ∂L/∂s`. The residual column is the unit
/// cross product of the stain columns, so its sensitivity is folded back onto
/// the H and E directions before applying the spherical-angle partials.
pub fn objective_and_gradient(
    od_samples: &[Vec3],
    params: &AcdParams,
    hp: &AcdHyperparams,
) -> Result<(ObjectiveBreakdown, [f64; 6])> {
    if od_samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let profile = build_matrix(params)?;
    let deconv = profile.deconvolution()?;
    let (wh, we) = (profile.wh(), profile.we());
    let n = od_samples.len() as f64;

    // First pass: means, needed for the balance and intensity partials.
    let (mut sum_h, mut sum_e, mut sum_d2, mut sum_sat) = (0.0, 0.0, 0.0, 0.0);
    for od in od_samples {
        let c = deconv.mul_vec(od);
        let (h, e, d) = (wh * c[0], we * c[1], c[2]);
        sum_h += h;
        sum_e += e;
        sum_d2 += d * d;
        sum_sat += saturation(h, e);
    }
    let (mean_h, mean_e) = (sum_h / n, sum_e / n);
    let breakdown = combine(mean_h, mean_e, sum_d2 / n, sum_sat / n, hp);

    // Partials shared by every pixel.
    let imbalance = (1.0 - hp.eta) * mean_h - hp.eta * mean_e;
    let shortfall = hp.gamma - (mean_h + mean_e);
    let common_h =
        (2.0 * hp.lambda_b * imbalance * (1.0 - hp.eta) - 2.0 * hp.lambda_e * shortfall) / n;
    let common_e = (-2.0 * hp.lambda_b * imbalance * hp.eta - 2.0 * hp.lambda_e * shortfall) / n;

    // Second pass: accumulate Σ g cᵀ and the log-weight partials.
    let mut outer = Mat3::ZERO;
    let (mut g_log_wh, mut g_log_we) = (0.0, 0.0);
    for od in od_samples {
        let c = deconv.mul_vec(od);
        let (h, e, d) = (wh * c[0], we * c[1], c[2]);
        let (dsat_h, dsat_e) = saturation_partials(h, e);
        let g = [
            hp.lambda_p * dsat_h / n + common_h,
            hp.lambda_p * dsat_e / n + common_e,
            2.0 * d / n,
        ];
        g_log_wh += g[0] * h;
        g_log_we += g[1] * e;
        for (row, g_r) in outer.0.iter_mut().zip(g) {
            for (cell, c_k) in row.iter_mut().zip(c) {
                *cell += g_r * c_k;
            }
        }
    }

    let d_matrix = -(deconv.transpose() * Mat3::diag(&profile.weights()) * outer);
    let h = profile.hematoxylin();
    let e = profile.eosin();
    let r = profile.residual();
    let cross_norm = linalg::norm(&linalg::cross(&h, &e));
    // dL/dr projected onto the tangent of the unit residual, scaled by 1/|h × e|.
    let g_r = d_matrix.column(2);
    let tangent = linalg::scale(
        &sub(&g_r, &linalg::scale(&r, linalg::dot(&r, &g_r))),
        1.0 / cross_norm,
    );
    let g_h = add(&d_matrix.column(0), &linalg::cross(&e, &tangent));
    let g_e = add(&d_matrix.column(1), &linalg::cross(&tangent, &h));

    let (dh_theta, dh_phi) = linalg::unit_angle_partials(params.theta_h, params.phi_h);
    let (de_theta, de_phi) = linalg::unit_angle_partials(params.theta_e, params.phi_e);
    Ok((
        breakdown,
        [
            linalg::dot(&g_h, &dh_theta),
            linalg::dot(&g_h, &dh_phi),
            linalg::dot(&g_e, &de_theta),
            linalg::dot(&g_e, &de_phi),
            g_log_wh,
            g_log_we,
        ],
    ))
}

#[inline]
fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn hp_for_example() -> AcdHyperparams {
        AcdHyperparams {
            lambda_p: 1.0,
            lambda_b: 1.0,
            lambda_e: 1.0,
            eta: 0.5,
            gamma: 0.8,
            ..AcdHyperparams::default()
        }
    }

    #[test]
    fn single_pixel_hand_evaluation() {
        // d = 0, sat = 2*0.16/0.32 = 1, balance = (0.2 - 0.2)^2, intensity = (0.8 - 0.8)^2
        let b = objective(&[[0.4, 0.4, 0.0]], &hp_for_example()).unwrap();
        assert!((b.separation - 1.0).abs() < 1e-15);
        assert_eq!(b.balance, 0.0);
        assert!(b.intensity.abs() < 1e-30);
        assert!((b.total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn absent_stain_has_no_mixing_penalty() {
        let b = objective(&[[0.4, 0.0, 0.0], [1.2, 0.0, 0.0]], &hp_for_example()).unwrap();
        assert_eq!(b.separation, 0.0);
    }

    #[test]
    fn balanced_means_zero_balance() {
        let hp = AcdHyperparams {
            eta: 0.5,
            ..hp_for_example()
        };
        let b = objective(&[[0.1, 0.5, 0.0], [0.5, 0.1, 0.3]], &hp).unwrap();
        assert_eq!(b.balance, 0.0);
    }

    #[test]
    fn empty_sample() {
        assert_eq!(objective(&[], &hp_for_example()), Err(Error::EmptySample));
        assert_eq!(
            gradient(&[], &AcdParams::ruifrok(), &hp_for_example()),
            Err(Error::EmptySample)
        );
    }

    #[test]
    fn saturation_bounds() {
        assert_eq!(saturation(0.0, 0.0), 0.0);
        assert_eq!(saturation(0.3, 0.3), 1.0);
        assert_eq!(saturation(0.3, 0.0), 0.0);
        assert!(saturation(0.2, 0.9) < 1.0);
    }

    #[test]
    fn zero_od_gives_zero_gradient() {
        let g = gradient(
            &vec![[0.0; 3]; 20],
            &AcdParams::ruifrok(),
            &AcdHyperparams::default(),
        )
        .unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn intensity_term_vanishes_at_target() {
        let params = AcdParams::ruifrok();
        let od: Vec<Vec3> = (0..50)
            .map(|i| {
                let t = i as f64 / 50.0;
                [0.2 + 0.5 * t, 0.6 - 0.3 * t, 0.15 + 0.1 * t]
            })
            .collect();
        let prof = build_matrix(&params).unwrap();
        let op = prof.separation_operator().unwrap();
        let mean_he = od
            .iter()
            .map(|p| {
                let s = op.mul_vec(p);
                s[0] + s[1]
            })
            .sum::<f64>()
            / od.len() as f64;
        let with = AcdHyperparams {
            gamma: mean_he,
            lambda_e: 1.0,
            ..AcdHyperparams::default()
        };
        let without = AcdHyperparams {
            lambda_e: 0.0,
            ..with
        };
        let g1 = gradient(&od, &params, &with).unwrap();
        let g0 = gradient(&od, &params, &without).unwrap();
        for i in 0..6 {
            assert!(
                (g1[i] - g0[i]).abs() < 1e-14,
                "coord {i}: {} vs {}",
                g1[i],
                g0[i]
            );
        }
    }

    #[test]
    fn hyperparam_validation() {
        assert!(AcdHyperparams::default().validate().is_ok());
        assert!(AcdHyperparams {
            eta: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AcdHyperparams {
            eta: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AcdHyperparams {
            sample_n: 99,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AcdHyperparams {
            lambda_b: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
