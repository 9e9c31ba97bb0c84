//! Synthetic H&E images rendered from a known stain profile.
//!
//! Densities are drawn per pixel as unweighted stain amounts `c`, the image
//! is composed as `od = c_h · h + c_e · e` and quantized with
//! `I = round(255 · exp(-od))`. Stain weights are only identifiable relative
//! to the objective's balance targets, so the ground-truth weights are the
//! ones that bring the tissue means of `W · c` to `eta · gamma` and
//! `(1 - eta) · gamma`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::acd::{AcdHyperparams, StainProfile, RUIFROK_EOSIN, RUIFROK_HEMATOXYLIN};
use crate::linalg::{self, Vec3};
use crate::RgbImage;

/// Smallest and largest stain amount of a stained pixel.
const DENSITY_RANGE: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub hematoxylin: Vec3,
    pub eosin: Vec3,
    /// Seeds the density field; two specs with the same seed share it.
    pub density_seed: u64,
    /// Share of unstained (white) pixels.
    pub background_fraction: f64,
    pub eta: f64,
    pub gamma: f64,
}

impl SynthSpec {
    /// Random stain directions near the Ruifrok pair, inside the positive
    /// octant and at least 15 degrees apart.
    pub fn random(seed: u64, width: usize, height: usize, hp: &AcdHyperparams) -> Self {
        let (hematoxylin, eosin) = random_stains(seed);
        Self {
            width,
            height,
            hematoxylin,
            eosin,
            density_seed: seed,
            background_fraction: 0.0,
            eta: hp.eta,
            gamma: hp.gamma,
        }
    }
}

pub fn random_stains(seed: u64) -> (Vec3, Vec3) {
    let mut rng = SplitMix64::seed_from_u64(seed ^ 0x5eed_57a1_4e00_0000);
    let (th, ph) = linalg::angles_from_vector(&RUIFROK_HEMATOXYLIN).unwrap();
    let (te, pe) = linalg::angles_from_vector(&RUIFROK_EOSIN).unwrap();
    let margin = 0.03;
    let top = core::f64::consts::FRAC_PI_2 - margin;
    loop {
        let mut d = || rng.gen_range(-0.2..0.2);
        let a = [th + d(), ph + d(), te + d(), pe + d()];
        if a.iter().any(|v| *v < margin || *v > top) {
            continue;
        }
        let h = linalg::unit_from_angles(a[0], a[1]);
        let e = linalg::unit_from_angles(a[2], a[3]);
        if linalg::angle_between(&h, &e).to_degrees() >= 15.0 {
            return (h, e);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub image: RgbImage,
    /// Ground truth stain directions and weights.
    pub profile: StainProfile,
    /// Unweighted `(c_h, c_e)` per pixel.
    pub amounts: Vec<[f64; 2]>,
}

impl Synthetic {
    pub fn render(spec: &SynthSpec) -> Self {
        let mut rng = SplitMix64::seed_from_u64(spec.density_seed);
        let (lo, hi) = DENSITY_RANGE;
        let amounts: Vec<[f64; 2]> = (0..spec.width * spec.height)
            .map(|_| {
                if rng.gen::<f64>() < spec.background_fraction {
                    return [0.0, 0.0];
                }
                let kind = rng.gen::<f64>();
                let a = rng.gen_range(lo..hi);
                let b = rng.gen_range(lo..hi);
                if kind < 0.4 {
                    [a, 0.0]
                } else if kind < 0.8 {
                    [0.0, b]
                } else {
                    [0.6 * a, 0.6 * b]
                }
            })
            .collect();

        let h = linalg::normalized(&spec.hematoxylin).unwrap();
        let e = linalg::normalized(&spec.eosin).unwrap();
        let data: Vec<u8> = amounts
            .iter()
            .flat_map(|c| {
                [0, 1, 2].map(|k| {
                    let od = c[0] * h[k] + c[1] * e[k];
                    libm::round(255.0 * libm::exp(-od)).clamp(0.0, 255.0) as u8
                })
            })
            .collect();
        let image = RgbImage::new(spec.width, spec.height, data).unwrap();

        let stained: Vec<&[f64; 2]> = amounts.iter().filter(|c| c[0] + c[1] > 0.0).collect();
        let n = stained.len().max(1) as f64;
        let mean_h = stained.iter().map(|c| c[0]).sum::<f64>() / n;
        let mean_e = stained.iter().map(|c| c[1]).sum::<f64>() / n;
        let wh = spec.eta * spec.gamma / mean_h;
        let we = (1.0 - spec.eta) * spec.gamma / mean_e;
        let profile = StainProfile::from_stain_vectors(&h, &e, wh, we).unwrap();
        Self {
            image,
            profile,
            amounts,
        }
    }
}
