//! Pixel-level color arithmetic: RGB to optical density, the inverse, and
//! tissue/background masking.
//!
//! Optical density follows Beer-Lambert: `od = -ln(I / I_m)` where `I_m` is the
//! background (unattenuated) intensity.

use alloc::vec::Vec;

use crate::image::{OdImage, RgbImage, TissueMask};
use crate::{Error, Result};

/// Intensities below this are raised to it before taking the log.
pub const INTENSITY_FLOOR: f64 = 1.0;

/// Default mean-OD threshold above which a pixel counts as tissue.
pub const DEFAULT_TISSUE_THRESHOLD: f64 = 0.15;

/// Per-channel background intensity `I_m`, each in `(0, 255]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundIntensity([f64; 3]);

impl BackgroundIntensity {
    pub const WHITE: BackgroundIntensity = BackgroundIntensity([255.0; 3]);

    pub fn new(rgb: [f64; 3]) -> Result<Self> {
        if rgb.iter().all(|v| v.is_finite() && *v > 0.0 && *v <= 255.0) {
            Ok(Self(rgb))
        } else {
            Err(Error::InvalidParameter(
                "background intensity must lie in (0, 255]",
            ))
        }
    }

    /// Same level on all three channels.
    pub fn uniform(level: f64) -> Result<Self> {
        Self::new([level; 3])
    }

    /// Estimates `I_m` as the per-channel 95th percentile of pixel intensities,
    /// i.e. the level of the brightest pixels, floored at [`INTENSITY_FLOOR`].
    pub fn estimate(img: &RgbImage) -> Self {
        if img.pixel_count() == 0 {
            return Self::WHITE;
        }
        let mut out = [255.0; 3];
        for (c, slot) in out.iter_mut().enumerate() {
            let mut hist = [0usize; 256];
            for p in img.pixels() {
                hist[p[c] as usize] += 1;
            }
            // nearest-rank percentile
            let rank = (img.pixel_count() * 95).div_ceil(100).max(1);
            let mut seen = 0;
            for (level, n) in hist.iter().enumerate() {
                seen += n;
                if seen >= rank {
                    *slot = (level as f64).max(INTENSITY_FLOOR);
                    break;
                }
            }
        }
        Self(out)
    }

    pub fn channels(&self) -> [f64; 3] {
        self.0
    }
}

impl Default for BackgroundIntensity {
    fn default() -> Self {
        Self::WHITE
    }
}

/// Optical density of one channel value.
#[inline]
pub fn intensity_to_od(intensity: f64, background: f64) -> f64 {
    let od = -libm::log(intensity.max(INTENSITY_FLOOR) / background);
    // I > I_m would give negative absorbance
    od.max(0.0)
}

/// 8-bit intensity for one optical density value.
#[inline]
pub fn od_to_intensity(od: f64, background: f64) -> u8 {
    let v = libm::round(background * libm::exp(-od));
    if v.is_nan() {
        0
    } else {
        v.clamp(0.0, 255.0) as u8
    }
}

pub fn rgb_to_od(img: &RgbImage, bg: &BackgroundIntensity) -> OdImage {
    let lut = od_lookup(bg);
    let data = img
        .pixels()
        .map(|p| {
            [
                lut[0][p[0] as usize],
                lut[1][p[1] as usize],
                lut[2][p[2] as usize],
            ]
        })
        .collect();
    OdImage::from_raw(img.width(), img.height(), data)
}

fn od_lookup(bg: &BackgroundIntensity) -> [[f64; 256]; 3] {
    let mut lut = [[0.0; 256]; 3];
    for (c, table) in lut.iter_mut().enumerate() {
        for (i, v) in table.iter_mut().enumerate() {
            *v = intensity_to_od(i as f64, bg.0[c]);
        }
    }
    lut
}

pub fn od_to_rgb(od: &OdImage, bg: &BackgroundIntensity) -> RgbImage {
    let b = bg.0;
    let data: Vec<u8> = od
        .pixels()
        .iter()
        .flat_map(|p| {
            [
                od_to_intensity(p[0], b[0]),
                od_to_intensity(p[1], b[1]),
                od_to_intensity(p[2], b[2]),
            ]
        })
        .collect();
    RgbImage::new(od.width(), od.height(), data).expect("3 bytes per OD pixel")
}

/// Tissue iff the mean of the pixel's three densities exceeds `threshold`.
pub fn tissue_mask(od: &OdImage, threshold: f64) -> TissueMask {
    let bits = od
        .pixels()
        .iter()
        .map(|p| (p[0] + p[1] + p[2]) / 3.0 > threshold)
        .collect();
    TissueMask::new(od.width(), od.height(), bits).expect("one bit per pixel")
}
