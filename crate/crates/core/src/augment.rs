//! Seeded random affine augmentation with nearest-neighbour sampling.
//!
//! Defaults are shear 0.2 rad, zoom ±0.2, rotation ±25°, horizontal flip,
//! and ±10% width/height shifts. Transforms are composed as
//! flip ∘ shift ∘ shear ∘ zoom ∘ rotate about the image center and applied by
//! inverse mapping: every output pixel copies the input pixel nearest to its
//! preimage, clamped to the image bounds. No new colors are created.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::image::RgbImage;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillMode {
    #[default]
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    /// Maximum shear angle in radians (x-axis shear, y fixed).
    pub shear_range: f64,
    /// Zoom factor drawn from `[1 - zoom_range, 1 + zoom_range]`.
    pub zoom_range: f64,
    /// Maximum rotation in degrees.
    pub rotation_range: f64,
    pub horizontal_flip: bool,
    /// Maximum shift as a fraction of the width.
    pub width_shift_range: f64,
    /// Maximum shift as a fraction of the height.
    pub height_shift_range: f64,
    pub fill_mode: FillMode,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            shear_range: 0.2,
            zoom_range: 0.2,
            rotation_range: 25.0,
            horizontal_flip: true,
            width_shift_range: 0.1,
            height_shift_range: 0.1,
            fill_mode: FillMode::Nearest,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// No-op configuration: every draw is the identity.
    pub fn identity() -> Self {
        Self {
            shear_range: 0.0,
            zoom_range: 0.0,
            rotation_range: 0.0,
            horizontal_flip: false,
            width_shift_range: 0.0,
            height_shift_range: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            self.shear_range,
            self.zoom_range,
            self.rotation_range,
            self.width_shift_range,
            self.height_shift_range,
        ];
        if !ranges.iter().all(|r| r.is_finite() && *r >= 0.0) {
            return Err(Error::InvalidParameter(
                "augmentation ranges must be finite and >= 0",
            ));
        }
        if self.zoom_range >= 1.0 {
            return Err(Error::InvalidParameter("zoom_range must be < 1"));
        }
        if self.shear_range >= core::f64::consts::FRAC_PI_2 {
            return Err(Error::InvalidParameter("shear_range must be below pi/2"));
        }
        Ok(())
    }
}

/// One draw of augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformParams {
    pub shear: f64,
    pub zoom: f64,
    pub rotation_deg: f64,
    /// Shift as a fraction of width / height.
    pub shift_x: f64,
    pub shift_y: f64,
    pub flip: bool,
}

pub fn sample_params<R: Rng + ?Sized>(cfg: &AugmentConfig, rng: &mut R) -> TransformParams {
    let mut sym = |r: f64| rng.gen_range(-r..=r);
    let shear = sym(cfg.shear_range);
    let zoom = 1.0 + sym(cfg.zoom_range);
    let rotation_deg = sym(cfg.rotation_range);
    let shift_x = sym(cfg.width_shift_range);
    let shift_y = sym(cfg.height_shift_range);
    let flip = cfg.horizontal_flip && rng.gen_bool(0.5);
    TransformParams {
        shear,
        zoom,
        rotation_deg,
        shift_x,
        shift_y,
        flip,
    }
}

/// Inverse mapping from output to input pixel coordinates, both measured
/// from the image center: `src = A · dst + t` with `matrix = [A | t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub matrix: [[f64; 3]; 2],
}

impl AffineTransform {
    pub const IDENTITY: AffineTransform = AffineTransform {
        matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    };

    /// Moves content by `(dx, dy)` pixels.
    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            matrix: [[1.0, 0.0, -dx], [0.0, 1.0, -dy]],
        }
    }

    pub fn horizontal_flip() -> Self {
        Self {
            matrix: [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        }
    }

    /// Builds the inverse of flip ∘ shift ∘ shear ∘ zoom ∘ rotate for an image
    /// of the given size.
    pub fn from_params(p: &TransformParams, width: usize, height: usize) -> Result<Self> {
        let theta = p.rotation_deg.to_radians();
        let (s, c) = (libm::sin(theta), libm::cos(theta));
        let rotate = [[c, -s], [s, c]];
        let zoom = [[p.zoom, 0.0], [0.0, p.zoom]];
        let shear = [[1.0, libm::tan(p.shear)], [0.0, 1.0]];
        let flip = [[if p.flip { -1.0 } else { 1.0 }, 0.0], [0.0, 1.0]];
        let forward = mul2(&flip, &mul2(&shear, &mul2(&zoom, &rotate)));
        let shift = [p.shift_x * width as f64, p.shift_y * height as f64];
        let offset = [flip[0][0] * shift[0], shift[1]];

        let det = forward[0][0] * forward[1][1] - forward[0][1] * forward[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::InvalidParameter(
                "affine transform is not invertible",
            ));
        }
        let inv = [
            [forward[1][1] / det, -forward[0][1] / det],
            [-forward[1][0] / det, forward[0][0] / det],
        ];
        // src = inv · (dst - offset)
        let t = [
            -(inv[0][0] * offset[0] + inv[0][1] * offset[1]),
            -(inv[1][0] * offset[0] + inv[1][1] * offset[1]),
        ];
        Ok(Self {
            matrix: [[inv[0][0], inv[0][1], t[0]], [inv[1][0], inv[1][1], t[1]]],
        })
    }

    pub fn is_valid(&self) -> bool {
        let m = &self.matrix;
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        m.iter().flatten().all(|v| v.is_finite()) && det != 0.0
    }

    /// Source coordinates (pixel units, top-left origin) for an output pixel.
    pub fn source_of(&self, x: f64, y: f64, width: usize, height: usize) -> (f64, f64) {
        let cx = (width as f64 - 1.0) / 2.0;
        let cy = (height as f64 - 1.0) / 2.0;
        let (dx, dy) = (x - cx, y - cy);
        let m = &self.matrix;
        (
            m[0][0] * dx + m[0][1] * dy + m[0][2] + cx,
            m[1][0] * dx + m[1][1] * dy + m[1][2] + cy,
        )
    }
}

fn mul2(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub fn sample_transform<R: Rng + ?Sized>(
    cfg: &AugmentConfig,
    rng: &mut R,
    width: usize,
    height: usize,
) -> Result<AffineTransform> {
    AffineTransform::from_params(&sample_params(cfg, rng), width, height)
}

/// The first `count` transforms an [`AugmentStream`] with the same config
/// would apply, for callers that warp in parallel.
pub fn sample_transforms(
    cfg: &AugmentConfig,
    count: usize,
    width: usize,
    height: usize,
) -> Result<alloc::vec::Vec<AffineTransform>> {
    cfg.validate()?;
    let mut rng = SplitMix64::seed_from_u64(cfg.seed);
    (0..count)
        .map(|_| sample_transform(cfg, &mut rng, width, height))
        .collect()
}

/// Nearest-neighbour inverse warp with border clamping.
pub fn apply_transform(img: &RgbImage, t: &AffineTransform) -> RgbImage {
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    if w == 0 || h == 0 {
        return out;
    }
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = t.source_of(x as f64, y as f64, w, h);
            let sx = if sx.is_finite() {
                libm::round(sx).clamp(0.0, max_x)
            } else {
                0.0
            };
            let sy = if sy.is_finite() {
                libm::round(sy).clamp(0.0, max_y)
            } else {
                0.0
            };
            out.set_pixel(x, y, img.pixel(sx as usize, sy as usize));
        }
    }
    out
}

/// Deterministic sequence of independently augmented copies of one image.
pub struct AugmentStream<'a> {
    img: &'a RgbImage,
    cfg: AugmentConfig,
    rng: SplitMix64,
    remaining: usize,
}

pub fn augment_stream<'a>(
    img: &'a RgbImage,
    cfg: &AugmentConfig,
    count: usize,
) -> Result<AugmentStream<'a>> {
    cfg.validate()?;
    Ok(AugmentStream {
        img,
        cfg: *cfg,
        rng: SplitMix64::seed_from_u64(cfg.seed),
        remaining: count,
    })
}

impl Iterator for AugmentStream<'_> {
    type Item = RgbImage;

    fn next(&mut self) -> Option<RgbImage> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let t = sample_transform(
            &self.cfg,
            &mut self.rng,
            self.img.width(),
            self.img.height(),
        )
        .expect("validated config yields invertible transforms");
        Some(apply_transform(self.img, &t))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for AugmentStream<'_> {}
