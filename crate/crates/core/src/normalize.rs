//! Template-based stain normalization.
//!
//! A template image is fitted once. Each source image is then fitted on its
//! own, its stain densities separated with the source profile, clamped to be
//! nonnegative, and recomposed with the template's stain matrix and weights:
//! `od_out = M_t · W_t⁻¹ · max(W_s · M_s⁻¹ · od, 0)`.

use alloc::string::String;

use crate::acd::{fit, AcdHyperparams, AcdParams, FitOutcome, StainProfile};
use crate::color::{
    od_to_rgb, rgb_to_od, tissue_mask, BackgroundIntensity, DEFAULT_TISSUE_THRESHOLD,
};
use crate::image::{OdImage, RgbImage};
use crate::Result;

/// Where a template came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    /// Lowercase hex SHA-256 of the source file bytes.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateProfile {
    pub profile: StainProfile,
    pub background: BackgroundIntensity,
    pub provenance: Option<Provenance>,
}

/// How background intensity is chosen for an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackgroundMode {
    /// 255 on every channel.
    #[default]
    White,
    /// Per-channel 95th percentile, see [`BackgroundIntensity::estimate`].
    Estimate,
}

impl BackgroundMode {
    pub fn resolve(&self, img: &RgbImage) -> BackgroundIntensity {
        match self {
            BackgroundMode::White => BackgroundIntensity::WHITE,
            BackgroundMode::Estimate => BackgroundIntensity::estimate(img),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizerConfig {
    pub hyperparams: AcdHyperparams,
    pub init: AcdParams,
    pub tissue_threshold: f64,
    pub background: BackgroundMode,
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        Self {
            hyperparams: AcdHyperparams::default(),
            init: AcdParams::ruifrok(),
            tissue_threshold: DEFAULT_TISSUE_THRESHOLD,
            background: BackgroundMode::White,
        }
    }
}

/// OD conversion, tissue masking and profile fit for one image.
pub fn fit_image(
    img: &RgbImage,
    cfg: &NormalizerConfig,
) -> Result<(FitOutcome, BackgroundIntensity, OdImage)> {
    let background = cfg.background.resolve(img);
    let od = rgb_to_od(img, &background);
    let mask = tissue_mask(&od, cfg.tissue_threshold);
    let outcome = fit(&od, &mask, &cfg.hyperparams, &cfg.init)?;
    Ok((outcome, background, od))
}

pub fn extract_template_profile(img: &RgbImage, cfg: &NormalizerConfig) -> Result<TemplateProfile> {
    let (outcome, background, _) = fit_image(img, cfg)?;
    Ok(TemplateProfile {
        profile: outcome.profile,
        background,
        provenance: None,
    })
}

/// Maps OD pixels separated with `source` onto the template's stain basis.
pub fn recombine(od: &OdImage, source: &StainProfile, template: &StainProfile) -> Result<OdImage> {
    let separate = source.separation_operator()?;
    let compose = template.composition_operator();
    let data = od
        .pixels()
        .iter()
        .map(|p| {
            let s = separate.mul_vec(p).map(|v| v.max(0.0));
            compose.mul_vec(&s).map(|v| v.max(0.0))
        })
        .collect();
    OdImage::new(od.width(), od.height(), data)
}

pub fn normalize_image(
    src: &RgbImage,
    template: &TemplateProfile,
    cfg: &NormalizerConfig,
) -> Result<RgbImage> {
    let (outcome, _, od) = fit_image(src, cfg)?;
    let out = recombine(&od, &outcome.profile, &template.profile)?;
    Ok(od_to_rgb(&out, &template.background))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{SynthSpec, Synthetic};
    use crate::Error;

    fn cfg() -> NormalizerConfig {
        NormalizerConfig {
            hyperparams: AcdHyperparams {
                sample_n: 4000,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn white_template_rejected() {
        let img = RgbImage::filled(256, 256, [255; 3]);
        assert!(matches!(
            extract_template_profile(&img, &cfg()),
            Err(Error::InsufficientTissue { .. })
        ));
    }

    #[test]
    fn white_pixels_stay_white() {
        let spec = SynthSpec {
            background_fraction: 0.3,
            ..SynthSpec::random(3, 64, 64, &cfg().hyperparams)
        };
        let synth = Synthetic::render(&spec);
        let template = extract_template_profile(&synth.image, &cfg()).unwrap();
        let out = normalize_image(&synth.image, &template, &cfg()).unwrap();
        for (a, b) in synth.image.pixels().zip(out.pixels()) {
            if a == [255; 3] {
                assert_eq!(b, [255; 3]);
            }
        }
    }

    #[test]
    fn template_extraction_is_deterministic() {
        let synth = Synthetic::render(&SynthSpec::random(11, 64, 64, &cfg().hyperparams));
        let a = extract_template_profile(&synth.image, &cfg()).unwrap();
        let b = extract_template_profile(&synth.image, &cfg()).unwrap();
        assert_eq!(a, b);
    }
}
