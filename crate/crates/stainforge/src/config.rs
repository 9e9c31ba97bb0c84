//! Run configuration: defaults, overridden by a `key=value` file, overridden
//! by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use stainforge_core::augment::AugmentConfig;
use stainforge_core::normalize::{BackgroundMode, NormalizerConfig};

use crate::error::{Error, Result};
use crate::kv::{self, Entry};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub normalizer: NormalizerConfig,
    pub augment: AugmentConfig,
    /// `None` means one worker per available core.
    pub workers: Option<usize>,
    pub template: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

pub const KEYS: &[&str] = &[
    "lambda_p",
    "lambda_b",
    "lambda_e",
    "eta",
    "gamma",
    "learning_rate",
    "max_iters",
    "tol",
    "sample_n",
    "seed",
    "tissue_threshold",
    "background",
    "shear_range",
    "zoom_range",
    "rotation_range",
    "horizontal_flip",
    "width_shift_range",
    "height_shift_range",
    "augment_seed",
    "workers",
    "template",
    "out_dir",
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for entry in kv::parse(&text, path)? {
            self.apply(&entry, path)?;
        }
        self.validate()
    }

    fn apply(&mut self, e: &Entry, path: &Path) -> Result<()> {
        let hp = &mut self.normalizer.hyperparams;
        let aug = &mut self.augment;
        let v = |e: &Entry| kv::parse_value::<f64>(e, path);
        match e.key.as_str() {
            "lambda_p" => hp.lambda_p = v(e)?,
            "lambda_b" => hp.lambda_b = v(e)?,
            "lambda_e" => hp.lambda_e = v(e)?,
            "eta" => hp.eta = v(e)?,
            "gamma" => hp.gamma = v(e)?,
            "learning_rate" => hp.learning_rate = v(e)?,
            "max_iters" => hp.max_iters = kv::parse_value(e, path)?,
            "tol" => hp.tol = v(e)?,
            "sample_n" => hp.sample_n = kv::parse_value(e, path)?,
            "seed" => hp.seed = kv::parse_value(e, path)?,
            "tissue_threshold" => self.normalizer.tissue_threshold = v(e)?,
            "background" => {
                self.normalizer.background = parse_background(&e.value).ok_or_else(|| {
                    Error::parse(path, e.line, "background must be `white` or `estimate`")
                })?
            }
            "shear_range" => aug.shear_range = v(e)?,
            "zoom_range" => aug.zoom_range = v(e)?,
            "rotation_range" => aug.rotation_range = v(e)?,
            "horizontal_flip" => aug.horizontal_flip = kv::parse_value(e, path)?,
            "width_shift_range" => aug.width_shift_range = v(e)?,
            "height_shift_range" => aug.height_shift_range = v(e)?,
            "augment_seed" => aug.seed = kv::parse_value(e, path)?,
            "workers" => self.workers = Some(kv::parse_value(e, path)?),
            "template" => self.template = Some(PathBuf::from(&e.value)),
            "out_dir" => self.out_dir = Some(PathBuf::from(&e.value)),
            other => return Err(Error::parse(path, e.line, format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.normalizer.hyperparams.validate()?;
        self.augment.validate()?;
        let t = self.normalizer.tissue_threshold;
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidArgument(
                "tissue_threshold must be >= 0".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn parse_background(s: &str) -> Option<BackgroundMode> {
    match s.to_ascii_lowercase().as_str() {
        "white" => Some(BackgroundMode::White),
        "estimate" => Some(BackgroundMode::Estimate),
        _ => None,
    }
}
