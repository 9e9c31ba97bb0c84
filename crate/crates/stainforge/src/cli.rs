//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use stainforge_core::acd::{
    check_gradient, gradient, AcdHyperparams, AcdParams, GradCheckConfig, GradCheckReport,
};
use stainforge_core::augment::{apply_transform, sample_transforms};
use stainforge_core::linalg::Vec3;
use stainforge_core::metrics::evaluate;
use stainforge_core::normalize::{fit_image, Provenance, TemplateProfile};
use stainforge_core::split::{split, SplitMode};
use stainforge_core::Magnification;

use crate::batch;
use crate::config::{parse_background, RunConfig};
use crate::dataset;
use crate::error::{exit, Error, Result};
use crate::evaluate as eval_io;
use crate::odim;
use crate::png;
use crate::profile_file::{self, StoredProfile};

#[derive(Debug, Parser)]
#[command(
    name = "stainforge",
    version,
    about = "H&E stain normalization toolkit"
)]
pub struct Cli {
    /// `key=value` run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a stain profile to a template image and save it.
    FitTemplate(FitTemplateArgs),
    /// Normalize a batch of images to a template profile.
    Normalize(NormalizeArgs),
    /// Write seeded affine augmentations of one image.
    Augment(AugmentArgs),
    /// Scan a dataset tree and write a stratified split manifest.
    Split(SplitArgs),
    /// Compute classification metrics from a predictions CSV.
    Evaluate(EvaluateArgs),
    /// Compare the analytic objective gradient with finite differences.
    CheckGradient(CheckGradientArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub lambda_p: Option<f64>,
    #[arg(long)]
    pub lambda_b: Option<f64>,
    #[arg(long)]
    pub lambda_e: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub sample_n: Option<usize>,
    /// Seed for tissue pixel sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mean optical density above which a pixel counts as tissue.
    #[arg(long)]
    pub tissue_threshold: Option<f64>,
    /// `white` or `estimate`.
    #[arg(long)]
    pub background: Option<String>,
}

impl FitArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let hp = &mut cfg.normalizer.hyperparams;
        macro_rules! set {
            ($($field:ident),*) => {$( if let Some(v) = self.$field { hp.$field = v; } )*};
        }
        set!(
            lambda_p,
            lambda_b,
            lambda_e,
            eta,
            gamma,
            learning_rate,
            max_iters,
            tol,
            sample_n,
            seed
        );
        if let Some(t) = self.tissue_threshold {
            cfg.normalizer.tissue_threshold = t;
        }
        if let Some(b) = &self.background {
            cfg.normalizer.background = parse_background(b).ok_or_else(|| {
                Error::InvalidArgument("--background must be `white` or `estimate`".into())
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct FitTemplateArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out_profile: PathBuf,
    /// Also write the image's optical densities in ODIM format.
    #[arg(long, value_name = "FILE")]
    pub dump_od: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("inputs").required(true).args(["manifest", "input_dir"])))]
pub struct NormalizeArgs {
    /// Manifest CSV (uses its `path` column) or a plain list of paths.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory whose `.png` files are normalized (not recursive).
    #[arg(long)]
    pub input_dir: Option<PathBuf>,
    #[arg(long)]
    pub template: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Per-image report; defaults to `batch_report.csv` in the output directory.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum shear angle in radians.
    #[arg(long)]
    pub shear_range: Option<f64>,
    #[arg(long)]
    pub zoom_range: Option<f64>,
    /// Maximum rotation in degrees.
    #[arg(long)]
    pub rotation_range: Option<f64>,
    #[arg(long)]
    pub horizontal_flip: Option<bool>,
    #[arg(long)]
    pub width_shift_range: Option<f64>,
    #[arg(long)]
    pub height_shift_range: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub root: PathBuf,
    /// Keep only one magnification, e.g. `200` or `200X`.
    #[arg(long)]
    pub magnification: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_manifest: PathBuf,
    /// Keep all images of a patient in the same split.
    #[arg(long)]
    pub patient_level: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV with columns `path,true_label,score`.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value_t = stainforge_core::metrics::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out_report: PathBuf,
    /// Also write the ROC curve as `fpr,tpr,threshold`.
    #[arg(long)]
    pub out_roc: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckGradientArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
        }
    };
    match execute(&cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::FitTemplate(a) => {
            a.fit.apply(&mut cfg)?;
            cfg.validate()?;
            fit_template(a, &cfg)
        }
        Command::Normalize(a) => {
            a.fit.apply(&mut cfg)?;
            if a.workers.is_some() {
                cfg.workers = a.workers;
            }
            cfg.validate()?;
            normalize(a, &cfg)
        }
        Command::Augment(a) => augment(a, &mut cfg),
        Command::Split(a) => split_command(a),
        Command::Evaluate(a) => evaluate_command(a),
        Command::CheckGradient(a) => {
            let report =
                gradient_check_command(a.seed, a.points, &cfg.normalizer.hyperparams, gradient)?;
            println!(
                "gradient check passed: {} points, {} coordinates, max relative error {:.3e}",
                report.points, report.coordinates, report.max_rel_error
            );
            Ok(())
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn fit_template(a: &FitTemplateArgs, cfg: &RunConfig) -> Result<()> {
    let bytes = std::fs::read(&a.image).map_err(|e| Error::io(&a.image, e))?;
    let img = png::decode_png(&bytes).map_err(|message| Error::Image {
        path: a.image.clone(),
        message,
    })?;
    let (outcome, background, od) = fit_image(&img, &cfg.normalizer)?;
    let best = outcome.best();
    eprintln!(
        "fitted {} in {} iterations (converged: {}), objective {:.6e}",
        a.image.display(),
        outcome.trace.len(),
        outcome.converged,
        best.total
    );
    if let Some(path) = &a.dump_od {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        odim::write_od(std::io::BufWriter::new(file), &od).map_err(|e| Error::io(path, e))?;
    }
    let stored = StoredProfile {
        template: TemplateProfile {
            profile: outcome.profile,
            background,
            provenance: Some(Provenance {
                source: a.image.to_string_lossy().into_owned(),
                sha256: sha256_hex(&bytes),
            }),
        },
        hyperparams: cfg.normalizer.hyperparams,
    };
    profile_file::save(&a.out_profile, &stored)
}

fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn required(flag: Option<&PathBuf>, from_config: Option<&PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or(from_config)
        .cloned()
        .ok_or_else(|| Error::InvalidArgument(format!("--{name} is required")))
}

fn normalize(a: &NormalizeArgs, cfg: &RunConfig) -> Result<()> {
    let template_path = required(a.template.as_ref(), cfg.template.as_ref(), "template")?;
    let out_dir = required(a.out_dir.as_ref(), cfg.out_dir.as_ref(), "out-dir")?;
    let template = profile_file::load(&template_path)?.template;
    let inputs = match (&a.manifest, &a.input_dir) {
        (Some(m), _) => dataset::read_path_list(m)?,
        (None, Some(d)) => list_pngs(d)?,
        (None, None) => unreachable!("clap requires one input source"),
    };
    let workers = batch::resolve_workers(cfg.workers)?;
    eprintln!("normalizing {} images with {workers} workers", inputs.len());
    let report = batch::normalize_batch(&inputs, &template, &cfg.normalizer, &out_dir, workers)?;
    let report_path = a
        .report
        .clone()
        .unwrap_or_else(|| out_dir.join("batch_report.csv"));
    report.save_csv(&report_path)?;
    for item in report.items.iter().filter(|i| i.error.is_some()) {
        eprintln!(
            "failed: {}: {}",
            item.input.display(),
            item.error.as_deref().unwrap_or("")
        );
    }
    eprintln!(
        "done: {} ok, {} failed, total {:.1} ms, mean {:.1} ms per image, wall {:.1} ms",
        report.items.len() - report.failed(),
        report.failed(),
        report.total_millis(),
        report.mean_millis().unwrap_or(0.0),
        report.wall_millis
    );
    match report.failed() {
        0 => Ok(()),
        failed => Err(Error::BatchFailures {
            failed,
            total: report.items.len(),
        }),
    }
}

fn augment(a: &AugmentArgs, cfg: &mut RunConfig) -> Result<()> {
    let aug = &mut cfg.augment;
    macro_rules! set {
        ($($field:ident),*) => {$( if let Some(v) = a.$field { aug.$field = v; } )*};
    }
    set!(
        shear_range,
        zoom_range,
        rotation_range,
        horizontal_flip,
        width_shift_range,
        height_shift_range
    );
    if let Some(s) = a.seed {
        aug.seed = s;
    }
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    cfg.validate()?;
    let out_dir = required(a.out_dir.as_ref(), cfg.out_dir.as_ref(), "out-dir")?;
    let img = png::read_png(&a.input)?;
    let transforms = sample_transforms(&cfg.augment, a.count, img.width(), img.height())?;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let stem = a
        .input
        .file_stem()
        .map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned());
    let indexed: Vec<(usize, _)> = transforms.into_iter().enumerate().collect();
    let workers = batch::resolve_workers(cfg.workers)?;
    let results = batch::run_pool(workers, &indexed, |(i, t)| {
        let path = out_dir.join(format!("{stem}_aug_{i:04}.png"));
        png::write_png(&path, &apply_transform(&img, t))
    })?;
    results.into_iter().collect::<Result<Vec<()>>>()?;
    eprintln!("wrote {} augmentations to {}", a.count, out_dir.display());
    Ok(())
}

fn split_command(a: &SplitArgs) -> Result<()> {
    let filter = a
        .magnification
        .as_deref()
        .map(|m| {
            m.parse::<Magnification>()
                .map_err(|_| Error::InvalidArgument(format!("unknown magnification `{m}`")))
        })
        .transpose()?;
    let scan = dataset::scan(&a.root, filter)?;
    for s in &scan.skipped {
        eprintln!("skipped {}: {}", s.path.display(), s.reason);
    }
    let mode = if a.patient_level {
        SplitMode::Patient
    } else {
        SplitMode::Image
    };
    let manifest = split(&scan.records, a.seed, mode)?;
    dataset::save_manifest(&a.out_manifest, &manifest)?;
    eprintln!(
        "{} records: {} train, {} validation, {} test ({} skipped)",
        manifest.len(),
        manifest.train.len(),
        manifest.validation.len(),
        manifest.test.len(),
        scan.skipped.len()
    );
    Ok(())
}

fn evaluate_command(a: &EvaluateArgs) -> Result<()> {
    let preds = eval_io::read_predictions(&a.predictions)?;
    let report = evaluate(&preds, a.threshold)?;
    let mut buf = Vec::new();
    eval_io::write_report_csv(&mut buf, &report).map_err(|e| Error::io(&a.out_report, e.into()))?;
    std::fs::write(&a.out_report, buf).map_err(|e| Error::io(&a.out_report, e))?;
    if let Some(path) = &a.out_roc {
        let mut buf = Vec::new();
        eval_io::write_roc_csv(&mut buf, &report).map_err(|e| Error::io(path, e.into()))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    }
    print!("{}", eval_io::render_table(&report));
    Ok(())
}

/// Gradient check with a caller-supplied gradient, so a deliberately wrong
/// gradient can be shown to fail.
pub fn gradient_check_command<G>(
    seed: u64,
    points: usize,
    hp: &AcdHyperparams,
    grad: G,
) -> Result<GradCheckReport>
where
    G: Fn(&[Vec3], &AcdParams, &AcdHyperparams) -> stainforge_core::Result<[f64; 6]>,
{
    let cfg = GradCheckConfig {
        seed,
        points,
        ..GradCheckConfig::default()
    };
    let report = check_gradient(&cfg, hp, grad)?;
    if report.passed() {
        Ok(report)
    } else {
        Err(Error::GradientCheck(format!(
            "{} of {} coordinates outside tolerance (max relative error {:.3e})",
            report.failures, report.coordinates, report.max_rel_error
        )))
    }
}
