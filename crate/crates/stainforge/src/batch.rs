//! Parallel batch normalization with per-image failure records.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use stainforge_core::normalize::{normalize_image, NormalizerConfig, TemplateProfile};

use crate::error::{Error, Result};
use crate::png;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "STAINFORGE_THREADS";

/// Requested worker count (default: available cores), capped by
/// `STAINFORGE_THREADS` when that is set.
pub fn resolve_workers(requested: Option<usize>) -> Result<usize> {
    let base =
        requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if base == 0 {
        return Err(Error::InvalidArgument("workers must be >= 1".into()));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(cap) if cap > 0 => Ok(base.min(cap)),
            _ => Err(Error::InvalidArgument(format!(
                "{THREADS_ENV} must be a positive integer"
            ))),
        },
        Err(_) => Ok(base),
    }
}

/// Runs `f` over `items` on a pool of `workers` threads, keeping input order.
pub fn run_pool<T, R, F>(workers: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemResult {
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub status: Status,
    pub millis: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchReport {
    pub items: Vec<ItemResult>,
    pub wall_millis: f64,
}

impl BatchReport {
    pub fn failed(&self) -> usize {
        self.items
            .iter()
            .filter(|i| i.status == Status::Failed)
            .count()
    }

    pub fn total_millis(&self) -> f64 {
        self.items.iter().map(|i| i.millis).sum()
    }

    pub fn mean_millis(&self) -> Option<f64> {
        (!self.items.is_empty()).then(|| self.total_millis() / self.items.len() as f64)
    }

    /// CSV with header `input_path,status,millis,error_message`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(["input_path", "status", "millis", "error_message"])?;
        for item in &self.items {
            out.write_record([
                item.input.to_string_lossy().as_ref(),
                item.status.as_str(),
                &format!("{:.3}", item.millis),
                item.error.as_deref().unwrap_or(""),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .map_err(|e| Error::io(path, e.into()))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// Output path for `input`: same file name under `out_dir`.
pub fn output_path(input: &Path, out_dir: &Path) -> Option<PathBuf> {
    input.file_name().map(|n| out_dir.join(n))
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn normalize_one(
    input: &Path,
    output: &Path,
    template: &TemplateProfile,
    cfg: &NormalizerConfig,
) -> Result<()> {
    if same_file(input, output) {
        return Err(Error::InvalidArgument(
            "output would overwrite the input".into(),
        ));
    }
    let img = png::read_png(input)?;
    let out = normalize_image(&img, template, cfg)?;
    png::write_png(output, &out)
}

/// Normalizes every input into `out_dir`. A failing image is recorded in the
/// report and does not stop the others.
pub fn normalize_batch(
    inputs: &[PathBuf],
    template: &TemplateProfile,
    cfg: &NormalizerConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<BatchReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut seen = HashSet::new();
    let jobs: Vec<(PathBuf, Result<PathBuf, String>)> = inputs
        .iter()
        .map(|input| {
            let out = match output_path(input, out_dir) {
                None => Err("input has no file name".to_string()),
                Some(o) if !seen.insert(o.clone()) => {
                    Err(format!("duplicate output name {}", o.display()))
                }
                Some(o) => Ok(o),
            };
            (input.clone(), out)
        })
        .collect();

    let start = Instant::now();
    let items = run_pool(workers, &jobs, |(input, out)| {
        let t = Instant::now();
        let result = match out {
            Ok(o) => normalize_one(input, o, template, cfg).map_err(|e| e.to_string()),
            Err(msg) => Err(msg.clone()),
        };
        let millis = t.elapsed().as_secs_f64() * 1e3;
        match result {
            Ok(()) => ItemResult {
                input: input.clone(),
                output: out.as_ref().ok().cloned(),
                status: Status::Ok,
                millis,
                error: None,
            },
            Err(msg) => ItemResult {
                input: input.clone(),
                output: None,
                status: Status::Failed,
                millis,
                error: Some(msg),
            },
        }
    })?;
    Ok(BatchReport {
        items,
        wall_millis: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_keeps_order() {
        let items: Vec<u32> = (0..100).collect();
        let out = run_pool(4, &items, |v| v * 2).unwrap();
        assert_eq!(out, items.iter().map(|v| v * 2).collect::<Vec<_>>());
    }

    #[test]
    fn report_csv() {
        let report = BatchReport {
            items: vec![
                ItemResult {
                    input: "a.png".into(),
                    output: Some("o/a.png".into()),
                    status: Status::Ok,
                    millis: 1.5,
                    error: None,
                },
                ItemResult {
                    input: "b.png".into(),
                    output: None,
                    status: Status::Failed,
                    millis: 0.5,
                    error: Some("bad, very".into()),
                },
            ],
            wall_millis: 2.0,
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "input_path,status,millis,error_message\na.png,ok,1.500,\nb.png,failed,0.500,\"bad, very\"\n"
        );
        assert_eq!(report.failed(), 1);
        assert_eq!(report.mean_millis(), Some(1.0));
    }
}
