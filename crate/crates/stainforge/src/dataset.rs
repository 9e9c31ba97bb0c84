//! Scanning a BreakHis-style directory tree into sample records and writing
//! split manifests.
//!
//! File names look like `SOB_B_TA-14-4659-40-001.png`: procedure, class
//! (`B`/`M`), then `subtype-year-slide-magnification-sequence`. Class and
//! magnification folders along the path, when present, must agree with the
//! file name.

use std::io::Write;
use std::path::{Component, Path, PathBuf};

use stainforge_core::split::{SampleRecord, SplitManifest};
use stainforge_core::{Label, Magnification};
use walkdir::WalkDir;

use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: &[&str] = &["png"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skipped {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ScanReport {
    pub records: Vec<SampleRecord>,
    pub skipped: Vec<Skipped>,
}

/// Parsed fields of one file name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedName {
    pub label: Label,
    pub subtype: String,
    pub patient_id: String,
    pub magnification: Magnification,
}

pub fn parse_file_name(name: &str) -> Result<ParsedName, String> {
    let stem = name.rsplit_once('.').map_or(name, |(s, _)| s);
    let mut parts = stem.splitn(3, '_');
    let (Some(_procedure), Some(class), Some(rest)) = (parts.next(), parts.next(), parts.next())
    else {
        return Err("expected <procedure>_<class>_<details>".into());
    };
    let label = match class {
        "B" => Label::Benign,
        "M" => Label::Malignant,
        other => return Err(format!("unknown class `{other}`")),
    };
    let fields: Vec<&str> = rest.split('-').collect();
    let [subtype, year, slide, mag, seq] = fields[..] else {
        return Err("expected <subtype>-<year>-<slide>-<magnification>-<seq>".into());
    };
    if [subtype, year, slide, seq].iter().any(|f| f.is_empty()) {
        return Err("empty name field".into());
    }
    let magnification = mag
        .parse::<u32>()
        .ok()
        .and_then(Magnification::from_factor)
        .ok_or_else(|| format!("unknown magnification `{mag}`"))?;
    Ok(ParsedName {
        label,
        subtype: subtype.to_string(),
        patient_id: format!("{year}-{slide}"),
        magnification,
    })
}

fn check_folders(path: &Path, parsed: &ParsedName) -> Result<(), String> {
    for comp in path.parent().into_iter().flat_map(Path::components) {
        let Component::Normal(c) = comp else { continue };
        let Some(c) = c.to_str() else { continue };
        let lower = c.to_ascii_lowercase();
        let folder_label = match lower.as_str() {
            "benign" => Some(Label::Benign),
            "malignant" => Some(Label::Malignant),
            _ => None,
        };
        if let Some(l) = folder_label {
            if l != parsed.label {
                return Err(format!(
                    "file name says {} but folder says {}",
                    parsed.label, l
                ));
            }
        }
        if let Some(digits) = lower.strip_suffix('x') {
            if let Some(m) = digits.parse().ok().and_then(Magnification::from_factor) {
                if m != parsed.magnification {
                    return Err(format!(
                        "file name says {}X but folder says {}X",
                        parsed.magnification.factor(),
                        m.factor()
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Walks `root` in sorted order. Files whose names do not parse are reported
/// in `skipped`; files at another magnification than `filter` are left out.
pub fn scan(root: &Path, filter: Option<Magnification>) -> Result<ScanReport> {
    let mut report = ScanReport::default();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if !is_image {
            continue;
        }
        let name = entry.file_name().to_string_lossy();
        let parsed = match parse_file_name(&name).and_then(|p| {
            check_folders(path.strip_prefix(root).unwrap_or(path), &p)?;
            Ok(p)
        }) {
            Ok(p) => p,
            Err(reason) => {
                report.skipped.push(Skipped {
                    path: path.to_path_buf(),
                    reason,
                });
                continue;
            }
        };
        if filter.is_some_and(|m| m != parsed.magnification) {
            continue;
        }
        report.records.push(SampleRecord {
            path: path.to_string_lossy().into_owned(),
            label: parsed.label,
            magnification: parsed.magnification,
            patient_id: parsed.patient_id,
            subtype: parsed.subtype,
        });
    }
    if report.records.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    Ok(report)
}

/// CSV with header `path,label,magnification,patient_id,subtype,split`,
/// rows grouped train, validation, test.
pub fn write_manifest<W: Write>(w: W, manifest: &SplitManifest) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record([
        "path",
        "label",
        "magnification",
        "patient_id",
        "subtype",
        "split",
    ])?;
    for (part, r) in manifest.iter() {
        out.write_record([
            r.path.as_str(),
            r.label.as_str(),
            &format!("{}X", r.magnification.factor()),
            &r.patient_id,
            &r.subtype,
            part.as_str(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_manifest(path: &Path, manifest: &SplitManifest) -> Result<()> {
    let mut buf = Vec::new();
    write_manifest(&mut buf, manifest).map_err(|e| Error::io(path, e.into()))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Image paths listed in a manifest: the `path` column of a CSV with a header
/// row, or one path per line otherwise.
pub fn read_path_list(path: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().unwrap_or("");
    if first.split(',').any(|c| c.trim() == "path") {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let col = rdr
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?
            .iter()
            .position(|h| h.trim() == "path")
            .expect("checked above");
        rdr.records()
            .map(|r| {
                let r = r.map_err(|e| {
                    let line = e.position().map_or(0, |p| p.line());
                    Error::parse(path, line, e.to_string())
                })?;
                let line = r.position().map_or(0, |p| p.line());
                r.get(col)
                    .map(PathBuf::from)
                    .ok_or_else(|| Error::parse(path, line, "missing path column"))
            })
            .collect()
    } else {
        Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(PathBuf::from)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_breakhis_names() {
        let p = parse_file_name("SOB_B_A-14-22549AB-200-001.png").unwrap();
        assert_eq!(p.label, Label::Benign);
        assert_eq!(p.subtype, "A");
        assert_eq!(p.patient_id, "14-22549AB");
        assert_eq!(p.magnification, Magnification::X200);
        let p = parse_file_name("SOB_M_DC-14-2523-400-010.png").unwrap();
        assert_eq!(p.label, Label::Malignant);
        assert_eq!(p.magnification, Magnification::X400);
    }

    #[test]
    fn malformed_names() {
        for name in [
            "image.png",
            "SOB_X_A-14-1-200-001.png",
            "SOB_B_A-14-1-250-001.png",
            "SOB_B_A-14-1-200.png",
            "SOB_B_A--1-200-001.png",
        ] {
            assert!(parse_file_name(name).is_err(), "{name}");
        }
    }

    #[test]
    fn folder_mismatch() {
        let p = parse_file_name("SOB_B_A-14-1-200-001.png").unwrap();
        assert!(check_folders(Path::new("benign/SOB/A/14-1/200X/f.png"), &p).is_ok());
        assert!(check_folders(Path::new("malignant/f.png"), &p).is_err());
        assert!(check_folders(Path::new("benign/40X/f.png"), &p).is_err());
    }
}
