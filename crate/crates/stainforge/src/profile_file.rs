//! Versioned text format for fitted template profiles.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use stainforge_core::acd::{AcdHyperparams, StainProfile};
use stainforge_core::color::BackgroundIntensity;
use stainforge_core::linalg::Mat3;
use stainforge_core::normalize::{Provenance, TemplateProfile};

use crate::error::{Error, Result};
use crate::kv::{self, format_f64, Entry};

pub const SCHEMA_VERSION: u32 = 1;

/// A template profile plus the hyperparameters it was fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredProfile {
    pub template: TemplateProfile,
    pub hyperparams: AcdHyperparams,
}

const MATRIX_KEYS: [[&str; 3]; 3] = [
    ["m00", "m01", "m02"],
    ["m10", "m11", "m12"],
    ["m20", "m21", "m22"],
];

pub fn to_string(stored: &StoredProfile) -> Result<String> {
    let t = &stored.template;
    let hp = &stored.hyperparams;
    let mut s = String::new();
    let mut put = |k: &str, v: String| writeln!(s, "{k}={v}").unwrap();
    put("schema_version", SCHEMA_VERSION.to_string());
    let m = t.profile.matrix();
    for (r, row) in MATRIX_KEYS.iter().enumerate() {
        for (c, key) in row.iter().enumerate() {
            put(key, format_f64(m[(r, c)]));
        }
    }
    put("wh", format_f64(t.profile.wh()));
    put("we", format_f64(t.profile.we()));
    let bg = t.background.channels();
    put("background_r", format_f64(bg[0]));
    put("background_g", format_f64(bg[1]));
    put("background_b", format_f64(bg[2]));
    put("lambda_p", format_f64(hp.lambda_p));
    put("lambda_b", format_f64(hp.lambda_b));
    put("lambda_e", format_f64(hp.lambda_e));
    put("eta", format_f64(hp.eta));
    put("gamma", format_f64(hp.gamma));
    put("learning_rate", format_f64(hp.learning_rate));
    put("max_iters", hp.max_iters.to_string());
    put("tol", format_f64(hp.tol));
    put("sample_n", hp.sample_n.to_string());
    put("seed", hp.seed.to_string());
    if let Some(p) = &t.provenance {
        if p.source.contains(['\n', '\r']) {
            return Err(Error::InvalidArgument(
                "template source path contains a line break".into(),
            ));
        }
        put("source", p.source.clone());
        put("sha256", p.sha256.clone());
    }
    Ok(s)
}

pub fn from_str(text: &str, path: &Path) -> Result<StoredProfile> {
    let entries = kv::parse(text, path)?;
    let get = |key: &str| -> Result<&Entry> {
        entries
            .iter()
            .find(|e| e.key == key)
            .ok_or_else(|| Error::parse(path, 0, format!("missing key `{key}`")))
    };
    let num = |key: &str| -> Result<f64> { kv::parse_value(get(key)?, path) };

    let version: u32 = kv::parse_value(get("schema_version")?, path)?;
    if version != SCHEMA_VERSION {
        let line = get("schema_version")?.line;
        return Err(Error::parse(
            path,
            line,
            format!("unsupported schema_version {version}"),
        ));
    }
    let known = |k: &str| {
        MATRIX_KEYS.iter().flatten().any(|m| *m == k)
            || [
                "schema_version",
                "wh",
                "we",
                "background_r",
                "background_g",
                "background_b",
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
                "source",
                "sha256",
            ]
            .contains(&k)
    };
    if let Some(e) = entries.iter().find(|e| !known(&e.key)) {
        return Err(Error::parse(
            path,
            e.line,
            format!("unknown key `{}`", e.key),
        ));
    }

    let mut m = [[0.0; 3]; 3];
    for (r, row) in MATRIX_KEYS.iter().enumerate() {
        for (c, key) in row.iter().enumerate() {
            m[r][c] = num(key)?;
        }
    }
    let profile = StainProfile::new(Mat3(m), num("wh")?, num("we")?)?;
    let background = BackgroundIntensity::new([
        num("background_r")?,
        num("background_g")?,
        num("background_b")?,
    ])?;
    let hyperparams = AcdHyperparams {
        lambda_p: num("lambda_p")?,
        lambda_b: num("lambda_b")?,
        lambda_e: num("lambda_e")?,
        eta: num("eta")?,
        gamma: num("gamma")?,
        learning_rate: num("learning_rate")?,
        max_iters: kv::parse_value(get("max_iters")?, path)?,
        tol: num("tol")?,
        sample_n: kv::parse_value(get("sample_n")?, path)?,
        seed: kv::parse_value(get("seed")?, path)?,
    };
    hyperparams.validate()?;
    let provenance = match (get("source"), get("sha256")) {
        (Ok(s), Ok(h)) => Some(Provenance {
            source: s.value.clone(),
            sha256: h.value.clone(),
        }),
        (Err(_), Err(_)) => None,
        (Ok(e), Err(_)) | (Err(_), Ok(e)) => {
            return Err(Error::parse(
                path,
                e.line,
                "source and sha256 must appear together",
            ))
        }
    };
    Ok(StoredProfile {
        template: TemplateProfile {
            profile,
            background,
            provenance,
        },
        hyperparams,
    })
}

pub fn save(path: &Path, stored: &StoredProfile) -> Result<()> {
    fs::write(path, to_string(stored)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<StoredProfile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use stainforge_core::acd::{RUIFROK_EOSIN, RUIFROK_HEMATOXYLIN};

    fn sample() -> StoredProfile {
        StoredProfile {
            template: TemplateProfile {
                profile: StainProfile::from_stain_vectors(
                    &RUIFROK_HEMATOXYLIN,
                    &RUIFROK_EOSIN,
                    0.731,
                    1.0 / 3.0,
                )
                .unwrap(),
                background: BackgroundIntensity::new([250.0, 248.5, 251.0]).unwrap(),
                provenance: Some(Provenance {
                    source: "t.png".into(),
                    sha256: "ab".repeat(32),
                }),
            },
            hyperparams: AcdHyperparams::default(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let s = sample();
        let text = to_string(&s).unwrap();
        let back = from_str(&text, Path::new("p")).unwrap();
        assert_eq!(back, s);
        assert_eq!(to_string(&back).unwrap(), text);
    }

    #[test]
    fn rejects_bad_version_and_unknown_keys() {
        let text = to_string(&sample()).unwrap();
        let v2 = text.replace("schema_version=1", "schema_version=2");
        assert!(matches!(
            from_str(&v2, Path::new("p")),
            Err(Error::Parse { line: 1, .. })
        ));
        let extra = format!("{text}bogus=1\n");
        assert!(from_str(&extra, Path::new("p")).is_err());
    }

    #[test]
    fn rejects_invalid_matrix() {
        let text = to_string(&sample()).unwrap();
        let broken: String = text
            .lines()
            .map(|l| {
                if l.starts_with("m00=") {
                    "m00=5.0".to_string()
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        assert!(matches!(
            from_str(&broken, Path::new("p")),
            Err(Error::Core(_))
        ));
    }
}
