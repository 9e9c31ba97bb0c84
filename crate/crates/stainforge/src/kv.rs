//! Flat `key=value` text used by profile and config files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys and values are
//! trimmed; the value is everything after the first `=`.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: u64,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str, path: &Path) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line, "expected key=value"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::parse(path, line, "empty key"));
        }
        if out.iter().any(|e| e.key == key) {
            return Err(Error::parse(path, line, format!("duplicate key `{key}`")));
        }
        out.push(Entry {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

pub fn parse_value<T: std::str::FromStr>(entry: &Entry, path: &Path) -> Result<T> {
    entry.value.parse().map_err(|_| {
        Error::parse(
            path,
            entry.line,
            format!("invalid value `{}` for `{}`", entry.value, entry.key),
        )
    })
}

/// Shortest form that still parses back to the identical `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_spacing() {
        let p = Path::new("x");
        let e = parse("# c\n\n a = 1 \nb=x=y\n", p).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(
            (e[0].key.as_str(), e[0].value.as_str(), e[0].line),
            ("a", "1", 3)
        );
        assert_eq!(e[1].value, "x=y");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let p = Path::new("x");
        match parse("a=1\nnope\n", p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse("a=1\na=2\n", p).is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 5.541263545158426, 1e-300, f64::MAX, 20.0] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
