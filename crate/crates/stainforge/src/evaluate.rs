//! Prediction CSV parsing and metric report output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use stainforge_core::metrics::{EvalReport, Prediction, PredictionSet};
use stainforge_core::Label;

use crate::error::{Error, Result};

/// Reads `path,true_label,score` rows. Labels accept `benign`/`malignant`,
/// `b`/`m` or `0`/`1`; scores must lie in `[0, 1]`.
pub fn read_predictions(path: &Path) -> Result<PredictionSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&bytes, path)
}

pub fn parse_predictions(bytes: &[u8], path: &Path) -> Result<PredictionSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, 1, format!("missing column `{name}`")))
    };
    let (c_path, c_label, c_score) = (col("path")?, col("true_label")?, col("score")?);

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let label: Label = field(c_label)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid label `{}`", field(c_label))))?;
        let score: f64 = field(c_score)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid score `{}`", field(c_score))))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::parse(
                path,
                line,
                format!("score {score} outside [0, 1]"),
            ));
        }
        rows.push((
            line,
            Prediction {
                path: field(c_path).to_string(),
                label,
                score,
            },
        ));
    }
    if rows.is_empty() {
        return Err(stainforge_core::Error::EmptyPredictions.into());
    }
    let lines: Vec<u64> = rows.iter().map(|(l, _)| *l).collect();
    PredictionSet::new(rows.into_iter().map(|(_, p)| p).collect())
        .map_err(|i| Error::parse(path, lines[i], "invalid prediction row"))
}

fn fmt_rate(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"))
}

/// `metric,value` rows; undefined rates are written as `undefined`.
pub fn write_report_csv<W: Write>(w: W, r: &EvalReport) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(["metric", "value"])?;
    let c = &r.confusion;
    let rows = [
        ("threshold", r.threshold.to_string()),
        ("tp", c.tp.to_string()),
        ("fp", c.fp.to_string()),
        ("fn", c.fn_.to_string()),
        ("tn", c.tn.to_string()),
        ("accuracy", fmt_rate(r.rates.accuracy)),
        ("specificity", fmt_rate(r.rates.specificity)),
        ("sensitivity", fmt_rate(r.rates.sensitivity)),
        ("precision", fmt_rate(r.rates.precision)),
        ("f1", fmt_rate(r.rates.f1)),
        ("auc", format!("{:.4}", r.auc)),
    ];
    for (k, v) in rows {
        out.write_record([k, v.as_str()])?;
    }
    out.flush()?;
    Ok(())
}

/// ROC points as `fpr,tpr,threshold`.
pub fn write_roc_csv<W: Write>(w: W, r: &EvalReport) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(["fpr", "tpr", "threshold"])?;
    for p in &r.roc {
        out.write_record([
            p.fpr.to_string(),
            p.tpr.to_string(),
            p.threshold.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn render_table(r: &EvalReport) -> String {
    let headers = [
        "Test Accuracy",
        "Specificity",
        "Sensitivity",
        "F1 score",
        "AUC",
    ];
    let values = [
        fmt_rate(r.rates.accuracy),
        fmt_rate(r.rates.specificity),
        fmt_rate(r.rates.sensitivity),
        fmt_rate(r.rates.f1),
        format!("{:.4}", r.auc),
    ];
    let widths: Vec<usize> = headers
        .iter()
        .zip(&values)
        .map(|(h, v)| h.len().max(v.len()))
        .collect();
    let mut s = String::new();
    let row = |cells: &[&str]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    writeln!(s, "{}", row(&headers)).unwrap();
    let v: Vec<&str> = values.iter().map(String::as_str).collect();
    writeln!(s, "{}", row(&v)).unwrap();
    let c = &r.confusion;
    writeln!(
        s,
        "threshold {}  TP {}  FP {}  FN {}  TN {}  (positive class: malignant)",
        r.threshold, c.tp, c.fp, c.fn_, c.tn
    )
    .unwrap();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use stainforge_core::metrics::evaluate;

    const FIXTURE: &str = "path,true_label,score\n\
        a,malignant,0.9\nb,malignant,0.8\nc,malignant,0.7\nd,malignant,0.3\n\
        e,benign,0.6\nf,benign,0.4\ng,benign,0.2\nh,benign,0.1\ni,benign,0.05\nj,benign,0.0\n";

    #[test]
    fn parses_fixture() {
        let set = parse_predictions(FIXTURE.as_bytes(), Path::new("p")).unwrap();
        assert_eq!(set.len(), 10);
        let r = evaluate(&set, 0.5).unwrap();
        assert_eq!(
            (
                r.confusion.tp,
                r.confusion.fp,
                r.confusion.fn_,
                r.confusion.tn
            ),
            (3, 1, 1, 5)
        );
        let table = render_table(&r);
        assert!(table.contains("Test Accuracy"));
        assert!(table.contains("0.8000"));
    }

    #[test]
    fn errors_have_line_numbers() {
        let bad = "path,true_label,score\na,benign,0.1\nb,benign,oops\n";
        match parse_predictions(bad.as_bytes(), Path::new("p")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad = "path,true_label,score\na,unknown,0.1\n";
        assert!(matches!(
            parse_predictions(bad.as_bytes(), Path::new("p")),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad = "path,true_label,score\na,benign,1.5\n";
        assert!(parse_predictions(bad.as_bytes(), Path::new("p")).is_err());
        let bad = "path,label,score\na,benign,0.5\n";
        assert!(matches!(
            parse_predictions(bad.as_bytes(), Path::new("p")),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn header_only_is_empty() {
        let e = parse_predictions(b"path,true_label,score\n", Path::new("p")).unwrap_err();
        assert_eq!(e.exit_code(), crate::error::exit::EMPTY_PREDICTIONS);
    }

    #[test]
    fn undefined_rates_print_as_undefined() {
        let set = parse_predictions(
            b"path,true_label,score\na,benign,0.1\nb,malignant,0.2\n",
            Path::new("p"),
        )
        .unwrap();
        let r = evaluate(&set, 0.5).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("precision,undefined"));
        assert!(text.contains("f1,undefined"));
    }
}
