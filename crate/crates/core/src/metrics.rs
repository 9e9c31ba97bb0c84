//! Binary classifier evaluation with malignant as the positive class.

use alloc::string::String;
use alloc::vec::Vec;

use crate::split::Label;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub path: String,
    pub label: Label,
    /// Predicted probability of malignancy.
    pub score: f64,
}

/// Predictions with finite scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    rows: Vec<Prediction>,
}

impl PredictionSet {
    /// Rejects the first row whose score is outside `[0, 1]`, returning its index.
    pub fn new(rows: Vec<Prediction>) -> core::result::Result<Self, usize> {
        match rows.iter().position(|r| !(0.0..=1.0).contains(&r.score)) {
            Some(i) => Err(i),
            None => Ok(Self { rows }),
        }
    }

    pub fn rows(&self) -> &[Prediction] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Counts at `threshold`; a row is predicted malignant iff `score >= threshold`.
pub fn confusion(preds: &PredictionSet, threshold: f64) -> Result<Confusion> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter("threshold must lie in [0, 1]"));
    }
    if preds.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    let mut c = Confusion::default();
    for r in preds.rows() {
        match (r.label, r.score >= threshold) {
            (Label::Malignant, true) => c.tp += 1,
            (Label::Malignant, false) => c.fn_ += 1,
            (Label::Benign, true) => c.fp += 1,
            (Label::Benign, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Derived rates; `None` marks an undefined 0/0 ratio.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rates {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &Confusion) -> Rates {
    let sensitivity = ratio(c.tp, c.tp + c.fn_);
    let precision = ratio(c.tp, c.tp + c.fp);
    let f1 = match (precision, sensitivity) {
        (Some(p), Some(s)) if p + s > 0.0 => Some(2.0 * p * s / (p + s)),
        _ => None,
    };
    Rates {
        accuracy: ratio(c.tp + c.tn, c.total()),
        sensitivity,
        specificity: ratio(c.tn, c.tn + c.fp),
        precision,
        f1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score threshold producing this point; `+inf` for the origin.
    pub threshold: f64,
}

/// ROC curve over every distinct score and the trapezoidal area under it.
///
/// Tied scores produce a single diagonal step, so the area equals the
/// Mann-Whitney statistic with ties counted as one half. The area is
/// accumulated in integer pair counts and divided once.
pub fn roc_auc(preds: &PredictionSet) -> Result<(Vec<RocPoint>, f64)> {
    if preds.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    let pos = preds
        .rows()
        .iter()
        .filter(|r| r.label == Label::Malignant)
        .count() as u64;
    let neg = preds.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut sorted: Vec<(f64, Label)> = preds.rows().iter().map(|r| (r.score, r.label)).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::with_capacity(sorted.len() + 1);
    points.push(RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    });
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area in units of (1/pos)(1/neg)
    let mut doubled_area: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        let (prev_tp, prev_fp) = (tp, fp);
        while i < sorted.len() && sorted[i].0 == score {
            match sorted[i].1 {
                Label::Malignant => tp += 1,
                Label::Benign => fp += 1,
            }
            i += 1;
        }
        doubled_area += (fp - prev_fp) as u128 * (tp + prev_tp) as u128;
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: score,
        });
    }
    let auc = doubled_area as f64 / (2.0 * pos as f64 * neg as f64);
    Ok((points, auc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub threshold: f64,
    pub confusion: Confusion,
    pub rates: Rates,
    pub roc: Vec<RocPoint>,
    pub auc: f64,
}

pub fn evaluate(preds: &PredictionSet, threshold: f64) -> Result<EvalReport> {
    let confusion = confusion(preds, threshold)?;
    let (roc, auc) = roc_auc(preds)?;
    Ok(EvalReport {
        threshold,
        confusion,
        rates: metrics(&confusion),
        roc,
        auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn set(rows: &[(Label, f64)]) -> PredictionSet {
        PredictionSet::new(
            rows.iter()
                .enumerate()
                .map(|(i, (label, score))| Prediction {
                    path: format!("{i}.png"),
                    label: *label,
                    score: *score,
                })
                .collect(),
        )
        .unwrap()
    }

    /// tp=3, fp=1, fn=1, tn=5 at threshold 0.5.
    fn ten_rows() -> PredictionSet {
        use Label::*;
        set(&[
            (Malignant, 0.9),
            (Malignant, 0.8),
            (Malignant, 0.6),
            (Malignant, 0.3),
            (Benign, 0.7),
            (Benign, 0.4),
            (Benign, 0.2),
            (Benign, 0.1),
            (Benign, 0.05),
            (Benign, 0.45),
        ])
    }

    #[test]
    fn ten_row_fixture() {
        let c = confusion(&ten_rows(), 0.5).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 3,
                fp: 1,
                fn_: 1,
                tn: 5
            }
        );
        let r = metrics(&c);
        assert_eq!(r.accuracy, Some(0.8));
        assert_eq!(r.sensitivity, Some(0.75));
        assert!((r.specificity.unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.precision, Some(0.75));
        assert_eq!(r.f1, Some(0.75));
    }

    #[test]
    fn zero_threshold_predicts_all_malignant() {
        let c = confusion(&ten_rows(), 0.0).unwrap();
        assert_eq!((c.fn_, c.tn), (0, 0));
    }

    #[test]
    fn single_class_rates() {
        let r = metrics(&Confusion {
            tp: 10,
            ..Default::default()
        });
        assert_eq!(r.accuracy, Some(1.0));
        assert_eq!(r.sensitivity, Some(1.0));
        assert_eq!(r.precision, Some(1.0));
        assert_eq!(r.f1, Some(1.0));
        assert_eq!(r.specificity, None);
    }

    #[test]
    fn symmetric_rates() {
        let r = metrics(&Confusion {
            tp: 25,
            fp: 25,
            fn_: 25,
            tn: 25,
        });
        assert_eq!(r.accuracy, Some(0.5));
        assert_eq!(r.sensitivity, Some(0.5));
        assert_eq!(r.specificity, Some(0.5));
        assert_eq!(r.f1, Some(0.5));
    }

    #[test]
    fn auc_edges() {
        use Label::*;
        let (roc, auc) =
            roc_auc(&set(&[(Malignant, 0.9), (Malignant, 0.8), (Benign, 0.2)])).unwrap();
        assert_eq!(auc, 1.0);
        assert_eq!((roc[0].fpr, roc[0].tpr), (0.0, 0.0));
        let last = roc.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));

        let (roc, auc) = roc_auc(&set(&[(Malignant, 0.5), (Benign, 0.5), (Benign, 0.5)])).unwrap();
        assert_eq!(auc, 0.5);
        assert_eq!(roc.len(), 2);
    }

    #[test]
    fn errors() {
        assert_eq!(
            confusion(&PredictionSet::default(), 0.5),
            Err(Error::EmptyPredictions)
        );
        assert_eq!(
            roc_auc(&set(&[(Label::Benign, 0.3)])),
            Err(Error::SingleClass)
        );
        assert!(confusion(&ten_rows(), 1.5).is_err());
        let bad = vec![Prediction {
            path: "a".into(),
            label: Label::Benign,
            score: 1.3,
        }];
        assert_eq!(PredictionSet::new(bad), Err(0));
    }
}
