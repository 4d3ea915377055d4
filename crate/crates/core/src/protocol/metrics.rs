use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// `counts[actual][predicted]` over a fixed, ordered class list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new<S: AsRef<str>>(classes: &[S]) -> Self {
        let n = classes.len();
        Self {
            classes: classes.iter().map(|c| c.as_ref().to_string()).collect(),
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn record(&mut self, actual: usize, predicted: usize) {
        self.counts[actual][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<(), ProtocolError> {
        if self.classes != other.classes {
            return Err(ProtocolError::ClassMismatch {
                left: self.classes.clone(),
                right: other.classes.clone(),
            });
        }
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
        Ok(())
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.classes.len()).map(|i| self.counts[i][i]).sum();
        correct as f64 / self.total().max(1) as f64
    }
}

/// Per-class F1 and their unweighted mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub per_class: Vec<f64>,
    pub macro_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 per class with 0/0 taken as 0; every class in
/// the matrix counts toward the macro mean.
pub fn macro_f1(confusion: &ConfusionMatrix) -> Result<F1Scores, ProtocolError> {
    let n = confusion.classes.len();
    if n == 0 || confusion.total() == 0 {
        return Err(ProtocolError::EmptyConfusion);
    }
    let per_class: Vec<f64> = (0..n)
        .map(|c| {
            let tp = confusion.counts[c][c];
            let predicted: u64 = (0..n).map(|a| confusion.counts[a][c]).sum();
            let actual: u64 = confusion.counts[c].iter().sum();
            let p = ratio(tp, predicted);
            let r = ratio(tp, actual);
            if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            }
        })
        .collect();
    let macro_f1 = per_class.iter().sum::<f64>() / n as f64;
    Ok(F1Scores { per_class, macro_f1 })
}

/// Confusion of one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub held_out: String,
    pub confusion: ConfusionMatrix,
}

/// Pooled metrics over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub folds: Vec<FoldResult>,
    pub pooled: ConfusionMatrix,
    pub f1: F1Scores,
    pub aggregation: String,
}

pub const POOLED_AGGREGATION: &str = "confusion matrices summed over folds, macro-F1 computed once on the pooled matrix";

/// Sums fold confusions, then scores the pooled matrix.
pub fn aggregate_folds(folds: &[FoldResult]) -> Result<MetricsReport, ProtocolError> {
    let first = folds.first().ok_or(ProtocolError::EmptyConfusion)?;
    let mut pooled = ConfusionMatrix::new(&first.confusion.classes);
    for f in folds {
        pooled.add(&f.confusion)?;
    }
    let f1 = macro_f1(&pooled)?;
    Ok(MetricsReport {
        folds: folds.to_vec(),
        pooled,
        f1,
        aggregation: POOLED_AGGREGATION.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(c: [[u64; 2]; 2]) -> ConfusionMatrix {
        ConfusionMatrix {
            classes: vec!["neg".into(), "nonneg".into()],
            counts: c.iter().map(|r| r.to_vec()).collect(),
        }
    }

    #[test]
    fn hand_example() {
        let f = macro_f1(&binary([[3, 1], [2, 2]])).unwrap();
        assert!((f.per_class[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((f.per_class[1] - 4.0 / 7.0).abs() < 1e-12);
        assert!((f.macro_f1 - (2.0 / 3.0 + 4.0 / 7.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_over_zero_counts_as_zero() {
        let mut c = ConfusionMatrix::new(&["a", "b", "c"]);
        c.record(0, 0);
        c.record(1, 1);
        let f = macro_f1(&c).unwrap();
        assert_eq!(f.per_class, vec![1.0, 1.0, 0.0]);
        assert!((f.macro_f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!(macro_f1(&ConfusionMatrix::new(&["a"])).is_err());
    }

    #[test]
    fn class_mismatch_is_an_error() {
        let a = FoldResult {
            held_out: "S1".into(),
            confusion: binary([[1, 0], [0, 1]]),
        };
        let b = FoldResult {
            held_out: "S2".into(),
            confusion: ConfusionMatrix::new(&["x", "y"]),
        };
        assert!(matches!(aggregate_folds(&[a, b]), Err(ProtocolError::ClassMismatch { .. })));
    }
}
