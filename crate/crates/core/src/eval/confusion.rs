use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// Counts indexed by (true class, predicted class).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if n == 0 || counts.iter().any(|r| r.len() != n) {
            return Err(Error::shape("confusion matrix must be square and non-empty"));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let n = self.classes();
        if truth >= n || predicted >= n {
            return Err(Error::invalid(format!("class ({truth}, {predicted}) outside 0..{n}")));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes() != self.classes() {
            return Err(Error::shape("confusion matrices differ in class count"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Per-class accuracy in percent; a class without test samples is an
    /// error.
    pub fn per_class_accuracy(&self) -> Result<Vec<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    return Err(Error::invalid(format!("class {i} has no test samples")));
                }
                Ok(100.0 * row[i] as f64 / total as f64)
            })
            .collect()
    }

    /// Row-normalised percentages rounded to integers (empty rows are 0).
    pub fn row_percentages(&self) -> Vec<Vec<u32>> {
        self.counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0 } else { (100.0 * c as f64 / total as f64).round() as u32 })
                    .collect()
            })
            .collect()
    }

    /// Percent table with true classes as rows.
    pub fn render_table(&self) -> String {
        let mut out = String::from("true\\pred");
        for c in 0..self.classes() {
            write!(out, "{c:>5}").unwrap();
        }
        out.push('\n');
        for (i, row) in self.row_percentages().iter().enumerate() {
            write!(out, "{i:>9}").unwrap();
            for v in row {
                write!(out, "{v:>5}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Accuracy summary in percent. `variance` is the population variance of
/// the per-class accuracies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub variance: f64,
}

impl SummaryStats {
    pub fn from_accuracies(acc: &[f64]) -> Result<Self> {
        if acc.is_empty() {
            return Err(Error::invalid("no accuracies"));
        }
        let n = acc.len() as f64;
        let mean = acc.iter().sum::<f64>() / n;
        Ok(SummaryStats {
            mean_accuracy: mean,
            min_accuracy: acc.iter().copied().fold(f64::INFINITY, f64::min),
            variance: acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n,
        })
    }
}

/// Unweighted mean, minimum and population variance of per-class accuracy.
pub fn summary_stats(cm: &ConfusionMatrix) -> Result<SummaryStats> {
    SummaryStats::from_accuracies(&cm.per_class_accuracy()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diagonal_matrix(diag: &[u64]) -> ConfusionMatrix {
        let n = diag.len();
        let counts = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag[i] } else if j == (i + 1) % n { 100 - diag[i] } else { 0 }).collect())
            .collect();
        ConfusionMatrix::from_counts(counts).unwrap()
    }

    #[test]
    fn perfect_matrix() {
        let s = summary_stats(&diagonal_matrix(&[100; 10])).unwrap();
        assert_eq!((s.mean_accuracy, s.min_accuracy, s.variance), (100.0, 100.0, 0.0));
    }

    #[test]
    fn accumulates_and_normalises() {
        let mut cm = ConfusionMatrix::new(3);
        for (t, p) in [(0, 0), (0, 0), (0, 1), (1, 1), (2, 0)] {
            cm.record(t, p).unwrap();
        }
        assert_eq!(cm.total(), 5);
        assert_eq!(cm.row_percentages(), vec![vec![67, 33, 0], vec![0, 100, 0], vec![100, 0, 0]]);
        assert!(cm.record(3, 0).is_err());
        let mut merged = cm.clone();
        merged.add(&cm).unwrap();
        assert_eq!(merged.counts()[0][0], 4);
        assert!(merged.add(&ConfusionMatrix::new(2)).is_err());
        assert!(cm.render_table().contains("  67   33    0"));
    }

    #[test]
    fn empty_row_is_rejected() {
        let mut cm = ConfusionMatrix::new(2);
        cm.record(0, 0).unwrap();
        assert!(summary_stats(&cm).is_err());
    }

    #[test]
    fn label_permutation_keeps_summary() {
        let diag = [99, 95, 97, 94, 98, 93, 92, 92, 96, 94];
        let a = summary_stats(&diagonal_matrix(&diag)).unwrap();
        let mut rev = diag;
        rev.reverse();
        let b = summary_stats(&diagonal_matrix(&rev)).unwrap();
        assert!((a.mean_accuracy - b.mean_accuracy).abs() < 1e-12);
        assert_eq!(a.min_accuracy, b.min_accuracy);
        assert!((a.variance - b.variance).abs() < 1e-9);
        assert!((a.mean_accuracy - 95.0).abs() < 1e-12);
    }
}
