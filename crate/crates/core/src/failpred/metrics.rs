use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts for the positive class "lineup failure".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[bool], actual: &[bool]) -> Confusion {
        let mut c = Confusion::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        Metrics {
            precision,
            recall,
            f1: f1_score(precision, recall),
            accuracy: ratio(self.tp + self.tn, self.total()),
            confusion: *self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Metrics of `probabilities >= threshold` against `labels`.
pub fn metrics_at(probabilities: &[f64], labels: &[bool], threshold: f64) -> Metrics {
    let predicted: Vec<bool> = probabilities.iter().map(|&p| p >= threshold).collect();
    Confusion::from_predictions(&predicted, labels).metrics()
}

pub const GRID_SIZE: usize = 50;
pub const GRID_LOW: f64 = 0.25;
pub const GRID_HIGH: f64 = 0.75;
/// Minimum precision and recall for an unpenalized threshold score.
pub const SCORE_FLOOR: f64 = 0.5;

/// 50 evenly spaced thresholds from 0.25 to 0.75 inclusive.
pub fn threshold_grid() -> Vec<f64> {
    (0..GRID_SIZE)
        .map(|i| GRID_LOW + (GRID_HIGH - GRID_LOW) * i as f64 / (GRID_SIZE - 1) as f64)
        .collect()
}

/// F1 when both precision and recall reach the floor, otherwise F1 − 1.
pub fn threshold_score(m: &Metrics) -> f64 {
    if m.precision >= SCORE_FLOOR && m.recall >= SCORE_FLOOR {
        m.f1
    } else {
        m.f1 - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub threshold: f64,
    pub grid: Vec<GridPoint>,
}

/// Scores every grid threshold on validation probabilities and picks the
/// best, ties going to the lowest threshold.
pub fn optimize_threshold(probabilities: &[f64], labels: &[bool]) -> Result<ThresholdSearch> {
    if labels.is_empty() {
        return Err(Error::Empty("validation set".into()));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::SingleClass);
    }
    let grid: Vec<GridPoint> = threshold_grid()
        .into_iter()
        .map(|t| {
            let m = metrics_at(probabilities, labels, t);
            GridPoint {
                threshold: t,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                score: threshold_score(&m),
            }
        })
        .collect();
    assert!(
        grid.windows(2).all(|w| w[1].recall <= w[0].recall),
        "recall increased along the threshold grid"
    );
    let mut best = 0;
    for (i, g) in grid.iter().enumerate() {
        if g.score > grid[best].score {
            best = i;
        }
    }
    Ok(ThresholdSearch {
        threshold: grid[best].threshold,
        grid,
    })
}

/// Population standard deviation over mean; 0 when the mean is 0.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt() / mean
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_from_counts() {
        let c = Confusion {
            tp: 2,
            fp: 1,
            tn: 0,
            fn_: 2,
        };
        let m = c.metrics();
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_metrics_are_zero() {
        let m = Confusion {
            tp: 0,
            fp: 0,
            tn: 5,
            fn_: 3,
        }
        .metrics();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn perfect_predictions() {
        let labels = [true, false, true, false];
        let m = metrics_at(&[0.9, 0.1, 0.8, 0.2], &labels, 0.5);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn grid_shape() {
        let g = threshold_grid();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.25);
        assert_eq!(g[49], 0.75);
        assert!((g[1] - g[0] - 0.5 / 49.0).abs() < 1e-15);
    }

    #[test]
    fn separated_probabilities_pick_lowest() {
        let probs = [0.9, 0.9, 0.1, 0.1, 0.1];
        let labels = [true, true, false, false, false];
        let s = optimize_threshold(&probs, &labels).unwrap();
        assert_eq!(s.threshold, 0.25);
    }

    #[test]
    fn inclusive_boundary() {
        let m = metrics_at(&[0.42, 0.41], &[true, true], 0.42);
        assert_eq!(m.confusion.tp, 1);
        assert_eq!(m.confusion.fn_, 1);
    }

    #[test]
    fn cov_examples() {
        assert!(coefficient_of_variation(&[0.7; 5]).abs() < 1e-12);
        let c = coefficient_of_variation(&[0.8, 0.8, 0.8, 0.8, 1.0]);
        assert!((c - 0.08 / 0.84).abs() < 1e-12);
    }
}
