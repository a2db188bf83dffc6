//! Correlation metrics for predicted ratings.

use crate::error::{Error, Result};
use crate::metrics::heatmap::pearson;

/// Predicted and observed scores for the same items, in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedScores {
    predicted: Vec<f64>,
    observed: Vec<f64>,
}

impl PairedScores {
    pub fn new(predicted: Vec<f64>, observed: Vec<f64>) -> Result<Self> {
        if predicted.len() != observed.len() {
            return Err(Error::Dimension(format!(
                "{} predictions for {} observations",
                predicted.len(),
                observed.len()
            )));
        }
        if predicted.len() < 3 {
            return Err(Error::Invalid("rating correlation needs at least 3 pairs".into()));
        }
        if predicted.iter().chain(&observed).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("rating list contains a non-finite value".into()));
        }
        Ok(PairedScores { predicted, observed })
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }
}

/// 1-based ranks; tied values share the mean rank of their block.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn srcc(s: &PairedScores) -> Result<f64> {
    pearson(&average_ranks(&s.predicted), &average_ranks(&s.observed), "rating list")
}

pub fn plcc(s: &PairedScores) -> Result<f64> {
    pearson(&s.predicted, &s.observed, "rating list")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(p: &[f64], o: &[f64]) -> PairedScores {
        PairedScores::new(p.to_vec(), o.to_vec()).unwrap()
    }

    #[test]
    fn srcc_examples() {
        assert!((srcc(&pairs(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0])).unwrap() - 1.0).abs() < 1e-12);
        assert!((srcc(&pairs(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0])).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(srcc(&pairs(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0])), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn plcc_examples() {
        let o = [0.2, 0.9, 0.4, 0.7];
        assert!((plcc(&pairs(&o, &o)).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = o.iter().map(|v| 3.0 - v).collect();
        assert!((plcc(&pairs(&neg, &o)).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(PairedScores::new(vec![1.0, 2.0], vec![1.0, 2.0]).is_err());
        assert!(PairedScores::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0]).is_err());
        assert!(PairedScores::new(vec![1.0, f64::NAN, 3.0], vec![1.0, 2.0, 3.0]).is_err());
    }

    proptest! {
        #[test]
        fn invariances(p in proptest::collection::vec(-10.0f64..10.0, 3..30), seed in 0.1f64..5.0, b in -3.0f64..3.0) {
            let o: Vec<f64> = p.iter().enumerate().map(|(i, v)| v.sin() + (i as f64 * 0.37).cos()).collect();
            let s = pairs(&p, &o);
            let (Ok(r), Ok(c)) = (srcc(&s), plcc(&s)) else { return Ok(()) };
            prop_assert!((-1.0..=1.0).contains(&r) && (-1.0..=1.0).contains(&c));
            let mono: Vec<f64> = p.iter().map(|v| v.powi(3) + seed * v + b).collect();
            prop_assert!((srcc(&pairs(&mono, &o)).unwrap() - r).abs() < 1e-9);
            let affine: Vec<f64> = p.iter().map(|v| v * seed + b).collect();
            prop_assert!((plcc(&pairs(&affine, &o)).unwrap() - c).abs() < 1e-9);
        }
    }
}
