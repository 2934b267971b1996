use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::WeightMatrix;

/// Structure-recovery counts for one estimate against one ground truth.
///
/// A reversed edge counts once in `shd`, counts as a false discovery, and is
/// not a true positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub shd: usize,
    pub tpr: f64,
    pub fdr: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub reversed: usize,
    pub predicted: usize,
    pub true_edges: usize,
}

/// Compares binarized supports of `estimate` and `truth`.
pub fn compare(estimate: &WeightMatrix, truth: &WeightMatrix, zero_tol: f64) -> Result<RecoveryMetrics> {
    let d = truth.d();
    if estimate.d() != d {
        return Err(invalid(format!("estimate has {} nodes, truth has {d}", estimate.d())));
    }
    let est = estimate.support(zero_tol);
    let tru = truth.support(zero_tol);
    let (mut tp, mut fp, mut reversed, mut fn_, mut predicted, mut true_edges) = (0, 0, 0, 0, 0, 0);
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            if est[[i, j]] {
                predicted += 1;
                if tru[[i, j]] {
                    tp += 1;
                } else if tru[[j, i]] {
                    reversed += 1;
                } else {
                    fp += 1;
                }
            }
            if tru[[i, j]] {
                true_edges += 1;
                if !est[[i, j]] && !est[[j, i]] {
                    fn_ += 1;
                }
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(RecoveryMetrics {
        shd: fn_ + fp + reversed,
        tpr: ratio(tp, true_edges),
        fdr: ratio(fp + reversed, predicted),
        tp,
        fp,
        fn_,
        reversed,
        predicted,
        true_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_graphs_are_perfect() {
        let w = WeightMatrix::new(array![[0.0, 1.0, 0.0], [0.0, 0.0, -2.0], [0.0, 0.0, 0.0]]).unwrap();
        let m = compare(&w, &w, 1e-8).unwrap();
        assert_eq!((m.shd, m.tpr, m.fdr), (0, 1.0, 0.0));
    }

    #[test]
    fn flipped_edge_counts_once() {
        let truth = WeightMatrix::new(array![[0.0, 1.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        let est = WeightMatrix::new(array![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        let m = compare(&est, &truth, 1e-8).unwrap();
        assert_eq!(m.shd, 1);
        assert_eq!(m.reversed, 1);
        assert_eq!(m.tp, 1);
        assert_eq!(m.fn_, 0);
        assert_eq!(m.fdr, 0.5);
        assert_eq!(m.tpr, 0.5);
    }

    #[test]
    fn empty_estimate() {
        let truth = WeightMatrix::new(array![[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let m = compare(&WeightMatrix::zeros(2), &truth, 1e-8).unwrap();
        assert_eq!((m.shd, m.fn_, m.predicted, m.fdr, m.tpr), (1, 1, 0, 0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(compare(&WeightMatrix::zeros(2), &WeightMatrix::zeros(3), 0.0).is_err());
    }
}
