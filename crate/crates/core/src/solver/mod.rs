//! Smooth optimization over the nonnegative split `W = W⁺ − W⁻` and the
//! augmented-Lagrangian driver that enforces `h(W) = 0`.

mod auglag;
mod boxqn;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use auglag::{augmented_lagrangian, AugLagOutcome, AugLagState, InnerObjective, ObjectiveParts, TraceRecord};
pub use boxqn::{minimize_box, minimize_box_scaled, BoxOutcome, BoxStatus};

/// A differentiable data-fit term in original `W` coordinates.
pub trait SmoothScore: Sync {
    fn d(&self) -> usize;

    /// Returns the score at `w` and overwrites `grad` with `∂score/∂W`.
    fn value_grad(&self, w: &Array2<f64>, grad: &mut Array2<f64>) -> f64;

    /// Positive estimate of `∂²score/∂W_ij²` used to precondition the inner
    /// solver. `None` means no scaling.
    fn curvature(&self) -> Option<Array2<f64>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub rho0: f64,
    pub alpha0: f64,
    /// Required h-decrease factor per outer step.
    pub xi: f64,
    /// ρ inflation factor.
    pub eta: f64,
    pub rho_max: f64,
    pub h_tol: f64,
    pub max_outer: usize,
    /// Projected-gradient (∞-norm) stopping tolerance of the inner solver.
    pub inner_grad_tol: f64,
    /// Relative objective-decrease stopping tolerance of the inner solver.
    pub inner_ftol: f64,
    pub inner_max_iter: usize,
    /// Quasi-Newton history length.
    pub memory: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            alpha0: 0.0,
            xi: 0.25,
            eta: 10.0,
            rho_max: 1e16,
            h_tol: 1e-8,
            max_outer: 100,
            inner_grad_tol: 1e-7,
            inner_ftol: 2.220446049250313e-9,
            inner_max_iter: 500,
            memory: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho0", self.rho0),
            ("eta", self.eta),
            ("rho_max", self.rho_max),
            ("h_tol", self.h_tol),
            ("inner_grad_tol", self.inner_grad_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(invalid(format!("xi must lie in (0, 1), got {}", self.xi)));
        }
        if !(self.eta > 1.0) {
            return Err(invalid(format!("eta must exceed 1, got {}", self.eta)));
        }
        if !self.alpha0.is_finite() || !(self.inner_ftol >= 0.0) {
            return Err(invalid("alpha0 must be finite and inner_ftol nonnegative"));
        }
        if self.max_outer == 0 || self.inner_max_iter == 0 || self.memory == 0 {
            return Err(invalid("max_outer, inner_max_iter and memory must be at least 1"));
        }
        Ok(())
    }
}

/// Nonnegative split variables. Entries outside `mask` (always including the
/// diagonal) are fixed at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVars {
    pub w_plus: Array2<f64>,
    pub w_minus: Array2<f64>,
    pub mask: Array2<bool>,
}

impl SplitVars {
    /// All-zero split with every off-diagonal entry active.
    pub fn zeros(d: usize) -> Self {
        let mask = Array2::from_shape_fn((d, d), |(i, j)| i != j);
        Self::zeros_masked(mask)
    }

    pub fn zeros_masked(mut mask: Array2<bool>) -> Self {
        let d = mask.nrows();
        for i in 0..d {
            mask[[i, i]] = false;
        }
        Self { w_plus: Array2::zeros((d, d)), w_minus: Array2::zeros((d, d)), mask }
    }

    /// Splits `w` into positive and negative parts on the mask.
    pub fn from_matrix(w: &Array2<f64>, mask: Array2<bool>) -> Self {
        let mut s = Self::zeros_masked(mask);
        for ((i, j), &x) in w.indexed_iter() {
            if s.mask[[i, j]] {
                s.w_plus[[i, j]] = x.max(0.0);
                s.w_minus[[i, j]] = (-x).max(0.0);
            }
        }
        s
    }

    pub fn d(&self) -> usize {
        self.mask.nrows()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        &self.w_plus - &self.w_minus
    }

    /// Σ (w⁺ + w⁻), the ℓ₁ surrogate.
    pub fn l1_mass(&self) -> f64 {
        self.w_plus.sum() + self.w_minus.sum()
    }

    #[cfg(test)]
    pub(crate) fn active_indices(&self) -> Vec<(usize, usize)> {
        self.mask.indexed_iter().filter(|(_, m)| **m).map(|(ij, _)| ij).collect()
    }

    pub(crate) fn to_flat(&self, idx: &[(usize, usize)]) -> Vec<f64> {
        idx.iter().map(|&ij| self.w_plus[ij]).chain(idx.iter().map(|&ij| self.w_minus[ij])).collect()
    }

    pub(crate) fn set_flat(&mut self, idx: &[(usize, usize)], x: &[f64]) {
        let m = idx.len();
        for (k, &ij) in idx.iter().enumerate() {
            self.w_plus[ij] = x[k];
            self.w_minus[ij] = x[m + k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn split_round_trip() {
        let w = array![[0.0, -1.5], [2.0, 0.0]];
        let s = SplitVars::from_matrix(&w, Array2::from_elem((2, 2), true));
        assert_eq!(s.reconstruct(), w);
        assert_eq!(s.l1_mass(), 3.5);
        assert!(!s.mask[[0, 0]]);
        let idx = s.active_indices();
        let flat = s.to_flat(&idx);
        assert_eq!(flat, vec![0.0, 2.0, 1.5, 0.0]);
        let mut t = SplitVars::zeros(2);
        t.set_flat(&idx, &flat);
        assert_eq!(t, s);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { xi: 1.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { eta: 1.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
    }
}
