use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::acyclicity::{h_and_grad_raw, h_and_grad_reparam, AcyclicityValue};
use crate::error::{invalid, Error, Result};
use crate::matrix::WeightMatrix;
use crate::penalty::PenaltyWeights;

use super::{minimize_box_scaled, SmoothScore, SolverConfig, SplitVars};

/// Dual-ascent state after an accepted outer step.
#[derive(Debug, Clone, PartialEq)]
pub struct AugLagState {
    pub rho: f64,
    pub alpha: f64,
    pub iterate: SplitVars,
    pub h_val: f64,
    pub outer_iter: usize,
}

/// One JSON-lines diagnostic record per accepted outer step. `score` is the
/// data term plus the ℓ₁ term at the accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer_iter: usize,
    pub rho: f64,
    pub alpha: f64,
    pub h: f64,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct AugLagOutcome {
    /// Reconstructed `W⁺ − W⁻` in optimization coordinates (`W_C` when reparametrized).
    pub w: WeightMatrix,
    pub state: AugLagState,
    pub trace: Vec<TraceRecord>,
    pub inner_iterations: usize,
}

/// The smooth inner objective over the flattened active split variables
/// `[w⁺ (active entries, row-major), w⁻ (same order)]`:
///
/// `score(W) + Σ l1 ∘ (w⁺ + w⁻) + (ρ/2) h² + α h`
///
/// with `W = V` or `W = V ⊘ C` when penalty weights are given, `V = w⁺ − w⁻`.
pub struct InnerObjective<'a, S: SmoothScore + ?Sized> {
    score: &'a S,
    l1: &'a Array2<f64>,
    reparam: Option<&'a PenaltyWeights>,
    idx: Vec<(usize, usize)>,
    pub rho: f64,
    pub alpha: f64,
}

/// Values of the objective's parts at one point.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveParts {
    pub score: f64,
    pub l1: f64,
    pub h: f64,
}

impl<'a, S: SmoothScore + ?Sized> InnerObjective<'a, S> {
    pub fn new(
        score: &'a S,
        l1: &'a Array2<f64>,
        reparam: Option<&'a PenaltyWeights>,
        mask: &Array2<bool>,
    ) -> Result<Self> {
        let d = score.d();
        if l1.dim() != (d, d) || mask.dim() != (d, d) {
            return Err(invalid(format!("l1 {:?} and mask {:?} must be {d}x{d}", l1.dim(), mask.dim())));
        }
        if let Some(p) = reparam {
            if p.d() != d {
                return Err(invalid("penalty weights do not match the score dimension"));
            }
            p.validate()?;
            if Zip::from(mask).and(p.frozen()).fold(false, |acc, &m, &f| acc || (m && f)) {
                return Err(invalid("mask activates a frozen entry"));
            }
        }
        let idx: Vec<(usize, usize)> =
            mask.indexed_iter().filter(|((i, j), m)| **m && i != j).map(|(ij, _)| ij).collect();
        for &ij in &idx {
            let c = l1[ij];
            if !(c >= 0.0 && c.is_finite()) {
                return Err(invalid(format!("l1 coefficient at {ij:?} must be finite and nonnegative, got {c}")));
            }
        }
        Ok(Self { score, l1, reparam, idx, rho: 0.0, alpha: 0.0 })
    }

    pub fn dim(&self) -> usize {
        2 * self.idx.len()
    }

    /// Diagonal curvature of the data term in optimization coordinates,
    /// repeated for the `w⁺` and `w⁻` halves.
    fn curvature(&self) -> Option<Vec<f64>> {
        let c = self.score.curvature()?;
        let half: Vec<f64> = self
            .idx
            .iter()
            .map(|&ij| match self.reparam {
                Some(p) => c[ij] / p.coefficients()[ij].powi(2),
                None => c[ij],
            })
            .collect();
        let top = half.iter().copied().fold(0.0, f64::max);
        if !(top > 0.0 && top.is_finite()) {
            return None;
        }
        let floor = top * 1e-12;
        Some(half.iter().chain(half.iter()).map(|v| if v.is_finite() { v.max(floor) } else { top }).collect())
    }

    fn assemble(&self, x: &[f64]) -> Array2<f64> {
        let d = self.score.d();
        let m = self.idx.len();
        let mut v = Array2::<f64>::zeros((d, d));
        for (k, &ij) in self.idx.iter().enumerate() {
            v[ij] = x[k] - x[m + k];
        }
        v
    }

    fn acyclicity(&self, v: &Array2<f64>) -> Result<AcyclicityValue> {
        match self.reparam {
            Some(p) => h_and_grad_reparam(v, p),
            None => h_and_grad_raw(v),
        }
    }

    fn original(&self, v: &Array2<f64>) -> Array2<f64> {
        match self.reparam {
            Some(p) => p.to_original(v),
            None => v.clone(),
        }
    }

    fn l1_term(&self, x: &[f64]) -> f64 {
        let m = self.idx.len();
        self.idx.iter().enumerate().map(|(k, &ij)| self.l1[ij] * (x[k] + x[m + k])).sum()
    }

    /// Objective value; writes the gradient into `g`. Returns `+∞` where the
    /// matrix exponential fails so that line searches back off.
    pub fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let v = self.assemble(x);
        let w = self.original(&v);
        let d = self.score.d();
        let mut gw = Array2::<f64>::zeros((d, d));
        let s = self.score.value_grad(&w, &mut gw);
        let Ok(acyc) = self.acyclicity(&v) else {
            return f64::INFINITY;
        };
        let h = acyc.h;
        let coef = self.rho * h + self.alpha;
        let m = self.idx.len();
        for (k, &ij) in self.idx.iter().enumerate() {
            let gs = match self.reparam {
                Some(p) => gw[ij] / p.coefficients()[ij],
                None => gw[ij],
            };
            let gv = gs + coef * acyc.grad[ij];
            g[k] = gv + self.l1[ij];
            g[m + k] = -gv + self.l1[ij];
        }
        s + self.l1_term(x) + 0.5 * self.rho * h * h + self.alpha * h
    }

    pub fn parts(&self, x: &[f64]) -> Result<ObjectiveParts> {
        let v = self.assemble(x);
        let w = self.original(&v);
        let d = self.score.d();
        let mut gw = Array2::<f64>::zeros((d, d));
        let score = self.score.value_grad(&w, &mut gw);
        let h = self.acyclicity(&v)?.h;
        Ok(ObjectiveParts { score, l1: self.l1_term(x), h })
    }
}

/// Dual ascent on `h(W) = 0`.
///
/// Each outer step solves the inner problem from the last accepted iterate,
/// multiplying ρ by η and re-solving until `h < ξ · h_prev` or ρ reaches
/// `rho_max`; then `α ← α + ρ h`. Stops once `h ≤ h_tol`.
///
/// With `reparam`, the variables are `W_C` and the data term sees `W_C ⊘ C`.
/// The returned iterate is in optimization coordinates.
pub fn augmented_lagrangian<S: SmoothScore + ?Sized>(
    score: &S,
    l1: &Array2<f64>,
    reparam: Option<&PenaltyWeights>,
    cfg: &SolverConfig,
    start: SplitVars,
) -> Result<AugLagOutcome> {
    cfg.validate()?;
    let d = score.d();
    if start.d() != d {
        return Err(invalid(format!("start has {} nodes, score has {d}", start.d())));
    }
    if start.w_plus.iter().chain(start.w_minus.iter()).any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(invalid("split variables must be finite and nonnegative"));
    }
    let mut obj = InnerObjective::new(score, l1, reparam, &start.mask)?;
    let idx = obj.idx.clone();
    let mut iterate = SplitVars::zeros_masked(start.mask.clone());
    iterate.set_flat(&idx, &start.to_flat(&idx));

    let mut state = AugLagState { rho: cfg.rho0, alpha: cfg.alpha0, iterate, h_val: 0.0, outer_iter: 0 };
    let mut trace = Vec::new();
    let mut inner_iterations = 0;

    if idx.is_empty() {
        return Ok(AugLagOutcome { w: WeightMatrix::zeros(d), state, trace, inner_iterations });
    }

    let curvature = obj.curvature();
    let mut x = state.iterate.to_flat(&idx);
    let mut h_prev = f64::INFINITY;
    let mut converged = false;
    for outer in 1..=cfg.max_outer {
        let (x_new, parts) = loop {
            obj.rho = state.rho;
            obj.alpha = state.alpha;
            let out = minimize_box_scaled(|x, g| obj.value_grad(x, g), x.clone(), curvature.as_deref(), cfg)?;
            inner_iterations += out.iterations;
            let parts = obj.parts(&out.x)?;
            log::trace!(
                "outer {outer}: rho {:e}, h {:e}, inner {} iters ({:?})",
                state.rho,
                parts.h,
                out.iterations,
                out.status
            );
            if parts.h > cfg.xi * h_prev && state.rho < cfg.rho_max {
                state.rho *= cfg.eta;
            } else {
                break (out.x, parts);
            }
        };
        x = x_new;
        h_prev = parts.h;
        state.alpha += state.rho * parts.h;
        state.h_val = parts.h;
        state.outer_iter = outer;
        trace.push(TraceRecord {
            outer_iter: outer,
            rho: state.rho,
            alpha: state.alpha,
            h: parts.h,
            score: parts.score + parts.l1,
        });
        if parts.h <= cfg.h_tol {
            converged = true;
            break;
        }
        if state.rho >= cfg.rho_max {
            break;
        }
    }
    state.iterate.set_flat(&idx, &x);
    let v = state.iterate.reconstruct();
    if !converged {
        let best = match reparam {
            Some(p) => p.to_original(&v),
            None => v,
        };
        return Err(Error::NonConvergence { h: state.h_val, rho: state.rho, best: Box::new(best), trace });
    }
    Ok(AugLagOutcome { w: WeightMatrix::from_offdiag(v)?, state, trace, inner_iterations })
}
