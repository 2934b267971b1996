//! Structure learners built on the shared augmented-Lagrangian solver.
//!
//! * [`notears_fixed`]: ℓ₁-penalized least squares, then `|w| < threshold`
//!   is zeroed.
//! * [`notears_al`]: an unpenalized first stage gives adaptive weights
//!   `c = 1/|ŵ|^γ`; the second stage solves the ℓ₁ problem in `W_C = C ∘ W`
//!   and needs no threshold.
//! * [`notears_logistic`] and [`notears_al_logistic`]: the same recipes with
//!   the logistic log loss on binary data.
//!
//! Every returned `W_hat` is exactly acyclic: residual cycles left by the
//! `h ≤ h_tol` stopping rule are removed by [`repair_to_dag`].

mod score;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::graphs::{repair_to_dag, write_edge_list, Edge, DEFAULT_ZERO_TOL};
use crate::matrix::WeightMatrix;
use crate::solver::{augmented_lagrangian, SmoothScore, SolverConfig, SplitVars, TraceRecord};

pub use crate::penalty::{build_penalties, PenaltyWeights, DEFAULT_FREEZE_TOL};
pub use score::{logistic_score, LeastSquaresScore, LogisticScore};

/// Benchmark default for λ and the post-hoc threshold.
pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_THRESHOLD: f64 = 0.1;
pub const DEFAULT_GAMMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Notears,
    NotearsAl,
    NotearsLogistic,
    NotearsAlLogistic,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Notears,
        EstimatorKind::NotearsAl,
        EstimatorKind::NotearsLogistic,
        EstimatorKind::NotearsAlLogistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Notears => "notears",
            EstimatorKind::NotearsAl => "notears_al",
            EstimatorKind::NotearsLogistic => "notears_logistic",
            EstimatorKind::NotearsAlLogistic => "notears_al_logistic",
        }
    }

    pub fn is_logistic(self) -> bool {
        matches!(self, EstimatorKind::NotearsLogistic | EstimatorKind::NotearsAlLogistic)
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, EstimatorKind::NotearsAl | EstimatorKind::NotearsAlLogistic)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| invalid(format!("unknown estimator {s:?}")))
    }
}

/// Diagnostics of one solver stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: String,
    pub converged: bool,
    pub seconds: f64,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub estimator: EstimatorKind,
    /// Final acyclic estimate; entries with `|w| ≤ zero_tol` are exactly 0.
    pub w_hat: WeightMatrix,
    /// Solver output in original coordinates before thresholding and repair.
    pub w_raw: Array2<f64>,
    pub h_final: f64,
    pub lambda_used: f64,
    pub gamma: Option<f64>,
    pub threshold: Option<f64>,
    pub converged: bool,
    pub stage_traces: Vec<StageTrace>,
    pub seconds: f64,
}

impl EstimateResult {
    pub fn support(&self) -> Vec<Edge> {
        self.w_hat.edges(DEFAULT_ZERO_TOL).into_iter().map(|(src, dst, weight)| Edge { src, dst, weight }).collect()
    }

    /// `{estimator, W_hat, support, h_final, lambda_used, gamma, threshold, converged, timings}`.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = self.w_hat.as_array().rows().into_iter().map(|r| r.to_vec()).collect();
        let mut timings = serde_json::Map::new();
        for s in &self.stage_traces {
            timings.insert(s.stage.clone(), s.seconds.into());
        }
        timings.insert("total".into(), self.seconds.into());
        serde_json::json!({
            "estimator": self.estimator,
            "W_hat": rows,
            "support": self.support(),
            "h_final": self.h_final,
            "lambda_used": self.lambda_used,
            "gamma": self.gamma,
            "threshold": self.threshold,
            "converged": self.converged,
            "timings": timings,
        })
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, &self.to_json())?;
        writeln!(w)?;
        Ok(())
    }

    pub fn write_edge_list<W: Write>(&self, w: W) -> Result<()> {
        write_edge_list(w, &self.w_hat, DEFAULT_ZERO_TOL)
    }

    /// One JSON object per accepted outer step, tagged with its stage.
    pub fn write_trace_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for stage in &self.stage_traces {
            for r in &stage.records {
                let mut v = serde_json::to_value(r)?;
                v["stage"] = stage.stage.clone().into();
                serde_json::to_writer(&mut w, &v)?;
                writeln!(w)?;
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { h: self.h_final, partial: Box::new(self) })
        }
    }
}

struct StageOutput {
    /// Original coordinates.
    w: Array2<f64>,
    iterate: SplitVars,
    h: f64,
    converged: bool,
    trace: StageTrace,
}

fn run_stage(
    score: &dyn SmoothScore,
    l1: &Array2<f64>,
    reparam: Option<&PenaltyWeights>,
    cfg: &SolverConfig,
    start: SplitVars,
    stage: &str,
) -> Result<StageOutput> {
    let t0 = Instant::now();
    let mask = start.mask.clone();
    let (w, iterate, h, converged, records) = match augmented_lagrangian(score, l1, reparam, cfg, start) {
        Ok(out) => {
            let v = out.w.into_inner();
            let w = match reparam {
                Some(p) => p.to_original(&v),
                None => v,
            };
            (w, out.state.iterate, out.state.h_val, true, out.trace)
        }
        Err(Error::NonConvergence { h, rho, best, trace }) => {
            log::warn!("{stage} stage stopped at rho {rho:e} with h {h:e}");
            let w = *best;
            let opt = match reparam {
                Some(p) => p.to_scaled(&w),
                None => w.clone(),
            };
            (w, SplitVars::from_matrix(&opt, mask), h, false, trace)
        }
        Err(e) => return Err(e),
    };
    let trace = StageTrace { stage: stage.into(), converged, seconds: t0.elapsed().as_secs_f64(), records };
    Ok(StageOutput { w, iterate, h, converged, trace })
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and nonnegative, got {v}")))
    }
}

fn drop_small(w: &Array2<f64>, below: f64) -> Array2<f64> {
    w.mapv(|x| if x.abs() < below || x.abs() <= DEFAULT_ZERO_TOL { 0.0 } else { x })
}

/// ℓ₁-penalized fit, hard threshold, repair.
pub fn fixed_with(
    score: &dyn SmoothScore,
    estimator: EstimatorKind,
    lambda: f64,
    threshold: f64,
    cfg: &SolverConfig,
) -> Result<EstimateResult> {
    check_nonneg("lambda", lambda)?;
    check_nonneg("threshold", threshold)?;
    let t0 = Instant::now();
    let d = score.d();
    let l1 = Array2::from_elem((d, d), lambda);
    let stage = run_stage(score, &l1, None, cfg, SplitVars::zeros(d), "notears")?;
    let w_hat = repair_to_dag(&WeightMatrix::from_offdiag(drop_small(&stage.w, threshold))?, DEFAULT_ZERO_TOL);
    EstimateResult {
        estimator,
        w_hat,
        w_raw: stage.w,
        h_final: stage.h,
        lambda_used: lambda,
        gamma: None,
        threshold: Some(threshold),
        converged: stage.converged,
        stage_traces: vec![stage.trace],
        seconds: t0.elapsed().as_secs_f64(),
    }
    .finish()
}

/// Unpenalized constrained fit. Non-convergence is reported through the
/// returned flag, not as an error.
pub fn first_stage_with(score: &dyn SmoothScore, cfg: &SolverConfig) -> Result<(WeightMatrix, StageTrace)> {
    let d = score.d();
    let stage = run_stage(score, &Array2::zeros((d, d)), None, cfg, SplitVars::zeros(d), "ols")?;
    Ok((WeightMatrix::from_offdiag(stage.w)?, stage.trace))
}

/// Second stage of the adaptive lasso for given penalties.
///
/// `warm` (optimization coordinates) seeds the solver, e.g. from the previous
/// λ on a path. Returns the result and the final split iterate; the iterate is
/// returned even when the stage did not converge.
pub fn adaptive_stage_with(
    score: &dyn SmoothScore,
    estimator: EstimatorKind,
    penalties: &PenaltyWeights,
    lambda: f64,
    cfg: &SolverConfig,
    warm: Option<&SplitVars>,
) -> Result<(EstimateResult, SplitVars)> {
    check_nonneg("lambda", lambda)?;
    let d = score.d();
    if penalties.d() != d {
        return Err(invalid(format!("penalties are {}x{0}, data has {d} columns", penalties.d())));
    }
    let t0 = Instant::now();
    let mask = penalties.frozen().mapv(|f| !f);
    let start = match warm {
        Some(s) => SplitVars::from_matrix(&s.reconstruct(), mask),
        None => SplitVars::zeros_masked(mask),
    };
    let l1 = Array2::from_elem((d, d), lambda);
    let stage = run_stage(score, &l1, Some(penalties), cfg, start, "adaptive")?;
    let w_hat = repair_to_dag(&WeightMatrix::from_offdiag(drop_small(&stage.w, 0.0))?, DEFAULT_ZERO_TOL);
    let result = EstimateResult {
        estimator,
        w_hat,
        w_raw: stage.w,
        h_final: stage.h,
        lambda_used: lambda,
        gamma: Some(penalties.gamma()),
        threshold: None,
        converged: stage.converged,
        stage_traces: vec![stage.trace],
        seconds: t0.elapsed().as_secs_f64(),
    };
    Ok((result, stage.iterate))
}

/// Both adaptive-lasso stages.
pub fn adaptive_with(
    score: &dyn SmoothScore,
    estimator: EstimatorKind,
    lambda: f64,
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<EstimateResult> {
    let t0 = Instant::now();
    let (w_first, first_trace) = first_stage_with(score, cfg)?;
    if !first_trace.converged {
        log::warn!("first stage did not converge; penalties use its best iterate");
    }
    let penalties = build_penalties(&w_first, gamma, DEFAULT_FREEZE_TOL)?;
    let (mut result, _) = adaptive_stage_with(score, estimator, &penalties, lambda, cfg, None)?;
    result.stage_traces.insert(0, first_trace);
    result.seconds = t0.elapsed().as_secs_f64();
    result.finish()
}

pub fn notears_fixed(data: &Dataset, lambda: f64, threshold: f64, cfg: &SolverConfig) -> Result<EstimateResult> {
    fixed_with(&LeastSquaresScore::new(data)?, EstimatorKind::Notears, lambda, threshold, cfg)
}

/// Unpenalized least squares under `h(W) = 0`, without thresholding.
pub fn ols_stage(data: &Dataset, cfg: &SolverConfig) -> Result<WeightMatrix> {
    let score = LeastSquaresScore::new(data)?;
    let d = score.d();
    let out = augmented_lagrangian(&score, &Array2::zeros((d, d)), None, cfg, SplitVars::zeros(d))?;
    Ok(out.w)
}

pub fn notears_al(data: &Dataset, lambda_n: f64, gamma: f64, cfg: &SolverConfig) -> Result<EstimateResult> {
    adaptive_with(&LeastSquaresScore::new(data)?, EstimatorKind::NotearsAl, lambda_n, gamma, cfg)
}

pub fn notears_logistic(data: &Dataset, lambda: f64, threshold: f64, cfg: &SolverConfig) -> Result<EstimateResult> {
    fixed_with(&LogisticScore::new(data)?, EstimatorKind::NotearsLogistic, lambda, threshold, cfg)
}

pub fn notears_al_logistic(data: &Dataset, lambda_n: f64, gamma: f64, cfg: &SolverConfig) -> Result<EstimateResult> {
    adaptive_with(&LogisticScore::new(data)?, EstimatorKind::NotearsAlLogistic, lambda_n, gamma, cfg)
}

/// The score matching an estimator kind.
pub fn score_for(kind: EstimatorKind, data: &Dataset) -> Result<Box<dyn SmoothScore>> {
    Ok(if kind.is_logistic() { Box::new(LogisticScore::new(data)?) } else { Box::new(LeastSquaresScore::new(data)?) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::topological_order;
    use crate::simulate::{simulate_linear_sem, NoiseKind};
    use ndarray::array;

    fn chain_data(w: f64, n: usize, seed: u64) -> Dataset {
        let truth = WeightMatrix::new(array![[0.0, w], [0.0, 0.0]]).unwrap();
        simulate_linear_sem(&truth, n, &NoiseKind::default(), seed).unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("pc".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn fixed_recovers_a_strong_chain() {
        let ds = chain_data(1.5, 1000, 4);
        let r = notears_fixed(&ds, DEFAULT_LAMBDA, DEFAULT_THRESHOLD, &SolverConfig::default()).unwrap();
        assert_eq!(r.w_hat.edges(DEFAULT_ZERO_TOL).iter().map(|e| (e.0, e.1)).collect::<Vec<_>>(), vec![(0, 1)]);
        assert!(topological_order(&r.w_hat, 0.0).is_ok());
    }

    #[test]
    fn frozen_entries_are_exact_zeros() {
        let ds = chain_data(1.0, 500, 9);
        let score = LeastSquaresScore::new(&ds).unwrap();
        let w_first = WeightMatrix::new(array![[0.0, 0.9], [0.0, 0.0]]).unwrap();
        let p = build_penalties(&w_first, 1.0, DEFAULT_FREEZE_TOL).unwrap();
        let (r, it) =
            adaptive_stage_with(&score, EstimatorKind::NotearsAl, &p, 0.0, &SolverConfig::default(), None).unwrap();
        assert_eq!(r.w_raw[[1, 0]], 0.0);
        assert_eq!(it.w_plus[[1, 0]] + it.w_minus[[1, 0]], 0.0);
        assert!(r.w_hat.get(0, 1) > 0.5);
    }

    #[test]
    fn unit_penalties_reproduce_the_fixed_objective() {
        let ds = chain_data(0.8, 300, 2);
        let score = LeastSquaresScore::new(&ds).unwrap();
        let cfg = SolverConfig::default();
        let lambda = 0.05;
        let fixed = fixed_with(&score, EstimatorKind::Notears, lambda, 0.0, &cfg).unwrap();
        let (ad, _) =
            adaptive_stage_with(&score, EstimatorKind::NotearsAl, &PenaltyWeights::uniform(2), lambda, &cfg, None)
                .unwrap();
        let objective = |w: &Array2<f64>| {
            let mut g = Array2::zeros((2, 2));
            score.value_grad(w, &mut g) + lambda * w.iter().map(|x| x.abs()).sum::<f64>()
        };
        assert!((objective(&fixed.w_raw) - objective(&ad.w_raw)).abs() < 1e-6);
    }

    #[test]
    fn json_and_trace_outputs() {
        let ds = chain_data(1.0, 200, 1);
        let r = notears_al(&ds, 0.01, 1.0, &SolverConfig::default()).unwrap();
        let v = r.to_json();
        assert_eq!(v["estimator"], "notears_al");
        assert_eq!(v["W_hat"].as_array().unwrap().len(), 2);
        assert!(v["timings"]["ols"].is_number());
        assert!(v["timings"]["adaptive"].is_number());
        let mut buf = Vec::new();
        r.write_trace_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["stage"], "ols");
        assert!(first["rho"].is_number());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let ds = chain_data(1.0, 50, 1);
        let cfg = SolverConfig::default();
        assert!(notears_fixed(&ds, -1.0, 0.1, &cfg).is_err());
        assert!(notears_fixed(&ds, 0.1, f64::NAN, &cfg).is_err());
        assert!(notears_al(&ds, 0.1, 0.0, &cfg).is_err());
        assert!(notears_logistic(&ds, 0.1, 0.1, &cfg).is_err());
    }
}
