//! Cross-validated choice of the adaptive-lasso λ (and optionally γ).
//!
//! Candidates are the distinct supports along a warm-started λ path fit on
//! all rows. Each fold is a random split with `val_fraction` of the rows held
//! out for validation, so training uses the smaller part. Every candidate
//! support is refit by unpenalized regression restricted to the support on
//! the training rows and scored on the validation rows.
//!
//! Continuous data uses least squares; binary data uses per-node logistic
//! regression without intercept.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::data::{DataKind, Dataset};
use crate::error::{invalid, Result};
use crate::estimators::{
    adaptive_stage_with, build_penalties, first_stage_with, score_for, EstimateResult, EstimatorKind, StageTrace,
    DEFAULT_FREEZE_TOL,
};
use crate::graphs::{topological_order, DEFAULT_ZERO_TOL};
use crate::matrix::{cholesky_solve, WeightMatrix};
use crate::penalty::PenaltyWeights;
use crate::rng::{derive_seed, rng_from_seed};
use crate::solver::{SmoothScore, SolverConfig, SplitVars};

/// Ridge added to a singular normal-equation system.
pub const RIDGE_JITTER: f64 = 1e-10;
/// Ridge of the logistic refit; keeps separable designs bounded.
pub const LOGISTIC_RIDGE: f64 = 1e-6;
pub const MIN_CV_ROWS: usize = 20;
/// Floor of automatic grid extension, relative to λ_max.
pub const MIN_AUTO_RATIO: f64 = 1e-12;
/// Consecutive extension decades without a new support before giving up.
pub const MAX_DRY_DECADES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaGrid {
    /// Positive values, used in descending order.
    Explicit(Vec<f64>),
    /// `count` log-spaced values from λ_max down to `ratio · λ_max`;
    /// [`cross_validate`] continues it downward while the winner sits at its end.
    Auto { count: usize, ratio: f64 },
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto { count: 25, ratio: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub lambda_grid: LambdaGrid,
    pub gamma_grid: Vec<f64>,
    pub val_fraction: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self { lambda_grid: LambdaGrid::default(), gamma_grid: vec![1.0], val_fraction: 0.8, folds: 5, seed: 0 }
    }
}

impl CvPlan {
    pub fn validate(&self) -> Result<()> {
        match &self.lambda_grid {
            LambdaGrid::Explicit(g) => {
                if g.is_empty() || g.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                    return Err(invalid("lambda grid must be nonempty with finite nonnegative values"));
                }
            }
            LambdaGrid::Auto { count, ratio } => {
                if *count == 0 || !(*ratio > 0.0 && *ratio <= 1.0) {
                    return Err(invalid("auto lambda grid needs count ≥ 1 and ratio in (0, 1]"));
                }
            }
        }
        if self.gamma_grid.is_empty() || self.gamma_grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(invalid("gamma grid must be nonempty with positive values"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(invalid(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction)));
        }
        if self.folds == 0 {
            return Err(invalid("folds must be at least 1"));
        }
        Ok(())
    }

    /// `(n_v, n_t)` with `n_v = round(val_fraction · n)` clamped so both parts are nonempty.
    pub fn split_sizes(&self, n: usize) -> (usize, usize) {
        let n_v = ((self.val_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
        (n_v, n - n_v)
    }

    /// Row indices `(validation, training)` of fold `fold`.
    pub fn split(&self, n: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut rng = rng_from_seed(derive_seed(self.seed, &[fold as u64]));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let (n_v, _) = self.split_sizes(n);
        let train = perm.split_off(n_v);
        (perm, train)
    }
}

/// One distinct support found on the path.
#[derive(Debug, Clone)]
pub struct CandidateModel {
    /// Row-major edge list.
    pub support: Vec<(usize, usize)>,
    pub lambda: f64,
    pub gamma: f64,
    /// Restricted refit on all rows.
    pub refit_w: WeightMatrix,
    /// Mean validation loss; NaN before scoring.
    pub val_loss: f64,
    /// The path estimate that produced this support.
    pub fit: EstimateResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvRow {
    pub lambda: f64,
    pub gamma: f64,
    pub fold: usize,
    pub support_size: usize,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub best: CandidateModel,
    pub candidates: Vec<CandidateModel>,
    pub table: Vec<CvRow>,
    pub first_stage: Option<StageTrace>,
}

impl CvOutcome {
    /// `lambda,gamma,fold,support_size,val_loss`, one row per candidate and fold.
    pub fn write_table_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for row in &self.table {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn winner_json(&self) -> serde_json::Value {
        let b = &self.best;
        serde_json::json!({
            "lambda": b.lambda,
            "gamma": b.gamma,
            "support_size": b.support.len(),
            "support": b.support.iter().map(|(i, j)| [i, j]).collect::<Vec<_>>(),
            "mean_val_loss": b.val_loss,
            "candidates": self.candidates.len(),
        })
    }

    /// The path estimate at the selected λ, tagged with the first-stage trace.
    pub fn estimate(&self) -> EstimateResult {
        let mut r = self.best.fit.clone();
        if let Some(t) = &self.first_stage {
            r.stage_traces.insert(0, t.clone());
        }
        r
    }
}

/// Smallest λ whose adaptive-lasso solution is exactly zero:
/// `max |∂score/∂W_ij(0)| / c_ij` over active entries.
///
/// At `W_C = 0` the acyclicity terms have zero gradient, so the zero matrix
/// is a KKT point exactly when every scaled score gradient is within λ; the
/// score is convex, so it is then the global solution.
pub fn lambda_max(score: &dyn SmoothScore, penalties: &PenaltyWeights) -> f64 {
    let d = score.d();
    let mut g = Array2::zeros((d, d));
    score.value_grad(&Array2::zeros((d, d)), &mut g);
    let mut top = 0.0f64;
    for ((i, j), gij) in g.indexed_iter() {
        if i != j && !penalties.frozen()[[i, j]] {
            top = top.max(gij.abs() / penalties.coefficients()[[i, j]]);
        }
    }
    top
}

/// Log-spaced descending grid from `lmax` to `ratio · lmax`.
pub fn log_grid(lmax: f64, count: usize, ratio: f64) -> Vec<f64> {
    if count == 1 {
        return vec![lmax];
    }
    (0..count).map(|k| lmax * ratio.powf(k as f64 / (count - 1) as f64)).collect()
}

fn family(data: &Dataset) -> EstimatorKind {
    match data.kind() {
        DataKind::Continuous => EstimatorKind::NotearsAl,
        DataKind::Binary => EstimatorKind::NotearsAlLogistic,
    }
}

fn support_of(w: &WeightMatrix) -> Vec<(usize, usize)> {
    w.edges(DEFAULT_ZERO_TOL).into_iter().map(|(i, j, _)| (i, j)).collect()
}

/// Warm-started adaptive-lasso path, one run per (γ, λ), distinct supports only.
///
/// A support found at several λ keeps the smallest one, whose estimate is the
/// least shrunk; the first γ that produced it wins.
pub fn solution_path(data: &Dataset, plan: &CvPlan, cfg: &SolverConfig) -> Result<Vec<CandidateModel>> {
    Ok(PathBuilder::new(data, plan, cfg)?.out)
}

/// One γ's path: its penalties, warm start and the smallest λ run so far.
struct GammaPath {
    gamma: f64,
    penalties: PenaltyWeights,
    warm: Option<SplitVars>,
    lambda_max: f64,
    smallest: f64,
    /// Support at `smallest`.
    last_support: Option<Vec<(usize, usize)>>,
    /// Ratio between consecutive auto-grid points.
    step: f64,
    per_decade: usize,
}

struct PathBuilder<'a> {
    kind: EstimatorKind,
    score: Box<dyn SmoothScore>,
    cfg: &'a SolverConfig,
    d: usize,
    first_trace: StageTrace,
    paths: Vec<GammaPath>,
    seen: HashMap<Vec<(usize, usize)>, usize>,
    out: Vec<CandidateModel>,
    /// While extending, known supports keep their stored estimate.
    extending: bool,
}

impl<'a> PathBuilder<'a> {
    fn new(data: &Dataset, plan: &CvPlan, cfg: &'a SolverConfig) -> Result<Self> {
        plan.validate()?;
        let kind = family(data);
        let score = score_for(kind, data)?;
        let (w_first, first_trace) = first_stage_with(score.as_ref(), cfg)?;
        if !first_trace.converged {
            log::warn!("first stage did not converge; penalties use its best iterate");
        }
        let mut b = Self {
            kind,
            score,
            cfg,
            d: data.d(),
            first_trace,
            paths: vec![],
            seen: HashMap::new(),
            out: vec![],
            extending: false,
        };
        for &gamma in &plan.gamma_grid {
            let penalties = build_penalties(&w_first, gamma, DEFAULT_FREEZE_TOL)?;
            let lmax = lambda_max(b.score.as_ref(), &penalties);
            let (grid, step) = match &plan.lambda_grid {
                LambdaGrid::Explicit(g) => {
                    let mut g = g.clone();
                    g.sort_by(|a, b| b.total_cmp(a));
                    (g, 0.0)
                }
                LambdaGrid::Auto { count, ratio } => {
                    let step = if *count > 1 { ratio.powf(1.0 / (*count - 1) as f64) } else { 0.1 };
                    (log_grid(lmax, *count, *ratio), step)
                }
            };
            let per_decade = if step > 0.0 && step < 1.0 { (-1.0 / step.log10()).ceil() as usize } else { 0 };
            let mut path = GammaPath {
                gamma,
                penalties,
                warm: None,
                lambda_max: lmax,
                smallest: f64::INFINITY,
                last_support: None,
                step,
                per_decade,
            };
            for lambda in grid {
                b.run(&mut path, lambda);
            }
            b.paths.push(path);
        }
        Ok(b)
    }

    /// Fits one path point; true if it produced a new support.
    fn run(&mut self, path: &mut GammaPath, lambda: f64) -> bool {
        path.smallest = path.smallest.min(lambda);
        let gamma = path.gamma;
        let (fit, iterate) = match adaptive_stage_with(
            self.score.as_ref(),
            self.kind,
            &path.penalties,
            lambda,
            self.cfg,
            path.warm.as_ref(),
        ) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("path point lambda={lambda:e} gamma={gamma} failed: {e}");
                return false;
            }
        };
        path.warm = Some(iterate);
        if !fit.converged {
            log::warn!("path point lambda={lambda:e} gamma={gamma} did not converge; using repaired iterate");
        }
        let support = support_of(&fit.w_hat);
        path.last_support = Some(support.clone());
        if let Some(&k) = self.seen.get(&support) {
            // Same support at a smaller λ: keep the least-shrunk estimate.
            // Extension only looks for new supports; far below the grid a
            // vanishing penalty would let known estimates lose exact zeros.
            let c = &mut self.out[k];
            if !self.extending && c.gamma == gamma && lambda < c.lambda {
                c.lambda = lambda;
                c.fit = fit;
            }
            false
        } else {
            self.seen.insert(support.clone(), self.out.len());
            self.out.push(CandidateModel {
                support,
                lambda,
                gamma,
                refit_w: WeightMatrix::zeros(self.d),
                val_loss: f64::NAN,
                fit,
            });
            true
        }
    }

    /// Continues γ's auto grid one decade down, stopping at
    /// [`MIN_AUTO_RATIO`]` · λ_max`. True if a new support appeared.
    fn extend(&mut self, gamma: f64) -> bool {
        let Some(k) = self.paths.iter().position(|p| p.gamma == gamma) else {
            return false;
        };
        let mut paths = std::mem::take(&mut self.paths);
        let path = &mut paths[k];
        let floor = path.lambda_max * MIN_AUTO_RATIO;
        let mut added = false;
        self.extending = true;
        for _ in 0..path.per_decade {
            let lambda = path.smallest * path.step;
            if lambda < floor {
                break;
            }
            added |= self.run(path, lambda);
        }
        self.extending = false;
        self.paths = paths;
        added
    }

    /// True if `c`'s support is the one at the smallest λ of an extendable auto grid.
    fn at_boundary(&self, c: &CandidateModel) -> bool {
        self.paths.iter().any(|p| {
            p.gamma == c.gamma
                && p.per_decade > 0
                && p.last_support.as_ref() == Some(&c.support)
                && p.smallest * p.step >= p.lambda_max * MIN_AUTO_RATIO
        })
    }
}

/// Result of a restricted refit.
#[derive(Debug, Clone, PartialEq)]
pub struct Refit {
    pub w: WeightMatrix,
    /// True if any node's system needed the ridge fallback.
    pub ridge_used: bool,
}

fn parents(support: &[(usize, usize)], d: usize) -> Result<Vec<Vec<usize>>> {
    let mut pa = vec![Vec::new(); d];
    for &(i, j) in support {
        if i >= d || j >= d || i == j {
            return Err(invalid(format!("support edge ({i}, {j}) is invalid for d = {d}")));
        }
        pa[j].push(i);
    }
    for p in &mut pa {
        p.sort_unstable();
        p.dedup();
    }
    Ok(pa)
}

fn check_acyclic(support: &[(usize, usize)], d: usize) -> Result<()> {
    let mut a = Array2::zeros((d, d));
    for &(i, j) in support {
        a[[i, j]] = 1.0;
    }
    topological_order(&WeightMatrix::new(a)?, 0.0).map(|_| ())
}

/// Per-node regression on the support's parents; zeros elsewhere.
///
/// Continuous data: OLS on training-centered columns via the normal
/// equations, falling back to a `RIDGE_JITTER` ridge when singular.
/// Binary data: Newton-fitted logistic regression with a `LOGISTIC_RIDGE` ridge.
pub fn restricted_refit(support: &[(usize, usize)], train: &Dataset) -> Result<Refit> {
    let d = train.d();
    let pa = parents(support, d)?;
    check_acyclic(support, d)?;
    match train.kind() {
        DataKind::Continuous => {
            let xc = train.centered();
            let gram = xc.t().dot(&xc) / train.n() as f64;
            Ok(ols_refit(&gram, &pa))
        }
        DataKind::Binary => Ok(logistic_refit(train.x(), &pa)),
    }
}

fn ols_refit(gram: &Array2<f64>, pa: &[Vec<usize>]) -> Refit {
    let d = gram.nrows();
    let mut w = Array2::zeros((d, d));
    let mut ridge_used = false;
    for (j, p) in pa.iter().enumerate() {
        if p.is_empty() {
            continue;
        }
        let k = p.len();
        let a = Array2::from_shape_fn((k, k), |(r, c)| gram[[p[r], p[c]]]);
        let b = Array1::from_shape_fn(k, |r| gram[[p[r], j]]);
        let beta = cholesky_solve(&a, &b).unwrap_or_else(|| {
            ridge_used = true;
            let scale = (a.diag().sum() / k as f64).max(1.0);
            let ridged = &a + &(Array2::<f64>::eye(k) * (RIDGE_JITTER * scale));
            cholesky_solve(&ridged, &b).unwrap_or_else(|| Array1::zeros(k))
        });
        for (r, &i) in p.iter().enumerate() {
            w[[i, j]] = beta[r];
        }
    }
    Refit { w: WeightMatrix::from_offdiag(w).expect("finite refit"), ridge_used }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn logistic_refit(x: &Array2<f64>, pa: &[Vec<usize>]) -> Refit {
    let (n, d) = x.dim();
    let nf = n as f64;
    let mut w = Array2::zeros((d, d));
    for (j, p) in pa.iter().enumerate() {
        if p.is_empty() {
            continue;
        }
        let xp = x.select(Axis(1), p);
        let y = x.column(j);
        let k = p.len();
        let mut beta = Array1::<f64>::zeros(k);
        let objective = |b: &Array1<f64>| -> f64 {
            let t = xp.dot(b);
            t.iter().zip(y).map(|(ti, yi)| softplus(*ti) - yi * ti).sum::<f64>() / nf + 0.5 * LOGISTIC_RIDGE * b.dot(b)
        };
        let mut f = objective(&beta);
        for _ in 0..100 {
            let t = xp.dot(&beta);
            let mu = t.mapv(sigmoid);
            let grad = xp.t().dot(&(&mu - &y)) / nf + &beta * LOGISTIC_RIDGE;
            let wts = mu.mapv(|m| m * (1.0 - m));
            let mut hess = Array2::<f64>::eye(k) * LOGISTIC_RIDGE;
            for (row, wi) in xp.rows().into_iter().zip(&wts) {
                for r in 0..k {
                    for c in 0..k {
                        hess[[r, c]] += wi * row[r] * row[c] / nf;
                    }
                }
            }
            let Some(step) = cholesky_solve(&hess, &grad) else {
                break;
            };
            let slope = grad.dot(&step);
            let mut t_step = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let cand = &beta - &(&step * t_step);
                let fc = objective(&cand);
                if fc <= f - 1e-4 * t_step * slope {
                    beta = cand;
                    f = fc;
                    improved = true;
                    break;
                }
                t_step *= 0.5;
            }
            if !improved || slope < 1e-14 {
                break;
            }
        }
        for (r, &i) in p.iter().enumerate() {
            w[[i, j]] = beta[r];
        }
    }
    Refit { w: WeightMatrix::from_offdiag(w).expect("finite refit"), ridge_used: false }
}

/// Out-of-sample loss of `w` on `val`, centering continuous data with `means`.
fn validation_loss(w: &WeightMatrix, val: &Array2<f64>, kind: DataKind, means: Option<&Array1<f64>>) -> f64 {
    let n = val.nrows() as f64;
    match kind {
        DataKind::Continuous => {
            let xc = match means {
                Some(m) => val - &m.view().insert_axis(Axis(0)),
                None => val.clone(),
            };
            let r = &xc - &xc.dot(w.as_array());
            0.5 * r.iter().map(|v| v * v).sum::<f64>() / n
        }
        DataKind::Binary => {
            let t = val.dot(w.as_array());
            t.iter().zip(val.iter()).map(|(ti, xi)| softplus(*ti) - xi * ti).sum::<f64>() / n
        }
    }
}

/// Index of the winner: minimal loss, then smaller support, then larger λ,
/// then lexicographically smaller support. Independent of input order.
pub fn select_best(candidates: &[CandidateModel]) -> Option<usize> {
    let key_cmp = |a: &CandidateModel, b: &CandidateModel| -> Ordering {
        a.val_loss
            .total_cmp(&b.val_loss)
            .then(a.support.len().cmp(&b.support.len()))
            .then(b.lambda.total_cmp(&a.lambda))
            .then(a.support.cmp(&b.support))
            .then(a.gamma.total_cmp(&b.gamma))
    };
    (0..candidates.len()).min_by(|&i, &j| key_cmp(&candidates[i], &candidates[j]))
}

/// Scores given candidates by repeated random splits and picks the winner.
pub fn cross_validate_candidates(
    data: &Dataset,
    mut candidates: Vec<CandidateModel>,
    plan: &CvPlan,
) -> Result<CvOutcome> {
    plan.validate()?;
    let n = data.n();
    if n < MIN_CV_ROWS {
        return Err(invalid(format!("cross-validation needs at least {MIN_CV_ROWS} rows, got {n}")));
    }
    if candidates.is_empty() {
        return Err(invalid("no candidate models to select from"));
    }
    let kind = data.kind();
    let mut sums = vec![0.0; candidates.len()];
    let mut table = Vec::with_capacity(candidates.len() * plan.folds);
    for fold in 0..plan.folds {
        let (val_idx, train_idx) = plan.split(n, fold);
        let train = Dataset::new(data.rows(&train_idx), kind)?;
        let val = data.rows(&val_idx);
        let means = (kind == DataKind::Continuous).then(|| train.column_means());
        for (k, c) in candidates.iter().enumerate() {
            let refit = restricted_refit(&c.support, &train)?;
            let loss = validation_loss(&refit.w, &val, kind, means.as_ref());
            sums[k] += loss;
            table.push(CvRow { lambda: c.lambda, gamma: c.gamma, fold, support_size: c.support.len(), val_loss: loss });
        }
    }
    for (c, s) in candidates.iter_mut().zip(&sums) {
        c.val_loss = s / plan.folds as f64;
        c.refit_w = restricted_refit(&c.support, data)?.w;
    }
    let best = candidates[select_best(&candidates).expect("nonempty")].clone();
    Ok(CvOutcome { best, candidates, table, first_stage: None })
}

/// Path plus selection.
///
/// With an automatic grid, a winner at the grid's smallest λ means the loss
/// may still fall below it. The winner's path is then extended one decade at
/// a time until the minimum is interior, [`MAX_DRY_DECADES`] decades in a row
/// add no support, or λ reaches [`MIN_AUTO_RATIO`]` · λ_max`.
pub fn cross_validate(data: &Dataset, plan: &CvPlan, cfg: &SolverConfig) -> Result<CvOutcome> {
    if data.n() < MIN_CV_ROWS {
        return Err(invalid(format!("cross-validation needs at least {MIN_CV_ROWS} rows, got {}", data.n())));
    }
    let mut path = PathBuilder::new(data, plan, cfg)?;
    let mut out = cross_validate_candidates(data, path.out.clone(), plan)?;
    let mut dry = 0;
    while dry < MAX_DRY_DECADES && path.at_boundary(&out.best) {
        let added = path.extend(out.best.gamma);
        dry = if added { 0 } else { dry + 1 };
        out = cross_validate_candidates(data, path.out.clone(), plan)?;
    }
    out.first_stage = Some(path.first_trace);
    Ok(out)
}

/// NOTEARS-AL with λ (and γ) chosen by [`cross_validate`].
pub fn notears_al_cv(data: &Dataset, plan: &CvPlan, cfg: &SolverConfig) -> Result<(EstimateResult, CvOutcome)> {
    let cv = cross_validate(data, plan, cfg)?;
    Ok((cv.estimate(), cv))
}
