use sparsedag::data::Dataset;
use sparsedag::estimators::{self, fixed_with, score_for, EstimateResult, EstimatorKind};
use sparsedag::model_select::{notears_al_cv, CvOutcome};
use sparsedag::{Error, SolverConfig};

use crate::config::{EstimatorParams, Model, SweepEstimator};
use crate::error::{config_err, Result};

pub struct FitOutput {
    /// On non-convergence this is the repaired partial result with `converged = false`.
    pub result: EstimateResult,
    pub cv: Option<CvOutcome>,
}

/// The model implied by a dataset's kind.
pub fn model_of(data: &Dataset) -> Model {
    match data.kind() {
        sparsedag::DataKind::Continuous => Model::Linear,
        sparsedag::DataKind::Binary => Model::Logistic,
    }
}

fn accept_partial(r: sparsedag::Result<EstimateResult>) -> sparsedag::Result<EstimateResult> {
    match r {
        Err(Error::NotConverged { partial, .. }) => Ok(*partial),
        other => other,
    }
}

/// Runs one sweep estimator on `data`. `cv_seed` seeds the CV splits.
pub fn fit_estimator(
    estimator: SweepEstimator,
    model: Model,
    data: &Dataset,
    params: &EstimatorParams,
    solver: &SolverConfig,
    cv_seed: u64,
) -> Result<FitOutput> {
    if model_of(data) != model {
        return Err(config_err(format!(
            "{model} model needs {} data",
            if model == Model::Linear { "continuous" } else { "binary" }
        )));
    }
    let (fixed_kind, al_kind) = match model {
        Model::Linear => (EstimatorKind::Notears, EstimatorKind::NotearsAl),
        Model::Logistic => (EstimatorKind::NotearsLogistic, EstimatorKind::NotearsAlLogistic),
    };
    let score = score_for(fixed_kind, data)?;
    let out = match estimator {
        SweepEstimator::NotearsFixed => FitOutput {
            result: accept_partial(fixed_with(score.as_ref(), fixed_kind, params.lambda, params.threshold, solver))?,
            cv: None,
        },
        SweepEstimator::OlsOnly => FitOutput {
            result: accept_partial(fixed_with(score.as_ref(), fixed_kind, 0.0, params.threshold, solver))?,
            cv: None,
        },
        SweepEstimator::NotearsAl if params.cv => {
            let (result, cv) = notears_al_cv(data, &params.cv_plan(cv_seed), solver)?;
            FitOutput { result, cv: Some(cv) }
        }
        SweepEstimator::NotearsAl => FitOutput {
            result: accept_partial(estimators::adaptive_with(
                score.as_ref(),
                al_kind,
                params.lambda_al,
                params.gamma,
                solver,
            ))?,
            cv: None,
        },
    };
    Ok(out)
}
