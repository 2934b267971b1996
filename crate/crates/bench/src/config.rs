//! Declarative sweep manifest (TOML).
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//! replicates = 15
//! n = [1000]
//! noise = ["gaussian:1"]
//! model = "linear"
//! estimators = ["notears_fixed", "notears_al"]
//! output_dir = "results/gaussian_benchmark"
//!
//! [[graphs]]
//! d = 10
//! er_degree = 1.0
//! weights = "gaussian:0:2"
//!
//! [params]
//! lambda = 0.1
//! threshold = 0.1
//! cv = true
//! ```
//!
//! Weight specs are `gaussian:MEAN:SD`, `uniform:C` or `gap:LO:HI`; noise
//! specs are `gaussian[:SD]`, `exponential[:SCALE]` or `gumbel[:SCALE]`.
//! `[solver]` accepts any solver setting and defaults the rest.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sparsedag::graphs::WeightDist;
use sparsedag::model_select::{CvPlan, LambdaGrid};
use sparsedag::simulate::NoiseKind;
use sparsedag::SolverConfig;

use crate::error::{config_err, BenchError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Serializes a `FromStr + Display` value as its string form.
mod as_string {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};
    use std::fmt::Display;
    use std::str::FromStr;

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

mod as_strings {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};
    use std::fmt::Display;
    use std::str::FromStr;

    pub fn serialize<T: Display, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Vec<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        Vec::<String>::deserialize(d)?.iter().map(|s| s.parse().map_err(D::Error::custom)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Linear,
    Logistic,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Linear => "linear",
            Model::Logistic => "logistic",
        })
    }
}

impl FromStr for Model {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Model::Linear),
            "logistic" => Ok(Model::Logistic),
            _ => Err(config_err(format!("unknown model {s:?}; expected linear or logistic"))),
        }
    }
}

/// Estimators a sweep can run. Each maps to the least-squares or logistic
/// variant according to the sweep's model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepEstimator {
    /// Lasso NOTEARS with a hard threshold.
    NotearsFixed,
    /// Two-stage adaptive lasso, λ from cross-validation unless disabled.
    NotearsAl,
    /// The unpenalized first stage with the hard threshold applied.
    OlsOnly,
}

impl SweepEstimator {
    pub const ALL: [SweepEstimator; 3] =
        [SweepEstimator::NotearsFixed, SweepEstimator::NotearsAl, SweepEstimator::OlsOnly];

    pub fn name(self) -> &'static str {
        match self {
            SweepEstimator::NotearsFixed => "notears_fixed",
            SweepEstimator::NotearsAl => "notears_al",
            SweepEstimator::OlsOnly => "ols_only",
        }
    }
}

impl fmt::Display for SweepEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepEstimator {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            config_err(format!("unknown estimator {s:?}; expected notears_fixed, notears_al or ols_only"))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphEntry {
    pub d: usize,
    pub er_degree: f64,
    #[serde(with = "as_string")]
    pub weights: WeightDist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorParams {
    /// Lasso level of `notears_fixed`.
    pub lambda: f64,
    /// Hard threshold of `notears_fixed` and `ols_only`.
    pub threshold: f64,
    /// Adaptive-lasso exponent; with CV on it is the only γ unless `cv_gammas` is set.
    pub gamma: f64,
    pub cv: bool,
    /// λ of `notears_al` when CV is off.
    pub lambda_al: f64,
    pub cv_gammas: Option<Vec<f64>>,
    pub cv_folds: usize,
    pub val_fraction: f64,
    pub lambda_count: usize,
    pub lambda_ratio: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        let LambdaGrid::Auto { count, ratio } = LambdaGrid::default() else { unreachable!() };
        let plan = CvPlan::default();
        Self {
            lambda: 0.1,
            threshold: 0.1,
            gamma: 1.0,
            cv: true,
            lambda_al: 0.1,
            cv_gammas: None,
            cv_folds: plan.folds,
            val_fraction: plan.val_fraction,
            lambda_count: count,
            lambda_ratio: ratio,
        }
    }
}

impl EstimatorParams {
    pub fn cv_plan(&self, seed: u64) -> CvPlan {
        CvPlan {
            lambda_grid: LambdaGrid::Auto { count: self.lambda_count, ratio: self.lambda_ratio },
            gamma_grid: self.cv_gammas.clone().unwrap_or_else(|| vec![self.gamma]),
            val_fraction: self.val_fraction,
            folds: self.cv_folds,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(format!("{name} must be finite and nonnegative, got {v}")))
            }
        };
        nonneg("lambda", self.lambda)?;
        nonneg("threshold", self.threshold)?;
        nonneg("lambda_al", self.lambda_al)?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(config_err(format!("gamma must be positive, got {}", self.gamma)));
        }
        self.cv_plan(0).validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Master seed; every graph, dataset and CV split derives from it.
    #[serde(default)]
    pub seed: u64,
    pub replicates: usize,
    pub n: Vec<usize>,
    #[serde(with = "as_strings", default = "default_noise")]
    pub noise: Vec<NoiseKind>,
    #[serde(default = "default_model")]
    pub model: Model,
    pub estimators: Vec<SweepEstimator>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub graphs: Vec<GraphEntry>,
    #[serde(default)]
    pub params: EstimatorParams,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_noise() -> Vec<NoiseKind> {
    vec![NoiseKind::default()]
}

fn default_model() -> Model {
    Model::Linear
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "schema_version {} is not supported; expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.replicates == 0 {
            return Err(config_err("replicates must be at least 1"));
        }
        for (name, empty) in [
            ("graphs", self.graphs.is_empty()),
            ("n", self.n.is_empty()),
            ("noise", self.noise.is_empty()),
            ("estimators", self.estimators.is_empty()),
        ] {
            if empty {
                return Err(config_err(format!("sweep axis {name} is empty")));
            }
        }
        if self.model == Model::Logistic && self.noise.len() > 1 {
            return Err(config_err("logistic sweeps have no additive noise; give at most one noise entry"));
        }
        if self.n.contains(&0) {
            return Err(config_err("sample sizes must be positive"));
        }
        for g in &self.graphs {
            sparsedag::graphs::GraphSpec { d: g.d, er_degree: g.er_degree, weight_dist: g.weights, seed: 0 }
                .validate()?;
        }
        for nz in &self.noise {
            nz.validate()?;
        }
        let mut seen = self.estimators.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.estimators.len() {
            return Err(config_err("estimators are listed more than once"));
        }
        self.params.validate()?;
        self.solver.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
replicates = 2
n = [100]
estimators = ["notears_fixed", "notears_al"]

[[graphs]]
d = 5
er_degree = 1.0
weights = "gaussian:0:2"
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.noise, vec![NoiseKind::Gaussian { sd: 1.0 }]);
        assert_eq!(c.model, Model::Linear);
        assert_eq!(c.params, EstimatorParams::default());
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.graphs[0].weights, WeightDist::Gaussian { mean: 0.0, sd: 2.0 });
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn rejects_bad_manifests() {
        let cases = [
            MINIMAL.replace("schema_version = 1", "schema_version = 2"),
            MINIMAL.replace("replicates = 2", "replicates = 0"),
            MINIMAL.replace("n = [100]", "n = []"),
            MINIMAL.replace("\"notears_al\"", "\"notears_fixed\""),
            MINIMAL.replace("\"notears_al\"", "\"pc\""),
            MINIMAL.replace("gaussian:0:2", "gaussian:0"),
            MINIMAL.replace("d = 5", "d = 1"),
            format!("{MINIMAL}\nunknown_key = 3\n"),
            format!("noise = [\"gaussian\", \"gumbel\"]\nmodel = \"logistic\"\n{MINIMAL}"),
        ];
        for text in cases {
            assert!(ExperimentConfig::from_toml(&text).is_err(), "accepted:\n{text}");
        }
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in SweepEstimator::ALL {
            assert_eq!(e.name().parse::<SweepEstimator>().unwrap(), e);
        }
    }
}
