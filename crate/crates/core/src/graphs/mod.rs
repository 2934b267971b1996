//! Random DAG generation, DAG utilities and recovery metrics.

mod dag;
mod edgelist;
mod metrics;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::WeightMatrix;
use crate::rng::rng_from_seed;

pub use dag::{find_cycle, repair_to_dag, topological_order};
pub use edgelist::{edges_to_matrix, parse_edge_list, read_edge_list, write_edge_list, Edge};
pub use metrics::{compare, RecoveryMetrics};

/// Entries with `|w|` at or below this are treated as absent edges.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// Distribution of nonzero edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightDist {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    /// Uniform on `(-c, c)`.
    UniformSym {
        c: f64,
    },
    /// Uniform on `[-hi, -lo] ∪ [lo, hi]`.
    UniformGap {
        lo: f64,
        hi: f64,
    },
}

impl WeightDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            WeightDist::Gaussian { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            WeightDist::UniformSym { c } => c > 0.0 && c.is_finite(),
            WeightDist::UniformGap { lo, hi } => lo > 0.0 && lo < hi && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid weight distribution {self}")))
        }
    }

    /// Interval containing (nearly) all draws; Gaussian uses mean ± 4 sd.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            WeightDist::Gaussian { mean, sd } => (mean - 4.0 * sd, mean + 4.0 * sd),
            WeightDist::UniformSym { c } => (-c, c),
            WeightDist::UniformGap { hi, .. } => (-hi, hi),
        }
    }
}

impl fmt::Display for WeightDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightDist::Gaussian { mean, sd } => write!(f, "gaussian:{mean}:{sd}"),
            WeightDist::UniformSym { c } => write!(f, "uniform:{c}"),
            WeightDist::UniformGap { lo, hi } => write!(f, "gap:{lo}:{hi}"),
        }
    }
}

impl FromStr for WeightDist {
    type Err = Error;

    /// Parses `gaussian:MEAN:SD`, `uniform:C` or `gap:LO:HI`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |k: usize| -> Result<f64> {
            parts
                .get(k)
                .ok_or_else(|| invalid(format!("missing parameter in weight spec {s:?}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| invalid(format!("bad number in weight spec {s:?}: {e}")))
        };
        let dist = match (parts[0], parts.len()) {
            ("gaussian", 3) => WeightDist::Gaussian { mean: num(1)?, sd: num(2)? },
            ("uniform", 2) => WeightDist::UniformSym { c: num(1)? },
            ("gap", 3) => WeightDist::UniformGap { lo: num(1)?, hi: num(2)? },
            _ => return Err(invalid(format!("unknown weight spec {s:?}"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// Erdős–Rényi DAG parameters: `er_degree · d` expected edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub d: usize,
    pub er_degree: f64,
    pub weight_dist: WeightDist,
    pub seed: u64,
}

impl GraphSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(invalid(format!("graph needs d >= 2, got {}", self.d)));
        }
        if !(self.er_degree > 0.0 && self.er_degree.is_finite()) {
            return Err(invalid(format!("er_degree must be positive, got {}", self.er_degree)));
        }
        self.weight_dist.validate()
    }

    /// Edge probability `2·s₀ / (d(d−1))`, capped at 1.
    pub fn edge_probability(&self) -> f64 {
        let d = self.d as f64;
        (2.0 * self.er_degree * d / (d * (d - 1.0))).min(1.0)
    }
}

/// Samples a binary ER DAG: each unordered pair is an edge with the ER
/// probability, oriented low→high in a uniformly random node order.
pub fn sample_er_dag(spec: &GraphSpec) -> Result<WeightMatrix> {
    spec.validate()?;
    let d = spec.d;
    let p = spec.edge_probability();
    let mut rng = rng_from_seed(spec.seed);
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);
    let mut w = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in (i + 1)..d {
            if rng.random::<f64>() < p {
                w[[order[i], order[j]]] = 1.0;
            }
        }
    }
    WeightMatrix::new(w)
}

/// Replaces every nonzero entry of `pattern` with an i.i.d. draw from `dist`.
pub fn assign_weights(pattern: &WeightMatrix, dist: &WeightDist, seed: u64) -> Result<WeightMatrix> {
    dist.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut w = pattern.as_array().clone();
    match *dist {
        WeightDist::Gaussian { mean, sd } => {
            let n = Normal::new(mean, sd).map_err(|e| invalid(e.to_string()))?;
            w.iter_mut().filter(|x| **x != 0.0).for_each(|x| *x = n.sample(&mut rng));
        }
        WeightDist::UniformSym { c } => {
            let u = Uniform::new(-c, c).map_err(|e| invalid(e.to_string()))?;
            w.iter_mut().filter(|x| **x != 0.0).for_each(|x| *x = u.sample(&mut rng));
        }
        WeightDist::UniformGap { lo, hi } => {
            let u = Uniform::new_inclusive(lo, hi).map_err(|e| invalid(e.to_string()))?;
            w.iter_mut().filter(|x| **x != 0.0).for_each(|x| {
                let m = u.sample(&mut rng);
                *x = if rng.random::<bool>() { m } else { -m };
            });
        }
    }
    WeightMatrix::new(w)
}

/// Convenience: binary ER pattern plus weights, using a child seed for the weights.
pub fn sample_weighted_dag(spec: &GraphSpec) -> Result<WeightMatrix> {
    let pattern = sample_er_dag(spec)?;
    assign_weights(&pattern, &spec.weight_dist, crate::rng::derive_seed(spec.seed, &[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acyclicity::h_and_grad;

    fn spec(d: usize, k: f64, seed: u64) -> GraphSpec {
        GraphSpec { d, er_degree: k, weight_dist: WeightDist::Gaussian { mean: 0.0, sd: 2.0 }, seed }
    }

    #[test]
    fn two_node_graph_has_at_most_one_edge() {
        for seed in 0..50 {
            let g = sample_er_dag(&spec(2, 1.0, seed)).unwrap();
            assert!(g.edge_count(0.0) <= 1);
            assert!(topological_order(&g, 0.0).is_ok());
        }
    }

    #[test]
    fn er_mean_edge_count() {
        // E[edges] = p · d(d−1)/2 = k·d = 40.
        let total: usize = (0..500).map(|s| sample_er_dag(&spec(20, 2.0, s)).unwrap().edge_count(0.0)).sum();
        let mean = total as f64 / 500.0;
        assert!((mean - 40.0).abs() <= 4.0, "mean {mean}");
    }

    #[test]
    fn er_output_is_acyclic() {
        for seed in 0..30 {
            let g = sample_er_dag(&spec(15, 4.0, seed)).unwrap();
            assert_eq!(h_and_grad(&g).unwrap().h, 0.0);
        }
    }

    #[test]
    fn weights_preserve_pattern() {
        assert_eq!(
            assign_weights(&WeightMatrix::zeros(4), &WeightDist::UniformSym { c: 1.0 }, 3).unwrap(),
            WeightMatrix::zeros(4)
        );
        let g = sample_er_dag(&spec(30, 4.0, 1)).unwrap();
        let w = assign_weights(&g, &WeightDist::UniformGap { lo: 0.5, hi: 2.0 }, 9).unwrap();
        assert_eq!(w.support(0.0), g.support(0.0));
        assert!(w.as_array().iter().filter(|x| **x != 0.0).all(|x| (0.5..=2.0).contains(&x.abs())));
    }

    #[test]
    fn gaussian_weight_spread() {
        let mut pattern = Array2::<f64>::zeros((142, 142));
        for i in 0..142 {
            for j in (i + 1)..142 {
                pattern[[i, j]] = 1.0;
            }
        }
        let w = assign_weights(&WeightMatrix::new(pattern).unwrap(), &WeightDist::Gaussian { mean: 0.0, sd: 2.0 }, 5)
            .unwrap();
        let draws: Vec<f64> = w.as_array().iter().copied().filter(|x| *x != 0.0).take(10_000).collect();
        assert_eq!(draws.len(), 10_000);
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        assert!((sd - 2.0).abs() < 0.1, "sd {sd}");
    }

    #[test]
    fn weight_spec_strings() {
        assert_eq!("gaussian:0:2".parse::<WeightDist>().unwrap(), WeightDist::Gaussian { mean: 0.0, sd: 2.0 });
        assert_eq!("uniform:5".parse::<WeightDist>().unwrap(), WeightDist::UniformSym { c: 5.0 });
        assert!("gap:2:1".parse::<WeightDist>().is_err());
        assert!("beta:1:1".parse::<WeightDist>().is_err());
        let d = WeightDist::UniformGap { lo: 0.5, hi: 2.0 };
        assert_eq!(d.to_string().parse::<WeightDist>().unwrap(), d);
    }
}
