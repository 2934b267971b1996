//! Sampling observational data from a ground-truth DAG.
//!
//! Variables are generated in topological order (smallest index first among
//! ties); all `n` draws for one variable are taken before moving to the next.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Gumbel, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DataKind, Dataset};
use crate::error::{invalid, Error, Result};
use crate::graphs::topological_order;
use crate::matrix::WeightMatrix;
use crate::rng::{rng_from_seed, Rng};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Additive noise law. Exponential and Gumbel draws are shifted to mean zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian { sd: f64 },
    Exponential { scale: f64 },
    Gumbel { scale: f64 },
}

impl Default for NoiseKind {
    fn default() -> Self {
        NoiseKind::Gaussian { sd: 1.0 }
    }
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        let s = match *self {
            NoiseKind::Gaussian { sd } => sd,
            NoiseKind::Exponential { scale } | NoiseKind::Gumbel { scale } => scale,
        };
        if s > 0.0 && s.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("noise scale must be positive, got {self}")))
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseKind::Gaussian { sd } => sd * sd,
            NoiseKind::Exponential { scale } => scale * scale,
            NoiseKind::Gumbel { scale } => std::f64::consts::PI.powi(2) / 6.0 * scale * scale,
        }
    }

    fn fill(&self, rng: &mut Rng, out: &mut Array1<f64>) -> Result<()> {
        let bad = |e: String| invalid(e);
        match *self {
            NoiseKind::Gaussian { sd } => {
                let dist = Normal::new(0.0, sd).map_err(|e| bad(e.to_string()))?;
                out.iter_mut().for_each(|z| *z = dist.sample(rng));
            }
            NoiseKind::Exponential { scale } => {
                let dist = Exp::new(1.0 / scale).map_err(|e| bad(e.to_string()))?;
                out.iter_mut().for_each(|z| *z = dist.sample(rng) - scale);
            }
            NoiseKind::Gumbel { scale } => {
                let dist = Gumbel::new(0.0, scale).map_err(|e| bad(e.to_string()))?;
                out.iter_mut().for_each(|z| *z = dist.sample(rng) - scale * EULER_GAMMA);
            }
        }
        Ok(())
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseKind::Gaussian { sd } => write!(f, "gaussian:{sd}"),
            NoiseKind::Exponential { scale } => write!(f, "exponential:{scale}"),
            NoiseKind::Gumbel { scale } => write!(f, "gumbel:{scale}"),
        }
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    /// Parses `gaussian[:SD]`, `exponential[:SCALE]` or `gumbel[:SCALE]` (default 1).
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().splitn(2, ':');
        let name = parts.next().unwrap_or_default();
        let p = match parts.next() {
            Some(v) => v.trim().parse::<f64>().map_err(|e| invalid(format!("bad noise parameter in {s:?}: {e}")))?,
            None => 1.0,
        };
        let noise = match name {
            "gaussian" => NoiseKind::Gaussian { sd: p },
            "exponential" => NoiseKind::Exponential { scale: p },
            "gumbel" => NoiseKind::Gumbel { scale: p },
            _ => return Err(invalid(format!("unknown noise kind {s:?}"))),
        };
        noise.validate()?;
        Ok(noise)
    }
}

/// `X = X W + Z` filled column by column in causal order.
pub fn simulate_linear_sem(w: &WeightMatrix, n: usize, noise: &NoiseKind, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    noise.validate()?;
    let order = topological_order(w, 0.0)?;
    let d = w.d();
    let mut rng = rng_from_seed(seed);
    let mut x = Array2::<f64>::zeros((n, d));
    let mut z = Array1::<f64>::zeros(n);
    for &j in &order {
        noise.fill(&mut rng, &mut z)?;
        let mut col = x.dot(&w.as_array().column(j));
        col += &z;
        x.column_mut(j).assign(&col);
    }
    Dataset::new(x, DataKind::Continuous)
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Binary data: `X_j ~ Bernoulli(g(X · W[:, j]))` with `g(t) = eᵗ/(eᵗ+1)`.
pub fn simulate_logistic_sem(w: &WeightMatrix, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let order = topological_order(w, 0.0)?;
    let d = w.d();
    let mut rng = rng_from_seed(seed);
    let mut x = Array2::<f64>::zeros((n, d));
    for &j in &order {
        let t = x.dot(&w.as_array().column(j));
        for (i, ti) in t.iter().enumerate() {
            let u: f64 = rng.random();
            x[[i, j]] = if u < sigmoid(*ti) { 1.0 } else { 0.0 };
        }
    }
    Dataset::new(x, DataKind::Binary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn chain(w: f64) -> WeightMatrix {
        WeightMatrix::new(array![[0.0, w], [0.0, 0.0]]).unwrap()
    }

    fn mean(v: impl Iterator<Item = f64>) -> f64 {
        let v: Vec<f64> = v.collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn empty_graph_gives_centered_noise() {
        let n = 2000;
        let mut inside = 0;
        for seed in 0..100 {
            let ds = simulate_linear_sem(&WeightMatrix::zeros(3), n, &NoiseKind::default(), seed).unwrap();
            let bound = 3.0 / (n as f64).sqrt();
            inside += ds.column_means().iter().filter(|m| m.abs() <= bound).count();
        }
        assert!(inside >= 297, "inside {inside}");
    }

    #[test]
    fn chain_slope_is_recovered() {
        let ds = simulate_linear_sem(&chain(2.0), 100_000, &NoiseKind::default(), 11).unwrap();
        let x = ds.x();
        let (a, b) = (x.column(0), x.column(1));
        let slope = a.dot(&b) / a.dot(&a);
        assert!((slope - 2.0).abs() < 0.02, "slope {slope}");
    }

    #[test]
    fn gumbel_variance_and_centering() {
        let noise = NoiseKind::Gumbel { scale: 1.0 };
        let ds = simulate_linear_sem(&WeightMatrix::zeros(1), 100_000, &noise, 3).unwrap();
        let col: Vec<f64> = ds.x().column(0).to_vec();
        let m = mean(col.iter().copied());
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
        let target = std::f64::consts::PI.powi(2) / 6.0;
        assert!((var / target - 1.0).abs() < 0.05, "var {var}");
        assert!(m.abs() <= 5.0 * target.sqrt() / (col.len() as f64).sqrt());
    }

    #[test]
    fn exponential_is_centered() {
        let ds =
            simulate_linear_sem(&WeightMatrix::zeros(2), 100_000, &NoiseKind::Exponential { scale: 1.0 }, 8).unwrap();
        for m in ds.column_means() {
            assert!(m.abs() <= 5.0 / (100_000f64).sqrt());
        }
    }

    #[test]
    fn same_seed_same_data() {
        let w = chain(-1.3);
        let a = simulate_linear_sem(&w, 50, &NoiseKind::Gumbel { scale: 2.0 }, 5).unwrap();
        let b = simulate_linear_sem(&w, 50, &NoiseKind::Gumbel { scale: 2.0 }, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cyclic_graph_is_rejected() {
        let w = WeightMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(simulate_linear_sem(&w, 5, &NoiseKind::default(), 0), Err(Error::CyclicGraph { .. })));
        assert!(matches!(simulate_logistic_sem(&w, 5, 0), Err(Error::CyclicGraph { .. })));
    }

    #[test]
    fn logistic_roots_are_fair_coins() {
        let n = 4000;
        let ds = simulate_logistic_sem(&WeightMatrix::zeros(3), n, 1).unwrap();
        assert_eq!(ds.kind(), DataKind::Binary);
        for m in ds.column_means() {
            assert!((m - 0.5).abs() <= 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn logistic_saturated_child_copies_parent() {
        let ds = simulate_logistic_sem(&chain(20.0), 20_000, 2).unwrap();
        let x = ds.x();
        let parent_on: Vec<usize> = (0..ds.n()).filter(|&i| x[[i, 0]] == 1.0).collect();
        let copied = parent_on.iter().filter(|&&i| x[[i, 1]] == 1.0).count();
        assert!(copied as f64 / parent_on.len() as f64 >= 0.999);
    }

    #[test]
    fn noise_strings() {
        assert_eq!("gumbel".parse::<NoiseKind>().unwrap(), NoiseKind::Gumbel { scale: 1.0 });
        assert_eq!("gaussian:2".parse::<NoiseKind>().unwrap(), NoiseKind::Gaussian { sd: 2.0 });
        assert!("gaussian:-1".parse::<NoiseKind>().is_err());
        assert!("cauchy".parse::<NoiseKind>().is_err());
    }
}
