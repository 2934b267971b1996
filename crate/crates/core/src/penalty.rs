//! Adaptive penalty coefficients `c_ij = 1 / |Ŵ_ols,ij|^γ`.

use ndarray::{Array2, Zip};

use crate::error::{invalid, Result};
use crate::matrix::WeightMatrix;

/// Default magnitude below which a first-stage entry is frozen at zero.
pub const DEFAULT_FREEZE_TOL: f64 = 1e-8;

/// Per-entry adaptive penalties with a mask of frozen (infinitely penalized) entries.
///
/// The diagonal is always frozen. Frozen entries carry coefficient 1.0 as a
/// placeholder; they never enter any computation.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyWeights {
    c: Array2<f64>,
    frozen: Array2<bool>,
    gamma: f64,
}

impl PenaltyWeights {
    /// All-ones penalties with only the diagonal frozen.
    pub fn uniform(d: usize) -> Self {
        let mut frozen = Array2::from_elem((d, d), false);
        for i in 0..d {
            frozen[[i, i]] = true;
        }
        Self { c: Array2::ones((d, d)), frozen, gamma: 0.0 }
    }

    pub fn from_parts(mut c: Array2<f64>, mut frozen: Array2<bool>, gamma: f64) -> Result<Self> {
        if c.dim() != frozen.dim() || c.nrows() != c.ncols() {
            return Err(invalid("penalty matrix and mask must be square and the same size"));
        }
        for i in 0..c.nrows() {
            frozen[[i, i]] = true;
        }
        Zip::from(&mut c).and(&frozen).for_each(|ci, &fz| {
            if fz {
                *ci = 1.0;
            }
        });
        let out = Self { c, frozen, gamma };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        for ((i, j), &ci) in self.c.indexed_iter() {
            if !self.frozen[[i, j]] && !(ci.is_finite() && ci > 0.0) {
                return Err(invalid(format!("penalty weight at ({i}, {j}) must be finite and > 0, got {ci}")));
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.c.nrows()
    }

    pub fn coefficients(&self) -> &Array2<f64> {
        &self.c
    }

    pub fn frozen(&self) -> &Array2<bool> {
        &self.frozen
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn active_count(&self) -> usize {
        self.frozen.iter().filter(|f| !**f).count()
    }

    /// `W = W_C ⊘ C`, zero on frozen entries.
    pub fn to_original(&self, w_c: &Array2<f64>) -> Array2<f64> {
        let mut w = w_c / &self.c;
        Zip::from(&mut w).and(&self.frozen).for_each(|x, &fz| {
            if fz {
                *x = 0.0;
            }
        });
        w
    }

    /// `W_C = C ∘ W`, zero on frozen entries.
    pub fn to_scaled(&self, w: &Array2<f64>) -> Array2<f64> {
        let mut v = w * &self.c;
        Zip::from(&mut v).and(&self.frozen).for_each(|x, &fz| {
            if fz {
                *x = 0.0;
            }
        });
        v
    }
}

/// Penalties from a first-stage estimate: `c = 1/|w|^γ` where `|w| > freeze_tol`,
/// frozen elsewhere.
pub fn build_penalties(w_ols: &WeightMatrix, gamma: f64, freeze_tol: f64) -> Result<PenaltyWeights> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    if !(freeze_tol >= 0.0) {
        return Err(invalid(format!("freeze_tol must be nonnegative, got {freeze_tol}")));
    }
    let w = w_ols.as_array();
    let frozen = w.mapv(|x| x.abs() <= freeze_tol);
    let c = w.mapv(|x| 1.0 / x.abs().powf(gamma));
    // Tiny unfrozen magnitudes can overflow 1/|w|^γ for large γ; freeze those too.
    let frozen = Zip::from(&frozen).and(&c).map_collect(|&f, &ci| f || !ci.is_finite());
    PenaltyWeights::from_parts(c, frozen, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn penalties_follow_inverse_power() {
        let w = WeightMatrix::new(array![[0.0, 0.5, 0.1], [0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let p = build_penalties(&w, 1.0, DEFAULT_FREEZE_TOL).unwrap();
        assert_eq!(p.coefficients()[[0, 1]], 2.0);
        assert!(p.frozen()[[1, 0]]);
        assert!(p.frozen()[[0, 0]]);
        assert_eq!(p.active_count(), 3);

        let p2 = build_penalties(&w, 2.0, DEFAULT_FREEZE_TOL).unwrap();
        assert!((p2.coefficients()[[0, 2]] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_between_coordinates() {
        let w = WeightMatrix::new(array![[0.0, 0.5], [-0.25, 0.0]]).unwrap();
        let p = build_penalties(&w, 1.0, 0.0).unwrap();
        let scaled = p.to_scaled(w.as_array());
        assert_eq!(scaled, array![[0.0, 1.0], [-1.0, 0.0]]);
        assert_eq!(&p.to_original(&scaled), w.as_array());
    }

    #[test]
    fn gamma_must_be_positive() {
        assert!(build_penalties(&WeightMatrix::zeros(2), 0.0, 1e-8).is_err());
    }
}
