use ndarray::{Array2, Zip};

use crate::data::{DataKind, Dataset};
use crate::error::{invalid, Result};
use crate::solver::SmoothScore;

/// `½ n⁻¹ ‖X − XW‖²_F` on column-centered data.
///
/// Evaluated through the Gram matrix `S = XᵀX / n`: with `R = I − W` the value
/// is `½ Σ R ∘ (S R)` and the gradient `−S R`, so the cost is independent of n.
#[derive(Debug, Clone)]
pub struct LeastSquaresScore {
    gram: Array2<f64>,
}

impl LeastSquaresScore {
    /// Rejects binary datasets; fit those with [`LogisticScore`].
    pub fn new(data: &Dataset) -> Result<Self> {
        if data.kind() != DataKind::Continuous {
            return Err(invalid("least-squares estimators require continuous data"));
        }
        Ok(Self::from_matrix(&data.centered()))
    }

    /// Uses `x` as given, without centering.
    pub fn from_matrix(x: &Array2<f64>) -> Self {
        let n = x.nrows() as f64;
        Self { gram: x.t().dot(x) / n }
    }

    pub fn gram(&self) -> &Array2<f64> {
        &self.gram
    }
}

impl SmoothScore for LeastSquaresScore {
    fn d(&self) -> usize {
        self.gram.nrows()
    }

    fn value_grad(&self, w: &Array2<f64>, grad: &mut Array2<f64>) -> f64 {
        let d = self.d();
        let r = Array2::<f64>::eye(d) - w;
        let sr = self.gram.dot(&r);
        let value = 0.5 * Zip::from(&r).and(&sr).fold(0.0, |acc, a, b| acc + a * b);
        Zip::from(grad).and(&sr).for_each(|g, &s| *g = -s);
        value
    }

    /// `∂²/∂W_ij² = S_ii`.
    fn curvature(&self) -> Option<Array2<f64>> {
        let d = self.d();
        Some(Array2::from_shape_fn((d, d), |(i, _)| self.gram[[i, i]]))
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean log loss of per-node logistic regressions without intercept:
/// `n⁻¹ Σ [log(1 + eᵗ) − x t]` with `t = X D`, gradient `n⁻¹ Xᵀ(g(XD) − X)`.
///
/// Column j of `D` holds the coefficients of node j's parents; the diagonal
/// is excluded by the solver mask.
#[derive(Debug, Clone)]
pub struct LogisticScore {
    x: Array2<f64>,
}

impl LogisticScore {
    pub fn new(data: &Dataset) -> Result<Self> {
        if data.kind() != DataKind::Binary {
            return Err(invalid("logistic estimators require binary data"));
        }
        Ok(Self { x: data.x().clone() })
    }
}

impl SmoothScore for LogisticScore {
    fn d(&self) -> usize {
        self.x.ncols()
    }

    fn value_grad(&self, w: &Array2<f64>, grad: &mut Array2<f64>) -> f64 {
        let n = self.x.nrows() as f64;
        let mut t = self.x.dot(w);
        let value = Zip::from(&t).and(&self.x).fold(0.0, |acc, &ti, &xi| acc + softplus(ti) - xi * ti) / n;
        Zip::from(&mut t).and(&self.x).for_each(|ti, &xi| *ti = sigmoid(*ti) - xi);
        grad.assign(&(self.x.t().dot(&t) / n));
        value
    }

    /// Upper bound `¼ n⁻¹ Σ x_i²` of `∂²/∂D_ij²`.
    fn curvature(&self) -> Option<Array2<f64>> {
        let d = self.d();
        let n = self.x.nrows() as f64;
        let m: Vec<f64> = (0..d).map(|i| 0.25 * self.x.column(i).iter().map(|v| v * v).sum::<f64>() / n).collect();
        Some(Array2::from_shape_fn((d, d), |(i, _)| m[i]))
    }
}

/// Log loss and gradient of coefficient matrix `d_mat` on binary `data`.
pub fn logistic_score(d_mat: &Array2<f64>, data: &Dataset) -> Result<(f64, Array2<f64>)> {
    let score = LogisticScore::new(data)?;
    let d = score.d();
    if d_mat.dim() != (d, d) {
        return Err(invalid(format!("coefficients are {:?}, data has {d} columns", d_mat.dim())));
    }
    let mut grad = Array2::zeros((d, d));
    let v = score.value_grad(d_mat, &mut grad);
    Ok((v, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn finite_difference<S: SmoothScore>(s: &S, w: &Array2<f64>) {
        let d = s.d();
        let mut g = Array2::zeros((d, d));
        s.value_grad(w, &mut g);
        let mut scratch = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                let h = 1e-6;
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[[i, j]] += h;
                wm[[i, j]] -= h;
                let fd = (s.value_grad(&wp, &mut scratch) - s.value_grad(&wm, &mut scratch)) / (2.0 * h);
                let rel = (fd - g[[i, j]]).abs() / g[[i, j]].abs().max(1e-4);
                assert!(rel < 1e-5, "({i},{j}): fd {fd} vs {}", g[[i, j]]);
            }
        }
    }

    #[test]
    fn least_squares_matches_direct_residual() {
        let x = array![[1.0, 2.0, -1.0], [0.5, -1.0, 2.0], [-2.0, 0.3, 0.1], [0.4, 0.4, -0.9]];
        let w = array![[0.0, 0.7, -0.2], [0.1, 0.0, 0.5], [0.0, -0.3, 0.0]];
        let s = LeastSquaresScore::from_matrix(&x);
        let mut g = Array2::zeros((3, 3));
        let v = s.value_grad(&w, &mut g);
        let resid = &x - &x.dot(&w);
        let direct = 0.5 / 4.0 * resid.iter().map(|r| r * r).sum::<f64>();
        assert!((v - direct).abs() < 1e-12);
        let direct_grad = -x.t().dot(&resid) / 4.0;
        for (a, b) in g.iter().zip(direct_grad.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        finite_difference(&s, &w);
    }

    #[test]
    fn logistic_at_zero_is_log_two_per_column() {
        let ds = Dataset::new(array![[1.0, 0.0, 1.0], [0.0, 0.0, 1.0]], DataKind::Binary).unwrap();
        let (v, _) = logistic_score(&Array2::zeros((3, 3)), &ds).unwrap();
        assert!((v - 3.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let x = Array2::from_shape_fn((9, 4), |(i, j)| ((i * 3 + j * 5 + i * j) % 2) as f64);
        let ds = Dataset::new(x, DataKind::Binary).unwrap();
        let s = LogisticScore::new(&ds).unwrap();
        let w = array![[0.0, 0.8, -1.1, 0.2], [0.4, 0.0, 0.9, -0.5], [-0.3, 1.2, 0.0, 0.7], [0.6, -0.9, 0.1, 0.0]];
        finite_difference(&s, &w);
    }

    #[test]
    fn saturated_logistic_model_has_vanishing_loss() {
        // Every cell is 1 and each column predicts the other with a large
        // coefficient, so every fitted probability tends to 1.
        let s = LogisticScore { x: Array2::ones((4, 2)) };
        let mut g = Array2::zeros((2, 2));
        let mut prev = f64::INFINITY;
        for k in [5.0, 10.0, 20.0, 40.0] {
            let v = s.value_grad(&array![[0.0, k], [k, 0.0]], &mut g);
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-16);
    }

    #[test]
    fn kind_checks() {
        let cont = Dataset::new(array![[0.5, 1.0]], DataKind::Continuous).unwrap();
        let bin = Dataset::new(array![[0.0, 1.0]], DataKind::Binary).unwrap();
        assert!(LogisticScore::new(&cont).is_err());
        assert!(LeastSquaresScore::new(&bin).is_err());
        assert!(logistic_score(&Array2::zeros((2, 2)), &cont).is_err());
    }
}
