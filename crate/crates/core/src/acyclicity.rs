//! Smooth acyclicity measure `h(W) = Tr(exp(W ∘ W)) − d` and its gradients.
//!
//! `h` is zero exactly when the support of `W` is a DAG and grows with the
//! weighted number of closed walks otherwise. All evaluations share a single
//! matrix exponential between value and gradient.

use ndarray::{Array2, Zip};

use crate::error::{invalid, Result};
use crate::matrix::{lu_solve, norm1, WeightMatrix};
use crate::penalty::PenaltyWeights;

/// Round-off floor below which `h` is reported as zero.
pub const H_ROUNDOFF: f64 = 1e-9;

/// Value of `h` together with its gradient.
#[derive(Debug, Clone)]
pub struct AcyclicityValue {
    pub h: f64,
    pub grad: Array2<f64>,
}

// Degree-m Padé selection thresholds on ‖A‖₁ (Higham 2005, double precision).
const PADE_THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_230e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
    (13, 5.371_920_351_148_152e0),
];

fn pade_coefficients(m: usize) -> Vec<f64> {
    let mut b = Vec::with_capacity(m + 1);
    b.push(1.0);
    for j in 1..=m {
        let prev = b[j - 1];
        b.push(prev * (m - j + 1) as f64 / (((2 * m - j + 1) * j) as f64));
    }
    b
}

/// Matrix exponential by scaling and squaring with a diagonal Padé core.
pub fn matrix_exp(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, c) = a.dim();
    if n != c {
        return Err(invalid(format!("matrix_exp needs a square matrix, got {n}x{c}")));
    }
    if n == 0 {
        return Err(invalid("matrix_exp needs a non-empty matrix"));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix_exp input contains non-finite entries"));
    }
    let norm = norm1(a);
    if norm == 0.0 {
        return Ok(Array2::eye(n));
    }
    for &(m, theta) in &PADE_THETA[..4] {
        if norm <= theta {
            return pade(a, m);
        }
    }
    let theta13 = PADE_THETA[4].1;
    let s = if norm > theta13 { (norm / theta13).log2().ceil().max(0.0) as i32 } else { 0 };
    let scaled = a / 2f64.powi(s);
    let mut e = pade(&scaled, 13)?;
    for _ in 0..s {
        e = e.dot(&e);
    }
    Ok(e)
}

fn pade(a: &Array2<f64>, m: usize) -> Result<Array2<f64>> {
    let n = a.nrows();
    let b = pade_coefficients(m);
    let eye = Array2::<f64>::eye(n);
    let a2 = a.dot(a);
    let (u, v) = if m == 13 {
        let a4 = a2.dot(&a2);
        let a6 = a2.dot(&a4);
        let inner_u =
            a6.dot(&(&a6 * b[13] + &a4 * b[11] + &a2 * b[9])) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &eye * b[1];
        let u = a.dot(&inner_u);
        let v = a6.dot(&(&a6 * b[12] + &a4 * b[10] + &a2 * b[8])) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &eye * b[0];
        (u, v)
    } else {
        let mut power = eye.clone();
        let mut odd = &eye * b[1];
        let mut even = &eye * b[0];
        for k in 1..=(m / 2) {
            power = power.dot(&a2);
            odd = odd + &power * b[2 * k + 1];
            even = even + &power * b[2 * k];
        }
        (a.dot(&odd), even)
    };
    let num = &v + &u;
    let den = &v - &u;
    lu_solve(den, num).ok_or_else(|| invalid("singular Padé denominator in matrix_exp"))
}

/// `h(W)` and `∇h(W) = exp(W∘W)ᵀ ∘ 2W`.
pub fn h_and_grad(w: &WeightMatrix) -> Result<AcyclicityValue> {
    h_and_grad_raw(w.as_array())
}

pub(crate) fn h_and_grad_raw(w: &Array2<f64>) -> Result<AcyclicityValue> {
    let d = w.nrows() as f64;
    let e = matrix_exp(&w.mapv(|x| x * x))?;
    let h = (e.diag().sum() - d).max(0.0);
    let mut grad = e.reversed_axes();
    Zip::from(&mut grad).and(w).for_each(|g, &x| *g *= 2.0 * x);
    Ok(AcyclicityValue { h: clamp_roundoff(h), grad })
}

fn clamp_roundoff(h: f64) -> f64 {
    if h < 0.0 {
        0.0
    } else {
        h
    }
}

/// `h(W_C ⊘ C)` and its gradient with respect to `W_C`:
/// `2 · exp((W_C∘W_C) ⊘ (C∘C))ᵀ ∘ W_C ⊘ (C∘C)`.
///
/// Frozen entries of `penalties` contribute nothing and receive a zero gradient.
pub fn h_and_grad_reparam(w_c: &Array2<f64>, penalties: &PenaltyWeights) -> Result<AcyclicityValue> {
    let d = penalties.d();
    if w_c.dim() != (d, d) {
        return Err(invalid(format!("reparametrized matrix is {:?}, penalties are {d}x{d}", w_c.dim())));
    }
    penalties.validate()?;
    let c = penalties.coefficients();
    let frozen = penalties.frozen();
    let mut sq = Array2::<f64>::zeros((d, d));
    Zip::from(&mut sq).and(w_c).and(c).and(frozen).for_each(|s, &x, &ci, &fz| {
        if !fz {
            *s = x * x / (ci * ci);
        }
    });
    let e = matrix_exp(&sq)?;
    let h = clamp_roundoff(e.diag().sum() - d as f64);
    let mut grad = e.reversed_axes();
    Zip::from(&mut grad).and(w_c).and(c).and(frozen).for_each(|g, &x, &ci, &fz| {
        *g = if fz { 0.0 } else { *g * 2.0 * x / (ci * ci) };
    });
    Ok(AcyclicityValue { h, grad })
}
