//! Weighted adjacency matrices and small dense linear-algebra helpers.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{invalid, Result};

/// A d×d weighted adjacency matrix: entry `(i, j)` is the coefficient of edge `i → j`.
///
/// Entries are finite and the diagonal is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(Array2<f64>);

impl WeightMatrix {
    /// Validates shape, finiteness and the zero diagonal.
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(invalid(format!("weight matrix must be square, got {r}x{c}")));
        }
        if r == 0 {
            return Err(invalid("weight matrix must have at least one node"));
        }
        if let Some(((i, j), v)) = entries.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(format!("non-finite weight {v} at ({i}, {j})")));
        }
        for i in 0..r {
            if entries[[i, i]] != 0.0 {
                return Err(invalid(format!("self-loop weight at node {i}")));
            }
        }
        Ok(Self(entries))
    }

    /// Builds a matrix after forcing the diagonal to zero.
    pub fn from_offdiag(mut entries: Array2<f64>) -> Result<Self> {
        let d = entries.nrows().min(entries.ncols());
        for i in 0..d {
            entries[[i, i]] = 0.0;
        }
        Self::new(entries)
    }

    pub fn zeros(d: usize) -> Self {
        Self(Array2::zeros((d, d)))
    }

    pub fn d(&self) -> usize {
        self.0.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[[i, j]]
    }

    /// Directed edges `(src, dst, weight)` with `|weight| > zero_tol`, row-major order.
    pub fn edges(&self, zero_tol: f64) -> Vec<(usize, usize, f64)> {
        self.0.indexed_iter().filter(|(_, w)| w.abs() > zero_tol).map(|((i, j), w)| (i, j, *w)).collect()
    }

    pub fn edge_count(&self, zero_tol: f64) -> usize {
        self.0.iter().filter(|w| w.abs() > zero_tol).count()
    }

    /// Boolean pattern of `|w| > zero_tol`.
    pub fn support(&self, zero_tol: f64) -> Array2<bool> {
        self.0.mapv(|w| w.abs() > zero_tol)
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let d = self.d();
        let mut out = Array2::zeros((d, d));
        for ((i, j), w) in self.0.indexed_iter() {
            out[[perm[i], perm[j]]] = *w;
        }
        Self(out)
    }
}

impl AsRef<Array2<f64>> for WeightMatrix {
    fn as_ref(&self) -> &Array2<f64> {
        &self.0
    }
}

#[cfg(test)]
pub(crate) fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn norm1(a: &Array2<f64>) -> f64 {
    a.columns().into_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Solves `A X = B` by LU with partial pivoting. Returns `None` if `A` is singular.
pub(crate) fn lu_solve(a: Array2<f64>, b: Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    // Row-major contiguous copies so that row updates are slice operations.
    let mut a = a.as_standard_layout().into_owned().into_raw_vec_and_offset().0;
    let mut b = b.as_standard_layout().into_owned().into_raw_vec_and_offset().0;
    for k in 0..n {
        let mut p = k;
        let mut pmax = -1.0;
        for i in k..n {
            let v = a[i * n + k].abs();
            if v > pmax {
                p = i;
                pmax = v;
            }
        }
        if pmax == 0.0 || !pmax.is_finite() {
            return None;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            for j in 0..m {
                b.swap(k * m + j, p * m + j);
            }
        }
        let (a_top, a_rest) = a.split_at_mut((k + 1) * n);
        let a_k = &a_top[k * n..];
        let pivot = a_k[k];
        let (b_top, b_rest) = b.split_at_mut((k + 1) * m);
        let b_k = &b_top[k * m..];
        for (a_i, b_i) in a_rest.chunks_exact_mut(n).zip(b_rest.chunks_exact_mut(m)) {
            let f = a_i[k] / pivot;
            if f == 0.0 {
                continue;
            }
            a_i[k] = f;
            for (x, y) in a_i[k + 1..].iter_mut().zip(&a_k[k + 1..]) {
                *x -= f * y;
            }
            for (x, y) in b_i.iter_mut().zip(b_k) {
                *x -= f * y;
            }
        }
    }
    for k in (0..n).rev() {
        let (b_top, b_rest) = b.split_at_mut((k + 1) * m);
        let b_k = &mut b_top[k * m..];
        for (i, b_i) in b_rest.chunks_exact(m).enumerate() {
            let f = a[k * n + k + 1 + i];
            if f != 0.0 {
                for (x, y) in b_k.iter_mut().zip(b_i) {
                    *x -= f * y;
                }
            }
        }
        let pivot = a[k * n + k];
        b_k.iter_mut().for_each(|x| *x /= pivot);
    }
    Array2::from_shape_vec((n, m), b).ok()
}

/// Cholesky solve of a symmetric positive-definite system. `None` if not SPD.
pub(crate) fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut s = a[[j, j]];
        for k in 0..j {
            s -= l[[j, k]] * l[[j, k]];
        }
        if s <= 0.0 || !s.is_finite() {
            return None;
        }
        let ljj = s.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    let mut y = b.clone();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[[i, k]] * y[k];
        }
        y[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[[k, i]] * y[k];
        }
        y[i] /= l[[i, i]];
    }
    Some(y)
}
