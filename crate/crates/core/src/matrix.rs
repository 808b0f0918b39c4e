//! Small dense row-major matrices and a Jacobi-based singular spectrum,
//! sized for unfoldings of a few hundred rows.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TcnError};

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(TcnError::Argument(format!(
                "matrix dims must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(TcnError::shape("Matrix::new", rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TcnError::Argument("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Panics on a zero dimension.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero matrix dimension");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// First `k` columns.
    pub fn leading_columns(&self, k: usize) -> Result<Matrix> {
        if k == 0 || k > self.cols {
            return Err(TcnError::Argument(format!(
                "cannot take {k} leading columns of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok(Matrix::from_fn(self.rows, k, |i, j| self.get(i, j)))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(TcnError::shape("matmul", self.cols, other.rows));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (p, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, b) in dst.iter_mut().zip(other.row(p)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(TcnError::shape("matvec", self.cols, x.len()));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self · selfᵀ`.
    pub fn gram_rows(&self) -> Matrix {
        let mut g = Matrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let v: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Left singular vectors and singular values, sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub u: Matrix,
    pub sigmas: Vec<f64>,
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (unsorted) and eigenvectors as the columns of the
/// second value.
fn jacobi_eigen(mut g: Matrix) -> (Vec<f64>, Matrix) {
    let n = g.rows();
    let mut v = Matrix::identity(n);
    let total = g.frobenius_norm();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| g.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let gpq = g.get(p, q);
                if gpq == 0.0 {
                    continue;
                }
                let theta = (g.get(q, q) - g.get(p, p)) / (2.0 * gpq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let gkp = g.get(k, p);
                    let gkq = g.get(k, q);
                    g.set(k, p, c * gkp - s * gkq);
                    g.set(k, q, s * gkp + c * gkq);
                }
                for k in 0..n {
                    let gpk = g.get(p, k);
                    let gqk = g.get(q, k);
                    g.set(p, k, c * gpk - s * gqk);
                    g.set(q, k, s * gpk + c * gqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| g.get(i, i)).collect(), v)
}

/// Orthonormalizes the columns of `u` in place (two passes of modified
/// Gram–Schmidt). Columns listed in `fill` are replaced by standard basis
/// vectors before orthogonalization so rank-deficient inputs still end with
/// a full orthonormal set.
fn orthonormalize_columns(u: &mut Matrix, fill: &[usize]) {
    let (rows, cols) = u.shape();
    let mut basis_cursor = 0;
    for j in 0..cols {
        let mut candidate: Vec<f64> = u.column(j);
        let mut needs_fill = fill.contains(&j);
        loop {
            if needs_fill {
                candidate = vec![0.0; rows];
                candidate[basis_cursor % rows] = 1.0;
                basis_cursor += 1;
            }
            for _ in 0..2 {
                for p in 0..j {
                    let dot: f64 = (0..rows).map(|i| u.get(i, p) * candidate[i]).sum();
                    for (i, c) in candidate.iter_mut().enumerate() {
                        *c -= dot * u.get(i, p);
                    }
                }
            }
            let norm = candidate.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for (i, c) in candidate.iter().enumerate() {
                    u.set(i, j, c / norm);
                }
                break;
            }
            needs_fill = true;
        }
    }
}

/// Makes the first non-negligible entry of every column nonnegative.
fn canonical_signs(u: &mut Matrix) {
    for j in 0..u.cols() {
        let lead = (0..u.rows())
            .map(|i| u.get(i, j))
            .find(|v| v.abs() > 1e-12)
            .unwrap_or(0.0);
        if lead < 0.0 {
            for i in 0..u.rows() {
                u.set(i, j, -u.get(i, j));
            }
        }
    }
}

/// Left singular vectors and singular values of `m`.
///
/// Works on the smaller Gram matrix: `m mᵀ` when `rows <= cols`, otherwise
/// `mᵀ m` with `U = m V Σ⁻¹` re-orthonormalized. `U` has `min(rows, cols)`
/// columns, each with its first nonzero component nonnegative.
pub fn singular_spectrum(m: &Matrix) -> Spectrum {
    let (rows, cols) = m.shape();
    if rows <= cols {
        let (evals, evecs) = jacobi_eigen(m.gram_rows());
        let order = descending_order(&evals);
        let sigmas = order.iter().map(|&i| evals[i].max(0.0).sqrt()).collect();
        let mut u = Matrix::from_fn(rows, rows, |i, j| evecs.get(i, order[j]));
        canonical_signs(&mut u);
        Spectrum { u, sigmas }
    } else {
        let (evals, evecs) = jacobi_eigen(m.transpose().gram_rows());
        let order = descending_order(&evals);
        let sigmas: Vec<f64> = order.iter().map(|&i| evals[i].max(0.0).sqrt()).collect();
        let sigma_max = sigmas.first().copied().unwrap_or(0.0);
        let mut u = Matrix::zeros(rows, cols);
        let mut fill = Vec::new();
        for (j, &src) in order.iter().enumerate() {
            let s = sigmas[j];
            if s <= sigma_max * 1e-13 || s == 0.0 {
                fill.push(j);
                continue;
            }
            for i in 0..rows {
                let v: f64 = (0..cols).map(|p| m.get(i, p) * evecs.get(p, src)).sum();
                u.set(i, j, v / s);
            }
        }
        orthonormalize_columns(&mut u, &fill);
        canonical_signs(&mut u);
        Spectrum { u, sigmas }
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}
