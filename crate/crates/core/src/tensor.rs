//! Dense three-way tensors and the mode-n operations used by Tucker and CP
//! composition.
//!
//! Storage is row-major: entry `(i, j, k)` of a tensor with dims
//! `(n1, n2, n3)` lives at `(i * n2 + j) * n3 + k`.
//!
//! Unfoldings follow the Kolda–Bader convention. For mode `n` the row index
//! is the mode-`n` index and the remaining two modes form the column index
//! with the lower-numbered mode varying fastest:
//!
//! | mode | row | column        |
//! |------|-----|---------------|
//! | 1    | `i` | `j + n2 * k`  |
//! | 2    | `j` | `i + n1 * k`  |
//! | 3    | `k` | `i + n1 * j`  |

use serde::{Deserialize, Serialize};

use crate::error::{Result, TcnError};
use crate::matrix::Matrix;

/// One of the three tensor axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// Zero-based axis position.
    pub fn axis(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }
}

impl TryFrom<usize> for Mode {
    type Error = TcnError;

    /// Accepts the one-based mode numbers 1, 2 and 3.
    fn try_from(value: usize) -> Result<Self> {
        match value {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            other => Err(TcnError::Argument(format!(
                "tensor mode must be 1, 2 or 3, got {other}"
            ))),
        }
    }
}

pub type Dims = (usize, usize, usize);

fn dims_array(d: Dims) -> [usize; 3] {
    [d.0, d.1, d.2]
}

fn dims_tuple(d: [usize; 3]) -> Dims {
    (d[0], d[1], d[2])
}

/// Dense real tensor of order three.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    dims: Dims,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<Self> {
        let (n1, n2, n3) = dims;
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return Err(TcnError::Argument(format!(
                "tensor dims must be positive, got {dims:?}"
            )));
        }
        if data.len() != n1 * n2 * n3 {
            return Err(TcnError::shape("Tensor3::new", n1 * n2 * n3, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TcnError::Argument("tensor entries must be finite".into()));
        }
        Ok(Self { dims, data })
    }

    /// All-zero tensor. Panics if any dimension is zero.
    pub fn zeros(dims: Dims) -> Self {
        assert!(dims.0 > 0 && dims.1 > 0 && dims.2 > 0, "zero tensor dimension");
        Self {
            dims,
            data: vec![0.0; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        for i in 0..dims.0 {
            for j in 0..dims.1 {
                for k in 0..dims.2 {
                    t.data[(i * dims.1 + j) * dims.2 + k] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims.1 + j) * self.dims.2 + k
    }

    /// Inverse of [`Tensor3::index`].
    pub fn unravel(&self, linear: usize) -> (usize, usize, usize) {
        let k = linear % self.dims.2;
        let rest = linear / self.dims.2;
        (rest / self.dims.1, rest % self.dims.1, k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn size_along(&self, mode: Mode) -> usize {
        dims_array(self.dims)[mode.axis()]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Elementwise `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor3) -> Result<()> {
        if self.dims != other.dims {
            return Err(TcnError::shape(
                "Tensor3::axpy",
                format!("{:?}", self.dims),
                format!("{:?}", other.dims),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Sum of elementwise products.
    pub fn inner(&self, other: &Tensor3) -> Result<f64> {
        if self.dims != other.dims {
            return Err(TcnError::shape(
                "Tensor3::inner",
                format!("{:?}", self.dims),
                format!("{:?}", other.dims),
            ));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }
}

/// Column of the mode-`mode` unfolding that holds entry `(i, j, k)`.
fn unfold_column(dims: Dims, mode: Mode, i: usize, j: usize, k: usize) -> (usize, usize) {
    let (n1, n2, _) = dims;
    match mode {
        Mode::One => (i, j + n2 * k),
        Mode::Two => (j, i + n1 * k),
        Mode::Three => (k, i + n1 * j),
    }
}

/// Mode-`n` unfolding (matricization).
pub fn unfold(t: &Tensor3, mode: Mode) -> Matrix {
    let dims = t.dims();
    let rows = t.size_along(mode);
    let cols = t.len() / rows;
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..dims.0 {
        for j in 0..dims.1 {
            for k in 0..dims.2 {
                let (r, c) = unfold_column(dims, mode, i, j, k);
                m.set(r, c, t.get(i, j, k));
            }
        }
    }
    m
}

/// Inverse of [`unfold`] for the same mode and target dims.
pub fn fold(m: &Matrix, mode: Mode, dims: Dims) -> Result<Tensor3> {
    let arr = dims_array(dims);
    if arr.contains(&0) {
        return Err(TcnError::Argument(format!(
            "tensor dims must be positive, got {dims:?}"
        )));
    }
    let rows = arr[mode.axis()];
    let cols = arr.iter().product::<usize>() / rows;
    if m.rows() != rows || m.cols() != cols {
        return Err(TcnError::shape(
            "fold",
            format!("{rows}x{cols}"),
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let mut t = Tensor3::zeros(dims);
    for i in 0..dims.0 {
        for j in 0..dims.1 {
            for k in 0..dims.2 {
                let (r, c) = unfold_column(dims, mode, i, j, k);
                t.set(i, j, k, m.get(r, c));
            }
        }
    }
    Ok(t)
}

/// Mode-`n` product `t ×n m`: contracts the `mode` axis of `t` with the
/// columns of `m`, replacing that axis' size with `m.rows()`.
///
/// Equal to `fold(m · unfold(t, mode), mode, ..)` but computed in place over
/// the row-major layout.
pub fn mode_product(t: &Tensor3, m: &Matrix, mode: Mode) -> Result<Tensor3> {
    let axis = mode.axis();
    let mut dims = dims_array(t.dims());
    if m.cols() != dims[axis] {
        return Err(TcnError::shape("mode_product", dims[axis], m.cols()));
    }
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let old = dims[axis];
    let new = m.rows();
    dims[axis] = new;
    let mut out = vec![0.0; outer * new * inner];
    let src = t.data();
    for o in 0..outer {
        let src_block = &src[o * old * inner..(o + 1) * old * inner];
        let dst_block = &mut out[o * new * inner..(o + 1) * new * inner];
        for a in 0..new {
            let row = m.row(a);
            let dst = &mut dst_block[a * inner..(a + 1) * inner];
            for (i, &coef) in row.iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                let s = &src_block[i * inner..(i + 1) * inner];
                for (d, v) in dst.iter_mut().zip(s) {
                    *d += coef * v;
                }
            }
        }
    }
    Ok(Tensor3 {
        dims: dims_tuple(dims),
        data: out,
    })
}

/// Convenience alias for [`Tensor3::frobenius_norm`].
pub fn frobenius_norm(t: &Tensor3) -> f64 {
    t.frobenius_norm()
}

/// Rank-one tensor `u ∘ v ∘ w`.
pub fn outer3(u: &[f64], v: &[f64], w: &[f64]) -> Result<Tensor3> {
    if u.is_empty() || v.is_empty() || w.is_empty() {
        return Err(TcnError::Argument("outer3 requires nonempty vectors".into()));
    }
    Ok(Tensor3::from_fn((u.len(), v.len(), w.len()), |i, j, k| {
        u[i] * v[j] * w[k]
    }))
}
