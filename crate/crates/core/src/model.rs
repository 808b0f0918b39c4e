//! The tensor composition network: an affine map from a fused feature
//! vector to a low-rank representation, composed into a full
//! `subject × object × predicate` score tensor.
//!
//! Three variants share the affine front end and differ in what it predicts:
//!
//! * [`Variant::TuckerCore`] predicts the `r1 × r2 × r3` core; factors
//!   `A`, `B`, `C` are shared parameters.
//! * [`Variant::Cp`] predicts the columns of three CP factor matrices of
//!   rank `R` and sums their rank-one outer products.
//! * [`Variant::Abc`] keeps the core as a shared parameter and predicts the
//!   factor matrices per image.
//!
//! The affine output is laid out row-major: the folded core for Tucker,
//! `[U1 (n×R) | U2 (n×R) | U3 (m×R)]` for CP and `[A (n×r1) | B (n×r2) |
//! C (m×r3)]` for ABC.

use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Triplet;
use crate::error::{Result, TcnError};
use crate::matrix::Matrix;
use crate::tensor::{mode_product, unfold, Mode, Tensor3};
use crate::tucker::{cp_compose, project_onto, tucker_compose, Ranks, TuckerModel, TuckerTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    TuckerCore,
    Cp,
    Abc,
}

impl Variant {
    pub fn code(self) -> u32 {
        match self {
            Variant::TuckerCore => 0,
            Variant::Cp => 1,
            Variant::Abc => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Variant::TuckerCore),
            1 => Some(Variant::Cp),
            2 => Some(Variant::Abc),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::TuckerCore => "tucker",
            Variant::Cp => "cp",
            Variant::Abc => "abc",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = TcnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tucker" | "tucker_core" | "tucker-core" => Ok(Variant::TuckerCore),
            "cp" => Ok(Variant::Cp),
            "abc" => Ok(Variant::Abc),
            other => Err(TcnError::Argument(format!(
                "unknown variant {other:?} (expected tucker, cp or abc)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// CP rank matched to a Tucker core size: `r1·r2·r3` snapped to the nearest
/// of 8, 16 and 32 (ties go to the smaller).
pub fn cp_default_rank(ranks: Ranks) -> usize {
    let target = ranks.product() as f64;
    [8usize, 16, 32]
        .into_iter()
        .min_by(|&a, &b| {
            (a as f64 - target)
                .abs()
                .total_cmp(&(b as f64 - target).abs())
                .then(a.cmp(&b))
        })
        .unwrap()
}

/// Fused image feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TcnError::Argument("feature values must be finite".into()));
        }
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Concatenates feature blocks extracted at several depths, in order.
pub fn fuse_features<B: AsRef<[f64]>>(blocks: &[B]) -> Result<FeatureVector> {
    if blocks.is_empty() {
        return Err(TcnError::Argument("no feature blocks to fuse".into()));
    }
    if blocks.iter().any(|b| b.as_ref().is_empty()) {
        return Err(TcnError::Argument("feature blocks must be nonempty".into()));
    }
    FeatureVector::new(blocks.iter().flat_map(|b| b.as_ref().iter().copied()).collect())
}

/// All trainable arrays of a model plus the shapes that tie them together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcnParams {
    pub variant: Variant,
    /// Subject/object vocabulary size `n`.
    pub n_objects: usize,
    /// Predicate vocabulary size `m`.
    pub n_predicates: usize,
    pub feature_dim: usize,
    /// Tucker ranks; `(R, R, R)` for the CP variant.
    pub ranks: Ranks,
    /// Affine map `output × feature_dim`.
    pub weight: Matrix,
    pub bias: Vec<f64>,
    /// Shared factors (Tucker variant only).
    pub factors: Option<TuckerTriple>,
    /// Shared core (ABC variant only).
    pub core: Option<Tensor3>,
}

/// Gradients with the same layout as [`TcnParams`]' trainable arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub factors: Option<TuckerTriple>,
    pub core: Option<Tensor3>,
}

fn output_len(variant: Variant, n: usize, m: usize, ranks: Ranks) -> usize {
    match variant {
        Variant::TuckerCore => ranks.product(),
        Variant::Cp => ranks.0 * (2 * n + m),
        Variant::Abc => n * ranks.0 + n * ranks.1 + m * ranks.2,
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, half_width: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-half_width..=half_width))
}

/// Builds a model with deterministic random initialization.
///
/// Factors (Tucker) or the shared core (ABC) are copied from `init` when it
/// is given; otherwise factors are uniform on `±1/√r` for their rank and the
/// core on `±1/√(r1·r2·r3)`. `W` is uniform on `±1/√d` and `b` starts at zero.
/// For the CP variant `ranks` must be `(R, R, R)`.
pub fn init_params(
    n_objects: usize,
    n_predicates: usize,
    ranks: Ranks,
    feature_dim: usize,
    variant: Variant,
    seed: u64,
    init: Option<&TuckerModel>,
) -> Result<TcnParams> {
    if n_objects == 0 || n_predicates == 0 || feature_dim == 0 {
        return Err(TcnError::Argument(
            "vocabulary sizes and feature_dim must be positive".into(),
        ));
    }
    let dims = (n_objects, n_objects, n_predicates);
    match variant {
        Variant::Cp => {
            if ranks.0 == 0 || ranks.0 != ranks.1 || ranks.1 != ranks.2 {
                return Err(TcnError::Argument(format!(
                    "CP variant expects ranks (R,R,R) with R >= 1, got {ranks}"
                )));
            }
        }
        _ => ranks.validate_against(dims)?,
    }
    if let Some(model) = init {
        if model.factors.dims() != dims || model.factors.ranks() != ranks {
            return Err(TcnError::Argument(format!(
                "initial decomposition has dims {:?} and ranks {}, model needs {:?} and {}",
                model.factors.dims(),
                model.factors.ranks(),
                dims,
                ranks
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = match (variant, init) {
        (Variant::TuckerCore, Some(model)) => Some(model.factors.clone()),
        (Variant::TuckerCore, None) => {
            let r = ranks.as_array();
            let a = uniform_matrix(&mut rng, n_objects, r[0], 1.0 / (r[0] as f64).sqrt());
            let b = uniform_matrix(&mut rng, n_objects, r[1], 1.0 / (r[1] as f64).sqrt());
            let c = uniform_matrix(&mut rng, n_predicates, r[2], 1.0 / (r[2] as f64).sqrt());
            Some(TuckerTriple::new(a, b, c)?)
        }
        _ => None,
    };
    let out = output_len(variant, n_objects, n_predicates, ranks);
    let weight = uniform_matrix(&mut rng, out, feature_dim, 1.0 / (feature_dim as f64).sqrt());
    let core = match (variant, init) {
        (Variant::Abc, Some(model)) => Some(model.core.clone()),
        (Variant::Abc, None) => {
            let h = 1.0 / (ranks.product() as f64).sqrt();
            Some(Tensor3::from_fn(ranks.as_dims(), |_, _, _| {
                rng.random_range(-h..=h)
            }))
        }
        _ => None,
    };
    let params = TcnParams {
        variant,
        n_objects,
        n_predicates,
        feature_dim,
        ranks,
        weight,
        bias: vec![0.0; out],
        factors,
        core,
    };
    params.validate()?;
    Ok(params)
}

/// Per-image representation predicted by the affine layer, ready for
/// scoring individual triplets without materializing the full tensor.
#[derive(Debug, Clone)]
pub enum Prepared<'a> {
    Tucker {
        core: Tensor3,
        factors: &'a TuckerTriple,
    },
    Cp {
        u1: Matrix,
        u2: Matrix,
        u3: Matrix,
    },
    Abc {
        core: &'a Tensor3,
        factors: TuckerTriple,
    },
}

impl Prepared<'_> {
    /// Score of one `(subject, object, predicate)` entry.
    ///
    /// Tucker/ABC contract the core with rows `A_i`, `B_j`, `C_k` in
    /// `r1·r2·r3` multiply-adds; CP takes `R` triple products.
    pub fn score(&self, i: usize, j: usize, k: usize) -> f64 {
        match self {
            Prepared::Tucker { core, factors } => contract_rows(core, factors, i, j, k),
            Prepared::Abc { core, factors } => contract_rows(core, factors, i, j, k),
            Prepared::Cp { u1, u2, u3 } => u1
                .row(i)
                .iter()
                .zip(u2.row(j))
                .zip(u3.row(k))
                .map(|((a, b), c)| a * b * c)
                .sum(),
        }
    }

    pub fn compose(&self) -> Result<Tensor3> {
        match self {
            Prepared::Tucker { core, factors } => tucker_compose(core, factors),
            Prepared::Abc { core, factors } => tucker_compose(core, factors),
            Prepared::Cp { u1, u2, u3 } => cp_compose(u1, u2, u3),
        }
    }
}

fn contract_rows(core: &Tensor3, f: &TuckerTriple, i: usize, j: usize, k: usize) -> f64 {
    let (r1, r2, r3) = core.dims();
    let a = f.a.row(i);
    let b = f.b.row(j);
    let c = f.c.row(k);
    let data = core.data();
    let mut total = 0.0;
    for (p, &ap) in a.iter().enumerate().take(r1) {
        let mut acc_b = 0.0;
        for (q, &bq) in b.iter().enumerate().take(r2) {
            let base = (p * r2 + q) * r3;
            let acc_c: f64 = data[base..base + r3].iter().zip(c).map(|(s, cc)| s * cc).sum();
            acc_b += bq * acc_c;
        }
        total += ap * acc_b;
    }
    total
}

fn split_rows(y: &[f64], rows: &[usize], cols: &[usize]) -> Result<Vec<Matrix>> {
    let mut offset = 0;
    let mut out = Vec::with_capacity(rows.len());
    for (&r, &c) in rows.iter().zip(cols) {
        out.push(Matrix::new(r, c, y[offset..offset + r * c].to_vec())?);
        offset += r * c;
    }
    Ok(out)
}

impl TcnParams {
    /// Output dims `(n, n, m)` of every variant.
    pub fn logit_dims(&self) -> (usize, usize, usize) {
        (self.n_objects, self.n_objects, self.n_predicates)
    }

    pub fn output_len(&self) -> usize {
        output_len(self.variant, self.n_objects, self.n_predicates, self.ranks)
    }

    /// Checks shape consistency between all arrays.
    pub fn validate(&self) -> Result<()> {
        let out = self.output_len();
        if self.weight.shape() != (out, self.feature_dim) {
            return Err(TcnError::shape(
                "TcnParams.weight",
                format!("{out}x{}", self.feature_dim),
                format!("{}x{}", self.weight.rows(), self.weight.cols()),
            ));
        }
        if self.bias.len() != out {
            return Err(TcnError::shape("TcnParams.bias", out, self.bias.len()));
        }
        let dims = self.logit_dims();
        match self.variant {
            Variant::TuckerCore => {
                let f = self
                    .factors
                    .as_ref()
                    .ok_or_else(|| TcnError::Argument("Tucker variant needs factors".into()))?;
                if f.dims() != dims || f.ranks() != self.ranks {
                    return Err(TcnError::shape(
                        "TcnParams.factors",
                        format!("{dims:?} {}", self.ranks),
                        format!("{:?} {}", f.dims(), f.ranks()),
                    ));
                }
                if self.core.is_some() {
                    return Err(TcnError::Argument("Tucker variant carries no shared core".into()));
                }
            }
            Variant::Abc => {
                let c = self
                    .core
                    .as_ref()
                    .ok_or_else(|| TcnError::Argument("ABC variant needs a shared core".into()))?;
                if c.dims() != self.ranks.as_dims() {
                    return Err(TcnError::shape(
                        "TcnParams.core",
                        self.ranks,
                        format!("{:?}", c.dims()),
                    ));
                }
                if self.factors.is_some() {
                    return Err(TcnError::Argument("ABC variant carries no shared factors".into()));
                }
            }
            Variant::Cp => {
                if self.factors.is_some() || self.core.is_some() {
                    return Err(TcnError::Argument(
                        "CP variant has no shared factors or core".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn affine(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.feature_dim {
            return Err(TcnError::shape("feature vector", self.feature_dim, x.len()));
        }
        let mut y = self.weight.matvec(x)?;
        for (v, b) in y.iter_mut().zip(&self.bias) {
            *v += b;
        }
        Ok(y)
    }

    fn predicted_shapes(&self) -> ([usize; 3], [usize; 3]) {
        let (n, m) = (self.n_objects, self.n_predicates);
        match self.variant {
            Variant::Cp => ([n, n, m], [self.ranks.0; 3]),
            _ => ([n, n, m], self.ranks.as_array()),
        }
    }

    /// Runs the affine layer and reshapes its output.
    pub fn prepare(&self, x: &[f64]) -> Result<Prepared<'_>> {
        let y = self.affine(x)?;
        let (rows, cols) = self.predicted_shapes();
        Ok(match self.variant {
            Variant::TuckerCore => Prepared::Tucker {
                core: Tensor3::new(self.ranks.as_dims(), y)?,
                factors: self.factors.as_ref().expect("validated Tucker factors"),
            },
            Variant::Cp => {
                let mut parts = split_rows(&y, &rows, &cols)?.into_iter();
                Prepared::Cp {
                    u1: parts.next().unwrap(),
                    u2: parts.next().unwrap(),
                    u3: parts.next().unwrap(),
                }
            }
            Variant::Abc => {
                let mut parts = split_rows(&y, &rows, &cols)?.into_iter();
                Prepared::Abc {
                    core: self.core.as_ref().expect("validated ABC core"),
                    factors: TuckerTriple {
                        a: parts.next().unwrap(),
                        b: parts.next().unwrap(),
                        c: parts.next().unwrap(),
                    },
                }
            }
        })
    }

    /// Core tensor `fold(W·x + b)` (Tucker variant only).
    pub fn predict_core(&self, x: &[f64]) -> Result<Tensor3> {
        if self.variant != Variant::TuckerCore {
            return Err(TcnError::Argument(format!(
                "predict_core applies to the Tucker variant, model is {}",
                self.variant
            )));
        }
        Tensor3::new(self.ranks.as_dims(), self.affine(x)?)
    }

    /// Full logit tensor of dims `(n, n, m)`.
    pub fn forward(&self, x: &[f64]) -> Result<Tensor3> {
        self.prepare(x)?.compose()
    }

    pub fn triplet_score(&self, x: &[f64], triplet: Triplet) -> Result<f64> {
        triplet.check_bounds(self.n_objects, self.n_predicates)?;
        let (i, j, k) = triplet.tensor_index();
        Ok(self.prepare(x)?.score(i, j, k))
    }

    /// Exact gradients of `L = Σ grad_logits ⊙ forward(x)` with respect to
    /// every trainable array.
    pub fn backward(&self, x: &[f64], grad_logits: &Tensor3) -> Result<Gradients> {
        if grad_logits.dims() != self.logit_dims() {
            return Err(TcnError::shape(
                "backward grad_logits",
                format!("{:?}", self.logit_dims()),
                format!("{:?}", grad_logits.dims()),
            ));
        }
        let prepared = self.prepare(x)?;
        let (dy, factors, core) = match &prepared {
            Prepared::Tucker { core, factors } => {
                let d_core = project_onto(grad_logits, factors)?;
                let d_factors = factor_gradients(grad_logits, core, factors)?;
                (d_core.into_data(), Some(d_factors), None)
            }
            Prepared::Abc { core, factors } => {
                let d_core = project_onto(grad_logits, factors)?;
                let d = factor_gradients(grad_logits, core, factors)?;
                let mut dy = d.a.data().to_vec();
                dy.extend_from_slice(d.b.data());
                dy.extend_from_slice(d.c.data());
                (dy, None, Some(d_core))
            }
            Prepared::Cp { u1, u2, u3 } => {
                let d1 = cp_factor_gradient(grad_logits, [u1, u2, u3], Mode::One)?;
                let d2 = cp_factor_gradient(grad_logits, [u1, u2, u3], Mode::Two)?;
                let d3 = cp_factor_gradient(grad_logits, [u1, u2, u3], Mode::Three)?;
                let mut dy = d1.data().to_vec();
                dy.extend_from_slice(d2.data());
                dy.extend_from_slice(d3.data());
                (dy, None, None)
            }
        };
        let weight = Matrix::from_fn(self.weight.rows(), self.feature_dim, |o, f| dy[o] * x[f]);
        Ok(Gradients {
            weight,
            bias: dy,
            factors,
            core,
        })
    }

    /// Trainable arrays in checkpoint order: `W, b`, then `A, B, C` (Tucker)
    /// or `S` (ABC).
    pub fn arrays(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![self.weight.data(), &self.bias];
        if let Some(f) = &self.factors {
            out.extend([f.a.data(), f.b.data(), f.c.data()]);
        }
        if let Some(c) = &self.core {
            out.push(c.data());
        }
        out
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.weight.data_mut(), &mut self.bias];
        if let Some(f) = &mut self.factors {
            out.push(f.a.data_mut());
            out.push(f.b.data_mut());
            out.push(f.c.data_mut());
        }
        if let Some(c) = &mut self.core {
            out.push(c.data_mut());
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }
}

impl Gradients {
    /// Zero gradients shaped like `p`.
    pub fn zeros_like(p: &TcnParams) -> Self {
        let zero_matrix = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        Self {
            weight: zero_matrix(&p.weight),
            bias: vec![0.0; p.bias.len()],
            factors: p.factors.as_ref().map(|f| TuckerTriple {
                a: zero_matrix(&f.a),
                b: zero_matrix(&f.b),
                c: zero_matrix(&f.c),
            }),
            core: p.core.as_ref().map(|c| Tensor3::zeros(c.dims())),
        }
    }

    pub fn arrays(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![self.weight.data(), &self.bias];
        if let Some(f) = &self.factors {
            out.extend([f.a.data(), f.b.data(), f.c.data()]);
        }
        if let Some(c) = &self.core {
            out.push(c.data());
        }
        out
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.weight.data_mut(), &mut self.bias];
        if let Some(f) = &mut self.factors {
            out.push(f.a.data_mut());
            out.push(f.b.data_mut());
            out.push(f.c.data_mut());
        }
        if let Some(c) = &mut self.core {
            out.push(c.data_mut());
        }
        out
    }

    /// `self += alpha * other`, array by array.
    pub fn add_scaled(&mut self, alpha: f64, other: &Gradients) -> Result<()> {
        let src = other.arrays();
        let mut dst = self.arrays_mut();
        if src.len() != dst.len() {
            return Err(TcnError::shape("Gradients::add_scaled", dst.len(), src.len()));
        }
        for (d, s) in dst.iter_mut().zip(src) {
            if d.len() != s.len() {
                return Err(TcnError::shape("Gradients::add_scaled", d.len(), s.len()));
            }
            for (a, b) in d.iter_mut().zip(s) {
                *a += alpha * b;
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.arrays()
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `Σ` over the two modes other than `mode` of `g ⊙ p`, giving a
/// `g.size(mode) × p.size(mode)` matrix.
fn contract_except(g: &Tensor3, p: &Tensor3, mode: Mode) -> Result<Matrix> {
    unfold(g, mode).matmul(&unfold(p, mode).transpose())
}

/// Gradients of `Σ G ⊙ (S ×1 A ×2 B ×3 C)` with respect to `A`, `B`, `C`.
fn factor_gradients(g: &Tensor3, core: &Tensor3, f: &TuckerTriple) -> Result<TuckerTriple> {
    let sa = mode_product(core, &f.a, Mode::One)?;
    let sb = mode_product(core, &f.b, Mode::Two)?;
    let p1 = mode_product(&sb, &f.c, Mode::Three)?;
    let p2 = mode_product(&sa, &f.c, Mode::Three)?;
    let p3 = mode_product(&sa, &f.b, Mode::Two)?;
    Ok(TuckerTriple {
        a: contract_except(g, &p1, Mode::One)?,
        b: contract_except(g, &p2, Mode::Two)?,
        c: contract_except(g, &p3, Mode::Three)?,
    })
}

/// Gradient of `Σ G ⊙ Σ_r u1_r ∘ u2_r ∘ u3_r` with respect to the factor on
/// `mode`: the `(r, r)` diagonal of `G` projected onto the other two factors.
fn cp_factor_gradient(g: &Tensor3, u: [&Matrix; 3], mode: Mode) -> Result<Matrix> {
    let rank = u[0].cols();
    let projected = match mode {
        Mode::One => mode_product(
            &mode_product(g, &u[1].transpose(), Mode::Two)?,
            &u[2].transpose(),
            Mode::Three,
        )?,
        Mode::Two => mode_product(
            &mode_product(g, &u[0].transpose(), Mode::One)?,
            &u[2].transpose(),
            Mode::Three,
        )?,
        Mode::Three => mode_product(
            &mode_product(g, &u[0].transpose(), Mode::One)?,
            &u[1].transpose(),
            Mode::Two,
        )?,
    };
    let rows = g.size_along(mode);
    Ok(Matrix::from_fn(rows, rank, |x, r| match mode {
        Mode::One => projected.get(x, r, r),
        Mode::Two => projected.get(r, x, r),
        Mode::Three => projected.get(r, r, x),
    }))
}
