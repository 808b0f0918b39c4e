//! Tucker and CP composition, truncated HOSVD with error-driven rank
//! selection, and compression accounting.
//!
//! Factor matrices are stored `n × r`: rows are vocabulary entries, columns
//! latent dimensions. With that orientation `S ×1 A ×2 B ×3 C` maps an
//! `r1 × r2 × r3` core to an `n1 × n2 × n3` tensor.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TcnError};
use crate::matrix::{singular_spectrum, Matrix};
use crate::tensor::{mode_product, outer3, unfold, Dims, Mode, Tensor3};

/// Tucker rank `(r1, r2, r3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ranks(pub usize, pub usize, pub usize);

impl Ranks {
    pub fn product(&self) -> usize {
        self.0 * self.1 * self.2
    }

    pub fn as_dims(&self) -> Dims {
        (self.0, self.1, self.2)
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.0, self.1, self.2]
    }

    /// Checks `1 <= r_i <= n_i` on every mode.
    pub fn validate_against(&self, dims: Dims) -> Result<()> {
        let d = [dims.0, dims.1, dims.2];
        for (mode, (&r, &n)) in self.as_array().iter().zip(&d).enumerate() {
            if r == 0 || r > n {
                return Err(TcnError::Argument(format!(
                    "rank {r} on mode {} must lie in 1..={n}",
                    mode + 1
                )));
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for Ranks {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.0, self.1, self.2)
    }
}

/// Shared factor matrices `A (n1×r1)`, `B (n2×r2)`, `C (n3×r3)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuckerTriple {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl TuckerTriple {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let t = Self { a, b, c };
        t.ranks().validate_against(t.dims())?;
        Ok(t)
    }

    pub fn ranks(&self) -> Ranks {
        Ranks(self.a.cols(), self.b.cols(), self.c.cols())
    }

    /// Output dims `(n1, n2, n3)` of a composition with these factors.
    pub fn dims(&self) -> Dims {
        (self.a.rows(), self.b.rows(), self.c.rows())
    }

    pub fn factor(&self, mode: Mode) -> &Matrix {
        match mode {
            Mode::One => &self.a,
            Mode::Two => &self.b,
            Mode::Three => &self.c,
        }
    }
}

/// Core tensor plus factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuckerModel {
    pub core: Tensor3,
    pub factors: TuckerTriple,
}

impl TuckerModel {
    pub fn new(core: Tensor3, factors: TuckerTriple) -> Result<Self> {
        if core.dims() != factors.ranks().as_dims() {
            return Err(TcnError::shape(
                "TuckerModel::new",
                factors.ranks(),
                format!("{:?}", core.dims()),
            ));
        }
        Ok(Self { core, factors })
    }

    pub fn compose(&self) -> Result<Tensor3> {
        tucker_compose(&self.core, &self.factors)
    }
}

/// `core ×1 A ×2 B ×3 C`.
pub fn tucker_compose(core: &Tensor3, f: &TuckerTriple) -> Result<Tensor3> {
    if core.dims() != f.ranks().as_dims() {
        return Err(TcnError::shape(
            "tucker_compose",
            f.ranks(),
            format!("{:?}", core.dims()),
        ));
    }
    let t = mode_product(core, &f.a, Mode::One)?;
    let t = mode_product(&t, &f.b, Mode::Two)?;
    mode_product(&t, &f.c, Mode::Three)
}

/// `t ×1 Aᵀ ×2 Bᵀ ×3 Cᵀ`: projects a full tensor onto the factor spans.
pub fn project_onto(t: &Tensor3, f: &TuckerTriple) -> Result<Tensor3> {
    if t.dims() != f.dims() {
        return Err(TcnError::shape(
            "project_onto",
            format!("{:?}", f.dims()),
            format!("{:?}", t.dims()),
        ));
    }
    let s = mode_product(t, &f.a.transpose(), Mode::One)?;
    let s = mode_product(&s, &f.b.transpose(), Mode::Two)?;
    mode_product(&s, &f.c.transpose(), Mode::Three)
}

/// Sum over `r` of `U1[:, r] ∘ U2[:, r] ∘ U3[:, r]`.
pub fn cp_compose(u1: &Matrix, u2: &Matrix, u3: &Matrix) -> Result<Tensor3> {
    let rank = u1.cols();
    if u2.cols() != rank || u3.cols() != rank {
        return Err(TcnError::shape(
            "cp_compose",
            rank,
            format!("{} and {}", u2.cols(), u3.cols()),
        ));
    }
    let dims = (u1.rows(), u2.rows(), u3.rows());
    let mut out = Tensor3::zeros(dims);
    for r in 0..rank {
        let term = outer3(&u1.column(r), &u2.column(r), &u3.column(r))?;
        out.axpy(1.0, &term)?;
    }
    Ok(out)
}

/// Smallest per-mode ranks whose discarded singular-value energy stays
/// within an equal third of `(epsilon · total_norm)²`.
///
/// By the truncated-HOSVD bound this keeps the relative reconstruction
/// error at or below `epsilon`. A tail exactly equal to the budget keeps the
/// smaller rank.
pub fn select_ranks(spectra: [&[f64]; 3], total_norm: f64, epsilon: f64) -> Result<Ranks> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(TcnError::Argument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if total_norm.is_nan() || total_norm <= 0.0 {
        return Err(TcnError::Degenerate("total norm must be positive".into()));
    }
    let budget = epsilon * epsilon * total_norm * total_norm / 3.0;
    let mut ranks = [0usize; 3];
    for (slot, sigmas) in ranks.iter_mut().zip(spectra) {
        if sigmas.is_empty() {
            return Err(TcnError::Argument("empty singular spectrum".into()));
        }
        // tails[r] = sum of sigma_i^2 for i >= r (zero-based).
        let mut tails = vec![0.0; sigmas.len() + 1];
        for i in (0..sigmas.len()).rev() {
            tails[i] = tails[i + 1] + sigmas[i] * sigmas[i];
        }
        *slot = (1..=sigmas.len())
            .find(|&r| tails[r] <= budget)
            .unwrap_or(sigmas.len());
    }
    Ok(Ranks(ranks[0], ranks[1], ranks[2]))
}

/// Per-mode singular spectra of the three unfoldings.
pub fn mode_spectra(t: &Tensor3) -> [crate::matrix::Spectrum; 3] {
    Mode::ALL.map(|mode| singular_spectrum(&unfold(t, mode)))
}

/// Truncated higher-order SVD with ranks chosen from `epsilon`.
pub fn hosvd(t: &Tensor3, epsilon: f64) -> Result<TuckerModel> {
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return Err(TcnError::Degenerate(
            "cannot decompose an all-zero tensor".into(),
        ));
    }
    let spectra = mode_spectra(t);
    let ranks = select_ranks(
        [
            &spectra[0].sigmas,
            &spectra[1].sigmas,
            &spectra[2].sigmas,
        ],
        norm,
        epsilon,
    )?;
    hosvd_with_spectra(t, &spectra, ranks)
}

/// Truncated HOSVD at fixed ranks.
pub fn hosvd_fixed(t: &Tensor3, ranks: Ranks) -> Result<TuckerModel> {
    if t.frobenius_norm() == 0.0 {
        return Err(TcnError::Degenerate(
            "cannot decompose an all-zero tensor".into(),
        ));
    }
    ranks.validate_against(t.dims())?;
    let spectra = mode_spectra(t);
    hosvd_with_spectra(t, &spectra, ranks)
}

fn hosvd_with_spectra(
    t: &Tensor3,
    spectra: &[crate::matrix::Spectrum; 3],
    ranks: Ranks,
) -> Result<TuckerModel> {
    let r = ranks.as_array();
    let [a, b, c] = [0, 1, 2].map(|m| spectra[m].u.leading_columns(r[m]));
    let factors = TuckerTriple::new(a?, b?, c?)?;
    let core = project_onto(t, &factors)?;
    TuckerModel::new(core, factors)
}

/// Parameter count of the Tucker form over the full tensor's entry count:
/// `(r1·r2·r3 + n1·r1 + n2·r2 + n3·r3) / (n1·n2·n3)`.
pub fn compression_ratio(dims: Dims, ranks: Ranks) -> f64 {
    let (n1, n2, n3) = dims;
    let Ranks(r1, r2, r3) = ranks;
    let params = r1 * r2 * r3 + n1 * r1 + n2 * r2 + n3 * r3;
    params as f64 / (n1 * n2 * n3) as f64
}

/// `‖t − compose(m)‖ / ‖t‖`.
pub fn reconstruction_error(t: &Tensor3, m: &TuckerModel) -> Result<f64> {
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return Err(TcnError::Degenerate(
            "relative error undefined for a zero tensor".into(),
        ));
    }
    let rec = m.compose()?;
    if rec.dims() != t.dims() {
        return Err(TcnError::shape(
            "reconstruction_error",
            format!("{:?}", t.dims()),
            format!("{:?}", rec.dims()),
        ));
    }
    Ok(t.sub(&rec)?.frobenius_norm() / norm)
}

/// Tucker rank and compression cells reported for the two relationship
/// benchmarks at ε = 0.02, 0.05 and 0.10: `(dataset, dims, epsilon, ranks,
/// published ratio)`.
pub const PUBLISHED_COMPRESSION_TABLE: [(&str, Dims, f64, Ranks, f64); 6] = [
    ("VRD", (100, 100, 70), 0.02, Ranks(27, 26, 17), 0.026),
    ("VRD", (100, 100, 70), 0.05, Ranks(12, 10, 10), 0.006),
    ("VRD", (100, 100, 70), 0.10, Ranks(6, 4, 6), 0.002),
    ("VG200", (200, 200, 100), 0.02, Ranks(94, 73, 33), 0.066),
    ("VG200", (200, 200, 100), 0.05, Ranks(55, 36, 14), 0.012),
    ("VG200", (200, 200, 100), 0.10, Ranks(23, 16, 5), 0.003),
];

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn rand_tensor(rng: &mut ChaCha8Rng, d: Dims) -> Tensor3 {
        Tensor3::from_fn(d, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn planted(rng: &mut ChaCha8Rng, dims: Dims, ranks: Ranks, noise: f64) -> Tensor3 {
        let f = TuckerTriple::new(
            rand_matrix(rng, dims.0, ranks.0),
            rand_matrix(rng, dims.1, ranks.1),
            rand_matrix(rng, dims.2, ranks.2),
        )
        .unwrap();
        let core = rand_tensor(rng, ranks.as_dims());
        let mut t = tucker_compose(&core, &f).unwrap();
        let e = rand_tensor(rng, dims);
        let scale = noise * t.frobenius_norm() / e.frobenius_norm();
        t.axpy(scale, &e).unwrap();
        t
    }

    fn orth_defect(m: &Matrix) -> f64 {
        let g = m.transpose().matmul(m).unwrap();
        let mut s = 0.0;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let id = if i == j { 1.0 } else { 0.0 };
                s += (g.get(i, j) - id).powi(2);
            }
        }
        s.sqrt()
    }

    #[test]
    fn compose_with_identity_factors_is_core() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let core = rand_tensor(&mut rng, (3, 2, 4));
        let f = TuckerTriple::new(Matrix::identity(3), Matrix::identity(2), Matrix::identity(4))
            .unwrap();
        assert_eq!(tucker_compose(&core, &f).unwrap(), core);
    }

    #[test]
    fn compose_rank_one() {
        let u = [1.0, -2.0, 0.5];
        let v = [0.3, 4.0];
        let w = [2.0, 1.0, -1.0, 0.25];
        let core = Tensor3::new((1, 1, 1), vec![1.5]).unwrap();
        let f = TuckerTriple::new(
            Matrix::new(3, 1, u.to_vec()).unwrap(),
            Matrix::new(2, 1, v.to_vec()).unwrap(),
            Matrix::new(4, 1, w.to_vec()).unwrap(),
        )
        .unwrap();
        let mut expected = outer3(&u, &v, &w).unwrap();
        expected.scale(1.5);
        let got = tucker_compose(&core, &f).unwrap();
        for (a, b) in got.data().iter().zip(expected.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn compose_matches_quadruple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let core = rand_tensor(&mut rng, (2, 3, 2));
        let f = TuckerTriple::new(
            rand_matrix(&mut rng, 4, 2),
            rand_matrix(&mut rng, 4, 3),
            rand_matrix(&mut rng, 3, 2),
        )
        .unwrap();
        let t = tucker_compose(&core, &f).unwrap();
        assert_eq!(t.dims(), (4, 4, 3));
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..3 {
                    let mut s = 0.0;
                    for a in 0..2 {
                        for b in 0..3 {
                            for c in 0..2 {
                                s += core.get(a, b, c) * f.a.get(i, a) * f.b.get(j, b) * f.c.get(k, c);
                            }
                        }
                    }
                    assert!((t.get(i, j, k) - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn compose_rejects_rank_mismatch() {
        let f = TuckerTriple::new(Matrix::identity(2), Matrix::identity(2), Matrix::identity(2))
            .unwrap();
        assert!(tucker_compose(&Tensor3::zeros((2, 2, 1)), &f).is_err());
    }

    #[test]
    fn cp_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u1 = rand_matrix(&mut rng, 3, 1);
        let u2 = rand_matrix(&mut rng, 4, 1);
        let u3 = rand_matrix(&mut rng, 2, 1);
        assert_eq!(
            cp_compose(&u1, &u2, &u3).unwrap(),
            outer3(&u1.column(0), &u2.column(0), &u3.column(0)).unwrap()
        );
        let zero = Matrix::zeros(4, 1);
        assert!(cp_compose(&u1, &zero, &u3).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(cp_compose(&u1, &rand_matrix(&mut rng, 4, 2), &u3).is_err());
    }

    #[test]
    fn cp_equals_superdiagonal_tucker() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for rank in 1..=5 {
            let u1 = rand_matrix(&mut rng, 4, rank);
            let u2 = rand_matrix(&mut rng, 5, rank);
            let u3 = rand_matrix(&mut rng, 3, rank);
            let core = Tensor3::from_fn((rank, rank, rank), |a, b, c| {
                if a == b && b == c {
                    1.0
                } else {
                    0.0
                }
            });
            let f = TuckerTriple {
                a: u1.clone(),
                b: u2.clone(),
                c: u3.clone(),
            };
            let cp = cp_compose(&u1, &u2, &u3).unwrap();
            let tk = tucker_compose(&core, &f).unwrap();
            for (a, b) in cp.data().iter().zip(tk.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn select_ranks_examples() {
        let zero_tail = [1.0, 0.0, 0.0];
        let r = select_ranks([&zero_tail, &zero_tail, &zero_tail], 1.0, 0.01).unwrap();
        assert_eq!(r, Ranks(1, 1, 1));
        // Budget (0.9^2 * 10^2 / 3 = 27) exceeds all tail energy past rank 1.
        let s = [9.0, 3.0, 1.0];
        let r = select_ranks([&s, &s, &s], 10.0, 0.9).unwrap();
        assert_eq!(r, Ranks(1, 1, 1));
        assert!(select_ranks([&s, &s, &s], 10.0, 0.0).is_err());
        assert!(select_ranks([&s, &s, &s], 10.0, 1.0).is_err());
    }

    #[test]
    fn select_ranks_tie_keeps_smaller_rank() {
        // tail after rank 1 = 3^2 = 9; budget = eps^2 * 27 / 3 = 9 * eps^2, eps = 1/... pick eps=0.5:
        // budget = 0.25 * 108 / 3 = 9 with total_norm^2 = 108.
        let s = [9.0, 3.0];
        let r = select_ranks([&s, &s, &s], 108f64.sqrt(), 0.5).unwrap();
        assert_eq!(r, Ranks(1, 1, 1));
    }

    #[test]
    fn planted_ranks_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let t = planted(&mut rng, (8, 9, 7), Ranks(2, 3, 2), 1e-6);
        let m = hosvd(&t, 0.01).unwrap();
        assert_eq!(m.factors.ranks(), Ranks(2, 3, 2));
    }

    #[test]
    fn hosvd_rank_one_exact() {
        let u = [0.6, 0.8, 0.0];
        let v = [1.0, 0.0];
        let w = [0.0, 0.0, 1.0, 0.0];
        let t = outer3(&u, &v, &w).unwrap();
        let m = hosvd(&t, 0.1).unwrap();
        assert_eq!(m.factors.ranks(), Ranks(1, 1, 1));
        assert!(reconstruction_error(&t, &m).unwrap() <= 1e-10);
    }

    #[test]
    fn hosvd_planted_3_2_4() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let t = planted(&mut rng, (10, 12, 9), Ranks(3, 2, 4), 0.0);
        let m = hosvd(&t, 0.05).unwrap();
        assert_eq!(m.factors.ranks(), Ranks(3, 2, 4));
        assert!(reconstruction_error(&t, &m).unwrap() < 1e-8);
        for mode in Mode::ALL {
            assert!(orth_defect(m.factors.factor(mode)) < 1e-10);
        }
    }

    #[test]
    fn hosvd_rejects_zero_tensor() {
        assert!(matches!(
            hosvd(&Tensor3::zeros((2, 2, 2)), 0.1),
            Err(TcnError::Degenerate(_))
        ));
    }

    #[test]
    fn reconstruction_error_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let t = planted(&mut rng, (6, 5, 4), Ranks(2, 2, 2), 0.02);
        let m = hosvd(&t, 0.05).unwrap();
        assert!(reconstruction_error(&t, &m).unwrap() <= 0.05);

        let zero_core = TuckerModel::new(
            Tensor3::zeros(m.factors.ranks().as_dims()),
            m.factors.clone(),
        )
        .unwrap();
        assert!((reconstruction_error(&t, &zero_core).unwrap() - 1.0).abs() < 1e-15);

        let full = hosvd_fixed(&t, Ranks(6, 5, 4)).unwrap();
        assert!(reconstruction_error(&t, &full).unwrap() < 1e-10);
        assert!(reconstruction_error(&Tensor3::zeros((6, 5, 4)), &full).is_err());
    }

    #[test]
    fn published_compression_cells() {
        for (_, dims, _, ranks, published) in PUBLISHED_COMPRESSION_TABLE {
            let ratio = compression_ratio(dims, ranks);
            assert!((ratio - published).abs() <= 0.001, "{ratio} vs {published}");
        }
        assert!((compression_ratio((100, 100, 70), Ranks(27, 26, 17)) - 18424.0 / 700000.0).abs() < 1e-15);
    }

    #[test]
    fn smaller_epsilon_never_shrinks_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let t = planted(&mut rng, (9, 8, 7), Ranks(3, 3, 3), 0.1);
        let eps = [0.3, 0.2, 0.1, 0.05, 0.02, 0.01];
        let ranks: Vec<Ranks> = eps.iter().map(|&e| hosvd(&t, e).unwrap().factors.ranks()).collect();
        for w in ranks.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1 && w[1].2 >= w[0].2);
        }
    }
}
