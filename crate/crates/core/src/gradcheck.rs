//! Central finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::model::{init_params, TcnParams, Variant};
use crate::tensor::Tensor3;
use crate::tucker::Ranks;

/// Denominator floor for the relative error of near-zero components.
const RELATIVE_FLOOR: f64 = 1e-6;

const ARRAY_NAMES_TUCKER: [&str; 5] = ["W", "b", "A", "B", "C"];
const ARRAY_NAMES_CP: [&str; 2] = ["W", "b"];
const ARRAY_NAMES_ABC: [&str; 3] = ["W", "b", "S"];

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub variant: Variant,
    /// Largest relative error per trainable array.
    pub per_array: Vec<(String, f64)>,
    pub max_relative_error: f64,
}

/// `|a − f| / max(|a|, |f|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

fn objective(p: &TcnParams, x: &[f64], upstream: &Tensor3) -> Result<f64> {
    upstream.inner(&p.forward(x)?)
}

/// Compares `p.backward` against central differences of
/// `L = Σ upstream ⊙ forward(x)` with step `h` on every parameter entry.
pub fn finite_difference_check(
    p: &TcnParams,
    x: &[f64],
    upstream: &Tensor3,
    h: f64,
) -> Result<GradcheckReport> {
    let analytic = p.backward(x, upstream)?;
    let names: &[&str] = match p.variant {
        Variant::TuckerCore => &ARRAY_NAMES_TUCKER,
        Variant::Cp => &ARRAY_NAMES_CP,
        Variant::Abc => &ARRAY_NAMES_ABC,
    };
    let mut work = p.clone();
    let mut per_array = Vec::new();
    let analytic_arrays: Vec<Vec<f64>> = analytic.arrays().iter().map(|a| a.to_vec()).collect();
    for (a_idx, grads) in analytic_arrays.iter().enumerate() {
        let mut worst = 0.0f64;
        for (e, &g) in grads.iter().enumerate() {
            let orig = work.arrays()[a_idx][e];
            work.arrays_mut()[a_idx][e] = orig + h;
            let plus = objective(&work, x, upstream)?;
            work.arrays_mut()[a_idx][e] = orig - h;
            let minus = objective(&work, x, upstream)?;
            work.arrays_mut()[a_idx][e] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(relative_error(g, numeric));
        }
        per_array.push((names[a_idx].to_string(), worst));
    }
    let max_relative_error = per_array.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradcheckReport {
        variant: p.variant,
        per_array,
        max_relative_error,
    })
}

/// Builds a random model (nonzero bias), feature vector and upstream
/// gradient for the given shape and runs [`finite_difference_check`] with
/// `h = 1e-6`. The CP variant uses rank `R = max(r1, r2, r3)`.
pub fn random_gradcheck(
    n_objects: usize,
    n_predicates: usize,
    feature_dim: usize,
    ranks: Ranks,
    variant: Variant,
    seed: u64,
) -> Result<GradcheckReport> {
    let model_ranks = match variant {
        Variant::Cp => {
            let r = ranks.0.max(ranks.1).max(ranks.2);
            Ranks(r, r, r)
        }
        _ => ranks,
    };
    let mut p = init_params(
        n_objects,
        n_predicates,
        model_ranks,
        feature_dim,
        variant,
        seed,
        None,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for b in p.bias.iter_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    let x: Vec<f64> = (0..feature_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let upstream = Tensor3::from_fn(p.logit_dims(), |_, _, _| rng.random_range(-1.0..1.0));
    finite_difference_check(&p, &x, &upstream, 1e-6)
}
