//! Tensor composition network for image-level visual-relationship
//! prediction.
//!
//! A per-image core tensor is predicted from a feature vector by an affine
//! layer and composed with shared subject, object and predicate factor
//! matrices (`S ×1 A ×2 B ×3 C`) to score every triplet at once. The crate
//! also carries the HOSVD initialization, the softmax training loop with
//! weighted batch sampling, and the Recall@K / few-shot / median-rank
//! evaluation protocols.

pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod matrix;
pub mod model;
pub mod tensor;
pub mod training;
pub mod tucker;

pub use error::{Result, TcnError};
pub use matrix::Matrix;
pub use tensor::{Mode, Tensor3};
pub use tucker::{Ranks, TuckerModel, TuckerTriple};
