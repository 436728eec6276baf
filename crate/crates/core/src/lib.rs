//! Model-based compressive sensing.
//!
//! Recovery of structured sparse signals from random linear measurements
//! with CoSaMP and iterative hard thresholding, where the usual `K`-term
//! pruning step is replaced by the approximation oracle of a structured
//! sparsity model:
//!
//! * [`models::ModelKind::PlainSparse`]: any `K` coefficients,
//! * [`models::ModelKind::WaveletTree`]: connected rooted subtrees of the
//!   wavelet coefficient tree,
//! * [`models::ModelKind::BlockSparse`]: `K` whole blocks.
//!
//! Alongside the engines the crate ships the measurement-count bounds for
//! these models, exact subtree counting, Monte-Carlo estimators of the
//! model-restricted isometry and amplification constants, and the synthetic
//! signals used to benchmark everything.

pub mod bounds;
pub mod error;
pub mod linalg;
pub mod models;
pub mod recovery;
pub mod signals;
pub mod wavelet;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, DenseVector, RngStream};
pub use models::{ApproxResult, ModelKind, SupportSet};
pub use recovery::{Algorithm, RecoveryConfig, RecoveryReport};
