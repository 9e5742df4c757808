//! Compositional data analysis built around the chiPower transformation.
//!
//! The crate covers the usual logratio machinery (pairwise LR, ALR, CLR) and the
//! chiPower family, which powers compositions, re-closes them and applies the
//! chi-square standardization of correspondence analysis. Spectral analyses
//! (PCA, CA, LRA), Procrustes matching and the isometry / coherence diagnostics
//! built on top of it let the power be chosen so the transformed geometry stays
//! close to the logratio geometry even when the data contain zeros. The
//! [`supervised`] module treats the power as a tuning parameter for logistic
//! regression on compositional predictors.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod composition;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod procrustes;
pub mod spectral;
pub mod stats;
pub mod supervised;
pub mod synth;
pub mod transforms;

pub use composition::{CompositionMatrix, SizeBasis, SubcompositionPlan, ZeroStrategy};
pub use error::{CodaError, ErrorKind, Result};
pub use procrustes::ProcrustesFit;
pub use spectral::{DistanceMatrix, Method, SpectralResult, SvdResult};
pub use transforms::{TransformDescriptor, TransformKind, TransformedMatrix};
