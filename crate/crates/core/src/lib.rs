//! Transformation-based generalized spatial regression.
//!
//! Responses that are skewed, heavy tailed or counts are mapped to an
//! approximately Gaussian working scale by a composable, invertible
//! transformation chain (Box-Cox, iterated sinh-arcsinh-linear warps and a
//! log-Gaussian count layer). Residual spatial dependence and spatially
//! varying coefficients are modelled with a low-rank Moran eigenvector basis
//! whose coefficients are random effects, and every variance parameter is
//! estimated jointly with the transformation by restricted maximum likelihood.
//!
//! The crate is organised bottom-up:
//!
//! * [`proximity`] and [`basis`] build proximity matrices, extract Moran
//!   eigenvectors and extend them to unobserved sites.
//! * [`transform`] holds the individual layers and the fitted
//!   [`transform::TransformChain`].
//! * [`model`] fits the spatial regression ([`model::fit_resf`],
//!   [`model::fit_resf_vc`]) and computes information criteria.
//! * [`inference`] and [`predict`] post-process a [`model::FittedModel`].
//!
//! Data-parallel loops (kernel rows, Monte Carlo moments, prediction rows,
//! gradient coordinates) go through [`parallel`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise. Results are
//! bitwise identical in both modes.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod parallel;
pub mod predict;
pub mod proximity;
pub mod stats;
pub mod transform;

pub use basis::{extend_basis, extract_basis, BasisSource, EigenBasis, ExtendedBasis};
pub use error::{Error, Result};
pub use model::{fit_resf, fit_resf_vc, FitOptions, FittedModel, ModelData, ModelSpec};
pub use parallel::Parallelism;
pub use predict::{predict_oos, PredictionResult};
pub use proximity::{
    build_contiguity_proximity, build_kernel_proximity, CoordinateSet, ProximityKind,
    ProximityMatrix,
};
pub use transform::{TransformChain, TransformSpec, YType};
