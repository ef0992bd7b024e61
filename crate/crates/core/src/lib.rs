//! Neighbourhood-aware differential privacy for word embeddings.
//!
//! The pipeline: load an [`EmbeddingSet`], build the mutual-neighbour
//! [`NeighbourGraph`], split it into connected components with per-component
//! sensitivities, calibrate Gaussian noise per component and perturb. The
//! [`privacy`] and [`utility`] modules measure what the perturbation hides
//! and what it preserves.
//!
//! Storage, neighbour search and the mechanisms are generic over the float
//! type ([`Scalar`], implemented for `f32` and `f64`); calibration and the
//! evaluation statistics always run in `f64`.

pub mod calibration;
pub mod components;
pub mod embeddings;
pub mod error;
pub mod mechanisms;
pub mod neighbours;
pub mod privacy;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod utility;

pub use calibration::{calibrate, classic_gaussian_sigma, solve_u_star, CalibrationResult, PrivacyParams};
pub use components::{partition, ComponentPartition, ComponentsReport};
pub use embeddings::{EmbeddingSet, LoadOptions, Subset};
pub use error::{Error, Result};
pub use mechanisms::{perturb, MechanismConfig, MechanismKind, PerturbationContext, PerturbationReport};
pub use neighbours::{build_graph, knn, max_edge_jaccard, GraphParams, GraphReport, NeighbourGraph, NeighbourSets};
pub use privacy::{privacy_report, PrivacyReport, SelfMatch};
pub use scalar::Scalar;

/// Double-precision embeddings, the default.
pub type Embeddings = EmbeddingSet<f64>;
/// Single-precision embeddings for large vocabularies.
pub type Embeddings32 = EmbeddingSet<f32>;
pub type Neighbours = NeighbourSets<f64>;
pub type Neighbours32 = NeighbourSets<f32>;
