//! Spherical Laplace distribution on `S^p`: density, sampling, maximum
//! likelihood estimation, mixture clustering and clustering metrics.

pub mod density;
pub mod error;
pub mod experiments;
pub mod io;
pub mod kmeans;
pub mod metrics;
pub mod mixture;
pub mod mle;
pub mod quadrature;
pub mod sampler;
pub mod sphere;
pub mod stats;

pub use density::{log_density, log_normalizing_constant, normalizing_constant, SLParams};
pub use error::{Error, Result};
pub use metrics::{jaccard_index, nmi, rand_index};
pub use mixture::{fit_em, Assignment, EMFit, EMOptions, MembershipMatrix, SLMixture};
pub use mle::{fit_mle, frechet_median, MedianResult, MleFit, ScaleResult, WeightedSample};
pub use sampler::{RngState, SamplerMethod, SamplerReport};
pub use sphere::{
    exp_map, geodesic_distance, log_map, project_to_tangent, TangentVector, UnitVector,
};
