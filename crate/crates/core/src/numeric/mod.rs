//! Deterministic numerical kernels used by the generators and the network.

pub mod kernels;
pub mod kmeans;
pub mod pca;
pub mod rng;
pub mod sampling;

/// Dense row-major `f64` matrix.
pub type Matrix = ndarray::Array2<f64>;

pub use kernels::{clip, sigmoid, softplus, standardize};
pub use kmeans::{kmeans, KMeans};
pub use pca::{pca_fit, Pca};
pub use rng::RngStream;
pub use sampling::sample_inv_gamma;
