pub mod baselines;
pub mod data;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod losses;
pub mod network;
pub mod numeric;
pub mod training;

pub use error::{Error, Result};
