//! Numerical laboratory for sub-Gaussian heat kernel estimates on finite
//! graph approximations of fractals.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `f64`
//! aliases at the crate root are what the tools and tests use.

pub mod conditions;
pub mod cutoff;
pub mod energy;
pub mod error;
pub mod fit;
pub mod linalg;
mod scalar;
pub mod space;
pub mod spectral;

pub use error::{HkeError, Result};
pub use scalar::Scalar;

pub type Graph = space::MetricMeasureGraph<f64>;
pub type Graph32 = space::MetricMeasureGraph<f32>;
