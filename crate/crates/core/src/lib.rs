//! Multiscale sparse hyperspectral unmixing.
//!
//! Pixels of a hyperspectral image are modeled as sparse nonnegative
//! combinations of the columns of a spectral library. The solver is an ADMM
//! iteration for the ℓ₁-penalized nonnegative least-squares problem; spatial
//! regularity is introduced by first unmixing a segment-averaged (coarse)
//! version of the image and then pulling the coarse abundances back to the
//! pixel grid as a quadratic proximity prior.
//!
//! The crate is generic over the scalar type (`f32` or `f64`, see [`Float`]);
//! the concrete aliases at the crate root fix the default working precision.

pub mod datamodel;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod solver;
pub mod synth;
pub mod transform;

mod linalg;

pub use error::{Error, Result};

use num_traits::FromPrimitive;
use std::iter::Sum;

/// Scalar type the numeric core is generic over: `f32` or `f64`.
pub trait Float: ndarray::NdFloat + FromPrimitive + Sum {
    /// Shorthand for lossy conversion from `f64` constants and parameters.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any float scalar")
    }
}

impl Float for f32 {}
impl Float for f64 {}

/// Default-precision aliases. Residual tolerances around 1e-6 are only
/// meaningful in double precision, so `f64` is the working type everywhere
/// outside of exploratory use.
pub type Image64 = datamodel::HyperspectralImage<f64>;
pub type Library64 = datamodel::SpectralLibrary<f64>;
pub type Abundances64 = datamodel::AbundanceMatrix<f64>;
pub type Config64 = datamodel::MuaConfig<f64>;

pub type Image32 = datamodel::HyperspectralImage<f32>;
pub type Library32 = datamodel::SpectralLibrary<f32>;
pub type Abundances32 = datamodel::AbundanceMatrix<f32>;
pub type Config32 = datamodel::MuaConfig<f32>;
