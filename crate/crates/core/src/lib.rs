//! Façade texture repair: semantic label completion with direction-guided
//! PatchMatch, multi-domain image descriptors and losses, image quilting,
//! pluggable synthesis backends, and an end-to-end repair pipeline.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choice.

pub mod completion;
pub mod error;
pub mod maps;
pub mod metrics;
pub mod pipeline;
pub mod quilting;
pub mod raster;
pub mod synthesis;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Raster = raster::RasterImage<f64>;
pub type Raster32 = raster::RasterImage<f32>;
pub type Completion = completion::CompletionResult<f64>;
pub type Completion32 = completion::CompletionResult<f32>;
pub type Field = completion::NearestNeighborField<f64>;
pub type Patches = quilting::PatchSet<f64>;
