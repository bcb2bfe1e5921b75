//! Backgrounds, conformal factors, tensor algebra and curve lengths.

mod background;
mod curve;
mod factor;
mod tensor;

pub use background::{background_distance, taxi_distance, Background, BackgroundKind, Point};
pub use curve::curve_length;
pub use factor::{
    eval_factor, reciprocal_log, ConformalFactor, MetricSpec, Profile, RadialPiece, RampShape,
};
pub use tensor::{deviation_norm, tensor_norm, EigenSample, EigenvalueField};

pub(crate) use background::polar_to_unit;
pub(crate) use curve::{sphere_arc, torus_segment};
pub(crate) use tensor::check_eigenvalues;
