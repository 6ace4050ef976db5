//! Constructive bi-Lipschitz extension of maps from subsets of the line into
//! discretized metric measure spaces, plus the supporting machinery:
//! clearance-controlled paths, curve straightening, discrete p-modulus and
//! continuum tracing.
//!
//! Spaces are finite weighted graphs. The geometric core (metric queries,
//! Whitney decompositions, straightening) is generic over the scalar type;
//! the higher pipeline stages run in `f64`.

// `!(x > 0.0)` style guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod continuum;
pub mod extension;
pub mod metric_core;
pub mod modulus;
pub mod pathfinder;
pub mod space_gallery;
pub mod straighten;
pub mod whitney;

use std::fmt::{Debug, Display};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumCast
    + num_traits::NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Converts a literal. Panics only for values outside the type's range.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal out of range")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub use metric_core::{BiLipschitzReport, Curve, MetricError, MetricSpace, VertexId};
pub use whitney::{Filtration, FiltrationKind, Interval, WhitneyDecomposition, WhitneyError};

pub type Space = MetricSpace<f64>;
pub type Space32 = MetricSpace<f32>;
pub type Path = Curve<f64>;
pub type Path32 = Curve<f32>;
pub type Decomposition = WhitneyDecomposition<f64>;
pub type Decomposition32 = WhitneyDecomposition<f32>;
pub type Report = BiLipschitzReport<f64>;
