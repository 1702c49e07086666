//! Numerical laboratory for bipolar comparison and MTW-type inequalities.
//!
//! * [`manifold`]: model surfaces with geodesics, distances and curvature.
//! * [`distgeo`]: feasibility of model configurations for distance data.
//! * [`comparison`]: sampling configurations on a manifold and scanning.
//! * [`mtw`]: fourth mixed derivatives of squared distance.
//! * [`rigidity`]: flat-band surfaces and key-lemma configurations.
//! * [`io`]: plain-text instance and probe files.
//!
//! All numerical code is generic over [`Scalar`]; the aliases below fix it to
//! `f64`, which is what the tolerances are tuned for.

pub mod error;
pub mod io;
pub mod comparison;
pub mod distgeo;
pub mod manifold;
pub mod mtw;
pub mod rigidity;
pub mod ode;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Manifold = manifold::ManifoldSpec<f64>;
pub type Point = manifold::ChartPoint<f64>;
pub type Tangent = manifold::TangentVec<f64>;
