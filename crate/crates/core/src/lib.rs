//! Numerical verification of dimension-dependent entropy contraction for
//! weighted diffusions on the circle, the flat 2-torus and the round sphere.

pub mod error;
pub mod expr;
pub mod fields;
pub mod forms;
pub mod geometry;
pub mod harness;
pub mod io;
mod linalg;
pub mod ops;
pub mod semigroup;
mod stepper;
pub mod transport;

pub use error::{Error, Result};
pub use geometry::{
    build_model_space, cd_best_R, CDParams, Dimension, GridKey, MeasureField, ModelSpace,
    SpaceKind, WeightField,
};
pub use ops::WeightedSpace;
pub use semigroup::{DensityField, HeatSemigroup, NodalField, ScalarField, Scheme};
