//! Dunkl operators, the intertwining operator `V_k`, and the Dunkl kernel
//! for finite reflection groups.

pub mod config;
pub mod dunkl;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod poly;
pub mod quad;
pub mod reflection_groups;
pub mod scalar;
pub mod verify;

pub use dunkl::{DunklContext, GroupAlgebraElement, HOperator};
pub use error::{Error, Result};
pub use poly::{ExactPoly, Exponent, FloatPoly, Polynomial};
pub use reflection_groups::{
    Family, MultiplicityFunction, PositiveSystem, ReflectionGroup, RootSystem,
};
pub use scalar::{CRational, Complex64, Scalar};
