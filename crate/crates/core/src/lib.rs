//! Multiscale reproducing formulae on finite quasi-metric measure spaces.
//!
//! The pipeline is space → dyadic cubes → operator family → identity split →
//! Neumann inversion → reconstruction. Every stage is generic over a
//! floating-point [`Scalar`]; the `F64*` aliases cover the common case.

pub mod dyadic;
pub mod engine;
pub mod error;
pub mod family;
pub mod io;
pub mod kernel;
pub mod report;
pub mod sampling;
pub mod scalar;
pub mod space;
pub mod testspace;

pub use error::{Error, Result};
pub use kernel::Kernel;
pub use scalar::Scalar;

pub type FinitePointSpaceF64 = space::FinitePointSpace<f64>;
pub type FinitePointSpaceF32 = space::FinitePointSpace<f32>;
pub type DyadicSystemF64 = dyadic::DyadicSystem<f64>;
pub type DyadicSystemF32 = dyadic::DyadicSystem<f32>;
pub type OperatorFamilyF64 = family::OperatorFamily<f64>;
pub type OperatorFamilyF32 = family::OperatorFamily<f32>;
pub type KernelF64 = Kernel<f64>;
pub type KernelF32 = Kernel<f32>;
