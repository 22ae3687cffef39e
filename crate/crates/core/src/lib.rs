//! Open-boundary solvers for the effective-mass Schrödinger equation.
//!
//! Stationary and transient problems in one and two dimensions, truncated
//! either with discrete transparent boundary conditions or with perfectly
//! matched layers.

pub mod analytic;
pub mod dtbc1d;
pub mod field;
pub mod grid;
pub mod injection;
pub mod linalg;
pub mod pml;
pub mod potential;
pub mod sim1d;
pub mod sim2d;
pub mod stencils;
pub mod units;
pub mod waveguide2d;

pub use num_complex::Complex64 as C64;
