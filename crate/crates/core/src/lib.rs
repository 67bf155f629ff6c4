//! Chaos-based pseudo-random bit generation from a 5D hyperchaotic flow.
//!
//! - [`fxp`]: Q4.27 fixed-point arithmetic.
//! - [`chaos`]: the vector field and its RK4 stepper, fixed or double precision.
//! - [`dynamics`]: Lyapunov spectrum, stability, bifurcation and Poincare tools.
//! - [`bitgen`]: truncation, serialization, scrambling and XOR combining into
//!   five bitstreams, plus entropy measurements.
//! - [`randtest`]: a subset of the SP800-22 statistical tests.

pub mod bitgen;
pub mod chaos;
pub mod dynamics;
pub mod fxp;
pub mod randtest;

pub use chaos::{InitialCondition, SolverConfig, StateVec};
pub use fxp::{Fx32, OverflowPolicy};
