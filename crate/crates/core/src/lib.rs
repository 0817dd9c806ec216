//! Relaxation of spin-1/2 ensembles toward a thermal bath, and tools for
//! spotting the Mpemba effect in it.
//!
//! - [`bloch`]: mean-field equations of motion, closed-form independent-bath
//!   solution and fixed-point linearization.
//! - [`integrator`]: RK4 / RKF45 integration and threshold crossing.
//! - [`metrics`]: qubit density matrices, Euclidean and trace distance,
//!   relative entropy.
//! - [`lindblad`]: exact dense Lindblad evolution for up to three spins.
//! - [`analysis`]: crossings, thermalization maps, velocity fields.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bloch;
pub mod error;
pub mod integrator;
pub mod lindblad;
pub mod metrics;

pub use bloch::{BlochState, Environment, StabilityReport, SystemParams};
pub use error::{Error, Result};
pub use integrator::{IntegratorConfig, Method, Trajectory};
pub use metrics::{DensityMatrix2, Metric};
