//! L1 adaptive output feedback nested in a proportional position loop,
//! topped with optimization-based iterative learning control.
//!
//! The crate is organised bottom-up:
//!
//! - [`lti`]: transfer functions, realizations, discretization and norms.
//! - [`certify`]: construction of the closed-loop transfer functions, the
//!   L1-norm small-gain condition and the reference-system bounds.
//! - [`l1`]: the discrete-time adaptive controller for one axis.
//! - [`ilc`]: lifted models, the iteration-domain Kalman filter and the
//!   constrained input update (with its own active-set QP solver).
//! - [`plant`]: per-axis quadrotor translational dynamics, disturbances and
//!   the PD baseline.
//! - [`harness`]: configuration, scenarios, metrics and result persistence.

pub mod certify;
pub mod error;
pub mod harness;
pub mod ilc;
pub mod l1;
pub mod lti;
pub mod plant;

pub use error::{Error, Result};
