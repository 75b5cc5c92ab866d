//! Continuous-time LTI building blocks: transfer-function algebra,
//! canonical realizations, zero-order-hold discretization, sampled signals
//! and the impulse-response L1 norm.

pub mod norm;
pub mod poly;
mod signal;
mod state_space;
mod transfer_function;

pub use norm::{default_norm_step, l1_norm, l1_system_norm, DEFAULT_TAIL_TOL};
pub use signal::{linf_norm, SampledSignal};
pub use state_space::{DiscreteStateSpace, StateSpace};
pub use transfer_function::{TransferFunction, DEFAULT_CANCELLATION_TOL, DEFAULT_STABILITY_TOL};
