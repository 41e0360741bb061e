//! Blind estimation of multiple carrier-frequency offsets in a distributed
//! multi-user antenna system.
//!
//! The received baseband signal is oversampled by a factor `P`; stacking the
//! `P` polyphase components turns the multi-user link into a time-invariant
//! virtual MIMO channel whose inputs are the CFO-rotated user symbols. The
//! receiver chain is:
//!
//! 1. [`bss::estimate_mixing`] identifies the virtual channel blindly with
//!    JADE (fourth-order cumulants + joint diagonalization) and separates the
//!    users with a least-squares equalizer.
//! 2. [`cfo::phase_matrix`] / [`cfo::ls_cfo_fit`] read each user's CFO off the
//!    linear phase ramp of the estimated channel columns.
//! 3. [`cfo::compensate`] derotates the separated streams and
//!    [`pll::pll_track`] removes the residual with a decision-directed loop.
//!
//! [`crb`] computes the stochastic Cramer-Rao bound for the CFOs and
//! [`harness`] runs seeded Monte-Carlo experiments over the whole chain.

pub mod bss;
pub mod cfo;
pub mod crb;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod pll;
pub mod signal;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
