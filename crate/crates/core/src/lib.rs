//! Simulation and data-driven identification of shape-underactuated
//! dissipative systems (SUDS): viscous swimmers whose body velocity and
//! passive-joint velocity are affine in the actuated shape velocity.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod io;
pub mod mechanics;
pub mod phase;
pub mod pipeline;
pub mod simulate;
pub mod sysid;

pub use error::{Result, SudsError};
