//! Set-based task-priority inverse kinematics.
//!
//! The crate is `no_std` with `alloc`. It contains the geometric model of a
//! revolute serial chain ([`kinematics`]), the task taxonomy and the
//! set-based activation state machine ([`tasks`]), the null-space-based
//! hierarchy solver ([`solver`]) and a deterministic experiment engine
//! ([`sim`]). File formats and the command-line front end live in the
//! `setprio` crate.
#![cfg_attr(not(test), no_std)]
extern crate alloc;

pub mod error;
pub mod kinematics;
pub mod sim;
pub mod solver;
pub mod tasks;

pub use error::{Error, Result};
