//! Physics-based fault detection for cylindrical lithium-ion cells.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
pub mod artifacts;
pub mod campaign;
pub mod detector;
pub mod gpr;
pub mod identify;
pub mod io;
pub mod observer;
pub mod pipeline;
pub mod plant;
pub mod scenario;
