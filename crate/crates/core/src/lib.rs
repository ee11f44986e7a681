//! Sparse two-dimensional microwave imaging.
//!
//! A Born-linearised volume-integral forward model on a square grid, a
//! Tikhonov-shifted CoSaMP solver, and a small MLP that estimates the sparsity
//! level from the measured scattered field.

pub mod cosamp;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod forward;
pub mod geometry;
pub mod green;
pub mod io;
pub mod linalg;
pub mod measurements;
pub mod metrics;
pub mod net;
pub mod rip;
pub mod scene;
pub mod special;

pub use error::{Error, Result};
