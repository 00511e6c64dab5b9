//! Learned WENO flux weights as a cooperative multi-agent control problem.
//!
//! Each cell interface of a finite-volume grid is an agent that picks the two
//! convex weights of a third-order WENO reconstruction. All agents share one
//! small network, trained by differentiating whole episodes through the
//! solver (backpropagation through time and space).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod config;
pub mod env;
pub mod error;
pub mod physics;
pub mod policy;
pub mod scheme;
pub mod training;
pub mod verify;
pub mod weno;

pub use error::{Error, Result};
