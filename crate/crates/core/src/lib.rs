//! Numerical toolkit for asymptotic mean value formulas of the normalized
//! parabolic p-Laplacian, the dynamic programming principle they induce, and
//! the associated two-player stochastic game.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod amvf;
pub mod calculus;
pub mod domain;
pub mod dpp;
pub mod error;
pub mod exec;
pub mod field;
pub mod functions;
pub mod game;
pub mod grid;
pub mod params;

pub use error::{Error, Result};
pub use params::Params;
