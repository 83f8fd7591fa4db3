//! Rational transfer-function arithmetic: polynomials, rational functions
//! and small dense matrices of them.

pub mod matrix;
pub mod poly;
pub mod rational;

pub use matrix::{ClosedLoopPole, ClosedLoopPoles, TransferMatrix};
pub use poly::{poly_roots, Polynomial};
pub use rational::RationalFunction;
