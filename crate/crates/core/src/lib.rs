//! Finite neuron method.
//!
//! Shallow networks with ReLU^k, cardinal B-spline or cosine activations;
//! constructive sampling-based approximation of Barron-class functions
//! (plain Monte Carlo and stratified); energy minimization for 2m-th order
//! elliptic problems with Neumann or penalized Dirichlet boundary
//! conditions; and a convergence-study harness that writes CSV tables.

pub mod activations;
pub mod energy;
pub mod error;
pub mod field;
pub mod hexfloat;
pub mod invariants;
pub mod multiindex;
pub mod net;
pub mod optimizer;
pub mod quadrature;
pub mod sampling;
pub mod study;
pub mod target;

pub use error::{FnmError, Result};
