//! Core library of the `hcsolve` spectral PDE solver.
//!
//! The crate implements an adaptive spectral method for time-dependent
//! PDEs posed on the whole space: orthonormal basis families on the real
//! line (mapped Jacobi and Hermite functions), hyperbolic cross multi-index
//! sets, multidimensional spectral transforms, Galerkin operator assembly
//! (including the fractional Laplacian via its Fourier multiplier), implicit
//! Runge-Kutta time stepping, and the runtime adaptivity that moves,
//! rescales, and reorders the basis as the solution evolves.
//!
//! Modules are layered bottom-up:
//!
//! | module         | provides                                              |
//! |----------------|-------------------------------------------------------|
//! | [`specfun`]    | Gamma, Gauss/confluent hypergeometric series          |
//! | [`basis`]      | 1D basis families, mappings, Gauss quadrature         |
//! | [`sparse_index`] | hyperbolic cross index sets and indicator subsets   |
//! | [`field`]      | sparse tensor expansions, transforms, snapshots       |
//! | [`operators`]  | Galerkin matrices and the pseudospectral RHS          |
//! | [`irk`]        | Gauss collocation tableaus and the Newton stepper     |
//! | [`adaptive`]   | frequency and exterior indicators, adaptation loop    |
//! | [`problems`]   | the built-in benchmark problems and error metrics     |
//!
//! Everything is deterministic: no threads, no global state, no
//! randomness. Two runs with identical inputs produce bit-identical
//! coefficients.

pub mod adaptive;
pub mod basis;
pub mod error;
pub mod field;
pub mod irk;
pub mod operators;
pub mod problems;
pub mod sparse_index;
pub mod specfun;

pub use error::{CoreError, Result};
