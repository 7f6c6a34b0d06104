//! Numerical engine for consistent-histories analysis of finite-dimensional
//! quantum models: labeled tensor-product spaces, projective decompositions
//! of the identity, piecewise-unitary dynamics, history families with
//! decoherence-functional consistency checks, and probability queries via
//! the extended Born rule.
//!
//! The `scenario` module defines the JSON interchange format consumed by the
//! `chq` command-line tool; everything else is the library surface it is
//! built on.

pub mod dynamics;
pub mod frameworks;
pub mod hilbert;
pub mod histories;
pub mod linalg;
pub mod models;
pub mod report;
pub mod scenario;

pub use linalg::{c64, ComplexMatrix, ComplexVector, Tolerance};
pub use num_complex::Complex64;
