//! Semi-Lagrangian solver for the one-and-one-half-dimensional
//! Vlasov–Maxwell system (one position, two velocity coordinates), with
//! diagnostics for its conservation laws and characteristic invariants and
//! a reduced Vlasov–Poisson solver for `v2`-even data.

pub mod background;
pub mod characteristics;
pub mod config;
pub mod diagnostics;
pub mod distribution;
pub mod error;
pub mod fields;
pub mod grid;
pub mod moments;
pub mod profile;
pub mod reduction;
pub mod runner;
pub mod snapshot;
pub mod solver;
pub mod spline;

pub use error::{Error, ExitKind, Result};
