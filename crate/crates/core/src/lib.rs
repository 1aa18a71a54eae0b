//! Solver library for the asymmetric traveling salesman problem with a
//! certified constant-factor guarantee against the Held-Karp lower bound.
//!
//! The pipeline: solve the Held-Karp relaxation exactly by cutting planes,
//! extract and uncross an optimal dual into a laminar family, reduce the
//! instance through contractions to vertebrate pairs, solve Subtour
//! Partition Cover with witness-flow rounding, and merge local subtours
//! into a global tour. Every stage bound is asserted at runtime in exact
//! rational arithmetic.

pub mod error;
pub mod ratio;
pub mod vset;
pub mod graph;
pub mod maxflow;
pub mod mcf;
pub mod lp;
pub mod heldkarp;
pub mod instance;
pub mod laminar_ops;
pub mod spc;
pub mod merge;
pub mod vertebrate;
pub mod pipeline;
pub mod gen;
pub mod io;

pub use error::{AtspError, Result};
pub use ratio::Rat;
