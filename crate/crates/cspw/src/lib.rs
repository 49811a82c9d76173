//! Exact evaluation of weighted counting-CSP partition functions over
//! cyclotomic fields.
//!
//! The crate is organized around the counting pipeline: [`cyclo`] provides
//! exact arithmetic in Q(ζ_N); [`model`] the instance format and brute-force
//! oracles; [`rowspace`] row representations and the structural tests behind
//! the tractability conditions; [`maltsev`] witness functions and their
//! operations; [`pipeline`] the condition checks and the counting algorithm;
//! [`reductions`] the Vandermonde counting reduction, purification, and the
//! gadget constructions.
//!
//! Everything is exact: no floating point appears anywhere, results are
//! canonical field elements, and identical inputs produce identical outputs.

pub mod corpus;
pub mod cyclo;
pub mod maltsev;
pub mod model;
pub mod pipeline;
pub mod reductions;
pub mod rowspace;
pub mod selftest;

pub use cyclo::{CycloValue, Rational};
pub use model::{Budget, Instance, TableFunction};
