//! Doctest harness for the guide in `book/`.
//!
//! Each module's documentation is one chapter, included verbatim, so
//! every Rust snippet in the book compiles and runs under
//! `cargo test`. If the library drifts from the guide, a test here
//! fails; this crate is the synchronization mechanism, not a library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/metric-spaces.md")]
pub mod metric_spaces {}

#[doc = include_str!("../../../book/src/lipschitz-functions.md")]
pub mod lipschitz_functions {}

#[doc = include_str!("../../../book/src/free-norm.md")]
pub mod free_norm {}

#[doc = include_str!("../../../book/src/carriers-and-radii.md")]
pub mod carriers_and_radii {}

#[doc = include_str!("../../../book/src/lifts-and-decompositions.md")]
pub mod lifts_and_decompositions {}

#[doc = include_str!("../../../book/src/weight-operators.md")]
pub mod weight_operators {}

#[doc = include_str!("../../../book/src/command-line.md")]
pub mod command_line {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
