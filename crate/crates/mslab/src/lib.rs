//! Numerical laboratory for the truncated Maass-Selberg relations of SL(n).
//!
//! Modules are layered bottom-up: [`weyl`] (root data and permutations),
//! [`xifunc`] (Γ, ζ, ξ and the c-function), [`intertwine`] (products of
//! c-factors with exact zero/pole bookkeeping), [`msrel`] (the double Weyl
//! sum and truncated volumes), [`mellin`] (test functions), [`contour`]
//! (vertical-line pipelines), [`cancel`] (singularity cancellation checks)
//! and [`lattice`] (sublattice counting and the n=2 Monte Carlo oracle).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cancel;
pub mod contour;
pub mod error;
pub mod exec;
pub mod intertwine;
pub mod lattice;
pub mod mellin;
pub mod msrel;
pub mod numerics;
pub mod weyl;
pub mod xifunc;

pub use error::{MsError, Result};
pub use num_complex::Complex64 as C64;
pub use numerics::sum::Precision;
