//! Numerical building blocks shared by the analytic modules.

pub mod dd;
pub mod fit;
pub mod quad;
pub mod sum;

pub use num_complex::Complex64 as C64;
