//! Quantitative studies built on the wavelet basis: annulus estimates,
//! kernel sums, BMO and Carleson norms, paraproducts and almost-diagonal
//! operators.

pub mod annuli;
pub mod sums;
pub mod bmo;
pub mod operators;
