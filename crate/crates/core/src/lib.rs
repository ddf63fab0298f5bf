//! Harmonic analysis on the Euclidean motion group SE(2) and on its
//! crystallographic coset spaces `Γ\SE(2)`.

pub mod bessel;
pub mod coset_series;
pub mod conv_coset;
pub mod crystal;
pub mod error;
pub mod group;
pub mod quadrature;
pub mod spectra;
pub mod testfn;

pub use error::{Error, Result};
pub use group::GroupElement;
