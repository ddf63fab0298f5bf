use thiserror::Error;

use crate::group::GroupElement;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("quadrature orders must be at least 2, got {0:?}")]
    InvalidOrders(Vec<usize>),
    #[error("non-finite integrand value {value} at node {node}")]
    NonFiniteAtNode { node: GroupElement, value: String },
    #[error("non-finite radial integrand value {value} at p = {p}")]
    NonFiniteAtFrequency { p: f64, value: String },
    #[error("radial frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("invalid band limit: N = {n}, guard = {guard} (need 0 <= guard < N, N > 0)")]
    InvalidBand { n: usize, guard: usize },
    #[error("quadrature region does not cover the support: {0}")]
    NotCovered(String),
    #[error("invalid crystallographic group: {0}")]
    InvalidCrystal(String),
    #[error("unbounded support: {0}")]
    UnboundedSupport(String),
    #[error("coefficient table and basis disagree: {0}")]
    IndexMismatch(String),
    #[error("malformed coefficient table: {0}")]
    Table(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
