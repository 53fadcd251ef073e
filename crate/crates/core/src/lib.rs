//! Market geometry from return correlations.
//!
//! The pipeline turns a panel of daily prices into a point cloud whose pairwise
//! Euclidean distances are the correlation distances `sqrt(2 (1 - C))` between
//! return series. The cloud is centered on its capitalization-weighted center of
//! mass and its inertia tensor is diagonalized; the eigenvectors are the
//! characteristic directions of the market, ranked by eigenvalue.
//!
//! On top of that geometry the crate builds:
//!
//! * surrogate spectra (iid Gaussian or time-permuted returns) and an effective
//!   dimension estimate ([`dimension`]),
//! * subspace portfolios weighted by each asset's projection fraction onto a set
//!   of directions ([`portfolio`]),
//! * a rolling past/future backtest that re-estimates the geometry every window
//!   and chains capital through time ([`backtest`]),
//! * the long-only mean-variance frontier and the placement of backtested
//!   portfolios in the (sigma, mu) plane ([`frontier`]).

pub mod backtest;
pub mod dimension;
pub mod error;
pub mod frontier;
pub mod geometry;
pub mod ingest;
mod linalg;
pub mod portfolio;
pub mod report;
pub mod synthetic;

pub use error::{Error, Result};
