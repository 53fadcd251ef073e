//! Projection fractions and subspace portfolios.
//!
//! For a set of directions `omega`, an asset's projection fraction is
//!
//! ```text
//! f(i, omega) = |y(i) restricted to omega| / |y(i)|
//! ```
//!
//! where `y(i)` is the asset's centered position written in the inertia-tensor
//! eigenbasis. Assets with `f` strictly above a threshold enter the portfolio
//! with weights proportional to `f`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::geometry::MarketGeometry;
use crate::{Error, Result};

/// Centered norms below this fraction of the largest asset norm are treated
/// as sitting on the center of mass.
const DEGENERATE_NORM_REL: f64 = 1e-12;

/// A set of 1-based direction ranks (1 = largest eigenvalue) and a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceSpec {
    pub directions: Vec<usize>,
    pub threshold: f64,
}

impl SubspaceSpec {
    pub fn new(directions: Vec<usize>, threshold: f64) -> Result<Self> {
        let spec = Self {
            directions,
            threshold,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.directions.is_empty() {
            return Err(Error::Config("subspace has no directions".into()));
        }
        if self.directions.contains(&0) {
            return Err(Error::Config("direction ranks are 1-based; got 0".into()));
        }
        let mut sorted = self.directions.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config(format!(
                "duplicate direction in {:?}",
                self.directions
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Checks every rank against a geometry with `n_directions` axes.
    pub fn validate_for(&self, n_directions: usize) -> Result<()> {
        self.validate()?;
        match self.directions.iter().find(|&&d| d > n_directions) {
            Some(d) => Err(Error::Config(format!(
                "direction rank {d} exceeds the {n_directions} available directions"
            ))),
            None => Ok(()),
        }
    }

    /// Short label such as `2-4-5`.
    pub fn direction_label(&self) -> String {
        self.directions
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("-")
    }
}

fn row_norm_sq(geometry: &MarketGeometry, asset: usize, axes: impl Iterator<Item = usize>) -> f64 {
    axes.map(|a| geometry.eigen_coords[(asset, a)].powi(2))
        .sum()
}

fn largest_norm(geometry: &MarketGeometry) -> f64 {
    (0..geometry.n_assets())
        .map(|k| geometry.eigen_coords.row(k).norm())
        .fold(0.0, f64::max)
}

fn fraction(
    geometry: &MarketGeometry,
    asset: usize,
    spec: &SubspaceSpec,
    floor: f64,
) -> Result<f64> {
    let total = row_norm_sq(geometry, asset, 0..geometry.n_directions()).sqrt();
    if total.is_nan() || total <= floor {
        return Err(Error::DegenerateAsset { asset });
    }
    let inside = row_norm_sq(geometry, asset, spec.directions.iter().map(|d| d - 1)).sqrt();
    Ok((inside / total).min(1.0))
}

pub fn projection_fraction(
    geometry: &MarketGeometry,
    asset: usize,
    spec: &SubspaceSpec,
) -> Result<f64> {
    spec.validate_for(geometry.n_directions())?;
    if asset >= geometry.n_assets() {
        return Err(Error::Config(format!(
            "asset #{asset} out of range for {} assets",
            geometry.n_assets()
        )));
    }
    fraction(
        geometry,
        asset,
        spec,
        DEGENERATE_NORM_REL * largest_norm(geometry),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub asset: usize,
    pub ticker: String,
    pub f: f64,
}

/// Assets with `f` strictly above the threshold, by descending `f` then ticker.
///
/// Assets sitting on the center of mass have no defined fraction and are skipped.
pub fn select_constituents(
    geometry: &MarketGeometry,
    tickers: &[String],
    spec: &SubspaceSpec,
) -> Result<Vec<Selection>> {
    spec.validate_for(geometry.n_directions())?;
    let floor = DEGENERATE_NORM_REL * largest_norm(geometry);
    let mut picked: Vec<Selection> = (0..geometry.n_assets())
        .filter_map(|k| {
            let f = fraction(geometry, k, spec, floor).ok()?;
            (f > spec.threshold).then(|| Selection {
                asset: k,
                ticker: tickers[k].clone(),
                f,
            })
        })
        .collect();
    sort_selection(&mut picked);
    Ok(picked)
}

fn sort_selection(s: &mut [Selection]) {
    s.sort_by(|a, b| b.f.total_cmp(&a.f).then_with(|| a.ticker.cmp(&b.ticker)));
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constituent {
    pub asset: usize,
    pub ticker: String,
    pub f: f64,
    pub weight: f64,
    pub shares: f64,
}

/// Holdings formed on one date. An empty selection leaves all capital in cash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspacePortfolio {
    pub spec: SubspaceSpec,
    pub constituents: Vec<Constituent>,
    pub cash: f64,
    pub formed_on: NaiveDate,
    pub initial_value: f64,
}

impl SubspacePortfolio {
    pub fn is_cash(&self) -> bool {
        self.constituents.is_empty()
    }

    /// Mark-to-market value given every asset's price (indexed like the panel).
    pub fn value(&self, prices: &[f64]) -> f64 {
        self.cash
            + self
                .constituents
                .iter()
                .map(|c| c.shares * prices[c.asset])
                .sum::<f64>()
    }
}

/// `prices` holds every asset's price on the formation date, indexed like the
/// panel.
pub fn build_portfolio(
    spec: &SubspaceSpec,
    selection: &[Selection],
    prices: &[f64],
    capital: f64,
    formed_on: NaiveDate,
) -> Result<SubspacePortfolio> {
    if !(capital.is_finite() && capital > 0.0) {
        return Err(Error::Accounting(format!(
            "capital must be positive, got {capital}"
        )));
    }
    if selection.is_empty() {
        return Ok(SubspacePortfolio {
            spec: spec.clone(),
            constituents: Vec::new(),
            cash: capital,
            formed_on,
            initial_value: capital,
        });
    }
    let total_f: f64 = selection.iter().map(|s| s.f).sum();
    let constituents = selection
        .iter()
        .map(|s| {
            let price = prices[s.asset];
            if !(price.is_finite() && price > 0.0) {
                return Err(Error::Data(format!(
                    "`{}` has no positive price on {formed_on}",
                    s.ticker
                )));
            }
            let weight = s.f / total_f;
            Ok(Constituent {
                asset: s.asset,
                ticker: s.ticker.clone(),
                f: s.f,
                weight,
                shares: weight * capital / price,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubspacePortfolio {
        spec: spec.clone(),
        constituents,
        cash: 0.0,
        formed_on,
        initial_value: capital,
    })
}
