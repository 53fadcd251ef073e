//! Seeded synthetic panels for tests, demos and the example data generator.
//!
//! Factor panels follow `r(k, t) = sum_j L(k, j) F(j, t) + e(k, t)` with
//! `L ~ N(0, loading_sd^2)`, `F ~ N(0, 1)` and `e ~ N(0, 1)`, then scaled to
//! daily-return size. Zero-mean loadings keep every factor visible after the
//! cloud is re-centered. With `loading_sd = 0.5` and 100 assets each planted
//! factor carries roughly ten times the variance of the top noise eigenvalue.

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::ingest::{IndexSeries, PriceTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorPanelSpec {
    pub n_assets: usize,
    pub n_obs: usize,
    pub n_factors: usize,
    pub loading_sd: f64,
    /// Daily volatility of the idiosyncratic term.
    pub scale: f64,
    pub drift: f64,
    pub seed: u64,
}

impl Default for FactorPanelSpec {
    fn default() -> Self {
        Self {
            n_assets: 50,
            n_obs: 500,
            n_factors: 0,
            loading_sd: 0.5,
            scale: 0.01,
            drift: 0.0002,
            seed: 0,
        }
    }
}

/// N rows of T returns.
pub fn factor_returns(spec: &FactorPanelSpec) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let loadings = Normal::new(0.0, spec.loading_sd).expect("finite loading sd");
    let l: Vec<Vec<f64>> = (0..spec.n_assets)
        .map(|_| {
            (0..spec.n_factors)
                .map(|_| loadings.sample(&mut rng))
                .collect()
        })
        .collect();
    let f: Vec<Vec<f64>> = (0..spec.n_factors)
        .map(|_| {
            (0..spec.n_obs)
                .map(|_| rng.sample(StandardNormal))
                .collect()
        })
        .collect();
    (0..spec.n_assets)
        .map(|k| {
            (0..spec.n_obs)
                .map(|t| {
                    let systematic: f64 = (0..spec.n_factors).map(|j| l[k][j] * f[j][t]).sum();
                    let noise: f64 = rng.sample(StandardNormal);
                    spec.drift + spec.scale * (systematic + noise)
                })
                .collect()
        })
        .collect()
}

/// Monday-to-Friday dates in `start..=end`.
pub fn weekday_calendar(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    start
        .iter_days()
        .take_while(|d| *d <= end)
        .filter(|d| d.weekday().num_days_from_monday() < 5)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketSpec {
    pub n_assets: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub n_factors: usize,
    pub seed: u64,
}

/// A complete price/cap table on a weekday calendar plus an equal-weight
/// index normalized to 1000 on the first day.
pub fn synthetic_market(spec: &MarketSpec) -> (PriceTable, IndexSeries) {
    let dates = weekday_calendar(spec.start, spec.end);
    let returns = factor_returns(&FactorPanelSpec {
        n_assets: spec.n_assets,
        n_obs: dates.len().saturating_sub(1),
        n_factors: spec.n_factors,
        seed: spec.seed,
        ..Default::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_cafe);
    let mut prices = Vec::with_capacity(spec.n_assets);
    let mut caps = Vec::with_capacity(spec.n_assets);
    for row in &returns {
        let p0: f64 = rng.random_range(10.0..200.0);
        let shares: f64 = rng.random_range(1e6..1e8);
        let mut p = Vec::with_capacity(dates.len());
        p.push(p0);
        for r in row {
            p.push(p.last().unwrap() * r.exp());
        }
        caps.push(p.iter().map(|x| x * shares).collect());
        prices.push(p);
    }
    let tickers = (0..spec.n_assets).map(|k| format!("S{k:03}")).collect();
    let index: Vec<f64> = (0..dates.len())
        .map(|t| {
            1000.0 * prices.iter().map(|p: &Vec<f64>| p[t] / p[0]).sum::<f64>()
                / spec.n_assets as f64
        })
        .collect();
    let table = PriceTable::new(tickers, dates.clone(), prices, caps).expect("synthetic table");
    let index = IndexSeries::new(dates, index).expect("synthetic index");
    (table, index)
}
