//! Plot-ready CSV and JSON outputs.
//!
//! Floats are written with Rust's shortest round-trip formatting, so identical
//! inputs give byte-identical files.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::BacktestResult;
use crate::dimension::{SpectrumBand, SurrogateMethod};
use crate::frontier::{FrontierCurve, PlanePlacement};
use crate::geometry::MarketGeometry;
use crate::ingest::{IndexSeries, PriceTable};
use crate::Result;

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

/// `window_id,rank,eigenvalue`
pub fn write_spectrum_csv<W: Write>(w: W, windows: &[(usize, &[f64])]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["window_id", "rank", "eigenvalue"])?;
    for (id, values) in windows {
        for (a, v) in values.iter().enumerate() {
            out.write_record([id.to_string(), (a + 1).to_string(), v.to_string()])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `window_id,ticker,axis,coordinate`
pub fn write_eigen_coords_csv<W: Write>(
    w: W,
    windows: &[(usize, &MarketGeometry)],
    tickers: &[String],
) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["window_id", "ticker", "axis", "coordinate"])?;
    for (id, g) in windows {
        for (k, ticker) in tickers.iter().enumerate() {
            for a in 0..g.n_directions() {
                out.write_record([
                    id.to_string(),
                    ticker.clone(),
                    (a + 1).to_string(),
                    g.eigen_coords[(k, a)].to_string(),
                ])?;
            }
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `replica,rank,eigenvalue`
pub fn write_surrogates_csv<W: Write>(w: W, band: &SpectrumBand) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["replica", "rank", "eigenvalue"])?;
    for (r, spectrum) in band.replica_spectra.iter().enumerate() {
        for (a, v) in spectrum.iter().enumerate() {
            out.write_record([r.to_string(), (a + 1).to_string(), v.to_string()])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSummary {
    pub window_id: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub method: SurrogateMethod,
    pub replicas: usize,
    pub quantile: f64,
    pub seed: u64,
    pub rule: String,
    pub market: Vec<f64>,
    pub envelope: Vec<f64>,
    pub dimension: usize,
    pub cap: usize,
}

/// The envelope rule as reported next to every estimate.
pub const DIMENSION_RULE: &str =
    "leading market eigenvalues strictly above the per-rank surrogate quantile envelope";

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(serde_json::Error::io)?;
    Ok(())
}

/// `date,portfolio_value,index_value,D`
pub fn write_track_csv<W: Write>(w: W, result: &BacktestResult) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["date", "portfolio_value", "index_value", "D"])?;
    for p in &result.track {
        out.write_record([
            p.date.to_string(),
            p.portfolio_value.to_string(),
            p.index_value.to_string(),
            p.d.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `window_id,subspace,ticker,f,weight,shares`
pub fn write_composition_csv<W: Write>(w: W, result: &BacktestResult) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["window_id", "subspace", "ticker", "f", "weight", "shares"])?;
    let subspace = result.spec.direction_label();
    for p in &result.periods {
        for c in &p.constituents {
            out.write_record([
                p.id.to_string(),
                subspace.clone(),
                c.ticker.clone(),
                c.f.to_string(),
                c.weight.to_string(),
                c.shares.to_string(),
            ])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSummary {
    pub window_id: usize,
    pub past_start: NaiveDate,
    pub past_end: NaiveDate,
    pub formed_on: NaiveDate,
    pub liquidated_on: NaiveDate,
    pub constituents: usize,
    pub cash: bool,
    pub capital: f64,
    pub liquidation_value: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub label: String,
    pub directions: Vec<usize>,
    pub threshold: f64,
    pub gain_factor_pct: f64,
    pub final_d: f64,
    pub initial_capital: f64,
    pub final_value: f64,
    pub average_constituents: f64,
    pub d_values: Vec<f64>,
    pub periods: Vec<PeriodSummary>,
    pub warnings: Vec<String>,
}

impl ScenarioSummary {
    pub fn from_result(r: &BacktestResult, dates: &[NaiveDate]) -> Self {
        Self {
            label: r.label.clone(),
            directions: r.spec.directions.clone(),
            threshold: r.spec.threshold,
            gain_factor_pct: r.gain_factor_pct(),
            final_d: r.final_d(),
            initial_capital: r.initial_capital,
            final_value: r.final_value,
            average_constituents: r.average_constituents(),
            d_values: r.d_values(),
            periods: r
                .periods
                .iter()
                .map(|p| PeriodSummary {
                    window_id: p.id,
                    past_start: p.past.start,
                    past_end: p.past.end,
                    formed_on: dates[p.future.first],
                    liquidated_on: dates[p.future.last],
                    constituents: p.constituents.len(),
                    cash: p.is_cash(),
                    capital: p.capital,
                    liquidation_value: p.liquidation_value,
                    d: p.d,
                })
                .collect(),
            warnings: r.warnings.clone(),
        }
    }
}

/// `target_mu,sigma,mu,w_<ticker>...`
pub fn write_frontier_csv<W: Write>(w: W, curve: &FrontierCurve, tickers: &[String]) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec!["target_mu".to_string(), "sigma".into(), "mu".into()];
    header.extend(tickers.iter().map(|t| format!("w_{t}")));
    out.write_record(&header)?;
    for p in &curve.points {
        let mut row = vec![
            p.target_mu.to_string(),
            p.sigma.to_string(),
            p.mu.to_string(),
        ];
        row.extend(p.weights.iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `label,sigma,mu`
pub fn write_placements_csv<W: Write>(w: W, placements: &[PlanePlacement]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["label", "sigma", "mu"])?;
    for p in placements {
        out.write_record([p.label.clone(), p.sigma.to_string(), p.mu.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Long-format `date,ticker,price,market_cap`, the ingestion input format.
pub fn write_price_table_csv<W: Write>(w: W, table: &PriceTable) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["date", "ticker", "price", "market_cap"])?;
    for (t, date) in table.dates.iter().enumerate() {
        for (k, ticker) in table.tickers.iter().enumerate() {
            out.write_record([
                date.to_string(),
                ticker.clone(),
                table.prices[k][t].to_string(),
                table.caps[k][t].to_string(),
            ])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `date,price`
pub fn write_index_csv<W: Write>(w: W, index: &IndexSeries) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["date", "price"])?;
    for (d, v) in index.dates.iter().zip(&index.values) {
        out.write_record([d.to_string(), v.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
