//! The pipeline stages behind each subcommand.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use market_geometry::backtest::{BacktestResult, Backtester};
use market_geometry::dimension::{effective_dimension, surrogate_spectrum, SpectrumBand};
use market_geometry::frontier::{
    asset_moments, efficient_frontier, place_portfolios, place_series, FrontierCurve,
    PlanePlacement,
};
use market_geometry::geometry::{estimate_geometry, MarketGeometry};
use market_geometry::ingest::{
    compute_log_returns, load_index_series, load_price_table, partition_windows, IndexSeries,
    InputFormat, PriceTable, ReturnPanel, WindowPlan,
};
use market_geometry::report::{self, DimensionSummary, ScenarioSummary, DIMENSION_RULE};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub struct Inputs {
    pub table: PriceTable,
    pub dropped: Vec<String>,
    pub panel: ReturnPanel,
    pub index: Option<IndexSeries>,
    pub plan: WindowPlan,
}

#[derive(Debug, Serialize)]
struct InputReport<'a> {
    panel: &'a Path,
    index: Option<&'a Path>,
    assets: usize,
    tickers: &'a [String],
    dropped: &'a [String],
    first_date: NaiveDate,
    last_date: NaiveDate,
    trading_days: usize,
    periods: usize,
}

pub fn load_inputs(config: &RunConfig, need_index: bool) -> Result<Inputs> {
    let loaded = load_price_table(&config.panel, InputFormat::Csv)?;
    let index = match (&config.index, need_index) {
        (Some(p), _) => Some(load_index_series(p)?),
        (None, true) => {
            config.require_index()?;
            None
        }
        (None, false) => None,
    };
    let panel = compute_log_returns(&loaded.table);
    let plan = partition_windows(&loaded.table.dates, config.window_months)?;
    Ok(Inputs {
        table: loaded.table,
        dropped: loaded.dropped,
        panel,
        index,
        plan,
    })
}

/// Creates the run directory. An existing directory is only accepted if it
/// is empty, so runs never mix outputs.
pub fn prepare_output(requested: Option<&Path>) -> Result<PathBuf> {
    let dir = match requested {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(
            chrono::Local::now()
                .format("mgeo-%Y%m%d-%H%M%S")
                .to_string(),
        ),
    };
    if dir.exists() {
        let mut entries = fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
        if entries.next().is_some() {
            return Err(CliError::Config(format!(
                "output directory {} is not empty",
                dir.display()
            )));
        }
    } else {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    }
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> market_geometry::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    finish(w, path)
}

pub fn write_run_header(dir: &Path, config: &RunConfig, inputs: &Inputs) -> Result<()> {
    write_with(&dir.join("config.json"), |w| report::write_json(w, config))?;
    let t = &inputs.table;
    let header = InputReport {
        panel: &config.panel,
        index: config.index.as_deref(),
        assets: t.n_assets(),
        tickers: &t.tickers,
        dropped: &inputs.dropped,
        first_date: t.dates[0],
        last_date: t.dates[t.n_dates() - 1],
        trading_days: t.n_dates(),
        periods: inputs.plan.periods.len(),
    };
    write_with(&dir.join("inputs.json"), |w| report::write_json(w, &header))
}

pub struct WindowAnalysis {
    pub id: usize,
    pub geometry: MarketGeometry,
    pub band: Option<SpectrumBand>,
    pub dimension: Option<usize>,
}

/// Geometry of every past window, with cap weights from its last day.
pub fn period_geometries(inputs: &Inputs) -> Result<Vec<MarketGeometry>> {
    let Inputs {
        table, panel, plan, ..
    } = inputs;
    Ok(plan
        .periods
        .par_iter()
        .map(|p| {
            estimate_geometry(
                panel,
                panel.window_range(&p.past),
                &table.caps_on(p.past.last),
            )
        })
        .collect::<market_geometry::Result<Vec<_>>>()?)
}

pub fn analyze(
    config: &RunConfig,
    inputs: &Inputs,
    geometries: Vec<MarketGeometry>,
) -> Result<Vec<WindowAnalysis>> {
    let Inputs {
        table, panel, plan, ..
    } = inputs;
    let mut out = Vec::with_capacity(geometries.len());
    for (id, geometry) in geometries.into_iter().enumerate() {
        let (band, dimension) = if config.estimate_dimension {
            let past = &plan.periods[id].past;
            let band = surrogate_spectrum(
                panel,
                panel.window_range(past),
                &table.caps_on(past.last),
                &config.surrogate_settings(id),
            )?;
            let d = effective_dimension(&geometry.eigenvalues, &band, config.dimension_cap)?;
            (Some(band), Some(d))
        } else {
            (None, None)
        };
        out.push(WindowAnalysis {
            id,
            geometry,
            band,
            dimension,
        });
    }
    Ok(out)
}

pub fn write_analysis(
    dir: &Path,
    config: &RunConfig,
    inputs: &Inputs,
    windows: &[WindowAnalysis],
) -> Result<()> {
    let spectra: Vec<(usize, &[f64])> = windows
        .iter()
        .map(|w| (w.id, w.geometry.eigenvalues.as_slice()))
        .collect();
    write_with(&dir.join("spectrum.csv"), |w| {
        report::write_spectrum_csv(w, &spectra)
    })?;
    if config.write_eigen_coords {
        let geoms: Vec<(usize, &MarketGeometry)> =
            windows.iter().map(|w| (w.id, &w.geometry)).collect();
        write_with(&dir.join("eigen_coords.csv"), |w| {
            report::write_eigen_coords_csv(w, &geoms, &inputs.table.tickers)
        })?;
    }
    if !config.estimate_dimension {
        return Ok(());
    }
    let mut summaries = Vec::with_capacity(windows.len());
    for w in windows {
        let (Some(band), Some(d)) = (&w.band, w.dimension) else {
            continue;
        };
        let past = &inputs.plan.periods[w.id].past;
        write_with(
            &dir.join(format!("surrogates/window_{:03}.csv", w.id)),
            |out| report::write_surrogates_csv(out, band),
        )?;
        summaries.push(DimensionSummary {
            window_id: w.id,
            start: past.start,
            end: past.end,
            method: band.method,
            replicas: band.replicas,
            quantile: band.quantile,
            seed: band.seed,
            rule: DIMENSION_RULE.to_string(),
            market: w.geometry.eigenvalues.clone(),
            envelope: band.upper.clone(),
            dimension: d,
            cap: config.dimension_cap,
        });
    }
    write_with(&dir.join("dimension.json"), |w| {
        report::write_json(w, &summaries)
    })
}

pub fn backtester<'a>(config: &RunConfig, inputs: &'a Inputs) -> Result<Backtester<'a>> {
    let index = inputs
        .index
        .as_ref()
        .ok_or_else(|| CliError::Config("`index` path is required for backtests".into()))?;
    Ok(Backtester::new(
        &inputs.table,
        &inputs.panel,
        index,
        config.window_months,
        config.dimension_cap,
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioIndexEntry {
    pub label: String,
    pub directions: Vec<usize>,
    pub threshold: f64,
    pub gain_factor_pct: f64,
    pub final_d: f64,
    pub average_constituents: f64,
}

pub fn write_backtests(dir: &Path, dates: &[NaiveDate], results: &[BacktestResult]) -> Result<()> {
    let mut entries = Vec::with_capacity(results.len());
    for r in results {
        let sdir = dir.join(&r.label);
        write_with(&sdir.join("track.csv"), |w| report::write_track_csv(w, r))?;
        write_with(&sdir.join("composition.csv"), |w| {
            report::write_composition_csv(w, r)
        })?;
        let summary = ScenarioSummary::from_result(r, dates);
        write_with(&sdir.join("summary.json"), |w| {
            report::write_json(w, &summary)
        })?;
        entries.push(ScenarioIndexEntry {
            label: r.label.clone(),
            directions: r.spec.directions.clone(),
            threshold: r.spec.threshold,
            gain_factor_pct: summary.gain_factor_pct,
            final_d: summary.final_d,
            average_constituents: summary.average_constituents,
        });
    }
    write_with(&dir.join("scenarios.json"), |w| {
        report::write_json(w, &entries)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierReport {
    pub assets: usize,
    pub points: usize,
    pub ridge: f64,
    pub notes: Vec<String>,
    pub return_convention: &'static str,
    pub placement_warnings: Vec<String>,
}

const RETURN_CONVENTION: &str = "daily log returns; mu is the mean and sigma the sample standard \
deviation; placements average per-period statistics over the holding periods";

pub fn frontier(config: &RunConfig, inputs: &Inputs) -> Result<FrontierCurve> {
    let panel = &inputs.panel;
    let m = asset_moments(panel, 0..panel.n_obs())?;
    Ok(efficient_frontier(
        &m.mean,
        &m.covariance,
        config.frontier_points,
    )?)
}

pub fn write_frontier(
    dir: &Path,
    tickers: &[String],
    curve: &FrontierCurve,
    placements: &[PlanePlacement],
) -> Result<()> {
    write_with(&dir.join("frontier.csv"), |w| {
        report::write_frontier_csv(w, curve, tickers)
    })?;
    write_with(&dir.join("placements.csv"), |w| {
        report::write_placements_csv(w, placements)
    })?;
    let meta = FrontierReport {
        assets: tickers.len(),
        points: curve.points.len(),
        ridge: curve.ridge,
        notes: curve.notes.clone(),
        return_convention: RETURN_CONVENTION,
        placement_warnings: placements.iter().flat_map(|p| p.warnings.clone()).collect(),
    };
    write_with(&dir.join("frontier.json"), |w| report::write_json(w, &meta))
}

pub fn placements_in_run(results: &[BacktestResult]) -> Result<Vec<PlanePlacement>> {
    Ok(place_portfolios(results)?)
}

#[derive(Debug, Deserialize)]
struct TrackRow {
    date: NaiveDate,
    portfolio_value: f64,
}

/// Rebuilds placements from a previous backtest output directory (either the
/// run directory or its `backtest/` child).
pub fn placements_from_dir(dir: &Path) -> Result<Vec<PlanePlacement>> {
    let nested = dir.join("backtest");
    let root = if nested.join("scenarios.json").is_file() {
        nested
    } else {
        dir.to_path_buf()
    };
    let manifest = root.join("scenarios.json");
    if !manifest.is_file() {
        return Err(CliError::Dependency(format!(
            "no backtest outputs in {} (expected scenarios.json)",
            dir.display()
        )));
    }
    let entries: Vec<ScenarioIndexEntry> = read_json(&manifest)?;
    let mut placements = Vec::with_capacity(entries.len());
    for e in entries {
        let sdir = root.join(&e.label);
        let summary: ScenarioSummary = read_json(&sdir.join("summary.json"))?;
        let track_path = sdir.join("track.csv");
        let file = File::open(&track_path)
            .map_err(|err| CliError::Dependency(format!("{}: {err}", track_path.display())))?;
        let mut rows = Vec::new();
        for row in csv::Reader::from_reader(file).deserialize() {
            let row: TrackRow = row.map_err(market_geometry::Error::from)?;
            rows.push(row);
        }
        let series: Vec<Vec<f64>> = summary
            .periods
            .iter()
            .map(|p| {
                rows.iter()
                    .filter(|r| r.date >= p.formed_on && r.date <= p.liquidated_on)
                    .map(|r| r.portfolio_value)
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
        placements.push(place_series(&e.label, &refs)?);
    }
    Ok(placements)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Dependency(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Dependency(format!("{}: {e}", path.display())))
}
