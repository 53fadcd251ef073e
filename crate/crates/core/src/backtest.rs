//! Rolling past/future backtest of subspace portfolios against an index.
//!
//! Each period estimates the geometry on its past window (caps taken on the
//! last past day), forms the portfolio at the close of the first future day
//! and marks it to market daily. `D` is recorded at the close of the last
//! future day. The first portfolio is funded with the index level on its
//! formation day; every later one with the previous holdings valued at the new
//! formation close, so no capital is injected, leaked or left idle between
//! periods.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::geometry::{estimate_geometry, MarketGeometry};
use crate::ingest::{
    partition_windows, IndexSeries, Period, PriceTable, ReturnPanel, Window, WindowPlan,
};
use crate::portfolio::{
    build_portfolio, select_constituents, Constituent, SubspacePortfolio, SubspaceSpec,
};
use crate::{Error, Result};

pub const DEFAULT_WINDOW_MONTHS: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    #[serde(flatten)]
    pub spec: SubspaceSpec,
}

impl Scenario {
    pub fn new(label: impl Into<String>, directions: Vec<usize>, threshold: f64) -> Result<Self> {
        Ok(Self {
            label: label.into(),
            spec: SubspaceSpec::new(directions, threshold)?,
        })
    }
}

/// The eleven reference scenarios: six single directions and four
/// multi-direction subspaces, with direction 1 run at two thresholds.
pub fn reference_scenarios() -> Vec<Scenario> {
    let table: [(&[usize], f64); 11] = [
        (&[1], 0.4),
        (&[1], 0.5),
        (&[2], 0.4),
        (&[3], 0.4),
        (&[4], 0.4),
        (&[5], 0.35),
        (&[6], 0.3),
        (&[1, 2, 3], 0.5),
        (&[1, 2, 3, 4], 0.5),
        (&[2, 4, 5], 0.5),
        (&[2, 4, 5, 6], 0.5),
    ];
    table
        .iter()
        .map(|(dirs, theta)| {
            let spec = SubspaceSpec {
                directions: dirs.to_vec(),
                threshold: *theta,
            };
            Scenario {
                label: format!("dir{}_t{theta:.2}", spec.direction_label()),
                spec,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub scenarios: Vec<Scenario>,
    pub window_months: u32,
    pub dimension_cap: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            scenarios: reference_scenarios(),
            window_months: DEFAULT_WINDOW_MONTHS,
            dimension_cap: crate::dimension::DEFAULT_DIMENSION_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub date: NaiveDate,
    pub portfolio_value: f64,
    pub index_value: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub id: usize,
    pub past: Window,
    pub future: Window,
    /// Capital invested at formation.
    pub capital: f64,
    /// Marked value at the close of the last future day.
    pub liquidation_value: f64,
    pub index_at_liquidation: f64,
    pub d: f64,
    pub constituents: Vec<Constituent>,
    /// Daily marked values from formation through liquidation.
    pub values: Vec<f64>,
}

impl PeriodRecord {
    pub fn is_cash(&self) -> bool {
        self.constituents.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub label: String,
    pub spec: SubspaceSpec,
    pub initial_capital: f64,
    pub final_value: f64,
    pub track: Vec<TrackPoint>,
    pub periods: Vec<PeriodRecord>,
    pub warnings: Vec<String>,
}

impl BacktestResult {
    /// Final value over initial capital, in percent.
    pub fn gain_factor_pct(&self) -> f64 {
        100.0 * self.final_value / self.initial_capital
    }

    pub fn final_d(&self) -> f64 {
        self.periods.last().map_or(1.0, |p| p.d)
    }

    pub fn d_values(&self) -> Vec<f64> {
        self.periods.iter().map(|p| p.d).collect()
    }

    pub fn average_constituents(&self) -> f64 {
        if self.periods.is_empty() {
            return 0.0;
        }
        self.periods
            .iter()
            .map(|p| p.constituents.len())
            .sum::<usize>() as f64
            / self.periods.len() as f64
    }
}

pub fn performance_ratio(portfolio_value: f64, index_value: f64) -> Result<f64> {
    if !(portfolio_value > 0.0 && portfolio_value.is_finite()) {
        return Err(Error::Accounting(format!(
            "portfolio value must be positive, got {portfolio_value}"
        )));
    }
    if !(index_value > 0.0 && index_value.is_finite()) {
        return Err(Error::Accounting(format!(
            "index value must be positive, got {index_value}"
        )));
    }
    Ok(portfolio_value / index_value)
}

/// Per-period geometries shared by every scenario.
#[derive(Debug, Clone)]
pub struct Backtester<'a> {
    table: &'a PriceTable,
    index: Vec<f64>,
    plan: WindowPlan,
    geometries: Vec<MarketGeometry>,
    dimension_cap: usize,
}

impl<'a> Backtester<'a> {
    pub fn new(
        table: &'a PriceTable,
        panel: &ReturnPanel,
        index: &IndexSeries,
        window_months: u32,
        dimension_cap: usize,
    ) -> Result<Self> {
        if table.n_assets() < 2 {
            return Err(Error::Data(format!(
                "need at least two assets, panel has {}",
                table.n_assets()
            )));
        }
        if panel.tickers != table.tickers || panel.n_obs() + 1 != table.n_dates() {
            return Err(Error::Data(
                "return panel does not match the price table".into(),
            ));
        }
        let plan = partition_windows(&table.dates, window_months)?;
        let index = index.align(&table.dates)?;
        let estimate = |p: &Period| -> Result<MarketGeometry> {
            estimate_geometry(
                panel,
                panel.window_range(&p.past),
                &table.caps_on(p.past.last),
            )
        };
        #[cfg(feature = "parallel")]
        let geometries = {
            use rayon::prelude::*;
            plan.periods
                .par_iter()
                .map(estimate)
                .collect::<Result<Vec<_>>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let geometries = plan
            .periods
            .iter()
            .map(estimate)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            table,
            index,
            plan,
            geometries,
            dimension_cap,
        })
    }

    pub fn plan(&self) -> &WindowPlan {
        &self.plan
    }

    pub fn geometries(&self) -> &[MarketGeometry] {
        &self.geometries
    }

    pub fn n_directions(&self) -> usize {
        self.table.n_assets() - 1
    }

    pub fn run(&self, scenario: &Scenario) -> Result<BacktestResult> {
        let spec = &scenario.spec;
        spec.validate_for(self.n_directions())?;
        let mut warnings = Vec::new();
        if let Some(d) = spec.directions.iter().find(|&&d| d > self.dimension_cap) {
            warnings.push(format!(
                "direction {d} lies beyond the dimension cap {}",
                self.dimension_cap
            ));
        }

        let first_day = self.plan.periods[0].future.first;
        let initial_capital = self.index[first_day];
        let mut previous: Option<SubspacePortfolio> = None;
        let mut track = Vec::new();
        let mut periods = Vec::with_capacity(self.plan.periods.len());

        for (id, (period, geometry)) in self.plan.periods.iter().zip(&self.geometries).enumerate() {
            for &(a, b) in &geometry.ties {
                if spec.directions.contains(&a) != spec.directions.contains(&b) {
                    warnings.push(format!(
                        "period {id}: directions {a} and {b} are tied; the subspace splits the tied block"
                    ));
                }
            }
            let formation_prices = self.table.prices_on(period.future.first);
            let capital = match &previous {
                None => initial_capital,
                Some(old) => old.value(&formation_prices),
            };
            let selection = select_constituents(geometry, &self.table.tickers, spec)?;
            let formed_on = self.table.dates[period.future.first];
            let portfolio =
                build_portfolio(spec, &selection, &formation_prices, capital, formed_on)?;
            if portfolio.is_cash() {
                warnings.push(format!(
                    "period {id}: no asset above threshold {} on {formed_on}; holding cash",
                    spec.threshold
                ));
            }

            let mut values = Vec::with_capacity(period.future.n_days());
            for t in period.future.days() {
                // The formation-day value is the invested capital by definition.
                let value = if t == period.future.first {
                    capital
                } else {
                    portfolio.value(&self.table.prices_on(t))
                };
                let index_value = self.index[t];
                track.push(TrackPoint {
                    date: self.table.dates[t],
                    portfolio_value: value,
                    index_value,
                    d: performance_ratio(value, index_value)?,
                });
                values.push(value);
            }
            let liquidation_value = *values.last().expect("window has at least one day");
            let index_at_liquidation = self.index[period.future.last];
            periods.push(PeriodRecord {
                id,
                past: period.past,
                future: period.future,
                capital,
                liquidation_value,
                index_at_liquidation,
                d: performance_ratio(liquidation_value, index_at_liquidation)?,
                constituents: portfolio.constituents.clone(),
                values,
            });
            previous = Some(portfolio);
        }
        let final_value = periods
            .last()
            .map_or(initial_capital, |p| p.liquidation_value);

        Ok(BacktestResult {
            label: scenario.label.clone(),
            spec: spec.clone(),
            initial_capital,
            final_value,
            track,
            periods,
            warnings,
        })
    }

    /// Runs every scenario; results come back in input order.
    pub fn run_all(&self, scenarios: &[Scenario]) -> Result<Vec<BacktestResult>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            scenarios.par_iter().map(|s| self.run(s)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            scenarios.iter().map(|s| self.run(s)).collect()
        }
    }
}

pub fn run_backtest(
    table: &PriceTable,
    panel: &ReturnPanel,
    index: &IndexSeries,
    config: &BacktestConfig,
    scenario: &Scenario,
) -> Result<BacktestResult> {
    Backtester::new(
        table,
        panel,
        index,
        config.window_months,
        config.dimension_cap,
    )?
    .run(scenario)
}

pub fn scenario_suite(
    table: &PriceTable,
    panel: &ReturnPanel,
    index: &IndexSeries,
    config: &BacktestConfig,
) -> Result<Vec<BacktestResult>> {
    if config.scenarios.is_empty() {
        return Err(Error::Config("scenario list is empty".into()));
    }
    Backtester::new(
        table,
        panel,
        index,
        config.window_months,
        config.dimension_cap,
    )?
    .run_all(&config.scenarios)
}
