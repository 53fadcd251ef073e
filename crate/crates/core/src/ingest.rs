//! Price and capitalization ingestion, log returns, and calendar windows.
//!
//! Input files are long-format CSV, one row per `(date, ticker)`:
//!
//! ```text
//! date,ticker,price,market_cap
//! 1990-01-02,AA,61.25,5310000000
//! ```
//!
//! The benchmark index lives in a separate `date,price` file. Prices are taken
//! as already adjusted for splits and dividends.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
}

/// Aligned N x (T+1) table of prices and market capitalizations.
///
/// Rows are assets (sorted by ticker), columns are trading dates.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub tickers: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<Vec<f64>>,
    pub caps: Vec<Vec<f64>>,
}

impl PriceTable {
    pub fn new(
        tickers: Vec<String>,
        dates: Vec<NaiveDate>,
        prices: Vec<Vec<f64>>,
        caps: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if tickers.len() != prices.len() || tickers.len() != caps.len() {
            return Err(Error::Data(format!(
                "{} tickers but {} price rows and {} cap rows",
                tickers.len(),
                prices.len(),
                caps.len()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data("dates must be strictly increasing".into()));
        }
        for (k, ticker) in tickers.iter().enumerate() {
            if prices[k].len() != dates.len() || caps[k].len() != dates.len() {
                return Err(Error::Data(format!(
                    "`{ticker}` does not cover all {} dates",
                    dates.len()
                )));
            }
            if let Some(t) = prices[k].iter().position(|p| !(p.is_finite() && *p > 0.0)) {
                return Err(Error::Data(format!(
                    "`{ticker}` has non-positive price {} on {}",
                    prices[k][t], dates[t]
                )));
            }
            if let Some(t) = caps[k].iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
                return Err(Error::Data(format!(
                    "`{ticker}` has negative market cap {} on {}",
                    caps[k][t], dates[t]
                )));
            }
        }
        Ok(Self {
            tickers,
            dates,
            prices,
            caps,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    /// Prices of every asset on calendar day `t`.
    pub fn prices_on(&self, t: usize) -> Vec<f64> {
        self.prices.iter().map(|row| row[t]).collect()
    }

    pub fn caps_on(&self, t: usize) -> Vec<f64> {
        self.caps.iter().map(|row| row[t]).collect()
    }

    /// Multiplies every price by `factor`. Caps are untouched.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.prices {
            for p in row.iter_mut() {
                *p *= factor;
            }
        }
        out
    }
}

/// A loaded table together with the tickers that failed the completeness rule.
#[derive(Debug, Clone)]
pub struct LoadedTable {
    pub table: PriceTable,
    pub dropped: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    date: String,
    ticker: String,
    price: f64,
    market_cap: f64,
}

#[derive(Debug, Deserialize)]
struct IndexRow {
    date: String,
    price: f64,
}

pub fn load_price_table(path: impl AsRef<Path>, format: InputFormat) -> Result<LoadedTable> {
    let path = path.as_ref();
    match format {
        InputFormat::Csv => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            read_price_table(file, &path.display().to_string())
        }
    }
}

fn parse_date(raw: &str, source_name: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw, DATE_FORMAT).map_err(|e| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: format!("bad date `{raw}`: {e}"),
    })
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn check_header(
    rdr: &mut csv::Reader<impl Read>,
    expected: &[&str],
    source_name: &str,
) -> Result<()> {
    let header = rdr.headers()?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

/// Parses long-format price rows and aligns them on the union of all dates.
///
/// Assets missing any date are dropped and listed in [`LoadedTable::dropped`].
pub fn read_price_table<R: Read>(reader: R, source_name: &str) -> Result<LoadedTable> {
    let mut rdr = csv_reader(reader);
    check_header(
        &mut rdr,
        &["date", "ticker", "price", "market_cap"],
        source_name,
    )?;

    let mut cells: BTreeMap<String, BTreeMap<NaiveDate, (f64, f64)>> = BTreeMap::new();
    let mut calendar = BTreeSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row: PriceRow = record.deserialize(None).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: e.to_string(),
        })?;
        let date = parse_date(&row.date, source_name, line)?;
        if !(row.price.is_finite() && row.price > 0.0) {
            return Err(Error::Data(format!(
                "{source_name}: line {line}: non-positive price {} for `{}`",
                row.price, row.ticker
            )));
        }
        if !(row.market_cap.is_finite() && row.market_cap >= 0.0) {
            return Err(Error::Data(format!(
                "{source_name}: line {line}: negative market cap {} for `{}`",
                row.market_cap, row.ticker
            )));
        }
        let series = cells.entry(row.ticker.clone()).or_default();
        if series.insert(date, (row.price, row.market_cap)).is_some() {
            return Err(Error::Data(format!(
                "{source_name}: line {line}: duplicate row for `{}` on {date}",
                row.ticker
            )));
        }
        calendar.insert(date);
    }

    let dates: Vec<NaiveDate> = calendar.into_iter().collect();
    let mut tickers = Vec::new();
    let mut prices = Vec::new();
    let mut caps = Vec::new();
    let mut dropped = Vec::new();
    for (ticker, series) in cells {
        if series.len() != dates.len() {
            dropped.push(ticker);
            continue;
        }
        let (p, c): (Vec<f64>, Vec<f64>) = series.into_values().unzip();
        tickers.push(ticker);
        prices.push(p);
        caps.push(c);
    }
    if tickers.is_empty() {
        return Err(Error::Data(format!(
            "{source_name}: no asset covers the full set of dates (empty intersection)"
        )));
    }
    let table = PriceTable::new(tickers, dates, prices, caps)?;
    Ok(LoadedTable { table, dropped })
}

/// Benchmark index levels by date.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl IndexSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Data(
                "index dates and values differ in length".into(),
            ));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data(
                "index dates must be strictly increasing".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Data(format!("non-positive index level {v}")));
        }
        Ok(Self { dates, values })
    }

    /// Index levels on exactly `calendar`; every calendar date must be present.
    pub fn align(&self, calendar: &[NaiveDate]) -> Result<Vec<f64>> {
        let lookup: BTreeMap<NaiveDate, f64> = self
            .dates
            .iter()
            .copied()
            .zip(self.values.iter().copied())
            .collect();
        calendar
            .iter()
            .map(|d| {
                lookup
                    .get(d)
                    .copied()
                    .ok_or_else(|| Error::Data(format!("index series has no level on {d}")))
            })
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dates: self.dates.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

pub fn load_index_series(path: impl AsRef<Path>) -> Result<IndexSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_index_series(file, &path.display().to_string())
}

pub fn read_index_series<R: Read>(reader: R, source_name: &str) -> Result<IndexSeries> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &["date", "price"], source_name)?;
    let mut levels = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row: IndexRow = record.deserialize(None).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: e.to_string(),
        })?;
        let date = parse_date(&row.date, source_name, line)?;
        if !(row.price.is_finite() && row.price > 0.0) {
            return Err(Error::Data(format!(
                "{source_name}: line {line}: non-positive index level {}",
                row.price
            )));
        }
        if levels.insert(date, row.price).is_some() {
            return Err(Error::Data(format!(
                "{source_name}: line {line}: duplicate index level on {date}"
            )));
        }
    }
    let (dates, values) = levels.into_iter().unzip();
    IndexSeries::new(dates, values)
}

/// N x T log returns. Return `t` runs from price date `t` to `t + 1` and is
/// stamped with the later date.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub tickers: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<Vec<f64>>,
}

impl ReturnPanel {
    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    /// Returns stamped inside `window` (indices refer to the price calendar).
    pub fn window_range(&self, window: &Window) -> Range<usize> {
        window.first.max(1) - 1..window.last.min(self.n_obs())
    }

    /// Borrowed rows restricted to `range`.
    pub fn rows(&self, range: Range<usize>) -> Vec<&[f64]> {
        self.returns.iter().map(|r| &r[range.clone()]).collect()
    }
}

pub fn compute_log_returns(table: &PriceTable) -> ReturnPanel {
    let returns = table
        .prices
        .iter()
        .map(|row| row.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
        .collect();
    ReturnPanel {
        tickers: table.tickers.clone(),
        dates: table.dates.iter().skip(1).copied().collect(),
        returns,
    }
}

/// A contiguous run of trading days, `first..=last` on the price calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub first: usize,
    pub last: usize,
}

impl Window {
    pub fn n_days(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn days(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub past: Window,
    pub future: Window,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlan {
    pub periods: Vec<Period>,
}

/// Splits the calendar into civil blocks of `months` months aligned to
/// January (for six months: Jan-Jun and Jul-Dec). Only blocks containing at
/// least one trading day are returned.
pub fn calendar_blocks(dates: &[NaiveDate], months: u32) -> Result<Vec<Window>> {
    if months == 0 || 12 % months != 0 {
        return Err(Error::Config(format!(
            "window length must divide the year evenly, got {months} months"
        )));
    }
    if dates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Data("calendar must be strictly increasing".into()));
    }
    let key = |d: &NaiveDate| (d.year() as i64 * 12 + d.month0() as i64).div_euclid(months as i64);
    let mut blocks: Vec<Window> = Vec::new();
    for (t, d) in dates.iter().enumerate() {
        match blocks.last_mut() {
            Some(b) if key(&b.start) == key(d) => {
                b.end = *d;
                b.last = t;
            }
            _ => blocks.push(Window {
                start: *d,
                end: *d,
                first: t,
                last: t,
            }),
        }
    }
    Ok(blocks)
}

/// Rolling past/future plan: period `i` estimates on block `i` and holds
/// through block `i + 1`.
pub fn partition_windows(dates: &[NaiveDate], months: u32) -> Result<WindowPlan> {
    let blocks = calendar_blocks(dates, months)?;
    if blocks.len() < 2 {
        return Err(Error::Config(format!(
            "calendar spans {} window(s) of {months} months; need at least two",
            blocks.len()
        )));
    }
    let periods = blocks
        .windows(2)
        .map(|w| Period {
            past: w[0],
            future: w[1],
        })
        .collect();
    Ok(WindowPlan { periods })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FORMAT).unwrap()
    }

    fn weekdays(from: &str, to: &str) -> Vec<NaiveDate> {
        let (mut cur, end) = (d(from), d(to));
        let mut out = Vec::new();
        while cur <= end {
            if cur.weekday().num_days_from_monday() < 5 {
                out.push(cur);
            }
            cur = cur.succ_opt().unwrap();
        }
        out
    }

    #[test]
    fn complete_table_passes_through() {
        let csv = "date,ticker,price,market_cap\n\
                   2020-01-02,A,10,100\n2020-01-02,B,20,200\n\
                   2020-01-03,A,11,110\n2020-01-03,B,21,210\n\
                   2020-01-06,A,12,120\n2020-01-06,B,22,220\n";
        let loaded = read_price_table(csv.as_bytes(), "mem").unwrap();
        assert!(loaded.dropped.is_empty());
        assert_eq!(loaded.table.n_assets(), 2);
        assert_eq!(loaded.table.n_dates(), 3);
        assert_eq!(loaded.table.prices[1], vec![20.0, 21.0, 22.0]);
        assert_eq!(loaded.table.caps[0], vec![100.0, 110.0, 120.0]);
    }

    #[test]
    fn incomplete_ticker_is_dropped() {
        let csv = "date,ticker,price,market_cap\n\
                   2020-01-02,A,10,1\n2020-01-02,B,20,1\n\
                   2020-01-03,A,11,1\n\
                   2020-01-06,A,12,1\n2020-01-06,B,22,1\n";
        let loaded = read_price_table(csv.as_bytes(), "mem").unwrap();
        assert_eq!(loaded.dropped, vec!["B".to_string()]);
        assert_eq!(loaded.table.tickers, vec!["A".to_string()]);
    }

    #[test]
    fn negative_price_names_the_row() {
        let csv = "date,ticker,price,market_cap\n2020-01-02,A,10,1\n2020-01-03,A,-5.0,1\n";
        let err = read_price_table(csv.as_bytes(), "mem").unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "date,ticker,price,market_cap\n2020-01-02,A,10,1\n2020-01-03,A,abc,1\n";
        match read_price_table(csv.as_bytes(), "mem").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let csv = "date,ticker,price,market_cap\n2020-13-02,A,10,1\n";
        match read_price_table(csv.as_bytes(), "mem").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn wrong_header_and_empty_intersection() {
        let err = read_price_table("a,b\n1,2\n".as_bytes(), "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));

        let csv = "date,ticker,price,market_cap\n2020-01-02,A,10,1\n2020-01-03,B,11,1\n";
        let err = read_price_table(csv.as_bytes(), "mem").unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn duplicate_cell_is_rejected() {
        let csv = "date,ticker,price,market_cap\n2020-01-02,A,10,1\n2020-01-02,A,11,1\n";
        assert!(matches!(
            read_price_table(csv.as_bytes(), "mem").unwrap_err(),
            Error::Data(_)
        ));
    }

    #[test]
    fn log_return_examples() {
        let dates = vec![d("2020-01-02"), d("2020-01-03")];
        let table = PriceTable::new(
            vec!["E".into(), "C".into(), "T".into()],
            dates,
            vec![
                vec![1.0, std::f64::consts::E],
                vec![5.0, 5.0],
                vec![100.0, 110.0],
            ],
            vec![vec![1.0; 2]; 3],
        )
        .unwrap();
        let panel = compute_log_returns(&table);
        assert_eq!(panel.n_obs(), 1);
        assert_eq!(panel.dates, vec![d("2020-01-03")]);
        assert!((panel.returns[0][0] - 1.0).abs() < 1e-15);
        assert_eq!(panel.returns[1][0], 0.0);
        assert!((panel.returns[2][0] - 0.0953101798043249).abs() < 1e-15);
    }

    #[test]
    fn two_years_give_three_periods() {
        let cal = weekdays("1990-01-02", "1991-12-31");
        let plan = partition_windows(&cal, 6).unwrap();
        assert_eq!(plan.periods.len(), 3);
        assert_eq!(plan.periods[0].past.start, d("1990-01-02"));
        assert_eq!(plan.periods[0].past.end, d("1990-06-29"));
        assert_eq!(plan.periods[0].future.start, d("1990-07-02"));
        assert_eq!(plan.periods[2].future.end, d("1991-12-31"));
    }

    #[test]
    fn four_months_is_too_short() {
        let cal = weekdays("1990-01-02", "1990-04-30");
        assert!(partition_windows(&cal, 6).unwrap_err().is_config());
    }

    #[test]
    fn bad_window_length() {
        let cal = weekdays("1990-01-02", "1992-04-30");
        assert!(partition_windows(&cal, 5).unwrap_err().is_config());
        assert!(partition_windows(&cal, 0).unwrap_err().is_config());
        assert_eq!(partition_windows(&cal, 12).unwrap().periods.len(), 2);
    }

    #[test]
    fn long_calendar_period_count_matches_date_arithmetic() {
        let cal = weekdays("1990-01-01", "2008-12-31");
        // Oracle: distinct (year, half-year) labels minus the estimation-only first block.
        let halves: BTreeSet<(i32, bool)> = cal.iter().map(|d| (d.year(), d.month() > 6)).collect();
        let expected = halves.len() - 1;
        assert_eq!(expected, 37);
        assert_eq!(partition_windows(&cal, 6).unwrap().periods.len(), expected);
    }

    #[test]
    fn window_return_range() {
        let cal = weekdays("1990-01-02", "1990-12-31");
        let n = cal.len();
        let table = PriceTable::new(
            vec!["A".into()],
            cal.clone(),
            vec![(0..n).map(|i| 1.0 + i as f64).collect()],
            vec![vec![1.0; n]],
        )
        .unwrap();
        let panel = compute_log_returns(&table);
        let plan = partition_windows(&cal, 6).unwrap();
        let past = panel.window_range(&plan.periods[0].past);
        let fut = panel.window_range(&plan.periods[0].future);
        assert_eq!(past.start, 0);
        assert_eq!(past.end, fut.start);
        assert_eq!(fut.end, panel.n_obs());
        assert!(panel.dates[past.clone()]
            .iter()
            .all(|x| *x <= plan.periods[0].past.end));
        assert!(panel.dates[fut]
            .iter()
            .all(|x| *x >= plan.periods[0].future.start));
    }

    #[test]
    fn index_alignment() {
        let idx = read_index_series(
            "date,price\n2020-01-02,100\n2020-01-03,101\n2020-01-06,102\n".as_bytes(),
            "mem",
        )
        .unwrap();
        assert_eq!(idx.align(&[d("2020-01-03")]).unwrap(), vec![101.0]);
        assert!(idx.align(&[d("2020-01-04")]).is_err());
        assert!(read_index_series("date,price\n2020-01-02,0\n".as_bytes(), "mem").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn table(prices: Vec<Vec<f64>>) -> PriceTable {
            let n = prices[0].len();
            let cal = weekdays("2000-01-03", "2010-01-01")[..n].to_vec();
            let k = prices.len();
            PriceTable::new(
                (0..k).map(|i| format!("T{i}")).collect(),
                cal,
                prices,
                vec![vec![1.0; n]; k],
            )
            .unwrap()
        }

        proptest! {
            #[test]
            fn cumulative_returns_recover_price_ratios(
                rows in prop::collection::vec(prop::collection::vec(0.01f64..1e4, 2..60), 1..5)
            ) {
                let len = rows.iter().map(Vec::len).min().unwrap();
                let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r[..len].to_vec()).collect();
                let t = table(rows.clone());
                let panel = compute_log_returns(&t);
                for (k, r) in panel.returns.iter().enumerate() {
                    let mut cum = 0.0;
                    for (s, x) in r.iter().enumerate() {
                        cum += x;
                        let ratio = rows[k][s + 1] / rows[k][0];
                        prop_assert!((cum.exp() - ratio).abs() <= 1e-12 * ratio.max(1.0) * (s + 1) as f64);
                    }
                }
            }

            #[test]
            fn dropping_an_asset_keeps_other_returns(
                rows in prop::collection::vec(prop::collection::vec(0.01f64..1e4, 12), 2..6),
                drop in 0usize..6,
            ) {
                let full = compute_log_returns(&table(rows.clone()));
                let drop = drop % rows.len();
                let mut kept = rows.clone();
                kept.remove(drop);
                let reduced = compute_log_returns(&table(kept));
                let mut expect = full.returns.clone();
                expect.remove(drop);
                prop_assert_eq!(reduced.returns, expect);
            }

            #[test]
            fn future_windows_tile_the_calendar(start in 0usize..400, len in 260usize..1500) {
                let cal = weekdays("1995-01-02", "2003-12-31");
                let len = len.min(cal.len() - start);
                let cal = &cal[start..start + len];
                let Ok(plan) = partition_windows(cal, 6) else { return Ok(()); };
                let first_past = plan.periods[0].past;
                prop_assert_eq!(first_past.first, 0);
                let mut next = first_past.last + 1;
                for p in &plan.periods {
                    prop_assert_eq!(p.future.first, next);
                    next = p.future.last + 1;
                }
                prop_assert_eq!(next, cal.len());
                for w in plan.periods.windows(2) {
                    prop_assert_eq!(w[1].past, w[0].future);
                }
            }
        }
    }
}
