//! Browser bindings for three interactive views of the pipeline: the embedded
//! market with its surrogate envelope, subspace selection, and the long-only
//! frontier against random portfolios.
//!
//! Every binding returns a JSON string. The `*_json` functions hold the logic
//! and run natively as well.

use market_geometry::dimension::{
    effective_dimension, surrogate_spectrum_from_rows, SurrogateMethod, SurrogateSettings,
    DEFAULT_DIMENSION_CAP,
};
use market_geometry::frontier::{efficient_frontier, moments_from_rows};
use market_geometry::geometry::{
    center_and_tensor, correlation_from_rows, distance_matrix, embed, MarketGeometry,
};
use market_geometry::portfolio::{projection_fraction, select_constituents, SubspaceSpec};
use market_geometry::synthetic::{factor_returns, FactorPanelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_ASSETS: usize = 150;
const MAX_OBS: usize = 2000;

struct Market {
    tickers: Vec<String>,
    rows: Vec<Vec<f64>>,
    caps: Vec<f64>,
    geometry: MarketGeometry,
}

fn market(n_assets: usize, n_obs: usize, n_factors: usize, seed: u64) -> Result<Market, String> {
    if !(3..=MAX_ASSETS).contains(&n_assets) {
        return Err(format!("assets must be between 3 and {MAX_ASSETS}"));
    }
    if !(10..=MAX_OBS).contains(&n_obs) {
        return Err(format!("observations must be between 10 and {MAX_OBS}"));
    }
    let rows = factor_returns(&FactorPanelSpec {
        n_assets,
        n_obs,
        n_factors,
        seed,
        ..Default::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xcafe);
    let caps: Vec<f64> = (0..n_assets)
        .map(|_| rng.random_range(1.0f64..50.0).powi(2))
        .collect();
    let tickers: Vec<String> = (0..n_assets).map(|k| format!("S{k:03}")).collect();
    let borrowed: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let corr = correlation_from_rows(&borrowed, &tickers).map_err(|e| e.to_string())?;
    let coords = embed(&distance_matrix(&corr))
        .map_err(|e| e.to_string())?
        .coords;
    let geometry = center_and_tensor(&coords, &caps).map_err(|e| e.to_string())?;
    Ok(Market {
        tickers,
        rows,
        caps,
        geometry,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SpectrumView {
    tickers: Vec<String>,
    caps: Vec<f64>,
    /// First three eigen-coordinates of every asset.
    coords: Vec<[f64; 3]>,
    eigenvalues: Vec<f64>,
    envelope: Vec<f64>,
    dimension: usize,
}

/// Embeds a synthetic factor market and compares its spectrum with a
/// time-permutation envelope.
pub fn spectrum_json(
    n_assets: usize,
    n_obs: usize,
    n_factors: usize,
    replicas: usize,
    seed: u64,
) -> Result<String, String> {
    let m = market(n_assets, n_obs, n_factors, seed)?;
    let settings = SurrogateSettings {
        method: SurrogateMethod::TimePermute,
        replicas,
        seed,
        ..Default::default()
    };
    let borrowed: Vec<&[f64]> = m.rows.iter().map(Vec::as_slice).collect();
    let band = surrogate_spectrum_from_rows(&borrowed, &m.tickers, &m.caps, &settings)
        .map_err(|e| e.to_string())?;
    let dimension = effective_dimension(&m.geometry.eigenvalues, &band, DEFAULT_DIMENSION_CAP)
        .map_err(|e| e.to_string())?;
    let ec = &m.geometry.eigen_coords;
    let axis = |k: usize, a: usize| if a < ec.ncols() { ec[(k, a)] } else { 0.0 };
    to_json(&SpectrumView {
        coords: (0..n_assets)
            .map(|k| [axis(k, 0), axis(k, 1), axis(k, 2)])
            .collect(),
        tickers: m.tickers,
        caps: m.caps,
        eigenvalues: m.geometry.eigenvalues,
        envelope: band.upper,
        dimension,
    })
}

#[derive(Serialize)]
struct AssetView {
    ticker: String,
    f: Option<f64>,
    selected: bool,
    weight: f64,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct SelectionView {
    directions: Vec<usize>,
    threshold: f64,
    selected: usize,
    assets: Vec<AssetView>,
}

fn parse_directions(text: &str) -> Result<Vec<usize>, String> {
    text.split(|c: char| c == ',' || c == '-' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| format!("bad direction {s:?}"))
        })
        .collect()
}

/// Projection fractions for a subspace such as `"2,4,5"` and the resulting
/// f-weighted portfolio.
pub fn selection_json(
    n_assets: usize,
    n_obs: usize,
    n_factors: usize,
    seed: u64,
    directions: &str,
    threshold: f64,
) -> Result<String, String> {
    let m = market(n_assets, n_obs, n_factors, seed)?;
    let spec =
        SubspaceSpec::new(parse_directions(directions)?, threshold).map_err(|e| e.to_string())?;
    let picks = select_constituents(&m.geometry, &m.tickers, &spec).map_err(|e| e.to_string())?;
    let total: f64 = picks.iter().map(|s| s.f).sum();
    let ec = &m.geometry.eigen_coords;
    let d0 = spec.directions[0] - 1;
    let d1 = spec
        .directions
        .get(1)
        .map_or(if d0 == 0 { 1 } else { 0 }, |d| d - 1);
    let assets = (0..n_assets)
        .map(|k| {
            let pick = picks.iter().find(|s| s.asset == k);
            AssetView {
                ticker: m.tickers[k].clone(),
                f: projection_fraction(&m.geometry, k, &spec).ok(),
                selected: pick.is_some(),
                weight: pick.map_or(0.0, |s| s.f / total),
                x: ec[(k, d0)],
                y: if d1 < ec.ncols() { ec[(k, d1)] } else { 0.0 },
            }
        })
        .collect();
    to_json(&SelectionView {
        directions: spec.directions,
        threshold,
        selected: picks.len(),
        assets,
    })
}

#[derive(Serialize)]
struct FrontierView {
    frontier: Vec<[f64; 2]>,
    assets: Vec<[f64; 2]>,
    samples: Vec<[f64; 2]>,
}

/// Long-only frontier of a synthetic universe, with random simplex portfolios
/// for comparison. Points are `[sigma, mu]` in daily units.
pub fn frontier_json(
    n_assets: usize,
    n_obs: usize,
    n_points: usize,
    samples: usize,
    seed: u64,
) -> Result<String, String> {
    if !(2..=30).contains(&n_assets) {
        return Err("frontier demo takes 2 to 30 assets".into());
    }
    let rows = factor_returns(&FactorPanelSpec {
        n_assets,
        n_obs,
        n_factors: 2,
        drift: 0.0,
        seed,
        ..Default::default()
    });
    // Spread the means so the frontier has some height.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf00d);
    let rows: Vec<Vec<f64>> = rows
        .into_iter()
        .map(|r| {
            let drift = rng.random_range(-0.0005..0.0015);
            r.into_iter().map(|x| x + drift).collect()
        })
        .collect();
    let tickers: Vec<String> = (0..n_assets).map(|k| format!("S{k:03}")).collect();
    let borrowed: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let m = moments_from_rows(&borrowed, &tickers).map_err(|e| e.to_string())?;
    let curve = efficient_frontier(&m.mean, &m.covariance, n_points).map_err(|e| e.to_string())?;
    let point = |w: &[f64]| {
        let mu: f64 = (0..n_assets).map(|i| w[i] * m.mean[i]).sum();
        let var: f64 = (0..n_assets)
            .flat_map(|i| (0..n_assets).map(move |j| (i, j)))
            .map(|(i, j)| w[i] * w[j] * m.covariance[(i, j)])
            .sum();
        [var.max(0.0).sqrt(), mu]
    };
    let samples = (0..samples.min(20_000))
        .map(|_| {
            let e: Vec<f64> = (0..n_assets).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let s: f64 = e.iter().sum();
            let w: Vec<f64> = e.iter().map(|x| x / s).collect();
            point(&w)
        })
        .collect();
    to_json(&FrontierView {
        frontier: curve.points.iter().map(|p| [p.sigma, p.mu]).collect(),
        assets: (0..n_assets)
            .map(|i| [m.covariance[(i, i)].sqrt(), m.mean[i]])
            .collect(),
        samples,
    })
}

#[wasm_bindgen]
pub fn spectrum(
    n_assets: usize,
    n_obs: usize,
    n_factors: usize,
    replicas: usize,
    seed: u32,
) -> Result<String, JsValue> {
    spectrum_json(n_assets, n_obs, n_factors, replicas, seed as u64)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn selection(
    n_assets: usize,
    n_obs: usize,
    n_factors: usize,
    seed: u32,
    directions: &str,
    threshold: f64,
) -> Result<String, JsValue> {
    selection_json(
        n_assets,
        n_obs,
        n_factors,
        seed as u64,
        directions,
        threshold,
    )
    .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn frontier(
    n_assets: usize,
    n_obs: usize,
    n_points: usize,
    samples: usize,
    seed: u32,
) -> Result<String, JsValue> {
    frontier_json(n_assets, n_obs, n_points, samples, seed as u64)
        .map_err(|e| JsValue::from_str(&e))
}
