//! Effective market dimension from surrogate spectra.
//!
//! Surrogate panels keep each series' marginal behavior but destroy the
//! cross-sectional structure, either by drawing iid Gaussian returns with the
//! window's mean and variance or by independently shuffling each series in
//! time. Running the full geometry on many replicas gives a per-rank envelope
//! (a quantile across replicas). The effective dimension is the number of
//! leading market eigenvalues that rise strictly above that envelope.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::tensor_spectrum;
use crate::ingest::ReturnPanel;
use crate::{Error, Result};

pub const DEFAULT_REPLICAS: usize = 50;
pub const DEFAULT_QUANTILE: f64 = 0.95;
pub const DEFAULT_DIMENSION_CAP: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateMethod {
    IidGaussian,
    TimePermute,
}

impl std::fmt::Display for SurrogateMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SurrogateMethod::IidGaussian => "iid_gaussian",
            SurrogateMethod::TimePermute => "time_permute",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSettings {
    pub method: SurrogateMethod,
    pub replicas: usize,
    pub quantile: f64,
    pub seed: u64,
}

impl Default for SurrogateSettings {
    fn default() -> Self {
        Self {
            method: SurrogateMethod::TimePermute,
            replicas: DEFAULT_REPLICAS,
            quantile: DEFAULT_QUANTILE,
            seed: 0,
        }
    }
}

impl SurrogateSettings {
    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Config(
                "surrogate replicas must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.quantile) {
            return Err(Error::Config(format!(
                "envelope quantile {} outside [0, 1]",
                self.quantile
            )));
        }
        Ok(())
    }
}

/// Per-rank surrogate envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBand {
    pub method: SurrogateMethod,
    pub replicas: usize,
    pub quantile: f64,
    pub seed: u64,
    /// Envelope value for ranks `1..=N-1`.
    pub upper: Vec<f64>,
    /// Raw replica spectra, `replica_spectra[r][rank - 1]`.
    pub replica_spectra: Vec<Vec<f64>>,
}

/// Generator for replica `replica`: the master seed with the replica index as
/// the ChaCha stream, so results do not depend on evaluation order.
pub fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

/// One surrogate panel built from `rows`.
pub fn surrogate_rows(
    rows: &[&[f64]],
    method: SurrogateMethod,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| match method {
            SurrogateMethod::TimePermute => {
                let mut out = row.to_vec();
                out.shuffle(rng);
                out
            }
            SurrogateMethod::IidGaussian => {
                let n = row.len() as f64;
                let mean = row.iter().sum::<f64>() / n;
                let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                let normal = Normal::new(mean, var.sqrt()).expect("finite variance");
                (0..row.len()).map(|_| normal.sample(rng)).collect()
            }
        })
        .collect()
}

pub fn surrogate_spectrum(
    panel: &ReturnPanel,
    window: Range<usize>,
    caps: &[f64],
    settings: &SurrogateSettings,
) -> Result<SpectrumBand> {
    surrogate_spectrum_from_rows(&panel.rows(window), &panel.tickers, caps, settings)
}

pub fn surrogate_spectrum_from_rows(
    rows: &[&[f64]],
    tickers: &[String],
    caps: &[f64],
    settings: &SurrogateSettings,
) -> Result<SpectrumBand> {
    settings.validate()?;
    let replica = |r: usize| -> Result<Vec<f64>> {
        let mut rng = replica_rng(settings.seed, r);
        let surrogate = surrogate_rows(rows, settings.method, &mut rng);
        let borrowed: Vec<&[f64]> = surrogate.iter().map(Vec::as_slice).collect();
        tensor_spectrum(&borrowed, tickers, caps)
    };

    #[cfg(feature = "parallel")]
    let spectra: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..settings.replicas)
            .into_par_iter()
            .map(replica)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let spectra: Vec<Vec<f64>> = (0..settings.replicas).map(replica).collect::<Result<_>>()?;

    let ranks = spectra.first().map_or(0, Vec::len);
    let upper = (0..ranks)
        .map(|a| {
            let mut column: Vec<f64> = spectra.iter().map(|s| s[a]).collect();
            column.sort_by(f64::total_cmp);
            quantile_sorted(&column, settings.quantile)
        })
        .collect();
    Ok(SpectrumBand {
        method: settings.method,
        replicas: settings.replicas,
        quantile: settings.quantile,
        seed: settings.seed,
        upper,
        replica_spectra: spectra,
    })
}

/// Linear-interpolation quantile of an ascending sample.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Count of leading market eigenvalues strictly above the envelope, at most `cap`.
pub fn effective_dimension(market: &[f64], band: &SpectrumBand, cap: usize) -> Result<usize> {
    if market.len() != band.upper.len() {
        return Err(Error::Dimension(format!(
            "market spectrum has {} ranks, envelope has {}",
            market.len(),
            band.upper.len()
        )));
    }
    Ok(market
        .iter()
        .zip(&band.upper)
        .take_while(|(m, u)| m > u)
        .count()
        .min(cap))
}
