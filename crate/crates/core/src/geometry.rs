//! Correlations, correlation distances, Euclidean embedding and the inertia
//! tensor of the embedded market cloud.
//!
//! For return series `r(k)` over a window, the correlation coefficient
//! `C_kl` defines the distance `d_kl = sqrt(2 (1 - C_kl))`, which is exactly
//! the Euclidean distance between the standardized, unit-norm series. Classical
//! metric scaling therefore recovers points in `R^(N-1)` that reproduce the
//! distances without distortion. The points are given masses proportional to
//! market capitalization, re-centered on the mass center, and the tensor
//! `T_ij = sum_k y_i(k) y_j(k)` is diagonalized.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::ingest::ReturnPanel;
use crate::linalg::{symmetric_eigen_desc, symmetric_eigenvalues_desc};
use crate::{Error, Result};

/// Negative eigenvalues of the double-centered matrix down to this fraction of
/// the largest one are rounding noise and are clamped to zero.
pub const EMBED_CLAMP_REL: f64 = 1e-8;

/// Relative gap under which adjacent tensor eigenvalues count as tied.
pub const TIE_REL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(DMatrix<f64>);

impl CorrelationMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(DMatrix<f64>);

impl DistanceMatrix {
    /// Wraps a matrix that is already known to be symmetric with zero diagonal.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::Data("distance matrix must be square".into()));
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(Error::Data(format!(
                    "distance matrix diagonal ({i},{i}) is nonzero"
                )));
            }
            for j in 0..i {
                let (a, b) = (values[(i, j)], values[(j, i)]);
                if a != b || a.is_nan() || a < 0.0 {
                    return Err(Error::Data(format!(
                        "distance matrix entry ({i},{j}) is asymmetric or negative"
                    )));
                }
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
}

/// Correlation matrix of the panel's returns restricted to `range`.
pub fn correlation_matrix(panel: &ReturnPanel, range: Range<usize>) -> Result<CorrelationMatrix> {
    correlation_from_rows(&panel.rows(range), &panel.tickers)
}

/// Pearson correlation of each pair of rows, using window means and
/// (population) variances. Rows must share a common length of at least 3.
pub fn correlation_from_rows(rows: &[&[f64]], tickers: &[String]) -> Result<CorrelationMatrix> {
    let n = rows.len();
    let t = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != t) {
        return Err(Error::Data("return rows differ in length".into()));
    }
    if t < 3 {
        return Err(Error::Data(format!(
            "estimation window has {t} observations; at least 3 are required"
        )));
    }
    // Rows of z are centered series scaled to unit Euclidean norm, so z z^T = C.
    let mut z = DMatrix::zeros(n, t);
    for (k, row) in rows.iter().enumerate() {
        let mean = row.iter().sum::<f64>() / t as f64;
        let scale = row.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let ss: f64 = row.iter().map(|x| (x - mean).powi(2)).sum();
        let floor = t as f64 * (16.0 * f64::EPSILON * scale).powi(2);
        if scale == 0.0 || ss <= floor {
            let ticker = tickers.get(k).cloned().unwrap_or_else(|| format!("#{k}"));
            return Err(Error::DegenerateSeries { ticker });
        }
        let norm = ss.sqrt();
        for (s, x) in row.iter().enumerate() {
            z[(k, s)] = (x - mean) / norm;
        }
    }
    let mut c = &z * z.transpose();
    for i in 0..n {
        c[(i, i)] = 1.0;
        for j in 0..i {
            let v = (0.5 * (c[(i, j)] + c[(j, i)])).clamp(-1.0, 1.0);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(CorrelationMatrix(c))
}

pub fn distance_matrix(corr: &CorrelationMatrix) -> DistanceMatrix {
    DistanceMatrix(corr.0.map(|c| (2.0 * (1.0 - c)).max(0.0).sqrt()))
}

/// Coordinates from classical metric scaling.
#[derive(Debug, Clone)]
pub struct Embedding {
    /// N x (N-1) coordinates, one point per row.
    pub coords: DMatrix<f64>,
    /// Retained eigenvalues of the double-centered matrix, descending, after clamping.
    pub eigenvalues: Vec<f64>,
}

/// Classical (Torgerson) metric scaling into `R^(N-1)`.
pub fn embed(dist: &DistanceMatrix) -> Result<Embedding> {
    let n = dist.len();
    if n == 0 {
        return Ok(Embedding {
            coords: DMatrix::zeros(0, 0),
            eigenvalues: Vec::new(),
        });
    }
    let sq = dist.0.map(|d| d * d);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand);
        }
    }
    let (values, vectors) = symmetric_eigen_desc(b);
    let largest = values[0].max(0.0);
    let floor = -EMBED_CLAMP_REL * largest;
    if let Some(&bad) = values.iter().find(|&&v| v < floor) {
        return Err(Error::EmbeddingFidelity {
            eigenvalue: bad,
            largest,
        });
    }
    // The constant vector spans the null space of the centered matrix, so the
    // smallest eigenpair is dropped.
    let dims = n - 1;
    let eigenvalues: Vec<f64> = values[..dims].iter().map(|v| v.max(0.0)).collect();
    let mut coords = DMatrix::zeros(n, dims);
    for (a, lambda) in eigenvalues.iter().enumerate() {
        let s = lambda.sqrt();
        for i in 0..n {
            coords[(i, a)] = vectors[(i, a)] * s;
        }
    }
    Ok(Embedding {
        coords,
        eigenvalues,
    })
}

/// The embedded market for one estimation window.
#[derive(Debug, Clone)]
pub struct MarketGeometry {
    /// Embedded points `x(k)`, one per row.
    pub coords: DMatrix<f64>,
    /// Cap-weighted center of mass `R`.
    pub center: DVector<f64>,
    /// `y(k) = x(k) - R`, one per row.
    pub centered: DMatrix<f64>,
    pub tensor: DMatrix<f64>,
    /// Tensor eigenvalues, descending and nonnegative.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<f64>,
    /// Centered points in the eigenvector basis; column `a` is direction `a + 1`.
    pub eigen_coords: DMatrix<f64>,
    /// 1-based rank pairs whose eigenvalues coincide within [`TIE_REL`].
    pub ties: Vec<(usize, usize)>,
}

impl MarketGeometry {
    pub fn n_assets(&self) -> usize {
        self.coords.nrows()
    }

    pub fn n_directions(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Cap-weighted center of mass and the eigensystem of `T = Y^T Y`.
///
/// Masses weight only the center; the tensor sum is unweighted.
pub fn center_and_tensor(coords: &DMatrix<f64>, caps: &[f64]) -> Result<MarketGeometry> {
    let (center, centered) = recenter(coords, caps)?;
    let tensor = centered.transpose() * &centered;
    let (raw, eigenvectors) = symmetric_eigen_desc(tensor.clone());
    let eigenvalues: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let eigen_coords = &centered * &eigenvectors;
    let ties = find_ties(&eigenvalues);
    Ok(MarketGeometry {
        coords: coords.clone(),
        center,
        centered,
        tensor,
        eigenvalues,
        eigenvectors,
        eigen_coords,
        ties,
    })
}

fn recenter(coords: &DMatrix<f64>, caps: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, dims) = coords.shape();
    if caps.len() != n {
        return Err(Error::Mass(format!("{} caps for {n} points", caps.len())));
    }
    if let Some(c) = caps.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::Mass(format!("invalid capitalization {c}")));
    }
    let total: f64 = caps.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Mass("all capitalizations are zero".into()));
    }
    let mut center = DVector::zeros(dims);
    for (k, m) in caps.iter().enumerate() {
        center += coords.row(k).transpose() * (m / total);
    }
    let mut centered = coords.clone();
    for mut row in centered.row_iter_mut() {
        row -= center.transpose();
    }
    Ok((center, centered))
}

fn find_ties(eigenvalues: &[f64]) -> Vec<(usize, usize)> {
    let largest = eigenvalues.first().copied().unwrap_or(0.0);
    if largest <= 0.0 {
        return Vec::new();
    }
    eigenvalues
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > 0.0 && (w[0] - w[1]) <= TIE_REL * largest)
        .map(|(i, _)| (i + 1, i + 2))
        .collect()
}

/// Full pipeline: correlation, distance, embedding and tensor.
pub fn estimate_geometry(
    panel: &ReturnPanel,
    range: Range<usize>,
    caps: &[f64],
) -> Result<MarketGeometry> {
    let corr = correlation_matrix(panel, range)?;
    let coords = embed(&distance_matrix(&corr))?.coords;
    center_and_tensor(&coords, caps)
}

/// Tensor eigenvalues only, for rows that are not part of a panel (surrogates).
pub fn tensor_spectrum(rows: &[&[f64]], tickers: &[String], caps: &[f64]) -> Result<Vec<f64>> {
    let corr = correlation_from_rows(rows, tickers)?;
    let coords = embed(&distance_matrix(&corr))?.coords;
    let (_, centered) = recenter(&coords, caps)?;
    let tensor = centered.transpose() * &centered;
    Ok(symmetric_eigenvalues_desc(tensor)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect())
}
