//! Long-only mean-variance frontier and placement of backtested portfolios in
//! the (sigma, mu) plane.
//!
//! Each frontier point solves
//!
//! ```text
//! minimize   w' S w
//! subject to w' mu = target,  sum(w) = 1,  w >= 0
//! ```
//!
//! with a primal active-set method. Problems are small (a few hundred assets),
//! the free set rarely grows past a few dozen names, and every equality-
//! constrained subproblem is a dense KKT solve.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::backtest::BacktestResult;
use crate::ingest::ReturnPanel;
use crate::linalg::symmetric_eigenvalues_desc;
use crate::{Error, Result};

/// Diagonal ridge applied when the covariance is singular.
pub const RIDGE: f64 = 1e-10;
/// Largest first-order optimality residual accepted from the solver.
pub const KKT_TOLERANCE: f64 = 1e-6;
const SINGULAR_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Too few observations or a (numerically) rank-deficient covariance.
    pub singular: bool,
}

/// Per-asset mean log return and sample covariance over `range`.
pub fn asset_moments(panel: &ReturnPanel, range: Range<usize>) -> Result<Moments> {
    moments_from_rows(&panel.rows(range), &panel.tickers)
}

pub fn moments_from_rows(rows: &[&[f64]], tickers: &[String]) -> Result<Moments> {
    let n = rows.len();
    let t = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != t) {
        return Err(Error::Data("return rows differ in length".into()));
    }
    if t < 2 {
        return Err(Error::Data(format!("{t} observations; need at least 2")));
    }
    let mean = DVector::from_iterator(n, rows.iter().map(|r| r.iter().sum::<f64>() / t as f64));
    let mut dev = DMatrix::zeros(n, t);
    for (k, row) in rows.iter().enumerate() {
        let scale = row.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let mut ss = 0.0;
        for (s, x) in row.iter().enumerate() {
            let d = x - mean[k];
            dev[(k, s)] = d;
            ss += d * d;
        }
        if scale == 0.0 || ss <= t as f64 * (16.0 * f64::EPSILON * scale).powi(2) {
            let ticker = tickers.get(k).cloned().unwrap_or_else(|| format!("#{k}"));
            return Err(Error::DegenerateSeries { ticker });
        }
    }
    let mut covariance = &dev * dev.transpose() / (t - 1) as f64;
    covariance = (&covariance + covariance.transpose()) * 0.5;
    let singular = t < n + 1 || is_singular(&covariance);
    Ok(Moments {
        mean,
        covariance,
        singular,
    })
}

fn is_singular(cov: &DMatrix<f64>) -> bool {
    let eig = symmetric_eigenvalues_desc(cov.clone());
    match (eig.first(), eig.last()) {
        (Some(&hi), Some(&lo)) => lo <= SINGULAR_REL * hi,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub target_mu: f64,
    pub sigma: f64,
    pub mu: f64,
    pub weights: Vec<f64>,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierCurve {
    pub points: Vec<FrontierPoint>,
    /// Diagonal ridge that was added to the covariance (0 when none).
    pub ridge: f64,
    pub notes: Vec<String>,
}

struct QpSolution {
    w: DVector<f64>,
    residual: f64,
}

/// Active-set solve of `min w'Sw` s.t. `A w = b`, `w >= 0`, from a feasible
/// `w0` whose support is `free0`.
fn solve_long_only(
    cov: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    mut w: DVector<f64>,
    mut free: Vec<bool>,
) -> Result<QpSolution> {
    let n = cov.nrows();
    let scale = cov.diagonal().amax().max(f64::MIN_POSITIVE);
    let dual_tol = 1e-12 * scale;
    let max_iter = 20 * n + 100;

    for _ in 0..max_iter {
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let (w_free, nu) = solve_kkt(cov, a, b, &idx)?;
        let step: Vec<f64> = idx
            .iter()
            .zip(w_free.iter())
            .map(|(&i, x)| x - w[i])
            .collect();
        let step_size = step.iter().fold(0.0_f64, |s, x| s.max(x.abs()));

        if step_size <= 1e-13 {
            let grad = cov * &w;
            let at_nu = a.transpose() * &nu;
            let release = (0..n)
                .filter(|&i| !free[i])
                .map(|i| (i, grad[i] - at_nu[i]))
                .filter(|&(_, z)| z < -dual_tol)
                .min_by(|x, y| x.1.total_cmp(&y.1));
            match release {
                Some((i, _)) => free[i] = true,
                None => {
                    let residual = kkt_residual(cov, a, b, &w, &nu, &free);
                    return Ok(QpSolution { w, residual });
                }
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for (&i, &p) in idx.iter().zip(&step) {
            if p < 0.0 {
                let ratio = -w[i] / p;
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        for (&i, &p) in idx.iter().zip(&step) {
            w[i] += alpha * p;
        }
        if let Some(i) = blocking {
            w[i] = 0.0;
            free[i] = false;
        }
    }
    Err(Error::Frontier(format!(
        "active-set solver did not converge in {max_iter} iterations"
    )))
}

/// Solves the equality-constrained subproblem on the free set. Returns the
/// free weights and the constraint multipliers `nu` with `S w = A' nu` on the
/// free set.
fn solve_kkt(
    cov: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    idx: &[usize],
) -> Result<(DVector<f64>, DVector<f64>)> {
    let f = idx.len();
    let m = a.nrows();
    let mut k = DMatrix::zeros(f + m, f + m);
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            k[(r, c)] = cov[(i, j)];
        }
        for row in 0..m {
            k[(r, f + row)] = -a[(row, i)];
            k[(f + row, r)] = a[(row, i)];
        }
    }
    let mut rhs = DVector::zeros(f + m);
    rhs.rows_mut(f, m).copy_from(b);

    let accept = |x: &DVector<f64>| {
        let r = &k * x - &rhs;
        r.amax() <= 1e-9 * (1.0 + rhs.amax())
    };
    let x = match k.clone().lu().solve(&rhs) {
        Some(x) if x.iter().all(|v| v.is_finite()) && accept(&x) => x,
        // Rank-deficient constraints (every free asset has the same mean):
        // fall back to the minimum-norm least-squares solution.
        _ => k
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::Frontier(format!("KKT solve failed: {e}")))?,
    };
    Ok((x.rows(0, f).into_owned(), x.rows(f, m).into_owned()))
}

fn kkt_residual(
    cov: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    w: &DVector<f64>,
    nu: &DVector<f64>,
    free: &[bool],
) -> f64 {
    let z = cov * w - a.transpose() * nu;
    let mut r: f64 = (a * w - b).amax();
    for i in 0..w.len() {
        r = r.max((-w[i]).max(0.0));
        if free[i] {
            r = r.max(z[i].abs());
        } else {
            r = r.max((-z[i]).max(0.0)).max((w[i] * z[i]).abs());
        }
    }
    r
}

fn check_inputs(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<()> {
    let n = mean.len();
    if n == 0 {
        return Err(Error::Frontier("empty asset universe".into()));
    }
    if cov.shape() != (n, n) {
        return Err(Error::Frontier(format!(
            "covariance is {:?}, expected {n}x{n}",
            cov.shape()
        )));
    }
    if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Frontier("non-finite moments".into()));
    }
    Ok(())
}

fn regularized(cov: &DMatrix<f64>, notes: &mut Vec<String>) -> (DMatrix<f64>, f64) {
    if is_singular(cov) {
        notes.push(format!(
            "covariance is singular; added ridge {RIDGE:e} to the diagonal"
        ));
        (
            cov + DMatrix::identity(cov.nrows(), cov.nrows()) * RIDGE,
            RIDGE,
        )
    } else {
        (cov.clone(), 0.0)
    }
}

fn point(
    target_mu: f64,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    sol: QpSolution,
) -> FrontierPoint {
    let var = (sol.w.transpose() * cov * &sol.w)[(0, 0)];
    FrontierPoint {
        target_mu,
        sigma: var.max(0.0).sqrt(),
        mu: sol.w.dot(mean),
        weights: sol.w.iter().copied().collect(),
        kkt_residual: sol.residual,
    }
}

fn solve_target(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    work: &DMatrix<f64>,
    target: f64,
) -> Result<FrontierPoint> {
    let n = mean.len();
    let (lo_i, hi_i) = (mean.imin(), mean.imax());
    let (lo, hi) = (mean[lo_i], mean[hi_i]);
    let slack = 1e-12
        * (hi - lo)
            .abs()
            .max(hi.abs())
            .max(lo.abs())
            .max(f64::MIN_POSITIVE);
    if target < lo - slack || target > hi + slack {
        return Err(Error::Frontier(format!(
            "target return {target:e} outside the achievable range [{lo:e}, {hi:e}]"
        )));
    }
    let mut w = DVector::zeros(n);
    let mut free = vec![false; n];
    if hi - lo <= slack {
        w[lo_i] = 1.0;
        free[lo_i] = true;
    } else {
        let lambda = ((target - lo) / (hi - lo)).clamp(0.0, 1.0);
        w[lo_i] = 1.0 - lambda;
        w[hi_i] = lambda;
        free[lo_i] = true;
        free[hi_i] = true;
    }
    let a = DMatrix::from_fn(2, n, |r, c| if r == 0 { mean[c] } else { 1.0 });
    let b = DVector::from_vec(vec![target, 1.0]);
    let sol = solve_long_only(work, &a, &b, w, free)
        .map_err(|e| Error::Frontier(format!("target {target:e}: {e}")))?;
    if sol.residual > KKT_TOLERANCE {
        return Err(Error::Frontier(format!(
            "target {target:e}: optimality residual {:e} exceeds {KKT_TOLERANCE:e}",
            sol.residual
        )));
    }
    Ok(point(target, mean, cov, sol))
}

/// Minimum-variance long-only portfolio at one target mean.
pub fn frontier_point(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    target: f64,
) -> Result<FrontierPoint> {
    check_inputs(mean, cov)?;
    let (work, _) = regularized(cov, &mut Vec::new());
    solve_target(mean, cov, &work, target)
}

/// Global minimum-variance long-only portfolio.
pub fn minimum_variance(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<FrontierPoint> {
    check_inputs(mean, cov)?;
    let n = mean.len();
    let (work, _) = regularized(cov, &mut Vec::new());
    let start = cov.diagonal().imin();
    let mut w = DVector::zeros(n);
    w[start] = 1.0;
    let mut free = vec![false; n];
    free[start] = true;
    let a = DMatrix::from_element(1, n, 1.0);
    let b = DVector::from_element(1, 1.0);
    let sol = solve_long_only(&work, &a, &b, w, free)?;
    let mu = sol.w.dot(mean);
    Ok(point(mu, mean, cov, sol))
}

/// `n_points` frontier points at targets evenly spaced from the lowest to
/// the highest asset mean.
pub fn efficient_frontier(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    n_points: usize,
) -> Result<FrontierCurve> {
    if n_points < 2 {
        return Err(Error::Config(format!(
            "frontier needs at least 2 points, got {n_points}"
        )));
    }
    check_inputs(mean, cov)?;
    let mut notes = Vec::new();
    let (work, ridge) = regularized(cov, &mut notes);
    let (lo, hi) = (mean.min(), mean.max());
    let targets: Vec<f64> = if mean.len() == 1 || hi == lo {
        notes.push("every asset has the same mean; the frontier is a single point".into());
        vec![lo]
    } else {
        (0..n_points)
            .map(|k| {
                if k + 1 == n_points {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n_points - 1) as f64
                }
            })
            .collect()
    };

    let solve = |t: &f64| solve_target(mean, cov, &work, *t);
    #[cfg(feature = "parallel")]
    let solved: Vec<Result<FrontierPoint>> = {
        use rayon::prelude::*;
        targets.par_iter().map(solve).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let solved: Vec<Result<FrontierPoint>> = targets.iter().map(solve).collect();

    let mut points = Vec::with_capacity(solved.len());
    for (t, r) in targets.iter().zip(solved) {
        match r {
            Ok(p) => points.push(p),
            Err(Error::Frontier(msg)) if msg.contains("outside the achievable range") => {
                notes.push(format!("skipped infeasible target {t:e}"));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(FrontierCurve {
        points,
        ridge,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanePlacement {
    pub label: String,
    /// Average over periods of the per-period standard deviation of daily log returns.
    pub sigma: f64,
    /// Average over periods of the per-period mean daily log return.
    pub mu: f64,
    pub periods_used: usize,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// Averages per-period (sigma, mu) of daily log returns of each value series.
/// Periods with fewer than three values are skipped.
pub fn place_series(label: &str, periods: &[&[f64]]) -> Result<PlanePlacement> {
    let mut warnings = Vec::new();
    let mut stats = Vec::new();
    for (id, values) in periods.iter().enumerate() {
        if values.len() < 3 {
            warnings.push(format!(
                "{label}: period {id} has {} daily values; skipped",
                values.len()
            ));
            continue;
        }
        let r: Vec<f64> = values.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        let n = r.len() as f64;
        let mu = r.iter().sum::<f64>() / n;
        let var = r.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0);
        stats.push((var.sqrt(), mu));
    }
    if stats.is_empty() {
        return Err(Error::Data(format!(
            "{label}: no period with at least 3 daily values"
        )));
    }
    let k = stats.len() as f64;
    Ok(PlanePlacement {
        label: label.to_string(),
        sigma: stats.iter().map(|s| s.0).sum::<f64>() / k,
        mu: stats.iter().map(|s| s.1).sum::<f64>() / k,
        periods_used: stats.len(),
        warnings,
    })
}

pub fn place_portfolios(results: &[BacktestResult]) -> Result<Vec<PlanePlacement>> {
    results
        .iter()
        .map(|r| {
            let periods: Vec<&[f64]> = r.periods.iter().map(|p| p.values.as_slice()).collect();
            place_series(&r.label, &periods)
        })
        .collect()
}
