//! Moment-based estimator: find `(θ, σ)` whose predicted output mean and
//! variance match the sample mean and sample variance.
//!
//! Work happens in units of Δ on the fractional part of the sample mean; the
//! integer part is added back at the end.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{Degeneracy, EstimateReport, EstimatorId, SIGMA_FLOOR};
use crate::error::{invalid, Result};
use crate::moments::normalized_output_moments;

const RESIDUAL_TOLERANCE: f64 = 1e-13;
const MAX_NEWTON_ITERATIONS: usize = 100;
const GRID_SIZE: usize = 200;
const GRID_SIGMA_RANGE: (f64, f64) = (0.02, 1.5);
const SEED_SIGMA_MIN: f64 = 0.05;
/// Grid minima polished by Newton when looking for further roots.
const MAX_CANDIDATES: usize = 8;

struct Root {
    theta: f64,
    sigma: f64,
    iterations: usize,
}

fn residual(theta: f64, sigma: f64, mean: f64, var: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let (m, j) = normalized_output_moments(theta, sigma);
    ([m[0] - mean, m[1] - var], j)
}

fn norm2(r: &[f64; 2]) -> f64 {
    r[0] * r[0] + r[1] * r[1]
}

/// Damped Newton on the two moment equations, `σ` projected onto the floor.
fn newton(theta0: f64, sigma0: f64, mean: f64, var: f64) -> (Option<Root>, usize) {
    let (mut theta, mut sigma) = (theta0, sigma0.max(SIGMA_FLOOR));
    let (mut r, mut j) = residual(theta, sigma, mean, var);
    for it in 0..MAX_NEWTON_ITERATIONS {
        if r[0].abs().max(r[1].abs()) < RESIDUAL_TOLERANCE {
            let inside = theta > -0.5 - 1e-12 && theta <= 0.5 + 1e-12 && sigma.is_finite();
            let root = Root { theta, sigma, iterations: it };
            return (inside.then_some(root), it);
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !det.is_finite() || det.abs() < 1e-300 {
            return (None, it);
        }
        let dt = (-r[0] * j[1][1] + r[1] * j[0][1]) / det;
        let ds = (-r[1] * j[0][0] + r[0] * j[1][0]) / det;
        let f0 = norm2(&r);
        let mut step = 1.0;
        loop {
            let t = theta + step * dt;
            let s = (sigma + step * ds).max(SIGMA_FLOOR);
            let (rn, jn) = residual(t, s, mean, var);
            if norm2(&rn) < f0 * (1.0 - 1e-4 * step) || step < 1e-8 {
                if norm2(&rn) >= f0 {
                    return (None, it + 1);
                }
                theta = t;
                sigma = s;
                r = rn;
                j = jn;
                break;
            }
            step *= 0.5;
        }
    }
    (None, MAX_NEWTON_ITERATIONS)
}

/// Solve `θ − e^{-2π²σ²}·sin(2πθ)/π = mean` on `[−1/2, 1/2]` for known `σ`.
///
/// The left side equals `∓1/2` at the ends, so the interval always brackets a
/// root; Newton steps leaving the bracket fall back to bisection.
fn solve_known_sigma(mean: f64, sigma: f64) -> (f64, usize) {
    let a = (-2.0 * PI * PI * sigma * sigma).exp();
    let g = |t: f64| t - a * (2.0 * PI * t).sin() / PI - mean;
    let dg = |t: f64| 1.0 - 2.0 * a * (2.0 * PI * t).cos();
    let (mut lo, mut hi) = (-0.5, 0.5);
    let mut t = mean.clamp(lo, hi);
    for it in 0..200 {
        let v = g(t);
        if v.abs() < 1e-15 {
            return (t, it);
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let d = dg(t);
        let next = t - v / d;
        t = if d != 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            return (t, it);
        }
    }
    (t, 200)
}

/// Moment-based estimate from a sample mean and unbiased sample variance.
///
/// With `known_sigma` only the mean equation is solved. Otherwise damped
/// Newton iterations are run from `(frac(mean), √max(var − Δ²/12, (0.05Δ)²))`
/// and from the residual minima of a 200×200 grid over
/// `(−Δ/2, Δ/2] × [0.02Δ, 1.5Δ]`. Among the roots found, the one closest
/// to the sample mean is returned. When no root exists the sample mean is returned
/// with a flag.
pub fn moment_estimate(
    mean_hat: f64,
    var_hat: f64,
    delta: f64,
    known_sigma: Option<f64>,
) -> Result<EstimateReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return invalid(format!("delta must be finite and > 0, got {delta}"));
    }
    if !mean_hat.is_finite() {
        return invalid(format!("sample mean must be finite, got {mean_hat}"));
    }
    if !(var_hat >= 0.0 && var_hat.is_finite()) {
        return invalid(format!("sample variance must be finite and >= 0, got {var_hat}"));
    }
    let scaled = mean_hat / delta;
    let base = scaled.round();
    let frac = scaled - base;
    let var = var_hat / (delta * delta);

    if let Some(sigma) = known_sigma {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return invalid(format!("known sigma must be finite and > 0, got {sigma}"));
        }
        let (theta, iterations) = solve_known_sigma(frac, (sigma / delta).max(SIGMA_FLOOR));
        return Ok(EstimateReport {
            estimator: EstimatorId::Moment,
            theta_hat: (base + theta) * delta,
            sigma_hat: Some(sigma),
            converged: true,
            iterations,
            objective_value: None,
            degenerate: None,
        });
    }

    let seed_sigma = (var - 1.0 / 12.0).max(SEED_SIGMA_MIN * SEED_SIGMA_MIN).sqrt();
    let (first, mut iterations) = newton(frac, seed_sigma, frac, var);
    let mut roots: Vec<Root> = first.into_iter().collect();
    for (theta, sigma) in grid_candidates(frac, var) {
        let (polished, it) = newton(theta, sigma, frac, var);
        iterations += it;
        if let Some(r) = polished {
            let dup = roots
                .iter()
                .any(|q| (q.theta - r.theta).abs() < 1e-7 && (q.sigma - r.sigma).abs() < 1e-7);
            if !dup {
                roots.push(r);
            }
        }
    }
    // Several roots appear once σ̄ drops below about 0.3; keep the smallest
    // correction to the sample mean.
    let root = roots.into_iter().min_by(|a, b| (a.theta - frac).abs().total_cmp(&(b.theta - frac).abs()));

    Ok(match root {
        Some(r) => EstimateReport {
            estimator: EstimatorId::Moment,
            theta_hat: (base + r.theta) * delta,
            sigma_hat: Some(r.sigma * delta),
            converged: true,
            iterations: iterations.max(r.iterations),
            objective_value: Some(0.0),
            degenerate: None,
        },
        None => {
            let (_, sigma, best, min_var) = grid_search(frac, var);
            let reason = if var < min_var {
                Degeneracy::VarianceBelowMinimum
            } else {
                Degeneracy::NoRoot
            };
            EstimateReport {
                estimator: EstimatorId::Moment,
                theta_hat: mean_hat,
                sigma_hat: Some(sigma.max(SIGMA_FLOOR) * delta),
                converged: false,
                iterations,
                objective_value: Some(best),
                degenerate: Some(reason),
            }
        }
    })
}

struct GridTable {
    moments: Vec<(f64, f64, [f64; 2])>,
    min_var: f64,
}

/// Predicted `(mean, variance)` on the fallback grid; independent of the data.
fn grid_table() -> &'static GridTable {
    static TABLE: OnceLock<GridTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let (s_lo, s_hi) = GRID_SIGMA_RANGE;
        let mut moments = Vec::with_capacity(GRID_SIZE * GRID_SIZE);
        for i in 0..GRID_SIZE {
            let theta = -0.5 + (i + 1) as f64 / GRID_SIZE as f64;
            for k in 0..GRID_SIZE {
                let sigma = s_lo + (s_hi - s_lo) * k as f64 / (GRID_SIZE - 1) as f64;
                moments.push((theta, sigma, normalized_output_moments(theta, sigma).0));
            }
        }
        let min_var = moments.iter().fold(f64::INFINITY, |m, e| m.min(e.2[1]));
        GridTable { moments, min_var }
    })
}

/// Least-squares residual minimizer over the coarse grid.
///
/// Returns `(θ, σ, ‖F‖², min predicted variance on the grid)`.
fn grid_search(mean: f64, var: f64) -> (f64, f64, f64, f64) {
    let table = grid_table();
    let mut best = (0.0, GRID_SIGMA_RANGE.0, f64::INFINITY);
    for &(theta, sigma, m) in &table.moments {
        let f = norm2(&[m[0] - mean, m[1] - var]);
        if f < best.2 {
            best = (theta, sigma, f);
        }
    }
    (best.0, best.1, best.2, table.min_var)
}

/// Local minima of the residual over the grid (periodic in `θ`), best first.
fn grid_candidates(mean: f64, var: f64) -> Vec<(f64, f64)> {
    let table = grid_table();
    let n = GRID_SIZE;
    let res: Vec<f64> = table
        .moments
        .iter()
        .map(|&(_, _, m)| norm2(&[m[0] - mean, m[1] - var]))
        .collect();
    let mut found = Vec::new();
    for i in 0..n {
        for k in 0..n {
            let v = res[i * n + k];
            let mut is_min = true;
            'nb: for di in [n - 1, 0, 1] {
                for dk in [-1i64, 0, 1] {
                    let kk = k as i64 + dk;
                    if (di == 0 && dk == 0) || kk < 0 || kk >= n as i64 {
                        continue;
                    }
                    if res[((i + di) % n) * n + kk as usize] < v {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                let (theta, sigma, _) = table.moments[i * n + k];
                found.push((v, theta, sigma));
            }
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found.into_iter().take(MAX_CANDIDATES).map(|(_, t, s)| (t, s)).collect()
}
