use std::io::Write;

use rayon::prelude::*;

use super::sweep::csv_err;
use super::{draw_codes, estimate, rng};
use crate::error::{invalid, Result};
use crate::estimators::{CodeHistogram, EstimatorId, MleOptions};
use crate::quantizer::UniformQuantizer;

/// Mean vs MLE at one `(N, σ̄)` point, in units of `Δ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPoint {
    pub n_samples: usize,
    pub sigma_bar: f64,
    pub mse_mean: f64,
    pub se_mean: f64,
    pub mse_mle: f64,
    pub se_mle: f64,
    /// Standard error of `mse_mle − mse_mean` over the paired records.
    pub se_difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub theta_over_delta: f64,
    pub records: usize,
    pub points: Vec<ThresholdPoint>,
}

impl ThresholdReport {
    pub fn for_n(&self, n: usize) -> impl Iterator<Item = &ThresholdPoint> {
        self.points.iter().filter(move |p| p.n_samples == n)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "n_samples",
            "sigma_bar",
            "mse_mean",
            "se_mean",
            "mse_mle",
            "se_mle",
            "se_difference",
        ])
        .map_err(csv_err)?;
        for p in &self.points {
            out.write_record([
                p.n_samples.to_string(),
                p.sigma_bar.to_string(),
                format!("{:e}", p.mse_mean),
                format!("{:e}", p.se_mean),
                format!("{:e}", p.mse_mle),
                format!("{:e}", p.se_mle),
                format!("{:e}", p.se_difference),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Fixed-`θ` comparison of the arithmetic mean and the MLE over `N` and `σ̄`
/// on the ideal uniform quantizer with `Δ = 1`.
///
/// Both estimators see the same records; record `r` at `(N_k, σ̄_s)` uses
/// seed `cell_seed(seed, s, k, r)`.
pub fn threshold_study(
    theta_over_delta: f64,
    n_list: &[usize],
    sigma_bar_grid: &[f64],
    records: usize,
    seed: u64,
) -> Result<ThresholdReport> {
    threshold_study_with(theta_over_delta, n_list, sigma_bar_grid, records, seed, &MleOptions::default())
}

/// [`threshold_study`] with explicit MLE search settings.
pub fn threshold_study_with(
    theta_over_delta: f64,
    n_list: &[usize],
    sigma_bar_grid: &[f64],
    records: usize,
    seed: u64,
    opts: &MleOptions,
) -> Result<ThresholdReport> {
    if records == 0 || n_list.is_empty() || n_list.contains(&0) {
        return invalid("records and every N must be >= 1");
    }
    if sigma_bar_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return invalid("sigma_bar values must be finite and > 0");
    }
    if !theta_over_delta.is_finite() {
        return invalid("theta must be finite");
    }
    let q = UniformQuantizer::new(1.0)?;
    let jobs: Vec<(usize, usize)> =
        (0..n_list.len()).flat_map(|k| (0..sigma_bar_grid.len()).map(move |s| (k, s))).collect();
    let points = jobs
        .into_par_iter()
        .map(|(k, s)| {
            let (n, sb) = (n_list[k], sigma_bar_grid[s]);
            let mut mean_sq = Vec::with_capacity(records);
            let mut mle_sq = Vec::with_capacity(records);
            for r in 0..records {
                let seed = rng::cell_seed(seed, s as u64, k as u64, r as u64);
                let codes = draw_codes(theta_over_delta, sb, &q, n, &mut rng::stream(seed));
                let hist = CodeHistogram::from_codes(codes, 1.0).expect("n >= 1");
                let (a, _) = estimate(EstimatorId::Mean, &hist, opts);
                let (b, _) = estimate(EstimatorId::Mle, &hist, opts);
                mean_sq.push((a - theta_over_delta).powi(2));
                mle_sq.push((b - theta_over_delta).powi(2));
            }
            let diff: Vec<f64> = mle_sq.iter().zip(&mean_sq).map(|(b, a)| b - a).collect();
            let (mse_mean, se_mean) = mean_and_se(&mean_sq);
            let (mse_mle, se_mle) = mean_and_se(&mle_sq);
            ThresholdPoint {
                n_samples: n,
                sigma_bar: sb,
                mse_mean,
                se_mean,
                mse_mle,
                se_mle,
                se_difference: mean_and_se(&diff).1,
            }
        })
        .collect();
    Ok(ThresholdReport { theta_over_delta, records, points })
}
