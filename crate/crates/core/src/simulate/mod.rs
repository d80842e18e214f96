//! Deterministic Monte Carlo harness: record synthesis, empirical MSE,
//! efficiency sweeps, the MLE threshold study, nonlinear-quantizer runs and
//! Monte Carlo validation of the Fisher information.

pub mod config;
mod fisher_mc;
pub mod rng;
mod sweep;
mod threshold;

use rand::Rng;
use rand_distr::StandardNormal;

pub use config::{linear_grid, QuantizerSpec, SweepConfig};
pub use fisher_mc::{fisher_mc_validate, write_fisher_mc_csv, FisherMcPoint};
pub use sweep::{nonlinear_robustness, run_sweep, CellResult, MseSweepReport};
pub use threshold::{threshold_study, threshold_study_with, ThresholdPoint, ThresholdReport};

use crate::error::{invalid, Result};
use crate::estimators::{
    histogram_mean, mle_uniform, moment_estimate, CodeHistogram, EstimatorId, MleOptions,
};
use crate::quantizer::Quantizer;

/// Output codes of `N` noisy observations of `θ`, drawn from `rng`.
pub(crate) fn draw_codes<Q: Quantizer + ?Sized, R: Rng>(
    theta: f64,
    sigma: f64,
    q: &Q,
    n: usize,
    rng: &mut R,
) -> Vec<i64> {
    (0..n)
        .map(|_| {
            let eta: f64 = rng.sample(StandardNormal);
            q.code(theta + sigma * eta)
        })
        .collect()
}

/// `N` quantizer outputs `q(θ + η[n])` with `η ~ N(0, σ²)`, reproducible from `seed`.
pub fn synthesize_record<Q: Quantizer + ?Sized>(
    theta: f64,
    sigma: f64,
    q: &Q,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return invalid(format!("sigma must be finite and >= 0, got {sigma}"));
    }
    if !theta.is_finite() {
        return invalid(format!("theta must be finite, got {theta}"));
    }
    let mut rng = rng::stream(seed);
    Ok(draw_codes(theta, sigma, q, n_samples, &mut rng).into_iter().map(|c| q.level(c)).collect())
}

/// How one estimator fared on one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Ok,
    /// Estimate produced but flagged degenerate.
    Degenerate,
    /// Estimator errored; the sample mean was used instead.
    Failed,
}

/// Estimate `θ` from a histogram with the estimators assuming the ideal
/// uniform quantizer of step `hist.delta()`.
pub(crate) fn estimate(id: EstimatorId, hist: &CodeHistogram, mle_opts: &MleOptions) -> (f64, Outcome) {
    let mean = hist.mean();
    let classify = |r: crate::Result<crate::estimators::EstimateReport>| match r {
        Ok(rep) if rep.theta_hat.is_finite() => {
            let o = if rep.is_degenerate() { Outcome::Degenerate } else { Outcome::Ok };
            (rep.theta_hat, o)
        }
        _ => (mean, Outcome::Failed),
    };
    match id {
        EstimatorId::Mean => classify(histogram_mean(hist)),
        EstimatorId::Moment => {
            if hist.total() < 2 {
                return (mean, Outcome::Failed);
            }
            // Solve relative to the anchor code so that results shift exactly
            // with the data.
            let d = hist.delta();
            let (base, rel, var) = hist.anchored();
            match moment_estimate(rel * d, var * d * d, d, None) {
                Ok(rep) if rep.theta_hat.is_finite() => {
                    let o = if rep.is_degenerate() { Outcome::Degenerate } else { Outcome::Ok };
                    (base as f64 * d + rep.theta_hat, o)
                }
                _ => (mean, Outcome::Failed),
            }
        }
        EstimatorId::Mle => classify(mle_uniform(hist, mle_opts)),
    }
}

/// Empirical MSE over independent records with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseEstimate {
    pub mse: f64,
    pub std_error: f64,
    pub records: usize,
    pub degenerate: usize,
    pub failures: usize,
}

/// Average of `(θ − θ̂)²` over `records` records of `n_samples` samples.
///
/// Record `r` uses seed `cell_seed(seed, 0, 0, r)`; estimates are formed with
/// the ideal uniform quantizer of the same nominal step.
pub fn empirical_mse<Q: Quantizer + ?Sized>(
    estimator: EstimatorId,
    theta: f64,
    sigma: f64,
    q: &Q,
    n_samples: usize,
    records: usize,
    seed: u64,
) -> Result<MseEstimate> {
    if n_samples == 0 || records == 0 {
        return invalid("n_samples and records must be >= 1");
    }
    if !(sigma >= 0.0 && sigma.is_finite()) || !theta.is_finite() {
        return invalid("theta must be finite and sigma finite and >= 0");
    }
    let opts = MleOptions::default();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut degenerate = 0;
    let mut failures = 0;
    for r in 0..records {
        let mut stream = rng::stream(rng::cell_seed(seed, 0, 0, r as u64));
        let codes = draw_codes(theta, sigma, q, n_samples, &mut stream);
        let hist = CodeHistogram::from_codes(codes, q.delta())?;
        let (est, outcome) = estimate(estimator, &hist, &opts);
        match outcome {
            Outcome::Ok => {}
            Outcome::Degenerate => degenerate += 1,
            Outcome::Failed => failures += 1,
        }
        let e2 = (theta - est) * (theta - est);
        sum += e2;
        sum_sq += e2 * e2;
    }
    let n = records as f64;
    let mse = sum / n;
    let var = if records > 1 { ((sum_sq - n * mse * mse) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(MseEstimate { mse, std_error: (var / n).sqrt(), records, degenerate, failures })
}
