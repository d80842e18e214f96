//! Estimators of the constant `θ` from quantized samples: the arithmetic
//! mean, the moment-based estimator and the maximum-likelihood estimator.

mod histogram;
mod mle;
mod moment;
pub mod nelder_mead;

use std::fmt;
use std::str::FromStr;

pub use histogram::{CodeHistogram, GRID_TOLERANCE};
pub use mle::{
    log_likelihood, mle_estimate, mle_estimate_with, mle_trace, LogLikelihood, MleOptions,
    PROBABILITY_FLOOR,
};
pub(crate) use mle::mle_uniform;
pub use moment::moment_estimate;

use crate::error::{invalid, Error, Result};

/// Lower bound on `σ` in units of `Δ`, shared by the MLE and the moment solver.
pub const SIGMA_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorId {
    Mean,
    Moment,
    Mle,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 3] = [EstimatorId::Mean, EstimatorId::Moment, EstimatorId::Mle];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::Mean => "mean",
            EstimatorId::Moment => "moment",
            EstimatorId::Mle => "mle",
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(EstimatorId::Mean),
            "moment" | "moments" => Ok(EstimatorId::Moment),
            "mle" => Ok(EstimatorId::Mle),
            other => invalid(format!("unknown estimator {other:?}")),
        }
    }
}

/// Why an estimate is flagged as degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    /// All samples fell in one code bin; the likelihood has no finite maximizer.
    SingleBin,
    /// The maximizing `σ` ran into the floor.
    SigmaAtFloor,
    /// The moment equations have no root in the search region.
    NoRoot,
    /// The sample variance is below what the moment equations can produce.
    VarianceBelowMinimum,
    /// An occupied bin had probability below the floor at the reported optimum.
    ProbabilityClamped,
}

impl fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Degeneracy::SingleBin => "all samples in one bin",
            Degeneracy::SigmaAtFloor => "sigma at floor",
            Degeneracy::NoRoot => "no root of the moment equations",
            Degeneracy::VarianceBelowMinimum => "sample variance below attainable minimum",
            Degeneracy::ProbabilityClamped => "bin probability clamped",
        })
    }
}

/// Outcome of one estimator run on one record.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimator: EstimatorId,
    pub theta_hat: f64,
    pub sigma_hat: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub objective_value: Option<f64>,
    pub degenerate: Option<Degeneracy>,
}

impl EstimateReport {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate.is_some()
    }

    /// `(key, value)` pairs for the key,value CSV output.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        vec![
            ("estimator", self.estimator.to_string()),
            ("theta_hat", format!("{:e}", self.theta_hat)),
            ("sigma_hat", opt(self.sigma_hat)),
            ("converged", self.converged.to_string()),
            ("iterations", self.iterations.to_string()),
            ("objective_value", opt(self.objective_value)),
            ("degenerate", self.degenerate.map(|d| d.to_string()).unwrap_or_default()),
        ]
    }
}

/// Sample mean `θ̂ = (1/N)·Σ y[n]`.
pub fn arithmetic_mean(samples: &[f64]) -> Result<EstimateReport> {
    if samples.is_empty() {
        return invalid("arithmetic mean of an empty sequence");
    }
    let theta_hat = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(mean_report(theta_hat))
}

/// Arithmetic mean computed from the code counts alone.
pub fn histogram_mean(hist: &CodeHistogram) -> Result<EstimateReport> {
    if hist.is_empty() {
        return invalid("arithmetic mean of an empty histogram");
    }
    Ok(mean_report(hist.mean()))
}

fn mean_report(theta_hat: f64) -> EstimateReport {
    EstimateReport {
        estimator: EstimatorId::Mean,
        theta_hat,
        sigma_hat: None,
        converged: true,
        iterations: 0,
        objective_value: None,
        degenerate: None,
    }
}

/// Unbiased sample variance with the `N − 1` denominator.
pub fn sample_variance(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return invalid("sample variance needs at least two samples");
    }
    let n = samples.len() as f64;
    let m = samples.iter().sum::<f64>() / n;
    Ok(samples.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (n - 1.0))
}

/// Histogram of quantizer output samples.
pub fn build_histogram(samples: &[f64], delta: f64) -> Result<CodeHistogram> {
    CodeHistogram::from_samples(samples, delta)
}
