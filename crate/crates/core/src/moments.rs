//! First-order Fourier approximations of the quantization-error and
//! quantizer-output moments for a constant in Gaussian noise, and the bias
//! and variance of the arithmetic mean they imply.
//!
//! The expressions are accurate for `σ̄ > 0.3`. They are still evaluated below
//! that; [`EstimationScenario::series_valid`] reports which regime applies.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Threshold on `σ̄` above which the first-order expressions are accurate.
pub const SERIES_VALIDITY_SIGMA_BAR: f64 = 0.3;

/// `(θ, σ, Δ, N)` for a constant `θ` observed through Gaussian noise `σ` and a
/// quantizer with step `Δ`, `N` samples per record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationScenario {
    pub theta: f64,
    pub sigma: f64,
    pub delta: f64,
    pub n_samples: usize,
    sigma_bar: f64,
}

impl EstimationScenario {
    pub fn new(theta: f64, sigma: f64, delta: f64, n_samples: usize) -> Result<Self> {
        if !theta.is_finite() {
            return invalid(format!("theta must be finite, got {theta}"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return invalid(format!("sigma must be finite and >= 0, got {sigma}"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return invalid(format!("delta must be finite and > 0, got {delta}"));
        }
        if n_samples == 0 {
            return invalid("n_samples must be >= 1");
        }
        Ok(Self { theta, sigma, delta, n_samples, sigma_bar: sigma / delta })
    }

    /// Scenario parameterized by normalized noise `σ̄ = σ/Δ`.
    pub fn from_sigma_bar(theta: f64, sigma_bar: f64, delta: f64, n_samples: usize) -> Result<Self> {
        Self::new(theta, sigma_bar * delta, delta, n_samples)
    }

    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }

    pub fn series_valid(&self) -> bool {
        self.sigma_bar > SERIES_VALIDITY_SIGMA_BAR
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..*self }
    }

    pub fn with_n(&self, n_samples: usize) -> Self {
        Self { n_samples: n_samples.max(1), ..*self }
    }

    /// `exp(-2π²σ̄²)`, the attenuation of the first harmonic.
    #[inline]
    pub(crate) fn attenuation(&self) -> f64 {
        (-2.0 * PI * PI * self.sigma_bar * self.sigma_bar).exp()
    }

    #[inline]
    pub(crate) fn phase(&self) -> f64 {
        2.0 * PI * self.theta / self.delta
    }
}

/// Mean quantization error `m_e(θ) = -(Δ/π)·e^{-2π²σ̄²}·sin(2πθ/Δ)`.
pub fn error_mean(s: &EstimationScenario) -> f64 {
    -(s.delta / PI) * s.attenuation() * s.phase().sin()
}

/// `d m_e / dθ = -2·e^{-2π²σ̄²}·cos(2πθ/Δ)`.
pub fn error_mean_derivative(s: &EstimationScenario) -> f64 {
    -2.0 * s.attenuation() * s.phase().cos()
}

/// Quantization error variance `σ_e²(θ) = E{e²} − m_e²`, first harmonic only:
/// `Δ²/12 − (Δ²/π²)·e^{-2π²σ̄²}·[cos(2πθ/Δ) + e^{-2π²σ̄²}·sin²(2πθ/Δ)]`.
///
/// The squared-mean term is subtracted. The commonly printed form adds it,
/// which misses exact values by up to about 4% at `σ̄ = 0.3`.
pub fn error_variance(s: &EstimationScenario) -> f64 {
    let d2 = s.delta * s.delta;
    let a = s.attenuation();
    let (sin, cos) = s.phase().sin_cos();
    d2 / 12.0 - d2 / (PI * PI) * a * (cos + a * sin * sin)
}

/// Quantizer output variance
/// `σ_y²(θ) = Δ²/12 + σ² − e^{-2π²σ̄²}·[(4σ² + Δ²/π²)·cos(2πθ/Δ) + (Δ²/π²)·e^{-2π²σ̄²}·sin²(2πθ/Δ)]`,
/// with the same sign convention as [`error_variance`].
pub fn output_variance(s: &EstimationScenario) -> f64 {
    let d2 = s.delta * s.delta;
    let s2 = s.sigma * s.sigma;
    let a = s.attenuation();
    let (sin, cos) = s.phase().sin_cos();
    d2 / 12.0 + s2 - a * ((4.0 * s2 + d2 / (PI * PI)) * cos + d2 / (PI * PI) * a * sin * sin)
}

/// Bias and variance of the arithmetic mean of `N` quantized samples.
pub fn mean_estimator_bias_variance(s: &EstimationScenario) -> (f64, f64) {
    (error_mean(s), output_variance(s) / s.n_samples as f64)
}

/// All moments at one scenario, with the validity flag of the approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    pub error_mean: f64,
    pub error_variance: f64,
    pub output_variance: f64,
    pub series_valid: bool,
}

pub fn summarize(s: &EstimationScenario) -> MomentSummary {
    MomentSummary {
        error_mean: error_mean(s),
        error_variance: error_variance(s),
        output_variance: output_variance(s),
        series_valid: s.series_valid(),
    }
}

/// Normalized (`Δ = 1`) moment equations and their partial derivatives, as
/// used by the moment-based estimator's Newton solver.
///
/// Returns `(mean, variance)` of the quantizer output at `(θ, σ)` together with
/// the Jacobian `[[∂mean/∂θ, ∂mean/∂σ], [∂var/∂θ, ∂var/∂σ]]`.
pub(crate) fn normalized_output_moments(theta: f64, sigma: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let pi2 = PI * PI;
    let a = (-2.0 * pi2 * sigma * sigma).exp();
    let da = -4.0 * pi2 * sigma * a;
    let w = 2.0 * PI * theta;
    let (sin, cos) = w.sin_cos();
    let s2 = sigma * sigma;

    let mean = theta - a * sin / PI;
    let dmean_dt = 1.0 - 2.0 * a * cos;
    let dmean_ds = -da * sin / PI;

    let var = 1.0 / 12.0 + s2 - a * ((4.0 * s2 + 1.0 / pi2) * cos + a * sin * sin / pi2);
    let dvar_dt = -a * (-(4.0 * s2 + 1.0 / pi2) * 2.0 * PI * sin + a * 4.0 * PI * sin * cos / pi2);
    let dvar_ds = 2.0 * sigma
        - da * ((4.0 * s2 + 1.0 / pi2) * cos + a * sin * sin / pi2)
        - a * (8.0 * sigma * cos + da * sin * sin / pi2);

    ([mean, var], [[dmean_dt, dmean_ds], [dvar_dt, dvar_ds]])
}
