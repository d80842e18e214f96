//! Fisher information carried by one quantized sample of a constant in
//! Gaussian noise, the Cramér–Rao bounds built on it, closed-form
//! approximations of its extrema over `θ`, and the quantization efficiency.
//!
//! Everything is evaluated in normalized units (`θ/Δ`, `σ̄`) and rescaled by
//! `1/Δ²`, so results depend on `Δ` only through that factor.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::moments::{error_mean_derivative, EstimationScenario};
use crate::normal;

/// Half-width of the code window, in noise standard deviations.
const WINDOW_SIGMAS: f64 = 12.0;
/// Terms whose cell probability falls below this are dropped.
const MIN_CELL_PROBABILITY: f64 = 1e-300;
/// `Δ²·I₁` below this is reported as an unbounded CRLB.
pub const UNBOUNDED_CRLB_THRESHOLD: f64 = 1e-30;
/// Grid size used by the extrema search on `[0, Δ/2]`.
pub const EXTREMA_GRID_POINTS: usize = 1000;

fn require_noise(s: &EstimationScenario) -> Result<()> {
    if s.sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateNoise)
    }
}

/// Probability `p(x; θ)` that the quantizer outputs the level `x`.
pub fn cell_probability(x: f64, s: &EstimationScenario) -> Result<f64> {
    require_noise(s)?;
    let lo = (-0.5 * s.delta + x - s.theta) / s.sigma;
    let hi = (0.5 * s.delta + x - s.theta) / s.sigma;
    Ok(normal::interval(lo, hi))
}

/// Inclusive range of codes `n` with `|nΔ − θ| ≤ 12σ + Δ`.
pub(crate) fn code_window(theta_bar: f64, sigma_bar: f64, widen: f64) -> (i64, i64) {
    let half = widen * (WINDOW_SIGMAS * sigma_bar + 1.0);
    ((theta_bar - half).ceil() as i64, (theta_bar + half).floor() as i64)
}

/// `Δ²·I₁` summed over the codes in the window scaled by `widen`.
fn normalized_fisher(theta_bar: f64, sigma_bar: f64, widen: f64) -> f64 {
    let (lo, hi) = code_window(theta_bar, sigma_bar, widen);
    let mut sum = 0.0;
    for n in lo..=hi {
        let a = (n as f64 - 0.5 - theta_bar) / sigma_bar;
        let b = (n as f64 + 0.5 - theta_bar) / sigma_bar;
        let p = normal::interval(a, b);
        if p < MIN_CELL_PROBABILITY {
            continue;
        }
        let d = normal::gauss_kernel(a) - normal::gauss_kernel(b);
        sum += d * d / p;
    }
    sum / (2.0 * PI * sigma_bar * sigma_bar)
}

/// Fisher information `I₁(θ)` of a single quantized sample.
pub fn fisher_single(s: &EstimationScenario) -> Result<f64> {
    require_noise(s)?;
    Ok(normalized_fisher(s.theta / s.delta, s.sigma_bar(), 1.0) / (s.delta * s.delta))
}

/// Same sum over a wider code window; used to check truncation.
#[doc(hidden)]
pub fn fisher_single_widened(s: &EstimationScenario, widen: f64) -> Result<f64> {
    require_noise(s)?;
    Ok(normalized_fisher(s.theta / s.delta, s.sigma_bar(), widen) / (s.delta * s.delta))
}

/// `I_N(θ) = N·I₁(θ)`.
pub fn fisher_n(s: &EstimationScenario) -> Result<f64> {
    Ok(s.n_samples as f64 * fisher_single(s)?)
}

fn bounded_information(s: &EstimationScenario) -> Result<f64> {
    let i1 = fisher_single(s)?;
    if i1 * s.delta * s.delta < UNBOUNDED_CRLB_THRESHOLD {
        return Err(Error::UnboundedCrlb { information: i1 });
    }
    Ok(i1)
}

/// `1 / (N·I₁(θ))`, the bound for unbiased estimators.
pub fn crlb_unbiased(s: &EstimationScenario) -> Result<f64> {
    Ok(1.0 / (s.n_samples as f64 * bounded_information(s)?))
}

/// `(1 + dm_e/dθ)² / (N·I₁(θ))`, the bound for estimators whose bias is the
/// mean quantization error.
pub fn crlb_biased(s: &EstimationScenario) -> Result<f64> {
    let g = 1.0 + error_mean_derivative(s);
    Ok(g * g / (s.n_samples as f64 * bounded_information(s)?))
}

/// Score `∂/∂θ log p(nΔ; θ)` of observing code `n`.
///
/// `None` when the code is outside the numerically representable support.
pub fn score(code: i64, s: &EstimationScenario) -> Result<Option<f64>> {
    require_noise(s)?;
    let c = code as f64 * s.delta;
    let a = (c - 0.5 * s.delta - s.theta) / s.sigma;
    let b = (c + 0.5 * s.delta - s.theta) / s.sigma;
    let p = normal::interval(a, b);
    if p < MIN_CELL_PROBABILITY {
        return Ok(None);
    }
    Ok(Some((normal::pdf(a) - normal::pdf(b)) / (s.sigma * p)))
}

/// Closed-form approximation `I_M ≈ 2/(πσ²)` of the maximum over `θ`.
pub fn fisher_max_approx(s: &EstimationScenario) -> f64 {
    2.0 / (PI * s.sigma * s.sigma)
}

/// Closed-form approximation of the minimum over `θ`,
/// `I_m ≈ e^{-1/(4σ̄²)} / (πσ²·[Φ(3/(2σ̄)) − Φ(1/(2σ̄))])`.
pub fn fisher_min_approx(s: &EstimationScenario) -> f64 {
    let sb = s.sigma_bar();
    let num = (-0.25 / (sb * sb)).exp();
    let den = normal::interval(0.5 / sb, 1.5 / sb);
    if den < MIN_CELL_PROBABILITY {
        // numerator underflows faster than the tail probability
        return 0.0;
    }
    num / (den * PI * s.sigma * s.sigma)
}

/// Both extrema approximations are only claimed for `σ̄ < 0.3`.
pub fn extrema_approx_valid(s: &EstimationScenario) -> bool {
    s.sigma_bar() < 0.3
}

/// `min_θ I₁(θ) / I_∞` with `I_∞ = 1/σ²`.
///
/// The minimum is `I₁(0)`; a coarse grid over `[0, Δ/2]` guards that claim and
/// the smaller value wins.
pub fn quantization_efficiency(sigma_bar: f64) -> Result<f64> {
    if !(sigma_bar > 0.0 && sigma_bar.is_finite()) {
        return Err(Error::DegenerateNoise);
    }
    let at_zero = normalized_fisher(0.0, sigma_bar, 1.0);
    let grid_min = (0..=100)
        .map(|k| normalized_fisher(0.5 * k as f64 / 100.0, sigma_bar, 1.0))
        .fold(f64::INFINITY, f64::min);
    Ok(at_zero.min(grid_min) * sigma_bar * sigma_bar)
}

/// Same ratio using the closed-form minimum approximation.
pub fn quantization_efficiency_approx(sigma_bar: f64) -> Result<f64> {
    let s = EstimationScenario::from_sigma_bar(0.0, sigma_bar, 1.0, 1)?;
    Ok(fisher_min_approx(&s) * sigma_bar * sigma_bar)
}

/// Extrema, reference informations and derived ratios at one noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformationSummary {
    /// `I_M`, maximum of `I₁` over `θ`.
    pub i_max: f64,
    /// `I_m`, minimum of `I₁` over `θ`.
    pub i_min: f64,
    /// `θ` (in `[0, Δ/2]`) where the maximum is attained.
    pub theta_max: f64,
    /// `θ` (in `[0, Δ/2]`) where the minimum is attained.
    pub theta_min: f64,
    /// Noise-model information `1/(σ² + Δ²/12)`.
    pub i_noise_model: f64,
    /// Unquantized information `1/σ²`.
    pub i_unquantized: f64,
    /// `I_M / I_m`.
    pub rho: f64,
    /// `I_m / I_∞`.
    pub qe: f64,
}

/// Golden-section search for the maximizer of `f` on `[a, b]`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Grid search on `[0, Δ/2]` followed by golden-section polishing to `10⁻⁹·Δ`.
///
/// Periodicity and the two reflection symmetries of `I₁` make that interval
/// sufficient.
pub fn information_summary(s: &EstimationScenario) -> Result<InformationSummary> {
    require_noise(s)?;
    let sb = s.sigma_bar();
    let f = |t: f64| normalized_fisher(t, sb, 1.0);
    let h = 0.5 / (EXTREMA_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..EXTREMA_GRID_POINTS).map(|k| f(k as f64 * h)).collect();
    let (kmax, _) = grid
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    let (kmin, _) = grid
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });

    let refine = |k: usize, sign: f64| {
        let lo = (k as f64 - 1.0).max(0.0) * h;
        let hi = ((k + 1) as f64 * h).min(0.5);
        let (t, v) = golden_max(|t| sign * f(t), lo, hi, 1e-9);
        let v = sign * v;
        // keep the grid value when it is at least as good (endpoint extrema)
        if sign * grid[k] >= sign * v {
            (k as f64 * h, grid[k])
        } else {
            (t, v)
        }
    };
    let (tmax, imax) = refine(kmax, 1.0);
    let (tmin, imin) = refine(kmin, -1.0);

    let d2 = s.delta * s.delta;
    let i_unquantized = 1.0 / (s.sigma * s.sigma);
    let i_max = imax / d2;
    let i_min = imin / d2;
    Ok(InformationSummary {
        i_max,
        i_min,
        theta_max: tmax * s.delta,
        theta_min: tmin * s.delta,
        i_noise_model: 1.0 / (s.sigma * s.sigma + d2 / 12.0),
        i_unquantized,
        rho: i_max / i_min,
        qe: i_min / i_unquantized,
    })
}
