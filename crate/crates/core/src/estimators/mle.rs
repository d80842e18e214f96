use super::nelder_mead::NelderMead;
use super::{CodeHistogram, Degeneracy, EstimateReport, EstimatorId, SIGMA_FLOOR};
use crate::error::{invalid, Error, Result};
use crate::normal;
use crate::quantizer::Quantizer;

/// Bin probabilities are floored here before taking the logarithm.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    /// At least one occupied bin probability was below [`PROBABILITY_FLOOR`].
    pub clamped: bool,
}

/// `Σ_i N_i·log[Φ((U_i − θ)/σ) − Φ((L_i − θ)/σ)]` over the occupied codes,
/// with `(L_i, U_i)` the input interval the quantizer maps to code `i`.
pub fn log_likelihood<Q: Quantizer + ?Sized>(
    hist: &CodeHistogram,
    theta: f64,
    sigma: f64,
    q: &Q,
) -> Result<LogLikelihood> {
    if !(sigma > 0.0) {
        return Err(Error::DegenerateNoise);
    }
    if !theta.is_finite() || !sigma.is_finite() {
        return invalid("theta and sigma must be finite");
    }
    let mut value = 0.0;
    let mut clamped = false;
    for (code, n) in hist.iter() {
        let (lo, hi) = q.bin_edges(code);
        let p = normal::interval((lo - theta) / sigma, (hi - theta) / sigma);
        let p = if p < PROBABILITY_FLOOR {
            clamped = true;
            PROBABILITY_FLOOR
        } else {
            p
        };
        value += n as f64 * p.ln();
    }
    Ok(LogLikelihood { value, clamped })
}

/// Tuning of the maximum-likelihood search.
#[derive(Debug, Clone, PartialEq)]
pub struct MleOptions {
    pub simplex: NelderMead,
    /// Initial simplex step in `θ` (units of Δ) and in `log σ`.
    pub initial_step: [f64; 2],
    /// Number of restarts after the first run.
    pub restarts: usize,
    /// `θ` jitter of the restarts, in units of Δ.
    pub jitter: f64,
    /// Lower bound on `σ`, in units of Δ.
    pub sigma_floor: f64,
    /// Record the best objective per iteration of the first run.
    pub trace: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            simplex: NelderMead::default(),
            initial_step: [0.25, 0.5],
            restarts: 3,
            jitter: 0.3,
            sigma_floor: SIGMA_FLOOR,
            trace: false,
        }
    }
}

/// Occupied bins in coordinates relative to a base code, in units of Δ.
struct Prepared {
    bins: Vec<(f64, f64, f64)>,
}

impl Prepared {
    fn new<Q: Quantizer + ?Sized>(hist: &CodeHistogram, q: &Q, base: i64) -> Self {
        let delta = q.delta();
        let origin = base as f64 * delta;
        let bins = hist
            .iter()
            .map(|(code, n)| {
                let (lo, hi) = q.bin_edges(code);
                ((lo - origin) / delta, (hi - origin) / delta, n as f64)
            })
            .collect();
        Self { bins }
    }

    fn uniform(hist: &CodeHistogram, base: i64) -> Self {
        let bins = hist
            .iter()
            .map(|(code, n)| {
                let c = (code - base) as f64;
                (c - 0.5, c + 0.5, n as f64)
            })
            .collect();
        Self { bins }
    }

    fn neg_log_likelihood(&self, theta: f64, sigma: f64) -> (f64, bool) {
        let mut v = 0.0;
        let mut clamped = false;
        for &(lo, hi, n) in &self.bins {
            let mut p = normal::interval((lo - theta) / sigma, (hi - theta) / sigma);
            if p < PROBABILITY_FLOOR {
                clamped = true;
                p = PROBABILITY_FLOOR;
            }
            v -= n * p.ln();
        }
        (v, clamped)
    }
}

/// Maximum-likelihood estimate of `(θ, σ)` by Nelder–Mead over `(θ, log σ)`.
///
/// The default start is the sample mean and sample standard deviation
/// (floored). With a single occupied bin the likelihood keeps growing as
/// `σ → 0`; the bin center and the `σ` floor are returned with a flag.
pub fn mle_estimate<Q: Quantizer + ?Sized>(
    hist: &CodeHistogram,
    q: &Q,
    init: Option<(f64, f64)>,
) -> Result<EstimateReport> {
    mle_estimate_with(hist, q, init, &MleOptions::default())
}

pub fn mle_estimate_with<Q: Quantizer + ?Sized>(
    hist: &CodeHistogram,
    q: &Q,
    init: Option<(f64, f64)>,
    opts: &MleOptions,
) -> Result<EstimateReport> {
    mle_core(hist, q, init, opts).map(|(r, _)| r)
}

/// Ideal uniform quantizer with the histogram's step.
pub(crate) fn mle_uniform(hist: &CodeHistogram, opts: &MleOptions) -> Result<EstimateReport> {
    let q = crate::quantizer::UniformQuantizer::new(hist.delta())?;
    mle_core(hist, &q, None, opts).map(|(r, _)| r)
}

#[doc(hidden)]
pub fn mle_trace<Q: Quantizer + ?Sized>(hist: &CodeHistogram, q: &Q) -> Result<Vec<f64>> {
    let opts = MleOptions { trace: true, ..Default::default() };
    mle_core(hist, q, None, &opts).map(|(_, t)| t.unwrap_or_default())
}

fn mle_core<Q: Quantizer + ?Sized>(
    hist: &CodeHistogram,
    q: &Q,
    init: Option<(f64, f64)>,
    opts: &MleOptions,
) -> Result<(EstimateReport, Option<Vec<f64>>)> {
    if hist.is_empty() {
        return invalid("maximum likelihood on an empty histogram");
    }
    let delta = q.delta();
    if (hist.delta() - delta).abs() > 1e-12 * delta {
        return invalid(format!(
            "histogram step {} does not match quantizer step {delta}",
            hist.delta()
        ));
    }
    let floor = opts.sigma_floor;

    if hist.occupied() == 1 {
        let (code, _) = hist.iter().next().expect("non-empty");
        let (lo, hi) = q.bin_edges(code);
        let center = if lo.is_finite() && hi.is_finite() { 0.5 * (lo + hi) } else { q.level(code) };
        let report = EstimateReport {
            estimator: EstimatorId::Mle,
            theta_hat: center,
            sigma_hat: Some(floor * delta),
            converged: false,
            iterations: 0,
            objective_value: Some(0.0),
            degenerate: Some(Degeneracy::SingleBin),
        };
        return Ok((report, None));
    }

    let (base, rel_mean, code_var) = hist.anchored();
    // Ideal bins are formed in integer arithmetic, so shifting all codes by
    // `m` shifts the default-start estimate by exactly `m·Δ`.
    let prepared =
        if q.is_ideal_uniform() { Prepared::uniform(hist, base) } else { Prepared::new(hist, q, base) };
    let (theta0, sigma0) = match init {
        Some((t, s)) => (t / delta - base as f64, (s / delta).max(floor)),
        None => {
            (rel_mean, code_var.sqrt().max(floor))
        }
    };
    if !theta0.is_finite() || !sigma0.is_finite() {
        return invalid("initial point must be finite");
    }

    let objective = |x: &[f64; 2]| prepared.neg_log_likelihood(x[0], x[1].exp().max(floor)).0;
    let nm = &opts.simplex;
    let mut best = nm.minimize(objective, [theta0, sigma0.ln()], opts.initial_step, opts.trace);
    let trace = best.trace.take();
    let mut iterations = best.iterations;
    for k in 0..opts.restarts {
        let jitter = match k % 3 {
            0 => opts.jitter,
            1 => -opts.jitter,
            _ => 0.0,
        };
        let start = [best.x[0] + jitter, best.x[1]];
        let run = nm.minimize(objective, start, opts.initial_step, false);
        iterations += run.iterations;
        if run.value < best.value {
            best = run;
        }
    }

    let sigma_n = best.x[1].exp().max(floor);
    let (nll, clamped) = prepared.neg_log_likelihood(best.x[0], sigma_n);
    let degenerate = if best.x[1].exp() <= floor {
        Some(Degeneracy::SigmaAtFloor)
    } else if clamped {
        Some(Degeneracy::ProbabilityClamped)
    } else {
        None
    };
    let report = EstimateReport {
        estimator: EstimatorId::Mle,
        theta_hat: (base as f64 + best.x[0]) * delta,
        sigma_hat: Some(sigma_n * delta),
        converged: best.converged,
        iterations,
        objective_value: Some(-nll),
        degenerate,
    };
    Ok((report, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::{TabulatedQuantizer, UniformQuantizer};

    #[test]
    fn single_bin_log_likelihood() {
        let q = UniformQuantizer::new(1.0).unwrap();
        let h = CodeHistogram::from_counts([(0, 40)], 1.0).unwrap();
        let ll = log_likelihood(&h, 0.0, 0.2, &q).unwrap();
        let per = (normal::cdf(2.5) - normal::cdf(-2.5)).ln();
        assert!((ll.value - 40.0 * per).abs() < 1e-12);
        assert!((per + 0.012_498).abs() < 1e-6);
        assert!(!ll.clamped);
        assert_eq!(log_likelihood(&h, 0.0, 0.0, &q), Err(Error::DegenerateNoise));
    }

    #[test]
    fn uniform_and_nominal_tabulated_agree() {
        let u = UniformQuantizer::new(0.5).unwrap();
        let t = TabulatedQuantizer::nominal(0.5, 41, -20).unwrap();
        let h = CodeHistogram::from_counts([(-2, 3), (-1, 10), (0, 14), (1, 6), (3, 1)], 0.5).unwrap();
        for &(th, s) in &[(0.1, 0.3), (-0.4, 0.2), (0.0, 1.0)] {
            let a = log_likelihood(&h, th, s, &u).unwrap().value;
            let b = log_likelihood(&h, th, s, &t).unwrap().value;
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn clamp_is_flagged() {
        let q = UniformQuantizer::new(1.0).unwrap();
        let h = CodeHistogram::from_counts([(0, 1), (100, 1)], 1.0).unwrap();
        let ll = log_likelihood(&h, 0.0, 0.1, &q).unwrap();
        assert!(ll.clamped);
        assert!(ll.value.is_finite());
    }

    #[test]
    fn equal_split_lands_on_transition() {
        let q = UniformQuantizer::new(2.0).unwrap();
        let h = CodeHistogram::from_counts([(3, 25), (4, 25)], 2.0).unwrap();
        let r = mle_estimate(&h, &q, None).unwrap();
        assert!((r.theta_hat - 3.5 * 2.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn single_bin_is_degenerate() {
        let q = UniformQuantizer::new(1.0).unwrap();
        let h = CodeHistogram::from_counts([(0, 30)], 1.0).unwrap();
        let r = mle_estimate(&h, &q, None).unwrap();
        assert_eq!(r.theta_hat, 0.0);
        assert_eq!(r.degenerate, Some(Degeneracy::SingleBin));
        assert_eq!(r.sigma_hat, Some(SIGMA_FLOOR));
    }

    #[test]
    fn recovers_parameters_from_exact_counts() {
        // Counts proportional to the true cell probabilities.
        let (theta, sigma) = (0.37, 0.61);
        let q = UniformQuantizer::new(1.0).unwrap();
        let counts: Vec<(i64, u64)> = (-6..=7)
            .map(|c| {
                let p = normal::interval((c as f64 - 0.5 - theta) / sigma, (c as f64 + 0.5 - theta) / sigma);
                (c, (p * 1e7).round() as u64)
            })
            .collect();
        let h = CodeHistogram::from_counts(counts, 1.0).unwrap();
        let r = mle_estimate(&h, &q, None).unwrap();
        assert!((r.theta_hat - theta).abs() < 1e-4, "{r:?}");
        assert!((r.sigma_hat.unwrap() - sigma).abs() < 1e-4);
        assert!(r.degenerate.is_none());
        assert!(r.converged);
    }

    #[test]
    fn objective_trace_is_monotone() {
        let q = UniformQuantizer::new(1.0).unwrap();
        let h = CodeHistogram::from_counts([(-1, 4), (0, 11), (1, 7), (2, 1)], 1.0).unwrap();
        let t = mle_trace(&h, &q).unwrap();
        assert!(!t.is_empty());
        assert!(t.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn fast_path_matches_generic_path() {
        let q = UniformQuantizer::new(1.0).unwrap();
        let h = CodeHistogram::from_counts([(4, 3), (5, 9), (6, 5), (7, 1)], 1.0).unwrap();
        let a = mle_estimate(&h, &q, None).unwrap();
        let b = mle_uniform(&h, &MleOptions::default()).unwrap();
        assert!((a.theta_hat - b.theta_hat).abs() < 1e-12);
    }

    #[test]
    fn mismatched_step_rejected() {
        let q = UniformQuantizer::new(1.0).unwrap();
        let h = CodeHistogram::from_counts([(0, 1), (1, 1)], 0.5).unwrap();
        assert!(mle_estimate(&h, &q, None).is_err());
    }
}
