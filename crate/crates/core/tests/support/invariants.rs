//! Invariants of the quantizer, the closed-form moments, the Fisher
//! information and the three estimators.
//!
//! Each check draws its cases from a fixed-seed generator, so a run is
//! reproducible and the same cases are seen by the property target and by
//! the acceptance run.

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseResult, TestRng, TestRunner};

use quantized_dc::estimators::{
    arithmetic_mean, build_histogram, histogram_mean, log_likelihood, mle_estimate, moment_estimate,
    sample_variance, CodeHistogram,
};
use quantized_dc::fisher::{fisher_single, score};
use quantized_dc::moments::{error_mean, error_mean_derivative, error_variance, output_variance};
use quantized_dc::quantizer::{nominal_level, quantize_uniform};
use quantized_dc::simulate::synthesize_record;
use quantized_dc::{EstimationScenario, Quantizer, TabulatedQuantizer, UniformQuantizer};

const REL: f64 = 1e-10;
const DEFAULT_CASES: u32 = 256;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn scenario(theta_bar: f64, sigma_bar: f64, delta: f64) -> EstimationScenario {
    EstimationScenario::from_sigma_bar(theta_bar * delta, sigma_bar, delta, 1).unwrap()
}

/// Codes drawn from a small noisy record.
fn record_codes(theta: f64, sigma_bar: f64, n: usize, seed: u64) -> Vec<i64> {
    let q = UniformQuantizer::new(1.0).unwrap();
    synthesize_record(theta, sigma_bar, &q, n, seed).unwrap().iter().map(|y| y.round() as i64).collect()
}

fn check<S>(cases: u32, strategy: S, test: impl Fn(S::Value) -> TestCaseResult) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub type Invariant = (&'static str, fn() -> Result<(), String>);

/// Every invariant with its name, in a fixed order.
pub fn all() -> Vec<Invariant> {
    vec![
        ("quantizer_commutes_with_whole_steps", quantizer_commutes_with_whole_steps),
        ("quantizer_is_monotone", quantizer_is_monotone),
        ("nominal_table_matches_uniform", nominal_table_matches_uniform),
        ("fisher_is_periodic_and_even", fisher_is_periodic_and_even),
        ("fisher_scales_with_step", fisher_scales_with_step),
        ("moments_are_periodic_with_parity", moments_are_periodic_with_parity),
        ("mean_derivative_matches_finite_difference", mean_derivative_matches_finite_difference),
        ("likelihood_slope_is_the_summed_score", likelihood_slope_is_the_summed_score),
        ("mean_is_a_function_of_the_histogram", mean_is_a_function_of_the_histogram),
        ("estimators_shift_by_whole_steps", estimators_shift_by_whole_steps),
        ("moment_solver_recovers_its_own_fixed_point", moment_solver_recovers_its_own_fixed_point),
        ("known_sigma_inverts_the_mean_map", known_sigma_inverts_the_mean_map),
        ("mle_agrees_with_grid_search", mle_agrees_with_grid_search),
        ("moments_match_simulation", moments_match_simulation),
    ]
}

pub fn quantizer_commutes_with_whole_steps() -> Result<(), String> {
    check(DEFAULT_CASES, (-50.0f64..50.0, -1000i64..1000, 0.01f64..10.0), |(x, m, delta)| {
        let q = UniformQuantizer::new(delta).unwrap();
        prop_assert_eq!(q.code(x * delta + m as f64 * delta), q.code(x * delta) + m);
        let y = quantize_uniform(x * delta, delta).unwrap();
        prop_assert!((y - x * delta).abs() <= 0.5 * delta * (1.0 + 1e-12));
        Ok(())
    })
}

pub fn quantizer_is_monotone() -> Result<(), String> {
    check(DEFAULT_CASES, (-20.0f64..20.0, -20.0f64..20.0), |(a, b)| {
        let q = UniformQuantizer::new(0.3).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(q.code(lo) <= q.code(hi));
        let t = TabulatedQuantizer::nominal(0.3, 255, -127).unwrap();
        prop_assert!(t.code(lo) <= t.code(hi));
        Ok(())
    })
}

pub fn nominal_table_matches_uniform() -> Result<(), String> {
    check(DEFAULT_CASES, -30.0f64..30.0, |x| {
        let q = UniformQuantizer::new(0.25).unwrap();
        let t = TabulatedQuantizer::nominal(0.25, 511, -255).unwrap();
        // stay clear of exact transition levels
        let frac = (x / 0.25).fract().abs();
        prop_assume!((frac - 0.5).abs() > 1e-9);
        let c = q.code(x);
        prop_assert_eq!(t.code(x), c);
        let (lo, hi) = t.bin_edges(c);
        prop_assert!((lo - nominal_level(c, 0.25)).abs() < 1e-12);
        prop_assert!((hi - nominal_level(c + 1, 0.25)).abs() < 1e-12);
        Ok(())
    })
}

pub fn fisher_is_periodic_and_even() -> Result<(), String> {
    check(DEFAULT_CASES, (-0.5f64..0.5, 0.05f64..1.5, -20i64..20, 0.1f64..5.0), |(t, sb, m, delta)| {
        let i = fisher_single(&scenario(t, sb, delta)).unwrap();
        let shifted = fisher_single(&scenario(t + m as f64, sb, delta)).unwrap();
        let mirrored = fisher_single(&scenario(-t, sb, delta)).unwrap();
        let reflected = fisher_single(&scenario(1.0 - t, sb, delta)).unwrap();
        prop_assert!(close(i, shifted, REL), "{} {}", i, shifted);
        prop_assert!(close(i, mirrored, REL), "{} {}", i, mirrored);
        prop_assert!(close(i, reflected, REL), "{} {}", i, reflected);
        Ok(())
    })
}

pub fn fisher_scales_with_step() -> Result<(), String> {
    check(DEFAULT_CASES, (-0.5f64..0.5, 0.05f64..1.5, 0.1f64..5.0), |(t, sb, delta)| {
        let a = fisher_single(&scenario(t, sb, 1.0)).unwrap();
        let b = fisher_single(&scenario(t, sb, delta)).unwrap() * delta * delta;
        prop_assert!(close(a, b, REL));
        Ok(())
    })
}

pub fn moments_are_periodic_with_parity() -> Result<(), String> {
    check(DEFAULT_CASES, (-0.5f64..0.5, 0.05f64..1.5, -20i64..20, 0.1f64..5.0), |(t, sb, m, delta)| {
        let s = scenario(t, sb, delta);
        let sh = scenario(t + m as f64, sb, delta);
        let mi = scenario(-t, sb, delta);
        let scale = delta * (-2.0 * std::f64::consts::PI.powi(2) * sb * sb).exp();
        // the mean is odd and periodic; compare on the scale of its amplitude
        prop_assert!((error_mean(&s) - error_mean(&sh)).abs() <= REL * scale + 1e-15 * delta * m.abs() as f64);
        prop_assert!((error_mean(&s) + error_mean(&mi)).abs() <= REL * scale);
        prop_assert!(close(error_variance(&s), error_variance(&sh), 1e-9));
        prop_assert!(close(error_variance(&s), error_variance(&mi), REL));
        prop_assert!(close(output_variance(&s), output_variance(&mi), REL));
        prop_assert!(close(error_mean_derivative(&s), error_mean_derivative(&mi), REL));
        Ok(())
    })
}

pub fn mean_derivative_matches_finite_difference() -> Result<(), String> {
    check(DEFAULT_CASES, (-0.5f64..0.5, 0.05f64..1.0), |(t, sb)| {
        let s = scenario(t, sb, 1.0);
        let h = 1e-5;
        let fd = (error_mean(&s.with_theta(t + h)) - error_mean(&s.with_theta(t - h))) / (2.0 * h);
        let d = error_mean_derivative(&s);
        let scale = (-2.0 * std::f64::consts::PI.powi(2) * sb * sb).exp();
        prop_assert!((fd - d).abs() <= 1e-5 * d.abs().max(scale), "{} {}", fd, d);
        Ok(())
    })
}

pub fn likelihood_slope_is_the_summed_score() -> Result<(), String> {
    check(DEFAULT_CASES, (-1.0f64..1.0, 0.2f64..1.0, -0.5f64..0.5, any::<u64>()), |(t, sb, true_t, seed)| {
        let codes = record_codes(true_t, 0.5, 30, seed);
        let h = CodeHistogram::from_codes(codes, 1.0).unwrap();
        let q = UniformQuantizer::new(1.0).unwrap();
        let s = scenario(t, sb, 1.0);
        let analytic: f64 = h.iter().map(|(c, n)| n as f64 * score(c, &s).unwrap().unwrap()).sum();
        let step = 1e-5;
        let fd = (log_likelihood(&h, t + step, sb, &q).unwrap().value
            - log_likelihood(&h, t - step, sb, &q).unwrap().value)
            / (2.0 * step);
        prop_assert!((fd - analytic).abs() <= 1e-5 * analytic.abs().max(1.0), "{} {}", fd, analytic);
        Ok(())
    })
}

pub fn mean_is_a_function_of_the_histogram() -> Result<(), String> {
    check(DEFAULT_CASES, (prop::collection::vec(-40i64..40, 1..60), 0.01f64..3.0), |(codes, delta)| {
        let samples: Vec<f64> = codes.iter().map(|&c| c as f64 * delta).collect();
        let h = build_histogram(&samples, delta).unwrap();
        let mut reversed = samples.clone();
        reversed.reverse();
        let a = arithmetic_mean(&samples).unwrap().theta_hat;
        prop_assert!((histogram_mean(&h).unwrap().theta_hat - a).abs() <= 1e-12 * (1.0 + a.abs()));
        prop_assert_eq!(h, build_histogram(&reversed, delta).unwrap());
        Ok(())
    })
}

pub fn estimators_shift_by_whole_steps() -> Result<(), String> {
    check(DEFAULT_CASES, (-0.5f64..0.5, 0.2f64..0.8, -500i64..500, any::<u64>()), |(t, sb, m, seed)| {
        let delta = 0.05;
        let codes = record_codes(t, sb, 40, seed);
        let h = CodeHistogram::from_codes(codes.iter().copied(), delta).unwrap();
        let hm = h.shifted(m);
        let shift = m as f64 * delta;
        let tol = 1e-9 * delta * (1.0 + m.abs() as f64);

        let mean = histogram_mean(&h).unwrap().theta_hat;
        prop_assert!((histogram_mean(&hm).unwrap().theta_hat - mean - shift).abs() <= tol);

        let var = h.variance().unwrap();
        let a = moment_estimate(mean, var, delta, None).unwrap();
        let b = moment_estimate(hm.mean(), hm.variance().unwrap(), delta, None).unwrap();
        prop_assert!((b.theta_hat - a.theta_hat - shift).abs() <= 1e-7 * delta, "{:?} {:?}", a, b);

        let q = UniformQuantizer::new(delta).unwrap();
        let a = mle_estimate(&h, &q, None).unwrap();
        let b = mle_estimate(&hm, &q, None).unwrap();
        prop_assert!((b.theta_hat - a.theta_hat - shift).abs() <= tol, "{:?} {:?}", a, b);
        Ok(())
    })
}

pub fn moment_solver_recovers_its_own_fixed_point() -> Result<(), String> {
    check(DEFAULT_CASES, (-0.45f64..0.45, 0.3f64..1.2, -100i64..100), |(t, sb, m)| {
        let delta = 0.02;
        let theta = (t + m as f64) * delta;
        let s = EstimationScenario::from_sigma_bar(theta, sb, delta, 1).unwrap();
        let r = moment_estimate(theta + error_mean(&s), output_variance(&s), delta, None).unwrap();
        prop_assert!((r.theta_hat - theta).abs() <= 1e-8 * delta, "{:?} vs {}", r, theta);
        prop_assert!((r.sigma_hat.unwrap() - sb * delta).abs() <= 1e-8 * delta, "{:?}", r);
        prop_assert!(r.degenerate.is_none());
        Ok(())
    })
}

pub fn known_sigma_inverts_the_mean_map() -> Result<(), String> {
    check(DEFAULT_CASES, (-0.49f64..0.49, 0.19f64..1.0, 0.0f64..1.0), |(t, sb, var)| {
        let s = scenario(t, sb, 1.0);
        prop_assume!(1.0 + error_mean_derivative(&s) > 0.0);
        let r = moment_estimate(t + error_mean(&s), var, 1.0, Some(sb)).unwrap();
        prop_assert!((r.theta_hat - t).abs() <= 1e-8, "{:?} vs {}", r, t);
        Ok(())
    })
}

/// Exhaustive search over `θ ∈ [θ̂ − Δ, θ̂ + Δ]`, `σ ∈ [0.02Δ, 2Δ]`.
fn grid_argmax(h: &CodeHistogram, centre: f64, points: usize) -> (f64, f64, f64) {
    let q = UniformQuantizer::new(1.0).unwrap();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    let last = (points - 1) as f64;
    for j in 0..points {
        let sigma = 0.02 + 1.98 * j as f64 / last;
        for i in 0..points {
            let theta = centre - 1.0 + 2.0 * i as f64 / last;
            let v = log_likelihood(h, theta, sigma, &q).unwrap().value;
            if v > best.0 {
                best = (v, theta, sigma);
            }
        }
    }
    best
}

/// Nelder–Mead against a 2000 × 2000 grid on 25 instances. Instances need
/// three occupied bins so that the maximizer is unique and interior.
pub fn mle_agrees_with_grid_search() -> Result<(), String> {
    check(25, (-0.5f64..0.5, 0.3f64..0.8, 10usize..=50, any::<u64>()), |(t, sb, n, seed)| {
        let h = CodeHistogram::from_codes(record_codes(t, sb, n, seed), 1.0).unwrap();
        prop_assume!((3..=5).contains(&h.occupied()));
        let q = UniformQuantizer::new(1.0).unwrap();
        let r = mle_estimate(&h, &q, None).unwrap();
        let sigma = r.sigma_hat.unwrap();
        prop_assume!(sigma < 1.9);
        let (best, gt, gs) = grid_argmax(&h, r.theta_hat, 2000);
        let ll = r.objective_value.unwrap();
        prop_assert!(ll >= best - 1e-9 * best.abs(), "simplex {} below grid {}", ll, best);
        prop_assert!((r.theta_hat - gt).abs() <= 1e-3, "{:?} vs grid ({}, {})", r, gt, gs);
        Ok(())
    })
}

/// First-harmonic moments against 10⁶ simulated samples.
pub fn moments_match_simulation() -> Result<(), String> {
    check(6, (-0.5f64..0.5, 0.3f64..1.0, any::<u64>()), |(t, sb, seed)| {
        let n = 1_000_000;
        let q = UniformQuantizer::new(1.0).unwrap();
        let y = synthesize_record(t, sb, &q, n, seed).unwrap();
        let mean = arithmetic_mean(&y).unwrap().theta_hat;
        let var = sample_variance(&y).unwrap();
        let m4 = y.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n as f64;
        let s = scenario(t, sb, 1.0);
        let se_mean = (var / n as f64).sqrt();
        let se_var = ((m4 - var * var) / n as f64).sqrt();
        prop_assert!((mean - t - error_mean(&s)).abs() < 4.0 * se_mean, "{} vs {}", mean, t + error_mean(&s));
        prop_assert!((var - output_variance(&s)).abs() < 4.0 * se_var, "{} vs {}", var, output_variance(&s));
        Ok(())
    })
}
