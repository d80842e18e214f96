use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::rng;
use super::sweep::csv_err;
use crate::error::{invalid, Result};
use crate::fisher::{cell_probability, code_window, fisher_single, score};
use crate::moments::EstimationScenario;

/// Monte Carlo estimate of `Δ²·I₁` at one `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherMcPoint {
    pub theta_over_delta: f64,
    /// Sample mean of the squared score, times `Δ²`.
    pub empirical: f64,
    /// Sample standard error of `empirical`.
    pub std_error: f64,
    /// Standard error of `empirical` implied by the exact code distribution.
    /// Unlike the sample value it does not collapse to zero when the rare
    /// outer codes that carry the tail of the squared score are never drawn.
    pub model_std_error: f64,
    /// `Δ²·fisher_single`.
    pub theory: f64,
    pub score_mean: f64,
    pub score_std_error: f64,
}

/// Empirical Fisher information as the sample mean of the squared score
/// `∂/∂θ log p` at the drawn codes.
///
/// One set of `runs` standard normal draws, generated from `seed`, is reused
/// at every `θ` (common random numbers), so neighboring points are strongly
/// correlated and the curve is smooth.
pub fn fisher_mc_validate(
    theta_grid: &[f64],
    sigma_bar: f64,
    runs: usize,
    seed: u64,
) -> Result<Vec<FisherMcPoint>> {
    if !(sigma_bar > 0.0 && sigma_bar.is_finite()) {
        return invalid(format!("sigma_bar must be finite and > 0, got {sigma_bar}"));
    }
    if runs < 2 {
        return invalid("need at least two runs");
    }
    if theta_grid.iter().any(|t| !t.is_finite()) {
        return invalid("theta grid must be finite");
    }
    let mut g = rng::stream(seed);
    let draws: Vec<f64> = (0..runs).map(|_| g.sample::<f64, _>(StandardNormal)).collect();

    theta_grid
        .par_iter()
        .map(|&theta| {
            let s = EstimationScenario::from_sigma_bar(theta, sigma_bar, 1.0, 1)?;
            // Scores for every code a draw within 12σ can reach; anything else
            // is computed on demand.
            let (lo, hi) = code_window(theta, sigma_bar, 1.0);
            let table: Vec<Option<f64>> =
                (lo..=hi).map(|c| score(c, &s)).collect::<Result<_>>()?;
            let lookup = |c: i64| -> Result<f64> {
                let v = if (lo..=hi).contains(&c) { table[(c - lo) as usize] } else { score(c, &s)? };
                Ok(v.unwrap_or(0.0))
            };
            let theory = fisher_single(&s)?;
            let mut fourth = 0.0;
            for (c, u) in (lo..=hi).zip(&table) {
                if let Some(u) = u {
                    fourth += cell_probability(c as f64, &s)? * u.powi(4);
                }
            }
            let (mut s1, mut s2, mut q1, mut q2) = (0.0, 0.0, 0.0, 0.0);
            for &z in &draws {
                let c = (theta + sigma_bar * z + 0.5).floor() as i64;
                let u = lookup(c)?;
                let u2 = u * u;
                s1 += u;
                s2 += u * u;
                q1 += u2;
                q2 += u2 * u2;
            }
            let n = runs as f64;
            let se = |sum: f64, sum_sq: f64| {
                let m = sum / n;
                (((sum_sq - n * m * m) / (n - 1.0)).max(0.0) / n).sqrt()
            };
            Ok(FisherMcPoint {
                theta_over_delta: theta,
                empirical: q1 / n,
                std_error: se(q1, q2),
                model_std_error: ((fourth - theory * theory).max(0.0) / n).sqrt(),
                theory,
                score_mean: s1 / n,
                score_std_error: se(s1, s2),
            })
        })
        .collect()
}

/// `theta_over_delta,empirical,std_error,model_std_error,theory,score_mean,score_std_error`.
pub fn write_fisher_mc_csv<W: Write>(points: &[FisherMcPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "theta_over_delta",
        "empirical",
        "std_error",
        "model_std_error",
        "theory",
        "score_mean",
        "score_std_error",
    ])
    .map_err(csv_err)?;
    for p in points {
        out.write_record([
            p.theta_over_delta.to_string(),
            format!("{:e}", p.empirical),
            format!("{:e}", p.std_error),
            format!("{:e}", p.model_std_error),
            format!("{:e}", p.theory),
            format!("{:e}", p.score_mean),
            format!("{:e}", p.score_std_error),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_variance_matches_information() {
        let p = fisher_mc_validate(&[0.17], 0.25, 1_000_000, 77).unwrap()[0];
        assert!((p.empirical - p.theory).abs() < 3.0 * p.std_error, "{p:?}");
        assert!(p.score_mean.abs() < 3.0 * p.score_std_error, "{p:?}");
        assert!((p.model_std_error / p.std_error - 1.0).abs() < 0.05, "{p:?}");
    }

    #[test]
    fn periodic_with_common_draws() {
        let a = fisher_mc_validate(&[0.3, 1.3], 0.2, 10_000, 3).unwrap();
        assert!((a[0].empirical - a[1].empirical).abs() < 1e-9 * a[0].empirical);
        assert!(fisher_mc_validate(&[0.0], 0.0, 10, 3).is_err());
    }
}
