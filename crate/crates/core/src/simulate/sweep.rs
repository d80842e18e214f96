use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{QuantizerSpec, SweepConfig};
use super::{draw_codes, estimate, rng, Outcome};
use crate::error::{invalid, Result};
use crate::estimators::{CodeHistogram, EstimatorId, MleOptions};
use crate::quantizer::{nonlinearity, Quantizer, QuantizerModel};

/// Result of one `(σ̄, θ)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub sigma_index: usize,
    pub theta_index: usize,
    /// Per estimator, in the order of [`MseSweepReport::estimators`].
    pub mse: Vec<f64>,
    pub degenerate: Vec<usize>,
    pub failures: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseSweepReport {
    pub config: SweepConfig,
    /// Mean first, then the other selected estimators.
    pub estimators: Vec<EstimatorId>,
    pub theta_grid: Vec<f64>,
    /// Row-major over `(σ̄ index, θ index)`.
    pub cells: Vec<CellResult>,
    /// `averaged[e][s]`: MSE of estimator `e` averaged over the `θ` grid at `σ̄_s`.
    pub averaged: Vec<Vec<f64>>,
    /// Measured `(max |INL|, max |DNL|)` of a tabulated data quantizer, in steps.
    pub level_errors: Option<(f64, f64)>,
    pub wall_seconds: f64,
}

impl MseSweepReport {
    fn estimator_index(&self, id: EstimatorId) -> Option<usize> {
        self.estimators.iter().position(|&e| e == id)
    }

    pub fn cell(&self, sigma_index: usize, theta_index: usize) -> &CellResult {
        &self.cells[sigma_index * self.theta_grid.len() + theta_index]
    }

    pub fn mse(&self, id: EstimatorId, sigma_index: usize, theta_index: usize) -> Option<f64> {
        let e = self.estimator_index(id)?;
        Some(self.cell(sigma_index, theta_index).mse[e])
    }

    pub fn averaged_mse(&self, id: EstimatorId, sigma_index: usize) -> Option<f64> {
        Some(self.averaged[self.estimator_index(id)?][sigma_index])
    }

    /// `ρ = averaged MSE of id / averaged MSE of the mean` at `σ̄_s`.
    pub fn ratio(&self, id: EstimatorId, sigma_index: usize) -> Option<f64> {
        Some(self.averaged_mse(id, sigma_index)? / self.averaged_mse(EstimatorId::Mean, sigma_index)?)
    }

    pub fn degenerate_total(&self, id: EstimatorId) -> usize {
        self.estimator_index(id).map_or(0, |e| self.cells.iter().map(|c| c.degenerate[e]).sum())
    }

    pub fn failure_total(&self, id: EstimatorId) -> usize {
        self.estimator_index(id).map_or(0, |e| self.cells.iter().map(|c| c.failures[e]).sum())
    }

    /// Tidy table `estimator,sigma_bar,theta_over_delta,mse`; MSE in units of Δ².
    pub fn write_mse_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["estimator", "sigma_bar", "theta_over_delta", "mse"]).map_err(csv_err)?;
        let d2 = self.config.quantizer.delta().powi(2);
        for (e, id) in self.estimators.iter().enumerate() {
            for c in &self.cells {
                out.write_record([
                    id.to_string(),
                    self.config.sigma_bar_grid[c.sigma_index].to_string(),
                    self.theta_grid[c.theta_index].to_string(),
                    format!("{:e}", c.mse[e] / d2),
                ])
                .map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// `sigma_bar,estimator,avg_mse,rho,degenerate,failures` per `σ̄`.
    pub fn write_ratios_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sigma_bar", "estimator", "avg_mse", "rho", "degenerate", "failures"])
            .map_err(csv_err)?;
        let d2 = self.config.quantizer.delta().powi(2);
        for (s, sb) in self.config.sigma_bar_grid.iter().enumerate() {
            for (e, id) in self.estimators.iter().enumerate() {
                let row = &self.cells[s * self.theta_grid.len()..(s + 1) * self.theta_grid.len()];
                out.write_record([
                    sb.to_string(),
                    id.to_string(),
                    format!("{:e}", self.averaged[e][s] / d2),
                    format!("{:.6}", self.ratio(*id, s).unwrap_or(f64::NAN)),
                    row.iter().map(|c| c.degenerate[e]).sum::<usize>().to_string(),
                    row.iter().map(|c| c.failures[e]).sum::<usize>().to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Configuration echo, crate version and wall time.
    pub fn write_manifest<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# run manifest")?;
        writeln!(w, "crate_version = {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "wall_seconds = {:.3}", self.wall_seconds)?;
        writeln!(w, "worker_threads = {}", rayon::current_num_threads())?;
        if let Some((inl, dnl)) = self.level_errors {
            writeln!(w, "max_abs_inl = {inl:.4}")?;
            writeln!(w, "max_abs_dnl = {dnl:.4}")?;
        }
        w.write_all(self.config.to_text().as_bytes())?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Io(e.to_string())
}

/// Runs every `(σ̄, θ)` cell of the configuration.
///
/// Every estimator sees the same `R` records in a cell. Records come from
/// the configured quantizer; estimators assume the ideal uniform quantizer
/// with the same nominal step. Estimator failures fall back to the sample
/// mean and are counted, so a bad cell never aborts the sweep.
pub fn run_sweep(config: &SweepConfig) -> Result<MseSweepReport> {
    config.validate()?;
    let quantizer = config.quantizer.build()?;
    sweep_with(config, &quantizer)
}

fn sweep_with(config: &SweepConfig, q: &QuantizerModel) -> Result<MseSweepReport> {
    let start = Instant::now();
    let estimators = config.estimator_set();
    let theta_grid = config.theta_grid();
    let delta = q.delta();
    let opts = MleOptions::default();
    let n_theta = theta_grid.len();

    let cells: Vec<CellResult> = (0..config.sigma_bar_grid.len() * n_theta)
        .into_par_iter()
        .map(|k| {
            let (si, ti) = (k / n_theta, k % n_theta);
            let sigma = config.sigma_bar_grid[si] * delta;
            let theta = theta_grid[ti] * delta;
            let mut sq = vec![0.0; estimators.len()];
            let mut degenerate = vec![0; estimators.len()];
            let mut failures = vec![0; estimators.len()];
            for r in 0..config.records {
                let seed = rng::cell_seed(config.master_seed, si as u64, ti as u64, r as u64);
                let codes = draw_codes(theta, sigma, q, config.n_samples, &mut rng::stream(seed));
                let hist = CodeHistogram::from_codes(codes, delta).expect("n_samples >= 1");
                for (e, &id) in estimators.iter().enumerate() {
                    let (est, outcome) = estimate(id, &hist, &opts);
                    match outcome {
                        Outcome::Ok => {}
                        Outcome::Degenerate => degenerate[e] += 1,
                        Outcome::Failed => failures[e] += 1,
                    }
                    sq[e] += (theta - est) * (theta - est);
                }
            }
            let r = config.records as f64;
            CellResult {
                sigma_index: si,
                theta_index: ti,
                mse: sq.into_iter().map(|v| v / r).collect(),
                degenerate,
                failures,
            }
        })
        .collect();

    let averaged = (0..estimators.len())
        .map(|e| {
            (0..config.sigma_bar_grid.len())
                .map(|s| {
                    let row = &cells[s * n_theta..(s + 1) * n_theta];
                    row.iter().map(|c| c.mse[e]).sum::<f64>() / n_theta as f64
                })
                .collect()
        })
        .collect();

    Ok(MseSweepReport {
        config: config.clone(),
        estimators,
        theta_grid,
        cells,
        averaged,
        level_errors: match q {
            QuantizerModel::Tabulated(t) => {
                let r = nonlinearity(t);
                Some((r.max_abs_inl(), r.max_abs_dnl()))
            }
            QuantizerModel::Uniform(_) => None,
        },
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Sweep with data from a non-ideal quantizer while the estimators keep
/// assuming the ideal one.
///
/// The `θ` span must cover several bins (at least 25 steps wide) so that
/// level errors do not average out by accident of a single bin.
pub fn nonlinear_robustness(config: &SweepConfig) -> Result<MseSweepReport> {
    let (lo, hi) = config.theta_span;
    if hi - lo < 25.0 {
        return invalid(format!("theta span must be at least 25 steps wide, got ({lo}, {hi})"));
    }
    if matches!(config.quantizer, QuantizerSpec::Uniform { .. }) {
        return invalid("nonlinear robustness needs a tabulated quantizer");
    }
    run_sweep(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(estimators: Vec<EstimatorId>) -> SweepConfig {
        SweepConfig {
            sigma_bar_grid: vec![0.2, 0.5],
            theta_points: 6,
            records: 15,
            n_samples: 60,
            quantizer: QuantizerSpec::Uniform { delta: 0.5 },
            theta_span: (-0.5, 0.5),
            master_seed: 11,
            estimators,
        }
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let c = small(EstimatorId::ALL.to_vec());
        let a = run_sweep(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_sweep(&c).unwrap());
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.averaged, b.averaged);
    }

    #[test]
    fn uniform_sweep_is_periodic() {
        let c = small(EstimatorId::ALL.to_vec());
        let shifted = SweepConfig { theta_span: (0.5, 1.5), ..c.clone() };
        let a = run_sweep(&c).unwrap();
        let b = run_sweep(&shifted).unwrap();
        for (x, y) in a.cells.iter().zip(&b.cells) {
            for (u, v) in x.mse.iter().zip(&y.mse) {
                assert!((u - v).abs() <= 1e-12 * u.max(1e-300), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn averaged_is_mean_of_cells() {
        let r = run_sweep(&small(vec![EstimatorId::Moment])).unwrap();
        assert_eq!(r.estimators, vec![EstimatorId::Mean, EstimatorId::Moment]);
        for e in 0..2 {
            for s in 0..2 {
                let m: f64 = (0..6).map(|t| r.cell(s, t).mse[e]).sum::<f64>() / 6.0;
                assert!((m - r.averaged[e][s]).abs() <= 1e-15 * m);
            }
        }
        assert!(r.cells.iter().all(|c| c.mse.iter().all(|&v| v >= 0.0)));
        let rho = r.ratio(EstimatorId::Moment, 0).unwrap();
        assert_eq!(rho, r.averaged[1][0] / r.averaged[0][0]);
        assert_eq!(r.ratio(EstimatorId::Mle, 0), None);
    }

    #[test]
    fn zero_bound_table_matches_uniform() {
        let c = SweepConfig { theta_span: (-2.0, 3.0), ..small(vec![EstimatorId::Mle]) };
        let table = SweepConfig {
            quantizer: QuantizerSpec::InlUniform { delta: 0.5, bits: 6, bound: 0.0, seed: 3 },
            ..c.clone()
        };
        let a = run_sweep(&c).unwrap();
        let b = run_sweep(&table).unwrap();
        for (x, y) in a.averaged.iter().flatten().zip(b.averaged.iter().flatten()) {
            assert!((x - y).abs() <= 1e-12 * x, "{x} vs {y}");
        }
    }

    #[test]
    fn csv_outputs_have_expected_shape() {
        let r = run_sweep(&small(vec![EstimatorId::Moment])).unwrap();
        let mut buf = Vec::new();
        r.write_mse_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "estimator,sigma_bar,theta_over_delta,mse");
        assert_eq!(text.lines().count(), 1 + 2 * 2 * 6);
        let mut buf = Vec::new();
        r.write_ratios_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 2 * 2);
        let mut buf = Vec::new();
        r.write_manifest(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("master_seed = 11"));
        assert!(text.contains("wall_seconds"));
        assert!(!text.contains("max_abs_inl"));
        assert_eq!(r.level_errors, None);
    }

    #[test]
    fn tabulated_runs_report_level_errors() {
        let c = SweepConfig {
            quantizer: QuantizerSpec::InlUniform { delta: 0.5, bits: 6, bound: 0.25, seed: 3 },
            records: 2,
            ..small(vec![EstimatorId::Mean])
        };
        let r = run_sweep(&c).unwrap();
        let (inl, dnl) = r.level_errors.unwrap();
        assert!(inl > 0.0 && inl <= 0.25);
        assert!(dnl > 0.0 && dnl <= 0.5);
        let mut buf = Vec::new();
        r.write_manifest(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("max_abs_dnl = "));
    }

    #[test]
    fn nonlinear_needs_wide_span_and_table() {
        let c = small(vec![EstimatorId::Mle]);
        assert!(nonlinear_robustness(&c).is_err());
        let wide = SweepConfig { theta_span: (-12.5, 12.5), ..c };
        assert!(nonlinear_robustness(&wide).is_err());
    }
}
