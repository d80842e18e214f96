//! Sweep configuration and its flat `key = value` text format.
//!
//! ```text
//! # comment
//! sigma_bar_grid = 0.1, 0.2, 0.3
//! theta_points = 100
//! records = 200
//! n_samples = 500
//! master_seed = 1
//! estimators = mean, moment
//! quantizer = uniform        # uniform | nominal | inl_uniform | resistor_ladder
//! bits = 8
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::estimators::EstimatorId;
use crate::quantizer::{
    centered_first_code, gen_inl_uniform, gen_resistor_ladder, QuantizerModel, TabulatedQuantizer,
};

/// How the data-generating quantizer was built; echoed into run manifests.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantizerSpec {
    Uniform { delta: f64 },
    /// Ideal `bits`-bit converter as a level table.
    Nominal { delta: f64, bits: u32 },
    InlUniform { delta: f64, bits: u32, bound: f64, seed: u64 },
    /// `2^bits` resistors with relative spread `sd`.
    ResistorLadder { delta: f64, bits: u32, sd: f64, seed: u64 },
    /// Levels read from a `code_index,transition_level` file.
    Levels { delta: f64, path: String },
}

impl QuantizerSpec {
    pub fn delta(&self) -> f64 {
        match *self {
            Self::Uniform { delta }
            | Self::Nominal { delta, .. }
            | Self::InlUniform { delta, .. }
            | Self::ResistorLadder { delta, .. }
            | Self::Levels { delta, .. } => delta,
        }
    }

    pub fn build(&self) -> Result<QuantizerModel> {
        let levels_for = |bits: u32| -> Result<usize> {
            if !(1..=24).contains(&bits) {
                return invalid(format!("bits must lie in 1..=24, got {bits}"));
            }
            Ok((1usize << bits) - 1)
        };
        Ok(match self {
            Self::Uniform { delta } => QuantizerModel::uniform(*delta)?,
            Self::Nominal { delta, bits } => {
                let n = levels_for(*bits)?;
                TabulatedQuantizer::nominal(*delta, n, centered_first_code(n))?.into()
            }
            Self::InlUniform { delta, bits, bound, seed } => {
                gen_inl_uniform(*seed, levels_for(*bits)?, *bound, *delta)?.into()
            }
            Self::ResistorLadder { delta, bits, sd, seed } => {
                let n = levels_for(*bits)? + 1;
                gen_resistor_ladder(*seed, n, 1.0, *sd, n as f64 * delta)?.into()
            }
            Self::Levels { delta, path } => {
                let f = std::fs::File::open(path)?;
                TabulatedQuantizer::read_csv(std::io::BufReader::new(f), *delta)?.into()
            }
        })
    }

    fn echo(&self, out: &mut Vec<(String, String)>) {
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("delta", self.delta().to_string());
        match self {
            Self::Uniform { .. } => put("quantizer", "uniform".into()),
            Self::Nominal { bits, .. } => {
                put("quantizer", "nominal".into());
                put("bits", bits.to_string());
            }
            Self::InlUniform { bits, bound, seed, .. } => {
                put("quantizer", "inl_uniform".into());
                put("bits", bits.to_string());
                put("inl_bound", bound.to_string());
                put("quantizer_seed", seed.to_string());
            }
            Self::ResistorLadder { bits, sd, seed, .. } => {
                put("quantizer", "resistor_ladder".into());
                put("bits", bits.to_string());
                put("ladder_sd", sd.to_string());
                put("quantizer_seed", seed.to_string());
            }
            Self::Levels { path, .. } => {
                put("quantizer", "levels".into());
                put("levels_file", path.clone());
            }
        }
    }
}

/// Parameters of one MSE sweep.
///
/// The `θ` grid is `lo + m·(hi − lo)/M` for `m = 1..=M`, in units of `Δ`.
/// The arithmetic mean is always evaluated, since ratios are taken against it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub sigma_bar_grid: Vec<f64>,
    pub theta_points: usize,
    pub records: usize,
    pub n_samples: usize,
    pub quantizer: QuantizerSpec,
    pub theta_span: (f64, f64),
    pub master_seed: u64,
    pub estimators: Vec<EstimatorId>,
}

/// `lo, lo + step, …` with `count` entries, rounded to 12 decimals so that
/// grid values print as written.
pub fn linear_grid(lo: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| ((lo + step * k as f64) * 1e12).round() / 1e12).collect()
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sigma_bar_grid: linear_grid(0.05, 0.05, 12),
            theta_points: 500,
            records: 200,
            n_samples: 500,
            quantizer: QuantizerSpec::Nominal { delta: 1.0, bits: 8 },
            theta_span: (-0.5, 0.5),
            master_seed: 1,
            estimators: EstimatorId::ALL.to_vec(),
        }
    }
}

impl SweepConfig {
    /// Moment-estimator sweep at desk scale: `R = 200`, `M = 100`.
    pub fn moment_desk() -> Self {
        Self {
            theta_points: 100,
            records: 200,
            estimators: vec![EstimatorId::Mean, EstimatorId::Moment],
            ..Self::default()
        }
    }

    /// MLE sweep at desk scale: `R = 400`, `M = 100`.
    pub fn mle_desk() -> Self {
        Self {
            theta_points: 100,
            records: 400,
            estimators: vec![EstimatorId::Mean, EstimatorId::Mle],
            ..Self::default()
        }
    }

    /// Full-size runs: `M = 500`, `R = 200` for the moment estimator and
    /// `R = 2000` when the MLE is included.
    pub fn full_scale(estimators: Vec<EstimatorId>) -> Self {
        let records = if estimators.contains(&EstimatorId::Mle) { 2000 } else { 200 };
        Self { theta_points: 500, records, estimators, ..Self::default() }
    }

    /// Nonlinear-quantizer sweep over `θ ∈ (−25Δ/2, 25Δ/2]`.
    pub fn nonlinear_desk(quantizer: QuantizerSpec) -> Self {
        Self {
            sigma_bar_grid: linear_grid(0.1, 0.05, 7),
            theta_points: 100,
            records: 100,
            theta_span: (-12.5, 12.5),
            estimators: vec![EstimatorId::Mean, EstimatorId::Mle],
            quantizer,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_points == 0 || self.records == 0 || self.n_samples == 0 {
            return invalid("theta_points, records and n_samples must be >= 1");
        }
        if self.sigma_bar_grid.is_empty() {
            return invalid("sigma_bar_grid is empty");
        }
        if let Some(s) = self.sigma_bar_grid.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return invalid(format!("sigma_bar values must be finite and > 0, got {s}"));
        }
        let (lo, hi) = self.theta_span;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return invalid(format!("theta_span must satisfy lo < hi, got ({lo}, {hi})"));
        }
        let d = self.quantizer.delta();
        if !(d > 0.0 && d.is_finite()) {
            return invalid(format!("delta must be finite and > 0, got {d}"));
        }
        if self.estimators.is_empty() {
            return invalid("no estimators selected");
        }
        Ok(())
    }

    /// `θ/Δ` grid points.
    pub fn theta_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.theta_span;
        let m = self.theta_points as f64;
        (1..=self.theta_points).map(|k| lo + k as f64 * (hi - lo) / m).collect()
    }

    /// Selected estimators with the mean first and duplicates removed.
    pub fn estimator_set(&self) -> Vec<EstimatorId> {
        let mut v = vec![EstimatorId::Mean];
        for &e in &self.estimators {
            if !v.contains(&e) {
                v.push(e);
            }
        }
        v
    }

    /// Flat key/value listing that parses back into the same configuration.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let join = |v: Vec<String>| v.join(",");
        let mut out = vec![
            ("sigma_bar_grid".to_string(), join(self.sigma_bar_grid.iter().map(f64::to_string).collect())),
            ("theta_points".to_string(), self.theta_points.to_string()),
            ("records".to_string(), self.records.to_string()),
            ("n_samples".to_string(), self.n_samples.to_string()),
            ("theta_span_lo".to_string(), self.theta_span.0.to_string()),
            ("theta_span_hi".to_string(), self.theta_span.1.to_string()),
            ("master_seed".to_string(), self.master_seed.to_string()),
            ("estimators".to_string(), join(self.estimators.iter().map(|e| e.to_string()).collect())),
        ];
        self.quantizer.echo(&mut out);
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Parse `key = value` lines over the defaults. Blank lines and `#`
    /// comments are ignored; unknown keys are errors.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            map.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        Self::from_map(map)
    }

    /// Apply `(key, value)` overrides, e.g. from command-line flags.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        let mut pairs_map: BTreeMap<String, (usize, String)> =
            self.to_pairs().into_iter().map(|(k, v)| (k, (0, v))).collect();
        for (k, v) in pairs {
            pairs_map.insert(k.clone(), (0, v.clone()));
        }
        *self = Self::from_map(pairs_map)?;
        Ok(())
    }

    fn from_map(mut map: BTreeMap<String, (usize, String)>) -> Result<Self> {
        let mut cfg = Self::default();
        fn parse<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Parse { line, message: format!("bad value for {key}: {v:?}") })
        }
        fn list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
            v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(line, key, s.trim())).collect()
        }
        let mut take = |k: &str| map.remove(k);

        if let Some((l, v)) = take("sigma_bar_grid") {
            cfg.sigma_bar_grid = list(l, "sigma_bar_grid", &v)?;
        }
        if let Some((l, v)) = take("theta_points") {
            cfg.theta_points = parse(l, "theta_points", &v)?;
        }
        if let Some((l, v)) = take("records") {
            cfg.records = parse(l, "records", &v)?;
        }
        if let Some((l, v)) = take("n_samples") {
            cfg.n_samples = parse(l, "n_samples", &v)?;
        }
        if let Some((l, v)) = take("theta_span_lo") {
            cfg.theta_span.0 = parse(l, "theta_span_lo", &v)?;
        }
        if let Some((l, v)) = take("theta_span_hi") {
            cfg.theta_span.1 = parse(l, "theta_span_hi", &v)?;
        }
        if let Some((l, v)) = take("master_seed") {
            cfg.master_seed = parse(l, "master_seed", &v)?;
        }
        if let Some((l, v)) = take("estimators") {
            cfg.estimators = v
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.parse::<EstimatorId>().map_err(|e| Error::Parse { line: l, message: e.to_string() }))
                .collect::<Result<_>>()?;
        }

        let delta = match take("delta") {
            Some((l, v)) => parse(l, "delta", &v)?,
            None => cfg.quantizer.delta(),
        };
        let bits = match take("bits") {
            Some((l, v)) => parse(l, "bits", &v)?,
            None => 8,
        };
        let seed = match take("quantizer_seed") {
            Some((l, v)) => parse(l, "quantizer_seed", &v)?,
            None => 1,
        };
        let bound = take("inl_bound");
        let sd = take("ladder_sd");
        let levels = take("levels_file");
        let kind = take("quantizer").unwrap_or((0, "nominal".to_string()));
        cfg.quantizer = match kind.1.as_str() {
            "uniform" => QuantizerSpec::Uniform { delta },
            "nominal" => QuantizerSpec::Nominal { delta, bits },
            "inl_uniform" => {
                let bound = match bound {
                    Some((l, v)) => parse(l, "inl_bound", &v)?,
                    None => 1.0 / 3.0,
                };
                QuantizerSpec::InlUniform { delta, bits, bound, seed }
            }
            "resistor_ladder" => {
                let sd = match sd {
                    Some((l, v)) => parse(l, "ladder_sd", &v)?,
                    None => 0.15,
                };
                QuantizerSpec::ResistorLadder { delta, bits, sd, seed }
            }
            "levels" => match levels {
                Some((_, path)) => QuantizerSpec::Levels { delta, path },
                None => return invalid("quantizer = levels needs levels_file"),
            },
            other => {
                return Err(Error::Parse { line: kind.0, message: format!("unknown quantizer {other:?}") })
            }
        };

        if let Some((k, (line, _))) = map.into_iter().next() {
            return Err(Error::Parse { line, message: format!("unknown key {k:?}") });
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
