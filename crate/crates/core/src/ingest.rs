//! Loading of converter captures and estimation-error curves against known
//! reference values.
//!
//! Capture files are CSV with the header `reference_value,record_id,sample`
//! and one row per sample, amplitudes in volts. A comment row
//! `# delta = <v>` may carry the step when it is not given by the caller.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::estimators::{mle_uniform, CodeHistogram, EstimatorId, MleOptions};
use crate::simulate::{estimate, Outcome};

/// Largest distance from the code grid, in units of Δ, accepted after offset removal.
pub const GRID_TOLERANCE: f64 = 1e-6;

pub const CAPTURE_HEADER: [&str; 3] = ["reference_value", "record_id", "sample"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffsetMode {
    None,
    Supplied(f64),
    /// Mean distance of all samples from the nearest multiple of Δ.
    Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureRecord {
    pub record_id: String,
    /// Offset-compensated samples.
    pub samples: Vec<f64>,
}

impl CaptureRecord {
    fn codes(&self, delta: f64) -> impl Iterator<Item = i64> + '_ {
        self.samples.iter().map(move |x| (x / delta).round() as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureGroup {
    pub reference_value: f64,
    /// Sorted by `record_id`.
    pub records: Vec<CaptureRecord>,
}

/// A record dropped because a sample is off the code grid after compensation.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRecord {
    pub reference_value: f64,
    pub record_id: String,
    /// Largest distance from the grid, in units of Δ.
    pub worst_residual: f64,
}

/// Validated captures, grouped by reference value in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSet {
    pub groups: Vec<CaptureGroup>,
    pub delta: f64,
    pub offset: f64,
    pub rejected: Vec<RejectedRecord>,
}

/// Read a capture file. `delta` overrides any `# delta = …` row.
pub fn load_captures(path: &Path, delta: Option<f64>, offset: OffsetMode) -> Result<CaptureSet> {
    let f = std::fs::File::open(path)?;
    parse_captures(f, delta, offset)
}

fn metadata_delta(text: &str) -> Option<f64> {
    text.lines()
        .map(str::trim)
        .filter_map(|l| l.strip_prefix('#'))
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "delta")
        .and_then(|(_, v)| v.trim().parse().ok())
}

pub fn parse_captures<R: Read>(mut reader: R, delta: Option<f64>, offset: OffsetMode) -> Result<CaptureSet> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let delta = match delta.or_else(|| metadata_delta(&text)) {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return invalid(format!("delta must be finite and > 0, got {d}")),
        None => return invalid("delta not given and no `# delta = …` row in the file"),
    };

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != CAPTURE_HEADER {
        let line = header.position().map_or(1, |p| p.line() as usize);
        return Err(parse_err(line, format!("expected header {}", CAPTURE_HEADER.join(","))));
    }

    // (reference bits, record id) -> raw samples
    let mut raw: BTreeMap<(u64, String), (f64, Vec<f64>)> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, got {}", row.len())));
        }
        let num = |k: usize| -> Result<f64> {
            row[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("bad {}: {:?}", CAPTURE_HEADER[k], &row[k])))
        };
        let reference = num(0)?;
        let sample = num(2)?;
        // +0.0 and -0.0 name the same group
        let key = (ordered_bits(reference + 0.0), row[1].to_string());
        raw.entry(key).or_insert_with(|| (reference, Vec::new())).1.push(sample);
    }
    if raw.is_empty() {
        return invalid("capture file has no samples");
    }

    let offset = match offset {
        OffsetMode::None => 0.0,
        OffsetMode::Supplied(v) if v.is_finite() => v,
        OffsetMode::Supplied(v) => return invalid(format!("offset must be finite, got {v}")),
        OffsetMode::Estimate => {
            let (mut sum, mut n) = (0.0, 0usize);
            for (_, samples) in raw.values() {
                for &x in samples {
                    sum += x - delta * (x / delta).round();
                    n += 1;
                }
            }
            sum / n as f64
        }
    };

    let mut groups: Vec<CaptureGroup> = Vec::new();
    let mut rejected = Vec::new();
    for ((_, record_id), (reference, samples)) in raw {
        let samples: Vec<f64> = samples.into_iter().map(|x| x - offset).collect();
        let worst = samples
            .iter()
            .map(|x| (x / delta - (x / delta).round()).abs())
            .fold(0.0, f64::max);
        if worst > GRID_TOLERANCE {
            rejected.push(RejectedRecord { reference_value: reference, record_id, worst_residual: worst });
            continue;
        }
        let record = CaptureRecord { record_id, samples };
        match groups.last_mut() {
            Some(g) if g.reference_value == reference => g.records.push(record),
            _ => groups.push(CaptureGroup { reference_value: reference, records: vec![record] }),
        }
    }
    Ok(CaptureSet { groups, delta, offset, rejected })
}

fn parse_err(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}

/// Bit pattern whose unsigned order matches the numeric order of finite floats.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// Write records in the capture format, one row per sample.
pub fn write_captures<W: Write>(w: W, delta: Option<f64>, groups: &[CaptureGroup]) -> Result<()> {
    let mut w = w;
    if let Some(d) = delta {
        writeln!(w, "# delta = {d}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Io(e.to_string());
    out.write_record(CAPTURE_HEADER).map_err(err)?;
    for g in groups {
        for r in &g.records {
            for x in &r.samples {
                out.write_record([g.reference_value.to_string(), r.record_id.clone(), x.to_string()])
                    .map_err(err)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Mean and mean-square error of one estimator over one group, in units of Δ and Δ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupError {
    pub mean_error: f64,
    pub mse: f64,
    pub degenerate: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorPoint {
    pub reference_over_delta: f64,
    pub records: usize,
    /// Indexed like [`ErrorCurve::estimators`].
    pub errors: Vec<GroupError>,
    /// MLE noise estimate `σ̂/Δ` averaged over the group's records.
    pub sigma_bar_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub estimators: Vec<EstimatorId>,
    pub points: Vec<ErrorPoint>,
    /// Group-averaged MSE of the moment estimator over that of the mean.
    pub rho_moment: f64,
    pub rho_mle: f64,
    pub sigma_bar_hat: f64,
}

impl ErrorCurve {
    fn index(&self, id: EstimatorId) -> usize {
        self.estimators.iter().position(|&e| e == id).expect("all estimators present")
    }

    pub fn group_error(&self, group: usize, id: EstimatorId) -> GroupError {
        self.points[group].errors[self.index(id)]
    }

    /// `reference_over_delta,est,mean_error_over_delta`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["reference_over_delta", "est", "mean_error_over_delta"]).map_err(err)?;
        for p in &self.points {
            for (id, e) in self.estimators.iter().zip(&p.errors) {
                out.write_record([
                    p.reference_over_delta.to_string(),
                    id.to_string(),
                    format!("{:e}", e.mean_error),
                ])
                .map_err(err)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// `rho_M,rho_mle,sigma_bar_hat`.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["rho_M", "rho_mle", "sigma_bar_hat"]).map_err(err)?;
        out.write_record([
            format!("{:.6}", self.rho_moment),
            format!("{:.6}", self.rho_mle),
            format!("{:.6}", self.sigma_bar_hat),
        ])
        .map_err(err)?;
        out.flush()?;
        Ok(())
    }
}

/// Per-group estimation errors of all three estimators.
///
/// Estimators assume the ideal uniform quantizer with step `captures.delta`
/// and do not know `σ`.
pub fn error_curves(captures: &CaptureSet) -> Result<ErrorCurve> {
    if captures.groups.is_empty() {
        return invalid("no valid capture groups");
    }
    if let Some(g) = captures.groups.iter().find(|g| g.records.is_empty()) {
        return invalid(format!("group {} has no records", g.reference_value));
    }
    let delta = captures.delta;
    let estimators = EstimatorId::ALL.to_vec();
    let opts = MleOptions::default();

    let points: Vec<ErrorPoint> = captures
        .groups
        .par_iter()
        .map(|g| {
            let reference = g.reference_value / delta;
            let n = g.records.len() as f64;
            let mut errors = vec![GroupError { mean_error: 0.0, mse: 0.0, degenerate: 0, failures: 0 }; 3];
            let mut sigma_sum = 0.0;
            for r in &g.records {
                let hist = CodeHistogram::from_codes(r.codes(delta), delta)?;
                for (e, &id) in estimators.iter().enumerate() {
                    let (est, outcome) = estimate(id, &hist, &opts);
                    match outcome {
                        Outcome::Ok => {}
                        Outcome::Degenerate => errors[e].degenerate += 1,
                        Outcome::Failed => errors[e].failures += 1,
                    }
                    let err = est / delta - reference;
                    errors[e].mean_error += err;
                    errors[e].mse += err * err;
                }
                sigma_sum += mle_uniform(&hist, &opts)
                    .ok()
                    .and_then(|rep| rep.sigma_hat)
                    .map_or(0.0, |s| s / delta);
            }
            for e in &mut errors {
                e.mean_error /= n;
                e.mse /= n;
            }
            Ok(ErrorPoint {
                reference_over_delta: reference,
                records: g.records.len(),
                errors,
                sigma_bar_hat: sigma_sum / n,
            })
        })
        .collect::<Result<_>>()?;

    let groups = points.len() as f64;
    let avg = |e: usize| points.iter().map(|p| p.errors[e].mse).sum::<f64>() / groups;
    let mean_mse = avg(0);
    Ok(ErrorCurve {
        rho_moment: avg(1) / mean_mse,
        rho_mle: avg(2) / mean_mse,
        sigma_bar_hat: points.iter().map(|p| p.sigma_bar_hat).sum::<f64>() / groups,
        estimators,
        points,
    })
}
