use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use quantized_dc::estimators::{
    arithmetic_mean, build_histogram, mle_estimate, moment_estimate, sample_variance, EstimateReport,
    EstimatorId,
};
use quantized_dc::fisher::{fisher_single, information_summary, quantization_efficiency};
use quantized_dc::ingest::{error_curves, load_captures, OffsetMode};
use quantized_dc::moments::{error_mean, error_variance, output_variance};
use quantized_dc::simulate::{
    fisher_mc_validate, linear_grid, nonlinear_robustness, run_sweep, threshold_study,
    write_fisher_mc_csv, MseSweepReport, QuantizerSpec, SweepConfig,
};
use quantized_dc::{EstimationScenario, QuantizerModel, Result, TabulatedQuantizer};

/// Fisher information, bounds and DC estimators for noisy quantized data.
#[derive(Parser)]
#[command(name = "qdc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error and output moments over a θ grid.
    Moments(MomentsArgs),
    /// Single-sample Fisher information over a θ grid.
    Fisher(FisherArgs),
    /// Quantization efficiency over a σ̄ grid.
    Qe(QeArgs),
    /// Estimate θ from a one-column CSV of quantized samples.
    Estimate(EstimateArgs),
    /// MSE sweep over (σ̄, θ).
    Sweep(SweepArgs),
    /// Mean vs MLE over N and σ̄ at fixed θ.
    Threshold(ThresholdArgs),
    /// Monte Carlo check of the Fisher information.
    FisherMc(FisherMcArgs),
    /// MSE sweep with a nonlinear data quantizer.
    Nonlinear(NonlinearArgs),
    /// Estimation-error curves from ADC captures.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct Output {
    /// Output file (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl Output {
    fn open(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.output {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Args)]
struct ThetaGrid {
    /// Noise standard deviation over the step.
    #[arg(long)]
    sigma_bar: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Grid points over θ/Δ ∈ [lo, hi].
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    hi: f64,
}

impl ThetaGrid {
    fn grid(&self) -> Vec<f64> {
        span(self.lo, self.hi, self.points)
    }
}

#[derive(Args)]
struct MomentsArgs {
    #[command(flatten)]
    grid: ThetaGrid,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct FisherArgs {
    #[command(flatten)]
    grid: ThetaGrid,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct QeArgs {
    #[arg(long, default_value_t = 0.02)]
    lo: f64,
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    #[arg(long, default_value_t = 50)]
    points: usize,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorChoice {
    Mean,
    Moment,
    Mle,
    All,
}

#[derive(Args)]
struct EstimateArgs {
    /// One-column CSV of quantizer outputs (an optional non-numeric header is skipped).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long, value_enum, default_value = "all")]
    estimator: EstimatorChoice,
    /// Transition-level table `code_index,transition_level` for the MLE.
    #[arg(long)]
    levels: Option<PathBuf>,
    /// Known noise standard deviation, in amplitude units.
    #[arg(long)]
    sigma: Option<f64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Default,
    MomentDesk,
    MleDesk,
    FullMoment,
    FullMle,
}

#[derive(Args)]
struct SweepSource {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set records=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Directory for mse.csv, ratios.csv and manifest.txt.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

impl SweepSource {
    fn resolve(&self, base: SweepConfig) -> Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(p) => SweepConfig::from_file(p)?,
            None => base,
        };
        let pairs = self
            .overrides
            .iter()
            .map(|s| {
                s.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| quantized_dc::Error::InvalidArgument(format!("expected KEY=VALUE, got {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        cfg.apply(&pairs)?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "default")]
    preset: Preset,
    #[command(flatten)]
    source: SweepSource,
}

#[derive(Clone, Copy, ValueEnum)]
enum NonlinearKind {
    Inl,
    Ladder,
}

#[derive(Args)]
struct NonlinearArgs {
    /// Data quantizer of the desk preset; ignored when a config file is given.
    #[arg(long, value_enum, default_value = "inl")]
    quantizer: NonlinearKind,
    #[command(flatten)]
    source: SweepSource,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long, default_value_t = 1.0 / 6.0)]
    theta: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 100, 500])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = linear_grid(0.05, 0.05, 12))]
    sigma_bar: Vec<f64>,
    #[arg(long, default_value_t = 400)]
    records: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct FisherMcArgs {
    #[arg(long)]
    sigma_bar: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[arg(long, default_value_t = 1_000_000)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Quantization step; falls back to a `# delta = …` row in the file.
    #[arg(long)]
    delta: Option<f64>,
    /// Offset to subtract from every sample.
    #[arg(long, conflicts_with = "estimate_offset", allow_hyphen_values = true)]
    offset: Option<f64>,
    #[arg(long)]
    estimate_offset: bool,
    /// Directory for error_curve.csv and summary.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qdc: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Moments(a) => moments(a),
        Command::Fisher(a) => fisher(a),
        Command::Qe(a) => qe(a),
        Command::Estimate(a) => estimate(a),
        Command::Sweep(a) => {
            let base = match a.preset {
                Preset::Default => SweepConfig::default(),
                Preset::MomentDesk => SweepConfig::moment_desk(),
                Preset::MleDesk => SweepConfig::mle_desk(),
                Preset::FullMoment => SweepConfig::full_scale(vec![EstimatorId::Moment]),
                Preset::FullMle => SweepConfig::full_scale(vec![EstimatorId::Mle]),
            };
            let cfg = a.source.resolve(base)?;
            write_sweep(&run_sweep(&cfg)?, &a.source.out_dir)
        }
        Command::Nonlinear(a) => {
            let q = match a.quantizer {
                NonlinearKind::Inl => {
                    QuantizerSpec::InlUniform { delta: 1.0, bits: 8, bound: 1.0 / 3.0, seed: 7 }
                }
                NonlinearKind::Ladder => {
                    QuantizerSpec::ResistorLadder { delta: 1.0, bits: 8, sd: 0.15, seed: 7 }
                }
            };
            let cfg = a.source.resolve(SweepConfig::nonlinear_desk(q))?;
            write_sweep(&nonlinear_robustness(&cfg)?, &a.source.out_dir)
        }
        Command::Threshold(a) => {
            let report = threshold_study(a.theta, &a.n, &a.sigma_bar, a.records, a.seed)?;
            report.write_csv(a.out.open()?)
        }
        Command::FisherMc(a) => {
            let grid = ThetaGrid { sigma_bar: a.sigma_bar, delta: 1.0, points: a.points, lo: -0.5, hi: 0.5 };
            let points = fisher_mc_validate(&grid.grid(), a.sigma_bar, a.runs, a.seed)?;
            write_fisher_mc_csv(&points, a.out.open()?)
        }
        Command::Ingest(a) => ingest(a),
    }
}

/// `count` points from `lo` to `hi` inclusive.
fn span(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let last = (count - 1) as f64;
    (0..count).map(|k| lo + (hi - lo) * k as f64 / last).collect()
}

fn csv_err(e: csv::Error) -> quantized_dc::Error {
    quantized_dc::Error::Io(e.to_string())
}

fn moments(a: MomentsArgs) -> Result<()> {
    let g = &a.grid;
    let mut out = csv::Writer::from_writer(a.out.open()?);
    out.write_record(["theta", "m_e", "var_e", "var_y"]).map_err(csv_err)?;
    for t in g.grid() {
        let s = EstimationScenario::from_sigma_bar(t * g.delta, g.sigma_bar, g.delta, 1)?;
        out.write_record([
            (t * g.delta).to_string(),
            format!("{:e}", error_mean(&s)),
            format!("{:e}", error_variance(&s)),
            format!("{:e}", output_variance(&s)),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn fisher(a: FisherArgs) -> Result<()> {
    let g = &a.grid;
    let s0 = EstimationScenario::from_sigma_bar(0.0, g.sigma_bar, g.delta, 1)?;
    let summary = information_summary(&s0)?;
    let d2 = g.delta * g.delta;
    let mut out = csv::Writer::from_writer(a.out.open()?);
    out.write_record(["theta_over_delta", "delta2_I1", "delta2_IM", "delta2_Im", "delta2_Iq", "delta2_Iinf"])
        .map_err(csv_err)?;
    for t in g.grid() {
        let i1 = fisher_single(&s0.with_theta(t * g.delta))?;
        out.write_record([
            t.to_string(),
            format!("{:e}", d2 * i1),
            format!("{:e}", d2 * summary.i_max),
            format!("{:e}", d2 * summary.i_min),
            format!("{:e}", d2 * summary.i_noise_model),
            format!("{:e}", d2 * summary.i_unquantized),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn qe(a: QeArgs) -> Result<()> {
    let grid = span(a.lo, a.hi, a.points);
    let mut out = csv::Writer::from_writer(a.out.open()?);
    out.write_record(["sigma_bar", "QE"]).map_err(csv_err)?;
    for sb in grid {
        out.write_record([sb.to_string(), format!("{:.9}", quantization_efficiency(sb)?)])
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);
    let mut samples = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(i + 1, |p| p.line() as usize);
        let field = row.get(0).unwrap_or("");
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => samples.push(v),
            Err(_) if i == 0 => {} // header
            _ => {
                return Err(quantized_dc::Error::Parse { line, message: format!("bad sample {field:?}") })
            }
        }
    }
    Ok(samples)
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let samples = read_samples(&a.input)?;
    let hist = build_histogram(&samples, a.delta)?;
    let quantizer: QuantizerModel = match &a.levels {
        Some(p) => TabulatedQuantizer::read_csv(BufReader::new(File::open(p)?), a.delta)?.into(),
        None => QuantizerModel::uniform(a.delta)?,
    };
    let chosen: Vec<EstimatorId> = match a.estimator {
        EstimatorChoice::Mean => vec![EstimatorId::Mean],
        EstimatorChoice::Moment => vec![EstimatorId::Moment],
        EstimatorChoice::Mle => vec![EstimatorId::Mle],
        EstimatorChoice::All => EstimatorId::ALL.to_vec(),
    };
    let mut reports: Vec<EstimateReport> = Vec::new();
    for id in chosen {
        reports.push(match id {
            EstimatorId::Mean => arithmetic_mean(&samples)?,
            EstimatorId::Moment => {
                let mean = arithmetic_mean(&samples)?.theta_hat;
                moment_estimate(mean, sample_variance(&samples)?, a.delta, a.sigma)?
            }
            // a known σ seeds the search; σ is still refined
            EstimatorId::Mle => {
                mle_estimate(&hist, &quantizer, a.sigma.map(|s| (hist.mean(), s)))?
            }
        });
    }
    let mut out = csv::Writer::from_writer(a.out.open()?);
    out.write_record(["key", "value"]).map_err(csv_err)?;
    out.write_record(["n_samples".to_string(), samples.len().to_string()]).map_err(csv_err)?;
    for r in &reports {
        let prefix = if reports.len() > 1 { format!("{}.", r.estimator) } else { String::new() };
        for (k, v) in r.to_pairs() {
            out.write_record([format!("{prefix}{k}"), v]).map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn write_sweep(report: &MseSweepReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    report.write_mse_csv(BufWriter::new(File::create(dir.join("mse.csv"))?))?;
    report.write_ratios_csv(BufWriter::new(File::create(dir.join("ratios.csv"))?))?;
    report.write_manifest(BufWriter::new(File::create(dir.join("manifest.txt"))?))?;
    for (s, sb) in report.config.sigma_bar_grid.iter().enumerate() {
        let rhos: Vec<String> = report
            .estimators
            .iter()
            .skip(1)
            .map(|&id| format!("rho_{id}={:.4}", report.ratio(id, s).unwrap_or(f64::NAN)))
            .collect();
        eprintln!("sigma_bar={sb} {}", rhos.join(" "));
    }
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let mode = match (a.offset, a.estimate_offset) {
        (Some(v), _) => OffsetMode::Supplied(v),
        (None, true) => OffsetMode::Estimate,
        (None, false) => OffsetMode::None,
    };
    let captures = load_captures(&a.input, a.delta, mode)?;
    for r in &captures.rejected {
        eprintln!(
            "rejected record {} at reference {}: off-grid by {:.3e} steps",
            r.record_id, r.reference_value, r.worst_residual
        );
    }
    let curve = error_curves(&captures)?;
    fs::create_dir_all(&a.out_dir)?;
    curve.write_csv(BufWriter::new(File::create(a.out_dir.join("error_curve.csv"))?))?;
    curve.write_summary_csv(BufWriter::new(File::create(a.out_dir.join("summary.csv"))?))?;
    eprintln!(
        "offset={:e} groups={} rho_M={:.4} rho_mle={:.4} sigma_bar_hat={:.4}",
        captures.offset,
        curve.points.len(),
        curve.rho_moment,
        curve.rho_mle,
        curve.sigma_bar_hat
    );
    Ok(())
}
