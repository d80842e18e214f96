//! Quantizer models: the ideal mid-tread uniform quantizer and a quantizer
//! defined by a table of transition levels, plus INL/DNL metrics and two
//! generators of synthetic nonlinear converters.
//!
//! Boundary convention everywhere: code `i` covers `T_i <= x < T_{i+1}`.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{invalid, Error, Result};

/// Common interface of the quantizer models.
///
/// Codes are integers; the reconstruction level of code `i` is the nominal
/// `i * delta()` for every model.
pub trait Quantizer: Send + Sync {
    /// Nominal quantization step.
    fn delta(&self) -> f64;

    /// Output code for input `x`.
    fn code(&self, x: f64) -> i64;

    /// Input interval `(lower, upper)` mapped to `code`. Edges may be infinite.
    fn bin_edges(&self, code: i64) -> (f64, f64);

    /// True when the bin edges are exactly `(i ∓ 1/2)·delta()` for every code.
    fn is_ideal_uniform(&self) -> bool {
        false
    }

    fn level(&self, code: i64) -> f64 {
        code as f64 * self.delta()
    }

    fn quantize(&self, x: f64) -> f64 {
        self.level(self.code(x))
    }
}

/// Ideal mid-tread, non-overloadable quantizer `y = Δ⌊x/Δ + 1/2⌋`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformQuantizer {
    delta: f64,
}

impl UniformQuantizer {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return invalid(format!("delta must be finite and > 0, got {delta}"));
        }
        Ok(Self { delta })
    }
}

impl Quantizer for UniformQuantizer {
    fn is_ideal_uniform(&self) -> bool {
        true
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    fn code(&self, x: f64) -> i64 {
        (x / self.delta + 0.5).floor() as i64
    }

    fn bin_edges(&self, code: i64) -> (f64, f64) {
        let c = code as f64;
        ((c - 0.5) * self.delta, (c + 0.5) * self.delta)
    }
}

/// `Δ⌊x/Δ + 1/2⌋` with argument validation.
pub fn quantize_uniform(x: f64, delta: f64) -> Result<f64> {
    if !x.is_finite() {
        return invalid(format!("input must be finite, got {x}"));
    }
    Ok(UniformQuantizer::new(delta)?.quantize(x))
}

/// Quantizer defined by a strictly increasing list of transition levels.
///
/// `levels[j]` is the transition level `T_i` with `i = first_code + j`, i.e. the
/// input at which the output switches from code `i - 1` to code `i`. Its
/// nominal position is `(i - 1/2)·Δ`. Inputs below the first level map to
/// `first_code - 1`; inputs above the last level map to the highest code.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedQuantizer {
    levels: Vec<f64>,
    nominal_delta: f64,
    first_code: i64,
}

impl TabulatedQuantizer {
    pub fn new(levels: Vec<f64>, nominal_delta: f64, first_code: i64) -> Result<Self> {
        if !(nominal_delta.is_finite() && nominal_delta > 0.0) {
            return invalid(format!("nominal delta must be finite and > 0, got {nominal_delta}"));
        }
        if levels.is_empty() {
            return invalid("at least one transition level is required");
        }
        if let Some(i) = levels.iter().position(|t| !t.is_finite()) {
            return invalid(format!("transition level {i} is not finite"));
        }
        if let Some(i) = levels.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneLevels { index: i + 1 });
        }
        Ok(Self { levels, nominal_delta, first_code })
    }

    /// Transition levels exactly at their nominal positions.
    pub fn nominal(nominal_delta: f64, n_levels: usize, first_code: i64) -> Result<Self> {
        let levels = (0..n_levels)
            .map(|j| nominal_level(first_code + j as i64, nominal_delta))
            .collect();
        Self::new(levels, nominal_delta, first_code)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn first_code(&self) -> i64 {
        self.first_code
    }

    pub fn lowest_code(&self) -> i64 {
        self.first_code - 1
    }

    pub fn highest_code(&self) -> i64 {
        self.first_code - 1 + self.levels.len() as i64
    }

    /// Serialize as `code_index,transition_level` CSV with header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "code_index,transition_level")?;
        for (j, t) in self.levels.iter().enumerate() {
            writeln!(w, "{},{:e}", self.first_code + j as i64, t)?;
        }
        Ok(())
    }

    /// Parse the CSV written by [`write_csv`](Self::write_csv).
    ///
    /// Code indices must be consecutive; levels must be strictly increasing.
    pub fn read_csv<R: BufRead>(r: R, nominal_delta: f64) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim().replace(' ', "") == "code_index,transition_level" => {}
            Some((_, Ok(h))) => {
                return Err(Error::Parse { line: 1, message: format!("unexpected header {h:?}") })
            }
            Some((_, Err(e))) => return Err(e.into()),
            None => return Err(Error::Parse { line: 1, message: "empty file".into() }),
        }
        let mut first_code = None;
        let mut levels = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |m: &str| Error::Parse { line: lineno, message: m.to_string() };
            let mut parts = line.split(',');
            let code: i64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| parse_err("bad code_index"))?;
            let level: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| parse_err("bad transition_level"))?;
            if parts.next().is_some() {
                return Err(parse_err("expected two columns"));
            }
            let first = *first_code.get_or_insert(code);
            if code != first + levels.len() as i64 {
                return Err(parse_err("code indices must be consecutive"));
            }
            levels.push(level);
        }
        let first_code = first_code.ok_or(Error::Parse { line: 2, message: "no levels".into() })?;
        Self::new(levels, nominal_delta, first_code)
    }
}

impl Quantizer for TabulatedQuantizer {
    fn delta(&self) -> f64 {
        self.nominal_delta
    }

    #[inline]
    fn code(&self, x: f64) -> i64 {
        let above = self.levels.partition_point(|&t| t <= x);
        self.first_code - 1 + above as i64
    }

    fn bin_edges(&self, code: i64) -> (f64, f64) {
        let n = self.levels.len() as i64;
        let j = code - (self.first_code - 1);
        let lower = if j <= 0 { f64::NEG_INFINITY } else { self.levels[(j.min(n) - 1) as usize] };
        let upper = if j >= n { f64::INFINITY } else { self.levels[j.max(0) as usize] };
        (lower, upper)
    }
}

/// `(code, nominal reconstruction level)` for a tabulated quantizer.
pub fn quantize_tabulated(x: f64, q: &TabulatedQuantizer) -> Result<(i64, f64)> {
    if !x.is_finite() {
        return invalid(format!("input must be finite, got {x}"));
    }
    let c = q.code(x);
    Ok((c, q.level(c)))
}

/// Either quantizer model, for configuration-driven code paths.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantizerModel {
    Uniform(UniformQuantizer),
    Tabulated(TabulatedQuantizer),
}

impl QuantizerModel {
    pub fn uniform(delta: f64) -> Result<Self> {
        Ok(Self::Uniform(UniformQuantizer::new(delta)?))
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Self::Uniform(_))
    }
}

impl Quantizer for QuantizerModel {
    fn is_ideal_uniform(&self) -> bool {
        self.is_uniform()
    }

    fn delta(&self) -> f64 {
        match self {
            Self::Uniform(q) => q.delta(),
            Self::Tabulated(q) => q.delta(),
        }
    }

    #[inline]
    fn code(&self, x: f64) -> i64 {
        match self {
            Self::Uniform(q) => q.code(x),
            Self::Tabulated(q) => q.code(x),
        }
    }

    fn bin_edges(&self, code: i64) -> (f64, f64) {
        match self {
            Self::Uniform(q) => q.bin_edges(code),
            Self::Tabulated(q) => q.bin_edges(code),
        }
    }
}

impl From<UniformQuantizer> for QuantizerModel {
    fn from(q: UniformQuantizer) -> Self {
        Self::Uniform(q)
    }
}

impl From<TabulatedQuantizer> for QuantizerModel {
    fn from(q: TabulatedQuantizer) -> Self {
        Self::Tabulated(q)
    }
}

/// Nominal position `(i - 1/2)·Δ` of transition level `i`.
#[inline]
pub fn nominal_level(i: i64, delta: f64) -> f64 {
    (i as f64 - 0.5) * delta
}

/// INL and DNL of a tabulated quantizer, in fractions of the nominal step.
///
/// `inl[j]` belongs to level `first_code + j`. `dnl[j]` belongs to level
/// `first_code + j + 1` and measures `T_i - T_{i-1} - Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityReport {
    pub first_code: i64,
    pub inl: Vec<f64>,
    pub dnl: Vec<f64>,
    /// False when there is a single level and DNL cannot be formed.
    pub dnl_defined: bool,
}

impl NonlinearityReport {
    pub fn max_abs_inl(&self) -> f64 {
        self.inl.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_dnl(&self) -> f64 {
        self.dnl.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gain and offset errors are not removed.
pub fn nonlinearity(q: &TabulatedQuantizer) -> NonlinearityReport {
    let d = q.nominal_delta;
    let inl = q
        .levels
        .iter()
        .enumerate()
        .map(|(j, &t)| (t - nominal_level(q.first_code + j as i64, d)) / d)
        .collect();
    let dnl = q.levels.windows(2).map(|w| (w[1] - w[0] - d) / d).collect();
    NonlinearityReport { first_code: q.first_code, inl, dnl, dnl_defined: q.levels.len() >= 2 }
}

/// First code that centers `n_levels` nominal levels around zero.
pub fn centered_first_code(n_levels: usize) -> i64 {
    -((n_levels as i64 - 1) / 2)
}

/// Levels displaced from nominal by i.i.d. uniform offsets in `(-bound, bound)·Δ`.
///
/// `bound < 1/2` keeps the levels strictly increasing.
pub fn gen_inl_uniform(
    seed: u64,
    n_levels: usize,
    bound: f64,
    delta: f64,
) -> Result<TabulatedQuantizer> {
    if !(0.0..0.5).contains(&bound) {
        return invalid(format!("INL bound must lie in [0, 1/2), got {bound}"));
    }
    if n_levels == 0 {
        return invalid("n_levels must be >= 1");
    }
    let first = centered_first_code(n_levels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<f64> = if bound == 0.0 {
        vec![0.0; n_levels]
    } else {
        let u = Uniform::new(-bound, bound).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        (0..n_levels).map(|_| u.sample(&mut rng)).collect()
    };
    let levels = offsets
        .iter()
        .enumerate()
        .map(|(j, off)| nominal_level(first + j as i64, delta) + off * delta)
        .collect();
    TabulatedQuantizer::new(levels, delta, first)
}

/// Resistor-string converter: transition levels at cumulative resistance
/// fractions of the full scale.
///
/// `n_resistors` resistors give `n_resistors - 1` levels and a nominal step of
/// `full_scale / n_resistors`. The string is centered on zero; for an even
/// count it is shifted down by half a step so that equal resistors reproduce
/// the mid-tread uniform quantizer. Non-positive resistance draws are redrawn.
pub fn gen_resistor_ladder(
    seed: u64,
    n_resistors: usize,
    mean_r: f64,
    sd_r: f64,
    full_scale: f64,
) -> Result<TabulatedQuantizer> {
    if n_resistors < 2 {
        return invalid("a resistor ladder needs at least 2 resistors");
    }
    if !(mean_r > 0.0 && mean_r.is_finite()) {
        return invalid(format!("mean resistance must be > 0, got {mean_r}"));
    }
    if !(sd_r >= 0.0 && sd_r.is_finite()) {
        return invalid(format!("resistance sd must be >= 0, got {sd_r}"));
    }
    if !(full_scale > 0.0 && full_scale.is_finite()) {
        return invalid(format!("full scale must be > 0, got {full_scale}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(mean_r, sd_r).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let resistors: Vec<f64> = (0..n_resistors)
        .map(|_| loop {
            let r = normal.sample(&mut rng);
            if r > 0.0 {
                break r;
            }
        })
        .collect();
    let total: f64 = resistors.iter().sum();
    let delta = full_scale / n_resistors as f64;
    let shift = if n_resistors % 2 == 0 { 0.5 * delta } else { 0.0 };
    let mut cum = 0.0;
    let levels = resistors[..n_resistors - 1]
        .iter()
        .map(|r| {
            cum += r;
            full_scale * (cum / total) - 0.5 * full_scale - shift
        })
        .collect();
    TabulatedQuantizer::new(levels, delta, 1 - (n_resistors / 2) as i64)
}
