use crate::error::{invalid, Result};

/// Relative tolerance for a sample to count as lying on the code grid.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Counts `N_i` of each occupied output code.
///
/// Codes are kept sorted and only occupied codes are stored, so iteration
/// visits exactly the bins that contribute to the likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeHistogram {
    bins: Vec<(i64, u64)>,
    total: u64,
    delta: f64,
}

impl CodeHistogram {
    /// Histogram of quantizer outputs; each sample must be `i·Δ` for an integer `i`.
    pub fn from_samples(samples: &[f64], delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return invalid(format!("delta must be finite and > 0, got {delta}"));
        }
        let mut codes = Vec::with_capacity(samples.len());
        for (k, &y) in samples.iter().enumerate() {
            let c = (y / delta).round();
            if !c.is_finite() || (y / delta - c).abs() > GRID_TOLERANCE * c.abs().max(1.0) {
                return invalid(format!("sample {k} = {y} is not a multiple of delta {delta}"));
            }
            codes.push(c as i64);
        }
        Self::from_codes(codes, delta)
    }

    /// Histogram of integer codes.
    pub fn from_codes<I: IntoIterator<Item = i64>>(codes: I, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return invalid(format!("delta must be finite and > 0, got {delta}"));
        }
        let mut codes: Vec<i64> = codes.into_iter().collect();
        codes.sort_unstable();
        let mut bins: Vec<(i64, u64)> = Vec::new();
        for c in codes {
            match bins.last_mut() {
                Some((k, n)) if *k == c => *n += 1,
                _ => bins.push((c, 1)),
            }
        }
        let total = bins.iter().map(|b| b.1).sum();
        Ok(Self { bins, total, delta })
    }

    /// Histogram from explicit `(code, count)` pairs; zero counts are dropped.
    pub fn from_counts<I: IntoIterator<Item = (i64, u64)>>(counts: I, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return invalid(format!("delta must be finite and > 0, got {delta}"));
        }
        let mut map = std::collections::BTreeMap::new();
        for (c, n) in counts {
            *map.entry(c).or_insert(0u64) += n;
        }
        let bins: Vec<(i64, u64)> = map.into_iter().filter(|&(_, n)| n > 0).collect();
        let total = bins.iter().map(|b| b.1).sum();
        Ok(Self { bins, total, delta })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Number of occupied codes.
    pub fn occupied(&self) -> usize {
        self.bins.len()
    }

    /// `(code, count)` pairs in increasing code order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.bins.iter().copied()
    }

    pub fn count(&self, code: i64) -> u64 {
        self.bins
            .binary_search_by_key(&code, |b| b.0)
            .map(|k| self.bins[k].1)
            .unwrap_or(0)
    }

    /// Same counts with every code shifted by `m`.
    pub fn shifted(&self, m: i64) -> Self {
        Self {
            bins: self.bins.iter().map(|&(c, n)| (c + m, n)).collect(),
            total: self.total,
            delta: self.delta,
        }
    }

    /// Nearest code to the mean, and the mean and unbiased variance of the
    /// codes measured from it.
    ///
    /// The offset is formed in integer arithmetic, so shifting every code by
    /// `m` shifts the anchor by exactly `m` and leaves the other two values
    /// bit-identical.
    pub(crate) fn anchored(&self) -> (i64, f64, f64) {
        let sum: i128 = self.bins.iter().map(|&(c, n)| c as i128 * n as i128).sum();
        let total = self.total as i128;
        let base = (2 * sum + total).div_euclid(2 * total);
        let rel = (sum - base * total) as f64 / self.total as f64;
        let ss: f64 = self
            .bins
            .iter()
            .map(|&(c, n)| {
                let d = (c as i128 - base) as f64 - rel;
                n as f64 * d * d
            })
            .sum();
        let var = if self.total >= 2 { ss / (self.total as f64 - 1.0) } else { 0.0 };
        (base as i64, rel, var)
    }

    /// Mean code `Σ i·N_i / N` (in units of Δ).
    pub(crate) fn mean_code(&self) -> f64 {
        let (base, rel, _) = self.anchored();
        base as f64 + rel
    }

    /// Unbiased variance of the codes (in units of Δ²). Requires `N ≥ 2`.
    pub(crate) fn code_variance(&self) -> f64 {
        self.anchored().2
    }

    /// Sample mean of the quantized values, as a function of the counts only.
    pub fn mean(&self) -> f64 {
        self.mean_code() * self.delta
    }

    /// Unbiased sample variance of the quantized values; `None` for `N < 2`.
    pub fn variance(&self) -> Option<f64> {
        (self.total >= 2).then(|| self.code_variance() * self.delta * self.delta)
    }
}
