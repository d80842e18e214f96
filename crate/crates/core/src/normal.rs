//! Standard normal density and distribution function.
//!
//! `Φ` is evaluated through `erfc` on whichever side keeps the result a small
//! number, so both tails keep full relative precision. Interval probabilities
//! are formed from the tail closest to the interval, which matters when both
//! ends sit many standard deviations out.

use std::f64::consts::FRAC_1_SQRT_2;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF `Φ(x)`.
#[inline]
pub fn cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * libm::erfc(x * FRAC_1_SQRT_2)
    }
}

/// Upper tail `Q(x) = 1 - Φ(x)`.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `Φ(upper) - Φ(lower)` for `lower <= upper`, accurate in both tails.
///
/// Either bound may be infinite.
#[inline]
pub fn interval(lower: f64, upper: f64) -> f64 {
    debug_assert!(lower <= upper);
    if lower >= 0.0 {
        sf(lower) - sf(upper)
    } else if upper <= 0.0 {
        sf(-upper) - sf(-lower)
    } else {
        1.0 - sf(-lower) - sf(upper)
    }
}

/// `exp(-x²/2)` without the normalizing constant, as it appears in the Fisher sum.
#[inline]
pub fn gauss_kernel(x: f64) -> f64 {
    (-0.5 * x * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        // Values from standard tables (high precision).
        assert!((cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((cdf(-2.5) - 0.006_209_665_325_776_132).abs() < 1e-17);
        assert!((cdf(2.5) - 0.993_790_334_674_223_9).abs() < 1e-15);
    }

    #[test]
    fn deep_tail_keeps_relative_precision() {
        // Q(10) = 7.619853024160527e-24
        let q = sf(10.0);
        assert!((q / 7.619_853_024_160_526e-24 - 1.0).abs() < 1e-13);
        let p = interval(10.0, 11.0);
        let expect = 7.619_661_958_203_076e-24;
        assert!((p / expect - 1.0).abs() < 1e-12);
        let m = interval(-11.0, -10.0);
        assert!((m / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interval_handles_infinite_edges() {
        assert_eq!(interval(f64::NEG_INFINITY, f64::INFINITY), 1.0);
        assert!((interval(f64::NEG_INFINITY, 0.0) - 0.5).abs() < 1e-16);
        assert!((interval(0.0, f64::INFINITY) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn pdf_integrates_to_cdf_difference() {
        // Simpson on [-1, 2]
        let (a, b, n) = (-1.0_f64, 2.0_f64, 2000);
        let h = (b - a) / n as f64;
        let mut s = pdf(a) + pdf(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(a + i as f64 * h);
        }
        s *= h / 3.0;
        assert!((s - interval(a, b)).abs() < 1e-13);
    }
}
