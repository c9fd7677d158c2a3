//! Gaussian helpers shared by the likelihood and Fisher-information code.

use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `ln Φ(x)`, accurate far into both tails.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > 0.0 {
        // ln(1 - Φ(-x))
        (-normal_cdf(-x)).ln_1p()
    } else if x > -35.0 {
        normal_cdf(x).ln()
    } else {
        // Mills-ratio asymptotic series.
        let z2 = 1.0 / (x * x);
        let series = 1.0 - z2 + 3.0 * z2 * z2 - 15.0 * z2 * z2 * z2 + 105.0 * z2 * z2 * z2 * z2;
        -0.5 * x * x - LN_SQRT_2PI - (-x).ln() + series.ln()
    }
}

/// Numerically stable `ln(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^{x_i}` over a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Principal value of an angle in (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_basics() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        let v = normal_cdf(1.959963984540054);
        assert!((v - 0.975).abs() < 1e-9, "{v}");
    }

    #[test]
    fn log_cdf_is_continuous_at_switch_points() {
        for &x in &[-35.0f64, 0.0] {
            let lo = log_normal_cdf(x - 1e-9);
            let hi = log_normal_cdf(x + 1e-9);
            assert!((lo - hi).abs() < 1e-6 * lo.abs().max(1.0), "{x}: {lo} vs {hi}");
        }
        // deep tail stays finite
        let v = log_normal_cdf(-1e3);
        assert!(v.is_finite() && v < -4e5);
    }

    #[test]
    fn log_add_exp_matches_direct() {
        let a: f64 = -1.3;
        let b: f64 = 0.4;
        assert!((log_add_exp(a, b) - (a.exp() + b.exp()).ln()).abs() < 1e-14);
        assert!((log_sum_exp(&[a, b, 2.0]) - (a.exp() + b.exp() + 2f64.exp()).ln()).abs() < 1e-14);
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }
}
