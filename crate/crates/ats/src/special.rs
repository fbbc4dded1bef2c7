//! Special functions the rest of the crate leans on.
//!
//! Gamma and the regularized incomplete gamma come from `statrs`; the pieces
//! it lacks (negative-order upper incomplete gamma, E1, complex `expm1`) live
//! here.

use num_complex::Complex64;

pub use statrs::function::gamma::{digamma, gamma, ln_gamma};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Upper incomplete gamma Γ(s, x) for s > -1 and x > 0.
///
/// Orders in (-1, 0] are reached from Γ(s+1, x) through
/// Γ(s, x) = (Γ(s+1, x) − x^s e^{−x}) / s, with E1 at s = 0.
pub fn upper_gamma(s: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0 && s > -1.0);
    if s > 0.0 {
        gamma(s) * statrs::function::gamma::gamma_ur(s, x)
    } else if s == 0.0 {
        exp_integral_e1(x)
    } else {
        (upper_gamma(s + 1.0, x) - x.powf(s) * (-x).exp()) / s
    }
}

/// Exponential integral E1(x) = Γ(0, x) for x > 0.
pub fn exp_integral_e1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 1.0 {
        // Alternating power series, converges quickly on (0, 1].
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // Modified Lentz evaluation of the continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// `expm1` on the complex plane, accurate for small |z|.
pub fn cexpm1(z: Complex64) -> Complex64 {
    if z.norm() > 0.5 {
        return z.exp() - 1.0;
    }
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * z.im.cos() - 2.0 * half * half, z.re.exp() * z.im.sin())
}

/// log(1 + z) on the principal branch, accurate for small |z|.
pub fn cln1p(z: Complex64) -> Complex64 {
    if z.norm() > 0.5 {
        return (z + 1.0).ln();
    }
    let (x, y) = (z.re, z.im);
    Complex64::new(0.5 * (x * (2.0 + x) + y * y).ln_1p(), y.atan2(1.0 + x))
}

/// (e^{c w} − 1) / c, continuous at c = 0 where it equals w.
pub fn expm1_ratio(c: f64, w: Complex64) -> Complex64 {
    if c == 0.0 {
        w
    } else {
        cexpm1(w * c) / c
    }
}

/// Real (e^{c w} − 1) / c, continuous at c = 0.
pub fn expm1_ratio_real(c: f64, w: f64) -> f64 {
    if c == 0.0 {
        w
    } else {
        (c * w).exp_m1() / c
    }
}

/// sin(πc)/c, continuous at c = 0.
pub fn sin_pi_ratio(c: f64) -> f64 {
    if c == 0.0 {
        std::f64::consts::PI
    } else {
        (std::f64::consts::PI * c).sin() / c
    }
}

/// (1 − cos(πc))/c = 2 sin²(πc/2)/c, continuous at c = 0.
pub fn one_minus_cos_pi_ratio(c: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        let s = (0.5 * std::f64::consts::PI * c).sin();
        2.0 * s * s / c
    }
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn e1_matches_reference_values() {
        // mpmath.e1, 30 digits
        assert!(rel(exp_integral_e1(0.01), 4.037_929_576_538_113_8) < 1e-13);
        assert!(rel(exp_integral_e1(1.0), 0.219_383_934_395_520_27) < 1e-13);
        assert!(rel(exp_integral_e1(2.5), 0.024_914_917_870_269_735) < 1e-13);
        assert!(rel(exp_integral_e1(30.0), 3.021_552_010_688_812_5e-15) < 1e-12);
    }

    #[test]
    fn upper_gamma_matches_reference_values() {
        // mpmath.gammainc(s, x), 30 digits
        assert!(rel(upper_gamma(-0.5, 0.3), 1.150_367_047_355_164_3) < 1e-12);
        assert!(rel(upper_gamma(-0.25, 2.0), 0.038_298_023_930_937_256) < 1e-12);
        assert!(rel(upper_gamma(0.5, 1e-6), 1.770_453_851_572_182_5) < 1e-12);
        assert!(rel(upper_gamma(0.75, 3.0), 0.035_481_735_920_031_448) < 1e-12);
        assert!(rel(upper_gamma(1.5, 0.2), 0.833_268_215_381_517_36) < 1e-12);
    }

    #[test]
    fn complex_expm1_small_arguments() {
        let z = Complex64::new(1e-9, -2e-9);
        let e = cexpm1(z);
        assert!((e - z - z * z / 2.0).norm() < 1e-23);
        let w = Complex64::new(0.3, 0.2);
        assert!((cexpm1(w) - (w.exp() - 1.0)).norm() < 1e-15);
    }
}
