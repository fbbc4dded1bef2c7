//! Cumulants, raw moments and summary statistics of ATS(at, b; c).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::params::AtsParams;
use crate::special::{gamma, ln_gamma};

/// Mean of the running average relative to the mean of X_t.
pub const TS_MEAN_RATIO: f64 = 0.5;
/// Variance of the running average relative to the variance of X_t.
pub const TS_VARIANCE_RATIO: f64 = 1.0 / 3.0;
/// Skewness of the running average relative to the skewness of X_t (3√3/4).
pub const TS_SKEWNESS_FACTOR: f64 = 1.299_038_105_676_658;
/// Excess kurtosis of the running average relative to that of X_t.
pub const TS_KURTOSIS_FACTOR: f64 = 9.0 / 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Cumulant of order n: a t Γ(n−c) / ((n+1) b^{n−c}), zero for n = 0.
pub fn cumulant(p: &AtsParams, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    p.shape() * gamma(nf - p.c) / ((nf + 1.0) * p.b.powf(nf - p.c))
}

/// Cumulant of order n of the tempered stable X_t: a t Γ(n−c) / b^{n−c}.
pub fn cumulant_ts(p: &AtsParams, n: usize) -> f64 {
    cumulant(p, n) * (n as f64 + 1.0)
}

/// Raw moments M(0..=n) from M(n) = Σ_{k<n} binom(n−1, k) C(k+1) M(n−1−k).
pub fn moments_upto(p: &AtsParams, n: usize) -> Vec<f64> {
    let kappa: Vec<f64> = (0..=n).map(|k| cumulant(p, k)).collect();
    let mut m = vec![0.0; n + 1];
    m[0] = 1.0;
    for j in 1..=n {
        // binom(j−1, k) built incrementally along the row
        let mut binom = 1.0;
        let mut s = 0.0;
        for k in 0..j {
            s += binom * kappa[k + 1] * m[j - 1 - k];
            binom = binom * (j - 1 - k) as f64 / (k + 1) as f64;
        }
        m[j] = s;
    }
    m
}

/// Raw moment of order n.
pub fn moment(p: &AtsParams, n: usize) -> f64 {
    moments_upto(p, n)[n]
}

/// Exact rational moments M(1..=n) for the average-gamma law (c = 0) with
/// rational shape a·t = shape_num/shape_den and rate b = rate_num/rate_den.
pub fn moments_exact_gamma(shape: (i64, i64), rate: (i64, i64), n: usize) -> Vec<BigRational> {
    let at = BigRational::new(BigInt::from(shape.0), BigInt::from(shape.1));
    let b = BigRational::new(BigInt::from(rate.0), BigInt::from(rate.1));
    // C(k) = at (k−1)! / ((k+1) b^k)
    let mut kappa = vec![BigRational::zero(); n + 1];
    let mut fact = BigRational::one();
    let mut bpow = BigRational::one();
    for k in 1..=n {
        if k > 1 {
            fact *= BigRational::from_integer(BigInt::from(k as i64 - 1));
        }
        bpow *= &b;
        kappa[k] = &at * &fact / (BigRational::from_integer(BigInt::from(k as i64 + 1)) * &bpow);
    }
    let mut m = vec![BigRational::zero(); n + 1];
    m[0] = BigRational::one();
    for j in 1..=n {
        let mut s = BigRational::zero();
        let mut binom = BigInt::one();
        for k in 0..j {
            s += BigRational::from_integer(binom.clone()) * &kappa[k + 1] * &m[j - 1 - k];
            binom = binom * BigInt::from((j - 1 - k) as i64) / BigInt::from((k + 1) as i64);
        }
        m[j] = s;
    }
    m
}

/// Exact moments when c = 0 and both a·t and b are ratios of integers with
/// denominators up to 10⁴; `None` otherwise.
pub fn moments_exact(p: &AtsParams, n: usize) -> Option<Vec<BigRational>> {
    if p.c != 0.0 {
        return None;
    }
    Some(moments_exact_gamma(small_ratio(p.shape())?, small_ratio(p.b)?, n))
}

fn small_ratio(x: f64) -> Option<(i64, i64)> {
    (1..=10_000i64).find_map(|d| {
        let n = (x * d as f64).round();
        ((n - x * d as f64).abs() <= 1e-9 * d as f64 && n.abs() < 1e15).then_some((n as i64, d))
    })
}

/// Mean, variance, skewness and excess kurtosis.
pub fn stats(p: &AtsParams) -> SummaryStats {
    let c2 = cumulant(p, 2);
    SummaryStats {
        mean: cumulant(p, 1),
        variance: c2,
        skewness: cumulant(p, 3) / c2.powf(1.5),
        excess_kurtosis: cumulant(p, 4) / (c2 * c2),
    }
}

/// Summary statistics of the tempered stable X_t itself.
pub fn stats_ts(p: &AtsParams) -> SummaryStats {
    let c2 = cumulant_ts(p, 2);
    SummaryStats {
        mean: cumulant_ts(p, 1),
        variance: c2,
        skewness: cumulant_ts(p, 3) / c2.powf(1.5),
        excess_kurtosis: cumulant_ts(p, 4) / (c2 * c2),
    }
}

/// cov(X̃_t, X̃_v) = aΓ(2−c)(3(t∨v) − t∧v)/(6 b^{2−c}) · (t∧v)/(t∨v).
/// Only (a, b, c) of `p` enter; its horizon is ignored.
pub fn covariance_running_average(p: &AtsParams, t: f64, v: f64) -> f64 {
    let (lo, hi) = if t <= v { (t, v) } else { (v, t) };
    p.a * gamma(2.0 - p.c) * (3.0 * hi - lo) / (6.0 * p.b.powf(2.0 - p.c)) * (lo / hi)
}

/// cov(Λ_t, Λ_v) = aΓ(2−c)(t∧v)/(3 b^{2−c}), for comparison.
pub fn covariance_subordinator(p: &AtsParams, t: f64, v: f64) -> f64 {
    p.a * gamma(2.0 - p.c) * t.min(v) / (3.0 * p.b.powf(2.0 - p.c))
}

/// Right-tail constant K = a t b^c c Γ(−c−1) = a t b^c Γ(1−c)/(c+1), so that
/// the density behaves like a t e^{K−bx}/(b x^{c+2}) far out.
pub fn right_tail_constant(p: &AtsParams) -> f64 {
    p.shape() * p.b.powf(p.c) * gamma(1.0 - p.c) / (p.c + 1.0)
}

/// Large-order approximation M(n) ≈ a t e^K Γ(n−c−1)/b^{n−c}; meaningful
/// for n ≳ 15.
pub fn moment_large_order(p: &AtsParams, n: usize) -> f64 {
    let nf = n as f64;
    let log = p.shape().ln() + right_tail_constant(p) + ln_gamma(nf - p.c - 1.0) - (nf - p.c) * p.b.ln();
    log.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::laplace_ats_real;
    use std::f64::consts::PI;

    fn p(a: f64, b: f64, c: f64) -> AtsParams {
        AtsParams::unit(a, b, c).unwrap()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn exact_moments_from_floats() {
        let m = moments_exact(&AtsParams::new(3.0, 1.0, 0.0, 0.5).unwrap(), 5).unwrap();
        assert_eq!(m[3], rat(147, 64));
        assert!(moments_exact(&p(1.0, 1.0, 0.5), 3).is_none());
        assert!(moments_exact(&p(std::f64::consts::E, 1.0, 0.0), 3).is_none());
    }

    #[test]
    fn cumulant_examples() {
        assert!((cumulant(&p(1.0, 1.0, 0.0), 1) - 0.5).abs() < 1e-15);
        assert!((cumulant(&p(1.0, 1.0, 0.5), 2) - PI.sqrt() / 6.0).abs() < 1e-15);
        assert_eq!(cumulant(&p(1.0, 1.0, 0.5), 0), 0.0);
        assert!((cumulant(&p(2.0, 1.3, 0.3), 3) - 2.0 * cumulant(&p(1.0, 1.3, 0.3), 3)).abs() < 1e-15);
    }

    #[test]
    fn exact_gamma_moments() {
        let m = moments_exact_gamma((1, 1), (1, 1), 5);
        let want = [rat(1, 2), rat(7, 12), rat(9, 8), rat(743, 240), rat(1075, 96)];
        for (k, w) in want.iter().enumerate() {
            assert_eq!(&m[k + 1], w);
        }
        let m = moments_exact_gamma((2, 1), (1, 1), 5);
        assert_eq!(m[2], rat(5, 3));
        assert_eq!(m[3], rat(4, 1));
        assert_eq!(m[5], rat(51, 1));
        let m = moments_exact_gamma((1, 2), (1, 1), 5);
        assert_eq!(m[4], rat(3839, 3840));
    }

    #[test]
    fn float_moments_follow_the_exact_ones() {
        let m = moments_upto(&p(1.5, 1.0, 0.0), 5);
        let want = [3.0 / 4.0, 17.0 / 16.0, 147.0 / 64.0, 8709.0 / 1280.0, 26499.0 / 1024.0];
        for (k, w) in want.iter().enumerate() {
            assert!((m[k + 1] - w).abs() < 1e-13);
        }
        let s = moments_upto(&p(1.0, 1.0, 0.5), 2);
        assert!((s[1] - PI.sqrt() / 2.0).abs() < 1e-15);
        assert!((s[2] - (3.0 * PI + 2.0 * PI.sqrt()) / 12.0).abs() < 1e-15);
    }

    #[test]
    fn stats_and_ts_factors() {
        for &(a, b, c) in &[(1.0, 1.0, 0.0), (1.0, 1.0, 0.5), (2.3, 0.7, 0.8)] {
            let q = p(a, b, c);
            let s = stats(&q);
            let ts = stats_ts(&q);
            let m = moments_upto(&q, 2);
            assert!((s.variance - (m[2] - m[1] * m[1])).abs() < 1e-12);
            assert!((s.mean / ts.mean - TS_MEAN_RATIO).abs() < 1e-14);
            assert!((s.variance / ts.variance - TS_VARIANCE_RATIO).abs() < 1e-14);
            assert!((s.skewness / ts.skewness - 3.0 * 3f64.sqrt() / 4.0).abs() < 1e-14);
            assert!((s.excess_kurtosis / ts.excess_kurtosis - TS_KURTOSIS_FACTOR).abs() < 1e-14);
            assert!(s.variance > 0.0 && s.skewness > 0.0 && s.excess_kurtosis > 0.0);
        }
        assert!((stats(&p(1.0, 1.0, 0.0)).mean - 0.5).abs() < 1e-15);
    }

    #[test]
    fn covariance() {
        let q = p(1.0, 1.0, 0.5);
        assert!((covariance_running_average(&q, 1.0, 1.0) - PI.sqrt() / 6.0).abs() < 1e-15);
        assert_eq!(covariance_running_average(&q, 0.3, 2.0), covariance_running_average(&q, 2.0, 0.3));
        let s = stats(&q.with_horizon(0.7).unwrap());
        assert!((covariance_running_average(&q, 0.7, 0.7) - s.variance).abs() < 1e-14);
        assert!((covariance_running_average(&q, 0.5, 1.5) - covariance_subordinator(&q, 0.5, 1.5)).abs() > 1e-3);
    }

    #[test]
    fn large_order_ratio_converges() {
        let q = p(1.0, 1.0, 0.5);
        let m = moments_upto(&q, 40);
        let devs: Vec<f64> = [20, 30, 40].iter().map(|&n| (m[n] / moment_large_order(&q, n) - 1.0).abs()).collect();
        assert!(devs[0] > devs[1] && devs[1] > devs[2], "{devs:?}");
        assert!(devs[2] < 0.1, "{devs:?}");
        let q2 = p(1.0, 2.0, 0.5);
        let r = moment_large_order(&q2, 20) / moment_large_order(&q, 20);
        let k = right_tail_constant(&q2) - right_tail_constant(&q);
        assert!((r / (k.exp() * 2f64.powf(0.5 - 20.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moment_series_reproduces_transform() {
        for &(a, b, c) in &[(1.0, 1.0, 0.5), (2.0, 1.0, 0.25), (0.5, 1.0, 0.75), (1.0, 1.0, 0.0)] {
            let q = p(a, b, c);
            let m = moments_upto(&q, 12);
            for u in [-0.1, -0.05, 0.02, 0.1] {
                let mut fact = 1.0;
                let mut s = 0.0;
                for (n, mn) in m.iter().enumerate() {
                    if n > 0 {
                        fact *= n as f64;
                    }
                    s += mn * (-u as f64).powi(n as i32) / fact;
                }
                let f = laplace_ats_real(&q, u).unwrap();
                assert!((s - f).abs() < 1e-8, "{a} {b} {c} {u}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn positive_and_log_convex(a in 0.1f64..5.0, b in 0.1f64..5.0, c in 0.0f64..0.95) {
                let m = moments_upto(&AtsParams::unit(a, b, c).unwrap(), 12);
                for n in 1..12 {
                    prop_assert!(m[n] > 0.0);
                    prop_assert!(m[n] * m[n] <= m[n - 1] * m[n + 1] * (1.0 + 1e-12));
                }
            }

            #[test]
            fn cumulants_linear_in_a(a in 0.1f64..5.0, b in 0.1f64..5.0, c in 0.0f64..0.95, n in 1usize..8) {
                let one = cumulant(&AtsParams::unit(a, b, c).unwrap(), n);
                let two = cumulant(&AtsParams::unit(2.0 * a, b, c).unwrap(), n);
                prop_assert!((two - 2.0 * one).abs() <= 1e-13 * two.abs());
                prop_assert_eq!(moment(&AtsParams::unit(a, b, c).unwrap(), 1), cumulant(&AtsParams::unit(a, b, c).unwrap(), 1));
            }
        }
    }
}
