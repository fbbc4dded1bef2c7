//! Desk-scale acceptance checks. Each criterion reports pass/fail, its largest
//! observed deviation and wall time; `run` executes a scope of them.

use std::f64::consts::{E, PI};
use std::time::Instant;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::degrade::{aic_win_rate, fit_mle, DegradationModel};
use crate::dist::{self, Regime};
use crate::error::Result;
use crate::moments::{
    moments_exact_gamma, moments_upto, stats, stats_ts, TS_KURTOSIS_FACTOR, TS_SKEWNESS_FACTOR,
};
use crate::params::{laplace_ats, laplace_ats_real, laplace_exponent_ats, levy_triplet_ats, AtsParams};
use crate::pricing::{
    calibrate, monte_carlo_call, price_pair, synthetic_quotes, MarketContext, MixtureParams,
};
use crate::quad::{integrate_finite, integrate_semi_infinite, integrate_semi_infinite_scaled, QuadConfig};
use crate::sim::{cpa_terminal_samples, euler_paths, ks_distance, stream_rng, CpaConfig, PathGrid, SamplePath};
use crate::special::{digamma, gamma};

pub const CRITERIA: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub max_deviation: f64,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Deterministic checks only; a few seconds.
    Quick,
    /// Everything, including the Monte Carlo and calibration checks.
    Full,
}

impl Scope {
    pub fn ids(self) -> Vec<usize> {
        match self {
            Scope::Quick => vec![1, 2, 4, 6, 10],
            Scope::Full => (1..=CRITERIA).collect(),
        }
    }
}

pub fn name(id: usize) -> &'static str {
    match id {
        1 => "moment table",
        2 => "curious identity",
        3 => "transform/density duality",
        4 => "statistics identities",
        5 => "tail asymptotics",
        6 => "average-gamma left limit",
        7 => "simulation law",
        8 => "degradation recovery",
        9 => "pricing consistency",
        10 => "property suites",
        _ => "unknown",
    }
}

/// Result of one check before timing is attached.
struct Verdict {
    passed: bool,
    deviation: f64,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, deviation: f64, detail: impl Into<String>) -> Self {
        Self { passed, deviation, detail: detail.into() }
    }
}

/// Runs criterion `id` (1..=10). Errors inside a check count as a failure.
pub fn criterion(id: usize) -> CheckOutcome {
    let start = Instant::now();
    let verdict = match id {
        1 => moment_table(),
        2 => curious_identity(),
        3 => duality(),
        4 => statistics(),
        5 => tails(),
        6 => gamma_left_limit(),
        7 => simulation_law(),
        8 => degradation_recovery(),
        9 => pricing_consistency(),
        10 => properties(),
        _ => Ok(Verdict::new(false, f64::NAN, format!("no criterion {id}"))),
    };
    let v = verdict.unwrap_or_else(|e| Verdict::new(false, f64::NAN, format!("error: {e}")));
    CheckOutcome {
        id,
        name: name(id),
        passed: v.passed,
        max_deviation: v.deviation,
        detail: v.detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run(scope: Scope) -> Vec<CheckOutcome> {
    scope.ids().into_iter().map(criterion).collect()
}

fn p(a: f64, b: f64, c: f64) -> Result<AtsParams> {
    AtsParams::unit(a, b, c)
}

fn rel(x: f64, y: f64) -> f64 {
    ((x - y) / y).abs()
}

/// Reference moments M(0..=5) at b = t = 1, c = 0, as (numerator, denominator).
const REFERENCE_GAMMA: [((i64, i64), [(i64, i64); 6]); 4] = [
    ((1, 2), [(1, 1), (1, 4), (11, 48), (25, 64), (3839, 3840), (3537, 1024)]),
    ((1, 1), [(1, 1), (1, 2), (7, 12), (9, 8), (743, 240), (1075, 96)]),
    ((3, 2), [(1, 1), (3, 4), (17, 16), (147, 64), (8709, 1280), (26499, 1024)]),
    ((2, 1), [(1, 1), (1, 1), (5, 3), (4, 1), (191, 15), (51, 1)]),
];

/// Reference closed-form moments at c = 1/2, indexed by 2a.
fn reference_half(a2: i64) -> [f64; 6] {
    let s = PI.sqrt();
    let p32 = PI * s;
    let pi2 = PI * PI;
    match a2 {
        1 => [
            1.0,
            s / 4.0,
            (3.0 * PI + 4.0 * s) / 48.0,
            s * (PI + 4.0 * s + 6.0) / 64.0,
            (3.0 * pi2 + 24.0 * p32 + 88.0 * PI + 144.0 * s) / 768.0,
            s * (3.0 * pi2 + 40.0 * p32 + 260.0 * PI + 960.0 * s + 1680.0) / 3072.0,
        ],
        2 => [
            1.0,
            s / 2.0,
            (3.0 * PI + 2.0 * s) / 12.0,
            s * (2.0 * PI + 4.0 * s + 3.0) / 16.0,
            (3.0 * pi2 + 12.0 * p32 + 22.0 * PI + 18.0 * s) / 48.0,
            s * (3.0 * pi2 + 20.0 * p32 + 65.0 * PI + 120.0 * s + 105.0) / 96.0,
        ],
        3 => [
            1.0,
            3.0 * s / 4.0,
            (9.0 * PI + 4.0 * s) / 16.0,
            9.0 * s * (3.0 * PI + 4.0 * s + 2.0) / 64.0,
            3.0 * (27.0 * pi2 + 72.0 * p32 + 88.0 * PI + 48.0 * s) / 256.0,
            3.0 * s * (81.0 * pi2 + 360.0 * p32 + 780.0 * PI + 960.0 * s + 560.0) / 1024.0,
        ],
        _ => [
            1.0,
            s,
            (3.0 * PI + s) / 3.0,
            s * (8.0 * PI + 8.0 * s + 3.0) / 8.0,
            (12.0 * pi2 + 24.0 * p32 + 22.0 * PI + 9.0 * s) / 12.0,
            s * (48.0 * pi2 + 160.0 * p32 + 260.0 * PI + 240.0 * s + 105.0) / 48.0,
        ],
    }
}

fn moment_table() -> Result<Verdict> {
    let mut dev: f64 = 0.0;
    let mut exact = true;
    for (shape, row) in REFERENCE_GAMMA {
        let rational = moments_exact_gamma(shape, (1, 1), 5);
        let a = shape.0 as f64 / shape.1 as f64;
        let float = moments_upto(&p(a, 1.0, 0.0)?, 5);
        for (n, &(num, den)) in row.iter().enumerate() {
            let want = BigRational::new(BigInt::from(num), BigInt::from(den));
            exact &= rational[n] == want;
            let w = num as f64 / den as f64;
            dev = dev.max((float[n] - w).abs() / w.abs().max(1.0));
            dev = dev.max((rational[n].to_f64().unwrap_or(f64::NAN) - w).abs() / w.abs().max(1.0));
        }
        let half = moments_upto(&p(a, 1.0, 0.5)?, 5);
        for (n, w) in reference_half(2 * shape.0 / shape.1).into_iter().enumerate() {
            dev = dev.max((half[n] - w).abs() / w.abs().max(1.0));
        }
    }
    Ok(Verdict::new(exact && dev < 1e-12, dev, format!("rationals exact: {exact}; max scaled deviation {dev:.2e}")))
}

fn curious_identity() -> Result<Verdict> {
    let r = integrate_finite(
        |y| (1.0 / y - 1.0).powf(y - 1.0) * (PI * (1.0 - y)).sin() / (y * y),
        0.0,
        1.0,
        &QuadConfig::default(),
    )?;
    let dev = (r.value - PI).abs();
    Ok(Verdict::new(dev < 1e-8, dev, format!("integral {:.15}", r.value)))
}

fn moment_quad(q: &AtsParams, f: impl Fn(f64) -> f64) -> Result<f64> {
    let scale = stats(q).mean;
    let cfg = QuadConfig { abs_tol: 1e-13, rel_tol: 1e-11, max_subdivisions: 400, ..QuadConfig::default() };
    let r = integrate_semi_infinite_scaled(
        |x| {
            // e^{−ux} with u < 0 overflows only where the density has underflowed
            let d = if x > 0.0 { dist::pdf(q, x).unwrap_or(f64::NAN) } else { 0.0 };
            if d == 0.0 { 0.0 } else { f(x) * d }
        },
        0.0,
        scale,
        &cfg,
    )?;
    Ok(r.value)
}

fn duality() -> Result<Verdict> {
    let sets = [(1.0, 1.0, 0.5), (2.0, 1.5, 0.25), (1.5, 0.7, 0.75), (1.0, 1.0, 0.0)];
    let mut dev: f64 = 0.0;
    for (a, b, c) in sets {
        let q = p(a, b, c)?;
        for u in [-0.5 * b, 0.5, 1.0, 3.0] {
            let lt = moment_quad(&q, |x| (-u * x).exp())?;
            dev = dev.max((lt - laplace_ats_real(&q, u)?).abs());
        }
    }
    Ok(Verdict::new(dev < 1e-6, dev, format!("16 transform values, max |difference| {dev:.2e}")))
}

fn statistics() -> Result<Verdict> {
    let mut dev: f64 = 0.0;
    let mut ratio_dev: f64 = 0.0;
    for (a, b, c) in [(1.0, 1.0, 0.5), (2.0, 1.5, 0.25), (1.0, 1.0, 0.0)] {
        let q = p(a, b, c)?;
        let s = stats(&q);
        let mean = a * gamma(1.0 - c) / (2.0 * b.powf(1.0 - c));
        let var = a * gamma(2.0 - c) / (3.0 * b.powf(2.0 - c));
        let m1 = moment_quad(&q, |x| x)?;
        let m2 = moment_quad(&q, |x| x * x)?;
        for (got, want) in [(s.mean, mean), (s.variance, var), (m1, mean), (m2 - m1 * m1, var)] {
            dev = dev.max(rel(got, want));
        }
        let ts = stats_ts(&q);
        ratio_dev = ratio_dev.max((s.skewness / ts.skewness - TS_SKEWNESS_FACTOR).abs());
        ratio_dev = ratio_dev.max((s.excess_kurtosis / ts.excess_kurtosis - TS_KURTOSIS_FACTOR).abs());
    }
    ratio_dev = ratio_dev.max((TS_SKEWNESS_FACTOR - 3.0 * 3f64.sqrt() / 4.0).abs());
    ratio_dev = ratio_dev.max((TS_KURTOSIS_FACTOR - 9.0 / 5.0).abs());
    let ok = dev < 1e-8 && ratio_dev < 1e-12;
    Ok(Verdict::new(ok, dev.max(ratio_dev), format!("moment deviation {dev:.2e}, ratio deviation {ratio_dev:.2e}")))
}

fn tails() -> Result<Verdict> {
    let q = AtsParams::new(1.0, 1.0, 0.5, 1.0)?;
    let mean = stats(&q).mean;
    let right: Vec<f64> = [20.0, 40.0, 60.0]
        .iter()
        .map(|&x| Ok((dist::pdf(&q, x)? / dist::pdf_right_tail(&q, x).value - 1.0).abs()))
        .collect::<Result<_>>()?;
    let left: Vec<f64> = [0.05, 0.02, 0.01]
        .iter()
        .map(|&k| {
            let x = k * mean;
            Ok((dist::pdf(&q, x)? / dist::pdf_left_tail(&q, x)?.value - 1.0).abs())
        })
        .collect::<Result<_>>()?;
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let last = right[2].max(left[2]);
    let ok = decreasing(&right) && decreasing(&left) && last < 0.1;
    Ok(Verdict::new(ok, last, format!("right {}, left {}", sci(&right), sci(&left))))
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" → ")
}

fn gamma_left_limit() -> Result<Verdict> {
    let d1 = rel(dist::pdf(&p(1.0, 1.0, 0.0)?, 1e-6)?, E);
    let half = p(0.5, 1.0, 0.0)?;
    let flat: Vec<f64> = [1e-4, 1e-5, 1e-6].iter().map(|&x| Ok(dist::pdf(&half, x)? * x.sqrt())).collect::<Result<_>>()?;
    let d2 = flat.iter().map(|v| rel(*v, flat[2])).fold(0.0, f64::max);
    let ok = d1 < 2e-3 && d2 < 0.05;
    Ok(Verdict::new(ok, d1.max(d2), format!("at = 1 deviation from e {d1:.2e}; at = 1/2 spread {d2:.2e}")))
}

fn simulation_law() -> Result<Verdict> {
    let q = p(1.0, 1.0, 0.5)?;
    let cdf = |x: f64| dist::cdf(&q, x.max(1e-12)).unwrap_or(f64::NAN);
    let grid = PathGrid::new(2000, 1.0)?;
    let (_, avgs) = euler_paths(&q, &grid, 2000, 71)?;
    let euler: Vec<f64> = avgs.iter().map(SamplePath::terminal).collect();
    let ks_euler = ks_distance(&euler, cdf);
    let cpa = cpa_terminal_samples(&q, &CpaConfig::default(), 2000, 72)?;
    let ks_cpa = ks_distance(&cpa, cdf);
    let dev = ks_euler.max(ks_cpa);
    Ok(Verdict::new(dev < 0.05, dev, format!("KS Euler {ks_euler:.4}, CPA {ks_cpa:.4}")))
}

fn trigamma(x: f64) -> f64 {
    let h = 1e-5 * x;
    (digamma(x + h) - digamma(x - h)) / (2.0 * h)
}

fn degradation_recovery() -> Result<Verdict> {
    let rate = aic_win_rate(&p(5.0, 6.0, 0.0)?, 50, 2024)?;
    let (a, b, dt) = (5.0, 7.0, 1.0 / 200.0);
    let g = Gamma::new(a * dt, 1.0 / b).map_err(|e| crate::error::Error::Domain(e.to_string()))?;
    let mut rng = stream_rng(17, 0);
    let xs: Vec<f64> = (0..200).map(|_| g.sample(&mut rng)).collect();
    let fit = fit_mle(&xs, &vec![dt; 200], DegradationModel::Gamma)?;
    let n = 200.0;
    let (iaa, iab, ibb) = (n * dt * dt * trigamma(a * dt), -n * dt / b, n * a * dt / (b * b));
    let det = iaa * ibb - iab * iab;
    let (se_a, se_b) = ((ibb / det).sqrt(), (iaa / det).sqrt());
    let z = ((fit.a_hat - a) / se_a).abs().max(((fit.b_hat - b) / se_b).abs());
    let ok = rate >= 0.8 && z < 3.0;
    Ok(Verdict::new(
        ok,
        z,
        format!("AIC win rate {rate:.2} (need 0.80); gamma MLE within {z:.2} SE"),
    ))
}

fn pricing_consistency() -> Result<Verdict> {
    let truth = MixtureParams::new(0.0, -0.594359, 0.635236, AtsParams::unit(1.46874, 0.682686, 0.5)?)?;
    let mkt = MarketContext::new(100.0, 0.02, 0.01)?;
    let mut parity: f64 = 0.0;
    for t in [19.0 / 365.0, 0.5, 1.0] {
        for k in [60.0, 85.0, 100.0, 115.0, 150.0] {
            let pp = price_pair(&truth, &mkt, k, t)?;
            let r = pp.call - pp.put - mkt.spot * (-mkt.dividend_yield * t).exp() + k * (-mkt.rate * t).exp();
            parity = parity.max(r.abs());
        }
    }
    let mut z: f64 = 0.0;
    for (i, t) in [47.0 / 365.0, 166.0 / 365.0].into_iter().enumerate() {
        for (j, k) in [85.0, 100.0, 120.0].into_iter().enumerate() {
            let (mc, se) = monte_carlo_call(&truth, &mkt, k, t, 100_000, 64, 100 + 10 * i as u64 + j as u64)?;
            z = z.max((price_pair(&truth, &mkt, k, t)?.call - mc).abs() / se);
        }
    }
    let index = MarketContext::new(9232.98, 0.0, 0.0)?;
    let quotes = synthetic_quotes(&truth, &index, &[19.0, 47.0, 166.0, 257.0], &[0.8, 0.9, 0.95, 1.0, 1.05, 1.1, 1.2, 1.35])?;
    let arpe = calibrate(&quotes, &index, 0.5, None)?.arpe;
    let ok = parity < 1e-12 && z < 3.0 && arpe < 1e-4;
    Ok(Verdict::new(
        ok,
        arpe,
        format!("parity residual {parity:.1e}; MC max {z:.2} SE; calibration ARPE {arpe:.2e}"),
    ))
}

fn properties() -> Result<Verdict> {
    let mut failures = Vec::new();
    let mut rng = stream_rng(10, 0);
    let close = |x: Complex64, y: Complex64| (x - y).norm() / x.norm().max(y.norm()).max(1e-300);
    let mut law_dev: f64 = 0.0;
    for _ in 0..200 {
        let (a, b, c) = (rng.random_range(0.05..5.0), rng.random_range(0.05..5.0), rng.random_range(0.0..0.95));
        let u = Complex64::new(rng.random_range(-0.9..5.0) * b, rng.random_range(-5.0..5.0));
        let (t1, t2): (f64, f64) = (rng.random_range(0.01..3.0), rng.random_range(0.01..3.0));
        let f = |a: f64, b: f64, t: f64, u: Complex64| laplace_ats(&AtsParams::new(a, b, c, t)?, u);
        law_dev = law_dev.max(close(f(a, b, t1 + t2, u)?, f(a, b, t1, u)? * f(a, b, t2, u)?));
        law_dev = law_dev.max(close(f(a + t2, b, 1.0, u)?, f(a, b, 1.0, u)? * f(t2, b, 1.0, u)?));
        let rho = t1 * 3.0 + 0.1;
        let v = u / rho;
        law_dev = law_dev.max(close(f(a, b, 1.0, v * rho)?, f(a * rho.powf(c), b / rho, 1.0, v)?));
    }
    if law_dev > 1e-12 {
        failures.push(format!("transform laws {law_dev:.1e}"));
    }

    // log f̄(u) = −α̃u + ∫(e^{−ux} − 1 + ux·1{x<1}) ℓ̃(x) dx
    let mut lk_dev: f64 = 0.0;
    let cfg = QuadConfig::relative(1e-11);
    for (a, b, c) in [(1.0, 1.0, 0.5), (2.0, 1.0, 0.25), (0.5, 1.0, 0.75)] {
        let q = p(a, b, c)?;
        let tr = levy_triplet_ats(&q);
        for u in [0.5, 1.0, 2.0, 5.0] {
            let near = integrate_finite(|x| ((-(u * x)).exp_m1() + u * x) * tr.levy_density(x), 0.0, 1.0, &cfg)?.value;
            let far = integrate_semi_infinite(|x| (-(u * x)).exp_m1() * tr.levy_density(x), 1.0, &cfg)?.value;
            let direct = laplace_exponent_ats(&q, Complex64::new(u, 0.0))?.re;
            lk_dev = lk_dev.max((-tr.drift * u + near + far - direct).abs());
        }
    }
    if lk_dev > 1e-6 {
        failures.push(format!("Lévy–Khintchine {lk_dev:.1e}"));
    }

    for (a, b, c) in [(1.0, 1.0, 0.5), (2.0, 1.0, 0.25), (0.5, 1.0, 0.75), (3.0, 2.0, 0.0)] {
        let q = p(a, b, c)?;
        let s = stats(&q);
        let top = s.mean + 8.0 * s.variance.sqrt();
        let vals: Vec<f64> = (1..=200).map(|k| dist::pdf(&q, top * k as f64 / 200.0)).collect::<Result<_>>()?;
        let peak = vals.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).map_or(0, |m| m.0);
        let unimodal = vals[..=peak].windows(2).all(|w| w[1] >= w[0] - 1e-12)
            && vals[peak..].windows(2).all(|w| w[1] <= w[0] + 1e-12);
        if !unimodal {
            failures.push(format!("density not unimodal at ({a}, {b}, {c})"));
        }
        let cdfs: Vec<f64> = (1..=100).map(|k| dist::cdf(&q, top * k as f64 / 100.0)).collect::<Result<_>>()?;
        if !cdfs.windows(2).all(|w| w[1] >= w[0]) || cdfs.iter().any(|v| !(0.0..=1.0).contains(v)) {
            failures.push(format!("distribution function not monotone at ({a}, {b}, {c})"));
        }
        let tail = dist::cdf_tails(&q, top, Regime::RightTail)?;
        if !(tail.value >= 0.0) {
            failures.push("negative tail estimate".into());
        }
    }

    let grid = PathGrid::new(200, 1.0)?;
    let (xs, avgs) = euler_paths(&p(1.0, 1.0, 0.3)?, &grid, 200, 12)?;
    let paths_ok = xs.iter().all(SamplePath::is_nondecreasing)
        && avgs.iter().all(SamplePath::is_nondecreasing)
        && xs.iter().zip(&avgs).all(|(x, a)| x.values.iter().zip(&a.values).all(|(u, v)| *v <= u * (1.0 + 1e-12)));
    if !paths_ok {
        failures.push("sample paths not monotone".into());
    }

    let detail = if failures.is_empty() {
        format!("transform laws {law_dev:.1e}; Lévy–Khintchine {lk_dev:.1e}; shape and path checks green")
    } else {
        failures.join("; ")
    };
    Ok(Verdict::new(failures.is_empty(), law_dev.max(lk_dev), detail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_scope_passes() {
        for o in run(Scope::Quick) {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }

    #[test]
    fn unknown_criterion_fails_cleanly() {
        let o = criterion(11);
        assert!(!o.passed && o.max_deviation.is_nan());
    }
}
