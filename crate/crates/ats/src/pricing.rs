//! Option pricing under the Gaussian mixture H_t = κt + μΛ_t + σW_{Λ_t}
//! with an ATS subordinator Λ.
//!
//! The price process is S_T = S₀ e^{(r−q)T} e^{H_T} / f̄_H(−1), so the
//! forward is S₀e^{(r−q)T} and the call is in the money when
//! H_T > k* = log(K/S₀) − (r−q)T + log f̄_H(−1). Then
//!
//! ```text
//! call = S₀e^{−qT} P̆ − K e^{−rT} P*
//! P*   = Q(H_T > k*)
//! P̆   = E[e^{H_T} 1{H_T > k*}] / f̄_H(−1)
//! ```
//!
//! Both probabilities are computed by Gil-Pelaez inversion of the
//! characteristic function, and independently by integrating the mixture
//! density in closed form over z before the final y quadrature.

use std::f64::consts::PI;
use std::io::Read;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::cut_exponents;
use crate::error::{Error, Result};
use crate::moments::stats;
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::params::{laplace_exponent_ats, AtsParams};
use crate::quad::{integrate_finite, integrate_octaves, QuadConfig, QuadResult};
use crate::sim::{average_terminal_samples, mixture_terminal_from};

const CONDITION_LIMIT: f64 = 1e4;
const MAX_OCTAVES: usize = 48;

/// Gaussian mixture H_t = κt + μΛ_t + σW_{Λ_t} over the ATS subordinator Λ.
/// The horizon of `base` is the maturity at which H is observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub kappa: f64,
    pub mu: f64,
    pub sigma: f64,
    pub base: AtsParams,
}

impl MixtureParams {
    pub fn new(kappa: f64, mu: f64, sigma: f64, base: AtsParams) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter { name: "sigma", value: sigma, reason: "must be positive and finite" });
        }
        if !(kappa.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidParameter { name: "mu", value: mu, reason: "kappa and mu must be finite" });
        }
        let m = Self { kappa, mu, sigma, base };
        let (lo, _) = m.strip();
        if !(lo < -1.0) {
            return Err(Error::Domain(format!(
                "e^H is not integrable: need 2b > 2mu + sigma^2, got b = {}, mu = {mu}, sigma = {sigma}",
                base.b
            )));
        }
        Ok(m)
    }

    /// Real strip (μ ∓ √(μ² + 2bσ²))/σ² on which the transform is finite.
    pub fn strip(&self) -> (f64, f64) {
        let s2 = self.sigma * self.sigma;
        let r = (self.mu * self.mu + 2.0 * self.base.b * s2).sqrt();
        ((self.mu - r) / s2, (self.mu + r) / s2)
    }

    pub fn with_maturity(&self, t: f64) -> Result<Self> {
        Ok(Self { base: self.base.with_horizon(t)?, ..*self })
    }

    /// Blumenthal–Getoor index of H, twice that of Λ.
    pub fn bg_index(&self) -> f64 {
        2.0 * self.base.c
    }

    /// Mean and variance of H_t.
    pub fn mean_and_variance(&self) -> (f64, f64) {
        let s = stats(&self.base);
        let mean = self.kappa * self.base.t + self.mu * s.mean;
        (mean, self.mu * self.mu * s.variance + self.sigma * self.sigma * s.mean)
    }
}

/// log E e^{−uH_t} = −κtu + log f̄_Λ(μu − σ²u²/2).
pub fn log_laplace_mixture(mp: &MixtureParams, u: Complex64) -> Result<Complex64> {
    let (lo, hi) = mp.strip();
    if !(u.re > lo && u.re < hi) {
        return Err(Error::Domain(format!("Re u = {} lies outside the strip ({lo}, {hi})", u.re)));
    }
    let w = mp.mu * u - 0.5 * mp.sigma * mp.sigma * u * u;
    Ok(-mp.kappa * mp.base.t * u + laplace_exponent_ats(&mp.base, w)?)
}

/// E e^{−uH_t}.
pub fn laplace_mixture(mp: &MixtureParams, u: Complex64) -> Result<Complex64> {
    let l = log_laplace_mixture(mp, u)?;
    if l.re > 709.0 {
        return Err(Error::Overflow { log_value: l.re });
    }
    Ok(l.exp())
}

/// Characteristic function E e^{ivH_t}.
pub fn characteristic_mixture(mp: &MixtureParams, v: f64) -> Result<Complex64> {
    laplace_mixture(mp, Complex64::new(0.0, -v))
}

// Density.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixtureRoute {
    /// Single integral over the branch cut of f̄_Λ.
    Cut,
    /// Inversion of the transform along a vertical line in the strip.
    Fourier,
}

fn quad_cfg() -> QuadConfig {
    QuadConfig { abs_tol: 1e-14, rel_tol: 1e-11, max_subdivisions: 400, ..QuadConfig::default() }
}

fn scaled(mut r: QuadResult, k: f64) -> QuadResult {
    r.value *= k;
    r.error_estimate *= k.abs();
    r.abs_value *= k.abs();
    r
}

fn cut_accept(r: &QuadResult) -> bool {
    r.converged && r.value.is_finite() && r.condition() < CONDITION_LIMIT
}

/// (b/π) ∫ e^{E} sin S · w(y, R) / y² dy with R = √(μ² + 2bσ²/y); `w`
/// returns an extra exponent and a factor so the exponential is formed once.
fn mixture_cut<W: Fn(f64) -> (f64, f64)>(mp: &MixtureParams, w: W) -> Result<QuadResult> {
    let b = mp.base.b;
    let cut = cut_exponents(&mp.base);
    let s2 = mp.sigma * mp.sigma;
    let r = integrate_finite(
        |y| {
            if y <= 0.0 {
                return 0.0;
            }
            let (e, s) = cut(y);
            let big_r = (mp.mu * mp.mu + 2.0 * b * s2 / y).sqrt();
            let (extra, factor) = w(big_r);
            let expo = e + extra;
            if expo < -745.0 || factor == 0.0 {
                return 0.0;
            }
            expo.exp() * s.sin() * factor / (y * y)
        },
        0.0,
        1.0,
        &quad_cfg(),
    )?;
    Ok(scaled(r, b / PI))
}

fn density_cut(mp: &MixtureParams, x: f64) -> Result<QuadResult> {
    let s2 = mp.sigma * mp.sigma;
    let z = x - mp.kappa * mp.base.t;
    mixture_cut(mp, |r| ((mp.mu * z - z.abs() * r) / s2, 1.0 / r))
}

/// Real shift d in the strip minimizing d·x + log f̄_H(d), the point where
/// the Bromwich integrand is flattest.
fn fourier_shift(mp: &MixtureParams, x: f64) -> f64 {
    let (lo, hi) = mp.strip();
    let margin = 1e-6 * (hi - lo);
    let h = |d: f64| {
        log_laplace_mixture(mp, Complex64::new(d, 0.0)).map(|l| d * x + l.re).unwrap_or(f64::INFINITY)
    };
    let (mut a, mut b) = (lo + margin, hi - margin);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (h(c), h(d));
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = h(d);
        }
    }
    0.5 * (a + b)
}

fn density_fourier(mp: &MixtureParams, x: f64) -> Result<QuadResult> {
    let d = fourier_shift(mp, x);
    let (_, var) = mp.mean_and_variance();
    let width = 1.0 / var.sqrt().max(1e-8);
    let r = integrate_octaves(
        |v| {
            let u = Complex64::new(d, v);
            match log_laplace_mixture(mp, u) {
                Ok(l) => (u * x + l).exp().re,
                Err(_) => f64::NAN,
            }
        },
        0.0,
        width,
        MAX_OCTAVES,
        &quad_cfg(),
    )?;
    Ok(scaled(r, 1.0 / PI))
}

fn settle(r: QuadResult) -> Result<f64> {
    if r.value.is_finite() && (r.converged || r.error_estimate <= 1e-8 * r.abs_value.max(r.value.abs())) {
        Ok(r.value.max(0.0))
    } else {
        Err(Error::Quadrature { value: r.value, error: r.error_estimate })
    }
}

/// Density of H_t. The cut route is tried first when c ≤ 1/2 (its exponent
/// grows without bound as y ↘ 0 for c > 1/2); a poorly conditioned or
/// unconverged answer falls back to Fourier inversion.
pub fn pdf_mixture(mp: &MixtureParams, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {x}")));
    }
    if mp.base.c <= 0.5 {
        if let Ok(r) = density_cut(mp, x) {
            if cut_accept(&r) {
                return Ok(r.value.max(0.0));
            }
        }
    }
    settle(density_fourier(mp, x)?)
}

pub fn pdf_mixture_by(mp: &MixtureParams, x: f64, route: MixtureRoute) -> Result<f64> {
    match route {
        MixtureRoute::Cut => density_cut(mp, x)?.require().map(|v| v.max(0.0)),
        MixtureRoute::Fourier => settle(density_fourier(mp, x)?),
    }
}

// In-the-money probabilities.

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketContext {
    pub spot: f64,
    pub rate: f64,
    pub dividend_yield: f64,
}

impl MarketContext {
    pub fn new(spot: f64, rate: f64, dividend_yield: f64) -> Result<Self> {
        if !(spot > 0.0 && spot.is_finite()) {
            return Err(Error::InvalidParameter { name: "spot", value: spot, reason: "must be positive" });
        }
        if !(rate.is_finite() && dividend_yield.is_finite()) {
            return Err(Error::InvalidParameter { name: "rate", value: rate, reason: "rate and yield must be finite" });
        }
        Ok(Self { spot, rate, dividend_yield })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub strike: f64,
    /// Years.
    pub maturity: f64,
    pub market_price: f64,
    pub is_call: bool,
}

impl OptionQuote {
    pub fn new(strike: f64, maturity: f64, market_price: f64, is_call: bool) -> Result<Self> {
        for (name, v) in [("strike", strike), ("maturity", maturity), ("market_price", market_price)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, value: v, reason: "must be positive" });
            }
        }
        Ok(Self { strike, maturity, market_price, is_call })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ItmProbabilities {
    pub p_star: f64,
    pub p_breve: f64,
}

fn check_strike(strike: f64, maturity: f64) -> Result<()> {
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::InvalidParameter { name: "strike", value: strike, reason: "must be positive" });
    }
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(Error::InvalidParameter { name: "maturity", value: maturity, reason: "must be positive" });
    }
    Ok(())
}

/// Mixture at the maturity, log f̄_H(−1) and the exercise threshold k*.
fn threshold(mp: &MixtureParams, mkt: &MarketContext, strike: f64, maturity: f64) -> Result<(MixtureParams, f64, f64)> {
    check_strike(strike, maturity)?;
    let m = mp.with_maturity(maturity)?;
    let log_mgf = log_laplace_mixture(&m, Complex64::new(-1.0, 0.0))?.re;
    let k = (strike / mkt.spot).ln() - (mkt.rate - mkt.dividend_yield) * maturity + log_mgf;
    Ok((m, log_mgf, k))
}

/// Noise allowed outside [0, 1] before a probability is reported as an error.
const PROBABILITY_SLACK: f64 = 1e-7;

fn clamp_probability(p: f64) -> Result<f64> {
    if !(p > -PROBABILITY_SLACK && p < 1.0 + PROBABILITY_SLACK) {
        return Err(Error::Quadrature { value: p, error: PROBABILITY_SLACK });
    }
    Ok(p.clamp(0.0, 1.0))
}

/// ½ + (1/π) ∫₀^∞ Im[e^{−ivk} φ(v)] / v dv with φ(v) = exp(L(v)).
fn gil_pelaez<L: Fn(f64) -> Result<Complex64>>(log_cf: L, k: f64, width: f64) -> Result<f64> {
    let r = integrate_octaves(
        |v| match log_cf(v) {
            Ok(l) => (Complex64::new(0.0, -v * k) + l).exp().im / v,
            Err(_) => f64::NAN,
        },
        0.0,
        width,
        MAX_OCTAVES,
        &quad_cfg(),
    )?;
    if !r.value.is_finite() || !(r.converged || r.error_estimate <= 1e-9) {
        return Err(Error::Quadrature { value: r.value, error: r.error_estimate });
    }
    clamp_probability(0.5 + r.value / PI)
}

/// P* and P̆ by Fourier inversion of f̄_H(−iv) and f̄_H(−iv−1)/f̄_H(−1).
pub fn itm_probabilities(mp: &MixtureParams, mkt: &MarketContext, strike: f64, maturity: f64) -> Result<ItmProbabilities> {
    let (m, log_mgf, k) = threshold(mp, mkt, strike, maturity)?;
    let (_, var) = m.mean_and_variance();
    let width = 1.0 / var.sqrt().max(1e-8);
    let p_star = gil_pelaez(|v| log_laplace_mixture(&m, Complex64::new(0.0, -v)), k, width)?;
    let p_breve = gil_pelaez(|v| Ok(log_laplace_mixture(&m, Complex64::new(-1.0, -v))? - log_mgf), k, width)?;
    Ok(ItmProbabilities { p_star, p_breve })
}

/// One-sided integral of exp((m z − |z| R)/σ²)/R as (exponent, factor), for
/// R > |m|: over [x, ∞) when x ≥ 0 and over (−∞, x] when x < 0, so the
/// result always decays as y ↘ 0.
fn tail_integral(x: f64, m: f64, r: f64, s2: f64) -> (f64, f64) {
    if x >= 0.0 {
        ((m - r) * x / s2, s2 / ((r - m) * r))
    } else {
        ((m + r) * x / s2, s2 / ((r + m) * r))
    }
}

/// P* and P̆ by integrating the mixture density over z in closed form,
/// which leaves one quadrature over the branch cut. Below the origin the
/// complement is integrated. Requires c ≤ 1/2.
pub fn itm_probabilities_by_density(
    mp: &MixtureParams,
    mkt: &MarketContext,
    strike: f64,
    maturity: f64,
) -> Result<ItmProbabilities> {
    let (m, log_mgf, k) = threshold(mp, mkt, strike, maturity)?;
    if m.base.c > 0.5 {
        return Err(Error::Domain(format!("cut route needs c <= 1/2, got {}", m.base.c)));
    }
    let s2 = m.sigma * m.sigma;
    let z = k - m.kappa * m.base.t;
    let run = |shift: f64| -> Result<f64> {
        let r = mixture_cut(&m, |big_r| tail_integral(z, m.mu + shift, big_r, s2))?;
        if !cut_accept(&r) {
            return Err(Error::Quadrature { value: r.value, error: r.error_estimate });
        }
        Ok(r.value)
    };
    let star = run(0.0)?;
    let breve = run(s2)? * (m.kappa * m.base.t - log_mgf).exp();
    let (p_star, p_breve) = if z >= 0.0 { (star, breve) } else { (1.0 - star, 1.0 - breve) };
    Ok(ItmProbabilities { p_star: clamp_probability(p_star)?, p_breve: clamp_probability(p_breve)? })
}

// Prices.

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PricePair {
    pub call: f64,
    pub put: f64,
    pub p_star: f64,
    pub p_breve: f64,
    /// Set when the raw call fell below its no-arbitrage bound by more than
    /// quadrature noise and was raised to it.
    pub floored: bool,
}

/// Absolute price noise tolerated below the no-arbitrage bound, per unit spot.
const FLOOR_SLACK: f64 = 1e-8;

/// Call and put at one strike; the put follows from parity.
pub fn price_pair(mp: &MixtureParams, mkt: &MarketContext, strike: f64, maturity: f64) -> Result<PricePair> {
    let pr = itm_probabilities(mp, mkt, strike, maturity)?;
    let fwd_leg = mkt.spot * (-mkt.dividend_yield * maturity).exp();
    let strike_leg = strike * (-mkt.rate * maturity).exp();
    let raw = fwd_leg * pr.p_breve - strike_leg * pr.p_star;
    let bound = (fwd_leg - strike_leg).max(0.0);
    let floored = raw < bound - FLOOR_SLACK * mkt.spot;
    let call = raw.max(bound);
    Ok(PricePair { call, put: call - fwd_leg + strike_leg, p_star: pr.p_star, p_breve: pr.p_breve, floored })
}

pub fn price_european(mp: &MixtureParams, mkt: &MarketContext, quote: &OptionQuote) -> Result<f64> {
    let pair = price_pair(mp, mkt, quote.strike, quote.maturity)?;
    Ok(if quote.is_call { pair.call } else { pair.put })
}

// Calibration.

#[derive(Debug, Deserialize)]
struct QuoteRow {
    strike: f64,
    maturity_days: f64,
    price: f64,
    #[serde(rename = "type")]
    kind: String,
}

/// Reads `strike,maturity_days,price,type` rows with type C or P.
pub fn read_quotes<R: Read>(input: R) -> Result<Vec<OptionQuote>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<QuoteRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Input { line, message: e.to_string() })?;
        let is_call = match row.kind.to_ascii_uppercase().as_str() {
            "C" | "CALL" => true,
            "P" | "PUT" => false,
            other => return Err(Error::Input { line, message: format!("unknown option type {other:?}") }),
        };
        let q = OptionQuote::new(row.strike, row.maturity_days / 365.0, row.price, is_call)
            .map_err(|e| Error::Input { line, message: e.to_string() })?;
        out.push(q);
    }
    Ok(out)
}

/// Fitted (a, b, μ, σ) with c held fixed and κ = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSeed {
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Starting points used when none are supplied.
pub const DEFAULT_SEEDS: [CalibrationSeed; 4] = [
    CalibrationSeed { a: 1.0, b: 1.0, mu: -0.3, sigma: 0.5 },
    CalibrationSeed { a: 2.0, b: 0.5, mu: -0.8, sigma: 0.7 },
    CalibrationSeed { a: 0.5, b: 2.0, mu: 0.0, sigma: 0.4 },
    CalibrationSeed { a: 1.5, b: 1.0, mu: -0.5, sigma: 1.0 },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuoteFit {
    pub strike: f64,
    pub maturity: f64,
    pub is_call: bool,
    pub model_price: f64,
    pub market_price: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    /// Base horizon is one year; price at maturity T with `with_maturity`.
    pub params: MixtureParams,
    pub arpe: f64,
    /// ARPE at each seed, in seed order.
    pub seed_arpe: Vec<f64>,
    pub evaluations: usize,
    pub per_quote: Vec<QuoteFit>,
}

fn mixture_from(c: f64, x: &[f64]) -> Result<MixtureParams> {
    let base = AtsParams::unit(x[0].exp(), x[1].exp(), c)?;
    MixtureParams::new(0.0, x[2], x[3].exp(), base)
}

fn model_prices(mp: &MixtureParams, mkt: &MarketContext, quotes: &[OptionQuote]) -> Result<Vec<f64>> {
    quotes.par_iter().map(|q| price_european(mp, mkt, q)).collect()
}

/// Average relative pricing error (1/N) Σ |model − market| / market.
pub fn arpe(mp: &MixtureParams, mkt: &MarketContext, quotes: &[OptionQuote]) -> Result<f64> {
    let prices = model_prices(mp, mkt, quotes)?;
    Ok(prices.iter().zip(quotes).map(|(m, q)| (m - q.market_price).abs() / q.market_price).sum::<f64>()
        / quotes.len() as f64)
}

/// Minimizes ARPE over (log a, log b, μ, log σ) by Nelder–Mead from each
/// seed; parameter sets where e^H is not integrable score +∞.
pub fn calibrate(
    quotes: &[OptionQuote],
    mkt: &MarketContext,
    c_fixed: f64,
    seeds: Option<&[CalibrationSeed]>,
) -> Result<Calibration> {
    if quotes.len() < 4 {
        return Err(Error::Domain(format!("need at least 4 quotes, got {}", quotes.len())));
    }
    if !(0.0..1.0).contains(&c_fixed) {
        return Err(Error::InvalidParameter { name: "c", value: c_fixed, reason: "must lie in [0, 1)" });
    }
    let seeds = seeds.unwrap_or(&DEFAULT_SEEDS);
    let objective =
        |x: &[f64]| mixture_from(c_fixed, x).and_then(|mp| arpe(&mp, mkt, quotes)).unwrap_or(f64::INFINITY);
    let cfg = NelderMeadConfig { max_evals: 3000, f_tol: 1e-14, x_tol: 1e-10, restarts: 3 };
    let runs: Vec<(Vec<f64>, f64, f64, usize)> = seeds
        .par_iter()
        .map(|s| {
            let x0 = [s.a.ln(), s.b.ln(), s.mu, s.sigma.ln()];
            let f0 = objective(&x0);
            let m = nelder_mead(objective, &x0, &[0.3, 0.3, 0.2, 0.2], &cfg);
            (m.x, m.f, f0, m.evals)
        })
        .collect();
    let evaluations = runs.iter().map(|r| r.3).sum();
    let seed_arpe = runs.iter().map(|r| r.2).collect();
    let best = runs
        .into_iter()
        .filter(|r| r.1.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Optimizer("no seed reached an integrable parameter set".into()))?;
    let params = mixture_from(c_fixed, &best.0)?;
    let prices = model_prices(&params, mkt, quotes)?;
    let per_quote = quotes
        .iter()
        .zip(&prices)
        .map(|(q, &m)| QuoteFit {
            strike: q.strike,
            maturity: q.maturity,
            is_call: q.is_call,
            model_price: m,
            market_price: q.market_price,
            rel_err: (m - q.market_price).abs() / q.market_price,
        })
        .collect();
    Ok(Calibration { params, arpe: best.1, seed_arpe, evaluations, per_quote })
}

/// Quotes priced by `truth`: out-of-the-money calls at or above the spot and
/// puts below, for every maturity (days) and moneyness K/S₀.
pub fn synthetic_quotes(
    truth: &MixtureParams,
    mkt: &MarketContext,
    maturity_days: &[f64],
    moneyness: &[f64],
) -> Result<Vec<OptionQuote>> {
    let mut quotes = Vec::new();
    for &days in maturity_days {
        for &m in moneyness {
            let q = OptionQuote::new(mkt.spot * m, days / 365.0, 1.0, m >= 1.0)?;
            let price = price_european(truth, mkt, &q)?;
            quotes.push(OptionQuote::new(q.strike, q.maturity, price, q.is_call)?);
        }
    }
    Ok(quotes)
}

/// Price path S₀e^{H} of a log-price path H.
pub fn price_path(spot: f64, h: &[f64]) -> Vec<f64> {
    h.iter().map(|x| spot * x.exp()).collect()
}

/// Discounted Monte Carlo call price e^{−rT} E(S_T − K)⁺ and its standard
/// error, with Λ_T drawn by the midpoint terminal sampler on `n_steps`.
pub fn monte_carlo_call(
    mp: &MixtureParams,
    mkt: &MarketContext,
    strike: f64,
    maturity: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let (m, log_mgf, _) = threshold(mp, mkt, strike, maturity)?;
    let clock = average_terminal_samples(&m.base, n_steps, n_paths, seed)?;
    let h = mixture_terminal_from(&m, &clock, seed.wrapping_add(1));
    let fwd = mkt.spot * ((mkt.rate - mkt.dividend_yield) * maturity - log_mgf).exp();
    let disc = (-mkt.rate * maturity).exp();
    let pay: Vec<f64> = h.iter().map(|&z| disc * (fwd * z.exp() - strike).max(0.0)).collect();
    let n = pay.len() as f64;
    let mean = pay.iter().sum::<f64>() / n;
    let var = pay.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist;
    use crate::quad::integrate_semi_infinite_scaled;

    fn mixture(a: f64, b: f64, c: f64, t: f64, kappa: f64, mu: f64, sigma: f64) -> MixtureParams {
        MixtureParams::new(kappa, mu, sigma, AtsParams::new(a, b, c, t).unwrap()).unwrap()
    }

    fn table4() -> MixtureParams {
        mixture(1.46874, 0.682686, 0.5, 1.0, 0.0, -0.594359, 0.635236)
    }

    fn integrate_line<F: Fn(f64) -> f64 + Sync>(f: F, lo: f64, hi: f64) -> f64 {
        let cfg = QuadConfig { abs_tol: 1e-13, rel_tol: 1e-10, max_subdivisions: 400, ..QuadConfig::default() };
        integrate_finite(f, lo, hi, &cfg).unwrap().value
    }

    #[test]
    fn transform_basics() {
        let mp = mixture(1.2, 0.8, 0.3, 0.7, 0.1, -0.2, 0.4);
        assert!((laplace_mixture(&mp, Complex64::new(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-15);
        let base = AtsParams::new(1.2, 2.0, 0.3, 0.7).unwrap();
        let thin = MixtureParams::new(0.0, 1.0, 1e-6, base).unwrap();
        for u in [0.3, 1.5, -0.4] {
            let a = laplace_mixture(&thin, Complex64::new(u, 0.0)).unwrap().re;
            let b = crate::params::laplace_ats_real(&base, u).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
        let sym = MixtureParams::new(0.0, 0.0, 0.5, base).unwrap();
        for v in [0.1, 1.0, 7.0] {
            let p = characteristic_mixture(&sym, v).unwrap();
            let m = characteristic_mixture(&sym, -v).unwrap();
            assert!((p - m).norm() < 1e-14 && p.im.abs() < 1e-14);
        }
        assert!(log_laplace_mixture(&mp, Complex64::new(mp.strip().1 + 0.1, 0.0)).is_err());
        assert!(MixtureParams::new(0.0, 0.5, 1.0, AtsParams::unit(1.0, 0.5, 0.3).unwrap()).is_err());
        assert_eq!(table4().bg_index(), 1.0);
    }

    #[test]
    fn density_normalization_mean_and_transform() {
        for mp in [mixture(1.5, 1.0, 0.3, 1.0, 0.05, -0.4, 0.5), table4(), mixture(2.0, 1.0, 0.75, 0.5, 0.0, 0.2, 0.6)]
        {
            let (mean, var) = mp.mean_and_variance();
            let sd = var.sqrt();
            let (lo, hi) = (mean - 40.0 * sd, mean + 40.0 * sd);
            let mass = integrate_line(|x| pdf_mixture(&mp, x).unwrap(), lo, hi);
            assert!((mass - 1.0).abs() < 1e-5, "mass {mass}");
            let m1 = integrate_line(|x| x * pdf_mixture(&mp, x).unwrap(), lo, hi);
            assert!((m1 - mean).abs() < 1e-5, "mean {m1} vs {mean}");
            for u in [0.5, -0.5] {
                let lt = integrate_line(|x| (-u * x).exp() * pdf_mixture(&mp, x).unwrap(), lo, hi);
                let exact = laplace_mixture(&mp, Complex64::new(u, 0.0)).unwrap().re;
                assert!((lt - exact).abs() < 1e-5, "u = {u}: {lt} vs {exact}");
            }
        }
    }

    #[test]
    fn density_matches_direct_mixture() {
        // ∫ N(x; κt + μw, σ²w) f_Λ(w) dw by quadrature over the ATS density.
        let mp = mixture(1.5, 1.0, 0.3, 1.0, 0.05, -0.4, 0.5);
        let s2 = mp.sigma * mp.sigma;
        let scale = stats(&mp.base).mean;
        for x in [-2.0, -0.7, -0.1, 0.3, 1.0] {
            let direct = integrate_semi_infinite_scaled(
                |w| {
                    if w <= 0.0 {
                        return 0.0;
                    }
                    let z = x - mp.kappa - mp.mu * w;
                    (-z * z / (2.0 * s2 * w)).exp() / (2.0 * PI * s2 * w).sqrt() * dist::pdf(&mp.base, w).unwrap()
                },
                0.0,
                scale,
                &QuadConfig { abs_tol: 1e-14, rel_tol: 1e-11, max_subdivisions: 400, ..QuadConfig::default() },
            )
            .unwrap()
            .value;
            let cut = pdf_mixture_by(&mp, x, MixtureRoute::Cut).unwrap();
            let fourier = pdf_mixture_by(&mp, x, MixtureRoute::Fourier).unwrap();
            assert!((cut - direct).abs() < 1e-6, "x = {x}: cut {cut} vs direct {direct}");
            assert!((fourier - direct).abs() < 1e-6, "x = {x}: fourier {fourier} vs direct {direct}");
        }
    }

    fn mkt() -> MarketContext {
        MarketContext::new(100.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn itm_routes_agree_and_integrate_density() {
        let mp = table4();
        let t = 47.0 / 365.0;
        let market = MarketContext::new(100.0, 0.03, 0.01).unwrap();
        for k in [70.0, 90.0, 100.0, 110.0, 140.0] {
            let f = itm_probabilities(&mp, &market, k, t).unwrap();
            let d = itm_probabilities_by_density(&mp, &market, k, t).unwrap();
            assert!((f.p_star - d.p_star).abs() < 1e-8, "K = {k}: {f:?} vs {d:?}");
            assert!((f.p_breve - d.p_breve).abs() < 1e-8, "K = {k}: {f:?} vs {d:?}");
            let (m, _, kstar) = threshold(&mp, &market, k, t).unwrap();
            let (mean, var) = m.mean_and_variance();
            let by_pdf = integrate_line(|z| pdf_mixture(&m, z).unwrap(), kstar, mean + 60.0 * var.sqrt());
            assert!((by_pdf - f.p_star).abs() < 1e-4, "K = {k}: {by_pdf} vs {}", f.p_star);
        }
    }

    #[test]
    fn itm_limits_and_monotonicity() {
        let mp = table4();
        let t = 166.0 / 365.0;
        let lo = itm_probabilities(&mp, &mkt(), 1e-6, t).unwrap();
        assert!(lo.p_star > 1.0 - 1e-6 && lo.p_breve > 1.0 - 1e-6);
        let hi = itm_probabilities(&mp, &mkt(), 1e6, t).unwrap();
        assert!(hi.p_star < 1e-6 && hi.p_breve < 1e-6);
        let mut prev = (1.0, 1.0);
        for k in [50.0, 80.0, 95.0, 100.0, 105.0, 130.0, 200.0] {
            let p = itm_probabilities(&mp, &mkt(), k, t).unwrap();
            assert!(p.p_star <= prev.0 && p.p_breve <= prev.1);
            assert!(p.p_breve >= p.p_star);
            prev = (p.p_star, p.p_breve);
        }
    }

    #[test]
    fn parity_bounds_and_monotonicity() {
        let mp = table4();
        let market = MarketContext::new(100.0, 0.02, 0.0).unwrap();
        for &t in &[19.0 / 365.0, 0.5, 1.0] {
            let mut prev: Option<PricePair> = None;
            for k in [60.0, 85.0, 100.0, 115.0, 150.0] {
                let p = price_pair(&mp, &market, k, t).unwrap();
                let resid = p.call - p.put - 100.0 + k * (-0.02 * t).exp();
                assert!(resid.abs() < 1e-12, "parity residual {resid}");
                assert!(p.call > 0.0 && p.put > 0.0 && !p.floored);
                if let Some(q) = prev {
                    assert!(p.call < q.call && p.put > q.put);
                }
                prev = Some(p);
            }
        }
        for k in [80.0, 100.0, 120.0] {
            let prices: Vec<f64> = [0.1, 0.3, 0.6, 1.0].iter().map(|&t| price_pair(&mp, &market, k, t).unwrap().call).collect();
            assert!(prices.windows(2).all(|w| w[1] > w[0]));
        }
        let deep = price_pair(&mp, &market, 1.0, 0.5).unwrap();
        assert!((deep.call - (100.0 - (-0.01f64).exp())).abs() < 1e-3 * 100.0);
    }

    #[test]
    fn call_matches_monte_carlo() {
        let mp = table4();
        let t = 47.0 / 365.0;
        for k in [85.0, 100.0, 120.0] {
            let (mc, se) = monte_carlo_call(&mp, &mkt(), k, t, 100_000, 64, 11).unwrap();
            let model = price_pair(&mp, &mkt(), k, t).unwrap().call;
            assert!((model - mc).abs() < 3.0 * se, "K = {k}: model {model} mc {mc} se {se}");
        }
    }

    #[test]
    fn prices_invariant_under_clock_scaling() {
        // ρΛ is ATS(aρ^c, b/ρ; c), so μ → μ/ρ, σ → σ/√ρ leaves H unchanged when κ = 0.
        let mp = table4();
        let rho: f64 = 0.37;
        let base = AtsParams::unit(mp.base.a * rho.powf(mp.base.c), mp.base.b / rho, mp.base.c).unwrap();
        let scaled = MixtureParams::new(0.0, mp.mu / rho, mp.sigma / rho.sqrt(), base).unwrap();
        for (k, t) in [(90.0, 0.1), (100.0, 0.5), (125.0, 1.0)] {
            let a = price_pair(&mp, &mkt(), k, t).unwrap().call;
            let b = price_pair(&scaled, &mkt(), k, t).unwrap().call;
            assert!((a - b).abs() < 1e-10, "K = {k}: {a} vs {b}");
        }
    }

    #[test]
    fn quotes_parse() {
        let text = "strike,maturity_days,price,type\n9000, 19, 512.5, C\n8000,47,120.0,P\n";
        let q = read_quotes(text.as_bytes()).unwrap();
        assert_eq!(q.len(), 2);
        assert!(q[0].is_call && !q[1].is_call);
        assert!((q[1].maturity - 47.0 / 365.0).abs() < 1e-15);
        let bad = "strike,maturity_days,price,type\n9000,19,5,X\n";
        assert!(matches!(read_quotes(bad.as_bytes()), Err(Error::Input { line: 2, .. })));
    }

    #[test]
    fn calibration_round_trip() {
        let truth = table4();
        let market = MarketContext::new(9232.98, 0.0, 0.0).unwrap();
        let quotes = synthetic_quotes(&truth, &market, &[19.0, 47.0, 166.0, 257.0], &[0.8, 0.9, 0.95, 1.0, 1.05, 1.1, 1.2, 1.35]).unwrap();
        let fit = calibrate(&quotes, &market, 0.5, None).unwrap();
        assert!(fit.arpe < 1e-4, "arpe {}", fit.arpe);
        assert!(fit.seed_arpe.iter().all(|&s| fit.arpe <= s));
        let bumped: Vec<OptionQuote> =
            quotes.iter().map(|q| OptionQuote { market_price: q.market_price * 1.01, ..*q }).collect();
        let e = arpe(&fit.params, &market, &bumped).unwrap();
        assert!(e.is_finite() && (e - 0.01).abs() < 0.0101);
    }
}
