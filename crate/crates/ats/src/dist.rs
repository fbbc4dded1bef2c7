//! Density, distribution function, tail estimates and mode of ATS(at, b; c).
//!
//! Two inversion routes are implemented.
//!
//! The cut route folds the Bromwich contour onto the branch cut (−∞, −b] and
//! substitutes u = −b/y, which turns the inverse Laplace transform into a
//! proper integral over y ∈ (0, 1):
//!
//! ```text
//! f(x)   = (b/π) ∫ e^{E(y) − bx/y} sin S(y) / y² dy
//! 1−F(x) = (1/π) ∫ e^{E(y) − bx/y} sin S(y) / y  dy
//! ```
//!
//! with ℓ = log(1/y − 1), A₁ = a t b^c Γ(1−c)/(c+1) and
//!
//! ```text
//! E(y) = A₁ [1 + (1−y)(1 − cos(πc) e^{cℓ})/c]
//! S(y) = A₁ (sin(πc)/c) (1−y) e^{cℓ}
//! ```
//!
//! At c = 0 this reads E = at(1 − (1−y)ℓ), S = π at (1−y).
//!
//! The cut integrand oscillates when S is large, and deep in the left tail
//! the result is many orders of magnitude below the integrand. There the
//! contour route takes over: a wedge contour u = σ₀ + r e^{±iθ} through the
//! real saddle point σ₀ of e^{ux} f̄(u), which carries no cancellation. The
//! cut route is tried first; its answer is kept when the quadrature
//! converged and ∫|g| / |∫g| stays below `CONDITION_LIMIT`.
//!
//! Tail constants were fixed against Talbot inversions of the transform:
//! the right tail is a t e^{K−bx}/(b x^{c+2}) with K = a t b^c Γ(1−c)/(c+1),
//! and the c = 1/2 left tail carries 4π a² t²/(9x) in its exponent.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::{right_tail_constant, stats};
use crate::params::{laplace_exponent_ats, AtsParams};
use crate::quad::{find_root, integrate_finite, integrate_semi_infinite_scaled, QuadConfig, QuadResult};
use crate::special::{cln1p, expm1_ratio_real, gamma, ln_gamma, one_minus_cos_pi_ratio, sin_pi_ratio, EULER_GAMMA};

/// Largest tolerated ∫|g| / |∫g| on the cut route.
const CONDITION_LIMIT: f64 = 1e4;
const REL_TOL: f64 = 1e-10;
const MAX_SUBDIVISIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    RightTail,
    LeftTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub value: f64,
    pub regime: Regime,
    /// True when only the leading asymptotic term is returned.
    pub leading_order_only: bool,
}

/// Inversion route, for callers that want one route explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Proper integral along the branch cut.
    Cut,
    /// Wedge contour through the saddle point.
    Contour,
}

fn cfg() -> QuadConfig {
    QuadConfig::relative(REL_TOL).with_max_subdivisions(MAX_SUBDIVISIONS)
}

fn check_x(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("argument x = {x} must be positive and finite")))
    }
}

/// A law given both by cut exponents (E, S) on y ∈ (0, 1) and by its log
/// Laplace transform off the cut.
trait Law {
    fn b(&self) -> f64;
    fn cut(&self, y: f64) -> (f64, f64);
    fn log_transform(&self, u: Complex64) -> Result<Complex64>;
    /// Mass seen by the pole of e^{ux}/u at the origin, f̄(0).
    fn mass(&self) -> f64;
    /// Exponent c of the growth |log f̄(u)| ~ |u|^c.
    fn index(&self) -> f64;
    /// True when E grows without bound as y ↘ 0.
    fn cut_grows(&self) -> bool {
        self.index() > 0.5
    }
}

struct Exact {
    p: AtsParams,
    a1: f64,
}

impl Exact {
    fn new(p: &AtsParams) -> Self {
        let a1 = p.shape() * p.b.powf(p.c) * gamma(1.0 - p.c) / (p.c + 1.0);
        Self { p: *p, a1 }
    }
}

impl Law for Exact {
    fn b(&self) -> f64 {
        self.p.b
    }

    fn cut(&self, y: f64) -> (f64, f64) {
        let c = self.p.c;
        let l = ((1.0 - y) / y).ln();
        let e = self.a1
            * ((1.0 - y) * (-(PI * c).cos() * expm1_ratio_real(c, l) + one_minus_cos_pi_ratio(c)) + 1.0);
        let s = self.a1 * sin_pi_ratio(c) * (1.0 - y) * (c * l).exp();
        (e, s)
    }

    fn log_transform(&self, u: Complex64) -> Result<Complex64> {
        laplace_exponent_ats(&self.p, u)
    }

    fn mass(&self) -> f64 {
        1.0
    }

    fn index(&self) -> f64 {
        self.p.c
    }
}

/// Cut exponents (E, S) at y for use by the mixture density.
pub(crate) fn cut_exponents(p: &AtsParams) -> impl Fn(f64) -> (f64, f64) {
    let law = Exact::new(p);
    move |y| law.cut(y)
}

/// Large-u approximation exp(−B − A(1+u/b)^c) of the transform that drives
/// the left tail, with A = a t b^c Γ(−c−1) and −B = (c+1)A.
struct LeftAsymptote {
    b: f64,
    c: f64,
    a: f64,
}

impl LeftAsymptote {
    fn new(p: &AtsParams) -> Self {
        let a = p.shape() * p.b.powf(p.c) * gamma(1.0 - p.c) / (p.c * (p.c + 1.0));
        Self { b: p.b, c: p.c, a }
    }
}

impl Law for LeftAsymptote {
    fn b(&self) -> f64 {
        self.b
    }

    fn cut(&self, y: f64) -> (f64, f64) {
        let w = ((1.0 - y) / y).powf(self.c);
        let e = (self.c + 1.0) * self.a - self.a * (PI * self.c).cos() * w;
        (e, self.a * (PI * self.c).sin() * w)
    }

    fn log_transform(&self, u: Complex64) -> Result<Complex64> {
        let z = (cln1p(u / self.b) * self.c).exp();
        Ok((self.c + 1.0) * self.a - self.a * z)
    }

    fn mass(&self) -> f64 {
        (self.c * self.a).exp()
    }

    fn index(&self) -> f64 {
        self.c
    }
}

// Cut route.

fn cut_integral<L: Law, W: Fn(f64) -> f64>(law: &L, x: f64, weight: W) -> Result<QuadResult> {
    let b = law.b();
    integrate_finite(
        |y| {
            let (e, s) = law.cut(y);
            let expo = e - b * x / y;
            if expo < -745.0 {
                return 0.0;
            }
            expo.exp() * s.sin() * weight(y)
        },
        0.0,
        1.0,
        &cfg(),
    )
}

fn accept(r: &QuadResult) -> bool {
    r.converged && r.value.is_finite() && r.condition() < CONDITION_LIMIT
}

/// Upper bound on the cut exponent; above ~700 the integrand overflows.
fn cut_peak<L: Law>(law: &L, x: f64) -> f64 {
    let b = law.b();
    (1..400)
        .map(|k| {
            let y = (-(k as f64) * 0.1).exp();
            let (e, _) = law.cut(y);
            e - b * x / y
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn cut_density<L: Law>(law: &L, x: f64) -> Result<QuadResult> {
    let b = law.b();
    let mut r = cut_integral(law, x, |y| 1.0 / (y * y))?;
    r.value *= b / PI;
    r.error_estimate *= b / PI;
    r.abs_value *= b / PI;
    Ok(r)
}

fn cut_derivative<L: Law>(law: &L, x: f64) -> Result<QuadResult> {
    let k = -law.b() * law.b() / PI;
    let mut r = cut_integral(law, x, |y| 1.0 / (y * y * y))?;
    r.value *= k;
    r.error_estimate *= k.abs();
    r.abs_value *= k.abs();
    Ok(r)
}

/// f̄(0) − F(x), which is the survival function for a proper law.
fn cut_survival<L: Law>(law: &L, x: f64) -> Result<QuadResult> {
    let mut r = cut_integral(law, x, |y| 1.0 / y)?;
    r.value /= PI;
    r.error_estimate /= PI;
    r.abs_value /= PI;
    Ok(r)
}

/// ∫₀^l s f(s) ds = (1/(πb)) ∫ e^E sin S (y − (bl+y)e^{−bl/y}) / y dy.
fn cut_partial_expectation<L: Law>(law: &L, l: f64) -> Result<QuadResult> {
    let b = law.b();
    let k = 1.0 / (PI * b);
    let mut r = integrate_finite(
        |y| {
            let (e, s) = law.cut(y);
            if e < -745.0 {
                return 0.0;
            }
            let q = b * l / y;
            // 1 − (1+q)e^{−q}, accurate for small q.
            let factor = if q < 1e-3 {
                q * q * (0.5 - q / 3.0 + q * q / 8.0)
            } else {
                -(-q).exp_m1() - q * (-q).exp()
            };
            e.exp() * s.sin() * factor
        },
        0.0,
        1.0,
        &cfg(),
    )?;
    r.value *= k;
    r.error_estimate *= k;
    r.abs_value *= k;
    Ok(r)
}

// Contour route.

#[derive(Debug, Clone, Copy)]
enum Kernel {
    Density,
    Derivative,
    Cdf,
    /// e^{ul}/u², the transform of ∫₀^l F.
    Integral2,
}

impl Kernel {
    fn eval(self, u: Complex64) -> Complex64 {
        match self {
            Kernel::Density => Complex64::new(1.0, 0.0),
            Kernel::Derivative => u,
            Kernel::Cdf => 1.0 / u,
            Kernel::Integral2 => 1.0 / (u * u),
        }
    }

    fn has_pole(self) -> bool {
        matches!(self, Kernel::Cdf | Kernel::Integral2)
    }
}

/// −(log f̄)′(σ) by complex step.
fn tilted_mean<L: Law>(law: &L, s: f64) -> Result<f64> {
    let h = 1e-20 * s.abs().max(1.0);
    Ok(-law.log_transform(Complex64::new(s, h))?.im / h)
}

struct Saddle {
    sigma: f64,
    scale: f64,
    at_branch_point: bool,
}

/// Real saddle point of e^{ux} f̄(u), solving −(log f̄)′(σ) = x on (−b, ∞).
fn saddle<L: Law>(law: &L, x: f64) -> Result<Saddle> {
    let b = law.b();
    let lo = -b * (1.0 - 1e-10);
    let g = |s: f64| tilted_mean(law, s).map(|m| m - x).unwrap_or(f64::NAN);
    if !(g(lo) > 0.0) {
        return Ok(Saddle { sigma: -b, scale: 1.0 / x, at_branch_point: true });
    }
    let mut hi = b.max(1.0);
    let mut n = 0;
    while g(hi) > 0.0 {
        hi *= 4.0;
        n += 1;
        if n > 400 {
            return Err(Error::Domain(format!("no saddle point found for x = {x}")));
        }
    }
    let sigma = find_root(g, lo, hi, 1e-14 * (hi + b))?;
    let h = 1e-4 * (sigma + b).min(sigma.abs().max(1.0));
    let var = (tilted_mean(law, sigma - h)? - tilted_mean(law, sigma + h)?) / (2.0 * h);
    let scale = if var > 0.0 && var.is_finite() { 1.0 / var.sqrt() } else { 1.0 / x };
    Ok(Saddle { sigma, scale, at_branch_point: false })
}

/// Bromwich integral of e^{ux} f̄(u) K(u) split into the wedge part and the
/// residue at the origin that the wedge passes when its vertex is negative.
fn contour<L: Law>(law: &L, x: f64, kernel: Kernel) -> Result<(QuadResult, f64)> {
    let sd = saddle(law, x)?;
    let mut sigma = sd.sigma;
    if kernel.has_pole() && sigma.abs() < sd.scale && !sd.at_branch_point {
        sigma = sd.scale.min(0.5 * law.b()).max(sigma.abs());
    }
    let c = law.index();
    let limit = if c > 0.0 { PI / (2.0 * c) } else { PI };
    let cap = if sd.at_branch_point { 0.75 * PI } else { 0.6 * PI };
    let theta = cap.min(0.5 * (0.5 * PI + limit));
    let dir = Complex64::from_polar(1.0, theta);
    let vertex = if sd.at_branch_point {
        Complex64::new(sigma, 1e-9 * law.b())
    } else {
        Complex64::new(sigma, 0.0)
    };
    let base = sigma * x + law.log_transform(vertex)?.re;
    let r = integrate_semi_infinite_scaled(
        |r| {
            let u = Complex64::new(sigma, 0.0) + dir * r;
            match law.log_transform(u) {
                Ok(lt) => {
                    let z = u * x + lt - base;
                    if z.re < -745.0 {
                        0.0
                    } else {
                        (z.exp() * kernel.eval(u) * dir).im
                    }
                }
                Err(_) => f64::NAN,
            }
        },
        0.0,
        sd.scale,
        &cfg(),
    )?;
    let k = base.exp() / PI;
    let wedge = QuadResult {
        value: r.value * k,
        error_estimate: r.error_estimate * k,
        abs_value: r.abs_value * k,
        ..r
    };
    let residue = if sigma < 0.0 {
        match kernel {
            Kernel::Cdf => law.mass(),
            Kernel::Integral2 => {
                let h = 1e-20;
                let d = law.log_transform(Complex64::new(0.0, h))?.im / h;
                law.mass() * (x + d)
            }
            _ => 0.0,
        }
    } else {
        0.0
    };
    Ok((wedge, residue))
}

/// Wedge value, accepted when its error is small against its own size.
fn settled(r: QuadResult, rel: f64) -> Result<f64> {
    if r.value.is_finite() && (r.converged || r.error_estimate <= rel * r.value.abs()) {
        Ok(r.value)
    } else {
        Err(Error::Quadrature { value: r.value, error: r.error_estimate })
    }
}

/// Wedge value whose accuracy is judged against ∫|g|, for integrals that
/// pass through zero such as f′ at the mode.
fn settled_abs(r: QuadResult) -> Result<f64> {
    if r.value.is_finite() && r.error_estimate <= 1e-9 * r.abs_value {
        Ok(r.value)
    } else {
        Err(Error::Quadrature { value: r.value, error: r.error_estimate })
    }
}

// Shared evaluation logic.

fn density_of<L: Law>(law: &L, x: f64, route: Option<Route>) -> Result<f64> {
    let value = match route {
        Some(Route::Cut) => {
            let r = cut_density(law, x)?;
            clamp_density(r.value, r.error_estimate, r.converged)?
        }
        Some(Route::Contour) => settled(contour(law, x, Kernel::Density)?.0, 1e-8)?,
        None => {
            let cut = if law.cut_grows() && cut_peak(law, x) > 600.0 {
                None
            } else {
                cut_density(law, x).ok().filter(|r| accept(r) && r.value > -10.0 * r.error_estimate)
            };
            match cut {
                Some(r) => r.value,
                None => settled(contour(law, x, Kernel::Density)?.0, 1e-8)?,
            }
        }
    };
    clamp_density(value, 1e-12 * value.abs(), true)
}

fn clamp_density(value: f64, error: f64, converged: bool) -> Result<f64> {
    if !converged {
        return Err(Error::Quadrature { value, error });
    }
    if value >= 0.0 {
        Ok(value)
    } else if -value < 10.0 * error {
        Ok(0.0)
    } else {
        Err(Error::Quadrature { value, error })
    }
}

fn clamp_probability(value: f64, error: f64, upper: f64) -> Result<f64> {
    let slack = 10.0 * error.max(1e-15 * upper);
    if value < 0.0 {
        if -value < slack {
            Ok(0.0)
        } else {
            Err(Error::Quadrature { value, error })
        }
    } else if value > upper {
        if value - upper < slack {
            Ok(upper)
        } else {
            Err(Error::Quadrature { value, error })
        }
    } else {
        Ok(value)
    }
}

/// (F(x), f̄(0) − F(x)) with each side computed without cancellation where possible.
fn distribution_of<L: Law>(law: &L, x: f64, route: Option<Route>) -> Result<(f64, f64)> {
    let mass = law.mass();
    let from_contour = |law: &L| -> Result<(f64, f64)> {
        let (r, residue) = contour(law, x, Kernel::Cdf)?;
        let wedge = settled(r, 1e-8)?;
        if residue != 0.0 {
            Ok((residue + wedge, -wedge))
        } else {
            Ok((wedge, mass - wedge))
        }
    };
    let (f, s) = match route {
        Some(Route::Cut) => {
            let r = cut_survival(law, x)?;
            let s = r.require()?;
            (mass - s, s)
        }
        Some(Route::Contour) => from_contour(law)?,
        None => match cut_survival(law, x) {
            Ok(r) if accept(&r) && r.value <= 0.5 * mass => (mass - r.value, r.value),
            _ => from_contour(law)?,
        },
    };
    let err = 1e-12 * mass;
    Ok((clamp_probability(f, err, mass)?, clamp_probability(s, err, mass)?))
}

// Public API.

/// Density of ATS(at, b; c) at x > 0.
pub fn pdf(p: &AtsParams, x: f64) -> Result<f64> {
    check_x(x)?;
    density_of(&Exact::new(p), x, None)
}

/// Density through a chosen route, without fallback.
pub fn pdf_by(p: &AtsParams, x: f64, route: Route) -> Result<f64> {
    check_x(x)?;
    density_of(&Exact::new(p), x, Some(route))
}

/// Distribution function F(x).
pub fn cdf(p: &AtsParams, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(distribution_of(&Exact::new(p), x, None)?.0)
}

/// Distribution function through a chosen route, without fallback.
pub fn cdf_by(p: &AtsParams, x: f64, route: Route) -> Result<f64> {
    check_x(x)?;
    Ok(distribution_of(&Exact::new(p), x, Some(route))?.0)
}

/// Survival function 1 − F(x), accurate in the right tail.
pub fn sf(p: &AtsParams, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(distribution_of(&Exact::new(p), x, None)?.1)
}

/// Derivative f′(x) of the density.
pub fn pdf_derivative(p: &AtsParams, x: f64) -> Result<f64> {
    check_x(x)?;
    let law = Exact::new(p);
    let cut_ok = !(law.cut_grows() && cut_peak(&law, x) > 600.0)
        && cut_density(&law, x).map(|r| accept(&r)).unwrap_or(false);
    if cut_ok {
        if let Ok(v) = cut_derivative(&law, x).and_then(settled_abs) {
            return Ok(v);
        }
    }
    settled_abs(contour(&law, x, Kernel::Derivative)?.0)
}

/// Partial expectation E[X̃; X̃ ≤ l] = ∫₀^l x f(x) dx.
pub fn partial_expectation(p: &AtsParams, l: f64) -> Result<f64> {
    check_x(l)?;
    let law = Exact::new(p);
    if !law.cut_grows() {
        if let Ok(r) = cut_partial_expectation(&law, l) {
            if accept(&r) {
                return Ok(r.value.max(0.0));
            }
        }
    }
    // l F(l) − ∫₀^l F.
    let (f, _) = distribution_of(&law, l, None)?;
    let (r, residue) = contour(&law, l, Kernel::Integral2)?;
    Ok((l * f - (settled(r, 1e-8)? + residue)).max(0.0))
}

/// Quantile by root finding on the distribution function.
pub fn quantile(p: &AtsParams, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level {q} must lie in (0, 1)")));
    }
    let s = stats(p);
    let mut lo = s.mean * 1e-3;
    let mut hi = s.mean + 10.0 * s.variance.sqrt();
    for _ in 0..60 {
        if cdf(p, lo)? < q {
            break;
        }
        lo *= 0.1;
    }
    for _ in 0..60 {
        if cdf(p, hi)? > q {
            break;
        }
        hi *= 2.0;
    }
    find_root(|x| cdf(p, x).map(|v| v - q).unwrap_or(f64::NAN), lo, hi, 1e-13 * hi)
}

/// Leading right-tail estimate a t e^{K−bx}/(b x^{c+2}), for x well beyond
/// mean + 5 stdev (x b ≫ 1).
pub fn pdf_right_tail(p: &AtsParams, x: f64) -> TailEstimate {
    let log = p.shape().ln() + right_tail_constant(p) - p.b * x - p.b.ln() - (p.c + 2.0) * x.ln();
    TailEstimate { value: log.exp(), regime: Regime::RightTail, leading_order_only: true }
}

/// Left-tail estimate for x b ≪ 1, sensible below about 0.05 · mean.
///
/// For c = 0 the closed forms hold: (eb)^{at} x^{at−1}/Γ(at) when at ≠ 1 and
/// eb(1 + bx(γ − 2 + log bx)) when at = 1; the first-order term was checked
/// against Talbot inversion, which puts its error at O(x² log x). For c = 1/2 the estimate is
/// (2at/(3x^{3/2})) exp(2at√(πb) − bx − 4πa²t²/(9x)). Other c invert the
/// large-u asymptote of the transform numerically.
pub fn pdf_left_tail(p: &AtsParams, x: f64) -> Result<TailEstimate> {
    check_x(x)?;
    let at = p.shape();
    let b = p.b;
    let (value, leading) = if p.c == 0.0 {
        if (at - 1.0).abs() < 1e-12 {
            let bx = b * x;
            (std::f64::consts::E * b * (1.0 + bx * (EULER_GAMMA - 2.0 + bx.ln())), false)
        } else {
            let log = at * (1.0 + b.ln()) + (at - 1.0) * x.ln() - ln_gamma(at);
            (log.exp(), true)
        }
    } else if p.c == 0.5 {
        let log = (2.0 * at / 3.0).ln() - 1.5 * x.ln() + 2.0 * at * (PI * b).sqrt()
            - b * x
            - 4.0 * PI * at * at / (9.0 * x);
        (log.exp(), true)
    } else {
        (density_of(&LeftAsymptote::new(p), x, None)?, true)
    };
    Ok(TailEstimate { value, regime: Regime::LeftTail, leading_order_only: leading })
}

/// Tail estimates of the distribution function: 1 − F for the right tail,
/// F for the left tail.
pub fn cdf_tails(p: &AtsParams, x: f64, regime: Regime) -> Result<TailEstimate> {
    check_x(x)?;
    match regime {
        Regime::RightTail => {
            let d = pdf_right_tail(p, x);
            Ok(TailEstimate { value: d.value / p.b, ..d })
        }
        Regime::LeftTail => {
            let at = p.shape();
            let b = p.b;
            let (value, leading) = if p.c == 0.0 {
                if (at - 1.0).abs() < 1e-12 {
                    let bx = b * x;
                    let v = std::f64::consts::E * bx * (1.0 + 0.5 * bx * (EULER_GAMMA - 2.5 + bx.ln()));
                    (v, false)
                } else {
                    let log = at * (1.0 + b.ln()) + at * x.ln() - ln_gamma(at + 1.0);
                    (log.exp(), true)
                }
            } else {
                (distribution_of(&LeftAsymptote::new(p), x, None)?.0, true)
            };
            Ok(TailEstimate { value, regime, leading_order_only: leading })
        }
    }
}

/// Mode: the unique zero of f′. Errors when f′ keeps one sign, as for the
/// average-gamma law with at ≤ 1 whose density peaks at the origin.
pub fn mode(p: &AtsParams) -> Result<f64> {
    let mean = stats(p).mean;
    let d = |x: f64| pdf_derivative(p, x).unwrap_or(f64::NAN);
    let mut lo = mean / 100.0;
    let hi = mean * 10.0;
    let mut tries = 0;
    while !(d(lo) > 0.0) {
        lo /= 100.0;
        tries += 1;
        if tries > 3 {
            return Err(Error::Domain(format!(
                "density derivative has no sign change; suggested bracket [{}, {}]",
                mean / 100.0,
                mean * 10.0
            )));
        }
    }
    if !(d(hi) < 0.0) {
        return Err(Error::NoSignChange { lo, hi });
    }
    find_root(d, lo, hi, 1e-12 * mean)
}

/// Closed-form tempered stable density of X_t for c = 0 (gamma) and
/// c = 1/2 (inverse Gaussian a t x^{−3/2} e^{−(√b x − √π a t)²/x}).
pub fn pdf_ts(p: &AtsParams, x: f64) -> Result<f64> {
    check_x(x)?;
    let at = p.shape();
    if p.c == 0.0 {
        Ok((at * p.b.ln() - ln_gamma(at) + (at - 1.0) * x.ln() - p.b * x).exp())
    } else if p.c == 0.5 {
        let z = p.b.sqrt() * x - PI.sqrt() * at;
        Ok(at * x.powf(-1.5) * (-z * z / x).exp())
    } else {
        Err(Error::Domain(format!("no closed-form tempered stable density for c = {}", p.c)))
    }
}

/// Maximum deviations of the weak-limit comparisons on a u-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitReport {
    /// max |log f̄| with a = 1e−8.
    pub vanishing_a: f64,
    /// max |log f̄ + a t Γ(−c−1) u^c| with b = 1e−8; absent at c = 0.
    pub stable: Option<f64>,
    /// max |f̄ − f̄_AG| with c = 1e−6 against the average-gamma transform.
    pub average_gamma: f64,
}

/// Compares the transform with its a ↘ 0, b ↘ 0 and c ↘ 0 limits.
pub fn limit_checks(p: &AtsParams) -> Result<LimitReport> {
    let grid: Vec<f64> = (0..50).map(|k| 0.1 + 4.9 * k as f64 / 49.0).collect();
    let small_a = AtsParams::new(1e-8, p.b, p.c, p.t)?;
    let mut vanishing_a: f64 = 0.0;
    for &u in &grid {
        vanishing_a = vanishing_a.max(laplace_exponent_ats(&small_a, Complex64::new(u, 0.0))?.norm());
    }
    let stable = if p.c > 0.0 {
        let small_b = AtsParams::new(p.a, 1e-8, p.c, p.t)?;
        let mut dev: f64 = 0.0;
        for &u in &grid {
            let lim = -p.shape() * gamma(-p.c - 1.0) * u.powf(p.c);
            dev = dev.max((laplace_exponent_ats(&small_b, Complex64::new(u, 0.0))?.re - lim).abs());
        }
        Some(dev)
    } else {
        None
    };
    let small_c = AtsParams::new(p.a, p.b, 1e-6, p.t)?;
    let mut average_gamma: f64 = 0.0;
    for &u in &grid {
        let at = p.shape();
        let ag = (at - at * (1.0 + p.b / u) * (u / p.b).ln_1p()).exp();
        let v = laplace_exponent_ats(&small_c, Complex64::new(u, 0.0))?.re.exp();
        average_gamma = average_gamma.max((v - ag).abs());
    }
    Ok(LimitReport { vanishing_a, stable, average_gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::moment;
    use crate::params::laplace_ats_real;
    use crate::quad::integrate_semi_infinite_scaled;

    fn p(a: f64, b: f64, c: f64) -> AtsParams {
        AtsParams::unit(a, b, c).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Talbot inversion of the transform in mpmath at 40 digits:
    // (a, b, c, x, pdf, cdf).
    const TALBOT: [(f64, f64, f64, f64, f64, f64); 15] = [
        (1.0, 1.0, 0.5, 0.3, 0.60543708188400466, 0.039953612820889774),
        (1.0, 1.0, 0.5, 1.0, 0.6074523097732891, 0.69589255639042792),
        (1.0, 1.0, 0.5, 3.0, 0.012751703731509523, 0.99230514423480932),
        (1.0, 1.0, 0.0, 0.3, 1.0365907231323622, 0.49306361579957698),
        (1.0, 1.0, 0.0, 1.0, 0.23746782766700422, 0.85972631212193507),
        (1.0, 1.0, 0.0, 3.0, 0.0094976320622550817, 0.99320371059799752),
        (2.0, 1.0, 0.25, 0.3, 0.34146954180778693, 0.031948895726156899),
        (2.0, 1.0, 0.25, 1.0, 0.62649831882341124, 0.47567009631887234),
        (2.0, 1.0, 0.25, 3.0, 0.048075855598401647, 0.96528644570574824),
        (0.5, 1.0, 0.75, 0.3, 6.5387340206981838e-5, 4.5160150077323722e-7),
        (0.5, 1.0, 0.75, 1.0, 0.84018091096217715, 0.71503109810461771),
        (0.5, 1.0, 0.75, 3.0, 0.0051108427505390394, 0.99726465016329253),
        (0.5, 1.0, 0.0, 0.3, 0.70377264698150462, 0.74825163832947862),
        (0.5, 1.0, 0.0, 1.0, 0.10116596670523257, 0.94706226805618473),
        (0.5, 1.0, 0.0, 3.0, 0.0030247549764271618, 0.99790531442617588),
    ];

    #[test]
    fn pdf_and_cdf_match_talbot_values() {
        for &(a, b, c, x, f, cf) in &TALBOT {
            let q = p(a, b, c);
            assert!(rel(pdf(&q, x).unwrap(), f) < 1e-8, "pdf {a} {b} {c} {x}");
            assert!(rel(cdf(&q, x).unwrap(), cf) < 1e-8, "cdf {a} {b} {c} {x}");
        }
    }

    #[test]
    fn routes_agree_where_both_are_well_conditioned() {
        for &(a, b, c, x, _, _) in &TALBOT {
            let q = p(a, b, c);
            let wedge = pdf_by(&q, x, Route::Contour).unwrap();
            // The cut route may legitimately fail deep in the left tail.
            let Ok(cut) = pdf_by(&q, x, Route::Cut) else {
                assert!(c > 0.5 && x < 0.5);
                continue;
            };
            if cut > 1e-3 {
                assert!(rel(cut, wedge) < 1e-8, "{a} {b} {c} {x}: {cut} vs {wedge}");
            }
            let fc = cdf_by(&q, x, Route::Contour).unwrap();
            if x >= 1.0 {
                assert!((cdf_by(&q, x, Route::Cut).unwrap() - fc).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gamma_limit_at_origin_is_e() {
        let v = pdf(&p(1.0, 1.0, 0.0), 1e-6).unwrap();
        assert!(rel(v, std::f64::consts::E) < 2e-3);
    }

    #[test]
    fn normalization_and_mean() {
        let q = p(1.0, 1.0, 0.5);
        let total = integrate_semi_infinite_scaled(|x| pdf(&q, x).unwrap(), 0.0, 1.0, &QuadConfig::default())
            .unwrap()
            .value;
        assert!((total - 1.0).abs() < 1e-6);
        let mean = integrate_semi_infinite_scaled(|x| x * pdf(&q, x).unwrap(), 0.0, 1.0, &QuadConfig::default())
            .unwrap()
            .value;
        assert!((mean - PI.sqrt() / 2.0).abs() < 1e-6);
    }

    #[test]
    fn moments_by_quadrature() {
        let q = p(2.0, 1.0, 0.25);
        for n in 1..=4 {
            let m = integrate_semi_infinite_scaled(
                |x| x.powi(n as i32) * pdf(&q, x).unwrap(),
                0.0,
                1.0,
                &QuadConfig::default(),
            )
            .unwrap()
            .value;
            assert!(rel(m, moment(&q, n)) < 1e-6, "n = {n}");
        }
    }

    #[test]
    fn laplace_consistency() {
        let q = p(0.5, 1.0, 0.75);
        for u in [0.5, 2.0] {
            let v = integrate_semi_infinite_scaled(
                |x| (-u * x).exp() * pdf(&q, x).unwrap(),
                0.0,
                1.0,
                &QuadConfig::default(),
            )
            .unwrap()
            .value;
            assert!((v - laplace_ats_real(&q, u).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn cdf_properties() {
        let q = p(1.0, 1.0, 0.5);
        let s = stats(&q);
        assert!(cdf(&q, s.mean + 40.0 * s.variance.sqrt()).unwrap() > 1.0 - 1e-6);
        let mut last = 0.0;
        for k in 1..=100 {
            let v = cdf(&q, 0.05 * k as f64).unwrap();
            assert!(v >= last);
            last = v;
        }
        let m = quantile(&q, 0.5).unwrap();
        assert!((cdf(&q, m).unwrap() - 0.5).abs() < 1e-8);
        // median of ATS(2, 1; 0) from mpmath
        assert!(rel(quantile(&p(2.0, 1.0, 0.0), 0.5).unwrap(), 0.78241049238351681) < 1e-9);
    }

    #[test]
    fn cdf_derivative_is_pdf() {
        let q = p(2.0, 1.0, 0.25);
        for k in 1..=20 {
            let x = 0.15 * k as f64;
            let h = 1e-4;
            let d = (cdf(&q, x + h).unwrap() - cdf(&q, x - h).unwrap()) / (2.0 * h);
            assert!((d - pdf(&q, x).unwrap()).abs() < 1e-5);
        }
    }

    #[test]
    fn right_tail_ratio_tends_to_one() {
        let q = p(1.0, 1.0, 0.5);
        // Talbot values at x = 20, 40, 60.
        let talbot = [4.3065915716506449e-12, 1.4774202143106858e-21, 1.0792542905599843e-30];
        let mut last = f64::INFINITY;
        for (x, t) in [20.0, 40.0, 60.0].into_iter().zip(talbot) {
            let v = pdf(&q, x).unwrap();
            assert!(rel(v, t) < 1e-7);
            let dev = (v / pdf_right_tail(&q, x).value - 1.0).abs();
            assert!(dev < last);
            last = dev;
            let sdev = (sf(&q, x).unwrap() / cdf_tails(&q, x, Regime::RightTail).unwrap().value - 1.0).abs();
            assert!(sdev < 0.25, "sf deviation {sdev} at {x}");
        }
        assert!(last < 0.06);
        let g = p(1.0, 1.0, 0.0);
        let est = pdf_right_tail(&g, 30.0).value;
        assert!(rel(est, (1.0f64 - 30.0).exp() / 900.0) < 1e-12);
    }

    #[test]
    fn left_tail_ratio_tends_to_one() {
        let q = p(1.0, 1.0, 0.5);
        // Talbot values at x = 0.05, 0.02, 0.01.
        let talbot = [1.3297111630770612e-9, 3.6868060631149408e-27, 5.1467970027626171e-57];
        let mut last = f64::INFINITY;
        for (x, t) in [0.05, 0.02, 0.01].into_iter().zip(talbot) {
            let v = pdf(&q, x).unwrap();
            assert!(rel(v, t) < 1e-7, "{x}: {v} vs {t}");
            let dev = (v / pdf_left_tail(&q, x).unwrap().value - 1.0).abs();
            assert!(dev < last);
            last = dev;
        }
        assert!(last < 0.025);
    }

    #[test]
    fn left_asymptote_inversion_matches_closed_form_at_half() {
        let law = LeftAsymptote::new(&p(1.0, 1.0, 0.5));
        for x in [0.02, 0.1, 0.5] {
            let closed = pdf_left_tail(&p(1.0, 1.0, 0.5), x).unwrap().value;
            let numeric = density_of(&law, x, None).unwrap();
            assert!(rel(numeric, closed) < 1e-8, "{x}");
        }
    }

    #[test]
    fn left_cdf_estimate() {
        let q = p(1.0, 1.0, 0.5);
        let x = 0.01 * stats(&q).mean;
        let est = cdf_tails(&q, x, Regime::LeftTail).unwrap().value;
        assert!(rel(est, cdf(&q, x).unwrap()) < 0.05);
        let q = p(1.0, 1.0, 0.3);
        let x = 0.01 * stats(&q).mean;
        let est = cdf_tails(&q, x, Regime::LeftTail).unwrap().value;
        assert!(rel(est, cdf(&q, x).unwrap()) < 0.1);
    }

    #[test]
    fn gamma_left_tail_closed_forms() {
        let half = p(0.5, 1.0, 0.0);
        let flat: Vec<f64> = [1e-4, 1e-5, 1e-6].iter().map(|&x| pdf(&half, x).unwrap() * x.sqrt()).collect();
        assert!(flat.iter().all(|v| rel(*v, flat[2]) < 0.05));
        let est = pdf_left_tail(&half, 1e-6).unwrap().value * 1e-3;
        assert!(rel(flat[2], est) < 1e-2);
        let one = p(1.0, 1.0, 0.0);
        let x = 1e-3;
        assert!(rel(pdf(&one, x).unwrap(), pdf_left_tail(&one, x).unwrap().value) < 1e-4);
    }

    #[test]
    fn mode_matches_reference_and_grid() {
        let q = p(1.0, 1.0, 0.5);
        let m = mode(&q).unwrap();
        // root of the Talbot-inverted derivative in mpmath
        assert!(rel(m, 0.52998767716430418) < 1e-8);
        let grid: Vec<f64> = (1..=400).map(|k| k as f64 * 0.005).collect();
        let best = grid.iter().copied().max_by(|&x, &y| pdf(&q, x).unwrap().total_cmp(&pdf(&q, y).unwrap())).unwrap();
        assert!((best - m).abs() <= 0.005);
        let mut changes = 0;
        let mut prev = pdf_derivative(&q, 1e-3).unwrap().signum();
        for k in 1..200 {
            let x = 1e-3 * (1e4f64).powf(k as f64 / 199.0);
            let s = pdf_derivative(&q, x).unwrap().signum();
            if s != prev {
                changes += 1;
            }
            prev = s;
        }
        assert_eq!(changes, 1);
        assert!(mode(&p(0.5, 1.0, 0.0)).is_err());
        let ag = p(6.0, 2.0, 0.0);
        let m = mode(&ag).unwrap();
        let best = (1..=2000)
            .map(|k| k as f64 * 0.001)
            .max_by(|&x, &y| pdf(&ag, x).unwrap().total_cmp(&pdf(&ag, y).unwrap()))
            .unwrap();
        assert!((best - m).abs() <= 0.001);
    }

    #[test]
    fn steeper_than_tempered_stable() {
        for c in [0.0, 0.5] {
            let q = p(2.0, 1.0, c);
            let grid: Vec<f64> = (1..=500).map(|k| k as f64 * 0.01).collect();
            let ats = grid.iter().map(|&x| pdf(&q, x).unwrap()).fold(0.0, f64::max);
            let ts = grid.iter().map(|&x| pdf_ts(&q, x).unwrap()).fold(0.0, f64::max);
            assert!(ats > ts);
        }
    }

    #[test]
    fn unimodal_on_grid() {
        for (a, b, c) in [(1.0, 1.0, 0.5), (2.0, 1.0, 0.25), (0.5, 1.0, 0.75), (3.0, 2.0, 0.0)] {
            let q = p(a, b, c);
            let top = stats(&q).mean + 8.0 * stats(&q).variance.sqrt();
            let vals: Vec<f64> = (1..=500).map(|k| pdf(&q, top * k as f64 / 500.0).unwrap()).collect();
            let peak = vals.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0;
            assert!(vals[..=peak].windows(2).all(|w| w[1] >= w[0] - 1e-12));
            assert!(vals[peak..].windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn partial_expectation_against_direct_quadrature() {
        for (a, b, c) in [(1.0, 1.0, 0.5), (0.5, 1.0, 0.75), (2.0, 1.0, 0.0)] {
            let q = p(a, b, c);
            for l in [0.2, 1.0, 2.5] {
                let direct = integrate_finite(|x| x * pdf(&q, x).unwrap(), 0.0, l, &QuadConfig::default()).unwrap().value;
                let v = partial_expectation(&q, l).unwrap();
                assert!((v - direct).abs() < 1e-8, "{a} {b} {c} {l}: {v} vs {direct}");
            }
        }
    }

    #[test]
    fn ts_closed_forms_integrate_to_one() {
        for c in [0.0, 0.5] {
            let q = p(1.3, 0.7, c);
            let v = integrate_semi_infinite_scaled(|x| pdf_ts(&q, x).unwrap(), 0.0, 1.0, &QuadConfig::default())
                .unwrap()
                .value;
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn weak_limits() {
        let r = limit_checks(&p(1.0, 1.0, 0.5)).unwrap();
        assert!(r.vanishing_a < 1e-6);
        assert!(r.stable.unwrap() < 1e-3);
        assert!(r.average_gamma < 1e-4);
        let small_b = AtsParams::unit(1.0, 1e-8, 0.5).unwrap();
        let v = laplace_exponent_ats(&small_b, Complex64::new(1.0, 0.0)).unwrap().re;
        assert!((v + 4.0 * PI.sqrt() / 3.0).abs() < 1e-3);
    }

    #[test]
    fn domain_errors() {
        let q = p(1.0, 1.0, 0.5);
        assert!(pdf(&q, 0.0).is_err());
        assert!(cdf(&q, -1.0).is_err());
        assert!(quantile(&q, 1.0).is_err());
    }
}
