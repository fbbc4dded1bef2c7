//! Parameter types, Laplace transforms and Lévy triplets of the tempered
//! stable subordinator X and of its running average.
//!
//! The running average X̃_t = t⁻¹∫₀ᵗ X_s ds has the law ATS(at, b; c), which
//! is also the law of an infinitely divisible subordinator Λ at time t. The
//! value c = 0 is admitted and denotes the gamma / average-gamma limit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::cumulant;
use crate::special::{cln1p, expm1_ratio, gamma, upper_gamma};

/// Below this multiple of b the ATS exponent is summed from its cumulant
/// series; ten terms leave a truncation error far under 1e-14.
const SERIES_RADIUS: f64 = 1e-4;
const SERIES_TERMS: usize = 10;

/// Distribution parameters (a, b, c) and horizon t. The law depends on a and
/// t only through the product a·t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct AtsParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub t: f64,
}

#[derive(Deserialize)]
struct RawParams {
    a: f64,
    b: f64,
    c: f64,
    #[serde(default = "unit_horizon")]
    t: f64,
}

fn unit_horizon() -> f64 {
    1.0
}

impl TryFrom<RawParams> for AtsParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        AtsParams::new(r.a, r.b, r.c, r.t)
    }
}

impl AtsParams {
    pub fn new(a: f64, b: f64, c: f64, t: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter { name: "a", value: a, reason: "must be positive and finite" });
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter { name: "b", value: b, reason: "must be positive and finite" });
        }
        if !((0.0..1.0).contains(&c)) {
            return Err(Error::InvalidParameter { name: "c", value: c, reason: "must lie in [0, 1)" });
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter { name: "t", value: t, reason: "must be non-negative and finite" });
        }
        Ok(Self { a, b, c, t })
    }

    /// Unit-horizon parameters.
    pub fn unit(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(a, b, c, 1.0)
    }

    /// Effective shape a·t.
    pub fn shape(&self) -> f64 {
        self.a * self.t
    }

    pub fn with_horizon(&self, t: f64) -> Result<Self> {
        Self::new(self.a, self.b, self.c, t)
    }

    pub fn with_a(&self, a: f64) -> Result<Self> {
        Self::new(a, self.b, self.c, self.t)
    }

    pub fn is_gamma_limit(&self) -> bool {
        self.c == 0.0
    }
}

/// Which of the two subordinators a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Process {
    /// The tempered stable subordinator X.
    Ts,
    /// The average-tempered stable subordinator Λ.
    Ats,
}

fn check_cut(b: f64, u: Complex64) -> Result<()> {
    if !(u.re.is_finite() && u.im.is_finite()) {
        return Err(Error::Domain(format!("non-finite transform argument {u}")));
    }
    if u.im == 0.0 && u.re <= -b {
        return Err(Error::BranchCut { re: u.re, im: u.im, b });
    }
    Ok(())
}

fn exp_checked(z: Complex64) -> Result<Complex64> {
    if z.re > 709.0 {
        return Err(Error::Overflow { log_value: z.re });
    }
    Ok(z.exp())
}

/// log E e^{−u X_t} = a t Γ(−c)((b+u)^c − b^c), principal branch.
pub fn laplace_exponent_ts(p: &AtsParams, u: Complex64) -> Result<Complex64> {
    check_cut(p.b, u)?;
    let l = cln1p(u / p.b);
    Ok(-p.shape() * gamma(1.0 - p.c) * p.b.powf(p.c) * expm1_ratio(p.c, l))
}

/// E e^{−u X_t}; at c = 0 this is (1 + u/b)^{−at}.
pub fn laplace_ts(p: &AtsParams, u: Complex64) -> Result<Complex64> {
    exp_checked(laplace_exponent_ts(p, u)?)
}

/// log E e^{−u X̃_t} = a t Γ(−c)((b+u)^{c+1} − b^c(b+(c+1)u)) / ((c+1)u).
///
/// Written as −a t Γ(1−c) b^c [(b+u)(e^{cL}−1)/c − u] / ((c+1)u) with
/// L = log(1+u/b), which is stable as c → 0 and reduces to the average-gamma
/// exponent a t − a t (1 + b/u) L there. Near u = 0 the cumulant series is
/// used instead.
pub fn laplace_exponent_ats(p: &AtsParams, u: Complex64) -> Result<Complex64> {
    check_cut(p.b, u)?;
    if u.norm() < SERIES_RADIUS * p.b {
        Ok(ats_exponent_series(p, u))
    } else {
        Ok(ats_exponent_direct(p, u))
    }
}

fn ats_exponent_series(p: &AtsParams, u: Complex64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut pow = Complex64::new(1.0, 0.0);
    let mut fact = 1.0;
    for n in 1..=SERIES_TERMS {
        pow *= -u;
        fact *= n as f64;
        sum += pow * (cumulant(p, n) / fact);
    }
    sum
}

fn ats_exponent_direct(p: &AtsParams, u: Complex64) -> Complex64 {
    let c = p.c;
    let l = cln1p(u / p.b);
    let bracket = (u + p.b) * expm1_ratio(c, l) - u;
    -p.shape() * gamma(1.0 - c) * p.b.powf(c) * bracket / ((c + 1.0) * u)
}

/// E e^{−u X̃_t}, the ATS Laplace transform.
pub fn laplace_ats(p: &AtsParams, u: Complex64) -> Result<Complex64> {
    exp_checked(laplace_exponent_ats(p, u)?)
}

/// Real-argument convenience wrapper for `laplace_ats`.
pub fn laplace_ats_real(p: &AtsParams, u: f64) -> Result<f64> {
    Ok(laplace_ats(p, Complex64::new(u, 0.0))?.re)
}

/// Lévy density of one of the two subordinators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevyDensity {
    /// a e^{−bx} x^{−c−1}
    Ts { a: f64, b: f64, c: f64 },
    /// (a/(c+1))(e^{−bx} x^{−c−1} − b^{c+1} Γ(−c, bx))
    Ats { a: f64, b: f64, c: f64 },
}

impl LevyDensity {
    pub fn eval(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        match *self {
            LevyDensity::Ts { a, b, c } => a * (-b * x).exp() * x.powf(-c - 1.0),
            LevyDensity::Ats { a, b, c } => {
                a / (c + 1.0) * ((-b * x).exp() * x.powf(-c - 1.0) - b.powf(c + 1.0) * upper_gamma(-c, b * x))
            }
        }
    }
}

/// Lévy triplet (drift, Brownian coefficient, Lévy density) relative to the
/// truncation function x·1{x<1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyTriplet {
    pub drift: f64,
    pub brownian: f64,
    pub density: LevyDensity,
}

impl LevyTriplet {
    pub fn levy_density(&self, x: f64) -> f64 {
        self.density.eval(x)
    }
}

/// Triplet of X: drift a b^{c−1}(Γ(1−c) − Γ(1−c, b)).
pub fn levy_triplet_ts(p: &AtsParams) -> LevyTriplet {
    let (a, b, c) = (p.a, p.b, p.c);
    LevyTriplet {
        drift: a * b.powf(c - 1.0) * (gamma(1.0 - c) - upper_gamma(1.0 - c, b)),
        brownian: 0.0,
        density: LevyDensity::Ts { a, b, c },
    }
}

/// Triplet of Λ. The drift equals ∫₀¹ x ℓ̃(x) dx, so Λ is a driftless pure
/// jump subordinator once the compensator is undone.
pub fn levy_triplet_ats(p: &AtsParams) -> LevyTriplet {
    let (a, b, c) = (p.a, p.b, p.c);
    let inner = upper_gamma(2.0 - c, b) - 2.0 * upper_gamma(1.0 - c, b) - b * b * upper_gamma(-c, b);
    LevyTriplet {
        drift: a / (2.0 * b.powf(1.0 - c)) * (gamma(1.0 - c) + inner / (c + 1.0)),
        brownian: 0.0,
        density: LevyDensity::Ats { a, b, c },
    }
}

/// Q̃(x) = (e^{−bx} − (bx)^{c+1} Γ(−c, bx))/(c+1), so that ℓ̃(x) = Q̃(x)·a/x^{c+1}.
pub fn tempering_function(p: &AtsParams, x: f64) -> f64 {
    let (b, c) = (p.b, p.c);
    let z = b * x;
    ((-z).exp() - z.powf(c + 1.0) * upper_gamma(-c, z)) / (c + 1.0)
}

/// Blumenthal–Getoor index; both subordinators share the stability index c.
pub fn bg_index(_process: Process, p: &AtsParams) -> f64 {
    p.c
}
