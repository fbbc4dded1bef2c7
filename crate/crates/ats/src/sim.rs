//! Path simulation: Euler scheme for X and its running average, compound
//! Poisson approximation (CPA) of the subordinator Λ, and the Gaussian
//! mixture H built on a Λ path.
//!
//! Every path draws from its own ChaCha8 stream derived from a user seed and
//! the path index, so batches run in parallel and a fixed seed reproduces
//! paths bit for bit regardless of thread count.
//!
//! Tempered stable increments TS(a·dt, b; c):
//! * c = 0: gamma with shape a·dt and rate b;
//! * c = 1/2: inverse Gaussian with mean a·dt·√(π/b) and shape 2π a² dt²;
//! * otherwise: a one-sided c-stable draw (Kanter's representation) with
//!   Laplace transform exp(−a·dt·Γ(1−c)/c · u^c), kept with probability
//!   e^{−bY}. The acceptance rate is exp(−a·dt·Γ(1−c) b^c / c), so large
//!   steps are split into pieces with acceptance at least e^{−1/2}.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{levy_triplet_ats, AtsParams};
use crate::pricing::MixtureParams;
use crate::quad::{integrate_finite, QuadConfig};
use crate::special::gamma;

const MAX_REJECTIONS: usize = 1_000_000;
const MAX_PIECES: usize = 1_000_000;

/// Uniform time grid 0 = t₀ < … < t_M = horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathGrid {
    pub n_steps: usize,
    pub horizon: f64,
    pub times: Vec<f64>,
}

impl PathGrid {
    pub fn new(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Domain("a path grid needs at least one step".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter { name: "horizon", value: horizon, reason: "must be positive" });
        }
        let times = (0..=n_steps).map(|i| horizon * i as f64 / n_steps as f64).collect();
        Ok(Self { n_steps, horizon, times })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub grid: Arc<PathGrid>,
    pub values: Vec<f64>,
}

impl SamplePath {
    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Writes paths as CSV rows `path,time,value`.
pub fn write_paths_csv<W: Write>(out: W, paths: &[SamplePath]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Domain(format!("csv output: {e}"));
    w.write_record(["path", "time", "value"]).map_err(io)?;
    for (k, p) in paths.iter().enumerate() {
        for (t, v) in p.grid.times.iter().zip(&p.values) {
            w.write_record([k.to_string(), t.to_string(), v.to_string()]).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Domain(format!("csv output: {e}")))
}

/// Cross-sectional mean of a set of paths at one grid time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathMoment {
    pub time: f64,
    pub mean: f64,
    /// Standard error of `mean`.
    pub se: f64,
}

/// Sample mean and its standard error at every grid time. Paths must share
/// one grid.
pub fn path_summary(paths: &[SamplePath]) -> Vec<PathMoment> {
    let Some(first) = paths.first() else { return Vec::new() };
    let n = paths.len() as f64;
    first
        .grid
        .times
        .iter()
        .enumerate()
        .map(|(i, &time)| {
            let mean = paths.iter().map(|p| p.values[i]).sum::<f64>() / n;
            let var = if n > 1.0 { paths.iter().map(|p| (p.values[i] - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            PathMoment { time, mean, se: (var / n).sqrt() }
        })
        .collect()
}

/// The random stream for path `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy)]
enum Method {
    Gamma(Gamma<f64>),
    InverseGaussian { mean: f64, shape: f64 },
    StableRejection { scale: f64, pieces: usize },
}

/// Sampler of TS(a·dt, b; c) increments for a fixed step.
#[derive(Debug, Clone, Copy)]
pub struct TsSampler {
    b: f64,
    c: f64,
    method: Method,
}

impl TsSampler {
    pub fn new(p: &AtsParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", value: dt, reason: "must be positive" });
        }
        let (b, c) = (p.b, p.c);
        let shape = p.a * dt;
        let method = if c == 0.0 {
            Method::Gamma(Gamma::new(shape, 1.0 / b).map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?)
        } else if c == 0.5 {
            Method::InverseGaussian { mean: shape * (PI / b).sqrt(), shape: 2.0 * PI * shape * shape }
        } else {
            let sigma = shape * gamma(1.0 - c) / c;
            let cost = sigma * b.powf(c);
            let pieces = (2.0 * cost).ceil().max(1.0);
            if pieces > MAX_PIECES as f64 {
                return Err(Error::Domain(format!("stable rejection would need {pieces} pieces per step")));
            }
            let pieces = pieces as usize;
            Method::StableRejection { scale: (sigma / pieces as f64).powf(1.0 / c), pieces }
        };
        Ok(Self { b, c, method })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self.method {
            Method::Gamma(g) => Ok(g.sample(rng)),
            Method::InverseGaussian { mean, shape } => Ok(inverse_gaussian(rng, mean, shape)),
            Method::StableRejection { scale, pieces } => {
                let mut total = 0.0;
                for _ in 0..pieces {
                    total += self.tempered_stable(rng, scale)?;
                }
                Ok(total)
            }
        }
    }

    fn tempered_stable<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Result<f64> {
        for _ in 0..MAX_REJECTIONS {
            let y = scale * positive_stable(rng, self.c);
            let u: f64 = rng.random();
            if u <= (-self.b * y).exp() {
                return Ok(y);
            }
        }
        Err(Error::Domain(format!("tempering rejection exceeded {MAX_REJECTIONS} attempts")))
    }
}

/// Kanter's representation of the positive stable law with E e^{−uS} = e^{−u^c}.
fn positive_stable<R: Rng + ?Sized>(rng: &mut R, c: f64) -> f64 {
    let u = PI * rng.random::<f64>();
    let e: f64 = Exp1.sample(rng);
    let log_a = (c / (1.0 - c)) * (c * u).sin().ln() + ((1.0 - c) * u).sin().ln() - (u.sin().ln()) / (1.0 - c);
    (((1.0 - c) / c) * (log_a - e.ln())).exp()
}

/// Michael–Schucany–Haas draw, with the smaller root written without
/// cancellation for shape ≪ mean.
fn inverse_gaussian<R: Rng + ?Sized>(rng: &mut R, mean: f64, shape: f64) -> f64 {
    let v: f64 = StandardNormal.sample(rng);
    let y = mean * v * v;
    let root = y + (y * y + 4.0 * shape * y).sqrt();
    let x = if root > 0.0 { mean * 4.0 * shape * y / (root * root) } else { mean };
    let x = if x > 0.0 { x } else { mean };
    let u: f64 = rng.random();
    if u * (mean + x) <= mean {
        x
    } else {
        mean * mean / x
    }
}

/// One TS(a·dt, b; c) draw.
pub fn sample_ts_increment<R: Rng + ?Sized>(p: &AtsParams, dt: f64, rng: &mut R) -> Result<f64> {
    TsSampler::new(p, dt)?.sample(rng)
}

/// Euler paths of X and of the running average X̃.
///
/// X̂ accumulates TS increments. X̂′ integrates X̂ with right-endpoint
/// rectangles, X̂′ᵢ₊₁ = X̂′ᵢ + X̂ᵢ₊₁·Δ, and X̃ᵢ = X̂′ᵢ/(iΔ) with X̃₀ = 0. Both
/// paths are nondecreasing and X̃ᵢ ≤ X̂ᵢ.
pub fn euler_paths(
    p: &AtsParams,
    grid: &PathGrid,
    n_paths: usize,
    seed: u64,
) -> Result<(Vec<SamplePath>, Vec<SamplePath>)> {
    let dt = grid.dt();
    let sampler = TsSampler::new(p, dt)?;
    let shared = Arc::new(grid.clone());
    let pairs: Result<Vec<(Vec<f64>, Vec<f64>)>> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let mut x = Vec::with_capacity(grid.n_steps + 1);
            let mut avg = Vec::with_capacity(grid.n_steps + 1);
            x.push(0.0);
            avg.push(0.0);
            let (mut level, mut integral) = (0.0, 0.0);
            for i in 1..=grid.n_steps {
                level += sampler.sample(&mut rng)?;
                integral += level * dt;
                x.push(level);
                avg.push(integral / (i as f64 * dt));
            }
            Ok((x, avg))
        })
        .collect();
    let (xs, avgs): (Vec<_>, Vec<_>) = pairs?.into_iter().unzip();
    let wrap = |v: Vec<Vec<f64>>| {
        v.into_iter().map(|values| SamplePath { grid: shared.clone(), values }).collect::<Vec<_>>()
    };
    Ok((wrap(xs), wrap(avgs)))
}

/// Draws of X̃_T from the midpoint-weighted sum Σ ξᵢ(1 − (i − ½)/M), which is
/// exact in mean and has O(M⁻²) error in the variance; cheaper than full
/// Euler paths when only the terminal value is needed.
pub fn average_terminal_samples(p: &AtsParams, n_steps: usize, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n_steps == 0 {
        return Err(Error::Domain("at least one step is required".into()));
    }
    let sampler = TsSampler::new(p, p.t / n_steps as f64)?;
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let mut total = 0.0;
            for i in 1..=n_steps {
                total += sampler.sample(&mut rng)? * (1.0 - (i as f64 - 0.5) / n_steps as f64);
            }
            Ok(total)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    Log,
}

/// Jump-size bins (x_j, x_{j+1}] over [x_min, x_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpaConfig {
    pub n_bins: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub spacing: Spacing,
}

impl Default for CpaConfig {
    fn default() -> Self {
        Self { n_bins: 100, x_min: 1e-10, x_max: 7.0, spacing: Spacing::Log }
    }
}

impl CpaConfig {
    pub fn new(n_bins: usize, x_min: f64, x_max: f64, spacing: Spacing) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::Domain("at least one bin is required".into()));
        }
        if !(x_min > 0.0 && x_min < x_max && x_max.is_finite()) {
            return Err(Error::Domain(format!("bin range ({x_min}, {x_max}] is invalid")));
        }
        Ok(Self { n_bins, x_min, x_max, spacing })
    }

    pub fn edges(&self) -> Vec<f64> {
        let n = self.n_bins as f64;
        (0..=self.n_bins)
            .map(|j| match self.spacing {
                Spacing::Uniform => self.x_min + (self.x_max - self.x_min) * j as f64 / n,
                Spacing::Log => self.x_min * (self.x_max / self.x_min).powf(j as f64 / n),
            })
            .collect()
    }
}

/// Per-bin intensities λⱼ = ∫ℓ̃, RMS jump sizes χⱼ and the drift α̃.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpaBins {
    pub edges: Vec<f64>,
    pub intensity: Vec<f64>,
    pub chi: Vec<f64>,
    pub drift: f64,
}

pub fn cpa_bins(p: &AtsParams, cfg: &CpaConfig) -> Result<CpaBins> {
    let triplet = levy_triplet_ats(p);
    let edges = cfg.edges();
    let qc = QuadConfig::relative(1e-10);
    let mut intensity = Vec::with_capacity(cfg.n_bins);
    let mut chi = Vec::with_capacity(cfg.n_bins);
    for (j, w) in edges.windows(2).enumerate() {
        // Integrate in s = log x, where the singular density is smooth.
        let (lo, hi) = (w[0].ln(), w[1].ln());
        let bin_err = |e: Error| Error::Domain(format!("bin {j} ({}, {}]: {e}", w[0], w[1]));
        let m0 = integrate_finite(|s| { let x = s.exp(); triplet.levy_density(x) * x }, lo, hi, &qc)
            .and_then(|r| r.require())
            .map_err(bin_err)?;
        let m2 = integrate_finite(|s| { let x = s.exp(); triplet.levy_density(x) * x * x * x }, lo, hi, &qc)
            .and_then(|r| r.require())
            .map_err(bin_err)?;
        if !(m0 > 0.0 && m0.is_finite()) {
            return Err(Error::Domain(format!("bin {j} has intensity {m0}")));
        }
        intensity.push(m0);
        chi.push((m2 / m0).sqrt());
    }
    Ok(CpaBins { edges, intensity, chi, drift: triplet.drift })
}

/// Samples Poisson(λ), returning 0 for λ = 0.
fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Ok(0.0);
    }
    Poisson::new(lambda).map(|d| d.sample(rng)).map_err(|e| Error::Domain(format!("poisson sampler: {e}")))
}

impl CpaBins {
    /// Increments of Λ̂ = α̃t + Σⱼ χⱼ(N̂⁽ʲ⁾ − λⱼ·1{χⱼ<1}·t) on `grid`. Bins
    /// with fewer than one expected jump per step place Poisson(λⱼT) jumps
    /// at uniform steps instead of drawing per step.
    fn increments<R: Rng + ?Sized>(&self, grid: &PathGrid, rng: &mut R) -> Result<Vec<f64>> {
        let m = grid.n_steps;
        let dt = grid.dt();
        let mut inc = vec![0.0; m];
        let mut drift = self.drift;
        for (&lam, &chi) in self.intensity.iter().zip(&self.chi) {
            if chi < 1.0 {
                drift -= chi * lam;
            }
            if lam * dt >= 1.0 {
                for v in inc.iter_mut() {
                    *v += chi * poisson(rng, lam * dt)?;
                }
            } else {
                let n = poisson(rng, lam * grid.horizon)? as usize;
                for _ in 0..n {
                    inc[rng.random_range(0..m)] += chi;
                }
            }
        }
        for v in inc.iter_mut() {
            *v += drift * dt;
        }
        Ok(inc)
    }

    /// Λ̂_T drawn directly from the per-bin Poisson counts.
    fn terminal<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<f64> {
        let mut total = self.drift * horizon;
        for (&lam, &chi) in self.intensity.iter().zip(&self.chi) {
            let n = poisson(rng, lam * horizon)?;
            total += chi * if chi < 1.0 { n - lam * horizon } else { n };
        }
        Ok(total)
    }
}

fn cumulative(inc: &[f64]) -> Vec<f64> {
    let mut values = Vec::with_capacity(inc.len() + 1);
    values.push(0.0);
    let mut level = 0.0;
    for d in inc {
        level += d;
        values.push(level);
    }
    values
}

/// CPA paths of Λ. The compensator of small-RMS bins can make a path dip
/// slightly between jumps, so monotonicity is only approximate.
pub fn cpa_lambda_paths(
    p: &AtsParams,
    grid: &PathGrid,
    cfg: &CpaConfig,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<SamplePath>> {
    let bins = cpa_bins(p, cfg)?;
    let shared = Arc::new(grid.clone());
    (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let inc = bins.increments(grid, &mut rng)?;
            Ok(SamplePath { grid: shared.clone(), values: cumulative(&inc) })
        })
        .collect()
}

/// Terminal CPA values Λ̂_T for T = p.t.
pub fn cpa_terminal_samples(p: &AtsParams, cfg: &CpaConfig, n: usize, seed: u64) -> Result<Vec<f64>> {
    let bins = cpa_bins(p, cfg)?;
    (0..n)
        .into_par_iter()
        .map(|k| bins.terminal(p.t, &mut stream_rng(seed, k as u64)))
        .collect()
}

/// Paths of Ĥ with increments κΔt + μΔΛ̂ + σ√|ΔΛ̂|·ς over CPA paths of Λ.
pub fn mixture_paths(
    mp: &MixtureParams,
    grid: &PathGrid,
    cfg: &CpaConfig,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<SamplePath>> {
    Ok(mixture_path_pairs(mp, grid, cfg, n_paths, seed)?.into_iter().map(|(_, h)| h).collect())
}

/// Pairs (Λ̂, Ĥ) driven by the same CPA jumps.
pub fn mixture_path_pairs(
    mp: &MixtureParams,
    grid: &PathGrid,
    cfg: &CpaConfig,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<(SamplePath, SamplePath)>> {
    let bins = cpa_bins(&mp.base, cfg)?;
    let shared = Arc::new(grid.clone());
    let dt = grid.dt();
    (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let inc = bins.increments(grid, &mut rng)?;
            let h: Vec<f64> = inc
                .iter()
                .map(|&d| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mp.kappa * dt + mp.mu * d + mp.sigma * d.abs().sqrt() * z
                })
                .collect();
            Ok((
                SamplePath { grid: shared.clone(), values: cumulative(&inc) },
                SamplePath { grid: shared.clone(), values: cumulative(&h) },
            ))
        })
        .collect()
}

/// Terminal draws of H_T = κT + μΛ + σ√Λ·Z given draws of Λ_T.
pub fn mixture_terminal_from(mp: &MixtureParams, clock: &[f64], seed: u64) -> Vec<f64> {
    let t = mp.base.t;
    clock
        .par_iter()
        .enumerate()
        .map(|(k, &l)| {
            let z: f64 = StandardNormal.sample(&mut stream_rng(seed ^ 0x9e37_79b9_7f4a_7c15, k as u64));
            mp.kappa * t + mp.mu * l + mp.sigma * l.abs().sqrt() * z
        })
        .collect()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous cdf.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
