//! Degradation modelling with the running average X̃: the condition of a
//! component is D_t = (l − X̃_t)⁺, it fails once D drops below an alert
//! level D̲, and by path monotonicity P{τ > T} = F_{X̃_T}(l − D̲).
//!
//! Inspection data X̃(t₁), …, X̃(t_M) are mapped back to the underlying
//! subordinator by X̌(t_m) = (t_m X̃(t_m) − t_{m−1} X̃(t_{m−1}))/(t_m − t_{m−1}),
//! the mean of X over the m-th interval. Differences ξ̌_m = X̌(t_m) − X̌(t_{m−1}),
//! m ≥ 2, are fitted as independent TS(aΔt_m, b; c) draws. Each ξ̌_m is in
//! fact ∫ w dX for a tent w over (t_{m−2}, t_m), whose exact law is
//! ATS(a(t_m − t_{m−2}), b; c); the TS likelihood is the working model.

use std::collections::HashMap;
use std::io::Read;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

use crate::dist;
use crate::error::{Error, Result};
use crate::moments::stats;
use crate::optim::{bfgs, BfgsConfig};
use crate::params::AtsParams;
use crate::quad::find_root;
use crate::sim::{stream_rng, TsSampler};
use crate::special::{digamma, gamma, ln_gamma};

/// Inspection record of one unit; `readings[m]` is X̃ at `times[m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationSeries {
    pub unit_id: String,
    pub times: Vec<f64>,
    pub readings: Vec<f64>,
    pub temperature_label: Option<String>,
}

impl DegradationSeries {
    pub fn new(unit_id: impl Into<String>, times: Vec<f64>, readings: Vec<f64>, temperature_label: Option<String>) -> Result<Self> {
        let unit_id = unit_id.into();
        if times.len() != readings.len() {
            return Err(Error::Domain(format!("unit {unit_id}: {} times but {} readings", times.len(), readings.len())));
        }
        if times.first() != Some(&0.0) || readings.first() != Some(&0.0) {
            return Err(Error::Domain(format!("unit {unit_id}: series must start with reading 0 at time 0")));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain(format!("unit {unit_id}: times must be finite and strictly increasing")));
        }
        if readings.iter().any(|r| !r.is_finite()) {
            return Err(Error::Domain(format!("unit {unit_id}: non-finite reading")));
        }
        Ok(Self { unit_id, times, readings, temperature_label })
    }
}

/// One inspection in the long CSV layout read by `read_series`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub unit_id: String,
    pub time: f64,
    pub reading: f64,
    #[serde(default)]
    pub temperature: Option<String>,
}

/// Flattens series into rows, origin included.
pub fn series_rows(data: &[DegradationSeries]) -> Vec<SeriesRow> {
    data.iter()
        .flat_map(|s| {
            s.times.iter().zip(&s.readings).map(move |(&time, &reading)| SeriesRow {
                unit_id: s.unit_id.clone(),
                time,
                reading,
                temperature: s.temperature_label.clone(),
            })
        })
        .collect()
}

/// Reads `unit_id,time,reading[,temperature]` rows. Units keep their order
/// of first appearance; an origin row (0, 0) is added when absent.
pub fn read_series<R: Read>(input: R) -> Result<Vec<DegradationSeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(input);
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, (Vec<(f64, f64)>, Option<String>)> = HashMap::new();
    for (i, row) in rdr.deserialize::<SeriesRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Input { line, message: e.to_string() })?;
        if !(row.time >= 0.0 && row.time.is_finite()) {
            return Err(Error::Input { line, message: format!("invalid time {}", row.time) });
        }
        if !row.reading.is_finite() {
            return Err(Error::Input { line, message: "missing or non-finite reading".into() });
        }
        let entry = rows.entry(row.unit_id.clone()).or_insert_with(|| {
            order.push(row.unit_id.clone());
            (Vec::new(), None)
        });
        entry.0.push((row.time, row.reading));
        if entry.1.is_none() {
            entry.1 = row.temperature.filter(|t| !t.is_empty());
        }
    }
    order
        .into_iter()
        .map(|id| {
            let (mut obs, label) = rows.remove(&id).unwrap_or_default();
            obs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if obs.first().map(|o| o.0) != Some(0.0) {
                obs.insert(0, (0.0, 0.0));
            }
            let (times, readings) = obs.into_iter().unzip();
            DegradationSeries::new(id, times, readings, label)
        })
        .collect()
}

/// Increments recovered from one series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformedSeries {
    /// X̌(t_m) for m = 1..M.
    pub levels: Vec<f64>,
    /// ξ̌_m for m = 2..M.
    pub increments: Vec<f64>,
    /// t_m − t_{m−1} for m = 2..M.
    pub dts: Vec<f64>,
    /// False when some ξ̌_m ≤ 0, which rules the unit out.
    pub usable: bool,
}

pub fn transform_series(s: &DegradationSeries) -> Result<TransformedSeries> {
    if s.times.len() < 3 {
        return Err(Error::Domain(format!("unit {}: need at least 3 observations", s.unit_id)));
    }
    let (t, r) = (&s.times, &s.readings);
    let levels: Vec<f64> = (1..t.len()).map(|m| (t[m] * r[m] - t[m - 1] * r[m - 1]) / (t[m] - t[m - 1])).collect();
    let increments: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
    let dts = (2..t.len()).map(|m| t[m] - t[m - 1]).collect();
    let usable = increments.iter().all(|&x| x > 0.0);
    Ok(TransformedSeries { levels, increments, dts, usable })
}

/// First differences of the readings with their time steps, m = 1..M.
pub fn raw_increments(s: &DegradationSeries) -> (Vec<f64>, Vec<f64>) {
    let inc = s.readings.windows(2).map(|w| w[1] - w[0]).collect();
    let dts = s.times.windows(2).map(|w| w[1] - w[0]).collect();
    (inc, dts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DegradationModel {
    /// Gamma process fitted to raw reading differences.
    Gamma,
    /// Running average of a gamma process.
    AvgGamma,
    /// Running average of an inverse Gaussian process.
    AvgIg,
}

impl DegradationModel {
    pub const ALL: [DegradationModel; 3] = [Self::Gamma, Self::AvgGamma, Self::AvgIg];

    pub fn family(self) -> f64 {
        match self {
            Self::Gamma | Self::AvgGamma => 0.0,
            Self::AvgIg => 0.5,
        }
    }

    pub fn is_average(self) -> bool {
        !matches!(self, Self::Gamma)
    }
}

impl std::str::FromStr for DegradationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gamma" => Ok(Self::Gamma),
            "ag" | "avg_gamma" => Ok(Self::AvgGamma),
            "aig" | "avg_ig" => Ok(Self::AvgIg),
            other => Err(Error::Domain(format!("unknown model {other:?}; expected gamma, ag or aig"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub model: DegradationModel,
    pub a_hat: f64,
    pub b_hat: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub usable: bool,
}

impl FitResult {
    fn unusable(model: DegradationModel) -> Self {
        Self { model, a_hat: f64::NAN, b_hat: f64::NAN, log_likelihood: f64::NAN, aic: f64::NAN, usable: false }
    }
}

/// −log-likelihood of TS(aΔt, b; c) increments and its gradient in
/// (log a, log b), for c ∈ {0, 1/2}.
fn negative_log_likelihood(theta: &[f64], xs: &[f64], dts: &[f64], c: f64) -> (f64, Vec<f64>) {
    let (a, b) = (theta[0].exp(), theta[1].exp());
    let (mut l, mut ga, mut gb) = (0.0, 0.0, 0.0);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    for (&x, &dt) in xs.iter().zip(dts) {
        let alpha = a * dt;
        if c == 0.0 {
            l += alpha * b.ln() - ln_gamma(alpha) + (alpha - 1.0) * x.ln() - b * x;
            ga += dt * (b.ln() - digamma(alpha) + x.ln());
            gb += alpha / b - x;
        } else {
            let z = b.sqrt() * x - sqrt_pi * alpha;
            l += alpha.ln() - 1.5 * x.ln() - z * z / x;
            ga += dt * (1.0 / alpha + 2.0 * sqrt_pi * z / x);
            gb += -z / b.sqrt();
        }
    }
    if !l.is_finite() {
        return (f64::INFINITY, vec![0.0, 0.0]);
    }
    (-l, vec![-a * ga, -b * gb])
}

/// Moment-matched starting point: with rate m and variance rate v per unit
/// time, (1 − c)/b = v/m and a = m b^{1−c}/Γ(1−c).
fn moment_start(xs: &[f64], dts: &[f64], c: f64) -> (f64, f64) {
    let total_t: f64 = dts.iter().sum();
    let m = xs.iter().sum::<f64>() / total_t;
    let v = xs.iter().zip(dts).map(|(x, dt)| (x - m * dt).powi(2)).sum::<f64>() / total_t;
    let b = if v > 0.0 { (1.0 - c) * m / v } else { 1.0 };
    let b = b.clamp(1e-6, 1e8);
    (m * b.powf(1.0 - c) / gamma(1.0 - c), b)
}

/// Maximum likelihood for (a, b) with c fixed by the model. The gamma and
/// average-gamma models share the gamma density; they differ in the data
/// passed in. Four BFGS starts in (log a, log b): the moment match and three
/// perturbations of it.
pub fn fit_mle(increments: &[f64], dts: &[f64], model: DegradationModel) -> Result<FitResult> {
    if increments.len() != dts.len() {
        return Err(Error::Domain("increments and time steps differ in length".into()));
    }
    if increments.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 increments for 2 parameters, got {}", increments.len())));
    }
    if let Some(x) = increments.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Domain(format!("increment {x} is not positive")));
    }
    if let Some(dt) = dts.iter().find(|&&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::Domain(format!("time step {dt} is not positive")));
    }
    let c = model.family();
    let (a0, b0) = moment_start(increments, dts, c);
    let starts = [(a0, b0), (a0 * 3.0, b0 * 3.0), (a0 / 3.0, b0 / 3.0), (a0 * 3.0, b0)];
    let cfg = BfgsConfig { grad_tol: 1e-10, max_iter: 1000 };
    let mut trace = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (a, b) in starts {
        let r = bfgs(|th| negative_log_likelihood(th, increments, dts, c), &[a.ln(), b.ln()], &cfg);
        trace.push(format!("start ({a:.4e}, {b:.4e}): -L = {:.6e}, |g| = {:.2e}", r.f, r.grad_norm));
        // Gradient tolerance relative to the likelihood scale.
        let ok = r.converged || r.grad_norm <= 1e-7 * r.f.abs().max(1.0);
        if ok && r.f.is_finite() && best.as_ref().is_none_or(|(f, _)| r.f < *f) {
            best = Some((r.f, r.x));
        }
    }
    let (f, x) = best.ok_or_else(|| Error::Optimizer(format!("no start converged: {}", trace.join("; "))))?;
    let log_likelihood = -f;
    Ok(FitResult { model, a_hat: x[0].exp(), b_hat: x[1].exp(), log_likelihood, aic: 4.0 - 2.0 * log_likelihood, usable: true })
}

/// Fits one unit: raw differences for the gamma model, transformed
/// increments for the average models. Unusable data, and data whose
/// likelihood only peaks at infinity (increments nearly proportional to Δt),
/// give a NA result.
pub fn fit_series(s: &DegradationSeries, model: DegradationModel) -> Result<FitResult> {
    let (inc, dts) = if model.is_average() {
        let tr = transform_series(s)?;
        if !tr.usable {
            return Ok(FitResult::unusable(model));
        }
        (tr.increments, tr.dts)
    } else {
        let (inc, dts) = raw_increments(s);
        if inc.iter().any(|&x| x <= 0.0) {
            return Ok(FitResult::unusable(model));
        }
        (inc, dts)
    };
    match fit_mle(&inc, &dts, model) {
        Err(Error::Optimizer(_)) => Ok(FitResult::unusable(model)),
        r => r,
    }
}

/// Initial condition l and alert level D̲ ∈ (0, l).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub initial_condition: f64,
    pub alert_level: f64,
}

impl BarrierSpec {
    pub fn new(initial_condition: f64, alert_level: f64) -> Result<Self> {
        if !(initial_condition > 0.0 && initial_condition.is_finite()) {
            return Err(Error::InvalidParameter { name: "initial_condition", value: initial_condition, reason: "must be positive" });
        }
        if !(alert_level > 0.0 && alert_level < initial_condition) {
            return Err(Error::InvalidParameter { name: "alert_level", value: alert_level, reason: "must lie in (0, l)" });
        }
        Ok(Self { initial_condition, alert_level })
    }

    /// Degradation l − D̲ that the component can absorb.
    pub fn headroom(&self) -> f64 {
        self.initial_condition - self.alert_level
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter { name: "T", value: t, reason: "must be positive" });
    }
    Ok(())
}

/// P{D_T > D̲} = F_{X̃_T}(l − D̲).
pub fn survival_probability(p: &AtsParams, barrier: &BarrierSpec, t: f64) -> Result<f64> {
    check_horizon(t)?;
    dist::cdf(&p.with_horizon(t)?, barrier.headroom())
}

/// E D_T = l F(l) − ∫₀^l x f(x) dx.
pub fn expected_condition(p: &AtsParams, barrier: &BarrierSpec, t: f64) -> Result<f64> {
    check_horizon(t)?;
    let q = p.with_horizon(t)?;
    let l = barrier.initial_condition;
    Ok((l * dist::cdf(&q, l)? - dist::partial_expectation(&q, l)?).max(0.0))
}

/// Horizon T with F_{X̃_T}(l − D̲) = 1/2. The bracket [T₀/50, 50T₀] comes
/// from the mean relation E X̃_T = a T Γ(1−c) / (2b^{1−c}) = l − D̲; it is
/// widened by another factor of 50 once if needed.
pub fn median_lifetime(p: &AtsParams, barrier: &BarrierSpec) -> Result<f64> {
    let h = barrier.headroom();
    let t0 = 2.0 * h * p.b.powf(1.0 - p.c) / (p.a * gamma(1.0 - p.c));
    let g = |t: f64| -> f64 {
        p.with_horizon(t).and_then(|q| dist::cdf(&q, h)).map(|f| f - 0.5).unwrap_or(f64::NAN)
    };
    let mut last = None;
    for widen in [50.0, 2500.0] {
        match find_root(g, t0 / widen, t0 * widen, 1e-13 * t0) {
            Ok(t) => return Ok(t),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or(Error::NoSignChange { lo: t0 / 2500.0, hi: t0 * 2500.0 }))
}

/// Survival at `t` after the last fit: the gamma model uses the gamma
/// process itself; the average models restart at t₁ with the first reading
/// already spent, T → T − t₁ and l − D̲ → l − D̲ − X̃(t₁).
pub fn model_survival(fit: &FitResult, s: &DegradationSeries, barrier: &BarrierSpec, t: f64) -> Result<f64> {
    check_horizon(t)?;
    if !fit.usable {
        return Err(Error::Domain(format!("unit {} has no usable fit", s.unit_id)));
    }
    let h = barrier.headroom();
    if !fit.model.is_average() {
        let g = GammaDist::new(fit.a_hat * t, fit.b_hat).map_err(|e| Error::Domain(e.to_string()))?;
        return Ok(g.cdf(h));
    }
    let (t1, x1) = (s.times[1], s.readings[1]);
    if t <= t1 {
        return Err(Error::Domain(format!("horizon {t} does not exceed the first inspection {t1}")));
    }
    if h <= x1 {
        return Ok(0.0);
    }
    let p = AtsParams::new(fit.a_hat, fit.b_hat, fit.model.family(), t - t1)?;
    dist::cdf(&p, h - x1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub unit_id: String,
    pub temperature: Option<String>,
    pub model: DegradationModel,
    pub a_hat: Option<f64>,
    pub b_hat: Option<f64>,
    pub aic: Option<f64>,
    pub survival: Option<f64>,
    pub usable: bool,
    /// Reason a row is NA, if any.
    pub note: Option<String>,
}

/// Fits every unit under every model and evaluates survival at `t`.
/// Failures are reported as NA rows instead of aborting the batch.
pub fn batch_report(data: &[DegradationSeries], models: &[DegradationModel], barrier: &BarrierSpec, t: f64) -> Vec<ReportRow> {
    data.par_iter()
        .flat_map_iter(|s| {
            models.iter().map(move |&model| {
                let na = |note: String| ReportRow {
                    unit_id: s.unit_id.clone(),
                    temperature: s.temperature_label.clone(),
                    model,
                    a_hat: None,
                    b_hat: None,
                    aic: None,
                    survival: None,
                    usable: false,
                    note: Some(note),
                };
                let fit = match fit_series(s, model) {
                    Ok(f) if f.usable => f,
                    Ok(_) => return na("non-positive increments".into()),
                    Err(e) => return na(e.to_string()),
                };
                let (survival, note) = match model_survival(&fit, s, barrier, t) {
                    Ok(v) => (Some(v), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                ReportRow {
                    unit_id: s.unit_id.clone(),
                    temperature: s.temperature_label.clone(),
                    model,
                    a_hat: Some(fit.a_hat),
                    b_hat: Some(fit.b_hat),
                    aic: Some(fit.aic),
                    survival,
                    usable: true,
                    note,
                }
            })
        })
        .collect()
}

/// Synthetic inspection record: X is built from TS increments on
/// `substeps` equal pieces of every inspection interval, and X̃(t_m) is the
/// exact time average of that step path.
pub fn simulate_series<R: Rng + ?Sized>(
    p: &AtsParams,
    unit_id: impl Into<String>,
    times: &[f64],
    substeps: usize,
    rng: &mut R,
) -> Result<DegradationSeries> {
    if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("inspection times must start at 0 and increase".into()));
    }
    let substeps = substeps.max(1);
    let mut readings = vec![0.0];
    let (mut x, mut area) = (0.0, 0.0);
    for w in times.windows(2) {
        let dt = (w[1] - w[0]) / substeps as f64;
        let sampler = TsSampler::new(p, dt)?;
        for _ in 0..substeps {
            x += sampler.sample(rng)?;
            area += x * dt;
        }
        readings.push(area / w[1]);
    }
    DegradationSeries::new(unit_id, times.to_vec(), readings, None)
}

/// Inspection times of the resistor study, in 10⁴ hours.
pub const RESISTOR_TIMES: [f64; 5] = [0.0, 0.0452, 0.103, 0.4341, 0.8084];

/// `n_units` synthetic series at `times`, unit k drawing from stream k.
pub fn simulate_dataset(p: &AtsParams, times: &[f64], n_units: usize, substeps: usize, seed: u64) -> Result<Vec<DegradationSeries>> {
    (0..n_units)
        .into_par_iter()
        .map(|k| simulate_series(p, format!("unit{}", k + 1), times, substeps, &mut stream_rng(seed, k as u64)))
        .collect()
}

/// Share of `reps` synthetic datasets (29 units at the resistor inspection
/// times, simulated from `p`) in which the average-gamma model has a lower
/// total AIC than the gamma model over units usable under both.
pub fn aic_win_rate(p: &AtsParams, reps: usize, seed: u64) -> Result<f64> {
    let mut wins = 0;
    for r in 0..reps {
        let data = simulate_dataset(p, &RESISTOR_TIMES, 29, 200, seed.wrapping_add(r as u64))?;
        let (mut ag, mut g) = (0.0, 0.0);
        for s in &data {
            let fa = fit_series(s, DegradationModel::AvgGamma)?;
            let fg = fit_series(s, DegradationModel::Gamma)?;
            if fa.usable && fg.usable {
                ag += fa.aic;
                g += fg.aic;
            }
        }
        if ag < g {
            wins += 1;
        }
    }
    Ok(wins as f64 / reps.max(1) as f64)
}

/// Mean of X̃_T, used by callers to scale barriers.
pub fn mean_level(p: &AtsParams, t: f64) -> Result<f64> {
    Ok(stats(&p.with_horizon(t)?).mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_finite, QuadConfig};
    use crate::sim::{average_terminal_samples, ks_distance};
    use rand_distr::{Distribution, Gamma};

    fn trigamma(x: f64) -> f64 {
        let h = 1e-5 * x;
        (digamma(x + h) - digamma(x - h)) / (2.0 * h)
    }

    #[test]
    fn transform_of_linear_path() {
        // X̃ = r t hides X = 2 r s, whose interval means are r (t_m + t_{m−1}).
        let r = 1.7;
        let times = RESISTOR_TIMES.to_vec();
        let s = DegradationSeries::new("u", times.clone(), times.iter().map(|t| r * t).collect(), None).unwrap();
        let tr = transform_series(&s).unwrap();
        assert!(tr.usable);
        for m in 1..times.len() {
            assert!((tr.levels[m - 1] - r * (times[m] + times[m - 1])).abs() < 1e-14);
        }
        for m in 2..times.len() {
            assert!((tr.increments[m - 2] - r * (times[m] - times[m - 2])).abs() < 1e-14);
        }
    }

    #[test]
    fn decreasing_reading_is_unusable() {
        let s = DegradationSeries::new("u", RESISTOR_TIMES.to_vec(), vec![0.0, 0.5, 0.9, 0.6, 1.2], None).unwrap();
        assert!(!transform_series(&s).unwrap().usable);
        assert!(!fit_series(&s, DegradationModel::AvgGamma).unwrap().usable);
        assert!(!fit_series(&s, DegradationModel::Gamma).unwrap().usable);
        let short = DegradationSeries::new("u", vec![0.0, 1.0], vec![0.0, 1.0], None).unwrap();
        assert!(transform_series(&short).is_err());
    }

    #[test]
    fn transformed_increments_follow_the_ats_law() {
        // ξ̌_m is a tent integral of dX over (t_{m−2}, t_m).
        let p = AtsParams::unit(5.0, 6.0, 0.0).unwrap();
        let data = simulate_dataset(&p, &RESISTOR_TIMES, 2000, 400, 3).unwrap();
        let t = RESISTOR_TIMES;
        for m in 2..t.len() {
            let xs: Vec<f64> = data.iter().map(|s| transform_series(s).unwrap().increments[m - 2]).collect();
            let law = p.with_horizon(t[m] - t[m - 2]).unwrap();
            let d = ks_distance(&xs, |x| dist::cdf(&law, x).unwrap());
            assert!(d < 0.04, "m = {m}: KS {d}");
        }
    }

    #[test]
    fn gamma_mle_recovers_parameters() {
        let (a, b, dt) = (5.0, 7.0, 1.0 / 200.0);
        let g = Gamma::new(a * dt, 1.0 / b).unwrap();
        let mut rng = stream_rng(17, 0);
        let xs: Vec<f64> = (0..200).map(|_| g.sample(&mut rng)).collect();
        let dts = vec![dt; 200];
        let fit = fit_mle(&xs, &dts, DegradationModel::Gamma).unwrap();
        // Fisher information of the gamma likelihood in (a, b).
        let n = 200.0;
        let (iaa, iab, ibb) = (n * dt * dt * trigamma(a * dt), -n * dt / b, n * a * dt / (b * b));
        let det = iaa * ibb - iab * iab;
        let (se_a, se_b) = ((ibb / det).sqrt(), (iaa / det).sqrt());
        assert!((fit.a_hat - a).abs() < 3.0 * se_a, "a {} se {se_a}", fit.a_hat);
        assert!((fit.b_hat - b).abs() < 3.0 * se_b, "b {} se {se_b}", fit.b_hat);
        assert!((fit.aic - (4.0 - 2.0 * fit.log_likelihood)).abs() == 0.0);
        assert!(fit_mle(&xs[..1], &dts[..1], DegradationModel::Gamma).is_err());
    }

    #[test]
    fn gamma_fit_scales_with_readings() {
        let p = AtsParams::unit(5.0, 6.0, 0.0).unwrap();
        let s = simulate_series(&p, "u", &RESISTOR_TIMES, 200, &mut stream_rng(5, 0)).unwrap();
        let rho = 2.5;
        let scaled = DegradationSeries { readings: s.readings.iter().map(|r| r * rho).collect(), ..s.clone() };
        for model in [DegradationModel::Gamma, DegradationModel::AvgGamma] {
            let f = fit_series(&s, model).unwrap();
            let g = fit_series(&scaled, model).unwrap();
            assert!((f.a_hat - g.a_hat).abs() < 1e-6 * f.a_hat, "{f:?} {g:?}");
            assert!((f.b_hat / rho - g.b_hat).abs() < 1e-6 * g.b_hat, "{f:?} {g:?}");
        }
    }

    #[test]
    fn ig_fit_converges_and_gradient_is_exact() {
        let p = AtsParams::unit(2.0, 3.0, 0.5).unwrap();
        let s = simulate_series(&p, "u", &[0.0, 0.1, 0.2, 0.35, 0.5, 0.7, 1.0], 200, &mut stream_rng(8, 0)).unwrap();
        let tr = transform_series(&s).unwrap();
        let fit = fit_mle(&tr.increments, &tr.dts, DegradationModel::AvgIg).unwrap();
        assert!(fit.log_likelihood.is_finite());
        let th = [0.3, -0.2];
        for c in [0.0, 0.5] {
            let (_, g) = negative_log_likelihood(&th, &tr.increments, &tr.dts, c);
            for k in 0..2 {
                let h = 1e-6;
                let mut up = th;
                let mut dn = th;
                up[k] += h;
                dn[k] -= h;
                let fd = (negative_log_likelihood(&up, &tr.increments, &tr.dts, c).0
                    - negative_log_likelihood(&dn, &tr.increments, &tr.dts, c).0)
                    / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-6 * g[k].abs().max(1.0));
            }
        }
        let mass = integrate_finite(|x| dist::pdf_ts(&p.with_horizon(0.3).unwrap(), x).unwrap(), 0.0, 60.0, &QuadConfig::default())
            .unwrap()
            .value;
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn survival_limits_and_monotonicity() {
        let p = AtsParams::unit(5.0, 6.0, 0.0).unwrap();
        assert!(survival_probability(&p, &BarrierSpec::new(1.0, 1.0 - 1e-9).unwrap(), 1.0).unwrap() < 1e-6);
        assert!(survival_probability(&p, &BarrierSpec::new(1e3, 1e-3).unwrap(), 1.0).unwrap() > 1.0 - 1e-12);
        let mut prev = 1.0;
        for t in [0.2, 0.5, 1.0, 2.0] {
            let s = survival_probability(&p, &BarrierSpec::new(1.0, 0.5).unwrap(), t).unwrap();
            assert!(s <= prev);
            prev = s;
        }
        let mut prev = 1.0;
        for d in [0.1, 0.3, 0.5, 0.7] {
            let s = survival_probability(&p, &BarrierSpec::new(1.0, d).unwrap(), 1.0).unwrap();
            assert!(s <= prev);
            prev = s;
        }
        assert!(BarrierSpec::new(1.0, 1.5).is_err() && BarrierSpec::new(1.0, 0.0).is_err());
    }

    #[test]
    fn survival_and_median_match_monte_carlo() {
        let p = AtsParams::unit(5.0, 6.0, 0.0).unwrap();
        let mean = mean_level(&p, 1.0).unwrap();
        let barrier = BarrierSpec::new(2.0, 2.0 - mean).unwrap();
        let s = survival_probability(&p, &barrier, 1.0).unwrap();
        assert!(s > 0.3 && s < 0.7);
        let n = 10_000;
        let draws = average_terminal_samples(&p, 2000, n, 21).unwrap();
        let frac = draws.iter().filter(|&&x| x <= barrier.headroom()).count() as f64 / n as f64;
        let se = (s * (1.0 - s) / n as f64).sqrt();
        assert!((frac - s).abs() < 2.0 * se, "analytic {s} mc {frac} se {se}");

        let tm = median_lifetime(&p, &barrier).unwrap();
        assert!((survival_probability(&p, &barrier, tm).unwrap() - 0.5).abs() < 1e-8);
        let at_median = average_terminal_samples(&p.with_horizon(tm).unwrap(), 2000, n, 22).unwrap();
        let frac = at_median.iter().filter(|&&x| x <= barrier.headroom()).count() as f64 / n as f64;
        assert!((frac - 0.5).abs() < 2.0 * 0.005, "fraction surviving at the median {frac}");

        let mut prev = 0.0;
        for h in [0.2, 0.4, 0.8] {
            let t = median_lifetime(&p, &BarrierSpec::new(1.0, 1.0 - h).unwrap()).unwrap();
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn expected_condition_forms() {
        for p in [AtsParams::new(2.0, 3.0, 0.0, 1.0).unwrap(), AtsParams::new(1.0, 1.0, 0.5, 1.5).unwrap()] {
            let st = stats(&p);
            let l = st.mean + 12.0 * st.variance.sqrt();
            let far = expected_condition(&p, &BarrierSpec::new(l, l / 2.0).unwrap(), p.t).unwrap();
            assert!((l - far - st.mean).abs() < 1e-4);
            let near = expected_condition(&p, &BarrierSpec::new(1e-6, 5e-7).unwrap(), p.t).unwrap();
            assert!(near < 1e-6);
            for l in [0.3 * st.mean, st.mean, 2.0 * st.mean] {
                let e = expected_condition(&p, &BarrierSpec::new(l, l / 2.0).unwrap(), p.t).unwrap();
                let direct = integrate_finite(|x| (l - x) * dist::pdf(&p, x).unwrap(), 0.0, l, &QuadConfig::relative(1e-11))
                    .unwrap()
                    .value;
                assert!((e - direct).abs() < 1e-6, "l = {l}: {e} vs {direct}");
            }
        }
    }

    #[test]
    fn csv_ingestion() {
        let text = "unit_id,time,reading,temperature\nr1,0.0452,0.3,83C\nr1,0,0,83C\nr1,0.103,0.5,83C\nr2,0.0452,0.2,\nr2,0.103,0.4,\n";
        let d = read_series(text.as_bytes()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].times, vec![0.0, 0.0452, 0.103]);
        assert_eq!(d[0].temperature_label.as_deref(), Some("83C"));
        assert_eq!(d[1].times[0], 0.0);
        let bad = "unit_id,time,reading\nr1,0.1,abc\n";
        assert!(matches!(read_series(bad.as_bytes()), Err(Error::Input { line: 2, .. })));
    }

    #[test]
    fn batch_report_marks_na_rows() {
        let p = AtsParams::unit(5.0, 6.0, 0.0).unwrap();
        let mut data = simulate_dataset(&p, &RESISTOR_TIMES, 29, 200, 77).unwrap();
        data[8].readings[3] = data[8].readings[2] * 0.5;
        let rows = batch_report(&data, &DegradationModel::ALL, &BarrierSpec::new(3.8, 1e-9).unwrap(), 1.0);
        assert_eq!(rows.len(), 29 * 3);
        for r in &rows {
            if r.unit_id == "unit9" {
                assert!(!r.usable && r.aic.is_none());
            } else {
                assert!(r.usable && r.aic.unwrap().is_finite(), "{r:?}");
                let s = r.survival.unwrap();
                assert!((0.0..=1.0).contains(&s));
            }
        }
    }
}
