//! `ats`: command-line front end for the ats library.
//!
//! Tables go to stdout as CSV (default) or JSON (`--json`). A JSON file given
//! with `--config` may supply any flag of the chosen subcommand; flags on the
//! command line win. `ATS_SEED` sets the default seed.

use std::error::Error;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ats::degrade::{self, BarrierSpec, DegradationModel};
use ats::dist::{self, Regime, Route};
use ats::moments::{self, stats, stats_ts};
use ats::params::{laplace_ats_real, AtsParams};
use ats::pricing::{self, MarketContext, MixtureParams, OptionQuote};
use ats::selftest::{self, Scope};
use ats::sim::{self, CpaConfig, PathGrid, SamplePath, Spacing};

type CliResult<T> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "ats", version, about = "Average-tempered stable distributions, simulation, degradation and pricing")]
struct Cli {
    /// Emit JSON instead of CSV.
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Emit CSV (the default).
    #[arg(long, global = true)]
    csv: bool,
    /// JSON object whose keys are flag names, e.g. {"a": 1.5, "models": ["ag"]}.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the law of X̃_t ~ ATS(at, b; c).
    Dist(DistArgs),
    /// Simulate paths of X, X̃, Λ or the Gaussian mixture H.
    Sim(SimArgs),
    /// Degradation data: fit models, simulate fixtures.
    Degrade {
        #[command(subcommand)]
        cmd: DegradeCmd,
    },
    /// Option pricing under the ATS Gaussian mixture.
    Price {
        #[command(subcommand)]
        cmd: PriceCmd,
    },
    /// Run the acceptance checks.
    Selftest(SelftestArgs),
}

#[derive(Args, Clone, Copy)]
struct LawArgs {
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Family parameter in [0, 1): 0 is average-gamma, 1/2 average inverse Gaussian.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Horizon.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
}

impl LawArgs {
    fn params(&self) -> CliResult<AtsParams> {
        Ok(AtsParams::new(self.a, self.b, self.c, self.t)?)
    }
}

#[derive(Args, Clone, Copy)]
struct MixtureArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    kappa: f64,
    #[arg(long, default_value_t = -0.3, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum DistWhat {
    Pdf,
    Cdf,
    Mgf,
    Moments,
    Stats,
    Mode,
    Tails,
}

#[derive(Copy, Clone, ValueEnum)]
enum RouteArg {
    Cut,
    Contour,
}

#[derive(Args)]
struct DistArgs {
    what: DistWhat,
    #[command(flatten)]
    law: LawArgs,
    /// Evaluation points: `lo..hi` (with --points) or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// MGF arguments, same grammar as --x; must stay below b.
    #[arg(long, allow_hyphen_values = true)]
    u: Option<String>,
    #[arg(long, default_value_t = 101)]
    points: usize,
    /// Highest moment order.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Moments over the grid a ∈ {1/2, 1, 3/2, 2}, c ∈ {0, 1/2}, b = t = 1.
    #[arg(long)]
    table1: bool,
    /// Add the tempered stable density of X_t (c ∈ {0, 1/2}).
    #[arg(long)]
    with_ts: bool,
    /// Force one inversion route for pdf/cdf.
    #[arg(long, value_enum)]
    route: Option<RouteArg>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SimModel {
    /// Tempered stable X.
    Ts,
    /// Running average X̃ of X.
    Avg,
    /// ATS subordinator Λ by compound Poisson approximation.
    Lambda,
    /// Gaussian mixture H over Λ.
    Mixture,
}

#[derive(Copy, Clone, ValueEnum)]
enum SpacingArg {
    Uniform,
    Log,
}

#[derive(Args)]
struct SimArgs {
    model: SimModel,
    #[command(flatten)]
    law: LawArgs,
    #[command(flatten)]
    mixture: MixtureArgs,
    #[arg(long, default_value_t = 100)]
    paths: usize,
    /// Time steps per path.
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    /// Jump-size bins for lambda and mixture.
    #[arg(long, default_value_t = 100)]
    bins: usize,
    #[arg(long, default_value_t = 1e-10)]
    x_min: f64,
    #[arg(long, default_value_t = 7.0)]
    x_max: f64,
    #[arg(long, value_enum, default_value = "log")]
    spacing: SpacingArg,
    #[arg(long, env = "ATS_SEED", default_value_t = 1)]
    seed: u64,
    /// Per-time sample mean, its standard error and the exact mean instead of paths.
    #[arg(long)]
    summary: bool,
    /// One Λ path, its mixture H and S₀e^H under the calibrated Bitcoin
    /// parameters: 100 uniform bins on (1e−10, 7], 2000 steps.
    #[arg(long)]
    figure7: bool,
    /// Spot for --figure7.
    #[arg(long, default_value_t = 9232.98)]
    spot: f64,
}

#[derive(Subcommand)]
enum DegradeCmd {
    /// Fit each unit under each model and report AIC and survival.
    Fit(DegradeFitArgs),
    /// Write a synthetic dataset in the fit input format.
    Simulate(DegradeSimArgs),
}

#[derive(Args)]
struct DegradeFitArgs {
    /// CSV with columns unit_id,time,reading[,temperature].
    #[arg(long)]
    input: PathBuf,
    /// Comma list from gamma, ag, aig.
    #[arg(long, value_delimiter = ',', default_value = "gamma,ag,aig")]
    models: Vec<String>,
    /// Degradation l − D̲ the unit can absorb before the alert.
    #[arg(long)]
    barrier: f64,
    /// Horizon T for the survival probability.
    #[arg(long)]
    horizon: f64,
    /// Initial condition l; defaults to twice the barrier.
    #[arg(long)]
    initial_condition: Option<f64>,
}

#[derive(Args)]
struct DegradeSimArgs {
    #[command(flatten)]
    law: LawArgs,
    #[arg(long, default_value_t = 29)]
    units: usize,
    /// Inspection times; the resistor schedule by default.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Euler substeps per inspection interval.
    #[arg(long, default_value_t = 200)]
    substeps: usize,
    #[arg(long, env = "ATS_SEED", default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Clone, Copy)]
struct MarketArgs {
    #[arg(long)]
    spot: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rate: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    div_yield: f64,
}

impl MarketArgs {
    fn market(&self) -> CliResult<MarketContext> {
        Ok(MarketContext::new(self.spot, self.rate, self.div_yield)?)
    }
}

#[derive(Subcommand)]
enum PriceCmd {
    /// Price quotes from a file, or one option given by --strike.
    Quote(PriceQuoteArgs),
    /// Fit (a, b, μ, σ) with c fixed to a quote file by minimizing ARPE.
    Calibrate(CalibrateArgs),
    /// Write model prices of out-of-the-money options as a quote file.
    Synthesize(SynthesizeArgs),
}

#[derive(Args)]
struct PriceQuoteArgs {
    #[command(flatten)]
    market: MarketArgs,
    #[command(flatten)]
    law: LawArgs,
    #[command(flatten)]
    mixture: MixtureArgs,
    /// CSV with columns strike,maturity_days,price,type.
    #[arg(long, conflicts_with = "strike")]
    input: Option<PathBuf>,
    #[arg(long, requires = "maturity_days")]
    strike: Option<f64>,
    #[arg(long)]
    maturity_days: Option<f64>,
    /// C or P.
    #[arg(long = "type", default_value = "C")]
    kind: String,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    market: MarketArgs,
    #[arg(long)]
    input: PathBuf,
    /// Fixed family parameter.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Emit the per-quote fit table instead of the parameter row.
    #[arg(long)]
    per_quote: bool,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    market: MarketArgs,
    #[command(flatten)]
    law: LawArgs,
    #[command(flatten)]
    mixture: MixtureArgs,
    #[arg(long, value_delimiter = ',', default_value = "19,47,166,257")]
    maturities: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.9,0.95,1,1.05,1.1,1.2,1.35")]
    moneyness: Vec<f64>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Deterministic subset, a few seconds (the default).
    #[arg(long, conflicts_with = "full")]
    quick: bool,
    /// Every check, including Monte Carlo and calibration.
    #[arg(long)]
    full: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

fn emit<T: Serialize>(fmt: Format, rows: &[T]) -> CliResult<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match fmt {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// `lo..hi` with `points` equally spaced values, or a comma list.
fn parse_grid(spec: &str, points: usize) -> CliResult<Vec<f64>> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let (lo, hi): (f64, f64) = (lo.trim().parse()?, hi.trim().parse()?);
        if !(lo < hi) || points < 2 {
            return Err(format!("grid {spec:?} needs lo < hi and at least 2 points").into());
        }
        Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
    } else {
        spec.split(',').map(|s| Ok(s.trim().parse::<f64>()?)).collect()
    }
}

// dist

#[derive(Serialize)]
struct PdfRow {
    x: f64,
    pdf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pdf_ts: Option<f64>,
}

#[derive(Serialize)]
struct CdfRow {
    x: f64,
    cdf: f64,
    sf: f64,
}

#[derive(Serialize)]
struct MgfRow {
    u: f64,
    mgf: f64,
}

#[derive(Serialize)]
struct MomentRow {
    a: f64,
    b: f64,
    c: f64,
    t: f64,
    n: usize,
    value: f64,
    exact: Option<String>,
}

#[derive(Serialize)]
struct StatsRow {
    law: &'static str,
    mean: f64,
    variance: f64,
    skewness: f64,
    excess_kurtosis: f64,
}

#[derive(Serialize)]
struct ModeRow {
    mode: f64,
    pdf: f64,
}

#[derive(Serialize)]
struct TailRow {
    x: f64,
    pdf: f64,
    estimate: f64,
    ratio: f64,
    regime: Regime,
    leading_order_only: bool,
}

fn moment_rows(p: &AtsParams, n: usize) -> Vec<MomentRow> {
    let float = moments::moments_upto(p, n);
    let exact = moments::moments_exact(p, n);
    (0..=n)
        .map(|k| MomentRow {
            a: p.a,
            b: p.b,
            c: p.c,
            t: p.t,
            n: k,
            value: float[k],
            exact: exact.as_ref().map(|e| e[k].to_string()),
        })
        .collect()
}

fn cmd_dist(args: &DistArgs, fmt: Format) -> CliResult<()> {
    if args.table1 {
        if args.what != DistWhat::Moments {
            return Err("--table1 applies to `dist moments`".into());
        }
        let mut rows = Vec::new();
        for c in [0.0, 0.5] {
            for a in [0.5, 1.0, 1.5, 2.0] {
                rows.extend(moment_rows(&AtsParams::unit(a, 1.0, c)?, args.n));
            }
        }
        return emit(fmt, &rows);
    }
    let p = args.law.params()?;
    let s = stats(&p);
    let default_x = || format!("{}..{}", s.mean / 200.0, s.mean + 8.0 * s.variance.sqrt());
    let grid = |spec: &Option<String>, fallback: String| parse_grid(spec.as_deref().unwrap_or(&fallback), args.points);
    let route = args.route.map(|r| match r {
        RouteArg::Cut => Route::Cut,
        RouteArg::Contour => Route::Contour,
    });
    match args.what {
        DistWhat::Pdf => {
            let rows = grid(&args.x, default_x())?
                .into_iter()
                .map(|x| {
                    let pdf = match route {
                        Some(r) => dist::pdf_by(&p, x, r)?,
                        None => dist::pdf(&p, x)?,
                    };
                    let pdf_ts = if args.with_ts { Some(dist::pdf_ts(&p, x)?) } else { None };
                    Ok(PdfRow { x, pdf, pdf_ts })
                })
                .collect::<CliResult<Vec<_>>>()?;
            emit(fmt, &rows)
        }
        DistWhat::Cdf => {
            let rows = grid(&args.x, default_x())?
                .into_iter()
                .map(|x| {
                    let (cdf, sf) = match route {
                        Some(r) => {
                            let f = dist::cdf_by(&p, x, r)?;
                            (f, 1.0 - f)
                        }
                        None => (dist::cdf(&p, x)?, dist::sf(&p, x)?),
                    };
                    Ok(CdfRow { x, cdf, sf })
                })
                .collect::<CliResult<Vec<_>>>()?;
            emit(fmt, &rows)
        }
        DistWhat::Mgf => {
            let fallback = format!("{}..{}", -p.b, 0.9 * p.b);
            let rows = grid(&args.u, fallback)?
                .into_iter()
                .map(|u| {
                    if u >= p.b {
                        return Err(format!("the MGF diverges for u = {u} >= b = {}", p.b).into());
                    }
                    Ok(MgfRow { u, mgf: laplace_ats_real(&p, -u)? })
                })
                .collect::<CliResult<Vec<_>>>()?;
            emit(fmt, &rows)
        }
        DistWhat::Moments => emit(fmt, &moment_rows(&p, args.n)),
        DistWhat::Stats => {
            let ts = stats_ts(&p);
            let rows = [
                StatsRow { law: "ats", mean: s.mean, variance: s.variance, skewness: s.skewness, excess_kurtosis: s.excess_kurtosis },
                StatsRow { law: "ts", mean: ts.mean, variance: ts.variance, skewness: ts.skewness, excess_kurtosis: ts.excess_kurtosis },
            ];
            emit(fmt, &rows)
        }
        DistWhat::Mode => {
            let m = dist::mode(&p)?;
            emit(fmt, &[ModeRow { mode: m, pdf: dist::pdf(&p, m)? }])
        }
        DistWhat::Tails => {
            let sd = s.variance.sqrt();
            let fallback = [0.01, 0.02, 0.05]
                .iter()
                .map(|k| k * s.mean)
                .chain([5.0, 10.0, 20.0, 40.0].iter().map(|k| s.mean + k * sd))
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let rows = grid(&args.x, fallback)?
                .into_iter()
                .map(|x| {
                    let est = if x < s.mean { dist::pdf_left_tail(&p, x)? } else { dist::pdf_right_tail(&p, x) };
                    let pdf = dist::pdf(&p, x)?;
                    Ok(TailRow {
                        x,
                        pdf,
                        estimate: est.value,
                        ratio: pdf / est.value,
                        regime: est.regime,
                        leading_order_only: est.leading_order_only,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            emit(fmt, &rows)
        }
    }
}

// sim

#[derive(Serialize)]
struct PathRow {
    path: usize,
    time: f64,
    value: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    time: f64,
    mean: f64,
    se: f64,
    exact_mean: f64,
}

#[derive(Serialize)]
struct Figure7Row {
    time: f64,
    lambda: f64,
    h: f64,
    price: f64,
}

fn path_rows(paths: &[SamplePath]) -> Vec<PathRow> {
    paths
        .iter()
        .enumerate()
        .flat_map(|(k, p)| p.grid.times.iter().zip(&p.values).map(move |(&time, &value)| PathRow { path: k, time, value }))
        .collect()
}

fn cmd_sim(args: &SimArgs, fmt: Format) -> CliResult<()> {
    if args.figure7 {
        let base = AtsParams::unit(1.46874, 0.682686, 0.5)?;
        let mp = MixtureParams::new(0.0, -0.594359, 0.635236, base)?;
        let eps = 1e-10;
        let cfg = CpaConfig::new(100, eps, 7.0 + eps, Spacing::Uniform)?;
        let grid = PathGrid::new(2000, 1.0)?;
        let (lambda, h) = sim::mixture_path_pairs(&mp, &grid, &cfg, 1, args.seed)?.remove(0);
        let prices = pricing::price_path(args.spot, &h.values);
        let rows: Vec<Figure7Row> = grid
            .times
            .iter()
            .enumerate()
            .map(|(i, &time)| Figure7Row { time, lambda: lambda.values[i], h: h.values[i], price: prices[i] })
            .collect();
        return emit(fmt, &rows);
    }
    let p = args.law.params()?;
    let grid = PathGrid::new(args.steps, p.t)?;
    let spacing = match args.spacing {
        SpacingArg::Uniform => Spacing::Uniform,
        SpacingArg::Log => Spacing::Log,
    };
    let cfg = CpaConfig::new(args.bins, args.x_min, args.x_max, spacing)?;
    let mp = MixtureParams::new(args.mixture.kappa, args.mixture.mu, args.mixture.sigma, p)?;
    let paths = match args.model {
        SimModel::Ts => sim::euler_paths(&p, &grid, args.paths, args.seed)?.0,
        SimModel::Avg => sim::euler_paths(&p, &grid, args.paths, args.seed)?.1,
        SimModel::Lambda => sim::cpa_lambda_paths(&p, &grid, &cfg, args.paths, args.seed)?,
        SimModel::Mixture => sim::mixture_paths(&mp, &grid, &cfg, args.paths, args.seed)?,
    };
    if !args.summary {
        return emit(fmt, &path_rows(&paths));
    }
    let rows = sim::path_summary(&paths)
        .into_iter()
        .map(|m| {
            let exact_mean = if m.time == 0.0 {
                0.0
            } else {
                let q = p.with_horizon(m.time)?;
                match args.model {
                    SimModel::Ts => stats_ts(&q).mean,
                    SimModel::Avg | SimModel::Lambda => stats(&q).mean,
                    SimModel::Mixture => mp.with_maturity(m.time)?.mean_and_variance().0,
                }
            };
            Ok(SummaryRow { time: m.time, mean: m.mean, se: m.se, exact_mean })
        })
        .collect::<CliResult<Vec<_>>>()?;
    emit(fmt, &rows)
}

// degrade

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()).into())
}

fn cmd_degrade(cmd: &DegradeCmd, fmt: Format) -> CliResult<()> {
    match cmd {
        DegradeCmd::Fit(args) => {
            let data = degrade::read_series(open(&args.input)?)?;
            let models = args.models.iter().map(|m| m.parse::<DegradationModel>()).collect::<Result<Vec<_>, _>>()?;
            let l = args.initial_condition.unwrap_or(2.0 * args.barrier);
            let barrier = BarrierSpec::new(l, l - args.barrier)?;
            emit(fmt, &degrade::batch_report(&data, &models, &barrier, args.horizon))
        }
        DegradeCmd::Simulate(args) => {
            let p = args.law.params()?;
            let times = args.times.clone().unwrap_or_else(|| degrade::RESISTOR_TIMES.to_vec());
            let data = degrade::simulate_dataset(&p, &times, args.units, args.substeps, args.seed)?;
            emit(fmt, &degrade::series_rows(&data))
        }
    }
}

// price

#[derive(Serialize)]
struct QuoteRow {
    strike: f64,
    maturity_days: f64,
    #[serde(rename = "type")]
    kind: &'static str,
    model_price: Option<f64>,
    market_price: Option<f64>,
    rel_err: Option<f64>,
    p_star: Option<f64>,
    p_breve: Option<f64>,
    note: Option<String>,
}

#[derive(Serialize)]
struct CalibrationRow {
    a: f64,
    b: f64,
    c: f64,
    mu: f64,
    sigma: f64,
    arpe: f64,
    evaluations: usize,
    quotes: usize,
}

#[derive(Serialize)]
struct SyntheticQuoteRow {
    strike: f64,
    maturity_days: f64,
    price: f64,
    #[serde(rename = "type")]
    kind: &'static str,
}

fn kind(is_call: bool) -> &'static str {
    if is_call {
        "C"
    } else {
        "P"
    }
}

fn quote_row(mp: &MixtureParams, mkt: &MarketContext, q: &OptionQuote, market: Option<f64>) -> QuoteRow {
    let mut row = QuoteRow {
        strike: q.strike,
        maturity_days: q.maturity * 365.0,
        kind: kind(q.is_call),
        model_price: None,
        market_price: market,
        rel_err: None,
        p_star: None,
        p_breve: None,
        note: None,
    };
    match pricing::price_pair(mp, mkt, q.strike, q.maturity) {
        Ok(pp) => {
            let price = if q.is_call { pp.call } else { pp.put };
            row.model_price = Some(price);
            row.rel_err = market.map(|m| (price - m).abs() / m);
            row.p_star = Some(pp.p_star);
            row.p_breve = Some(pp.p_breve);
            if pp.floored {
                row.note = Some("raised to the no-arbitrage bound".into());
            }
        }
        Err(e) => row.note = Some(e.to_string()),
    }
    row
}

fn cmd_price(cmd: &PriceCmd, fmt: Format) -> CliResult<()> {
    match cmd {
        PriceCmd::Quote(args) => {
            let mkt = args.market.market()?;
            let base = AtsParams::unit(args.law.a, args.law.b, args.law.c)?;
            let mp = MixtureParams::new(args.mixture.kappa, args.mixture.mu, args.mixture.sigma, base)?;
            let rows: Vec<QuoteRow> = if let Some(path) = &args.input {
                let quotes = pricing::read_quotes(open(path)?)?;
                quotes.iter().map(|q| quote_row(&mp, &mkt, q, Some(q.market_price))).collect()
            } else {
                let (Some(k), Some(d)) = (args.strike, args.maturity_days) else {
                    return Err("give --input or --strike with --maturity-days".into());
                };
                let is_call = match args.kind.to_ascii_uppercase().as_str() {
                    "C" | "CALL" => true,
                    "P" | "PUT" => false,
                    other => return Err(format!("unknown option type {other:?}").into()),
                };
                // The market price slot is unused here; 1 satisfies validation.
                let q = OptionQuote::new(k, d / 365.0, 1.0, is_call)?;
                vec![quote_row(&mp, &mkt, &q, None)]
            };
            emit(fmt, &rows)
        }
        PriceCmd::Calibrate(args) => {
            let mkt = args.market.market()?;
            let quotes = pricing::read_quotes(open(&args.input)?)?;
            let fit = pricing::calibrate(&quotes, &mkt, args.c, None)?;
            if fmt == Format::Json && !args.per_quote {
                let stdout = io::stdout();
                let mut out = stdout.lock();
                serde_json::to_writer_pretty(&mut out, &fit)?;
                writeln!(out)?;
                return Ok(());
            }
            if args.per_quote {
                return emit(fmt, &fit.per_quote);
            }
            let p = fit.params;
            emit(
                fmt,
                &[CalibrationRow {
                    a: p.base.a,
                    b: p.base.b,
                    c: p.base.c,
                    mu: p.mu,
                    sigma: p.sigma,
                    arpe: fit.arpe,
                    evaluations: fit.evaluations,
                    quotes: quotes.len(),
                }],
            )
        }
        PriceCmd::Synthesize(args) => {
            let mkt = args.market.market()?;
            let base = AtsParams::unit(args.law.a, args.law.b, args.law.c)?;
            let mp = MixtureParams::new(args.mixture.kappa, args.mixture.mu, args.mixture.sigma, base)?;
            let rows: Vec<SyntheticQuoteRow> = pricing::synthetic_quotes(&mp, &mkt, &args.maturities, &args.moneyness)?
                .into_iter()
                .map(|q| SyntheticQuoteRow {
                    strike: q.strike,
                    maturity_days: q.maturity * 365.0,
                    price: q.market_price,
                    kind: kind(q.is_call),
                })
                .collect();
            emit(fmt, &rows)
        }
    }
}

// selftest

fn cmd_selftest(args: &SelftestArgs, fmt: Format) -> CliResult<bool> {
    let scope = if args.full { Scope::Full } else { Scope::Quick };
    let mut all = true;
    let mut outcomes = Vec::new();
    for id in scope.ids() {
        let o = selftest::criterion(id);
        all &= o.passed;
        if fmt == Format::Csv {
            let tag = if o.passed { "PASS" } else { "FAIL" };
            println!(
                "{tag} [{}] {}: {} (max deviation {:.3e}, {:.1} s)",
                o.id, o.name, o.detail, o.max_deviation, o.seconds
            );
        }
        outcomes.push(o);
    }
    if fmt == Format::Json {
        emit(fmt, &outcomes)?;
    }
    Ok(all)
}

/// Inserts `--flag=value` pairs from the `--config` JSON file after the
/// subcommand words, skipping flags already on the command line.
fn expand_config(raw: Vec<String>) -> CliResult<Vec<String>> {
    let mut path = None;
    for (i, a) in raw.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if a == "--config" {
            path = raw.get(i + 1).cloned();
        }
    }
    let Some(path) = path else { return Ok(raw) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("config {path}: {e}"))?;
    let serde_json::Value::Object(map) = value else {
        return Err(format!("config {path} must hold a JSON object").into());
    };

    // Position just after the deepest subcommand word.
    let mut cmd = Cli::command();
    let mut insert_at = 1;
    let mut i = 1;
    while i < raw.len() {
        let a = &raw[i];
        if a == "--config" {
            i += 2;
            continue;
        }
        if !a.starts_with('-') {
            if let Some(sub) = cmd.find_subcommand(a).cloned() {
                cmd = sub;
                insert_at = i + 1;
            }
        }
        i += 1;
    }

    let present = |flag: &str| raw.iter().any(|a| a == flag || a.starts_with(&format!("{flag}=")));
    let mut extra = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || present(&flag) {
            continue;
        }
        let text = match v {
            serde_json::Value::Bool(true) => {
                extra.push(flag);
                continue;
            }
            serde_json::Value::Bool(false) | serde_json::Value::Null => continue,
            serde_json::Value::String(s) => s,
            serde_json::Value::Array(items) => items
                .iter()
                .map(|x| match x {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        };
        extra.push(format!("{flag}={text}"));
    }
    let mut out = raw;
    out.splice(insert_at..insert_at, extra);
    Ok(out)
}

fn run() -> CliResult<bool> {
    let raw: Vec<String> = std::env::args_os().map(|a| a.to_string_lossy().into_owned()).collect();
    let args = expand_config(raw)?;
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    let fmt = if cli.json { Format::Json } else { Format::Csv };
    match &cli.command {
        Command::Dist(a) => cmd_dist(a, fmt)?,
        Command::Sim(a) => cmd_sim(a, fmt)?,
        Command::Degrade { cmd } => cmd_degrade(cmd, fmt)?,
        Command::Price { cmd } => cmd_price(cmd, fmt)?,
        Command::Selftest(a) => return cmd_selftest(a, fmt),
    }
    Ok(true)
}

/// A closed downstream pipe (`ats ... | head`) is not an error.
fn broken_pipe(e: &(dyn Error + 'static)) -> bool {
    let io_kind = |e: &io::Error| e.kind() == io::ErrorKind::BrokenPipe;
    if let Some(e) = e.downcast_ref::<io::Error>() {
        return io_kind(e);
    }
    if let Some(csv::ErrorKind::Io(e)) = e.downcast_ref::<csv::Error>().map(|c| c.kind()) {
        return io_kind(e);
    }
    e.downcast_ref::<serde_json::Error>().and_then(|j| j.io_error_kind()) == Some(io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) if broken_pipe(e.as_ref()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
