//! Adaptive Gauss–Kronrod quadrature and Brent root bracketing.
//!
//! The Kronrod rules are generated at first use rather than tabulated: Gauss
//! nodes come from Newton iteration on the Legendre polynomial, the Kronrod
//! extension from the roots of the Stieltjes polynomial written in the
//! Legendre basis, and the weights from moment matching. The unit tests hold
//! the generated 15- and 21-point rules against the QUADPACK tables.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Gauss–Kronrod pair: n-point Gauss embedded in a (2n+1)-point Kronrod rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Rule {
    Gk15,
    #[default]
    Gk21,
    Gk61,
}

impl Rule {
    fn gauss_points(self) -> usize {
        match self {
            Rule::Gk15 => 7,
            Rule::Gk21 => 10,
            Rule::Gk61 => 30,
        }
    }

    fn table(self) -> &'static KronrodTable {
        static GK15: OnceLock<KronrodTable> = OnceLock::new();
        static GK21: OnceLock<KronrodTable> = OnceLock::new();
        static GK61: OnceLock<KronrodTable> = OnceLock::new();
        let cell = match self {
            Rule::Gk15 => &GK15,
            Rule::Gk21 => &GK21,
            Rule::Gk61 => &GK61,
        };
        cell.get_or_init(|| KronrodTable::build(self.gauss_points()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub rule: Rule,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 200,
            rule: Rule::Gk21,
        }
    }
}

impl QuadConfig {
    /// Purely relative accuracy: for integrals whose scale is unknown in advance.
    pub fn relative(rel_tol: f64) -> Self {
        Self {
            abs_tol: f64::MIN_POSITIVE,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_rule(mut self, rule: Rule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_max_subdivisions(mut self, n: usize) -> Self {
        self.max_subdivisions = n.max(1);
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    /// Estimate of ∫|f|, used by callers to judge cancellation.
    pub abs_value: f64,
    pub subdivisions_used: usize,
    pub converged: bool,
}

impl QuadResult {
    /// Ratio ∫|f| / |∫f|; large values flag cancellation.
    pub fn condition(&self) -> f64 {
        if self.value == 0.0 {
            f64::INFINITY
        } else {
            self.abs_value / self.value.abs()
        }
    }

    /// Converts a non-converged result into an error.
    pub fn require(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Quadrature {
                value: self.value,
                error: self.error_estimate,
            })
        }
    }
}

#[derive(Debug)]
struct KronrodTable {
    nodes: Vec<f64>,
    kronrod: Vec<f64>,
    gauss: Vec<f64>,
}

/// Values P_0(x), …, P_m(x) of the Legendre polynomials.
fn legendre_all(m: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; m + 1];
    p[0] = 1.0;
    if m >= 1 {
        p[1] = x;
    }
    for k in 1..m {
        p[k + 1] = ((2 * k + 1) as f64 * x * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
    }
    p
}

/// Gauss–Legendre nodes and weights on [-1, 1], ascending.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let p = legendre_all(n, x);
            let dp = n as f64 * (x * p[n] - p[n - 1]) / (x * x - 1.0);
            let dx = p[n] / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let p = legendre_all(n, x);
        let dp = n as f64 * (x * p[n] - p[n - 1]) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Dense solve with partial pivoting; the systems here are small.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                rhs[row] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    x
}

impl KronrodTable {
    fn build(n: usize) -> Self {
        let (gx, gw) = gauss_legendre(n);

        // Stieltjes polynomial E = P_{n+1} + Σ e_j P_j, orthogonal to P_n·P_k.
        let (qx, qw) = gauss_legendre(2 * n + 2);
        let vals: Vec<Vec<f64>> = qx.iter().map(|&x| legendre_all(n + 1, x)).collect();
        let triple = |j: usize, k: usize| -> f64 {
            vals.iter()
                .zip(&qw)
                .map(|(p, w)| w * p[n] * p[j] * p[k])
                .sum()
        };
        let js: Vec<usize> = (0..n).filter(|j| (j + n + 1).is_multiple_of(2)).collect();
        let ks: Vec<usize> = (0..=n).filter(|k| k % 2 == 1).collect();
        let mat: Vec<Vec<f64>> = ks
            .iter()
            .map(|&k| js.iter().map(|&j| triple(j, k)).collect())
            .collect();
        let rhs: Vec<f64> = ks.iter().map(|&k| -triple(n + 1, k)).collect();
        let coef = solve_dense(mat, rhs);
        let stieltjes = |x: f64| -> f64 {
            let p = legendre_all(n + 1, x);
            p[n + 1] + js.iter().zip(&coef).map(|(&j, e)| e * p[j]).sum::<f64>()
        };

        // Kronrod nodes interlace with the Gauss nodes.
        let mut edges = vec![-1.0];
        edges.extend_from_slice(&gx);
        edges.push(1.0);
        let mut nodes: Vec<f64> = Vec::with_capacity(2 * n + 1);
        let mut is_gauss = Vec::with_capacity(2 * n + 1);
        for i in 0..=n {
            let r = find_root(stieltjes, edges[i], edges[i + 1], 1e-16).unwrap_or(0.5 * (edges[i] + edges[i + 1]));
            nodes.push(r);
            is_gauss.push(false);
            if i < n {
                nodes.push(gx[i]);
                is_gauss.push(true);
            }
        }
        // Symmetrize so that the rule is exactly odd-even balanced.
        let len = nodes.len();
        for i in 0..len / 2 {
            let s = 0.5 * (nodes[len - 1 - i] - nodes[i]);
            nodes[i] = -s;
            nodes[len - 1 - i] = s;
        }
        nodes[len / 2] = 0.0;

        // Weights from exactness on P_0..P_{2n}.
        let m = 2 * n + 1;
        let pv: Vec<Vec<f64>> = nodes.iter().map(|&x| legendre_all(m - 1, x)).collect();
        let mat: Vec<Vec<f64>> = (0..m).map(|k| (0..m).map(|i| pv[i][k]).collect()).collect();
        let mut rhs = vec![0.0; m];
        rhs[0] = 2.0;
        let mut kronrod = solve_dense(mat, rhs);
        for i in 0..len / 2 {
            let w = 0.5 * (kronrod[i] + kronrod[len - 1 - i]);
            kronrod[i] = w;
            kronrod[len - 1 - i] = w;
        }
        let mut gauss = vec![0.0; m];
        let mut g = 0;
        for i in 0..m {
            if is_gauss[i] {
                gauss[i] = gw[g];
                g += 1;
            }
        }
        for i in 0..len / 2 {
            let w = 0.5 * (gauss[i] + gauss[len - 1 - i]);
            gauss[i] = w;
            gauss[len - 1 - i] = w;
        }
        Self {
            nodes,
            kronrod,
            gauss,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

fn apply_rule<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, table: &KronrodTable) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut fv = Vec::with_capacity(table.nodes.len());
    let (mut rk, mut rg, mut rabs) = (0.0, 0.0, 0.0);
    for ((&x, &wk), &wg) in table.nodes.iter().zip(&table.kronrod).zip(&table.gauss) {
        let y = f(center + half * x);
        if !y.is_finite() {
            return Err(Error::Domain(format!(
                "integrand is not finite at {}",
                center + half * x
            )));
        }
        rk += wk * y;
        rg += wg * y;
        rabs += wk * y.abs();
        fv.push(y);
    }
    let mean = 0.5 * rk;
    let rasc: f64 = fv
        .iter()
        .zip(&table.kronrod)
        .map(|(y, w)| w * (y - mean).abs())
        .sum::<f64>()
        * half.abs();
    let rabs = rabs * half.abs();
    let mut err = ((rk - rg) * half).abs();
    if rasc != 0.0 && err != 0.0 {
        err = rasc * (200.0 * err / rasc).powf(1.5).min(1.0);
    }
    if rabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * rabs);
    }
    Ok(Segment {
        lo,
        hi,
        value: rk * half,
        error: err,
        abs_value: rabs,
    })
}

/// Globally adaptive Gauss–Kronrod integration on a finite interval.
///
/// Only interior nodes are sampled, so integrable endpoint singularities are
/// tolerated. A non-finite integrand value is an error.
pub fn integrate_finite<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    if !(lo < hi) {
        if lo == hi {
            return Ok(QuadResult {
                value: 0.0,
                error_estimate: 0.0,
                abs_value: 0.0,
                subdivisions_used: 0,
                converged: true,
            });
        }
        return Err(Error::Domain(format!("empty interval [{lo}, {hi}]")));
    }
    let table = cfg.rule.table();
    let mut segs = vec![apply_rule(&f, lo, hi, table)?];
    loop {
        let value: f64 = segs.iter().map(|s| s.value).sum();
        let error: f64 = segs.iter().map(|s| s.error).sum();
        let abs_value: f64 = segs.iter().map(|s| s.abs_value).sum();
        let done = error <= cfg.target(value);
        if done || segs.len() >= cfg.max_subdivisions {
            return Ok(QuadResult {
                value,
                error_estimate: error,
                abs_value,
                subdivisions_used: segs.len(),
                converged: done,
            });
        }
        let worst = (0..segs.len())
            .max_by(|&i, &j| segs[i].error.total_cmp(&segs[j].error))
            .unwrap();
        let s = segs.swap_remove(worst);
        let mid = 0.5 * (s.lo + s.hi);
        if !(mid > s.lo && mid < s.hi) {
            // Interval cannot be split further in floating point.
            segs.push(Segment { error: 0.0, ..s });
            continue;
        }
        segs.push(apply_rule(&f, s.lo, mid, table)?);
        segs.push(apply_rule(&f, mid, s.hi, table)?);
    }
}

/// Integral over [lo, ∞) through x = lo + s/(1−s).
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, lo: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    integrate_semi_infinite_scaled(f, lo, 1.0, cfg)
}

/// Integral over [lo, ∞) through x = lo + scale·s/(1−s); `scale` should
/// match the length over which f decays.
pub fn integrate_semi_infinite_scaled<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    scale: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    if !(scale > 0.0) {
        return Err(Error::Domain(format!("non-positive scale {scale}")));
    }
    integrate_finite(
        |s| {
            let d = 1.0 - s;
            let x = lo + scale * s / d;
            if x.is_infinite() {
                return 0.0;
            }
            let y = f(x);
            if y == 0.0 {
                0.0
            } else {
                y * scale / (d * d)
            }
        },
        0.0,
        1.0,
        cfg,
    )
}

/// Integral over [lo, ∞) of a slowly oscillating integrand, summed over
/// consecutive blocks of doubling width until a block contributes less than
/// the tolerance twice in a row.
pub fn integrate_octaves<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    first_width: f64,
    max_blocks: usize,
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    let mut total = 0.0;
    let mut error = 0.0;
    let mut abs_value = 0.0;
    let mut subdivisions = 0;
    let mut a = lo;
    let mut width = first_width;
    let mut quiet = 0;
    for _ in 0..max_blocks {
        let r = integrate_finite(&f, a, a + width, cfg)?;
        total += r.value;
        error += r.error_estimate;
        abs_value += r.abs_value;
        subdivisions += r.subdivisions_used;
        if r.abs_value <= cfg.target(total) {
            quiet += 1;
            if quiet >= 2 {
                return Ok(QuadResult {
                    value: total,
                    error_estimate: error + r.abs_value,
                    abs_value,
                    subdivisions_used: subdivisions,
                    converged: true,
                });
            }
        } else {
            quiet = 0;
        }
        a += width;
        width *= 2.0;
    }
    Ok(QuadResult {
        value: total,
        error_estimate: error,
        abs_value,
        subdivisions_used: subdivisions,
        converged: false,
    })
}

/// Brent's method on a bracketing interval.
pub fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::Domain(format!("root function is NaN at {b}")));
        }
    }
    Ok(b)
}
