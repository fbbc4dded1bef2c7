//! Minimizers for the calibration and likelihood problems: Nelder–Mead for
//! noisy objectives and BFGS with a backtracking line search for smooth ones.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop when the simplex spread in f falls below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter falls below this.
    pub x_tol: f64,
    /// Number of fresh simplices built around the incumbent.
    pub restarts: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evals: 4000, f_tol: 1e-12, x_tol: 1e-10, restarts: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder–Mead with the standard coefficients (1, 2, ½, ½). Non-finite
/// objective values are treated as +∞.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], step: &[f64], cfg: &NelderMeadConfig) -> Minimum {
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut best = x0.to_vec();
    let mut best_f = eval(&best);
    let mut evals = 1;
    let mut converged = false;
    for _ in 0..=cfg.restarts {
        let (x, fx, used, ok) = simplex_run(&mut eval, &best, step, cfg, cfg.max_evals.saturating_sub(evals));
        evals += used;
        if fx <= best_f {
            best = x;
            best_f = fx;
        }
        converged = ok;
        if evals >= cfg.max_evals {
            break;
        }
    }
    Minimum { x: best, f: best_f, evals, converged }
}

fn simplex_run<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    step: &[f64],
    cfg: &NelderMeadConfig,
    budget: usize,
) -> (Vec<f64>, f64, usize, bool) {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut used = n + 1;
    loop {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        let spread = (vals[n] - vals[0]).abs();
        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (spread <= cfg.f_tol && diameter <= cfg.x_tol.sqrt()) || diameter <= cfg.x_tol {
            return (pts[0].clone(), vals[0], used, true);
        }
        if used >= budget {
            return (pts[0].clone(), vals[0], used, false);
        }
        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        used += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            used += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let x = along(-0.5);
            let v = f(&x);
            (x, v)
        } else {
            let x = along(0.5);
            let v = f(&x);
            (x, v)
        };
        used += 1;
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            for k in 0..n {
                pts[i][k] = pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]);
            }
            vals[i] = f(&pts[i]);
        }
        used += n;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self { grad_tol: 1e-10, max_iter: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// BFGS on `fg`, which returns the objective and its gradient. A point where
/// the objective is not finite is rejected by the line search.
pub fn bfgs<F: FnMut(&[f64]) -> (f64, Vec<f64>)>(mut fg: F, x0: &[f64], cfg: &BfgsConfig) -> BfgsResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = fg(&x);
    let mut h = identity(n);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    for it in 0..cfg.max_iter {
        let gn = norm(&g);
        if gn <= cfg.grad_tol {
            return BfgsResult { x, f: fx, grad_norm: gn, iterations: it, converged: true };
        }
        let mut d: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i][j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            h = identity(n);
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let (fn_, gn_) = fg(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fn_, gn_));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn_)) = accepted else {
            let gn = norm(&g);
            return BfgsResult { x, f: fx, grad_norm: gn, iterations: it, converged: gn <= cfg.grad_tol };
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn_.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-300 {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        x = xn;
        fx = fn_;
        g = gn_;
    }
    let gn = norm(&g);
    BfgsResult { x, f: fx, grad_norm: gn, iterations: cfg.max_iter, converged: gn <= cfg.grad_tol }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &[0.5, 0.5], &NelderMeadConfig::default());
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn nelder_mead_ignores_infeasible_region() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 2.0).powi(2) + x[1] * x[1] };
        let m = nelder_mead(f, &[0.5, 1.0], &[0.3, 0.3], &NelderMeadConfig::default());
        assert!((m.x[0] - 2.0).abs() < 1e-5 && m.x[1].abs() < 1e-5);
    }

    #[test]
    fn bfgs_on_quadratic_and_rosenbrock() {
        let quad = |x: &[f64]| {
            let f = 3.0 * (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2) + x[0] * x[1];
            (f, vec![6.0 * (x[0] - 1.0) + x[1], 2.0 * (x[1] + 2.0) + x[0]])
        };
        let r = bfgs(quad, &[0.0, 0.0], &BfgsConfig::default());
        assert!(r.converged);
        // Solves 6x + y = 6, x + 2y = −4.
        assert!((r.x[0] - 16.0 / 11.0).abs() < 1e-9 && (r.x[1] + 30.0 / 11.0).abs() < 1e-9);
        let rb = |x: &[f64]| {
            let g0 = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
            (rosenbrock(x), vec![g0, 200.0 * (x[1] - x[0] * x[0])])
        };
        let r = bfgs(rb, &[-1.2, 1.0], &BfgsConfig::default());
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] - 1.0).abs() < 1e-8);
    }
}
