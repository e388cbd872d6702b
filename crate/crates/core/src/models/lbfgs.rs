//! Limited-memory BFGS with a strong-Wolfe line search.

/// Objective callback: writes the gradient into the second argument and
/// returns the loss.
pub trait Objective {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Objective for F {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self(x, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once max |g_i| falls below this.
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iter: 500,
            grad_tol: 1e-6,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LbfgsReport {
    pub iterations: usize,
    pub converged: bool,
    /// Loss before the first step and after every accepted step.
    pub loss_history: Vec<f64>,
    pub fallback_steps: usize,
    pub log: Vec<String>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Probe {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

struct LineSearch<'a, O: Objective> {
    obj: &'a mut O,
    x: &'a [f64],
    p: &'a [f64],
    f0: f64,
    slope0: f64,
    cfg: &'a LbfgsConfig,
    evals: usize,
    trial: Vec<f64>,
}

impl<O: Objective> LineSearch<'_, O> {
    fn probe(&mut self, alpha: f64) -> Probe {
        self.evals += 1;
        for ((t, x), p) in self.trial.iter_mut().zip(self.x).zip(self.p) {
            *t = x + alpha * p;
        }
        let mut g = vec![0.0; self.x.len()];
        let f = self.obj.eval(&self.trial, &mut g);
        let slope = dot(&g, self.p);
        Probe { alpha, f, g, slope }
    }

    fn armijo(&self, pr: &Probe) -> bool {
        pr.f.is_finite() && pr.f <= self.f0 + self.cfg.c1 * pr.alpha * self.slope0
    }

    fn curvature(&self, pr: &Probe) -> bool {
        pr.slope.abs() <= -self.cfg.c2 * self.slope0
    }

    /// Returns a strong-Wolfe point, or failing that the best point with
    /// sufficient decrease.
    fn run(&mut self, alpha0: f64) -> Option<Probe> {
        let mut prev = Probe {
            alpha: 0.0,
            f: self.f0,
            g: Vec::new(),
            slope: self.slope0,
        };
        let mut alpha = alpha0;
        let mut first = true;
        while self.evals < self.cfg.max_line_search {
            let cur = self.probe(alpha);
            if !cur.f.is_finite() {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if !self.armijo(&cur) || (!first && cur.f >= prev.f) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Some(cur);
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            first = false;
            alpha = cur.alpha * 2.0;
            prev = cur;
        }
        (prev.alpha > 0.0 && self.armijo(&prev)).then_some(prev)
    }

    fn zoom(&mut self, mut lo: Probe, mut hi: Probe) -> Option<Probe> {
        while self.evals < self.cfg.max_line_search {
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let width = b - a;
            if width <= 1e-16 * b.max(1.0) {
                break;
            }
            let mut alpha = cubic_min(&lo, &hi).unwrap_or(0.5 * (a + b));
            if !(alpha > a + 0.1 * width && alpha < b - 0.1 * width) {
                alpha = 0.5 * (a + b);
            }
            let cur = self.probe(alpha);
            if !self.armijo(&cur) || cur.f >= lo.f {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Some(cur);
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = std::mem::replace(&mut lo, cur);
                } else {
                    lo = cur;
                }
            }
        }
        (lo.alpha > 0.0 && self.armijo(&lo) && lo.f < self.f0).then_some(lo)
    }
}

/// Minimiser of the cubic interpolating (f, f') at both ends.
fn cubic_min(p: &Probe, q: &Probe) -> Option<f64> {
    let d1 = p.slope + q.slope - 3.0 * (p.f - q.f) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.slope * q.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    let a = q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / (q.slope - p.slope + 2.0 * d2);
    a.is_finite().then_some(a)
}

/// Minimises `obj` from `x0`. Every accepted step satisfies the Armijo
/// condition, so the loss history is non-increasing.
pub fn minimize<O: Objective>(obj: &mut O, x0: Vec<f64>, cfg: &LbfgsConfig) -> (Vec<f64>, LbfgsReport) {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = obj.eval(&x, &mut g);
    let mut report = LbfgsReport {
        loss_history: vec![f],
        ..Default::default()
    };
    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(cfg.memory);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(cfg.memory);
    let mut rho_hist: Vec<f64> = Vec::with_capacity(cfg.memory);

    while report.iterations < cfg.max_iter {
        if inf_norm(&g) < cfg.grad_tol {
            report.converged = true;
            break;
        }
        let mut p = two_loop(&g, &s_hist, &y_hist, &rho_hist);
        if dot(&p, &g) >= 0.0 {
            // not a descent direction; restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            p = g.iter().map(|v| -v).collect();
        }
        let alpha0 = if s_hist.is_empty() {
            (1.0 / inf_norm(&g).max(1e-12)).min(1.0)
        } else {
            1.0
        };
        let step = {
            let mut ls = LineSearch {
                obj,
                x: &x,
                p: &p,
                f0: f,
                slope0: dot(&g, &p),
                cfg,
                evals: 0,
                trial: vec![0.0; n],
            };
            ls.run(alpha0)
        };
        let (accepted, p) = match step {
            Some(pr) => (pr, p),
            None => {
                report.fallback_steps += 1;
                report.log.push(format!(
                    "iteration {}: line search failed, falling back to a gradient step",
                    report.iterations
                ));
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                match gradient_step(obj, &x, &g, f, cfg) {
                    Some(v) => v,
                    None => {
                        report.log.push(format!(
                            "iteration {}: no decrease along the gradient, stopping",
                            report.iterations
                        ));
                        break;
                    }
                }
            }
        };
        let s: Vec<f64> = p.iter().map(|v| accepted.alpha * v).collect();
        let yv: Vec<f64> = accepted.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        let sy = dot(&s, &yv);
        if sy > 1e-10 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
            if s_hist.len() == cfg.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(yv);
            rho_hist.push(1.0 / sy);
        }
        f = accepted.f;
        g = accepted.g;
        report.iterations += 1;
        report.loss_history.push(f);
    }
    if !report.converged && inf_norm(&g) < cfg.grad_tol {
        report.converged = true;
    }
    (x, report)
}

fn two_loop(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>], rho: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let k = s_hist.len();
    let mut alpha = vec![0.0; k];
    for i in (0..k).rev() {
        alpha[i] = rho[i] * dot(&s_hist[i], &q);
        for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
            *qj -= alpha[i] * yj;
        }
    }
    if k > 0 {
        let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for i in 0..k {
        let beta = rho[i] * dot(&y_hist[i], &q);
        for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
            *qj += (alpha[i] - beta) * sj;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Backtracking Armijo step along −g.
fn gradient_step<O: Objective>(
    obj: &mut O,
    x: &[f64],
    g: &[f64],
    f: f64,
    cfg: &LbfgsConfig,
) -> Option<(Probe, Vec<f64>)> {
    let p: Vec<f64> = g.iter().map(|v| -v).collect();
    let slope0 = -dot(g, g);
    let mut alpha = 1.0 / inf_norm(g).max(1e-12);
    let mut trial = vec![0.0; x.len()];
    for _ in 0..60 {
        for ((t, xi), pi) in trial.iter_mut().zip(x).zip(&p) {
            *t = xi + alpha * pi;
        }
        let mut gn = vec![0.0; x.len()];
        let fn_ = obj.eval(&trial, &mut gn);
        if fn_.is_finite() && fn_ <= f + cfg.c1 * alpha * slope0 && fn_ < f {
            let slope = dot(&gn, &p);
            return Some((
                Probe {
                    alpha,
                    f: fn_,
                    g: gn,
                    slope,
                },
                p,
            ));
        }
        alpha *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn minimises_rosenbrock() {
        let (x, rep) = minimize(&mut rosenbrock, vec![-1.2, 1.0], &LbfgsConfig::default());
        assert!(rep.converged, "{rep:?}");
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5, "{x:?}");
        assert!(rep.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn minimises_quadratic_exactly() {
        let diag = [1.0, 10.0, 100.0, 1000.0];
        let mut f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..4 {
                g[i] = diag[i] * (x[i] - i as f64);
                v += 0.5 * diag[i] * (x[i] - i as f64).powi(2);
            }
            v
        };
        let (x, rep) = minimize(&mut f, vec![5.0; 4], &LbfgsConfig::default());
        assert!(rep.converged);
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - i as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn respects_iteration_cap() {
        let cfg = LbfgsConfig {
            max_iter: 3,
            ..LbfgsConfig::default()
        };
        let (_, rep) = minimize(&mut rosenbrock, vec![-1.2, 1.0], &cfg);
        assert_eq!(rep.iterations, 3);
        assert_eq!(rep.loss_history.len(), 4);
        assert!(!rep.converged);
    }
}
