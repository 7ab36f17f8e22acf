//! Nelder–Mead simplex search with a quadratic penalty outside the box.
//!
//! Points outside the box are evaluated at their projection, plus a
//! penalty proportional to the squared distance to it.

use alloc::vec::Vec;

use super::{Minimum, OptimizerConfig, Scaled, Tracked};

const PENALTY: f64 = 1e4;

/// Penalized value, projected point and raw cost at the projection.
fn penalized(t: &mut Tracked<'_>, p: &Scaled, y: &[f64]) -> (f64, Vec<f64>, f64) {
    let mut c = y.to_vec();
    p.clip(&mut c);
    let excess: f64 = y.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
    let f = t.eval(&c);
    (f + PENALTY * excess, c, f)
}

/// Penalized evaluations that remember the best feasible point.
struct Search<'a, 'b> {
    t: Tracked<'a>,
    p: &'b Scaled,
    best_y: Vec<f64>,
    best_f: f64,
}

impl Search<'_, '_> {
    fn eval(&mut self, y: &[f64]) -> f64 {
        let (f, c, raw) = penalized(&mut self.t, self.p, y);
        if raw < self.best_f {
            self.best_f = raw;
            self.best_y = c;
        }
        f
    }

    /// One simplex run from an axis-aligned simplex at `y0`.
    fn run(&mut self, y0: &[f64], f0: f64, cfg: &OptimizerConfig) -> bool {
        let n = self.p.dim();
        let max = cfg.max_evals;
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut fv: Vec<f64> = Vec::with_capacity(n + 1);
        v.push(y0.to_vec());
        fv.push(f0);
        for i in 0..n {
            if self.t.evals() >= max {
                break;
            }
            let mut y = y0.to_vec();
            let room_up = self.p.hi(i) - y0[i];
            y[i] += if room_up >= cfg.rho_begin {
                cfg.rho_begin
            } else {
                -cfg.rho_begin
            };
            fv.push(self.eval(&y));
            v.push(y);
        }

        loop {
            if v.len() < n + 1 || self.t.evals() >= max {
                return false;
            }
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
            v = order.iter().map(|&k| v[k].clone()).collect();
            fv = order.iter().map(|&k| fv[k]).collect();

            let diameter = (1..=n)
                .map(|j| {
                    v[j].iter()
                        .zip(&v[0])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            let spread = fv[n] - fv[0];
            if diameter <= cfg.rho_end
                || spread <= 1e-3 * cfg.convergence_tol * fv[0].abs().max(1.0) && diameter <= 1e-3
            {
                return true;
            }

            let mut centroid = alloc::vec![0.0; n];
            for y in &v[..n] {
                for (c, a) in centroid.iter_mut().zip(y) {
                    *c += a / n as f64;
                }
            }
            let along = |k: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&v[n])
                    .map(|(c, w)| c + k * (c - w))
                    .collect()
            };
            let yr = along(1.0);
            let fr = self.eval(&yr);
            if fr < fv[0] {
                let ye = along(2.0);
                let fe = self.eval(&ye);
                if fe < fr {
                    v[n] = ye;
                    fv[n] = fe;
                } else {
                    v[n] = yr;
                    fv[n] = fr;
                }
            } else if fr < fv[n - 1] {
                v[n] = yr;
                fv[n] = fr;
            } else {
                let yc = if fr < fv[n] { along(0.5) } else { along(-0.5) };
                let fc = self.eval(&yc);
                if fc < fv[n].min(fr) {
                    v[n] = yc;
                    fv[n] = fc;
                } else {
                    for j in 1..=n {
                        if self.t.evals() >= max {
                            break;
                        }
                        let y: Vec<f64> = v[0]
                            .iter()
                            .zip(&v[j])
                            .map(|(a, b)| a + 0.5 * (b - a))
                            .collect();
                        fv[j] = self.eval(&y);
                        v[j] = y;
                    }
                }
            }
        }
    }
}

/// Repeats simplex runs from the incumbent until one fails to improve it,
/// since a single run can collapse onto a face of the box.
pub(super) fn minimize(
    cost: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    p: &Scaled,
    cfg: &OptimizerConfig,
) -> Minimum {
    let mut t = Tracked::new(cost, p);
    let y0 = p.to_scaled(x0);
    let f0 = t.eval(&y0);
    let mut s = Search {
        t,
        p,
        best_y: y0,
        best_f: f0,
    };
    if p.dim() == 0 {
        return s.t.finish(&s.best_y, s.best_f, true);
    }
    let converged = loop {
        let (start, f_start) = (s.best_y.clone(), s.best_f);
        if !s.run(&start, f_start, cfg) {
            break false;
        }
        if f_start - s.best_f <= cfg.convergence_tol * s.best_f.abs().max(1.0) {
            break true;
        }
    };
    s.t.finish(&s.best_y, s.best_f, converged)
}
