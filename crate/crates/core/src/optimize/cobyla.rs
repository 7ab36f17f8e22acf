//! Linear-approximation trust-region method in the style of COBYLA.
//!
//! The model is the linear interpolant through `n + 1` simplex vertices.
//! Each iteration minimizes the model over the intersection of the trust
//! ball and the box, replaces one vertex with the trial point and either
//! repairs the simplex geometry or halves the trust radius when the model
//! stops predicting progress.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // std, when linked, shadows these methods
use num_traits::Float;

use nalgebra::{DMatrix, DVector};

use super::{Minimum, OptimizerConfig, Scaled, Tracked};

/// Vertices may lie at most `BETA·ρ` from the best one.
const BETA: f64 = 2.1;
/// Each vertex must keep distance `ALPHA·ρ` from its opposite face.
const ALPHA: f64 = 0.25;
/// Length of a geometry step in units of `ρ`.
const GAMMA: f64 = 0.5;
/// Trial steps achieving less than this fraction of the predicted
/// reduction trigger geometry repair or a radius reduction.
const POOR_RATIO: f64 = 0.1;
/// Steps doing better than this fraction may enlarge the trust radius.
const GOOD_RATIO: f64 = 0.7;
/// Upper limit of the trust radius in units of the initial radius.
const MAX_EXPANSION: f64 = 4.0;
/// Radius reductions without relative progress before a stall is declared.
const STALL_LEVELS: usize = 3;

struct Model {
    grad: DVector<f64>,
    /// Columns are the dual basis of the edge vectors `v_j - v_0`.
    dual: DMatrix<f64>,
    dist: Vec<f64>,
    sigma: Vec<f64>,
}

struct Simplex {
    v: Vec<Vec<f64>>,
    f: Vec<f64>,
}

impl Simplex {
    fn best_first(&mut self) {
        let mut b = 0;
        for j in 1..self.f.len() {
            if self.f[j] < self.f[b] {
                b = j;
            }
        }
        self.v.swap(0, b);
        self.f.swap(0, b);
    }

    fn model(&self) -> Option<Model> {
        let n = self.v.len() - 1;
        let mut d = DMatrix::<f64>::zeros(n, n);
        let mut df = DVector::<f64>::zeros(n);
        for j in 0..n {
            for i in 0..n {
                d[(j, i)] = self.v[j + 1][i] - self.v[0][i];
            }
            df[j] = self.f[j + 1] - self.f[0];
        }
        let dual = d.clone().try_inverse()?;
        let grad = &dual * &df;
        if grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        let dist = (0..n).map(|j| d.row(j).norm()).collect();
        let sigma = (0..n).map(|j| 1.0 / dual.column(j).norm()).collect();
        Some(Model {
            grad,
            dual,
            dist,
            sigma,
        })
    }
}

/// Coordinate simplex around `x0`, stepping inward at box faces.
fn coordinate_vertices(x0: &[f64], rho: f64, p: &Scaled) -> Vec<Vec<f64>> {
    let n = x0.len();
    let mut v = vec![x0.to_vec()];
    for i in 0..n {
        let mut y = x0.to_vec();
        let up = p.hi(i) - x0[i];
        let down = x0[i] - p.lo(i);
        y[i] += if up >= rho || up >= down {
            rho.min(up)
        } else {
            -rho.min(down)
        };
        v.push(y);
    }
    v
}

/// Minimizer of `g·(y - x0)` over `|y - x0| <= ρ` and the box, i.e.
/// `y_i = clamp(x0_i - t g_i)` with `t` fixed by the radius. The flag is
/// set when the box, not the radius, limits the step.
fn trust_point(g: &DVector<f64>, rho: f64, x0: &[f64], p: &Scaled) -> (Vec<f64>, bool) {
    let n = x0.len();
    let at = |t: f64| -> Vec<f64> {
        (0..n)
            .map(|i| (x0[i] - t * g[i]).clamp(p.lo(i), p.hi(i)))
            .collect()
    };
    let norm = |y: &[f64]| {
        y.iter()
            .zip(x0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let corner: Vec<f64> = (0..n)
        .map(|i| match g[i].partial_cmp(&0.0) {
            Some(core::cmp::Ordering::Greater) => p.lo(i),
            Some(core::cmp::Ordering::Less) => p.hi(i),
            _ => x0[i],
        })
        .collect();
    if norm(&corner) <= rho {
        return (corner, true);
    }
    let mut hi = rho / g.norm();
    while norm(&at(hi)) < rho {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if norm(&at(mid)) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (at(lo), false)
}

pub(super) fn minimize(
    cost: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    p: &Scaled,
    cfg: &OptimizerConfig,
) -> Minimum {
    let n = p.dim();
    let mut t = Tracked::new(cost, p);
    let y0 = p.to_scaled(x0);
    if n == 0 {
        let f = t.eval(&y0);
        return t.finish(&y0, f, true);
    }
    let max = cfg.max_evals;
    let mut rho = cfg.rho_begin;
    let mut delta = rho;
    let delta_max = MAX_EXPANSION * cfg.rho_begin;

    let mut s = Simplex {
        v: Vec::new(),
        f: Vec::new(),
    };
    for y in coordinate_vertices(&y0, rho, p) {
        if t.evals() >= max {
            break;
        }
        s.f.push(t.eval(&y));
        s.v.push(y);
    }
    if s.v.len() < n + 1 {
        s.best_first();
        return t.finish(&s.v[0], s.f[0], false);
    }

    let mut repair = false;
    let mut level_best = f64::INFINITY;
    let mut stalled = 0;
    let converged = loop {
        s.best_first();
        if t.evals() >= max {
            break false;
        }
        let model = match s.model() {
            Some(m) => m,
            None => {
                // Degenerate simplex: rebuild around the best vertex.
                let base = s.v[0].clone();
                let f0 = s.f[0];
                let vs = coordinate_vertices(&base, rho, p);
                s.v = vec![base];
                s.f = vec![f0];
                for y in vs.into_iter().skip(1) {
                    if t.evals() >= max {
                        break;
                    }
                    s.f.push(t.eval(&y));
                    s.v.push(y);
                }
                if s.v.len() < n + 1 {
                    break false;
                }
                continue;
            }
        };
        let acceptable = model.dist.iter().all(|&d| d <= BETA * delta)
            && model.sigma.iter().all(|&sg| sg >= ALPHA * delta);

        if !repair {
            let gn = model.grad.norm();
            let (y, limited) = if gn > 0.0 {
                trust_point(&model.grad, delta, &s.v[0], p)
            } else {
                (s.v[0].clone(), false)
            };
            let step: Vec<f64> = y.iter().zip(&s.v[0]).map(|(a, b)| a - b).collect();
            let sn = step.iter().map(|v| v * v).sum::<f64>().sqrt();
            if sn == 0.0 || (sn < 0.5 * delta && !limited) {
                if delta > rho {
                    delta = rho;
                } else {
                    repair = true;
                }
                continue;
            }
            let fy = t.eval(&y);
            let pred = -model.grad.dot(&DVector::from_column_slice(&step));
            let actual = s.f[0] - fy;

            // Barycentric weights of the trial point.
            let sv = DVector::from_column_slice(&step);
            let w: Vec<f64> = (0..n).map(|j| model.dual.column(j).dot(&sv)).collect();
            let w0 = 1.0 - w.iter().sum::<f64>();
            let far = |j: usize| {
                let d = s.v[j]
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                (d / delta).max(1.0).powi(2)
            };
            let mut drop = None;
            let mut score = 0.0;
            if fy < s.f[0] {
                score = w0.abs() * far(0);
                drop = Some(0);
            }
            for j in 0..n {
                let sc = w[j].abs() * far(j + 1);
                if sc > score {
                    score = sc;
                    drop = Some(j + 1);
                }
            }
            if let Some(j) = drop {
                s.v[j] = y;
                s.f[j] = fy;
            }
            let ratio = actual / pred;
            delta = if !(ratio > POOR_RATIO) {
                0.5 * delta
            } else if ratio <= GOOD_RATIO {
                (0.5 * delta).max(sn)
            } else {
                (0.5 * delta).max(2.0 * sn).min(delta_max)
            };
            if delta <= 1.5 * rho {
                delta = rho;
            }
            if !(ratio > POOR_RATIO) {
                repair = sn <= rho || delta == rho;
            }
            continue;
        }

        repair = false;
        if !acceptable {
            // Replace the farthest vertex, or else the flattest one.
            let j = {
                let (mut jf, mut df) = (0, 0.0);
                for (j, &d) in model.dist.iter().enumerate() {
                    if d > df {
                        jf = j;
                        df = d;
                    }
                }
                if df > BETA * delta {
                    jf
                } else {
                    let mut js = 0;
                    for (j, &sg) in model.sigma.iter().enumerate() {
                        if sg < model.sigma[js] {
                            js = j;
                        }
                    }
                    js
                }
            };
            let dir = model.dual.column(j);
            let dn = dir.norm();
            let gd = model.grad.dot(&dir);
            let sign = if gd > 0.0 { -1.0 } else { 1.0 };
            let candidate = |sg: f64| -> Vec<f64> {
                s.v[0]
                    .iter()
                    .zip(dir.iter())
                    .map(|(a, d)| a + sg * GAMMA * delta * d / dn)
                    .collect()
            };
            let inside = |y: &[f64]| (0..n).all(|i| y[i] >= p.lo(i) && y[i] <= p.hi(i));
            let mut y = candidate(sign);
            if !inside(&y) {
                let other = candidate(-sign);
                y = if inside(&other) { other } else { y };
                p.clip(&mut y);
            }
            let fy = t.eval(&y);
            s.v[j + 1] = y;
            s.f[j + 1] = fy;
            continue;
        }

        if delta > rho {
            delta = rho;
            continue;
        }
        if rho <= cfg.rho_end {
            break true;
        }
        let fb = s.f[0];
        if level_best.is_finite() && level_best - fb <= cfg.convergence_tol * fb.abs().max(1.0) {
            stalled += 1;
            if stalled >= STALL_LEVELS {
                break true;
            }
        } else {
            stalled = 0;
        }
        level_best = fb;
        rho = (0.5 * rho).max(cfg.rho_end);
        delta = rho;
    };
    s.best_first();
    let (y, f) = (s.v[0].clone(), s.f[0]);
    t.finish(&y, f, converged)
}
