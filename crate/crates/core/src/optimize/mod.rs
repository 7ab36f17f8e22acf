//! Derivative-free box-constrained minimization, the two-stage
//! preparation/measurement protocol and warm-started sweeps.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::circuits::Interval;
use crate::error::{Error, Result};

mod cobyla;
mod experiment;
mod nelder_mead;
mod sweep;

pub use experiment::{
    run_two_stage, run_two_stage_with, Evaluator, Experiment, InputState, RestartExecutor,
    RunResult, Sequential, StageResult, WarmStart,
};
pub use sweep::{warm_start_sweep, SweepAxis, SweepPoint, WarmStartSweep};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Linear-model trust region (COBYLA style).
    CobylaLike,
    /// Nelder–Mead with a quadratic penalty outside the box.
    NelderMeadPenalized,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::CobylaLike => "cobyla_like",
            Algorithm::NelderMeadPenalized => "nelder_mead_penalized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    /// Evaluation budget per stage and restart.
    pub max_evals: usize,
    /// Half-width ε of the near-identity initialization box.
    pub init_scale: f64,
    pub rng_seed: u64,
    /// Relative cost change below which the run counts as stalled.
    pub convergence_tol: f64,
    pub restarts: usize,
    /// Initial and final trust radius in scaled variables.
    pub rho_begin: f64,
    pub rho_end: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            algorithm: Algorithm::CobylaLike,
            max_evals: 2000,
            init_scale: 1e-2,
            rng_seed: 0,
            convergence_tol: 1e-6,
            restarts: 3,
            rho_begin: 1.0,
            rho_end: 1e-6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self, param_count: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.init_scale > 0.0) || !self.init_scale.is_finite() {
            return bad("init_scale must be positive");
        }
        if self.max_evals < 10 * param_count.max(1) {
            return Err(Error::InvalidConfig(alloc::format!(
                "max_evals must be at least 10 x parameter count ({})",
                10 * param_count.max(1)
            )));
        }
        if !(self.convergence_tol > 0.0) {
            return bad("convergence_tol must be positive");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.rho_end > 0.0 && self.rho_end < self.rho_begin) || !self.rho_begin.is_finite() {
            return bad("trust radii must satisfy 0 < rho_end < rho_begin");
        }
        Ok(())
    }
}

/// Best point found by a single minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    /// Cost of every evaluation, in order.
    pub history: Vec<f64>,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `cost` from `x0` inside `bounds` (`None` is unbounded).
///
/// Every evaluated point lies inside the box and the returned point is the
/// best one seen.
pub fn minimize(
    cost: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    bounds: &[Option<Interval>],
    config: &OptimizerConfig,
) -> Result<Minimum> {
    if bounds.len() != x0.len() {
        return Err(Error::ParamCount {
            expected: bounds.len(),
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    for b in bounds.iter().flatten() {
        if !(b.width() > 0.0) || !b.lo.is_finite() || !b.hi.is_finite() {
            return Err(Error::InvalidConfig(
                "bounds must have positive finite width".into(),
            ));
        }
    }
    config.validate(x0.len())?;
    let problem = Scaled::new(bounds);
    Ok(match config.algorithm {
        Algorithm::CobylaLike => cobyla::minimize(cost, x0, &problem, config),
        Algorithm::NelderMeadPenalized => nelder_mead::minimize(cost, x0, &problem, config),
    })
}

/// Coordinates rescaled so that every bounded box is at least two units
/// wide, which keeps trust radii meaningful for tight Kerr bounds.
pub(crate) struct Scaled {
    scale: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Scaled {
    fn new(bounds: &[Option<Interval>]) -> Self {
        let mut s = Scaled {
            scale: Vec::with_capacity(bounds.len()),
            lo: Vec::with_capacity(bounds.len()),
            hi: Vec::with_capacity(bounds.len()),
        };
        for b in bounds {
            match b {
                Some(b) => {
                    let k = (b.width() / 2.0).min(1.0);
                    s.scale.push(k);
                    s.lo.push(b.lo / k);
                    s.hi.push(b.hi / k);
                }
                None => {
                    s.scale.push(1.0);
                    s.lo.push(f64::NEG_INFINITY);
                    s.hi.push(f64::INFINITY);
                }
            }
        }
        s
    }

    pub(crate) fn dim(&self) -> usize {
        self.scale.len()
    }

    pub(crate) fn lo(&self, i: usize) -> f64 {
        self.lo[i]
    }

    pub(crate) fn hi(&self, i: usize) -> f64 {
        self.hi[i]
    }

    pub(crate) fn clip(&self, y: &mut [f64]) {
        for (i, v) in y.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }

    pub(crate) fn to_scaled(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().zip(&self.scale).map(|(v, k)| v / k).collect();
        self.clip(&mut y);
        y
    }

    /// Original coordinates, clamped so bounds hold exactly after rescaling.
    pub(crate) fn to_original(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(i, v)| {
                let k = self.scale[i];
                let x = v * k;
                if self.lo[i].is_finite() {
                    x.clamp(self.lo[i] * k, self.hi[i] * k)
                } else {
                    x
                }
            })
            .collect()
    }
}

/// Cost wrapper shared by the algorithms: evaluates in original
/// coordinates, records history and replaces non-finite values.
pub(crate) struct Tracked<'a> {
    cost: &'a mut dyn FnMut(&[f64]) -> f64,
    problem: &'a Scaled,
    pub(crate) history: Vec<f64>,
}

const NON_FINITE_COST: f64 = 1e30;

impl<'a> Tracked<'a> {
    pub(crate) fn new(cost: &'a mut dyn FnMut(&[f64]) -> f64, problem: &'a Scaled) -> Self {
        Tracked {
            cost,
            problem,
            history: Vec::new(),
        }
    }

    pub(crate) fn eval(&mut self, y: &[f64]) -> f64 {
        let x = self.problem.to_original(y);
        let mut f = (self.cost)(&x);
        if !f.is_finite() {
            f = NON_FINITE_COST;
        }
        self.history.push(f);
        f
    }

    pub(crate) fn evals(&self) -> usize {
        self.history.len()
    }

    pub(crate) fn finish(self, y: &[f64], f: f64, converged: bool) -> Minimum {
        let evals = self.history.len();
        Minimum {
            x: self.problem.to_original(y),
            f,
            history: self.history,
            evals,
            converged,
        }
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one `(stage, restart)` stream of a run seeded with `seed`.
pub fn derive_seed(seed: u64, stage: u64, restart: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stage) ^ restart)
}

/// Near-identity draw: each entry uniform in `[-ε, ε]`, narrowed to fit
/// inside its bound.
pub fn near_identity(bounds: &[Option<Interval>], init_scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bounds
        .iter()
        .map(|b| {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            let x = (2.0 * u - 1.0) * init_scale;
            match b {
                Some(b) => {
                    let centre = b.clamp(0.0);
                    let room = if x < 0.0 {
                        centre - b.lo
                    } else {
                        b.hi - centre
                    };
                    b.clamp(centre + x * init_scale.min(room) / init_scale)
                }
                None => x,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn both() -> [OptimizerConfig; 2] {
        let c = OptimizerConfig::default();
        [
            c,
            OptimizerConfig {
                algorithm: Algorithm::NelderMeadPenalized,
                ..c
            },
        ]
    }

    #[test]
    fn quadratic_minimum() {
        for cfg in both() {
            let mut f = |x: &[f64]| (x[0] - 1.0).powi(2);
            let m = minimize(&mut f, &[0.0], &[None], &cfg).unwrap();
            assert!((m.x[0] - 1.0).abs() < 1e-4, "{:?} {:?}", cfg.algorithm, m.x);
            assert!(m.converged);
        }
    }

    #[test]
    fn active_bound() {
        for cfg in both() {
            let mut f = |x: &[f64]| (x[0] - 1.0).powi(2);
            let b = [Some(Interval::symmetric(0.5))];
            let m = minimize(&mut f, &[0.0], &b, &cfg).unwrap();
            assert_eq!(m.x[0], 0.5, "{:?}", cfg.algorithm);
        }
    }

    #[test]
    fn coupled_quadratic_and_tight_bounds() {
        for cfg in both() {
            let cfg = OptimizerConfig {
                max_evals: 5000,
                convergence_tol: 1e-12,
                ..cfg
            };
            let mut f = |x: &[f64]| {
                let q: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| ((i + 1) as f64 * (v - 1.0)).powi(2))
                    .sum();
                q + (x[0] * x[1] - 1.0).powi(2)
            };
            let m = minimize(&mut f, &[0.0; 6], &[None; 6], &cfg).unwrap();
            assert!(m.f < 1e-8, "{:?} {} {}", cfg.algorithm, m.f, m.evals);

            let b = [Some(Interval::symmetric(1e-4)), None];
            let mut g = |x: &[f64]| (x[0] - 3e-5).powi(2) * 1e8 + (x[1] + 2.0).powi(2);
            let m = minimize(&mut g, &[0.0, 0.0], &b, &cfg).unwrap();
            assert!(
                (m.x[0] - 3e-5).abs() < 1e-6,
                "{:?} {:?}",
                cfg.algorithm,
                m.x
            );
            assert!((m.x[1] + 2.0).abs() < 1e-4);
        }
    }

    #[test]
    fn every_evaluation_respects_bounds() {
        for cfg in both() {
            let cfg = OptimizerConfig {
                convergence_tol: 1e-12,
                ..cfg
            };
            let b = [
                Some(Interval::new(-0.3, 0.2).unwrap()),
                Some(Interval::symmetric(2.0)),
                None,
            ];
            let mut inside = true;
            let mut f = |x: &[f64]| {
                inside &= b[0].unwrap().contains(x[0]) && b[1].unwrap().contains(x[1]);
                (x[0] - 5.0).powi(2) + (x[1] + 5.0).powi(2) + x[2] * x[2]
            };
            let m = minimize(&mut f, &[0.0, 0.0, 1.0], &b, &cfg).unwrap();
            assert!(inside);
            assert_eq!(m.x[0], 0.2);
            assert_eq!(m.x[1], -2.0);
            assert_eq!(m.history.len(), m.evals);
        }
    }

    #[test]
    fn deterministic_histories() {
        for cfg in both() {
            let run = || {
                let mut f = |x: &[f64]| (x[0].sin() + 0.3 * x[1]).powi(2) + 0.1 * x[1].cos();
                minimize(&mut f, &[0.4, -0.2], &[None, None], &cfg).unwrap()
            };
            assert_eq!(run(), run());
        }
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let cfg = OptimizerConfig {
            max_evals: 20,
            ..OptimizerConfig::default()
        };
        let mut f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let m = minimize(&mut f, &[-1.2, 1.0], &[None, None], &cfg).unwrap();
        assert!(!m.converged);
        assert!(m.evals <= 20);
        assert_eq!(m.f, m.history.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn config_validation() {
        let c = OptimizerConfig::default();
        assert!(c.validate(10).is_ok());
        assert!(c.validate(300).is_err());
        assert!(OptimizerConfig {
            init_scale: 0.0,
            ..c
        }
        .validate(1)
        .is_err());
        assert!(OptimizerConfig { restarts: 0, ..c }.validate(1).is_err());
    }

    #[test]
    fn near_identity_draws() {
        let b = vec![
            None,
            Some(Interval::symmetric(1e-4)),
            Some(Interval::new(0.5, 1.0).unwrap()),
        ];
        let x = near_identity(&b, 1e-2, 7);
        assert_eq!(x, near_identity(&b, 1e-2, 7));
        assert_ne!(x, near_identity(&b, 1e-2, 8));
        assert!(x[0].abs() <= 1e-2);
        assert!(x[1].abs() <= 1e-4);
        assert!(x[2] >= 0.5 && x[2] <= 0.51);
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
    }
}
