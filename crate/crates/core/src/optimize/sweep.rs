use alloc::vec::Vec;
#[allow(unused_imports)] // std, when linked, shadows these methods
use num_traits::Float;

use super::experiment::{run_two_stage_with, Experiment, RestartExecutor, RunResult, WarmStart};
use super::{derive_seed, near_identity};
use crate::error::{Error, Result};
use crate::noise::NoiseConfig;

/// Quantity varied along a warm-started chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Photons,
    Depth,
    Kappa,
    UBound,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 4] = [
        SweepAxis::Photons,
        SweepAxis::Depth,
        SweepAxis::Kappa,
        SweepAxis::UBound,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Photons => "over_N",
            SweepAxis::Depth => "over_d",
            SweepAxis::Kappa => "over_kappa",
            SweepAxis::UBound => "over_ubound",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    fn integral(&self) -> bool {
        matches!(self, SweepAxis::Photons | SweepAxis::Depth)
    }

    /// `template` with the swept field set to `value`.
    pub fn apply(&self, template: &Experiment, value: f64) -> Result<Experiment> {
        if self.integral() && (value.fract() != 0.0 || value < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "{} needs positive integer grid values, got {value}",
                self.name()
            )));
        }
        let mut e = template.clone();
        match self {
            SweepAxis::Photons => e.photons = value as usize,
            SweepAxis::Depth => e.depth = value as usize,
            SweepAxis::Kappa => e.noise = NoiseConfig::new(value)?,
            SweepAxis::UBound => e.u_bound = Some(value),
        }
        e.validate()?;
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub value: f64,
    pub outcome: Result<RunResult>,
    /// Whether the point started from the previous optimum.
    pub warm_started: bool,
    /// Whether the warm start failed and a fresh initialization was used.
    pub fell_back: bool,
}

/// Lazily evaluated warm-start chain; each item is one grid point.
pub struct WarmStartSweep<'a, E> {
    axis: SweepAxis,
    grid: Vec<f64>,
    template: Experiment,
    next: usize,
    previous: Option<RunResult>,
    executor: &'a E,
}

/// Validates the grid and sets up the chain.
pub fn warm_start_sweep<'a, E: RestartExecutor>(
    axis: SweepAxis,
    grid: &[f64],
    template: &Experiment,
    executor: &'a E,
) -> Result<WarmStartSweep<'a, E>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    let up = grid.windows(2).all(|w| w[0] < w[1]);
    let down = grid.windows(2).all(|w| w[0] > w[1]);
    if !(up || down) {
        return Err(Error::InvalidConfig(
            "sweep grid must be strictly monotone".into(),
        ));
    }
    for &v in grid {
        axis.apply(template, v)?;
    }
    Ok(WarmStartSweep {
        axis,
        grid: grid.to_vec(),
        template: template.clone(),
        next: 0,
        previous: None,
        executor,
    })
}

impl<E: RestartExecutor> WarmStartSweep<'_, E> {
    /// Warm-starts the first grid point from `previous`, e.g. the end of
    /// another chain.
    pub fn seeded(mut self, previous: RunResult) -> Self {
        self.previous = Some(previous);
        self
    }

    fn warm_start(&self, experiment: &Experiment) -> Result<WarmStart> {
        let Some(prev) = &self.previous else {
            return Ok(WarmStart::default());
        };
        let count = experiment.spec()?.param_count();
        let (theta, mu) = (prev.theta_opt(), prev.mu_opt());
        if theta.len() == count {
            return Ok(WarmStart {
                theta: Some(theta.to_vec()),
                mu: Some(mu.to_vec()),
                theta_incumbent: Some(theta.to_vec()),
            });
        }
        // Depth changed: keep the shared layers, pad new layers near the
        // identity and also offer the exactly zero-padded incumbent.
        let bounds = experiment.bounds()?;
        let keep = theta.len().min(count);
        let cfg = &experiment.optimizer;
        let fresh = near_identity(
            &bounds[keep..],
            cfg.init_scale,
            derive_seed(cfg.rng_seed, 2, experiment.depth as u64),
        );
        let pad = |x: &[f64], tail: &[f64]| {
            let mut v = x[..keep].to_vec();
            v.extend_from_slice(tail);
            v
        };
        let zeros = alloc::vec![0.0; count - keep];
        Ok(WarmStart {
            theta: Some(pad(theta, &fresh)),
            mu: Some(pad(mu, &zeros)),
            theta_incumbent: Some(pad(theta, &zeros)),
        })
    }
}

impl<E: RestartExecutor> Iterator for WarmStartSweep<'_, E> {
    type Item = SweepPoint;

    fn next(&mut self) -> Option<SweepPoint> {
        let value = *self.grid.get(self.next)?;
        self.next += 1;
        let axis = self.axis;
        let experiment = match axis.apply(&self.template, value) {
            Ok(e) => e,
            Err(e) => {
                return Some(SweepPoint {
                    axis,
                    value,
                    outcome: Err(e),
                    warm_started: false,
                    fell_back: false,
                })
            }
        };
        let warm_started = self.previous.is_some();
        let first = self
            .warm_start(&experiment)
            .and_then(|w| run_two_stage_with(&experiment, &w, self.executor));
        let (outcome, fell_back) = match first {
            Ok(r) => (Ok(r), false),
            Err(e) if warm_started => {
                log::warn!(
                    "{} = {value}: warm start failed ({e}); retrying from a fresh initialization",
                    axis.name()
                );
                (
                    run_two_stage_with(&experiment, &WarmStart::default(), self.executor),
                    true,
                )
            }
            Err(e) => (Err(e), false),
        };
        if let Ok(r) = &outcome {
            self.previous = Some(r.clone());
        }
        Some(SweepPoint {
            axis,
            value,
            outcome,
            warm_started,
            fell_back,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::AnsatzKind;
    use crate::optimize::Sequential;

    fn template() -> Experiment {
        let mut e = Experiment::new(AnsatzKind::Kerr, 4, 1);
        e.optimizer.restarts = 1;
        e.optimizer.max_evals = 300;
        e
    }

    #[test]
    fn grids_must_be_monotone_and_valid() {
        let t = template();
        assert!(warm_start_sweep(SweepAxis::Photons, &[4.0, 2.0, 6.0], &t, &Sequential).is_err());
        assert!(warm_start_sweep(SweepAxis::Photons, &[4.0, 4.5], &t, &Sequential).is_err());
        assert!(warm_start_sweep(SweepAxis::Kappa, &[-1.0, 0.0], &t, &Sequential).is_err());
        assert!(warm_start_sweep(SweepAxis::Depth, &[3.0, 2.0, 1.0], &t, &Sequential).is_ok());
        assert_eq!(SweepAxis::from_name("over_ubound"), Some(SweepAxis::UBound));
    }

    #[test]
    fn depth_chain_never_loses_qfi() {
        let t = template();
        let points: Vec<_> = warm_start_sweep(SweepAxis::Depth, &[1.0, 2.0, 3.0], &t, &Sequential)
            .unwrap()
            .collect();
        let qfi: Vec<f64> = points
            .iter()
            .map(|p| p.outcome.as_ref().unwrap().qfi())
            .collect();
        for w in qfi.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-9), "{qfi:?}");
        }
        assert!(!points[0].warm_started && points[1].warm_started);
        assert_eq!(points[2].outcome.as_ref().unwrap().theta_opt().len(), 6);
    }

    #[test]
    fn photon_chain_runs_every_point() {
        let t = template();
        let points: Vec<_> = warm_start_sweep(SweepAxis::Photons, &[2.0, 4.0], &t, &Sequential)
            .unwrap()
            .collect();
        assert_eq!(points.len(), 2);
        assert_eq!(points[1].outcome.as_ref().unwrap().experiment.photons, 4);

        let last = points[1].outcome.clone().unwrap();
        let back: Vec<_> = warm_start_sweep(SweepAxis::Photons, &[3.0], &t, &Sequential)
            .unwrap()
            .seeded(last.clone())
            .collect();
        assert!(back[0].warm_started);
        let r = back[0].outcome.as_ref().unwrap();
        assert_eq!(r.experiment.photons, 3);
        assert_eq!(r.theta_opt().len(), last.theta_opt().len());
    }
}
