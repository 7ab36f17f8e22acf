use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // std, when linked, shadows these methods
use num_traits::Float;

use num_complex::Complex64;

use super::{derive_seed, minimize, near_identity, Minimum, OptimizerConfig};
use crate::circuits::{AnsatzKind, CircuitSpec, Interval, Optics, ParamVector};
use crate::error::{Error, Result};
use crate::fock::{
    coherent_amplitudes, noon_state, squeezed_coherent_amplitudes, squeezing_from_db,
    twin_fock_state, PureState, SystemLayout,
};
use crate::metrics::{
    bypass_first_beamsplitter, pure_qfi_from_derivative, qfi_sld, EncodedOutput, Encoder,
    EncodingPoint, Readout,
};
use crate::noise::NoiseConfig;

/// State fed to the preparation circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputState {
    /// `|√(N/2)⟩ ⊗ |√(N/2)⟩`.
    Coherent,
    /// Squeezed coherent pair with `α = √(N/2)` and squeezing in dB.
    Squeezed { db: f64 },
    /// `|N/2, N/2⟩`.
    TwinFock,
    /// NOON state delivered straight to the phase gate (first beamsplitter
    /// undone beforehand).
    Noon,
}

impl InputState {
    pub fn name(&self) -> &'static str {
        match self {
            InputState::Coherent => "coherent",
            InputState::Squeezed { .. } => "squeezed",
            InputState::TwinFock => "twin_fock",
            InputState::Noon => "noon",
        }
    }
}

/// Everything that defines one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub ansatz: AnsatzKind,
    /// Mean total photon number `N`.
    pub photons: usize,
    pub depth: usize,
    pub input: InputState,
    pub noise: NoiseConfig,
    pub point: EncodingPoint,
    pub u_bound: Option<f64>,
    /// Cap on the total photon number; `2N` when unset.
    pub truncation: Option<usize>,
    pub readout: Readout,
    pub optimizer: OptimizerConfig,
}

impl Experiment {
    pub fn new(ansatz: AnsatzKind, photons: usize, depth: usize) -> Self {
        Experiment {
            ansatz,
            photons,
            depth,
            input: InputState::Coherent,
            noise: NoiseConfig::noiseless(),
            point: EncodingPoint::default(),
            u_bound: None,
            truncation: None,
            readout: Readout::default(),
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn spec(&self) -> Result<CircuitSpec> {
        CircuitSpec::new(self.ansatz, self.depth)
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.spec()?;
        if self.photons == 0 {
            return Err(Error::InvalidConfig(
                "photon number must be at least 1".into(),
            ));
        }
        if let Some(b) = self.u_bound {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::InvalidConfig(
                    "u_bound must be positive and finite".into(),
                ));
            }
        }
        if let AnsatzKind::KerrFixedU(u) = self.ansatz {
            if !u.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        if let Some(t) = self.truncation {
            if t < self.photons {
                return Err(Error::InvalidConfig(alloc::format!(
                    "truncation {t} is below the photon number {}",
                    self.photons
                )));
            }
        }
        match self.input {
            InputState::TwinFock | InputState::Noon if self.photons % 2 == 1 => {
                return Err(Error::OddPhotonNumber(self.photons));
            }
            InputState::Squeezed { db } if !(db >= 0.0) || !db.is_finite() => {
                return Err(Error::NegativeSqueezing(db));
            }
            _ => {}
        }
        EncodingPoint::new(self.point.phi, self.point.delta)?;
        NoiseConfig::new(self.noise.kappa_tilde())?;
        self.optimizer.validate(spec.param_count())
    }

    /// Capped layout: total photon number at most `truncation` (default `2N`).
    pub fn layout(&self) -> Result<SystemLayout> {
        SystemLayout::capped(
            self.truncation.unwrap_or(2 * self.photons),
            self.ansatz.needs_emitters(),
        )
    }

    pub fn bounds(&self) -> Result<Vec<Option<Interval>>> {
        Ok(self.spec()?.bounds(self.u_bound))
    }

    pub fn input_state(&self) -> Result<PureState> {
        let layout = self.layout()?;
        let t = layout.truncation();
        let alpha = Complex64::new((self.photons as f64 / 2.0).sqrt(), 0.0);
        match self.input {
            InputState::Coherent => {
                let a = coherent_amplitudes(alpha, t);
                PureState::product(layout, &a, &a)
            }
            InputState::Squeezed { db } => {
                let a = squeezed_coherent_amplitudes(alpha, squeezing_from_db(db), t)?;
                PureState::product(layout, &a, &a)
            }
            InputState::TwinFock => twin_fock_state(self.photons, layout),
            InputState::Noon => Ok(bypass_first_beamsplitter(&noon_state(
                self.photons,
                layout,
            )?)),
        }
    }
}

/// Cost functions of one experiment, with the layout, encoder and input
/// state built once.
#[derive(Debug, Clone)]
pub struct Evaluator {
    experiment: Experiment,
    spec: CircuitSpec,
    encoder: Encoder,
    input: PureState,
    bounds: Vec<Option<Interval>>,
}

impl Evaluator {
    pub fn new(experiment: &Experiment) -> Result<Self> {
        experiment.validate()?;
        let layout = experiment.layout()?;
        Ok(Evaluator {
            spec: experiment.spec()?,
            encoder: Encoder::new(layout, experiment.point, experiment.noise)?,
            input: experiment.input_state()?,
            bounds: experiment.bounds()?,
            experiment: experiment.clone(),
        })
    }

    pub fn experiment(&self) -> &Experiment {
        &self.experiment
    }

    pub fn spec(&self) -> CircuitSpec {
        self.spec
    }

    pub fn bounds(&self) -> &[Option<Interval>] {
        &self.bounds
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn optics(&self) -> &Optics {
        self.encoder.optics()
    }

    pub fn input(&self) -> &PureState {
        &self.input
    }

    fn check(&self, params: &[f64]) -> Result<()> {
        ParamVector::with_bounds(params.to_vec(), self.bounds.clone()).map(|_| ())
    }

    /// `U_P(θ)|ψ₀⟩`.
    pub fn prepare(&self, theta: &[f64]) -> Result<PureState> {
        self.check(theta)?;
        let optics = self.optics();
        let circuit = optics.compile(&self.spec, theta)?;
        let mut x = self.input.as_slice().to_vec();
        circuit.apply(optics, &mut x);
        PureState::new(self.input.layout(), x.into())
    }

    /// `-F_Q` of the prepared state through the noisy interferometer.
    pub fn preparation_cost(&self, theta: &[f64]) -> Result<f64> {
        Ok(-self.encoder.qfi_delta(&self.prepare(theta)?)?)
    }

    pub fn encoded(&self, theta: &[f64]) -> Result<EncodedOutput> {
        self.encoder.encode_with_derivative(&self.prepare(theta)?)
    }

    /// `-F_C` of photon counting after `U_M(μ)`.
    pub fn measurement_cost(&self, mu: &[f64], encoded: &EncodedOutput) -> Result<f64> {
        self.check(mu)?;
        let optics = self.optics();
        let circuit = optics.compile(&self.spec, mu)?;
        Ok(-encoded.cfi(optics, Some(&circuit), self.experiment.readout)?)
    }

    /// Exact QFI of the encoded state (pure formula or SLD).
    pub fn qfi_exact(&self, theta: &[f64]) -> Result<f64> {
        match self.encoded(theta)? {
            EncodedOutput::Pure { psi, dpsi } => {
                Ok(pure_qfi_from_derivative(psi.as_slice(), dpsi.as_slice()))
            }
            out => {
                let (rho, drho) = out.to_matrices();
                qfi_sld(&rho, &drho)
            }
        }
    }
}

/// Runs independent restarts; implementations may parallelize.
pub trait RestartExecutor: Sync {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs restarts one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl RestartExecutor for Sequential {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}

/// Starting points carried over from a neighbouring run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmStart {
    /// Start of restart 0 in the preparation stage.
    pub theta: Option<Vec<f64>>,
    /// Start of restart 0 in the measurement stage.
    pub mu: Option<Vec<f64>>,
    /// Extra preparation candidate kept when it beats every restart.
    pub theta_incumbent: Option<Vec<f64>>,
}

/// Outcome of one optimization stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    pub params: Vec<f64>,
    /// Fisher information at `params` (minus the final cost).
    pub value: f64,
    /// Cost history of the winning restart.
    pub history: Vec<f64>,
    /// Evaluations over all restarts.
    pub evals: usize,
    pub converged: bool,
    /// Winning restart, `None` when an incumbent or the identity won.
    pub restart: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub experiment: Experiment,
    pub preparation: StageResult,
    pub measurement: StageResult,
    /// Exact QFI at `theta_opt`, for comparison with the δ estimator.
    pub qfi_exact: f64,
    /// CFI with the identity measurement circuit.
    pub cfi_identity: f64,
}

impl RunResult {
    pub fn theta_opt(&self) -> &[f64] {
        &self.preparation.params
    }

    pub fn mu_opt(&self) -> &[f64] {
        &self.measurement.params
    }

    pub fn qfi(&self) -> f64 {
        self.preparation.value
    }

    pub fn cfi(&self) -> f64 {
        self.measurement.value
    }

    pub fn eval_count(&self) -> usize {
        self.preparation.evals + self.measurement.evals
    }

    pub fn converged(&self) -> bool {
        self.preparation.converged && self.measurement.converged
    }

    /// Preparation history followed by measurement history.
    pub fn cost_history(&self) -> Vec<f64> {
        let mut h = self.preparation.history.clone();
        h.extend_from_slice(&self.measurement.history);
        h
    }
}

fn clamp_into(x: &[f64], bounds: &[Option<Interval>]) -> Result<Vec<f64>> {
    if x.len() != bounds.len() {
        return Err(Error::ParamCount {
            expected: bounds.len(),
            found: x.len(),
        });
    }
    Ok(ParamVector::clamped(x.to_vec(), bounds.to_vec())?.into_values())
}

fn run_stage<E: RestartExecutor>(
    cost: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    bounds: &[Option<Interval>],
    config: &OptimizerConfig,
    stage: u64,
    warm: Option<&[f64]>,
    executor: &E,
) -> Result<StageResult> {
    let warm = warm.map(|w| clamp_into(w, bounds)).transpose()?;
    let runs: Vec<Result<Minimum>> = executor.map(config.restarts, |r| {
        let x0 = match (&warm, r) {
            (Some(w), 0) => w.clone(),
            _ => near_identity(
                bounds,
                config.init_scale,
                derive_seed(config.rng_seed, stage, r as u64),
            ),
        };
        let mut f = |x: &[f64]| {
            cost(x).unwrap_or_else(|e| {
                log::warn!("cost evaluation failed: {e}");
                0.0
            })
        };
        minimize(&mut f, &x0, bounds, config)
    });
    let mut best: Option<(usize, Minimum)> = None;
    let mut evals = 0;
    for (r, m) in runs.into_iter().enumerate() {
        let m = m?;
        evals += m.evals;
        if best.as_ref().map_or(true, |(_, b)| m.f < b.f) {
            best = Some((r, m));
        }
    }
    let (r, m) = best.ok_or_else(|| Error::InvalidConfig("no restarts".into()))?;
    Ok(StageResult {
        params: m.x,
        value: -m.f,
        history: m.history,
        evals,
        converged: m.converged,
        restart: Some(r),
    })
}

/// Keeps `candidate` when its cost beats the stage optimum.
fn offer(stage: &mut StageResult, candidate: Vec<f64>, cost: f64) {
    stage.evals += 1;
    if -cost > stage.value {
        stage.params = candidate;
        stage.value = -cost;
        stage.restart = None;
    }
}

pub fn run_two_stage(experiment: &Experiment) -> Result<RunResult> {
    run_two_stage_with(experiment, &WarmStart::default(), &Sequential)
}

/// Optimizes θ for the QFI, freezes it, then optimizes μ for the CFI.
pub fn run_two_stage_with<E: RestartExecutor>(
    experiment: &Experiment,
    warm: &WarmStart,
    executor: &E,
) -> Result<RunResult> {
    let eval = Evaluator::new(experiment)?;
    let bounds = eval.bounds().to_vec();
    let cfg = &experiment.optimizer;

    let prep_cost = |x: &[f64]| eval.preparation_cost(x);
    let mut preparation = run_stage(&prep_cost, &bounds, cfg, 0, warm.theta.as_deref(), executor)?;
    if let Some(inc) = &warm.theta_incumbent {
        let inc = clamp_into(inc, &bounds)?;
        let c = eval.preparation_cost(&inc)?;
        offer(&mut preparation, inc, c);
    }
    preparation.value = -eval.preparation_cost(&preparation.params)?;

    let encoded = eval.encoded(&preparation.params)?;
    let meas_cost = |x: &[f64]| eval.measurement_cost(x, &encoded);
    let mut measurement = run_stage(&meas_cost, &bounds, cfg, 1, warm.mu.as_deref(), executor)?;
    let zero = vec![0.0; bounds.len()];
    let c0 = eval.measurement_cost(&zero, &encoded)?;
    offer(&mut measurement, zero, c0);

    Ok(RunResult {
        qfi_exact: eval.qfi_exact(&preparation.params)?,
        cfi_identity: -c0,
        experiment: experiment.clone(),
        preparation,
        measurement,
    })
}
