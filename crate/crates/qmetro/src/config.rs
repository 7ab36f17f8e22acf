//! Experiment configuration files.
//!
//! The format is TOML with one table per module. Only `[experiment]` and
//! its `ansatz`, `photons` and `depth` keys are required; everything else
//! has a default. See `configs/kerr_n6.toml` for a complete file.

use std::f64::consts::FRAC_PI_3;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qmetro_core::circuits::AnsatzKind;
use qmetro_core::metrics::{EncodingPoint, Readout};
use qmetro_core::noise::NoiseConfig;
use qmetro_core::optimize::{Algorithm, Experiment, InputState, OptimizerConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub encoding: EncodingSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzName {
    Emitter,
    Kerr,
    KerrFixedU,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputName {
    #[default]
    Coherent,
    Squeezed,
    TwinFock,
    Noon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutName {
    #[default]
    PhotonsOnly,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    #[default]
    CobylaLike,
    NelderMeadPenalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub ansatz: AnsatzName,
    /// Frozen Kerr strength for `kerr_fixed_u`; defaults to 2π.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_u: Option<f64>,
    pub photons: usize,
    pub depth: usize,
    #[serde(default)]
    pub input_state: InputName,
    #[serde(default = "default_squeezing_db")]
    pub squeezing_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default)]
    pub readout: ReadoutName,
}

fn default_squeezing_db() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingSection {
    #[serde(default = "default_phi")]
    pub phi: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_phi() -> f64 {
    FRAC_PI_3
}

fn default_delta() -> f64 {
    1e-2
}

impl Default for EncodingSection {
    fn default() -> Self {
        EncodingSection {
            phi: default_phi(),
            delta: default_delta(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub kappa_tilde: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub algorithm: AlgorithmName,
    pub max_evals: usize,
    pub init_scale: f64,
    pub seed: u64,
    pub convergence_tol: f64,
    pub restarts: usize,
    pub rho_begin: f64,
    pub rho_end: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let c = OptimizerConfig::default();
        OptimizerSection {
            algorithm: AlgorithmName::CobylaLike,
            max_evals: c.max_evals,
            init_scale: c.init_scale,
            seed: c.rng_seed,
            convergence_tol: c.convergence_tol,
            restarts: c.restarts,
            rho_begin: c.rho_begin,
            rho_end: c.rho_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Record wall-clock times; off by default so reruns are byte-identical.
    pub timing: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("results"),
            timing: false,
        }
    }
}

impl Config {
    /// Parses and validates `source`; `origin` names it in error messages.
    pub fn parse(source: &str, origin: &str) -> Result<Config> {
        let config: Config = toml::from_str(source).map_err(|e| CliError::Config {
            origin: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })?;
        config.validate_with(source, origin)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let source = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Config::parse(&source, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Validates without a source text for line lookup.
    pub fn validate(&self) -> Result<()> {
        self.validate_with("", "<config>")
    }

    fn validate_with(&self, source: &str, origin: &str) -> Result<()> {
        let fail = |section: &str, key: &str, message: String| {
            let line = locate(source, section, key);
            let at = line.map(|l| format!(", line {l}")).unwrap_or_default();
            Err(CliError::Config {
                origin: origin.to_string(),
                message: format!("{section}.{key}{at}: {message}"),
            })
        };
        let e = &self.experiment;
        if e.photons == 0 {
            return fail("experiment", "photons", "must be at least 1".into());
        }
        if e.depth == 0 {
            return fail("experiment", "depth", "must be at least 1".into());
        }
        if matches!(e.input_state, InputName::TwinFock | InputName::Noon) && e.photons % 2 == 1 {
            return fail(
                "experiment",
                "photons",
                format!("must be even for input_state {:?}", e.input_state),
            );
        }
        if e.fixed_u.is_some() && e.ansatz != AnsatzName::KerrFixedU {
            return fail(
                "experiment",
                "fixed_u",
                "only applies to ansatz = \"kerr_fixed_u\"".into(),
            );
        }
        if !(e.squeezing_db >= 0.0 && e.squeezing_db.is_finite()) {
            return fail(
                "experiment",
                "squeezing_db",
                "must be a non-negative number".into(),
            );
        }
        if let Some(b) = e.u_bound {
            if !(b > 0.0 && b.is_finite()) {
                return fail("experiment", "u_bound", "must be positive".into());
            }
        }
        if let Some(t) = e.truncation {
            if t < e.photons {
                return fail(
                    "experiment",
                    "truncation",
                    format!("must be at least photons = {}", e.photons),
                );
            }
        }
        if !self.encoding.phi.is_finite() {
            return fail("encoding", "phi", "must be finite".into());
        }
        if !(self.encoding.delta > 0.0 && self.encoding.delta.is_finite()) {
            return fail("encoding", "delta", "must be positive".into());
        }
        if !(self.noise.kappa_tilde >= 0.0 && self.noise.kappa_tilde.is_finite()) {
            return fail("noise", "kappa_tilde", "must be non-negative".into());
        }
        let o = &self.optimizer;
        if o.restarts == 0 {
            return fail("optimizer", "restarts", "must be at least 1".into());
        }
        if !(o.init_scale > 0.0 && o.init_scale.is_finite()) {
            return fail("optimizer", "init_scale", "must be positive".into());
        }
        if !(o.convergence_tol > 0.0) {
            return fail("optimizer", "convergence_tol", "must be positive".into());
        }
        if !(o.rho_end > 0.0 && o.rho_end < o.rho_begin && o.rho_begin.is_finite()) {
            return fail(
                "optimizer",
                "rho_end",
                "must satisfy 0 < rho_end < rho_begin".into(),
            );
        }
        let experiment = self.experiment();
        let count = experiment.spec().map_err(CliError::Core)?.param_count();
        if o.max_evals < 10 * count.max(1) {
            return fail(
                "optimizer",
                "max_evals",
                format!(
                    "must be at least {} for {count} parameters",
                    10 * count.max(1)
                ),
            );
        }
        experiment.validate().map_err(|err| CliError::Config {
            origin: origin.to_string(),
            message: err.to_string(),
        })
    }

    pub fn experiment(&self) -> Experiment {
        let e = &self.experiment;
        let ansatz = match e.ansatz {
            AnsatzName::Emitter => AnsatzKind::Emitter,
            AnsatzName::Kerr => AnsatzKind::Kerr,
            AnsatzName::KerrFixedU => e
                .fixed_u
                .map(AnsatzKind::KerrFixedU)
                .unwrap_or(AnsatzKind::FIXED_BASELINE),
        };
        let o = &self.optimizer;
        Experiment {
            ansatz,
            photons: e.photons,
            depth: e.depth,
            input: match e.input_state {
                InputName::Coherent => InputState::Coherent,
                InputName::Squeezed => InputState::Squeezed { db: e.squeezing_db },
                InputName::TwinFock => InputState::TwinFock,
                InputName::Noon => InputState::Noon,
            },
            noise: NoiseConfig::new(self.noise.kappa_tilde).unwrap_or(NoiseConfig::noiseless()),
            point: EncodingPoint {
                phi: self.encoding.phi,
                delta: self.encoding.delta,
            },
            u_bound: e.u_bound,
            truncation: e.truncation,
            readout: match e.readout {
                ReadoutName::PhotonsOnly => Readout::PhotonsOnly,
                ReadoutName::Joint => Readout::Joint,
            },
            optimizer: OptimizerConfig {
                algorithm: match o.algorithm {
                    AlgorithmName::CobylaLike => Algorithm::CobylaLike,
                    AlgorithmName::NelderMeadPenalized => Algorithm::NelderMeadPenalized,
                },
                max_evals: o.max_evals,
                init_scale: o.init_scale,
                rng_seed: o.seed,
                convergence_tol: o.convergence_tol,
                restarts: o.restarts,
                rho_begin: o.rho_begin,
                rho_end: o.rho_end,
            },
        }
    }

    /// Inverse of [`Config::experiment`], keeping this config's output table.
    pub fn with_experiment(&self, x: &Experiment) -> Config {
        let mut c = self.clone();
        let e = &mut c.experiment;
        (e.ansatz, e.fixed_u) = match x.ansatz {
            AnsatzKind::Emitter => (AnsatzName::Emitter, None),
            AnsatzKind::Kerr => (AnsatzName::Kerr, None),
            AnsatzKind::KerrFixedU(u) => (AnsatzName::KerrFixedU, Some(u)),
        };
        e.photons = x.photons;
        e.depth = x.depth;
        e.input_state = match x.input {
            InputState::Coherent => InputName::Coherent,
            InputState::Squeezed { db } => {
                e.squeezing_db = db;
                InputName::Squeezed
            }
            InputState::TwinFock => InputName::TwinFock,
            InputState::Noon => InputName::Noon,
        };
        e.u_bound = x.u_bound;
        e.truncation = x.truncation;
        e.readout = match x.readout {
            Readout::PhotonsOnly => ReadoutName::PhotonsOnly,
            Readout::Joint => ReadoutName::Joint,
        };
        c.encoding = EncodingSection {
            phi: x.point.phi,
            delta: x.point.delta,
        };
        c.noise.kappa_tilde = x.noise.kappa_tilde();
        let o = &x.optimizer;
        c.optimizer = OptimizerSection {
            algorithm: match o.algorithm {
                Algorithm::CobylaLike => AlgorithmName::CobylaLike,
                Algorithm::NelderMeadPenalized => AlgorithmName::NelderMeadPenalized,
            },
            max_evals: o.max_evals,
            init_scale: o.init_scale,
            seed: o.rng_seed,
            convergence_tol: o.convergence_tol,
            restarts: o.restarts,
            rho_begin: o.rho_begin,
            rho_end: o.rho_end,
        };
        c
    }
}

/// 1-based line of `key` inside `[section]`, if it appears in `source`.
fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current != section {
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            if k.trim() == key {
                return Some(i + 1);
            }
        }
    }
    header
}
