//! Per-run manifests: a JSON envelope holding the schema version, the run
//! record and a SHA-256 checksum of the record.
//!
//! The checksum covers the compact JSON encoding of the payload with keys
//! in sorted order, so reformatting the file does not invalidate it but any
//! change to a value does.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use qmetro_core::diagnostics::StateReport;
use qmetro_core::optimize::{Evaluator, RunResult};

use crate::config::Config;
use crate::error::{CliError, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub qmetro: String,
    pub qmetro_core: String,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            qmetro: env!("CARGO_PKG_VERSION").to_string(),
            qmetro_core: qmetro_core::VERSION.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Run,
    Sweep,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepInfo {
    pub axis: String,
    pub value: f64,
    pub index: usize,
    pub warm_started: bool,
    pub fell_back: bool,
}

/// Serializable copy of [`StateReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub entropy_mode1: f64,
    pub purity_mode1: f64,
    pub fidelity_noon: f64,
    pub fidelity_tfs_bs: Option<f64>,
    pub diagonal_mode1: Vec<f64>,
    /// Largest `|value|` per parameter kind.
    pub max_abs_params: BTreeMap<String, f64>,
}

impl From<&StateReport> for ReportDoc {
    fn from(r: &StateReport) -> Self {
        ReportDoc {
            entropy_mode1: r.entropy_mode1,
            purity_mode1: r.purity_mode1,
            fidelity_noon: r.fidelity_noon,
            fidelity_tfs_bs: r.fidelity_tfs_bs,
            diagonal_mode1: r.diagonal_mode1.clone(),
            max_abs_params: r
                .max_abs_params
                .iter()
                .map(|(k, v)| (k.name().to_string(), *v))
                .collect(),
        }
    }
}

/// Everything needed to reproduce and inspect one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub kind: RecordKind,
    pub config: Config,
    pub seed: u64,
    pub versions: Versions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepInfo>,
    pub theta_opt: Vec<f64>,
    pub mu_opt: Vec<f64>,
    /// δ-fidelity QFI at `theta_opt`.
    pub qfi: f64,
    /// CFI at `(theta_opt, mu_opt)`.
    pub cfi: f64,
    pub qfi_exact: f64,
    pub cfi_identity: f64,
    pub evals: usize,
    pub converged: bool,
    pub flags: Vec<String>,
    pub diagnostics: Option<ReportDoc>,
}

impl RunRecord {
    pub fn from_result(kind: RecordKind, config: &Config, result: &RunResult) -> Result<Self> {
        let config = config.with_experiment(&result.experiment);
        let diagnostics = diagnose(&config, result.theta_opt())?;
        let mut flags = Vec::new();
        if !result.converged() {
            flags.push("not_converged".to_string());
        }
        Ok(RunRecord {
            kind,
            seed: config.optimizer.seed,
            config,
            versions: Versions::current(),
            sweep: None,
            theta_opt: result.theta_opt().to_vec(),
            mu_opt: result.mu_opt().to_vec(),
            qfi: result.qfi(),
            cfi: result.cfi(),
            qfi_exact: result.qfi_exact,
            cfi_identity: result.cfi_identity,
            evals: result.eval_count(),
            converged: result.converged(),
            flags,
            diagnostics: Some(diagnostics),
        })
    }

    /// Recomputes `(qfi, cfi)` from the stored configuration and parameters.
    pub fn reevaluate(&self) -> Result<(f64, f64)> {
        let eval = Evaluator::new(&self.config.experiment())?;
        let qfi = -eval.preparation_cost(&self.theta_opt)?;
        let encoded = eval.encoded(&self.theta_opt)?;
        let cfi = -eval.measurement_cost(&self.mu_opt, &encoded)?;
        Ok((qfi, cfi))
    }
}

/// State report of the state prepared by `theta` under `config`.
pub fn diagnose(config: &Config, theta: &[f64]) -> Result<ReportDoc> {
    let experiment = config.experiment();
    let eval = Evaluator::new(&experiment)?;
    let prepared = eval.prepare(theta)?;
    let report = StateReport::new(&prepared, experiment.photons, &eval.spec(), theta)?;
    Ok(ReportDoc::from(&report))
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    schema_version: u32,
    payload: Value,
    checksum: String,
}

/// Hex SHA-256 of the canonical compact encoding of `payload`.
pub fn checksum(payload: &Value) -> String {
    let bytes = serde_json::to_vec(payload).expect("JSON value serializes");
    hex::encode(Sha256::digest(bytes))
}

pub fn to_json(record: &RunRecord) -> Result<String> {
    let payload = serde_json::to_value(record)?;
    let env = Envelope {
        schema_version: MANIFEST_SCHEMA_VERSION,
        checksum: checksum(&payload),
        payload,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str, path: &Path) -> Result<RunRecord> {
    let malformed = |message: String| CliError::Manifest {
        path: path.to_path_buf(),
        message,
    };
    let env: Envelope = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    if env.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(CliError::SchemaVersion {
            found: env.schema_version,
            expected: MANIFEST_SCHEMA_VERSION,
        });
    }
    let computed = checksum(&env.payload);
    if computed != env.checksum {
        return Err(CliError::Checksum {
            path: path.to_path_buf(),
            expected: env.checksum,
            computed,
        });
    }
    let record: RunRecord =
        serde_json::from_value(env.payload).map_err(|e| malformed(e.to_string()))?;
    record
        .config
        .validate()
        .map_err(|e| malformed(e.to_string()))?;
    Ok(record)
}

pub fn write(path: &Path, record: &RunRecord) -> Result<()> {
    let text = to_json(record)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io(path, e))
}

pub fn read(path: &Path) -> Result<RunRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    from_json(&text, path)
}

pub(crate) fn io(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from(path),
        source,
    }
}
