//! CSV result tables.
//!
//! Every table starts with a `schema_version` column. Columns of
//! [`ResultRow`] (run and sweep tables) and [`BaselineRow`] are the
//! documented interface for downstream plotting; new columns are only ever
//! appended, and removing or renaming one bumps [`CSV_SCHEMA_VERSION`].

use std::fs::OpenOptions;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::manifest::{io, RunRecord};

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// One optimized run, standalone or as a sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    /// `run` or `sweep`.
    pub kind: String,
    /// Sweep axis name (`over_N`, `over_d`, `over_kappa`, `over_ubound`).
    pub axis: Option<String>,
    /// Axis value of this point.
    pub value: Option<f64>,
    pub ansatz: String,
    pub photons: usize,
    pub depth: usize,
    pub input_state: String,
    pub kappa_tilde: f64,
    pub u_bound: Option<f64>,
    pub seed: u64,
    pub qfi: Option<f64>,
    pub cfi: Option<f64>,
    pub inv_qfi: Option<f64>,
    pub inv_cfi: Option<f64>,
    pub qfi_exact: Option<f64>,
    /// Fitted exponent of `1/qfi ∝ N^-beta` over this and all earlier
    /// successful rows; only on `over_N` sweeps with three or more points.
    pub beta: Option<f64>,
    pub evals: Option<usize>,
    pub converged: Option<bool>,
    pub warm_started: bool,
    pub fell_back: bool,
    /// `;`-separated: `not_converged`, `fell_back`, `failed`.
    pub flags: String,
    /// Empty unless timing was requested.
    pub wall_time_s: Option<f64>,
    /// Manifest path relative to the output directory.
    pub manifest: Option<String>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn from_record(record: &RunRecord, manifest: &str) -> Self {
        let e = &record.config.experiment;
        let sweep = record.sweep.as_ref();
        let mut flags = record.flags.clone();
        if sweep.is_some_and(|s| s.fell_back) {
            flags.push("fell_back".into());
        }
        ResultRow {
            schema_version: CSV_SCHEMA_VERSION,
            kind: if sweep.is_some() { "sweep" } else { "run" }.into(),
            axis: sweep.map(|s| s.axis.clone()),
            value: sweep.map(|s| s.value),
            ansatz: name_of(&e.ansatz),
            photons: e.photons,
            depth: e.depth,
            input_state: name_of(&e.input_state),
            kappa_tilde: record.config.noise.kappa_tilde,
            u_bound: e.u_bound,
            seed: record.seed,
            qfi: Some(record.qfi),
            cfi: Some(record.cfi),
            inv_qfi: inverse(record.qfi),
            inv_cfi: inverse(record.cfi),
            qfi_exact: Some(record.qfi_exact),
            beta: None,
            evals: Some(record.evals),
            converged: Some(record.converged),
            warm_started: sweep.is_some_and(|s| s.warm_started),
            fell_back: sweep.is_some_and(|s| s.fell_back),
            flags: flags.join(";"),
            wall_time_s: None,
            manifest: Some(manifest.to_string()),
            error: None,
        }
    }
}

/// `1/x`, empty for non-positive information.
pub fn inverse(x: f64) -> Option<f64> {
    (x > 0.0).then(|| 1.0 / x)
}

/// Lowercase serde name of a config enum.
pub(crate) fn name_of<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Un-optimized benchmark states at one photon number. Odd `N` leaves the
/// twin-Fock and NOON cells empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub schema_version: u32,
    #[serde(rename = "N")]
    pub photons: usize,
    pub kappa_tilde: f64,
    pub squeezing_db: f64,
    pub qfi_coherent: Option<f64>,
    pub inv_qfi_coherent: Option<f64>,
    pub cfi_coherent: Option<f64>,
    pub inv_cfi_coherent: Option<f64>,
    pub qfi_squeezed: Option<f64>,
    pub inv_qfi_squeezed: Option<f64>,
    pub cfi_squeezed: Option<f64>,
    pub inv_cfi_squeezed: Option<f64>,
    pub qfi_twin_fock: Option<f64>,
    pub inv_qfi_twin_fock: Option<f64>,
    pub cfi_twin_fock: Option<f64>,
    pub inv_cfi_twin_fock: Option<f64>,
    pub qfi_noon: Option<f64>,
    pub inv_qfi_noon: Option<f64>,
    pub cfi_noon: Option<f64>,
    pub inv_cfi_noon: Option<f64>,
}

/// Appends rows to `path`, writing the header only into a new or empty file.
pub fn append_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io(path, e))?;
    let empty = file.metadata().map_err(|e| io(path, e))?.len() == 0;
    let mut w = csv::WriterBuilder::new()
        .has_headers(empty)
        .from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| io(path, e))?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
