//! The `run`, `sweep`, `baselines` and `diagnose` subcommands.

use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use serde::Serialize;

use qmetro_core::circuits::AnsatzKind;
use qmetro_core::diagnostics::fit_scaling;
use qmetro_core::optimize::{
    run_two_stage_with, warm_start_sweep, Evaluator, Experiment, InputState, SweepAxis, WarmStart,
};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::executor::Pool;
use crate::manifest::{self, io, RecordKind, ReportDoc, RunRecord, SweepInfo};
use crate::results::{append_rows, inverse, BaselineRow, ResultRow, CSV_SCHEMA_VERSION};

pub const RUNS_CSV: &str = "runs.csv";
pub const BASELINES_CSV: &str = "baselines.csv";

/// Overrides shared by the subcommands.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub timing: bool,
}

impl Options {
    fn apply(&self, config: &Config) -> Config {
        let mut c = config.clone();
        if let Some(out) = &self.out {
            c.output.dir = out.clone();
        }
        if let Some(seed) = self.seed {
            c.optimizer.seed = seed;
        }
        c.output.timing |= self.timing;
        c
    }
}

/// Hash of everything but the `[output]` section, so the tag names the
/// computation and not where it was written.
fn config_tag(config: &Config) -> String {
    let mut config = config.clone();
    config.output = Default::default();
    let value = serde_json::to_value(&config).expect("configuration serializes");
    manifest::checksum(&value)[..16].to_string()
}

pub fn sweep_csv_name(axis: SweepAxis) -> String {
    format!("sweep_{}.csv", axis.name())
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub row: ResultRow,
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

/// Optimizes one configuration, writes its manifest and appends a row to
/// `runs.csv`.
pub fn cmd_run(config: &Config, options: &Options) -> Result<RunOutput> {
    let config = options.apply(config);
    config.validate()?;
    let pool = Pool::new(options.workers)?;
    let out = config.output.dir.clone();
    let start = Instant::now();
    let result = run_two_stage_with(&config.experiment(), &WarmStart::default(), &pool)?;
    let elapsed = start.elapsed().as_secs_f64();
    let record = RunRecord::from_result(RecordKind::Run, &config, &result)?;
    if !record.converged {
        log::warn!("optimizer budget exhausted before convergence; manifest flagged");
    }
    let name = format!("manifests/run-{}.json", config_tag(&config));
    let manifest = out.join(&name);
    manifest::write(&manifest, &record)?;
    let mut row = ResultRow::from_record(&record, &name);
    if config.output.timing {
        row.wall_time_s = Some(elapsed);
    }
    let csv = out.join(RUNS_CSV);
    append_rows(&csv, std::slice::from_ref(&row))?;
    Ok(RunOutput {
        record,
        row,
        csv,
        manifest,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub csv: PathBuf,
}

/// Runs a warm-started chain along `axis`. Rows stream to a writer thread
/// that owns the CSV file; a failed point is flagged and the chain goes on.
pub fn cmd_sweep(
    config: &Config,
    axis: SweepAxis,
    grid: &[f64],
    options: &Options,
) -> Result<SweepOutput> {
    let config = options.apply(config);
    config.validate()?;
    let pool = Pool::new(options.workers)?;
    let template = config.experiment();
    let out = config.output.dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| io(&out, e))?;
    let csv = out.join(sweep_csv_name(axis));
    let tag = config_tag(&config);
    let chain = warm_start_sweep(axis, grid, &template, &pool)?;

    let (tx, rx) = mpsc::channel::<ResultRow>();
    let path = csv.clone();
    let writer = thread::spawn(move || -> Result<()> {
        let mut w = csv::Writer::from_path(&path)?;
        for row in rx {
            w.serialize(row)?;
            w.flush().map_err(|e| io(&path, e))?;
        }
        Ok(())
    });

    let mut rows = Vec::new();
    let mut fit_points = Vec::new();
    let mut start = Instant::now();
    for (index, point) in chain.enumerate() {
        let elapsed = start.elapsed().as_secs_f64();
        let info = SweepInfo {
            axis: axis.name().to_string(),
            value: point.value,
            index,
            warm_started: point.warm_started,
            fell_back: point.fell_back,
        };
        let mut row = match point.outcome {
            Ok(result) => {
                let name = format!("manifests/sweep-{}-{tag}-{index:03}.json", axis.name());
                let mut record = RunRecord::from_result(RecordKind::Sweep, &config, &result)?;
                record.sweep = Some(info);
                manifest::write(&out.join(&name), &record)?;
                let mut row = ResultRow::from_record(&record, &name);
                if axis == SweepAxis::Photons && record.qfi > 0.0 {
                    fit_points.push((record.config.experiment.photons as f64, 1.0 / record.qfi));
                    if fit_points.len() >= 3 {
                        row.beta = fit_scaling(&fit_points).ok().map(|f| f.beta);
                    }
                }
                row
            }
            Err(err) => {
                log::warn!("{} = {}: {err}", axis.name(), point.value);
                failed_row(&config, &template, axis, info, &err.to_string())
            }
        };
        if config.output.timing {
            row.wall_time_s = Some(elapsed);
        }
        rows.push(row.clone());
        if tx.send(row).is_err() {
            break;
        }
        start = Instant::now();
    }
    drop(tx);
    writer
        .join()
        .map_err(|_| CliError::Grid("CSV writer thread panicked".into()))??;
    Ok(SweepOutput { rows, csv })
}

fn failed_row(
    config: &Config,
    template: &Experiment,
    axis: SweepAxis,
    info: SweepInfo,
    error: &str,
) -> ResultRow {
    let experiment = axis
        .apply(template, info.value)
        .unwrap_or_else(|_| template.clone());
    let c = config.with_experiment(&experiment);
    let e = &c.experiment;
    ResultRow {
        schema_version: CSV_SCHEMA_VERSION,
        kind: "sweep".into(),
        axis: Some(info.axis),
        value: Some(info.value),
        ansatz: crate::results::name_of(&e.ansatz),
        photons: e.photons,
        depth: e.depth,
        input_state: crate::results::name_of(&e.input_state),
        kappa_tilde: c.noise.kappa_tilde,
        u_bound: e.u_bound,
        seed: c.optimizer.seed,
        qfi: None,
        cfi: None,
        inv_qfi: None,
        inv_cfi: None,
        qfi_exact: None,
        beta: None,
        evals: None,
        converged: None,
        warm_started: info.warm_started,
        fell_back: info.fell_back,
        flags: "failed".into(),
        wall_time_s: None,
        manifest: None,
        error: Some(error.to_string()),
    }
}

#[derive(Debug, Clone)]
pub struct BaselinesOutput {
    pub rows: Vec<BaselineRow>,
    pub csv: PathBuf,
}

/// Benchmark input states without any preparation circuit.
pub fn baseline_inputs(squeezing_db: f64) -> [InputState; 4] {
    [
        InputState::Coherent,
        InputState::Squeezed { db: squeezing_db },
        InputState::TwinFock,
        InputState::Noon,
    ]
}

/// QFI (exact) and photon-counting CFI of the benchmark states over the
/// photon-number grid, with one manifest per state and `N`.
pub fn cmd_baselines(
    config: &Config,
    photons: &[f64],
    options: &Options,
) -> Result<BaselinesOutput> {
    let config = options.apply(config);
    config.validate()?;
    let out = config.output.dir.clone();
    let db = config.experiment.squeezing_db;
    let mut rows = Vec::new();
    for &n in photons {
        if !(n >= 1.0 && n.fract() == 0.0) {
            return Err(CliError::Grid(format!(
                "photon numbers must be positive integers, got {n}"
            )));
        }
        let n = n as usize;
        let mut cells: Vec<Option<(f64, f64)>> = Vec::new();
        for input in baseline_inputs(db) {
            if matches!(input, InputState::TwinFock | InputState::Noon) && n % 2 == 1 {
                cells.push(None);
                continue;
            }
            let mut x = config.experiment();
            x.ansatz = AnsatzKind::Kerr;
            x.depth = 1;
            x.photons = n;
            x.input = input;
            x.u_bound = None;
            x.truncation = None;
            let record = baseline_record(&config, &x)?;
            let name = format!("manifests/baseline-{}-N{n}.json", input.name());
            manifest::write(&out.join(name), &record)?;
            cells.push(Some((record.qfi_exact, record.cfi)));
        }
        let q = |i: usize| cells[i].map(|c| c.0);
        let c = |i: usize| cells[i].map(|c| c.1);
        let inv = |v: Option<f64>| v.and_then(inverse);
        rows.push(BaselineRow {
            schema_version: CSV_SCHEMA_VERSION,
            photons: n,
            kappa_tilde: config.noise.kappa_tilde,
            squeezing_db: db,
            qfi_coherent: q(0),
            inv_qfi_coherent: inv(q(0)),
            cfi_coherent: c(0),
            inv_cfi_coherent: inv(c(0)),
            qfi_squeezed: q(1),
            inv_qfi_squeezed: inv(q(1)),
            cfi_squeezed: c(1),
            inv_cfi_squeezed: inv(c(1)),
            qfi_twin_fock: q(2),
            inv_qfi_twin_fock: inv(q(2)),
            cfi_twin_fock: c(2),
            inv_cfi_twin_fock: inv(c(2)),
            qfi_noon: q(3),
            inv_qfi_noon: inv(q(3)),
            cfi_noon: c(3),
            inv_cfi_noon: inv(c(3)),
        });
    }
    let csv = out.join(BASELINES_CSV);
    write_rows(&csv, &rows)?;
    Ok(BaselinesOutput { rows, csv })
}

fn baseline_record(config: &Config, x: &Experiment) -> Result<RunRecord> {
    let eval = Evaluator::new(x)?;
    let zeros = vec![0.0; eval.spec().param_count()];
    let encoded = eval.encoded(&zeros)?;
    let cfi = -eval.measurement_cost(&zeros, &encoded)?;
    let config = config.with_experiment(x);
    Ok(RunRecord {
        kind: RecordKind::Baseline,
        seed: config.optimizer.seed,
        versions: manifest::Versions::current(),
        sweep: None,
        theta_opt: zeros.clone(),
        mu_opt: zeros.clone(),
        qfi: -eval.preparation_cost(&zeros)?,
        cfi,
        qfi_exact: eval.qfi_exact(&zeros)?,
        cfi_identity: cfi,
        evals: 0,
        converged: true,
        flags: Vec::new(),
        diagnostics: Some(manifest::diagnose(&config, &zeros)?),
        config,
    })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnoseReport {
    pub schema_version: u32,
    pub manifest: String,
    pub kind: RecordKind,
    pub ansatz: String,
    pub photons: usize,
    pub depth: usize,
    pub report: ReportDoc,
}

/// Verifies a manifest, re-prepares its state from the stored parameters
/// and writes the state report to `<out>/<stem>.report.json` when `out` is
/// given.
pub fn cmd_diagnose(path: &Path, out: Option<&Path>) -> Result<(DiagnoseReport, Option<PathBuf>)> {
    let record = manifest::read(path)?;
    let report = DiagnoseReport {
        schema_version: manifest::MANIFEST_SCHEMA_VERSION,
        manifest: path.display().to_string(),
        kind: record.kind,
        ansatz: crate::results::name_of(&record.config.experiment.ansatz),
        photons: record.config.experiment.photons,
        depth: record.config.experiment.depth,
        report: manifest::diagnose(&record.config, &record.theta_opt)?,
    };
    let written = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "manifest".into());
            let target = dir.join(format!("{stem}.report.json"));
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            std::fs::write(&target, text).map_err(|e| io(&target, e))?;
            Some(target)
        }
        None => None,
    };
    Ok((report, written))
}
