//! Experiment configuration, run orchestration and file output.
//!
//! A [`RunConfig`] is a single JSON document in which every field is optional.
//! [`run`] integrates one scenario and writes `series.csv`, one
//! `snapshot_<t>.csv` per requested time and `run.json`; [`cmd_convergence`]
//! writes `convergence.csv`; [`cmd_fit`] reads a series back and writes
//! `fit.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::collision::CollisionKernel;
use crate::diagnostics::{
    self, detect_phases, downsample_log, fit_decay, ConvergenceRow, DecayFit, DiagnosticsRecord,
    Phase, DEFAULT_FLAT_TOL, DEFAULT_MOMENT_ORDERS,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scenarios::Scenario;
use crate::stepper::{advance, JacobianMode, SolverStats, StepperConfig};

/// Upper bound on the number of rows written to `series.csv`.
pub const MAX_SERIES_ROWS: usize = 5000;

pub const SERIES_FILE: &str = "series.csv";
pub const RUN_FILE: &str = "run.json";
pub const ERROR_FILE: &str = "error.json";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const FIT_FILE: &str = "fit.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// One of [`Scenario::NAMES`], or `"tabulated"` together with `table`.
    pub scenario: String,
    /// Two-column `k,g0` file for the tabulated scenario.
    pub table: Option<PathBuf>,
    #[serde(rename = "L")]
    pub length: f64,
    pub dk: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Unset step bounds resolve to the stepper defaults for `T`.
    pub dt_init: Option<f64>,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub safety: f64,
    pub jacobian: JacobianMode,
    pub moment_orders: Vec<u32>,
    pub snapshot_times: Vec<f64>,
    pub out: PathBuf,
    /// Reserved; the solver is deterministic and draws no random numbers.
    pub seed: u64,
    /// Worker threads for the collision kernel; `1` gives the single-threaded
    /// mode, unset uses the global pool.
    pub threads: Option<usize>,
    pub max_series_rows: usize,
    /// Cell widths of the coarse runs of a convergence study, coarsest first.
    pub dks: Vec<f64>,
    pub dk_ref: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let stepper = StepperConfig::for_final_time(1e4);
        Self {
            scenario: "mollifier".into(),
            table: None,
            length: 30.0,
            dk: 0.5,
            t_final: 1e4,
            rtol: stepper.rtol,
            atol: stepper.atol,
            dt_init: None,
            dt_min: None,
            dt_max: None,
            newton_tol: stepper.newton_tol,
            newton_max_iter: stepper.newton_max_iter,
            safety: stepper.safety,
            jacobian: JacobianMode::Exact,
            moment_orders: DEFAULT_MOMENT_ORDERS.to_vec(),
            snapshot_times: Vec::new(),
            out: PathBuf::from("out"),
            seed: 0,
            threads: None,
            max_series_rows: MAX_SERIES_ROWS,
            dks: vec![0.5, 0.25, 0.125, 0.0625],
            dk_ref: 0.05,
        }
    }
}

impl RunConfig {
    /// Reads a config, accepting either a bare config object or a `run.json`
    /// written by [`run`], whose `config` member is used.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("config") => {
                map.remove("config").expect("checked above")
            }
            other => other,
        };
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scenario(&self) -> Result<Scenario> {
        match (self.scenario.as_str(), &self.table) {
            ("tabulated", Some(path)) => Scenario::from_table_file(path).map_err(|e| match e {
                Error::Input(msg) => Error::Config(msg),
                Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
                other => other,
            }),
            ("tabulated", None) => Err(Error::Config(
                "scenario \"tabulated\" requires a table file".into(),
            )),
            (name, _) => name.parse(),
        }
    }

    /// Stepper settings with unset step bounds filled in from the defaults.
    pub fn stepper(&self) -> StepperConfig {
        let base = StepperConfig::for_final_time(self.t_final);
        let dt_max = self.dt_max.unwrap_or(base.dt_max);
        StepperConfig {
            rtol: self.rtol,
            atol: self.atol,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            dt_init: self.dt_init.unwrap_or(base.dt_init.min(dt_max)),
            dt_min: self.dt_min.unwrap_or(base.dt_min.min(dt_max)),
            dt_max,
            safety: self.safety,
            t_final: self.t_final,
            jacobian_mode: self.jacobian,
        }
    }

    /// Copy with every optional solver field made explicit, as echoed in `run.json`.
    pub fn resolved(&self) -> Self {
        let s = self.stepper();
        Self {
            dt_init: Some(s.dt_init),
            dt_min: Some(s.dt_min),
            dt_max: Some(s.dt_max),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario()?;
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::Config(format!(
                "T must be finite and non-negative, got {}",
                self.t_final
            )));
        }
        Grid::new(self.length, self.dk)?;
        self.stepper().validate()?;
        if let Some(&t) = self
            .snapshot_times
            .iter()
            .find(|&&t| !(0.0..=self.t_final).contains(&t))
        {
            return Err(Error::Config(format!(
                "snapshot time {t} outside [0, {}]",
                self.t_final
            )));
        }
        if self.moment_orders.is_empty() {
            return Err(Error::Config(
                "at least one moment order is required".into(),
            ));
        }
        if self.max_series_rows < 2 {
            return Err(Error::Config("max_series_rows must be at least 2".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    fn in_pool<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(job()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                Ok(pool.install(job))
            }
        }
    }
}

/// Process exit status for an error: 2 for configuration and input problems,
/// 3 for solver aborts, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Input(_) | Error::Json(_) => 2,
        e if e.is_solver_failure() => 3,
        _ => 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotInfo {
    pub requested: f64,
    /// Time of the accepted step actually stored.
    pub t: f64,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
    /// Last accepted time before the failure.
    pub t_reached: Option<f64>,
}

impl ErrorRecord {
    pub fn new(err: &Error, t_reached: Option<f64>) -> Self {
        let kind = format!("{err:?}");
        let kind = kind
            .split(|c: char| !c.is_alphanumeric())
            .next()
            .unwrap_or_default()
            .to_string();
        Self {
            kind,
            message: err.to_string(),
            exit_code: exit_code(err),
            t_reached,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub status: String,
    pub stats: Option<SolverStats>,
    pub wall_time_s: f64,
    pub initial_energy: f64,
    pub final_time: f64,
    pub series_rows: usize,
    pub snapshots: Vec<SnapshotInfo>,
    pub error: Option<ErrorRecord>,
}

/// Everything produced by [`run`]; the files on disk mirror these fields.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    /// Every accepted step, before downsampling.
    pub records: Vec<DiagnosticsRecord>,
}

impl RunOutcome {
    /// `(t, E)` pairs over every accepted step.
    pub fn energy_series(&self) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .map(|r| (r.t, r.energy().unwrap_or(f64::NAN)))
            .collect()
    }

    pub fn error(&self) -> Option<&ErrorRecord> {
        self.report.error.as_ref()
    }
}

/// Runs one simulation and writes its files to `config.out`.
///
/// A solver abort is not an `Err`: the partial series, `run.json` and
/// `error.json` are still written and the failure is reported in the outcome.
/// Configuration and I/O problems are returned as errors before any stepping.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let resolved = config.resolved();
    let scenario = config.scenario()?;
    let grid = Grid::new(config.length, config.dk)?;
    fs::create_dir_all(&config.out)?;

    let start = Instant::now();
    let kernel = CollisionKernel::new(&grid);
    let initial = scenario.project_initial(&grid);
    let orders = &config.moment_orders;
    let mut records = vec![DiagnosticsRecord::capture(
        0.0, 0.0, &initial.u, &grid, orders,
    )];

    let mut pending: Vec<f64> = config.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    pending.dedup();
    let mut snapshots = Vec::new();
    let mut take_snapshots = |t: f64, u: &[f64], snapshots: &mut Vec<SnapshotInfo>| -> Result<()> {
        while let Some(&req) = pending.first() {
            if req > t {
                break;
            }
            let file = format!("snapshot_{}.csv", fmt_f64(req));
            write_snapshot(&config.out.join(&file), &grid, u)?;
            snapshots.push(SnapshotInfo {
                requested: req,
                t,
                file,
            });
            pending.remove(0);
        }
        Ok(())
    };
    take_snapshots(0.0, &initial.u, &mut snapshots)?;

    let stepper = config.stepper();
    let mut io_error = None;
    let outcome = config.in_pool(|| {
        advance(&kernel, initial.clone(), &stepper, &mut |rec| {
            records.push(DiagnosticsRecord::capture(
                rec.t, rec.dt, rec.u, &grid, orders,
            ));
            if io_error.is_none() {
                if let Err(e) = take_snapshots(rec.t, rec.u, &mut snapshots) {
                    io_error = Some(e);
                }
            }
        })
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let wall_time_s = start.elapsed().as_secs_f64();

    let final_time = records.last().map_or(0.0, |r| r.t);
    let (stats, error) = match outcome {
        Ok((_, stats)) => (Some(stats), None),
        Err(e) => {
            log::error!("run aborted: {e}");
            (None, Some(ErrorRecord::new(&e, Some(final_time))))
        }
    };

    let sampled = downsample_log(&records, config.max_series_rows);
    fs::write(config.out.join(SERIES_FILE), series_csv(&sampled, orders))?;

    let report = RunReport {
        config: resolved,
        status: if error.is_some() {
            "aborted"
        } else {
            "completed"
        }
        .into(),
        stats,
        wall_time_s,
        initial_energy: diagnostics::total_energy(&scenario.project_initial(&grid).u, &grid),
        final_time,
        series_rows: sampled.len(),
        snapshots,
        error,
    };
    fs::write(
        config.out.join(RUN_FILE),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    let error_path = config.out.join(ERROR_FILE);
    match &report.error {
        Some(err) => fs::write(&error_path, serde_json::to_string_pretty(err)? + "\n")?,
        None if error_path.exists() => fs::remove_file(&error_path)?,
        None => {}
    }
    Ok(RunOutcome { report, records })
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn column_name(r: u32) -> String {
    if r == 0 {
        "E".into()
    } else {
        format!("M{r}")
    }
}

/// `t,dt,E,M1,...,min_u` with one row per record.
pub fn series_csv(records: &[DiagnosticsRecord], orders: &[u32]) -> String {
    let mut out = String::from("t,dt");
    for &r in orders {
        out.push(',');
        out.push_str(&column_name(r));
    }
    out.push_str(",min_u\n");
    for rec in records {
        write!(out, "{},{}", fmt_f64(rec.t), fmt_f64(rec.dt)).unwrap();
        for &r in orders {
            let v = rec.moment(r).unwrap_or(f64::NAN);
            write!(out, ",{}", fmt_f64(v)).unwrap();
        }
        writeln!(out, ",{}", fmt_f64(rec.min_u)).unwrap();
    }
    out
}

fn write_snapshot(path: &Path, grid: &Grid, u: &[f64]) -> Result<()> {
    let mut out = String::from("k,u\n");
    for (k, v) in grid.midpoints().iter().zip(u) {
        writeln!(out, "{},{}", fmt_f64(*k), fmt_f64(*v)).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Runs a self-convergence study from `config.scenario`, `L`, `T`, `dks` and
/// `dk_ref`, writing `convergence.csv` to `config.out`.
pub fn cmd_convergence(config: &RunConfig) -> Result<Vec<ConvergenceRow>> {
    config.validate()?;
    let scenario = config.scenario()?;
    let stepper = config.stepper();
    let (rows, stats) = config.in_pool(|| {
        diagnostics::convergence_study(
            &scenario,
            config.length,
            &config.dks,
            config.dk_ref,
            &stepper,
        )
    })??;
    for (dk, st) in config.dks.iter().chain([&config.dk_ref]).zip(&stats) {
        log::info!(
            "dk = {dk}: {} steps accepted, {} rejected",
            st.steps_accepted,
            st.steps_rejected
        );
    }
    fs::create_dir_all(&config.out)?;
    fs::write(config.out.join(CONVERGENCE_FILE), convergence_csv(&rows))?;
    Ok(rows)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut out = String::from("dk,L1_rel,Linf_rel,order_L1,order_Linf\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.dk),
            fmt_f64(r.l1_rel),
            fmt_f64(r.linf_rel),
            opt(r.order_l1),
            opt(r.order_linf)
        )
        .unwrap();
    }
    out
}

/// Reads the `t` and `E` columns of a series file.
pub fn read_energy_series(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_energy_series(&text)
}

pub fn parse_energy_series(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Input("empty series file".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Input(format!("series is missing column {name:?}")))
    };
    let (ti, ei) = (column("t")?, column("E")?);
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            let get = |i: usize| -> Result<f64> {
                fields
                    .get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Input(format!("bad value on series row {}", n + 1)))
            };
            Ok((get(ti)?, get(ei)?))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub series: PathBuf,
    #[serde(flatten)]
    pub fit: DecayFit,
    pub phases: Vec<Phase>,
}

/// Fits the decay slope over `window` (the last decade when `None`) and
/// detects phases over the whole series. Writes `fit.json` next to the series
/// unless `out` names another directory.
pub fn cmd_fit(
    series_path: impl AsRef<Path>,
    window: Option<(f64, f64)>,
    out: Option<&Path>,
) -> Result<FitReport> {
    let series_path = series_path.as_ref();
    let series = read_energy_series(series_path)?;
    let window = match window {
        Some(w) => w,
        None => diagnostics::last_decade(&series)
            .ok_or_else(|| Error::Input("series has no positive times".into()))?,
    };
    let fit = fit_decay(&series, window)?;
    let phases = detect_phases(&series, DEFAULT_FLAT_TOL)?;
    let report = FitReport {
        series: series_path.to_path_buf(),
        fit,
        phases,
    };
    let dir = match out {
        Some(dir) => dir.to_path_buf(),
        None => series_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir)?;
    }
    fs::write(
        dir.join(FIT_FILE),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    Ok(report)
}
