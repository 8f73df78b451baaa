//! Configuration files and the command implementations behind the
//! `triod-flow` binary.
//!
//! Every `cmd_*` function returns the process exit code: 0 on success, 2 for
//! invalid configuration or arguments, 3 when the solver fails.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::geometry;
use crate::model::{EndpointSet, GrainModel, SurfaceTensionModel, TriodState};
use crate::rayleigh::{self, NetworkEigenProblem};
use crate::scenario;
use crate::solver::{self, RecordSink, SolverConfig, TimeStep};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Environment variable capping the number of sweep worker threads.
pub const THREADS_ENV: &str = "TRIOD_FLOW_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    StraightHerring,
    PerturbedSteiner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub alpha0: [f64; 3],
    #[serde(default)]
    pub bump_amplitude: f64,
    #[serde(default = "default_bump_mode")]
    pub bump_mode: u32,
}

fn default_bump_mode() -> u32 {
    1
}

fn default_record_every() -> usize {
    100
}

/// One simulation, as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub endpoints: [[f64; 2]; 3],
    pub sigma: SurfaceTensionModel,
    pub gamma: f64,
    pub grid_n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Write a snapshot every this many records; absent or 0 disables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    pub scenario: ScenarioConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_residual: Option<f64>,
}

/// Validated pieces of a [`SimulationConfig`].
#[derive(Debug, Clone)]
pub struct Prepared {
    pub endpoints: EndpointSet,
    pub model: GrainModel,
    pub solver: SolverConfig,
    pub initial: TriodState,
}

impl SimulationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let time_step = match (self.dt, self.cfl) {
            (Some(dt), None) => TimeStep::Fixed(dt),
            (None, Some(cfl)) => TimeStep::Cfl(cfl),
            _ => return Err(Error::InvalidInput("exactly one of dt and cfl must be given".into())),
        };
        let mut config = SolverConfig {
            grid_n: self.grid_n,
            time_step,
            t_end: self.t_end,
            record_every: self.record_every,
            ..SolverConfig::default()
        };
        if let Some(r) = self.stop_residual {
            config.stop_residual = r;
        }
        config.validate()?;
        Ok(config)
    }

    /// Checks every field and builds the initial state. Scenario failures
    /// other than invalid input surface unchanged (they are solver errors).
    pub fn prepare(&self) -> Result<Prepared> {
        let endpoints = EndpointSet::from_coords(self.endpoints)?;
        let model = GrainModel::new(self.sigma, self.gamma)?;
        let solver = self.solver_config()?;
        if self.scenario.alpha0.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidInput("scenario.alpha0 must be finite".into()));
        }
        let s = &self.scenario;
        let initial = match s.kind {
            ScenarioKind::StraightHerring => {
                scenario::straight_herring_initial(&endpoints, s.alpha0, &model, self.grid_n)?
            }
            ScenarioKind::PerturbedSteiner => scenario::perturbed_steiner_initial(
                &endpoints,
                s.alpha0,
                &model,
                self.grid_n,
                s.bump_amplitude,
                s.bump_mode,
            )?,
        };
        Ok(Prepared { endpoints, model, solver, initial })
    }
}

/// Whether an error stems from the configuration rather than the dynamics.
pub fn is_config_error(e: &Error) -> bool {
    matches!(
        e.root(),
        Error::InvalidInput(_) | Error::A2Violation(_) | Error::A2LikeViolation(_) | Error::VertexOptimal(_)
    )
}

fn exit_code(e: &Error) -> i32 {
    if is_config_error(e) {
        EXIT_CONFIG
    } else {
        EXIT_SOLVER
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub r2: f64,
}

/// Condensed result of one simulation, written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: String,
    pub error: Option<String>,
    pub t_final: f64,
    pub records: usize,
    pub energy: f64,
    pub herring_residual: f64,
    pub weighted_kappa_l2: f64,
    pub sum_delta_alpha_sq: f64,
    pub junction: [f64; 2],
    pub junction_mismatch: f64,
    pub dist_to_steiner: Option<f64>,
    pub fermat_point: Option<[f64; 2]>,
    pub misorientation_decay: Option<RateFit>,
    pub curvature_decay: Option<RateFit>,
}

impl RunSummary {
    fn new(records: &[DiagnosticsRecord], endpoints: &EndpointSet, error: Option<&Error>) -> Self {
        let last = records.last();
        let get = |f: fn(&DiagnosticsRecord) -> f64| last.map_or(f64::NAN, f);
        let window = diagnostics::default_window(records);
        let fit = |field: fn(&DiagnosticsRecord) -> f64, window| {
            diagnostics::decay_rate_fit(records, field, window).ok().map(|(rate, r2)| RateFit { rate, r2 })
        };
        let t_final = get(|r| r.t);
        let t_start = records.first().map_or(0.0, |r| r.t);
        Self {
            status: if error.is_some() { "failed" } else { "ok" }.into(),
            error: error.map(|e| e.to_string()),
            t_final,
            records: records.len(),
            energy: get(|r| r.energy),
            herring_residual: get(|r| r.herring_residual),
            weighted_kappa_l2: get(|r| r.weighted_kappa_l2),
            sum_delta_alpha_sq: get(|r| r.sum_delta_alpha_sq),
            junction: last.map_or([f64::NAN; 2], |r| r.junction),
            junction_mismatch: get(|r| r.junction_mismatch),
            dist_to_steiner: last.map(|r| r.dist_to_steiner).filter(|d| d.is_finite()),
            fermat_point: geometry::fermat_point(endpoints).ok().map(|p| [p.x, p.y]),
            misorientation_decay: fit(|r| r.sum_delta_alpha_sq, window),
            curvature_decay: fit(|r| r.weighted_kappa_l2, (0.5 * (t_start + t_final), t_final)),
        }
    }
}

/// Records plus the summary of a finished (or failed) simulation.
#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: Option<TriodState>,
    pub summary: RunSummary,
    pub error: Option<Error>,
}

/// Runs a prepared simulation, calling `snapshot` with every k-th recorded
/// state. Solver failures are captured in the outcome, not returned.
pub fn simulate_prepared<F>(prepared: Prepared, snapshot_every: usize, mut snapshot: F) -> SimulationOutcome
where
    F: FnMut(usize, &TriodState),
{
    struct Sink<'a, F> {
        records: Vec<DiagnosticsRecord>,
        every: usize,
        snapshot: &'a mut F,
    }
    impl<F: FnMut(usize, &TriodState)> RecordSink for Sink<'_, F> {
        fn record(&mut self, record: &DiagnosticsRecord, state: &TriodState) {
            let k = self.records.len();
            if self.every > 0 && k.is_multiple_of(self.every) {
                (self.snapshot)(k, state);
            }
            self.records.push(record.clone());
        }
    }
    let Prepared { endpoints, model, solver: config, initial } = prepared;
    let mut sink = Sink { records: Vec::new(), every: snapshot_every, snapshot: &mut snapshot };
    let result = solver::run(initial, &model, &endpoints, &config, &mut sink);
    let mut records = sink.records;
    diagnostics::fill_energy_balance(&mut records);
    let (final_state, error) = match result {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e)),
    };
    let summary = RunSummary::new(&records, &endpoints, error.as_ref());
    SimulationOutcome { records, final_state, summary, error }
}

pub fn simulate(config: &SimulationConfig) -> Result<SimulationOutcome> {
    Ok(simulate_prepared(config.prepare()?, 0, |_, _| {}))
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let io_err = |e: std::io::Error| Error::InvalidInput(format!("cannot write {}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    write(&mut w).and_then(|_| w.flush()).map_err(io_err)
}

/// `simulate` subcommand: writes `timeseries.csv`, optional
/// `snapshot_NNNNN.csv` files and `summary.json` to the output directory.
pub fn cmd_simulate(config_path: &Path) -> i32 {
    let config = match SimulationConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out_dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("output"));
    let prepared = match config.prepare() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Err(e) = fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }
    let endpoints = prepared.endpoints;
    let mut snapshot_error = None;
    let outcome = simulate_prepared(prepared, config.snapshot_every.unwrap_or(0), |k, state| {
        let path = out_dir.join(format!("snapshot_{k:05}.csv"));
        if let Err(e) = write_file(&path, |w| geometry::write_snapshot(w, state, &endpoints)) {
            snapshot_error.get_or_insert(e);
        }
    });
    let written = snapshot_error.map_or(Ok(()), Err).and_then(|_| {
        write_file(&out_dir.join("timeseries.csv"), |w| diagnostics::write_timeseries(w, &outcome.records))?;
        let json = serde_json::to_string_pretty(&outcome.summary).expect("summary serializes");
        write_file(&out_dir.join("summary.json"), |w| writeln!(w, "{json}"))
    });
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    match &outcome.error {
        None => {
            println!(
                "t = {:.6}, {} records, energy {:.10}, written to {}",
                outcome.summary.t_final,
                outcome.records.len(),
                outcome.summary.energy,
                out_dir.display()
            );
            EXIT_OK
        }
        Some(e) => {
            eprintln!("solver error: {e}");
            EXIT_SOLVER
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayleighReport {
    pub lengths: [f64; 3],
    pub weights: [f64; 3],
    pub nodes: usize,
    pub eigenvalue: f64,
}

pub fn rayleigh_report(lengths: [f64; 3], weights: [f64; 3], nodes: usize) -> Result<RayleighReport> {
    if nodes < 16 {
        return Err(Error::InvalidInput(format!("nodes must be at least 16, got {nodes}")));
    }
    let problem = NetworkEigenProblem::new(lengths, weights, nodes)?;
    let eigenvalue = rayleigh::poincare_constant(&problem)?;
    Ok(RayleighReport { lengths, weights, nodes, eigenvalue })
}

/// `rayleigh` subcommand: prints `{lengths, weights, nodes, eigenvalue}`.
pub fn cmd_rayleigh(lengths: [f64; 3], weights: [f64; 3], nodes: usize) -> i32 {
    match rayleigh_report(lengths, weights, nodes) {
        Ok(r) => {
            println!("{}", serde_json::to_string(&r).expect("report serializes"));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinerReport {
    pub fermat_point: [f64; 2],
    /// Direction of each spoke from its endpoint towards the junction (radians).
    pub spoke_angles: [f64; 3],
    pub spoke_lengths: [f64; 3],
}

pub fn steiner_report(endpoints: [[f64; 2]; 3]) -> Result<SteinerReport> {
    let ep = EndpointSet::from_coords(endpoints)?;
    let a = geometry::fermat_point(&ep)?;
    let d: [_; 3] = std::array::from_fn(|j| a - ep.points[j]);
    Ok(SteinerReport {
        fermat_point: [a.x, a.y],
        spoke_angles: d.map(|v| v.y.atan2(v.x)),
        spoke_lengths: d.map(|v| v.norm()),
    })
}

/// `steiner` subcommand: prints the Fermat point and the spoke directions.
pub fn cmd_steiner(endpoints: [[f64; 2]; 3]) -> i32 {
    match steiner_report(endpoints) {
        Ok(r) => {
            println!("{}", serde_json::to_string(&r).expect("report serializes"));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Grid of runs around a base configuration: every combination of the listed
/// mobilities, bump amplitudes and initial orientations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: SimulationConfig,
    pub gamma: Vec<f64>,
    pub bump_amplitude: Vec<f64>,
    pub alpha0: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub bump_amplitude: f64,
    pub alpha0: [f64; 3],
    pub summary: RunSummary,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("sweep config: {e}")))
    }

    pub fn members(&self) -> Vec<SimulationConfig> {
        let mut out = Vec::new();
        for &gamma in &self.gamma {
            for &amp in &self.bump_amplitude {
                for &alpha0 in &self.alpha0 {
                    let mut c = self.base.clone();
                    c.gamma = gamma;
                    c.scenario.bump_amplitude = amp;
                    c.scenario.alpha0 = alpha0;
                    out.push(c);
                }
            }
        }
        out
    }
}

/// Runs every member concurrently. A failing member yields a row with
/// status `failed`; the batch continues.
pub fn run_sweep(sweep: &SweepConfig, threads: Option<usize>) -> Result<Vec<SweepRow>> {
    if sweep.gamma.is_empty() || sweep.bump_amplitude.is_empty() || sweep.alpha0.is_empty() {
        return Err(Error::InvalidInput("sweep lists must be non-empty".into()));
    }
    sweep.base.solver_config()?;
    let members = sweep.members();
    let work = || {
        members
            .par_iter()
            .map(|c| {
                let summary = match c.prepare() {
                    Ok(p) => simulate_prepared(p, 0, |_, _| {}).summary,
                    Err(e) => failed_summary(&e),
                };
                SweepRow { gamma: c.gamma, bump_amplitude: c.scenario.bump_amplitude, alpha0: c.scenario.alpha0, summary }
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    Ok(pool.install(work))
}

fn failed_summary(e: &Error) -> RunSummary {
    RunSummary {
        status: "failed".into(),
        error: Some(e.to_string()),
        t_final: f64::NAN,
        records: 0,
        energy: f64::NAN,
        herring_residual: f64::NAN,
        weighted_kappa_l2: f64::NAN,
        sum_delta_alpha_sq: f64::NAN,
        junction: [f64::NAN; 2],
        junction_mismatch: f64::NAN,
        dist_to_steiner: None,
        fermat_point: None,
        misorientation_decay: None,
        curvature_decay: None,
    }
}

pub const SWEEP_HEADER: &str = "run,gamma,bump_amplitude,alpha1,alpha2,alpha3,status,t_final,energy,\
herring_residual,sum_delta_alpha_sq,weighted_kappa_l2,dist_to_steiner,misorientation_rate,curvature_rate,error";

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    let f = |v: f64| format!("{v:.16e}");
    for (k, r) in rows.iter().enumerate() {
        let s = &r.summary;
        let fields = [
            k.to_string(),
            f(r.gamma),
            f(r.bump_amplitude),
            f(r.alpha0[0]),
            f(r.alpha0[1]),
            f(r.alpha0[2]),
            s.status.clone(),
            f(s.t_final),
            f(s.energy),
            f(s.herring_residual),
            f(s.sum_delta_alpha_sq),
            f(s.weighted_kappa_l2),
            f(s.dist_to_steiner.unwrap_or(f64::NAN)),
            f(s.misorientation_decay.map_or(f64::NAN, |d| d.rate)),
            f(s.curvature_decay.map_or(f64::NAN, |d| d.rate)),
            format!("\"{}\"", s.error.clone().unwrap_or_default().replace('"', "'")),
        ];
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Reads the worker cap from [`THREADS_ENV`]; unset or unparsable means
/// rayon's default.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

/// `sweep` subcommand: writes `sweep_summary.csv` with one row per member.
pub fn cmd_sweep(config_path: &Path) -> i32 {
    let sweep = match SweepConfig::load(config_path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let rows = match run_sweep(&sweep, threads_from_env()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let out_dir = sweep.output_dir.clone().unwrap_or_else(|| PathBuf::from("output"));
    let written = fs::create_dir_all(&out_dir)
        .map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", out_dir.display())))
        .and_then(|_| write_file(&out_dir.join("sweep_summary.csv"), |w| write_sweep_csv(w, &rows)));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let failed = rows.iter().filter(|r| r.summary.status != "ok").count();
    println!("{} runs, {} failed, summary in {}", rows.len(), failed, out_dir.display());
    EXIT_OK
}
