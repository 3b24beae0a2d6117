//! Monte Carlo table and figure reproduction.
//!
//! Every table expands into a list of [`Cell`]s; each cell runs a number of
//! independent trials. Trial `k` draws its sources, mixing matrix and noise
//! from `derive_seed(seed, k)`, so cells that differ only in the solver see
//! identical data.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ccs_ica::{amari_index, center_and_whiten, derive_seed, generate_sources, mix, mix_with_snr};
use ccs_ica::{random_mixing_matrix, reference_mixing_2x2, rng_from_seed, sir_db};
use ccs_ica::{IcaError, MixingModel, SignalMatrix, SourceKind};
use ndarray::Array2;
use rayon::prelude::*;

use crate::commands::default_mixing;
use crate::config::{Algorithm, ExperimentConfig, OptimizerConfig};
use crate::error::{CliError, CliResult};
use crate::io::{self, fmt_f64};
use crate::pipeline::run_separation;

/// Stride cap: the evaluation set keeps at least this many samples.
pub const MIN_EVAL_SAMPLES: usize = 16;

/// Step tolerance for runs that should use their whole iteration budget.
pub const FIXED_RUN_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchTable {
    T1,
    T4,
    T5,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

impl BenchTable {
    pub const ALL: [BenchTable; 7] = [
        BenchTable::T1,
        BenchTable::T4,
        BenchTable::T5,
        BenchTable::Fig4,
        BenchTable::Fig5,
        BenchTable::Fig6,
        BenchTable::Fig7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchTable::T1 => "T1",
            BenchTable::T4 => "T4",
            BenchTable::T5 => "T5",
            BenchTable::Fig4 => "fig4",
            BenchTable::Fig5 => "fig5",
            BenchTable::Fig6 => "fig6",
            BenchTable::Fig7 => "fig7",
        }
    }
}

impl fmt::Display for BenchTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchTable {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        BenchTable::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                CliError::invalid(format!(
                    "unknown table '{s}'; expected one of T1, T4, T5, fig4, fig5, fig6, fig7"
                ))
            })
    }
}

#[derive(Debug, Clone)]
pub enum Method {
    Solve(OptimizerConfig),
    /// No separation beyond centering and whitening.
    WhiteningOnly,
}

#[derive(Debug, Clone)]
pub enum SourcePlan {
    Generated { kinds: Vec<SourceKind>, samples: usize },
    Fixed(SignalMatrix<f64>),
}

impl SourcePlan {
    fn channels(&self) -> usize {
        match self {
            SourcePlan::Generated { kinds, .. } => kinds.len(),
            SourcePlan::Fixed(s) => s.channels(),
        }
    }

    fn samples(&self) -> usize {
        match self {
            SourcePlan::Generated { samples, .. } => *samples,
            SourcePlan::Fixed(s) => s.samples(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum MixingPlan {
    /// Fresh `U(−1, 1)` matrix per trial.
    Random,
    Fixed(Array2<f64>),
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub name: String,
    pub method: Method,
    pub sources: SourcePlan,
    pub mixing: MixingPlan,
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub keep_traces: bool,
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub cell: usize,
    pub trial_index: usize,
    pub seed: u64,
    pub amari_times100: f64,
    pub sir_db: Vec<f64>,
    pub iterations: usize,
    pub runtime_seconds: f64,
    pub trace: Vec<f64>,
    /// Numerical failure message; the metrics are NaN when set.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub name: String,
    pub algorithm: String,
    pub divergence: String,
    pub alpha: Option<f64>,
    pub channels: usize,
    pub samples: usize,
    pub ts: usize,
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub failures: usize,
    pub median_amari_x100: f64,
    pub mean_amari_x100: f64,
    pub median_sir_db: f64,
    pub mean_sir_db: f64,
    pub min_sir_db: f64,
    pub mean_iterations: f64,
    pub mean_runtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub table: String,
    pub cells: Vec<CellSummary>,
    /// Sorted by cell, then trial index.
    pub records: Vec<ExperimentRecord>,
}

impl BenchReport {
    pub fn cell(&self, name: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.name == name)
    }

    pub fn records_of(&self, name: &str) -> Vec<&ExperimentRecord> {
        match self.cells.iter().position(|c| c.name == name) {
            Some(i) => self.records.iter().filter(|r| r.cell == i).collect(),
            None => Vec::new(),
        }
    }
}

pub fn scaled_trials(base: usize, scale: f64) -> usize {
    ((base as f64 * scale).round() as usize).max(1)
}

/// Stride whose evaluation set is `fraction · T`, capped at
/// [`MIN_EVAL_SAMPLES`] retained samples.
pub fn stride_for_fraction(samples: usize, fraction: f64) -> usize {
    let ts = (1.0 / fraction).round().max(1.0) as usize;
    ts.min((samples / MIN_EVAL_SAMPLES).max(1))
}

fn solver(cfg: &ExperimentConfig, algorithm: Algorithm, ts: usize) -> OptimizerConfig {
    OptimizerConfig {
        algorithm,
        ts,
        ..cfg.optimizer.clone()
    }
}

fn generated(kinds: Vec<SourceKind>, samples: usize) -> SourcePlan {
    SourcePlan::Generated { kinds, samples }
}

/// `(M, T, base trials)` grid of the dimension and stride studies, filtered by scale.
fn scaling_grid(scale: f64) -> Vec<(usize, usize, usize)> {
    const DIMS: [(usize, usize); 5] = [(2, 512), (4, 200), (8, 75), (16, 15), (20, 5)];
    const SAMPLES: [usize; 4] = [1000, 2000, 4000, 8000];
    let max_m = ((20.0 * scale).round() as usize).max(2);
    let max_t = ((8000.0 * scale).round() as usize).max(1000);
    let mut out = Vec::new();
    for (m, trials) in DIMS {
        for t in SAMPLES {
            if m <= max_m && t <= max_t {
                out.push((m, t, trials));
            }
        }
    }
    out
}

fn cycled_kinds(m: usize) -> Vec<SourceKind> {
    (0..m)
        .map(|i| SourceKind::ALL[i % SourceKind::ALL.len()])
        .collect()
}

/// Expands a table id into cells. `trials` replaces the scaled trial counts.
pub fn table_cells(
    table: BenchTable,
    scale: f64,
    cfg: &ExperimentConfig,
    trials: Option<usize>,
    user_sources: Option<SignalMatrix<f64>>,
) -> CliResult<Vec<Cell>> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(CliError::invalid(format!(
            "scale must lie in (0, 1], got {scale}"
        )));
    }
    if trials == Some(0) {
        return Err(CliError::invalid("trials must be >= 1"));
    }
    let n = |base: usize| trials.unwrap_or_else(|| scaled_trials(base, scale));
    let mut cells = Vec::new();
    match table {
        BenchTable::T1 => {
            use SourceKind::*;
            let rows = [
                ("s1-s1", [Uniform, Uniform]),
                ("s2-s2", [Rayleigh, Rayleigh]),
                ("s3-s3", [Laplacian, Laplacian]),
                ("s4-s4", [LogNormal, LogNormal]),
                ("s1-s2", [Uniform, Rayleigh]),
            ];
            for (label, kinds) in rows {
                for alg in [Algorithm::PairwiseGd, Algorithm::Jacobi] {
                    cells.push(Cell {
                        name: format!("{label}/{}", alg.name()),
                        method: Method::Solve(solver(cfg, alg, 10)),
                        sources: generated(kinds.to_vec(), 1000),
                        mixing: MixingPlan::Random,
                        snr_db: None,
                        trials: n(100),
                        keep_traces: false,
                    });
                }
            }
        }
        BenchTable::T4 => {
            for (m, t, base) in scaling_grid(scale) {
                for alg in [Algorithm::PairwiseGd, Algorithm::Jacobi] {
                    cells.push(Cell {
                        name: format!("M{m}-T{t}/{}", alg.name()),
                        method: Method::Solve(solver(cfg, alg, 10)),
                        sources: generated(cycled_kinds(m), t),
                        mixing: MixingPlan::Random,
                        snr_db: None,
                        trials: n(base),
                        keep_traces: false,
                    });
                }
            }
        }
        BenchTable::T5 => {
            const BASE: [(usize, usize); 5] = [(2, 1024), (4, 250), (8, 100), (16, 25), (20, 10)];
            for (m, t, _) in scaling_grid(scale) {
                let base = BASE.iter().find(|b| b.0 == m).map_or(1, |b| b.1);
                for (label, fraction) in [("0.1T", 0.1), ("0.01T", 0.01), ("0.001T", 0.001), ("1", 1.0)] {
                    cells.push(Cell {
                        name: format!("M{m}-T{t}/{label}"),
                        method: Method::Solve(solver(
                            cfg,
                            Algorithm::Jacobi,
                            stride_for_fraction(t, fraction),
                        )),
                        sources: generated(cycled_kinds(m), t),
                        mixing: MixingPlan::Random,
                        snr_db: None,
                        trials: n(base),
                        keep_traces: false,
                    });
                }
            }
        }
        BenchTable::Fig4 | BenchTable::Fig5 => {
            for (label, divergence, alpha) in
                [("ccs+1", "ccs", 1.0), ("ccs-1", "ccs", -1.0), ("cs", "cs", -1.0)]
            {
                let opt = OptimizerConfig {
                    algorithm: Algorithm::Gd,
                    divergence: divergence.into(),
                    alpha,
                    ts: 1,
                    epsilon: FIXED_RUN_EPSILON,
                    ..cfg.optimizer.clone()
                };
                cells.push(Cell {
                    name: label.into(),
                    method: Method::Solve(opt),
                    sources: generated(vec![SourceKind::Uniform, SourceKind::Laplacian], 1000),
                    mixing: MixingPlan::Fixed(reference_mixing_2x2()),
                    snr_db: None,
                    trials: n(5),
                    keep_traces: table == BenchTable::Fig5,
                });
            }
        }
        BenchTable::Fig6 | BenchTable::Fig7 => {
            let sources = match user_sources {
                Some(s) => SourcePlan::Fixed(s),
                None => generated(
                    vec![SourceKind::Uniform, SourceKind::Laplacian, SourceKind::LogNormal],
                    2000,
                ),
            };
            let mixing = MixingPlan::Fixed(default_mixing(cfg, sources.channels())?);
            let (snr_db, methods) = if table == BenchTable::Fig6 {
                (None, vec![Algorithm::Jacobi, Algorithm::PairwiseGd])
            } else {
                (Some(cfg.data.snr_db.unwrap_or(20.0)), vec![Algorithm::Jacobi])
            };
            for alg in methods {
                cells.push(Cell {
                    name: alg.name().into(),
                    method: Method::Solve(solver(cfg, alg, 10)),
                    sources: sources.clone(),
                    mixing: mixing.clone(),
                    snr_db,
                    trials: n(10),
                    keep_traces: false,
                });
            }
            cells.push(Cell {
                name: "whitening".into(),
                method: Method::WhiteningOnly,
                sources,
                mixing,
                snr_db,
                trials: n(10),
                keep_traces: false,
            });
        }
    }
    Ok(cells)
}

struct TrialData {
    s: SignalMatrix<f64>,
    a: Array2<f64>,
    x: SignalMatrix<f64>,
}

fn trial_data(cell: &Cell, seed: u64) -> CliResult<TrialData> {
    let s = match &cell.sources {
        SourcePlan::Generated { kinds, samples } => generate_sources(kinds, *samples, derive_seed(seed, 0))?,
        SourcePlan::Fixed(s) => s.clone(),
    };
    let a = match &cell.mixing {
        MixingPlan::Random => random_mixing_matrix(s.channels(), &mut rng_from_seed(derive_seed(seed, 1))),
        MixingPlan::Fixed(a) => a.clone(),
    };
    let noise_seed = derive_seed(seed, 2);
    let x = match cell.snr_db {
        Some(snr) => mix_with_snr(&s, &a, snr, noise_seed)?.0,
        None => mix(&s, &MixingModel::noiseless(a.clone())?, noise_seed)?,
    };
    Ok(TrialData { s, a, x })
}

struct Solved {
    demixer: Array2<f64>,
    estimates: SignalMatrix<f64>,
    iterations: usize,
    trace: Vec<f64>,
}

fn solve(cell: &Cell, x: &SignalMatrix<f64>) -> CliResult<Solved> {
    match &cell.method {
        Method::Solve(opt) => {
            let sep = run_separation(x, opt)?;
            let trace = if cell.keep_traces {
                sep.trace.iter().map(|r| r.value).collect()
            } else {
                Vec::new()
            };
            Ok(Solved {
                demixer: sep.demixer,
                estimates: sep.estimates,
                iterations: sep.iterations,
                trace,
            })
        }
        Method::WhiteningOnly => {
            let (z, ws) = center_and_whiten(x)?;
            Ok(Solved {
                demixer: ws.v,
                estimates: z,
                iterations: 0,
                trace: Vec::new(),
            })
        }
    }
}

/// Runs one trial. Numerical failures are recorded, other errors returned.
pub fn run_trial(
    cell: &Cell,
    cell_index: usize,
    trial_index: usize,
    base_seed: u64,
) -> CliResult<ExperimentRecord> {
    let seed = derive_seed(base_seed, trial_index as u64);
    let data = trial_data(cell, seed)?;
    let start = Instant::now();
    let solved = solve(cell, &data.x);
    let runtime_seconds = start.elapsed().as_secs_f64();
    let metrics = solved.and_then(|sol| {
        let amari = 100.0 * amari_index(&sol.demixer, &data.a)?;
        let sir = sir_db(&sol.estimates, &data.s)?;
        Ok((sol, amari, sir))
    });
    match metrics {
        Ok((sol, amari_times100, sir_db)) => Ok(ExperimentRecord {
            cell: cell_index,
            trial_index,
            seed,
            amari_times100,
            sir_db,
            iterations: sol.iterations,
            runtime_seconds,
            trace: sol.trace,
            error: None,
        }),
        Err(CliError::Numerical(e)) => Ok(failed(cell_index, trial_index, seed, runtime_seconds, &e)),
        Err(other) => Err(other),
    }
}

fn failed(
    cell: usize,
    trial_index: usize,
    seed: u64,
    runtime_seconds: f64,
    e: &IcaError,
) -> ExperimentRecord {
    ExperimentRecord {
        cell,
        trial_index,
        seed,
        amari_times100: f64::NAN,
        sir_db: Vec::new(),
        iterations: 0,
        runtime_seconds,
        trace: Vec::new(),
        error: Some(e.to_string()),
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn summarize(cell: &Cell, records: &[&ExperimentRecord]) -> CellSummary {
    let ok: Vec<&&ExperimentRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let mut amari: Vec<f64> = ok.iter().map(|r| r.amari_times100).collect();
    let mut sir: Vec<f64> = ok.iter().flat_map(|r| r.sir_db.iter().copied()).collect();
    let iters: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
    let runtime: Vec<f64> = records.iter().map(|r| r.runtime_seconds).collect();
    let (algorithm, divergence, alpha, ts) = match &cell.method {
        Method::Solve(o) => (
            o.algorithm.name().to_string(),
            o.divergence.clone(),
            Some(o.alpha),
            o.ts,
        ),
        Method::WhiteningOnly => ("whitening".into(), "none".into(), None, 1),
    };
    CellSummary {
        name: cell.name.clone(),
        algorithm,
        divergence,
        alpha,
        channels: cell.sources.channels(),
        samples: cell.sources.samples(),
        ts,
        snr_db: cell.snr_db,
        trials: records.len(),
        failures: records.len() - ok.len(),
        mean_amari_x100: mean(&amari),
        median_amari_x100: median(&mut amari),
        mean_sir_db: mean(&sir),
        min_sir_db: sir.iter().copied().fold(f64::NAN, f64::min),
        median_sir_db: median(&mut sir),
        mean_iterations: mean(&iters),
        mean_runtime_s: mean(&runtime),
    }
}

/// Runs all trials of all cells on up to `jobs` threads.
pub fn run_cells(table: &str, cells: &[Cell], base_seed: u64, jobs: usize) -> CliResult<BenchReport> {
    if jobs == 0 {
        return Err(CliError::invalid("jobs must be >= 1"));
    }
    let tasks: Vec<(usize, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, cell)| (0..cell.trials).map(move |k| (c, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::invalid(format!("thread pool: {e}")))?;
    let results: Vec<CliResult<ExperimentRecord>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, k)| run_trial(&cells[c], c, k, base_seed))
            .collect()
    });
    let mut records = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    records.sort_by_key(|r| (r.cell, r.trial_index));
    let summaries = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let rs: Vec<&ExperimentRecord> = records.iter().filter(|r| r.cell == c).collect();
            summarize(cell, &rs)
        })
        .collect();
    Ok(BenchReport {
        table: table.to_string(),
        cells: summaries,
        records,
    })
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("bench");
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

/// Writes the aggregate CSV at `path`, per-trial rows next to it as
/// `{stem}_trials.csv` and, when any were kept, `{stem}_traces.csv`.
pub fn write_report(report: &BenchReport, path: &Path) -> CliResult<Vec<PathBuf>> {
    let header = [
        "table",
        "cell",
        "algorithm",
        "divergence",
        "alpha",
        "channels",
        "samples",
        "ts",
        "snr_db",
        "trials",
        "failures",
        "median_amari_x100",
        "mean_amari_x100",
        "median_sir_db",
        "mean_sir_db",
        "min_sir_db",
        "mean_iterations",
        "mean_runtime_s",
    ]
    .map(String::from);
    let rows = report.cells.iter().map(|c| {
        vec![
            report.table.clone(),
            c.name.clone(),
            c.algorithm.clone(),
            c.divergence.clone(),
            opt_f64(c.alpha),
            c.channels.to_string(),
            c.samples.to_string(),
            c.ts.to_string(),
            opt_f64(c.snr_db),
            c.trials.to_string(),
            c.failures.to_string(),
            fmt_f64(c.median_amari_x100),
            fmt_f64(c.mean_amari_x100),
            fmt_f64(c.median_sir_db),
            fmt_f64(c.mean_sir_db),
            fmt_f64(c.min_sir_db),
            fmt_f64(c.mean_iterations),
            fmt_f64(c.mean_runtime_s),
        ]
    });
    io::write_csv(path, &header, rows)?;
    let mut paths = vec![path.to_path_buf()];

    let trials_path = sibling(path, "trials");
    let header = [
        "cell",
        "trial",
        "seed",
        "amari_x100",
        "iterations",
        "runtime_s",
        "source",
        "sir_db",
        "error",
    ]
    .map(String::from);
    let rows = report.records.iter().flat_map(|r| {
        let name = report.cells[r.cell].name.clone();
        let base = vec![
            name,
            r.trial_index.to_string(),
            r.seed.to_string(),
            fmt_f64(r.amari_times100),
            r.iterations.to_string(),
            fmt_f64(r.runtime_seconds),
        ];
        let error = r.error.clone().unwrap_or_default();
        let per_source: Vec<(String, String)> = if r.sir_db.is_empty() {
            vec![(String::new(), String::new())]
        } else {
            r.sir_db
                .iter()
                .enumerate()
                .map(|(m, &v)| (m.to_string(), fmt_f64(v)))
                .collect()
        };
        per_source.into_iter().map(move |(src, sir)| {
            let mut row = base.clone();
            row.extend([src, sir, error.clone()]);
            row
        })
    });
    io::write_csv(&trials_path, &header, rows)?;
    paths.push(trials_path);

    if report.records.iter().any(|r| !r.trace.is_empty()) {
        let traces_path = sibling(path, "traces");
        let header = ["cell", "trial", "step", "value"].map(String::from);
        let rows = report.records.iter().flat_map(|r| {
            let name = report.cells[r.cell].name.clone();
            r.trace
                .iter()
                .enumerate()
                .map(move |(k, &v)| vec![name.clone(), r.trial_index.to_string(), k.to_string(), fmt_f64(v)])
        });
        io::write_csv(&traces_path, &header, rows)?;
        paths.push(traces_path);
    }
    Ok(paths)
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub table: String,
    pub scale: f64,
    pub trials: Option<usize>,
    /// Source signals for fig6 / fig7 in place of the generated ones.
    pub inputs: Vec<PathBuf>,
}

pub fn cmd_bench(cfg: &ExperimentConfig, opts: &BenchOptions) -> CliResult<(BenchReport, Vec<PathBuf>)> {
    let table: BenchTable = opts.table.parse()?;
    cfg.optimizer.contrast_kind()?;
    let inputs = if opts.inputs.is_empty() {
        &cfg.data.input
    } else {
        &opts.inputs
    };
    let user_sources = if inputs.is_empty() {
        None
    } else {
        Some(io::read_signals(inputs)?)
    };
    let cells = table_cells(table, opts.scale, cfg, opts.trials, user_sources)?;
    let report = run_cells(table.name(), &cells, cfg.seed, cfg.jobs)?;
    let path = cfg.output_path(&format!("bench_{}.csv", table.name()));
    let paths = write_report(&report, &path)?;
    Ok((report, paths))
}
