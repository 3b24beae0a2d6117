//! The `gen`, `mix`, `separate`, `eval` and `surface` subcommands.

use std::path::{Path, PathBuf};

use ccs_ica::{
    amari_index, derive_seed, kurtosis, match_sources, mix, mix_with_snr, rng_from_seed, sample_source,
};
use ccs_ica::{
    divergence_slice, divergence_surface, random_mixing_matrix, reference_mixing_2x2, reference_mixing_3x3,
};
use ccs_ica::{sir_db, DivergenceKind, DivergenceParams, MixingModel, SignalMatrix, SourceSpec};
use ndarray::Array2;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::io::{self, fmt_f64, SignalFormat};
use crate::pipeline::run_separation;

/// Stream indices for seeds derived from `--seed`.
pub const MIXING_STREAM: u64 = 1;
pub const NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub sources: Option<Vec<String>>,
    pub samples: Option<usize>,
    pub format: SignalFormat,
}

/// Writes one file per source and returns their paths.
pub fn cmd_gen(cfg: &ExperimentConfig, opts: &GenOptions) -> CliResult<Vec<PathBuf>> {
    let mut cfg = cfg.clone();
    if let Some(s) = &opts.sources {
        cfg.data.sources = s.clone();
    }
    if let Some(t) = opts.samples {
        cfg.data.samples = t;
    }
    cfg.validate()?;
    let kinds = cfg.source_kinds()?;
    let dir = cfg.output_path("sources");
    io::ensure_dir(&dir)?;
    let mut paths = Vec::with_capacity(kinds.len());
    for (m, &kind) in kinds.iter().enumerate() {
        // Same streams as `generate_sources`, one file per row.
        let spec = SourceSpec::new(kind, cfg.data.samples, derive_seed(cfg.seed, m as u64));
        let row = sample_source::<f64>(&spec)?.to_vec();
        let path = dir.join(format!("source_{m}_{kind}.{}", opts.format.extension()));
        match opts.format {
            SignalFormat::Csv => io::write_channels_csv(&path, &[row], "s")?,
            SignalFormat::Wav => {
                io::write_wav(&path, &row)?;
            }
        }
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone)]
pub struct MixOptions {
    pub inputs: Vec<PathBuf>,
    pub mixing: Option<PathBuf>,
    pub snr_db: Option<f64>,
    pub format: SignalFormat,
}

/// Default mixing matrix: the configured one, the 2×2 / 3×3 reference
/// matrices, or a random well-conditioned draw for other sizes.
pub fn default_mixing(cfg: &ExperimentConfig, m: usize) -> CliResult<Array2<f64>> {
    if let Some(rows) = &cfg.data.mixing {
        if rows.len() != m || rows.iter().any(|r| r.len() != m) {
            return Err(CliError::invalid(format!(
                "configured mixing matrix is not {m}x{m}"
            )));
        }
        return Ok(Array2::from_shape_fn((m, m), |(i, j)| rows[i][j]));
    }
    Ok(match m {
        2 => reference_mixing_2x2(),
        3 => reference_mixing_3x3(),
        _ => random_mixing_matrix(m, &mut rng_from_seed(derive_seed(cfg.seed, MIXING_STREAM))),
    })
}

/// Writes `mixture.*` and `mixing.csv` into the output directory.
pub fn cmd_mix(cfg: &ExperimentConfig, opts: &MixOptions) -> CliResult<Vec<PathBuf>> {
    let inputs = if opts.inputs.is_empty() {
        &cfg.data.input
    } else {
        &opts.inputs
    };
    let s = io::read_signals(inputs)?;
    let a = match &opts.mixing {
        Some(p) => io::read_matrix(p)?,
        None => default_mixing(cfg, s.channels())?,
    };
    if a.dim() != (s.channels(), s.channels()) {
        return Err(CliError::invalid(format!(
            "mixing matrix is {:?} but there are {} sources",
            a.dim(),
            s.channels()
        )));
    }
    let noise_seed = derive_seed(cfg.seed, NOISE_STREAM);
    let x = match opts.snr_db.or(cfg.data.snr_db) {
        Some(snr) => mix_with_snr(&s, &a, snr, noise_seed)?.0,
        None => mix(&s, &MixingModel::noiseless(a.clone())?, noise_seed)?,
    };
    let dir = cfg.output_path("mixture");
    let mut paths = io::write_signals(&dir, "mixture", &x, opts.format, "x")?;
    let a_path = dir.join("mixing.csv");
    io::write_matrix(&a_path, &a)?;
    paths.push(a_path);
    Ok(paths)
}

#[derive(Debug, Clone)]
pub struct SeparateOptions {
    pub inputs: Vec<PathBuf>,
    pub format: SignalFormat,
}

/// Runs the configured solver. Writes the estimates, `demixer.csv` (acting
/// on the raw mixture) and `trace.csv`.
pub fn cmd_separate(cfg: &ExperimentConfig, opts: &SeparateOptions) -> CliResult<Vec<PathBuf>> {
    let inputs = if opts.inputs.is_empty() {
        &cfg.data.input
    } else {
        &opts.inputs
    };
    let x = io::read_signals(inputs)?;
    let sep = run_separation(&x, &cfg.optimizer)?;
    let dir = cfg.output_path("separated");
    let mut paths = io::write_signals(&dir, "estimates", &sep.estimates, opts.format, "y")?;
    let w_path = dir.join("demixer.csv");
    io::write_matrix(&w_path, &sep.demixer)?;
    let trace_path = dir.join("trace.csv");
    let header = ["stage", "step", "value"].map(String::from);
    let rows = sep
        .trace
        .iter()
        .map(|r| vec![r.stage.clone(), r.step.to_string(), fmt_f64(r.value)]);
    io::write_csv(&trace_path, &header, rows)?;
    paths.push(w_path);
    paths.push(trace_path);
    Ok(paths)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub estimates: Vec<PathBuf>,
    pub truth: Vec<PathBuf>,
    pub demixer: Option<PathBuf>,
    pub mixing: Option<PathBuf>,
}

/// One line of the metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: &'static str,
    pub index: usize,
    pub value: f64,
}

/// Per-estimate kurtosis, per-source SIR and matched estimate when the
/// truth is given, and Amari×100 when both the demixer and mixing matrix are.
pub fn evaluate(
    y: &[Vec<f64>],
    truth: Option<&[Vec<f64>]>,
    demixer_and_mixing: Option<(&Array2<f64>, &Array2<f64>)>,
) -> CliResult<Vec<Metric>> {
    let mut out = Vec::new();
    for (m, channel) in y.iter().enumerate() {
        out.push(Metric {
            name: "kurtosis",
            index: m,
            value: kurtosis(channel)?,
        });
    }
    if let Some(s) = truth {
        let y = SignalMatrix::from_rows(y)?;
        let s = SignalMatrix::from_rows(s)?;
        let assignment = match_sources(&y, &s)?;
        for (src, (sir, &est)) in sir_db(&y, &s)?.into_iter().zip(&assignment).enumerate() {
            out.push(Metric {
                name: "sir_db",
                index: src,
                value: sir,
            });
            out.push(Metric {
                name: "matched_estimate",
                index: src,
                value: est as f64,
            });
        }
    }
    if let Some((w, a)) = demixer_and_mixing {
        out.push(Metric {
            name: "amari_x100",
            index: 0,
            value: 100.0 * amari_index(w, a)?,
        });
    }
    Ok(out)
}

pub fn cmd_eval(cfg: &ExperimentConfig, opts: &EvalOptions) -> CliResult<(PathBuf, Vec<Metric>)> {
    let y = io::read_channels(&opts.estimates)?;
    let truth = if opts.truth.is_empty() {
        None
    } else {
        Some(io::read_channels(&opts.truth)?)
    };
    let matrices = match (&opts.demixer, &opts.mixing) {
        (Some(w), Some(a)) => Some((io::read_matrix(w)?, io::read_matrix(a)?)),
        (None, None) => None,
        _ => return Err(CliError::invalid("--demixer and --mixing must be given together")),
    };
    let metrics = evaluate(&y, truth.as_deref(), matrices.as_ref().map(|(w, a)| (w, a)))?;
    let path = cfg.output_path("metrics.csv");
    write_metrics(&path, &metrics)?;
    Ok((path, metrics))
}

pub fn write_metrics(path: &Path, metrics: &[Metric]) -> CliResult<()> {
    let header = ["metric", "index", "value"].map(String::from);
    let rows = metrics
        .iter()
        .map(|m| vec![m.name.to_string(), m.index.to_string(), fmt_f64(m.value)]);
    io::write_csv(path, &header, rows)
}

#[derive(Debug, Clone)]
pub struct SurfaceOptions {
    pub marg1: Vec<f64>,
    /// When present, only the section through independence is evaluated.
    pub marg2: Option<Vec<f64>>,
    pub grid: usize,
    pub lambda: f64,
    pub beta: f64,
}

fn pair(v: &[f64], what: &str) -> CliResult<[f64; 2]> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(CliError::invalid(format!(
            "{what} needs exactly two probabilities"
        ))),
    }
}

/// Writes `p_aa,p_ba,value` for the divergence surface or slice.
pub fn cmd_surface(cfg: &ExperimentConfig, opts: &SurfaceOptions) -> CliResult<PathBuf> {
    let kind: DivergenceKind = cfg.optimizer.divergence.parse()?;
    let params = DivergenceParams {
        alpha: cfg.optimizer.alpha,
        lambda: opts.lambda,
        beta: opts.beta,
    };
    let marg1 = pair(&opts.marg1, "--marg1")?;
    let points = match &opts.marg2 {
        Some(m2) => divergence_slice(marg1, pair(m2, "--marg2")?, opts.grid, kind, &params)?,
        None => divergence_surface(marg1, opts.grid, kind, &params)?,
    };
    let path = cfg.output_path(&format!("surface_{kind}.csv"));
    let header = ["p_aa", "p_ba", "value"].map(String::from);
    let rows = points
        .iter()
        .map(|p| vec![fmt_f64(p.p_aa), fmt_f64(p.p_ba), fmt_f64(p.value)]);
    io::write_csv(&path, &header, rows)?;
    Ok(path)
}
