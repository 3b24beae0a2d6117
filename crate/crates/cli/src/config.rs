//! Experiment configuration: a nested TOML file whose every key can be
//! overridden from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use ccs_ica::{ContrastKind, ConvexityParam, DivergenceKind, GdConfig, JacobiConfig, PairwiseGdConfig};
use ccs_ica::{ReferenceSet, SourceKind};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Full-matrix gradient descent.
    Gd,
    /// Gradient descent on every channel pair.
    PairwiseGd,
    /// Grid search over planar rotations.
    Jacobi,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::PairwiseGd => "pairwise-gd",
            Algorithm::Jacobi => "jacobi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum References {
    Full,
    Strided,
}

impl From<References> for ReferenceSet {
    fn from(r: References) -> Self {
        match r {
            References::Full => ReferenceSet::Full,
            References::Strided => ReferenceSet::Strided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub divergence: String,
    pub alpha: f64,
    pub gamma: f64,
    pub max_iter: usize,
    pub epsilon: f64,
    pub ts: usize,
    pub references: References,
    /// Outer passes over all pairs for `pairwise-gd`.
    pub sweeps: usize,
    pub cm_stop_deg: f64,
    pub max_sweeps: usize,
    pub grid_step: Option<f64>,
    pub bandwidth: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let gd = GdConfig::<f64>::default();
        let jac = JacobiConfig::<f64>::default();
        Self {
            algorithm: Algorithm::Jacobi,
            divergence: "ccs".into(),
            alpha: gd.alpha,
            gamma: gd.gamma,
            max_iter: gd.max_iter,
            epsilon: gd.epsilon,
            ts: 1,
            references: References::Full,
            sweeps: 1,
            cm_stop_deg: jac.cm_stop_deg,
            max_sweeps: jac.max_sweeps,
            grid_step: None,
            bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Number of channels; defaults to the number of source kinds.
    pub channels: Option<usize>,
    pub samples: usize,
    pub trials: usize,
    pub sources: Vec<String>,
    pub snr_db: Option<f64>,
    /// Mixing matrix rows; when absent a preset or random matrix is used.
    pub mixing: Option<Vec<Vec<f64>>>,
    pub input: Vec<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            channels: None,
            samples: 1000,
            trials: 1,
            sources: vec!["uniform".into(), "laplacian".into()],
            snr_db: None,
            mixing: None,
            input: Vec::new(),
            output: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub jobs: usize,
    pub optimizer: OptimizerConfig,
    pub data: DataConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 1,
            optimizer: OptimizerConfig::default(),
            data: DataConfig::default(),
        }
    }
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct SharedArgs {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Convexity parameter; ±1 select the limit generators.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Gradient-descent step size.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Evaluation stride.
    #[arg(long, global = true)]
    pub ts: Option<usize>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub algorithm: Option<Algorithm>,
    /// Divergence id (ccs, cs, kl, e, alpha, js, c, beta).
    #[arg(long, global = true)]
    pub divergence: Option<String>,
    /// Worker threads for benchmark trials.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Loads the file named by `--config` (if any) and applies the flags.
    pub fn resolve(args: &SharedArgs) -> CliResult<Self> {
        let mut cfg = match &args.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(args);
        Ok(cfg)
    }

    pub fn apply(&mut self, args: &SharedArgs) {
        let o = &mut self.optimizer;
        if let Some(v) = args.seed {
            self.seed = v;
        }
        if let Some(v) = args.jobs {
            self.jobs = v;
        }
        if let Some(v) = args.alpha {
            o.alpha = v;
        }
        if let Some(v) = args.gamma {
            o.gamma = v;
        }
        if let Some(v) = args.ts {
            o.ts = v;
        }
        if let Some(v) = args.max_iter {
            o.max_iter = v;
        }
        if let Some(v) = args.epsilon {
            o.epsilon = v;
        }
        if let Some(v) = args.algorithm {
            o.algorithm = v;
        }
        if let Some(v) = &args.divergence {
            o.divergence = v.clone();
        }
        if let Some(v) = &args.out {
            self.data.output = Some(v.clone());
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.data.trials == 0 {
            return Err(CliError::invalid("trials must be >= 1"));
        }
        if self.jobs == 0 {
            return Err(CliError::invalid("jobs must be >= 1"));
        }
        let kinds = self.source_kinds()?;
        if let Some(m) = self.data.channels {
            if m != kinds.len() {
                return Err(CliError::invalid(format!(
                    "channels = {m} but {} source kinds are listed",
                    kinds.len()
                )));
            }
        }
        if let Some(rows) = &self.data.mixing {
            if rows.len() != kinds.len() || rows.iter().any(|r| r.len() != kinds.len()) {
                return Err(CliError::invalid(
                    "mixing matrix must be square with one row per source",
                ));
            }
        }
        ConvexityParam::new(self.optimizer.alpha)?;
        if self.optimizer.ts == 0 {
            return Err(CliError::invalid("ts must be >= 1"));
        }
        self.optimizer.divergence.parse::<DivergenceKind>()?;
        Ok(())
    }

    pub fn source_kinds(&self) -> CliResult<Vec<SourceKind>> {
        parse_source_kinds(&self.data.sources)
    }

    pub fn output_path(&self, fallback: &str) -> PathBuf {
        self.data
            .output
            .clone()
            .unwrap_or_else(|| PathBuf::from(fallback))
    }
}

pub fn parse_source_kinds(names: &[String]) -> CliResult<Vec<SourceKind>> {
    if names.is_empty() {
        return Err(CliError::invalid("at least one source kind is required"));
    }
    names
        .iter()
        .map(|n| n.parse::<SourceKind>().map_err(CliError::from))
        .collect()
}

impl OptimizerConfig {
    /// Sample-based contrast for the configured divergence id. Only the
    /// Cauchy-Schwarz family has one.
    pub fn contrast_kind(&self) -> CliResult<ContrastKind> {
        match self.divergence.parse::<DivergenceKind>()? {
            DivergenceKind::Ccs => Ok(ContrastKind::Ccs),
            DivergenceKind::CauchySchwarz => Ok(ContrastKind::Cs),
            other => Err(CliError::invalid(format!(
                "divergence '{other}' is available for surfaces only; separation supports ccs and cs"
            ))),
        }
    }

    pub fn gd(&self) -> CliResult<GdConfig<f64>> {
        let cfg = GdConfig {
            contrast: self.contrast_kind()?,
            gamma: self.gamma,
            max_iter: self.max_iter,
            epsilon: self.epsilon,
            alpha: self.alpha,
            stride: self.ts,
            references: self.references.into(),
            bandwidth: self.bandwidth,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn pairwise_gd(&self) -> CliResult<PairwiseGdConfig<f64>> {
        if self.sweeps == 0 {
            return Err(CliError::invalid("sweeps must be >= 1"));
        }
        Ok(PairwiseGdConfig {
            gd: self.gd()?,
            sweeps: self.sweeps,
        })
    }

    pub fn jacobi(&self) -> CliResult<JacobiConfig<f64>> {
        let base = JacobiConfig::<f64>::default();
        let cfg = JacobiConfig {
            contrast: self.contrast_kind()?,
            grid_step: self.grid_step.unwrap_or(base.grid_step),
            alpha: self.alpha,
            stride: self.ts,
            cm_stop_deg: self.cm_stop_deg,
            max_sweeps: self.max_sweeps,
            references: self.references.into(),
            bandwidth: self.bandwidth,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
