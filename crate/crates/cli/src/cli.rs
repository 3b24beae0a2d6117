use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::bench::{cmd_bench, BenchOptions};
use crate::commands::{cmd_eval, cmd_gen, cmd_mix, cmd_separate, cmd_surface};
use crate::commands::{EvalOptions, GenOptions, MixOptions, SeparateOptions, SurfaceOptions};
use crate::config::{ExperimentConfig, SharedArgs};
use crate::error::CliResult;
use crate::io::{fmt_f64, SignalFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Wav,
}

impl From<FormatArg> for SignalFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => SignalFormat::Csv,
            FormatArg::Wav => SignalFormat::Wav,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ccs-ica",
    version,
    about = "Blind source separation with the convex Cauchy-Schwarz divergence"
)]
pub struct Cli {
    #[command(flatten)]
    pub shared: SharedArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic sources, one file per source.
    Gen {
        /// Source kinds: uniform, rayleigh, laplacian, lognormal (or s1..s4).
        #[arg(long, value_delimiter = ',')]
        sources: Option<Vec<String>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Mix source files into observations.
    Mix {
        #[arg(long, num_args = 1..)]
        input: Vec<PathBuf>,
        /// CSV mixing matrix; defaults to the configured or reference matrix.
        #[arg(long)]
        mixing: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Estimate sources from a mixture.
    Separate {
        #[arg(long, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Kurtosis, SIR and Amari index of a separation.
    Eval {
        #[arg(long, num_args = 1.., required = true)]
        estimates: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        truth: Vec<PathBuf>,
        #[arg(long)]
        demixer: Option<PathBuf>,
        #[arg(long)]
        mixing: Option<PathBuf>,
    },
    /// Reproduce a table or figure at reduced scale.
    Bench {
        /// T1, T4, T5, fig4, fig5, fig6 or fig7.
        #[arg(long)]
        table: String,
        /// Fraction in (0, 1] of the full trial counts and problem sizes.
        #[arg(long, default_value_t = 0.2)]
        scale: f64,
        #[arg(long)]
        trials: Option<usize>,
        /// Source files for fig6 / fig7.
        #[arg(long, num_args = 1..)]
        input: Vec<PathBuf>,
    },
    /// Divergence over a 2×2 joint table, as a surface or a slice.
    Surface {
        #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.3])]
        marg1: Vec<f64>,
        /// Evaluate only the section with these second-variable marginals.
        #[arg(long, value_delimiter = ',')]
        marg2: Option<Vec<f64>>,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
    },
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = ExperimentConfig::resolve(&cli.shared)?;
    cfg.validate()?;
    match cli.command {
        Command::Gen {
            sources,
            samples,
            format,
        } => {
            let opts = GenOptions {
                sources,
                samples,
                format: format.into(),
            };
            report(&cmd_gen(&cfg, &opts)?);
        }
        Command::Mix {
            input,
            mixing,
            snr_db,
            format,
        } => {
            let opts = MixOptions {
                inputs: input,
                mixing,
                snr_db,
                format: format.into(),
            };
            report(&cmd_mix(&cfg, &opts)?);
        }
        Command::Separate { input, format } => {
            let opts = SeparateOptions {
                inputs: input,
                format: format.into(),
            };
            report(&cmd_separate(&cfg, &opts)?);
        }
        Command::Eval {
            estimates,
            truth,
            demixer,
            mixing,
        } => {
            let opts = EvalOptions {
                estimates,
                truth,
                demixer,
                mixing,
            };
            let (path, metrics) = cmd_eval(&cfg, &opts)?;
            for m in &metrics {
                println!("{} {} {}", m.name, m.index, fmt_f64(m.value));
            }
            report(&[path]);
        }
        Command::Bench {
            table,
            scale,
            trials,
            input,
        } => {
            let opts = BenchOptions {
                table,
                scale,
                trials,
                inputs: input,
            };
            let (rep, paths) = cmd_bench(&cfg, &opts)?;
            for c in &rep.cells {
                println!(
                    "{} {}: median amari x100 {:.3}, mean SIR {:.2} dB, {:.3} s/trial ({} trials, {} failed)",
                    rep.table,
                    c.name,
                    c.median_amari_x100,
                    c.mean_sir_db,
                    c.mean_runtime_s,
                    c.trials,
                    c.failures
                );
            }
            report(&paths);
        }
        Command::Surface {
            marg1,
            marg2,
            grid,
            lambda,
            beta,
        } => {
            let opts = SurfaceOptions {
                marg1,
                marg2,
                grid,
                lambda,
                beta,
            };
            report(&[cmd_surface(&cfg, &opts)?]);
        }
    }
    Ok(())
}
