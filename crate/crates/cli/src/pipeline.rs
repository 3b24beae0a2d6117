//! Algorithm dispatch shared by `separate` and `bench`.

use ccs_ica::{ica_gradient_descent, ica_pairwise_gd, ica_pairwise_jacobi, separate_with};
use ccs_ica::{SignalMatrix, WhiteningTransform};
use ndarray::Array2;

use crate::config::{Algorithm, OptimizerConfig};
use crate::error::CliResult;

/// One entry of a convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// `all` for full-matrix descent, `pair-i-j` for a pairwise subproblem,
    /// `sweep` for the Jacobi convergence sum (degrees).
    pub stage: String,
    pub step: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct Separation {
    /// Demixer acting on the raw mixture, `W_algo · V`.
    pub demixer: Array2<f64>,
    pub w: Array2<f64>,
    pub whitening: WhiteningTransform<f64>,
    pub estimates: SignalMatrix<f64>,
    pub trace: Vec<TraceRow>,
    /// Descent steps, or Jacobi sweeps.
    pub iterations: usize,
}

pub fn run_separation(x: &SignalMatrix<f64>, opt: &OptimizerConfig) -> CliResult<Separation> {
    let (demixer, w, whitening, trace, iterations) = match opt.algorithm {
        Algorithm::Gd => {
            let out = ica_gradient_descent(x, &opt.gd()?)?;
            let trace = out
                .trace
                .iter()
                .enumerate()
                .map(|(step, &value)| TraceRow {
                    stage: "all".into(),
                    step,
                    value,
                })
                .collect();
            (out.demixer, out.w, out.whitening, trace, out.iterations)
        }
        Algorithm::PairwiseGd => {
            let out = ica_pairwise_gd(x, &opt.pairwise_gd()?)?;
            let trace = out
                .pair_traces
                .iter()
                .flat_map(|((i, j), values)| {
                    values.iter().enumerate().map(move |(step, &value)| TraceRow {
                        stage: format!("pair-{i}-{j}"),
                        step,
                        value,
                    })
                })
                .collect();
            (out.demixer, out.w, out.whitening, trace, out.iterations)
        }
        Algorithm::Jacobi => {
            let out = ica_pairwise_jacobi(x, &opt.jacobi()?)?;
            let trace = out
                .sweep_sums
                .iter()
                .enumerate()
                .map(|(step, &value)| TraceRow {
                    stage: "sweep".into(),
                    step,
                    value,
                })
                .collect();
            let sweeps = out.sweep_sums.len();
            (out.demixer, out.w, out.whitening, trace, sweeps)
        }
    };
    let estimates = separate_with(x, &w, &whitening)?;
    Ok(Separation {
        demixer,
        w,
        whitening,
        estimates,
        trace,
        iterations,
    })
}
