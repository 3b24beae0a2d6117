//! Separation algorithms: full gradient descent, pairwise gradient descent
//! and the pairwise Jacobi grid search.

use ndarray::{s, Array2, ArrayView2, Axis};

use crate::error::{IcaError, Result};
use crate::objective::{CcsObjective, ContrastConfig, ContrastKind, DemixingState, ReferenceSet};
use crate::preprocess::{center_and_whiten, SignalMatrix, WhiteningTransform};
use crate::scalar::Scalar;

/// Planar rotation `[[cos θ, −sin θ], [sin θ, cos θ]]`.
pub fn rotation<T: Scalar>(theta: T) -> Array2<T> {
    let (s, c) = theta.sin_cos();
    ndarray::arr2(&[[c, -s], [s, c]])
}

/// Demixer applicable to raw observations: `W_algo · V`.
///
/// The whitening mean still has to be subtracted from raw data first; use
/// [`separate_with`] to do both.
pub fn compose_demixer<T: Scalar>(w_algo: &Array2<T>, whitening: &WhiteningTransform<T>) -> Array2<T> {
    w_algo.dot(&whitening.v)
}

/// Applies `W_algo` to whitened raw observations.
pub fn separate_with<T: Scalar>(
    x: &SignalMatrix<T>,
    w_algo: &Array2<T>,
    whitening: &WhiteningTransform<T>,
) -> Result<SignalMatrix<T>> {
    whitening.apply(x)?.transform(w_algo)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdConfig<T> {
    pub contrast: ContrastKind,
    pub gamma: T,
    pub max_iter: usize,
    pub epsilon: T,
    pub alpha: T,
    pub stride: usize,
    pub references: ReferenceSet,
    pub bandwidth: Option<T>,
}

impl<T: Scalar> Default for GdConfig<T> {
    fn default() -> Self {
        Self {
            contrast: ContrastKind::Ccs,
            gamma: T::lit(0.3),
            max_iter: 250,
            epsilon: T::lit(1e-4),
            alpha: T::lit(-0.99999),
            stride: 1,
            references: ReferenceSet::Full,
            bandwidth: None,
        }
    }
}

impl<T: Scalar> GdConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > T::zero()) || !self.gamma.is_finite() {
            return Err(IcaError::invalid(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.epsilon > T::zero()) {
            return Err(IcaError::invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        self.contrast_config().map(|_| ())
    }

    fn contrast_config(&self) -> Result<ContrastConfig<T>> {
        let mut cfg = ContrastConfig::new(self.alpha, self.stride)?
            .with_references(self.references)
            .with_kind(self.contrast);
        cfg.bandwidth = self.bandwidth;
        Ok(cfg)
    }
}

/// Result of a gradient-descent run.
#[derive(Debug, Clone, PartialEq)]
pub struct GdOutcome<T> {
    /// Composed demixer `W · V` for raw observations.
    pub demixer: Array2<T>,
    /// Demixer acting on whitened data.
    pub w: Array2<T>,
    pub whitening: WhiteningTransform<T>,
    /// Contrast at the start and after every update.
    pub trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

struct GdRun<T> {
    w: Array2<T>,
    trace: Vec<T>,
    iterations: usize,
    converged: bool,
}

fn normalize_rows<T: Scalar>(w: &mut Array2<T>) -> Result<()> {
    for mut row in w.rows_mut() {
        let n = row.iter().map(|&v| v * v).sum::<T>().sqrt();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(IcaError::NonFinite(format!("demixer row norm {n}")));
        }
        row.mapv_inplace(|v| v / n);
    }
    Ok(())
}

/// Descent from `W = I` on already whitened data.
fn gd_core<T: Scalar>(z: ArrayView2<'_, T>, cfg: &GdConfig<T>) -> Result<GdRun<T>> {
    let m = z.nrows();
    let mut w = Array2::<T>::eye(m);
    let obj = CcsObjective::from_view(z, &cfg.contrast_config()?)?;
    if cfg.max_iter == 0 {
        let d = obj.contrast(&w)?;
        return Ok(GdRun {
            w,
            trace: vec![d],
            iterations: 0,
            converged: false,
        });
    }
    let (mut d, mut g) = obj.value_and_gradient(&w)?;
    let mut trace = vec![d];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(IcaError::NonFinite(format!("gradient at iteration {iterations}")));
        }
        w.scaled_add(-cfg.gamma, &g);
        normalize_rows(&mut w)?;
        let state = DemixingState::new(w.clone())?;
        let terms = obj.terms(&state)?;
        let d_new = terms.value()?;
        iterations += 1;
        trace.push(d_new);
        if (d_new - d).abs() <= cfg.epsilon {
            converged = true;
            break;
        }
        d = d_new;
        g = terms.gradient();
    }
    Ok(GdRun {
        w,
        trace,
        iterations,
        converged,
    })
}

/// Centers and whitens `x`, then descends the contrast from the identity.
pub fn ica_gradient_descent<T: Scalar>(x: &SignalMatrix<T>, cfg: &GdConfig<T>) -> Result<GdOutcome<T>> {
    cfg.validate()?;
    let (z, whitening) = center_and_whiten(x)?;
    let run = gd_core(z.data().view(), cfg)?;
    Ok(GdOutcome {
        demixer: compose_demixer(&run.w, &whitening),
        w: run.w,
        whitening,
        trace: run.trace,
        iterations: run.iterations,
        converged: run.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseGdConfig<T> {
    pub gd: GdConfig<T>,
    /// Number of outer sweeps over all pairs.
    pub sweeps: usize,
}

impl<T: Scalar> Default for PairwiseGdConfig<T> {
    fn default() -> Self {
        Self {
            gd: GdConfig::default(),
            sweeps: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseGdOutcome<T> {
    pub demixer: Array2<T>,
    pub w: Array2<T>,
    pub whitening: WhiteningTransform<T>,
    /// One contrast trace per pair visit, in visiting order.
    pub pair_traces: Vec<((usize, usize), Vec<T>)>,
    pub iterations: usize,
}

fn all_pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |i| ((i + 1)..m).map(move |j| (i, j)))
}

fn embed_pair<T: Scalar>(m: usize, i: usize, j: usize, r: &Array2<T>) -> Array2<T> {
    let mut full = Array2::eye(m);
    full[[i, i]] = r[[0, 0]];
    full[[i, j]] = r[[0, 1]];
    full[[j, i]] = r[[1, 0]];
    full[[j, j]] = r[[1, 1]];
    full
}

/// Applies a 2×2 transform to rows `(i, j)` of `y` in place.
fn apply_pair<T: Scalar>(y: &mut Array2<T>, i: usize, j: usize, r: &Array2<T>) {
    for t in 0..y.ncols() {
        let a = y[[i, t]];
        let b = y[[j, t]];
        y[[i, t]] = r[[0, 0]] * a + r[[0, 1]] * b;
        y[[j, t]] = r[[1, 0]] * a + r[[1, 1]] * b;
    }
}

/// Sweeps every pair of whitened channels, solving each 2×2 subproblem by
/// gradient descent and accumulating the pair solutions.
pub fn ica_pairwise_gd<T: Scalar>(
    x: &SignalMatrix<T>,
    cfg: &PairwiseGdConfig<T>,
) -> Result<PairwiseGdOutcome<T>> {
    cfg.gd.validate()?;
    let m = x.channels();
    let (z, whitening) = center_and_whiten(x)?;
    let mut y = z.into_inner();
    let mut w = Array2::<T>::eye(m);
    let mut pair_traces = Vec::new();
    let mut iterations = 0;
    for _ in 0..cfg.sweeps {
        for (i, j) in all_pairs(m) {
            let sub = y.select(Axis(0), &[i, j]);
            let run = gd_core(sub.view(), &cfg.gd)?;
            iterations += run.iterations;
            apply_pair(&mut y, i, j, &run.w);
            w = embed_pair(m, i, j, &run.w).dot(&w);
            pair_traces.push(((i, j), run.trace));
        }
    }
    Ok(PairwiseGdOutcome {
        demixer: compose_demixer(&w, &whitening),
        w,
        whitening,
        pair_traces,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiConfig<T> {
    pub contrast: ContrastKind,
    /// Grid spacing; the grid is `k · step` for every integer `k` with `|k · step| ≤ π/4`.
    pub grid_step: T,
    pub alpha: T,
    pub stride: usize,
    /// Stop once `Σ_{i<j} |CM[i,j]|` (degrees) falls to this value.
    pub cm_stop_deg: T,
    /// Safeguard on the number of outer sweeps.
    pub max_sweeps: usize,
    pub references: ReferenceSet,
    pub bandwidth: Option<T>,
}

impl<T: Scalar> Default for JacobiConfig<T> {
    fn default() -> Self {
        Self {
            contrast: ContrastKind::Ccs,
            grid_step: T::lit(std::f64::consts::PI / 64.0),
            alpha: T::lit(-0.99999),
            stride: 1,
            cm_stop_deg: T::one(),
            max_sweeps: 20,
            references: ReferenceSet::Full,
            bandwidth: None,
        }
    }
}

/// Value stored in unvisited pair slots of the convergence matrix.
pub const CM_SENTINEL_DEG: f64 = 90.0;

impl<T: Scalar> JacobiConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let quarter = T::lit(std::f64::consts::FRAC_PI_4);
        if !(self.grid_step > T::zero()) || self.grid_step > quarter {
            return Err(IcaError::invalid(format!(
                "grid step must lie in (0, pi/4], got {}",
                self.grid_step
            )));
        }
        if !(self.cm_stop_deg > T::zero()) {
            return Err(IcaError::invalid("cm_stop_deg must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(IcaError::invalid("max_sweeps must be >= 1"));
        }
        self.contrast_config().map(|_| ())
    }

    fn contrast_config(&self) -> Result<ContrastConfig<T>> {
        let mut cfg = ContrastConfig::new(self.alpha, self.stride)?
            .with_references(self.references)
            .with_kind(self.contrast);
        cfg.bandwidth = self.bandwidth;
        Ok(cfg)
    }

    /// Grid angles in search order: `0, −g, +g, −2g, +2g, …`.
    pub fn search_order(&self) -> Vec<T> {
        let quarter = std::f64::consts::FRAC_PI_4;
        let step = self.grid_step.as_f64();
        let n = ((quarter + 1e-12) / step).floor() as usize;
        let mut out = vec![T::zero()];
        for k in 1..=n {
            let a = self.grid_step * T::from_usize_lossy(k);
            out.push(-a);
            out.push(a);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiOutcome<T> {
    pub demixer: Array2<T>,
    /// Accumulated rotation acting on whitened data.
    pub w: Array2<T>,
    pub whitening: WhiteningTransform<T>,
    /// Last applied angle per pair in degrees, symmetric, zero diagonal.
    pub cm: Array2<T>,
    /// `Σ_{i<j} |CM|` after each sweep.
    pub sweep_sums: Vec<T>,
    pub converged: bool,
}

/// Best grid angle for one pair of whitened rows, with ties going to the
/// earlier entry of [`JacobiConfig::search_order`].
fn best_angle<T: Scalar>(pair: ArrayView2<'_, T>, cfg: &JacobiConfig<T>, grid: &[T]) -> Result<T> {
    // Rotations have unit determinant, so the joint table is shared by all angles.
    let obj = CcsObjective::from_view(pair, &cfg.contrast_config()?)?;
    let mut best = (T::zero(), T::infinity());
    for &theta in grid {
        let d = obj.contrast(&rotation(theta))?;
        if d < best.1 {
            best = (theta, d);
        }
    }
    if !best.1.is_finite() {
        return Err(IcaError::NonFinite("pair contrast".into()));
    }
    Ok(best.0)
}

/// Pairwise rotation search on whitened data.
pub fn ica_pairwise_jacobi<T: Scalar>(
    x: &SignalMatrix<T>,
    cfg: &JacobiConfig<T>,
) -> Result<JacobiOutcome<T>> {
    cfg.validate()?;
    let m = x.channels();
    let (z, whitening) = center_and_whiten(x)?;
    let grid = cfg.search_order();
    let to_deg = T::lit(180.0 / std::f64::consts::PI);
    let mut y = z.into_inner();
    let mut w = Array2::<T>::eye(m);
    let mut cm = Array2::from_elem((m, m), T::lit(CM_SENTINEL_DEG));
    cm.diag_mut().fill(T::zero());
    let mut sweep_sums = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_sweeps {
        for (i, j) in all_pairs(m) {
            if cm[[i, j]] == T::zero() {
                continue;
            }
            let pair = y.slice(s![i..=j;j - i, ..]);
            debug_assert_eq!(pair.nrows(), 2);
            let theta = best_angle(pair, cfg, &grid)?;
            let r = rotation(theta);
            apply_pair(&mut y, i, j, &r);
            w = embed_pair(m, i, j, &r).dot(&w);
            cm[[i, j]] = theta * to_deg;
            cm[[j, i]] = theta * to_deg;
        }
        let total: T = all_pairs(m).map(|(i, j)| cm[[i, j]].abs()).sum();
        sweep_sums.push(total);
        if total <= cfg.cm_stop_deg {
            converged = true;
            break;
        }
    }
    Ok(JacobiOutcome {
        demixer: compose_demixer(&w, &whitening),
        w,
        whitening,
        cm,
        sweep_sums,
        converged,
    })
}
