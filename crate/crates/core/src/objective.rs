//! Nonparametric CCS contrast over demixed samples and its analytic gradient.
//!
//! With `y_t = W x_t` the contrast is
//!
//! ```text
//! D(W) = ln V1 + ln V2 − 2 ln V3
//! V1 = Σ_t f(q_t)²,  V2 = Σ_t f(r_t)²,  V3 = Σ_t f(q_t) f(r_t)
//! q_t = p̂(x_t) / |det W|,  r_t = Π_m p̂_m(w_m x_t)
//! ```
//!
//! where `p̂` is the joint Parzen estimate of the whitened observations
//! (independent of `W`, computed once) and `p̂_m` the univariate estimate of
//! the `m`-th output row. `t` runs over the strided evaluation set.

use ndarray::{Array2, ArrayView2, Axis};

use crate::density::{default_bandwidth, inv_sqrt_2pi, multivariate_norm};
use crate::divergences::ConvexityParam;
use crate::error::{IcaError, Result};
use crate::linalg::{cofactors, determinant};
use crate::preprocess::SignalMatrix;
use crate::scalar::{Scalar, EPS_FLOOR};

/// Minimum `|det W|` accepted by the contrast.
pub const SINGULAR_DET: f64 = 1e-12;

/// Demixing matrix together with the quantities the gradient needs.
#[derive(Debug, Clone, PartialEq)]
pub struct DemixingState<T> {
    pub w: Array2<T>,
    pub det: T,
    /// `cofactors[(m, l)] = ∂det(W)/∂w_ml`
    pub cofactors: Array2<T>,
    pub row_norms: Vec<T>,
}

impl<T: Scalar> DemixingState<T> {
    pub fn new(w: Array2<T>) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(IcaError::invalid("demixing matrix must be square"));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(IcaError::NonFinite("demixing matrix entry".into()));
        }
        let det = determinant(w.view());
        if !(det.abs() >= T::lit(SINGULAR_DET)) {
            return Err(IcaError::SingularDemixer { det: det.as_f64() });
        }
        let cof = cofactors(w.view());
        let row_norms = w
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&v| v * v).sum::<T>().sqrt())
            .collect();
        Ok(Self {
            w,
            det,
            cofactors: cof,
            row_norms,
        })
    }
}

/// Cofactor matrix of a square matrix; defined for singular input too.
pub fn cofactor_matrix<T: Scalar>(w: ArrayView2<'_, T>) -> Array2<T> {
    cofactors(w)
}

/// Which samples serve as Parzen references for the univariate and joint
/// estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceSet {
    /// The strided evaluation set itself: `O((T/Ts)²)` per density sweep.
    #[default]
    Strided,
    /// All `T` samples: `O(T · T/Ts)` per sweep, lower estimator variance.
    Full,
}

/// Map applied to both densities before the Cauchy-Schwarz log-ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContrastKind {
    /// Convex generator `f_α`.
    #[default]
    Ccs,
    /// Identity: the plain Cauchy-Schwarz contrast `ln Σq² + ln Σr² − 2 ln Σqr`.
    Cs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastConfig<T> {
    pub kind: ContrastKind,
    /// Only read for [`ContrastKind::Ccs`].
    pub alpha: ConvexityParam<T>,
    /// Evaluation stride `Ts ≥ 1`; samples `0, Ts, 2Ts, …` are used.
    pub stride: usize,
    /// Parzen bandwidth; `None` applies the rule of thumb to the reference count.
    pub bandwidth: Option<T>,
    pub references: ReferenceSet,
}

impl<T: Scalar> ContrastConfig<T> {
    pub fn new(alpha: T, stride: usize) -> Result<Self> {
        Ok(Self {
            kind: ContrastKind::Ccs,
            alpha: ConvexityParam::new(alpha)?,
            stride,
            bandwidth: None,
            references: ReferenceSet::default(),
        })
    }

    pub fn with_kind(mut self, kind: ContrastKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_references(mut self, references: ReferenceSet) -> Self {
        self.references = references;
        self
    }

    pub fn with_bandwidth(mut self, h: T) -> Self {
        self.bandwidth = Some(h);
        self
    }
}

/// Sums entering the contrast and their derivatives with respect to every `w_ml`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastTerms<T> {
    pub v1: T,
    pub v2: T,
    pub v3: T,
    pub dv1: Array2<T>,
    pub dv2: Array2<T>,
    pub dv3: Array2<T>,
}

impl<T: Scalar> ContrastTerms<T> {
    pub fn value(&self) -> Result<T> {
        log_ratio(self.v1, self.v2, self.v3)
    }

    /// `∂D/∂W = V1'/V1 + V2'/V2 − 2 V3'/V3`
    pub fn gradient(&self) -> Array2<T> {
        let two = T::lit(2.0);
        Array2::from_shape_fn(self.dv1.dim(), |ix| {
            self.dv1[ix] / self.v1 + self.dv2[ix] / self.v2 - two * self.dv3[ix] / self.v3
        })
    }
}

fn log_ratio<T: Scalar>(v1: T, v2: T, v3: T) -> Result<T> {
    if !(v1.is_finite() && v2.is_finite() && v3.is_finite()) {
        return Err(IcaError::NonFinite(format!("contrast terms ({v1}, {v2}, {v3})")));
    }
    if !(v1 > T::zero() && v2 > T::zero() && v3 > T::zero()) {
        return Err(IcaError::DegenerateDivergence(format!(
            "contrast terms ({v1}, {v2}, {v3}) are not all positive"
        )));
    }
    debug_assert!(
        v3 * v3 <= v1 * v2 * (T::one() + T::lit(1e-9)),
        "Cauchy-Schwarz violated: {v3}² > {v1}·{v2}"
    );
    Ok(v1.ln() + v2.ln() - T::lit(2.0) * v3.ln())
}

/// Contrast bound to one whitened data set. The joint density table is
/// computed once at construction and shared by every evaluation.
#[derive(Debug, Clone)]
pub struct CcsObjective<T> {
    /// Evaluation points, `M × n_eval`.
    x_eval: Array2<T>,
    /// Parzen references, `M × n_ref`. Equal to `x_eval` for strided references.
    x_ref: Option<Array2<T>>,
    h: T,
    kind: ContrastKind,
    alpha: ConvexityParam<T>,
    /// `p̂(x_t)` at each evaluation point.
    joint: Vec<T>,
}

impl<T: Scalar> CcsObjective<T> {
    pub fn new(x: &SignalMatrix<T>, cfg: &ContrastConfig<T>) -> Result<Self> {
        Self::from_view(x.data().view(), cfg)
    }

    pub(crate) fn from_view(x: ArrayView2<'_, T>, cfg: &ContrastConfig<T>) -> Result<Self> {
        if cfg.stride == 0 {
            return Err(IcaError::invalid("stride must be >= 1"));
        }
        let t = x.ncols();
        let idx: Vec<usize> = (0..t).step_by(cfg.stride).collect();
        if idx.len() < 2 {
            return Err(IcaError::invalid(format!(
                "stride {} leaves {} evaluation point(s); need at least 2",
                cfg.stride,
                idx.len()
            )));
        }
        let x_eval = x.select(Axis(1), &idx);
        // With unit stride both policies use the same sample set.
        let x_ref = match cfg.references {
            ReferenceSet::Full if cfg.stride > 1 => Some(x.to_owned()),
            _ => None,
        };
        let n_ref = x_ref.as_ref().map_or(idx.len(), |r| r.ncols());
        let h = match cfg.bandwidth {
            Some(h) if h > T::zero() && h.is_finite() => h,
            Some(h) => return Err(IcaError::invalid(format!("bandwidth must be positive, got {h}"))),
            None => default_bandwidth(n_ref),
        };
        let mut obj = Self {
            x_eval,
            x_ref,
            h,
            kind: cfg.kind,
            alpha: cfg.alpha,
            joint: Vec::new(),
        };
        obj.joint = obj.joint_density();
        debug_assert_eq!(obj.joint.len(), obj.eval_len());
        Ok(obj)
    }

    pub fn channels(&self) -> usize {
        self.x_eval.nrows()
    }

    pub fn eval_len(&self) -> usize {
        self.x_eval.ncols()
    }

    pub fn reference_len(&self) -> usize {
        self.refs().ncols()
    }

    pub fn bandwidth(&self) -> T {
        self.h
    }

    /// Joint density of the observations at the evaluation points.
    pub fn joint_table(&self) -> &[T] {
        &self.joint
    }

    #[inline]
    fn map(&self, t: T) -> T {
        match self.kind {
            ContrastKind::Ccs => self.alpha.eval(t),
            ContrastKind::Cs => t,
        }
    }

    #[inline]
    fn map_derivative(&self, t: T) -> T {
        match self.kind {
            ContrastKind::Ccs => self.alpha.derivative(t),
            ContrastKind::Cs => T::one(),
        }
    }

    fn refs(&self) -> &Array2<T> {
        self.x_ref.as_ref().unwrap_or(&self.x_eval)
    }

    fn joint_density(&self) -> Vec<T> {
        let refs = self.refs();
        let (m, n_e) = self.x_eval.dim();
        let n_r = refs.ncols();
        let inv_h2 = T::one() / (self.h * self.h);
        let half = T::lit(0.5);
        let norm = multivariate_norm::<T>(m, self.h, n_r);
        (0..n_e)
            .map(|k| {
                let mut s = T::zero();
                for i in 0..n_r {
                    let mut d2 = T::zero();
                    for c in 0..m {
                        let d = self.x_eval[[c, k]] - refs[[c, i]];
                        d2 += d * d;
                    }
                    s += (-half * d2 * inv_h2).exp();
                }
                s * norm
            })
            .collect()
    }

    fn check_w(&self, w: &Array2<T>) -> Result<()> {
        let m = self.channels();
        if w.dim() != (m, m) {
            return Err(IcaError::invalid(format!(
                "demixing matrix is {:?}, expected {m}x{m}",
                w.dim()
            )));
        }
        Ok(())
    }

    /// Marginal densities `p̂_m(w_m x_t)` at every evaluation point, and
    /// optionally `∂p̂_m/∂w_ml` (references move with `W` as well).
    fn marginals(&self, w: &Array2<T>, with_grad: bool) -> (Array2<T>, Option<Vec<Array2<T>>>) {
        let refs = self.refs();
        let (m, n_e) = self.x_eval.dim();
        let n_r = refs.ncols();
        let h = self.h;
        let inv_h = T::one() / h;
        let half = T::lit(0.5);
        let norm = inv_sqrt_2pi::<T>() / (T::from_usize_lossy(n_r) * h);
        let mut dens = Array2::zeros((m, n_e));
        let mut grads = with_grad.then(|| vec![Array2::zeros((n_e, m)); m]);
        let mut b = vec![T::zero(); m];
        for row in 0..m {
            let w_row = w.row(row);
            let y_e: Vec<T> = (0..n_e)
                .map(|k| (0..m).map(|c| w_row[c] * self.x_eval[[c, k]]).sum())
                .collect();
            if self.x_ref.is_none() {
                self.symmetric_row(&y_e, row, &mut dens, grads.as_mut(), inv_h, norm);
                continue;
            }
            let y_r: Vec<T> = (0..n_r)
                .map(|i| (0..m).map(|c| w_row[c] * refs[[c, i]]).sum())
                .collect();
            for k in 0..n_e {
                let yk = y_e[k];
                let mut s = T::zero();
                if let Some(g) = grads.as_mut() {
                    // Σ_i φ'(u)·(x_kl − x_il)/h with φ'(u) = −u φ(u).
                    let mut a = T::zero();
                    b.iter_mut().for_each(|v| *v = T::zero());
                    for i in 0..n_r {
                        let u = (yk - y_r[i]) * inv_h;
                        let e = (-half * u * u).exp();
                        s += e;
                        let du = -u * e;
                        a += du;
                        for c in 0..m {
                            b[c] += du * refs[[c, i]];
                        }
                    }
                    let gm = &mut g[row];
                    for c in 0..m {
                        gm[[k, c]] = (a * self.x_eval[[c, k]] - b[c]) * inv_h * norm;
                    }
                } else {
                    for &yi in &y_r {
                        let u = (yk - yi) * inv_h;
                        s += (-half * u * u).exp();
                    }
                }
                dens[[row, k]] = s * norm;
            }
        }
        (dens, grads)
    }

    /// Same sums as the general path when the evaluation points are their own
    /// references: each unordered pair is visited once.
    fn symmetric_row(
        &self,
        y: &[T],
        row: usize,
        dens: &mut Array2<T>,
        grads: Option<&mut Vec<Array2<T>>>,
        inv_h: T,
        norm: T,
    ) {
        let x = &self.x_eval;
        let (m, n) = x.dim();
        let half = T::lit(0.5);
        let mut s = vec![T::one(); n];
        match grads {
            None => {
                for k in 0..n {
                    let yk = y[k];
                    let mut acc = T::zero();
                    for i in (k + 1)..n {
                        let u = (yk - y[i]) * inv_h;
                        let e = (-half * u * u).exp();
                        acc += e;
                        s[i] += e;
                    }
                    s[k] += acc;
                }
            }
            Some(g) => {
                let mut a = vec![T::zero(); n];
                let mut b = vec![T::zero(); n * m];
                for k in 0..n {
                    let yk = y[k];
                    for i in (k + 1)..n {
                        let u = (yk - y[i]) * inv_h;
                        let e = (-half * u * u).exp();
                        s[k] += e;
                        s[i] += e;
                        let du = -u * e;
                        a[k] += du;
                        a[i] -= du;
                        for c in 0..m {
                            b[k * m + c] += du * x[[c, i]];
                            b[i * m + c] -= du * x[[c, k]];
                        }
                    }
                }
                let gm = &mut g[row];
                for k in 0..n {
                    for c in 0..m {
                        gm[[k, c]] = (a[k] * x[[c, k]] - b[k * m + c]) * inv_h * norm;
                    }
                }
            }
        }
        for k in 0..n {
            dens[[row, k]] = s[k] * norm;
        }
    }

    /// Contrast value at `W`.
    pub fn contrast(&self, w: &Array2<T>) -> Result<T> {
        self.check_w(w)?;
        let det = determinant(w.view());
        if !(det.abs() >= T::lit(SINGULAR_DET)) {
            return Err(IcaError::SingularDemixer { det: det.as_f64() });
        }
        let abs_det = det.abs();
        let (dens, _) = self.marginals(w, false);
        let eps = T::lit(EPS_FLOOR);
        let (mut v1, mut v2, mut v3) = (T::zero(), T::zero(), T::zero());
        for k in 0..self.eval_len() {
            let q = (self.joint[k] / abs_det).max(eps);
            let r = dens.column(k).iter().fold(T::one(), |acc, &p| acc * p).max(eps);
            let fq = self.map(q);
            let fr = self.map(r);
            v1 += fq * fq;
            v2 += fr * fr;
            v3 += fq * fr;
        }
        log_ratio(v1, v2, v3)
    }

    /// Contrast sums and their derivatives at `W`.
    pub fn terms(&self, state: &DemixingState<T>) -> Result<ContrastTerms<T>> {
        let w = &state.w;
        self.check_w(w)?;
        let m = self.channels();
        let det = state.det;
        let abs_det = det.abs();
        let (dens, grads) = self.marginals(w, true);
        let grads = grads.expect("gradient requested");
        let eps = T::lit(EPS_FLOOR);
        let two = T::lit(2.0);
        let (mut v1, mut v2, mut v3) = (T::zero(), T::zero(), T::zero());
        // Joint-term derivatives share the factor ∂q/∂w_ml = −q·C_ml/det.
        let (mut s1, mut s3q) = (T::zero(), T::zero());
        let mut dv2 = Array2::zeros((m, m));
        let mut dv3r = Array2::zeros((m, m));
        let mut others = vec![T::zero(); m];
        for k in 0..self.eval_len() {
            let q_raw = self.joint[k] / abs_det;
            let q = q_raw.max(eps);
            let col = dens.column(k);
            let r_raw = col.iter().fold(T::one(), |acc, &p| acc * p);
            let r = r_raw.max(eps);
            let fq = self.map(q);
            let fr = self.map(r);
            v1 += fq * fq;
            v2 += fr * fr;
            v3 += fq * fr;
            if q_raw > eps {
                let dfq = self.map_derivative(q);
                s1 += two * fq * dfq * q;
                s3q += dfq * fr * q;
            }
            if r_raw > eps {
                let dfr = self.map_derivative(r);
                for (j, o) in others.iter_mut().enumerate() {
                    *o = col
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != j)
                        .fold(T::one(), |acc, (_, &p)| acc * p);
                }
                let c2 = two * fr * dfr;
                let c3 = fq * dfr;
                for row in 0..m {
                    let g = &grads[row];
                    for l in 0..m {
                        let dr = others[row] * g[[k, l]];
                        dv2[[row, l]] += c2 * dr;
                        dv3r[[row, l]] += c3 * dr;
                    }
                }
            }
        }
        let cof_over_det = state.cofactors.mapv(|c| c / det);
        let dv1 = cof_over_det.mapv(|c| -s1 * c);
        let dv3 = Array2::from_shape_fn((m, m), |ix| -s3q * cof_over_det[ix] + dv3r[ix]);
        Ok(ContrastTerms {
            v1,
            v2,
            v3,
            dv1,
            dv2,
            dv3,
        })
    }

    /// Contrast value and gradient at `W`.
    pub fn value_and_gradient(&self, w: &Array2<T>) -> Result<(T, Array2<T>)> {
        let state = DemixingState::new(w.clone())?;
        let terms = self.terms(&state)?;
        Ok((terms.value()?, terms.gradient()))
    }

    pub fn gradient(&self, w: &Array2<T>) -> Result<Array2<T>> {
        self.value_and_gradient(w).map(|(_, g)| g)
    }
}

/// One-shot contrast with strided references and the default bandwidth.
pub fn ccs_contrast<T: Scalar>(w: &Array2<T>, x: &SignalMatrix<T>, alpha: T, stride: usize) -> Result<T> {
    CcsObjective::new(x, &ContrastConfig::new(alpha, stride)?)?.contrast(w)
}

/// One-shot analytic gradient matching [`ccs_contrast`].
pub fn ccs_gradient<T: Scalar>(
    w: &Array2<T>,
    x: &SignalMatrix<T>,
    alpha: T,
    stride: usize,
) -> Result<Array2<T>> {
    CcsObjective::new(x, &ContrastConfig::new(alpha, stride)?)?.gradient(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_pair(t: usize, seed: u64) -> SignalMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((2, t), |_| rng.random_range(-1.7..1.7));
        SignalMatrix::new(data).unwrap()
    }

    #[test]
    fn cofactors_closed_form() {
        assert_eq!(cofactor_matrix(Array2::<f64>::eye(2).view()), Array2::eye(2));
        let w = arr2(&[[1.5, -2.0], [0.25, 3.0]]);
        assert_eq!(cofactor_matrix(w.view()), arr2(&[[3.0, -0.25], [2.0, 1.5]]));
    }

    #[test]
    fn cofactors_match_determinant_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = Array2::from_shape_fn((4, 4), |_| rng.random_range(-1.0..1.0));
        let cof = cofactor_matrix(w.view());
        let e = 1e-6;
        for m in 0..4 {
            for l in 0..4 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[[m, l]] += e;
                wm[[m, l]] -= e;
                let fd: f64 = (determinant(wp.view()) - determinant(wm.view())) / (2.0 * e);
                assert!((fd - cof[[m, l]]).abs() < 1e-6);
            }
        }
        let state = DemixingState::new(w.clone()).unwrap();
        for m in 0..4 {
            let laplace: f64 = (0..4).map(|l| w[[m, l]] * cof[[m, l]]).sum();
            assert!((laplace - state.det).abs() <= 1e-8 * state.det.abs());
        }
        // Invertible: cofactors = det · W^{-T}.
        let inv = crate::linalg::inverse(w.view()).unwrap();
        for m in 0..4 {
            for l in 0..4 {
                assert!((cof[[m, l]] - state.det * inv[[l, m]]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn singular_demixer_is_rejected() {
        let x = uniform_pair(50, 2);
        let w = arr2(&[[1.0, 2.0], [0.5, 1.0]]);
        assert!(matches!(
            ccs_contrast(&w, &x, -1.0, 1),
            Err(IcaError::SingularDemixer { .. })
        ));
        assert!(DemixingState::new(w).is_err());
    }

    #[test]
    fn stride_must_leave_two_points() {
        let x = uniform_pair(50, 2);
        assert!(ccs_contrast(&Array2::eye(2), &x, -1.0, 0).is_err());
        assert!(ccs_contrast(&Array2::eye(2), &x, -1.0, 50).is_err());
        assert!(ccs_contrast(&Array2::eye(2), &x, -1.0, 49).is_ok());
    }

    #[test]
    fn contrast_is_nonnegative_and_terms_satisfy_cauchy_schwarz() {
        let x = uniform_pair(150, 3);
        let obj = CcsObjective::new(&x, &ContrastConfig::new(-0.99999, 1).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let w = Array2::from_shape_fn((2, 2), |_| rng.random_range(-1.5..1.5));
            let Ok(state) = DemixingState::new(w.clone()) else {
                continue;
            };
            let t = obj.terms(&state).unwrap();
            assert!(t.v3 * t.v3 <= t.v1 * t.v2 * (1.0 + 1e-12));
            let v = obj.contrast(&w).unwrap();
            assert!(v >= -1e-9);
            assert_abs_diff_eq!(v, t.value().unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = uniform_pair(120, 5);
        for refs in [ReferenceSet::Strided, ReferenceSet::Full] {
            for (kind, alpha) in [
                (ContrastKind::Ccs, -1.0),
                (ContrastKind::Ccs, -0.99999),
                (ContrastKind::Ccs, 0.5),
                (ContrastKind::Ccs, 1.0),
                (ContrastKind::Cs, 0.0),
            ] {
                let cfg = ContrastConfig::new(alpha, 2)
                    .unwrap()
                    .with_references(refs)
                    .with_kind(kind);
                let obj = CcsObjective::new(&x, &cfg).unwrap();
                let w = arr2(&[[0.9, -0.4], [0.3, 1.1]]);
                let g = obj.gradient(&w).unwrap();
                let e = 1e-5;
                for m in 0..2 {
                    for l in 0..2 {
                        let mut wp = w.clone();
                        let mut wm = w.clone();
                        wp[[m, l]] += e;
                        wm[[m, l]] -= e;
                        let fd = (obj.contrast(&wp).unwrap() - obj.contrast(&wm).unwrap()) / (2.0 * e);
                        let rel = (fd - g[[m, l]]).abs() / g[[m, l]].abs().max(1e-6);
                        assert!(
                            rel < 1e-4,
                            "{refs:?} {kind:?} alpha {alpha} ({m},{l}): fd {fd} an {}",
                            g[[m, l]]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn contrast_matches_direct_parzen_evaluation() {
        use crate::density::ParzenModel;
        use crate::divergences::convex_f;
        let x = uniform_pair(90, 8);
        let w = arr2(&[[0.8, 0.5], [-0.3, 1.2]]);
        let det = 0.8 * 1.2 + 0.5 * 0.3;
        for (refs, stride) in [
            (ReferenceSet::Strided, 1),
            (ReferenceSet::Strided, 3),
            (ReferenceSet::Full, 3),
        ] {
            let idx: Vec<usize> = (0..90).step_by(stride).collect();
            let eval = x.data().select(Axis(1), &idx);
            let ref_x = if refs == ReferenceSet::Full {
                x.data().clone()
            } else {
                eval.clone()
            };
            let h = default_bandwidth::<f64>(ref_x.ncols());
            let joint = ParzenModel::new(ref_x.clone(), h).unwrap();
            let marg = ParzenModel::new(w.dot(&ref_x), h).unwrap();
            let a = ConvexityParam::new(0.3).unwrap();
            let (mut v1, mut v2, mut v3) = (0.0, 0.0, 0.0);
            for k in 0..eval.ncols() {
                let xt = [eval[[0, k]], eval[[1, k]]];
                let q: f64 = joint.kde_multivariate(&xt).unwrap() / det;
                let y = w.dot(&eval.column(k));
                let r: f64 = marg.kde_univariate(0, y[0]) * marg.kde_univariate(1, y[1]);
                let (fq, fr) = (
                    convex_f(q.max(1e-12), a).unwrap(),
                    convex_f(r.max(1e-12), a).unwrap(),
                );
                v1 += fq * fq;
                v2 += fr * fr;
                v3 += fq * fr;
            }
            let direct = v1.ln() + v2.ln() - 2.0 * v3.ln();
            let cfg = ContrastConfig::new(0.3, stride).unwrap().with_references(refs);
            let got = CcsObjective::new(&x, &cfg).unwrap().contrast(&w).unwrap();
            assert!(
                (got - direct).abs() <= 1e-10 * direct.abs().max(1e-3),
                "{refs:?}/{stride}: {got} vs {direct}"
            );
        }
    }

    #[test]
    fn sign_symmetric_data_keeps_gradient() {
        // Data closed under negation: the contrast at W and the gradient are
        // unchanged when the samples are negated.
        let base = uniform_pair(40, 6);
        let mut data = Array2::zeros((2, 80));
        for t in 0..40 {
            for m in 0..2 {
                data[[m, t]] = base.data()[[m, t]];
                data[[m, t + 40]] = -base.data()[[m, t]];
            }
        }
        let x = SignalMatrix::new(data.clone()).unwrap();
        let neg = SignalMatrix::new(data.mapv(|v| -v)).unwrap();
        let w = arr2(&[[1.0, 0.3], [-0.2, 0.8]]);
        let g1 = ccs_gradient(&w, &x, -1.0, 1).unwrap();
        let g2 = ccs_gradient(&w, &neg, -1.0, 1).unwrap();
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn single_precision_contrast_runs() {
        let x = uniform_pair(60, 7);
        let x32 = SignalMatrix::new(x.data().mapv(|v| v as f32)).unwrap();
        let v = ccs_contrast(&Array2::<f32>::eye(2), &x32, -1.0, 1).unwrap();
        assert!(v.is_finite() && v >= -1e-5);
    }
}
