//! Centering and whitening of multichannel observations.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{IcaError, Result};
use crate::linalg::symmetric_eigen;
use crate::scalar::Scalar;

/// Relative eigenvalue threshold below which whitening is rejected.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// `M × T` block of samples: rows are channels, columns are time instants.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix<T> {
    data: Array2<T>,
}

impl<T: Scalar> SignalMatrix<T> {
    /// Validates `M ≥ 2`, `T ≥ M` and finiteness.
    pub fn new(data: Array2<T>) -> Result<Self> {
        let (m, t) = data.dim();
        if m < 2 {
            return Err(IcaError::invalid(format!("need at least 2 channels, got {m}")));
        }
        if t < m {
            return Err(IcaError::invalid(format!(
                "need at least as many samples as channels ({t} < {m})"
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(IcaError::invalid(format!(
                "non-finite sample at flat index {bad}"
            )));
        }
        Ok(Self { data })
    }

    /// Stacks equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let m = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(IcaError::invalid("rows have different lengths"));
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((m, t), flat).map_err(|e| IcaError::invalid(e.to_string()))?;
        Self::new(data)
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, m: usize) -> ArrayView1<'_, T> {
        self.data.row(m)
    }

    pub fn data(&self) -> &Array2<T> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<T> {
        self.data
    }

    /// Left-multiplies by an `M' × M` matrix. The result is re-validated.
    pub fn transform(&self, w: &Array2<T>) -> Result<Self> {
        if w.ncols() != self.channels() {
            return Err(IcaError::invalid(format!(
                "matrix has {} columns, signal has {} channels",
                w.ncols(),
                self.channels()
            )));
        }
        Self::new(w.dot(&self.data))
    }

    /// Row subset, e.g. one channel pair of a larger mixture.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.data.select(Axis(0), rows))
    }

    /// Population covariance `E[x xᵀ]` of the (assumed centered) rows.
    pub fn covariance(&self) -> Array2<T> {
        let t = T::from_usize_lossy(self.samples());
        self.data.dot(&self.data.t()) / t
    }
}

/// Whitening matrix `V = Λ^{-1/2} Eᵀ` together with the statistics it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningTransform<T> {
    pub mean: Array1<T>,
    pub v: Array2<T>,
    pub eigenvectors: Array2<T>,
    pub eigenvalues: Array1<T>,
}

impl<T: Scalar> WhiteningTransform<T> {
    /// Applies `V (x − mean)` to raw observations.
    pub fn apply(&self, x: &SignalMatrix<T>) -> Result<SignalMatrix<T>> {
        if x.channels() != self.mean.len() {
            return Err(IcaError::invalid("channel count does not match transform"));
        }
        let centered = x.data() - &self.mean.view().insert_axis(Axis(1));
        SignalMatrix::new(self.v.dot(&centered))
    }

    pub fn identity(m: usize) -> Self {
        Self {
            mean: Array1::zeros(m),
            v: Array2::eye(m),
            eigenvectors: Array2::eye(m),
            eigenvalues: Array1::ones(m),
        }
    }
}

/// Subtracts the per-row average. Returns the centered signal and the means.
pub fn remove_mean<T: Scalar>(x: &SignalMatrix<T>) -> Result<(SignalMatrix<T>, Array1<T>)> {
    let t = T::from_usize_lossy(x.samples());
    let mean: Array1<T> = x
        .data()
        .rows()
        .into_iter()
        .map(|r| r.iter().copied().sum::<T>() / t)
        .collect();
    let centered = x.data() - &mean.view().insert_axis(Axis(1));
    Ok((SignalMatrix::new(centered)?, mean))
}

/// Whitens a centered signal so that its sample covariance is the identity.
///
/// Any residual row mean of the input is recorded in the transform and
/// removed, so [`WhiteningTransform::apply`] reproduces `z` exactly.
pub fn whiten<T: Scalar>(centered: &SignalMatrix<T>) -> Result<(SignalMatrix<T>, WhiteningTransform<T>)> {
    let (centered, mean) = remove_mean(centered)?;
    let cov = centered.covariance();
    let (eigenvalues, eigenvectors) = symmetric_eigen(cov.view());
    let largest = eigenvalues[0];
    let threshold = T::lit(RANK_TOLERANCE) * largest;
    for &ev in eigenvalues.iter() {
        if !(ev > threshold) || !(ev > T::zero()) {
            return Err(IcaError::RankDeficient {
                eigenvalue: ev.as_f64(),
                threshold: threshold.as_f64(),
            });
        }
    }
    let m = centered.channels();
    let mut v = Array2::zeros((m, m));
    for k in 0..m {
        let scale = T::one() / eigenvalues[k].sqrt();
        for c in 0..m {
            v[[k, c]] = scale * eigenvectors[[c, k]];
        }
    }
    let z = SignalMatrix::new(v.dot(centered.data()))?;
    Ok((
        z,
        WhiteningTransform {
            mean,
            v,
            eigenvectors,
            eigenvalues,
        },
    ))
}

/// `remove_mean` followed by `whiten`, keeping the raw means in the transform.
pub fn center_and_whiten<T: Scalar>(x: &SignalMatrix<T>) -> Result<(SignalMatrix<T>, WhiteningTransform<T>)> {
    let (centered, mean) = remove_mean(x)?;
    let (z, mut w) = whiten(&centered)?;
    w.mean = mean + &w.mean;
    Ok((z, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(m: usize, t: usize, seed: u64) -> SignalMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((m, t), |_| rng.random_range(-2.0..3.0));
        SignalMatrix::new(data).unwrap()
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(SignalMatrix::new(Array2::<f64>::zeros((1, 10))).is_err());
        assert!(SignalMatrix::new(Array2::<f64>::zeros((3, 2))).is_err());
        let mut d = Array2::<f64>::zeros((2, 4));
        d[[1, 2]] = f64::NAN;
        assert!(matches!(SignalMatrix::new(d), Err(IcaError::InvalidInput(_))));
    }

    #[test]
    fn zero_mean_rows_pass_through() {
        let x = SignalMatrix::new(arr2(&[[1.0, -1.0, 2.0, -2.0], [0.5, 0.5, -0.5, -0.5]])).unwrap();
        let (c, mean) = remove_mean(&x).unwrap();
        assert_eq!(c, x);
        assert_eq!(mean.to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn constant_row_becomes_zero() {
        let x = SignalMatrix::new(arr2(&[[3.5, 3.5, 3.5], [1.0, 2.0, 3.0]])).unwrap();
        let (c, mean) = remove_mean(&x).unwrap();
        assert!(c.row(0).iter().all(|&v| v == 0.0));
        assert_eq!(mean[0], 3.5);
    }

    #[test]
    fn random_rows_are_centered() {
        let x = random_matrix(2, 1000, 3);
        let (c, mean) = remove_mean(&x).unwrap();
        for m in 0..2 {
            let direct: f64 = x.row(m).sum() / 1000.0;
            assert_abs_diff_eq!(mean[m], direct, epsilon = 1e-14);
            assert!((c.row(m).sum() / 1000.0).abs() < 1e-12);
        }
        let (c2, _) = remove_mean(&c).unwrap();
        for (a, b) in c.data().iter().zip(c2.data().iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-14);
        }
    }

    #[test]
    fn diagonal_covariance_gives_inverse_sqrt_scaling() {
        // Rows ±2 and ±1 with independent sign patterns: cov = diag(4, 1).
        let t = 8;
        let a = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let b = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let rows = vec![a.iter().map(|v| 2.0 * v).collect::<Vec<f64>>(), b.to_vec()];
        let x = SignalMatrix::from_rows(&rows).unwrap();
        assert_eq!(x.samples(), t);
        let (z, w) = whiten(&x).unwrap();
        assert_abs_diff_eq!(w.v[[0, 0]].abs(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(w.v[[1, 1]].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.v[[0, 1]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.v[[1, 0]], 0.0, epsilon = 1e-12);
        let cov = z.covariance();
        assert_abs_diff_eq!(cov[[0, 0]], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov[[0, 1]], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn random_mixture_is_white() {
        let x = random_matrix(4, 4000, 11);
        let mix = arr2(&[
            [1.0, 0.4, -0.2, 0.1],
            [0.3, 1.2, 0.5, 0.0],
            [-0.6, 0.2, 0.9, 0.4],
            [0.1, -0.3, 0.2, 1.5],
        ]);
        let x = x.transform(&mix).unwrap();
        let (centered, _) = remove_mean(&x).unwrap();
        let (z, w) = whiten(&centered).unwrap();
        let cov = z.covariance();
        for ((r, c), v) in cov.indexed_iter() {
            let expect = if r == c { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-6, "cov[{r},{c}] = {v}");
        }
        // V C Vᵀ = I against the original covariance.
        let vcv = w.v.dot(&centered.covariance()).dot(&w.v.t());
        for ((r, c), v) in vcv.indexed_iter() {
            let expect = if r == c { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-8);
        }
        // Whitening white data keeps the identity covariance.
        let (z2, _) = whiten(&z).unwrap();
        let cov2 = z2.covariance();
        for ((r, c), v) in cov2.indexed_iter() {
            let expect = if r == c { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let r: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = SignalMatrix::from_rows(&[r.clone(), r.iter().map(|v| 2.0 * v).collect()]).unwrap();
        let (c, _) = remove_mean(&x).unwrap();
        assert!(matches!(whiten(&c), Err(IcaError::RankDeficient { .. })));
    }

    #[test]
    fn apply_reproduces_whitened_output() {
        let x = random_matrix(3, 500, 5);
        let (z, w) = center_and_whiten(&x).unwrap();
        let again = w.apply(&x).unwrap();
        for (a, b) in z.data().iter().zip(again.data().iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let x = random_matrix(2, 400, 9);
        let x32 = SignalMatrix::new(x.data().mapv(|v| v as f32)).unwrap();
        let (z, _) = center_and_whiten(&x32).unwrap();
        let cov = z.covariance();
        assert!((cov[[0, 0]] - 1.0).abs() < 1e-4);
        assert!(cov[[0, 1]].abs() < 1e-4);
    }
}
