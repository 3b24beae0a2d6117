//! Gaussian Parzen-window density estimates.

use ndarray::{Array2, ArrayView1};

use crate::error::{IcaError, Result};
use crate::scalar::Scalar;

/// Rule-of-thumb bandwidth `1.06 · T^{-1/5}` for `T` reference samples.
pub fn default_bandwidth<T: Scalar>(samples: usize) -> T {
    let n = T::from_usize_lossy(samples.max(1));
    T::lit(1.06) * n.powf(T::lit(-0.2))
}

/// `(2π)^{-1/2}`
#[inline]
pub(crate) fn inv_sqrt_2pi<T: Scalar>() -> T {
    T::lit(0.398_942_280_401_432_7)
}

/// Reference samples (`M × T`, one row per coordinate) and a shared bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct ParzenModel<T> {
    samples: Array2<T>,
    h: T,
}

impl<T: Scalar> ParzenModel<T> {
    pub fn new(samples: Array2<T>, h: T) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(IcaError::invalid(format!("bandwidth must be positive, got {h}")));
        }
        if samples.ncols() < 2 || samples.nrows() == 0 {
            return Err(IcaError::invalid("Parzen model needs at least 2 samples"));
        }
        Ok(Self { samples, h })
    }

    /// Model with the default bandwidth for its sample count.
    pub fn with_default_bandwidth(samples: Array2<T>) -> Result<Self> {
        let h = default_bandwidth(samples.ncols());
        Self::new(samples, h)
    }

    pub fn bandwidth(&self) -> T {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    /// Univariate density of coordinate `row` at `y`.
    pub fn kde_univariate(&self, row: usize, y: T) -> T {
        univariate_density(self.samples.row(row), y, self.h)
    }

    /// Derivative of [`Self::kde_univariate`] with respect to the query point.
    pub fn kde_univariate_grad(&self, row: usize, y: T) -> T {
        let h = self.h;
        let s: T = self
            .samples
            .row(row)
            .iter()
            .map(|&r| {
                let u = (y - r) / h;
                -u * (-u * u / T::lit(2.0)).exp()
            })
            .sum();
        s * inv_sqrt_2pi::<T>() / (T::from_usize_lossy(self.len()) * h * h)
    }

    /// Joint density at the `M`-vector `y`.
    pub fn kde_multivariate(&self, y: &[T]) -> Result<T> {
        if y.len() != self.dim() {
            return Err(IcaError::invalid(format!(
                "query has {} coordinates, model has {}",
                y.len(),
                self.dim()
            )));
        }
        let h = self.h;
        let inv_h2 = T::one() / (h * h);
        let half = T::lit(0.5);
        let mut total = T::zero();
        for t in 0..self.len() {
            let mut d2 = T::zero();
            for (m, &q) in y.iter().enumerate() {
                let d = q - self.samples[[m, t]];
                d2 += d * d;
            }
            total += (-half * d2 * inv_h2).exp();
        }
        Ok(total * multivariate_norm::<T>(self.dim(), h, self.len()))
    }
}

/// `1 / (T h^M (2π)^{M/2})`
pub(crate) fn multivariate_norm<T: Scalar>(m: usize, h: T, n: usize) -> T {
    let two_pi = T::lit(std::f64::consts::TAU);
    let mi = m as i32;
    T::one() / (T::from_usize_lossy(n) * h.powi(mi) * two_pi.powf(T::from_usize_lossy(m) / T::lit(2.0)))
}

pub(crate) fn univariate_density<T: Scalar>(refs: ArrayView1<'_, T>, y: T, h: T) -> T {
    let half = T::lit(0.5);
    let s: T = refs
        .iter()
        .map(|&r| {
            let u = (y - r) / h;
            (-half * u * u).exp()
        })
        .sum();
    s * inv_sqrt_2pi::<T>() / (T::from_usize_lossy(refs.len()) * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr2, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn bandwidth_rule() {
        assert_abs_diff_eq!(default_bandwidth::<f64>(1), 1.06, epsilon = 1e-15);
        assert_abs_diff_eq!(
            default_bandwidth::<f64>(1000),
            1.06 * 1000f64.powf(-0.2),
            epsilon = 1e-15
        );
        assert!(default_bandwidth::<f64>(8000) < default_bandwidth::<f64>(1000));
    }

    #[test]
    fn rejects_bad_models() {
        assert!(ParzenModel::new(arr2(&[[0.0, 1.0]]), 0.0).is_err());
        assert!(ParzenModel::new(arr2(&[[0.0]]), 1.0).is_err());
    }

    #[test]
    fn joint_kernel_peak() {
        // Two coincident samples produce the single-sample value.
        let h = 0.5;
        let m = ParzenModel::new(arr2(&[[0.0, 0.0], [0.0, 0.0]]), h).unwrap();
        let peak = 1.0 / (2.0 * std::f64::consts::PI) / (h * h);
        assert_abs_diff_eq!(m.kde_multivariate(&[0.0, 0.0]).unwrap(), peak, epsilon = 1e-12);
        assert!(m.kde_multivariate(&[0.0]).is_err());
    }

    #[test]
    fn univariate_peak_is_inverse_sqrt_two_pi_over_h() {
        let h = 0.3;
        let m = ParzenModel::new(arr2(&[[0.0, 0.0]]), h).unwrap();
        assert_abs_diff_eq!(
            m.kde_univariate(0, 0.0),
            1.0 / (2.0 * std::f64::consts::PI).sqrt() / h,
            epsilon = 1e-12
        );
        // Derivative one bandwidth to the right of a single sample.
        assert_abs_diff_eq!(
            m.kde_univariate_grad(0, h),
            -(-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt() / (h * h),
            epsilon = 1e-12
        );
    }

    #[test]
    fn symmetric_samples() {
        let m = ParzenModel::new(arr2(&[[-0.8, 0.8, -0.1, 0.1]]), 0.4).unwrap();
        assert_abs_diff_eq!(
            m.kde_univariate(0, 0.3),
            m.kde_univariate(0, -0.3),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(m.kde_univariate_grad(0, 0.0), 0.0, epsilon = 1e-15);
    }

    fn normal_samples(m: usize, t: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((m, t), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn standard_normal_estimate_near_peak() {
        let m = ParzenModel::with_default_bandwidth(normal_samples(1, 4000, 7)).unwrap();
        let est = m.kde_univariate(0, 0.0);
        assert!((est - 0.398_942_280_4).abs() < 0.05, "estimate {est}");
    }

    #[test]
    fn univariate_integrates_to_one() {
        let m = ParzenModel::new(normal_samples(1, 300, 2), 0.35).unwrap();
        // Trapezoid rule over a range covering all kernel mass.
        let (lo, hi, n) = (-9.0, 9.0, 6000);
        let dx = (hi - lo) / n as f64;
        let mut s = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            s += w * m.kde_univariate(0, lo + k as f64 * dx);
        }
        assert!((s * dx - 1.0).abs() < 1e-3);
    }

    #[test]
    fn bivariate_integrates_to_one() {
        let m = ParzenModel::new(normal_samples(2, 60, 4), 0.5).unwrap();
        let (lo, hi, n) = (-7.0, 7.0, 160);
        let dx = (hi - lo) / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
                let wj = if j == 0 || j == n { 0.5 } else { 1.0 };
                let y = [lo + i as f64 * dx, lo + j as f64 * dx];
                s += wi * wj * m.kde_multivariate(&y).unwrap();
            }
        }
        assert!((s * dx * dx - 1.0).abs() < 1e-2);
    }

    #[test]
    fn grad_matches_finite_difference() {
        let m = ParzenModel::new(normal_samples(1, 200, 8), 0.3).unwrap();
        for &y in &[-1.7, -0.2, 0.0, 0.45, 2.2] {
            let e = 1e-5;
            let fd = (m.kde_univariate(0, y + e) - m.kde_univariate(0, y - e)) / (2.0 * e);
            let an = m.kde_univariate_grad(0, y);
            assert!(
                (fd - an).abs() <= 1e-6 * an.abs().max(1e-3),
                "y {y}: {fd} vs {an}"
            );
        }
    }

    #[test]
    fn product_of_marginals_for_independent_coordinates() {
        let s = normal_samples(2, 3000, 12);
        let h = default_bandwidth(3000);
        let joint = ParzenModel::new(s.clone(), h).unwrap();
        for y in [[0.0, 0.0], [0.5, -0.3], [-1.0, 0.7]] {
            let j = joint.kde_multivariate(&y).unwrap();
            let p = joint.kde_univariate(0, y[0]) * joint.kde_univariate(1, y[1]);
            assert!((j - p).abs() / p < 0.1, "{j} vs {p}");
        }
    }

    #[test]
    fn permuting_samples_leaves_value_unchanged() {
        // Two terms commute exactly.
        let a = ParzenModel::new(arr2(&[[0.3f64, -1.1], [0.2, 0.9]]), 0.4).unwrap();
        let b = ParzenModel::new(arr2(&[[-1.1f64, 0.3], [0.9, 0.2]]), 0.4).unwrap();
        assert_eq!(
            a.kde_multivariate(&[0.1, 0.2]).unwrap().to_bits(),
            b.kde_multivariate(&[0.1, 0.2]).unwrap().to_bits()
        );
        // Longer sums agree to rounding.
        let s = normal_samples(2, 16, 3);
        let mut rev = s.clone();
        for t in 0..16 {
            for m in 0..2 {
                rev[[m, t]] = s[[m, 15 - t]];
            }
        }
        let qa = ParzenModel::new(s, 0.4)
            .unwrap()
            .kde_multivariate(&[0.1, 0.2])
            .unwrap();
        let qb = ParzenModel::new(rev, 0.4)
            .unwrap()
            .kde_multivariate(&[0.1, 0.2])
            .unwrap();
        assert!((qa - qb).abs() <= 16.0 * f64::EPSILON * qa);
    }

    #[test]
    fn change_of_variables_scaling() {
        let s = normal_samples(1, 100, 5);
        let c = 2.5;
        let h = 0.3;
        let a = ParzenModel::new(s.clone(), h).unwrap();
        let b = ParzenModel::new(s.mapv(|v| v * c), h * c).unwrap();
        for &y in &[-0.4, 0.0, 1.3] {
            assert_abs_diff_eq!(
                b.kde_univariate(0, c * y),
                a.kde_univariate(0, y) / c,
                epsilon = 1e-10
            );
        }
    }
}
