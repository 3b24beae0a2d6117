//! Separation quality: Amari performance index and signal-to-interference ratio.

use ndarray::{Array2, ArrayView1};

use crate::error::{IcaError, Result};
use crate::preprocess::SignalMatrix;
use crate::scalar::Scalar;

/// SIR values are clipped to this ceiling.
pub const SIR_CAP_DB: f64 = 150.0;

/// Normalized Amari index of `P = W_total · A`, in `[0, 1]`; zero exactly
/// for scaled permutations.
///
/// Rows of `P` are first rescaled to unit maximum magnitude, so the value
/// does not depend on the row scaling of `W_total` that separation leaves
/// undetermined.
pub fn amari_index<T: Scalar>(w_total: &Array2<T>, a: &Array2<T>) -> Result<T> {
    if w_total.ncols() != a.nrows() || w_total.nrows() != a.ncols() {
        return Err(IcaError::invalid(format!(
            "shapes {:?} and {:?} do not compose to a square matrix",
            w_total.dim(),
            a.dim()
        )));
    }
    amari_index_of(&w_total.dot(a))
}

/// Amari index of an already formed global matrix `P`.
pub fn amari_index_of<T: Scalar>(p: &Array2<T>) -> Result<T> {
    let m = p.nrows();
    if m != p.ncols() || m < 2 {
        return Err(IcaError::invalid("Amari index needs a square matrix with M >= 2"));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(IcaError::NonFinite("global matrix entry".into()));
    }
    let mut abs = p.mapv(|v| v.abs());
    let mut total = T::zero();
    for mut row in abs.rows_mut() {
        let mx = row.iter().fold(T::zero(), |a, &b| a.max(b));
        if mx == T::zero() {
            return Err(IcaError::invalid("global matrix has a zero row"));
        }
        row.mapv_inplace(|v| v / mx);
        total += row.sum() - T::one();
    }
    for col in abs.columns() {
        let mx = col.iter().fold(T::zero(), |a, &b| a.max(b));
        if mx == T::zero() {
            return Err(IcaError::invalid("global matrix has a zero column"));
        }
        total += col.sum() / mx - T::one();
    }
    let mf = T::from_usize_lossy(m);
    Ok(total / (T::lit(2.0) * mf * (mf - T::one())))
}

fn centered(v: ArrayView1<'_, f64>) -> Vec<f64> {
    let mean = v.sum() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Greedy matching of estimates to sources by descending `|corr|`.
///
/// Returns `assignment[source] = estimate`. Ties go to the lower index.
pub fn match_sources<T: Scalar>(y: &SignalMatrix<T>, s: &SignalMatrix<T>) -> Result<Vec<usize>> {
    check_shapes(y, s)?;
    let yc = centered_rows(y);
    let sc = centered_rows(s);
    Ok(greedy_assignment(&correlations(&yc, &sc)))
}

fn check_shapes<T: Scalar>(y: &SignalMatrix<T>, s: &SignalMatrix<T>) -> Result<()> {
    if y.data().dim() != s.data().dim() {
        return Err(IcaError::invalid(format!(
            "estimate shape {:?} differs from source shape {:?}",
            y.data().dim(),
            s.data().dim()
        )));
    }
    Ok(())
}

fn centered_rows<T: Scalar>(x: &SignalMatrix<T>) -> Vec<Vec<f64>> {
    let d = x.data().mapv(|v| v.as_f64());
    d.rows().into_iter().map(centered).collect()
}

/// `corr[e][s]`, absolute correlation between estimate `e` and source `s`.
fn correlations(yc: &[Vec<f64>], sc: &[Vec<f64>]) -> Vec<Vec<f64>> {
    yc.iter()
        .map(|ye| {
            let ny = dot(ye, ye).sqrt();
            sc.iter()
                .map(|ss| {
                    let ns = dot(ss, ss).sqrt();
                    if ny == 0.0 || ns == 0.0 {
                        0.0
                    } else {
                        (dot(ye, ss) / (ny * ns)).abs()
                    }
                })
                .collect()
        })
        .collect()
}

fn greedy_assignment(corr: &[Vec<f64>]) -> Vec<usize> {
    let m = corr.len();
    let mut pairs: Vec<(usize, usize)> = (0..m).flat_map(|e| (0..m).map(move |s| (e, s))).collect();
    // Stable sort keeps lexicographic (estimate, source) order among near-ties.
    pairs.sort_by(|&(e1, s1), &(e2, s2)| {
        let (a, b) = (corr[e1][s1], corr[e2][s2]);
        if (a - b).abs() <= 1e-12 {
            std::cmp::Ordering::Equal
        } else {
            b.partial_cmp(&a).unwrap_or(std::cmp::Ordering::Equal)
        }
    });
    let mut assignment = vec![usize::MAX; m];
    let mut used = vec![false; m];
    for (e, s) in pairs {
        if assignment[s] == usize::MAX && !used[e] {
            assignment[s] = e;
            used[e] = true;
        }
    }
    assignment
}

/// Per-source SIR in dB after matching and least-squares rescaling of the
/// estimates. Both signals are centered first; values are capped at
/// [`SIR_CAP_DB`].
pub fn sir_db<T: Scalar>(y: &SignalMatrix<T>, s: &SignalMatrix<T>) -> Result<Vec<T>> {
    check_shapes(y, s)?;
    let yc = centered_rows(y);
    let sc = centered_rows(s);
    let assignment = greedy_assignment(&correlations(&yc, &sc));
    Ok(sc
        .iter()
        .zip(&assignment)
        .map(|(src, &e)| T::lit(sir_pair(&yc[e], src)))
        .collect())
}

fn sir_pair(y: &[f64], s: &[f64]) -> f64 {
    let yy = dot(y, y);
    let gain = if yy > 0.0 { dot(y, s) / yy } else { 0.0 };
    let signal = dot(s, s);
    let err: f64 = y.iter().zip(s).map(|(a, b)| (gain * a - b).powi(2)).sum();
    if err <= 0.0 {
        return SIR_CAP_DB;
    }
    (10.0 * (signal / err).log10()).min(SIR_CAP_DB)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn amari_zero_for_inverse() {
        let a = arr2(&[[0.5, 0.3], [0.6, 0.4]]);
        let inv = crate::linalg::inverse(a.view()).unwrap();
        assert!(amari_index(&inv, &a).unwrap() < 1e-12);
    }

    #[test]
    fn amari_hand_value() {
        // Each of the two rows and columns contributes 1.1/1 − 1 = 0.1.
        let p = arr2(&[[1.0, 0.1], [0.1, 1.0]]);
        assert_abs_diff_eq!(amari_index_of(&p).unwrap(), 0.4 / 4.0, epsilon = 1e-15);
        // Rows rescaled first: [[1, .5], [.25, 1]] gives (0.5 + 0.25 + 0.25 + 0.5) / 4.
        let p = arr2(&[[2.0, 1.0], [-0.5, 2.0]]);
        assert_abs_diff_eq!(amari_index_of(&p).unwrap(), 1.5 / 4.0, epsilon = 1e-15);
        // Worst case: all entries equal.
        assert_abs_diff_eq!(
            amari_index_of(&Array2::from_elem((3, 3), 2.0)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn amari_rejects_zero_rows() {
        assert!(amari_index_of(&arr2(&[[0.0, 0.0], [1.0, 1.0]])).is_err());
        assert!(amari_index_of(&arr2(&[[1.0]])).is_err());
    }

    #[test]
    fn sir_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = SignalMatrix::new(Array2::from_shape_fn((2, 2000), |_| rng.random_range(-1.0..1.0))).unwrap();
        for v in sir_db(&s, &s).unwrap() {
            assert_eq!(v, SIR_CAP_DB);
        }
        let scaled = SignalMatrix::new(s.data() * 2.0).unwrap();
        for v in sir_db(&scaled, &s).unwrap() {
            assert!(v >= SIR_CAP_DB - 1e-9);
        }
        // Error orthogonal to the source at 1% of its power.
        let t = 2000;
        let mut y = s.data().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in 0..2 {
            let src: Vec<f64> = centered(s.row(m));
            let mut e: Vec<f64> = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
            let em = e.iter().sum::<f64>() / t as f64;
            e.iter_mut().for_each(|v| *v -= em);
            let proj = dot(&e, &src) / dot(&src, &src);
            e.iter_mut().zip(&src).for_each(|(v, s)| *v -= proj * s);
            let scale = (0.01 * dot(&src, &src) / dot(&e, &e)).sqrt();
            for k in 0..t {
                y[[m, k]] += scale * e[k];
            }
        }
        let y = SignalMatrix::new(y).unwrap();
        for v in sir_db(&y, &s).unwrap() {
            // LS rescaling of y = s + e shrinks the error slightly below 1%.
            assert!((v - 20.0).abs() < 0.1, "{v}");
        }
    }

    #[test]
    fn matching_follows_correlation() {
        let s = SignalMatrix::new(arr2(&[[1.0, -1.0, 2.0, 0.0], [0.5, 0.5, -1.0, 1.0]])).unwrap();
        let swapped = s.select_rows(&[1, 0]).unwrap();
        assert_eq!(match_sources(&swapped, &s).unwrap(), vec![1, 0]);
        let bad = SignalMatrix::new(Array2::zeros((2, 3)) + 1.0).unwrap();
        assert!(sir_db(&bad, &s).is_err());
    }
}
