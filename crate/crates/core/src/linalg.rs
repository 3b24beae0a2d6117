//! Small dense kernels for the M×M matrices the solvers manipulate.
//!
//! Channel counts are small (tens at most), so plain LU with partial
//! pivoting and cyclic Jacobi eigen-decomposition are sufficient.

use ndarray::{Array1, Array2, ArrayView2};

use crate::scalar::Scalar;

/// LU factorisation with partial pivoting, stored in place.
struct Lu<T> {
    lu: Array2<T>,
    perm: Vec<usize>,
    sign: T,
    singular: bool,
}

fn lu_decompose<T: Scalar>(a: ArrayView2<'_, T>) -> Lu<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "LU needs a square matrix");
    let mut lu = a.to_owned();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = T::one();
    let mut singular = false;
    for k in 0..n {
        let mut piv = k;
        let mut best = lu[[k, k]].abs();
        for r in (k + 1)..n {
            let v = lu[[r, k]].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == T::zero() {
            singular = true;
            continue;
        }
        if piv != k {
            for c in 0..n {
                lu.swap([k, c], [piv, c]);
            }
            perm.swap(k, piv);
            sign = -sign;
        }
        let d = lu[[k, k]];
        for r in (k + 1)..n {
            let factor = lu[[r, k]] / d;
            lu[[r, k]] = factor;
            if factor != T::zero() {
                for c in (k + 1)..n {
                    let u = lu[[k, c]];
                    lu[[r, c]] -= factor * u;
                }
            }
        }
    }
    Lu {
        lu,
        perm,
        sign,
        singular,
    }
}

pub fn determinant<T: Scalar>(a: ArrayView2<'_, T>) -> T {
    let f = lu_decompose(a);
    if f.singular {
        return T::zero();
    }
    let mut det = f.sign;
    for k in 0..a.nrows() {
        det *= f.lu[[k, k]];
    }
    det
}

/// Matrix inverse, `None` when a zero pivot is met.
pub fn inverse<T: Scalar>(a: ArrayView2<'_, T>) -> Option<Array2<T>> {
    let n = a.nrows();
    let f = lu_decompose(a);
    if f.singular {
        return None;
    }
    let mut inv = Array2::zeros((n, n));
    for col in 0..n {
        // Solve L U x = P e_col.
        let mut x: Vec<T> = (0..n)
            .map(|r| if f.perm[r] == col { T::one() } else { T::zero() })
            .collect();
        for r in 0..n {
            let s = (0..r).fold(x[r], |s, c| s - f.lu[[r, c]] * x[c]);
            x[r] = s;
        }
        for r in (0..n).rev() {
            let s = ((r + 1)..n).fold(x[r], |s, c| s - f.lu[[r, c]] * x[c]);
            x[r] = s / f.lu[[r, r]];
        }
        for r in 0..n {
            inv[[r, col]] = x[r];
        }
    }
    Some(inv)
}

fn minor<T: Scalar>(a: ArrayView2<'_, T>, skip_r: usize, skip_c: usize) -> Array2<T> {
    let n = a.nrows();
    Array2::from_shape_fn((n - 1, n - 1), |(r, c)| {
        let rr = if r >= skip_r { r + 1 } else { r };
        let cc = if c >= skip_c { c + 1 } else { c };
        a[[rr, cc]]
    })
}

/// Cofactor matrix: entry `(m, l)` equals `∂det(W)/∂w_ml`.
///
/// Computed from explicit minors so it stays exact for singular input.
pub fn cofactors<T: Scalar>(a: ArrayView2<'_, T>) -> Array2<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cofactors need a square matrix");
    if n == 1 {
        return Array2::from_elem((1, 1), T::one());
    }
    if n == 2 {
        return ndarray::arr2(&[[a[[1, 1]], -a[[1, 0]]], [-a[[0, 1]], a[[0, 0]]]]);
    }
    Array2::from_shape_fn((n, n), |(r, c)| {
        let d = determinant(minor(a, r, c).view());
        if (r + c) % 2 == 0 {
            d
        } else {
            -d
        }
    })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps.
///
/// Eigenvalues are returned in descending order; column `k` of the second
/// matrix is the eigenvector of eigenvalue `k`, with its largest-magnitude
/// entry made positive.
pub fn symmetric_eigen<T: Scalar>(a: ArrayView2<'_, T>) -> (Array1<T>, Array2<T>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigen-decomposition needs a square matrix");
    let mut m = a.to_owned();
    let mut v = Array2::<T>::eye(n);
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for r in 0..n {
            diag += m[[r, r]] * m[[r, r]];
            for c in (r + 1)..n {
                off += m[[r, c]] * m[[r, c]];
            }
        }
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[[j, j]]
            .partial_cmp(&m[[i, i]])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = Array1::from_iter(order.iter().map(|&k| m[[k, k]]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).to_owned();
        let mut lead = T::zero();
        for &x in col.iter() {
            if x.abs() > lead.abs() {
                lead = x;
            }
        }
        if lead < T::zero() {
            col.mapv_inplace(|x| -x);
        }
        vectors.column_mut(dst).assign(&col);
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;

    #[test]
    fn determinant_and_inverse_agree() {
        let a = arr2(&[[4.0, 3.0, 1.0], [2.0, -1.0, 0.5], [0.3, 0.2, 5.0]]);
        let inv = inverse(a.view()).unwrap();
        let id = a.dot(&inv);
        for ((r, c), v) in id.indexed_iter() {
            assert_abs_diff_eq!(*v, if r == c { 1.0 } else { 0.0 }, epsilon = 1e-12);
        }
        // Laplace expansion along the first row.
        let det = determinant(a.view());
        let cof = cofactors(a.view());
        let row: f64 = (0..3).map(|l| a[[0, l]] * cof[[0, l]]).sum();
        assert_abs_diff_eq!(row, det, epsilon = 1e-12);
    }

    #[test]
    fn singular_matrix_has_zero_determinant() {
        let a = arr2(&[[1.0, 2.0], [2.0, 4.0]]);
        assert_eq!(determinant(a.view()), 0.0);
        assert!(inverse(a.view()).is_none());
    }

    #[test]
    fn eigen_of_diagonal_is_sorted_descending() {
        let a = arr2(&[[1.0, 0.0], [0.0, 4.0]]);
        let (vals, vecs) = symmetric_eigen(a.view());
        assert_eq!(vals.to_vec(), vec![4.0, 1.0]);
        assert_eq!(vecs, arr2(&[[0.0, 1.0], [1.0, 0.0]]));
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let a = arr2(&[[2.0, 0.5, 0.1], [0.5, 1.0, -0.3], [0.1, -0.3, 3.0]]);
        let (vals, vecs) = symmetric_eigen(a.view());
        let rebuilt = vecs.dot(&Array2::from_diag(&vals)).dot(&vecs.t());
        for (x, y) in rebuilt.iter().zip(a.iter()) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-12);
        }
    }
}
