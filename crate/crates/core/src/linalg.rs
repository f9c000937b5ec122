//! Small dense linear algebra: pivoted LU and symmetric Jacobi eigensolver.
//!
//! Systems here are at most a few dozen rows, so a hand-rolled kernel beats
//! pulling in a LAPACK binding.

use ndarray::{Array1, Array2, ArrayView2};

use crate::Scalar;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T: Scalar> {
    lu: Array2<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    /// Factorizes a square matrix; `None` if a pivot is exactly zero.
    pub fn new(a: ArrayView2<'_, T>) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU requires a square matrix");
        let mut lu = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, max) = (k..n)
                .map(|i| (i, lu[[i, k]].abs()))
                .fold((k, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if max == T::zero() || !max.is_finite() {
                return None;
            }
            if piv != k {
                for j in 0..n {
                    lu.swap([k, j], [piv, j]);
                }
                perm.swap(k, piv);
            }
            let d = lu[[k, k]];
            for i in k + 1..n {
                let f = lu[[i, k]] / d;
                lu[[i, k]] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let v = lu[[k, j]];
                        lu[[i, j]] -= f * v;
                    }
                }
            }
        }
        Some(Lu { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = (0..i).fold(x[i], |s, j| s - self.lu[[i, j]] * x[j]);
            x[i] = s;
        }
        for i in (0..n).rev() {
            let s = (i + 1..n).fold(x[i], |s, j| s - self.lu[[i, j]] * x[j]);
            x[i] = s / self.lu[[i, i]];
        }
        x
    }

    pub fn inverse(&self) -> Array2<T> {
        let n = self.dim();
        let mut inv = Array2::zeros((n, n));
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[[i, j]] = col[i];
            }
        }
        inv
    }
}

/// Maximum absolute column sum.
pub fn norm1<T: Scalar>(a: ArrayView2<'_, T>) -> T {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<T>())
        .fold(T::zero(), T::max)
}

/// Factorizes `a` and returns it with its 1-norm condition number.
pub fn lu_with_cond<T: Scalar>(a: ArrayView2<'_, T>) -> Option<(Lu<T>, T, Array2<T>)> {
    let lu = Lu::new(a)?;
    let inv = lu.inverse();
    let cond = norm1(a) * norm1(inv.view());
    Some((lu, cond, inv))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (ascending) and eigenvectors as columns.
pub fn sym_eigen<T: Scalar>(a: ArrayView2<'_, T>) -> (Array1<T>, Array2<T>) {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut v = Array2::<T>::eye(n);
    let tiny = T::epsilon() * T::epsilon();
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let diag: T = (0..n).map(|i| m[[i, i]] * m[[i, i]]).sum();
        if off <= tiny * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (apq + apq);
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
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vecs = Array2::zeros((n, n));
    for (c, &i) in order.iter().enumerate() {
        vecs.column_mut(c).assign(&v.column(i));
    }
    (vals, vecs)
}

/// Symmetric PSD square root; negative eigenvalues are clamped to zero.
pub fn psd_sqrt<T: Scalar>(a: ArrayView2<'_, T>) -> Array2<T> {
    let (vals, vecs) = sym_eigen(a);
    let roots = vals.mapv(|l| l.max(T::zero()).sqrt());
    let scaled = &vecs * &roots.view().insert_axis(ndarray::Axis(0));
    scaled.dot(&vecs.t())
}
