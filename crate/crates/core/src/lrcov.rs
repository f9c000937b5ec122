//! Cumulative long-run covariance in factored form.
//!
//! Each increment of the cumulative covariance is `f_j f_j' / L` for a stored
//! factor vector `f_j`, so it is PSD by construction and Gaussian draws with
//! that covariance need only `z * f_j / sqrt(L)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{MonobandError, Result};
use crate::kernels::KernelSpec;
use crate::linalg::lu_with_cond;
use crate::smoother::COND_CEILING;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum IncrementMode {
    Trend,
    Regression,
}

#[derive(Debug, Clone)]
pub struct LongRunIncrements<T: Scalar> {
    pub mode: IncrementMode,
    pub block: usize,
    /// `n x K`; row `j-1` holds the factor of time `j`, zero for `j < L`.
    pub factors: Array2<T>,
}

impl<T: Scalar> LongRunIncrements<T> {
    pub fn n(&self) -> usize {
        self.factors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.factors.ncols()
    }

    /// Increment at time `j` (1-based) as a dense matrix.
    pub fn increment(&self, j: usize) -> Array2<T> {
        let f = self.factors.row(j - 1);
        let l = T::of_usize(self.block);
        Array2::from_shape_fn((f.len(), f.len()), |(a, b)| f[a] * f[b] / l)
    }

    /// `Q(k) = sum_{j <= k} increment(j)`.
    pub fn cumulative(&self, k: usize) -> Array2<T> {
        let d = self.dim();
        let l = T::of_usize(self.block);
        let mut q = Array2::zeros((d, d));
        for f in self.factors.rows().into_iter().take(k) {
            for a in 0..d {
                for b in 0..d {
                    q[[a, b]] += f[a] * f[b] / l;
                }
            }
        }
        q
    }
}

fn check_window(block: usize, n: usize) -> Result<()> {
    if block < 2 || 2 * block > n {
        return Err(MonobandError::InvalidWindow { len: block, n });
    }
    Ok(())
}

/// Sliding block sums `sum_{i=j-L+1}^{j} r_i` for `j = L..n` (rows before `L-1` are zero).
fn block_sums<T: Scalar>(r: ArrayView2<'_, T>, block: usize) -> Array2<T> {
    let (n, p) = r.dim();
    let mut out = Array2::zeros((n, p));
    let mut acc = Array1::<T>::zeros(p);
    for i in 0..n {
        acc += &r.row(i);
        if i >= block {
            acc -= &r.row(i - block);
        }
        if i + 1 >= block {
            out.row_mut(i).assign(&acc);
        }
    }
    out
}

/// Rank-one factors of the trend-mode cumulative covariance estimate.
pub fn cum_increments<T: Scalar>(residuals: ArrayView2<'_, T>, block: usize) -> Result<LongRunIncrements<T>> {
    check_window(block, residuals.nrows())?;
    Ok(LongRunIncrements { mode: IncrementMode::Trend, block, factors: block_sums(residuals, block) })
}

/// `(1/(n hr)) sum_i x_i x_i' K((t_i - t*)/hr)` with `t*` clamped to `[hr, 1-hr]`.
pub fn m_hat<T: Scalar>(kernel: KernelSpec, x: ArrayView2<'_, T>, t: T, hr: T) -> Array2<T> {
    let (n, p) = x.dim();
    let nf = T::of_usize(n);
    let ts = t.max(hr).min(T::one() - hr);
    let mut m = Array2::zeros((p, p));
    let lo = ((ts - hr) * nf).ceil().max(T::one()).to_usize().unwrap_or(1);
    let hi = ((ts + hr) * nf).floor().min(nf).to_usize().unwrap_or(0);
    for i in lo..=hi {
        let w = kernel.eval((T::of_usize(i) / nf - ts) / hr);
        if w == T::zero() {
            continue;
        }
        let xi = x.row(i - 1);
        for a in 0..p {
            let wa = w * xi[a];
            for b in a..p {
                m[[a, b]] += wa * xi[b];
            }
        }
    }
    let scale = T::one() / (nf * hr);
    for a in 0..p {
        for b in a..p {
            m[[a, b]] *= scale;
            m[[b, a]] = m[[a, b]];
        }
    }
    m
}

/// Regression-mode factors `u_j = C M(t_j)^{-1} w_j`, with `w_j` the block sums of `x_i e_i`.
pub fn sigma_c_factors<T: Scalar>(
    kernel: KernelSpec,
    x: ArrayView2<'_, T>,
    residuals: ArrayView1<'_, T>,
    contrast: ArrayView2<'_, T>,
    block: usize,
    hr: T,
    ridge: Option<T>,
) -> Result<LongRunIncrements<T>> {
    let (n, p) = x.dim();
    check_window(block, n)?;
    if contrast.ncols() != p {
        return Err(MonobandError::InvalidInput(format!("contrast has {} columns for {p} covariates", contrast.ncols())));
    }
    let xe = Array2::from_shape_fn((n, p), |(i, a)| x[[i, a]] * residuals[i]);
    let w = block_sums(xe.view(), block);
    let s = contrast.nrows();
    let nf = T::of_usize(n);
    let rows = (block - 1..n)
        .into_par_iter()
        .map(|i| {
            let t = T::of_usize(i + 1) / nf;
            let mut m = m_hat(kernel, x, t, hr);
            if let Some(eps) = ridge {
                m.diag_mut().mapv_inplace(|v| v + eps);
            }
            let singular = |reason: String| MonobandError::SingularDesign { t: t.as_f64(), reason };
            let (lu, cond, _) = lu_with_cond(m.view()).ok_or_else(|| singular("M(t) has a zero pivot".into()))?;
            if !(cond <= T::lit(COND_CEILING)) {
                return Err(singular(format!("M(t) condition number {:e}", cond.as_f64())));
            }
            let v = lu.solve(w.row(i).as_slice().expect("standard layout"));
            Ok(contrast.dot(&Array1::from(v)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut factors = Array2::zeros((n, s));
    for (off, u) in rows.into_iter().enumerate() {
        factors.row_mut(block - 1 + off).assign(&u);
    }
    Ok(LongRunIncrements { mode: IncrementMode::Regression, block, factors })
}
