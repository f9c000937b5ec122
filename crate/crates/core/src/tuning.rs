//! Tuning parameters: bandwidth configuration, GCV, the `h_d` rule and
//! minimum-volatility block length selection.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MonobandError, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{psd_sqrt, sym_eigen};
use crate::lrcov::{cum_increments, sigma_c_factors};
use crate::smoother::{
    fit_regression_grid, ll_regression_hat, ll_trend_hat, residual_panel, trend_at_obs, TimeSeriesPanel,
};
use crate::Scalar;

pub const DEFAULT_GRID_N: usize = 4000;
pub const DEFAULT_REPLICATES: usize = 2000;
pub const DEFAULT_ALPHAS: [f64; 2] = [0.10, 0.05];
pub const MAX_EVAL_POINTS: usize = 400;

/// Everything the bootstrap pipeline needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BandwidthConfig<T: Scalar> {
    /// Smoothing bandwidth per coordinate (a single entry in regression mode).
    pub hr: Vec<T>,
    /// Rearrangement bandwidth per output coordinate.
    pub hd: Vec<T>,
    /// Rearrangement grid size `N`.
    pub big_n: usize,
    /// Block length `L`.
    pub block: usize,
    /// Bootstrap size `B`.
    pub replicates: usize,
    pub alphas: Vec<f64>,
    /// Evaluation grid size; `None` means `min(400, n)`.
    pub grid: Option<usize>,
    pub seed: u64,
    pub kernel: KernelSpec,
    /// Optional ridge added to `M(t)` in regression mode.
    pub ridge: Option<T>,
}

impl<T: Scalar> BandwidthConfig<T> {
    /// Defaults for the given bandwidths and block length.
    pub fn new(hr: Vec<T>, hd: Vec<T>, block: usize) -> Self {
        BandwidthConfig {
            hr,
            hd,
            big_n: DEFAULT_GRID_N,
            block,
            replicates: DEFAULT_REPLICATES,
            alphas: DEFAULT_ALPHAS.to_vec(),
            grid: None,
            seed: 0,
            kernel: KernelSpec::Epanechnikov,
            ridge: None,
        }
    }

    pub fn grid_size(&self, n: usize) -> usize {
        self.grid.unwrap_or(n.min(MAX_EVAL_POINTS))
    }

    /// `hr` for output coordinate `k` (shared when only one is given).
    pub fn hr_at(&self, k: usize) -> T {
        if self.hr.len() == 1 {
            self.hr[0]
        } else {
            self.hr[k]
        }
    }

    /// Checks `0 < hd < hr < 0.5`, `N hd >= 10`, `2 <= L <= n/2` and the level list.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(MonobandError::InvalidInput(m));
        if self.hr.is_empty() || self.hd.is_empty() {
            return bad("bandwidth lists must be nonempty".into());
        }
        if self.hr.len() != 1 && self.hr.len() != self.hd.len() {
            return bad(format!("{} smoothing bandwidths for {} coordinates", self.hr.len(), self.hd.len()));
        }
        for (k, &hd) in self.hd.iter().enumerate() {
            let hr = self.hr_at(k);
            if !(hd > T::zero() && hd < hr && hr < T::lit(0.5)) {
                return bad(format!("need 0 < hd < hr < 0.5, got hd = {hd}, hr = {hr} (coordinate {k})"));
            }
            if (T::of_usize(self.big_n) * hd).as_f64() < 10.0 {
                return bad(format!("N * hd = {} is below 10", (T::of_usize(self.big_n) * hd).as_f64()));
            }
        }
        if self.block < 2 || 2 * self.block > n {
            return Err(MonobandError::InvalidWindow { len: self.block, n });
        }
        if self.replicates == 0 {
            return bad("bootstrap size must be positive".into());
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return bad(format!("levels must lie in (0, 1): {:?}", self.alphas));
        }
        if self.grid_size(n) == 0 {
            return bad("evaluation grid must be nonempty".into());
        }
        Ok(())
    }
}

/// Geometric grid of 12 smoothing bandwidths from `0.75 n^{-1/5}` to `min(0.45, 6 n^{-1/5})`.
pub fn candidate_grid<T: Scalar>(n: usize) -> Vec<T> {
    let base = (n as f64).powf(-0.2);
    let (lo, hi) = (0.75 * base, f64::min(0.45, 6.0 * base));
    let ratio = (hi / lo).powf(1.0 / 11.0);
    (0..12).map(|i| T::lit(if i == 11 { hi } else { lo * ratio.powi(i) })).collect()
}

/// `min((hr^2 + (n hr)^{-1/2})^{2/3}, hr/2)`.
pub fn hd_default<T: Scalar>(hr: T, n: usize) -> T {
    let r = hr * hr + (T::of_usize(n) * hr).powf(T::lit(-0.5));
    r.powf(T::lit(2.0 / 3.0)).min(hr / T::lit(2.0))
}

/// Block-length candidates `max(2, floor(n^{1/3}/2)) ..= 2 floor(n^{1/3})`.
pub fn mv_candidates(n: usize) -> Vec<usize> {
    let c = (n as f64).cbrt().floor() as usize;
    let lo = ((n as f64).cbrt() / 2.0).floor().max(2.0) as usize;
    (lo..=(2 * c).max(lo + 2)).filter(|&l| 2 * l <= n).collect()
}

const GCV_DENOM_FLOOR: f64 = 1e-8;
const GCV_TIE: f64 = 1e-12;

fn gcv_argmin<T: Scalar>(y: &[T], candidates: &[T], eval: impl Fn(T) -> Result<(Vec<T>, T)>) -> Result<T> {
    let n = T::of_usize(y.len());
    let mean = y.iter().copied().sum::<T>() / n;
    let var = y.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let mut scores = Vec::with_capacity(candidates.len());
    let mut last_err = None;
    for &h in candidates {
        match eval(h) {
            Ok((fitted, trace)) => {
                let denom = T::one() - trace / n;
                if denom <= T::lit(GCV_DENOM_FLOOR) {
                    continue;
                }
                let rss = y.iter().zip(&fitted).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n;
                scores.push((h, rss / (denom * denom)));
            }
            Err(e @ MonobandError::SingularDesign { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    let Some(best) = scores.iter().map(|s| s.1).reduce(T::min) else {
        return Err(last_err.unwrap_or(MonobandError::DegenerateGcv));
    };
    let tol = T::lit(GCV_TIE) * var;
    Ok(scores.iter().filter(|s| s.1 <= best + tol).map(|s| s.0).fold(T::neg_infinity(), T::max))
}

/// GCV bandwidth of the jackknife smoother for one series.
pub fn gcv_select<T: Scalar>(kernel: KernelSpec, y: ArrayView1<'_, T>, candidates: &[T]) -> Result<T> {
    let ys = y.to_vec();
    gcv_argmin(&ys, candidates, |h| {
        let (f1, l1) = ll_trend_hat(kernel, y, h)?;
        let (f2, l2) = ll_trend_hat(kernel, y, h / T::SQRT_2())?;
        let fitted = f2.iter().zip(&f1).map(|(&a, &b)| a + a - b).collect();
        let tr = T::lit(2.0) * l2.iter().copied().sum::<T>() - l1.iter().copied().sum::<T>();
        Ok((fitted, tr))
    })
}

/// GCV bandwidth of the jackknife coefficient smoother.
pub fn gcv_select_regression<T: Scalar>(
    kernel: KernelSpec,
    y: ArrayView1<'_, T>,
    x: ArrayView2<'_, T>,
    candidates: &[T],
) -> Result<T> {
    let ys = y.to_vec();
    gcv_argmin(&ys, candidates, |h| {
        let (f1, l1) = ll_regression_hat(kernel, y, x, h)?;
        let (f2, l2) = ll_regression_hat(kernel, y, x, h / T::SQRT_2())?;
        let fitted = f2.iter().zip(&f1).map(|(&a, &b)| a + a - b).collect();
        let tr = T::lit(2.0) * l2.iter().copied().sum::<T>() - l1.iter().copied().sum::<T>();
        Ok((fitted, tr))
    })
}

/// Per-coordinate GCV selections and their average.
pub fn gcv_select_panel<T: Scalar>(
    kernel: KernelSpec,
    panel: &TimeSeriesPanel<T>,
    candidates: &[T],
) -> Result<(Vec<T>, T)> {
    let y = panel.y();
    let each = (0..panel.p())
        .into_par_iter()
        .map(|k| gcv_select(kernel, y.column(k), candidates))
        .collect::<Result<Vec<_>>>()?;
    let avg = each.iter().copied().sum::<T>() / T::of_usize(each.len());
    Ok((each, avg))
}

/// `tr(S^{1/2})` for `S = (1/(m-1)) sum_i (A_i - A_bar)^2`, `A_i = u_i u_i'`, given the
/// Gram matrix `G = U'U` of the factors. `S` shares its nonzero spectrum with
/// `G^{1/2} M G^{1/2}`, `M = (diag(G) - G/m)/(m-1)`.
fn rank_one_se<T: Scalar>(gram: ArrayView2<'_, T>) -> T {
    let m = gram.nrows();
    let mf = T::of_usize(m);
    let root = psd_sqrt(gram);
    let mut mm = gram.mapv(|v| -v / mf);
    for i in 0..m {
        mm[[i, i]] += gram[[i, i]];
    }
    mm.mapv_inplace(|v| v / (mf - T::one()));
    let h = root.dot(&mm).dot(&root);
    let h = (&h + &h.t()) * T::lit(0.5);
    let vals = sym_eigen(h.view()).0;
    // drop rounding-level eigenvalues of the rank-deficient product
    let floor = vals.iter().copied().fold(T::zero(), T::max) * T::lit(1e-12);
    vals.iter().filter(|&&l| l > floor).map(|&l| l.sqrt()).sum()
}

/// Minimum-volatility choice among `candidates` given a factor builder for each block length.
pub fn mv_select_with<T: Scalar>(
    candidates: &[usize],
    factors: impl Fn(usize) -> Result<Array2<T>> + Sync,
) -> Result<usize> {
    let r = candidates.len();
    if r < 3 {
        return Err(MonobandError::InvalidInput(format!("need at least 3 block lengths, got {r}")));
    }
    if candidates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MonobandError::InvalidInput("block lengths must be strictly increasing".into()));
    }
    let scaled = candidates
        .par_iter()
        .map(|&l| factors(l).map(|f| f.mapv(|v| v / T::of_usize(l).sqrt())))
        .collect::<Result<Vec<_>>>()?;
    let n = scaled[0].nrows();
    let l_max = candidates[r - 1];
    let mv = (l_max - 1..n)
        .into_par_iter()
        .map(|row| {
            let gram = Array2::from_shape_fn((r, r), |(a, b)| scaled[a].row(row).dot(&scaled[b].row(row)));
            (0..r)
                .map(|j| {
                    let lo = j.saturating_sub(3);
                    let hi = (j + 3).min(r - 1);
                    rank_one_se(gram.slice(ndarray::s![lo..=hi, lo..=hi]))
                })
                .collect::<Vec<T>>()
        })
        .reduce(|| vec![T::neg_infinity(); r], |a, b| a.iter().zip(&b).map(|(&x, &y)| x.max(y)).collect());
    let best = mv.iter().copied().fold(T::infinity(), T::min);
    let tol = T::lit(1e-10) * best.abs();
    let j = mv.iter().position(|&v| v <= best + tol).expect("finite volatility");
    Ok(candidates[j])
}

/// Minimum-volatility block length for trend residuals (`n x p`).
pub fn mv_select<T: Scalar>(residuals: ArrayView2<'_, T>, candidates: &[usize]) -> Result<usize> {
    mv_select_with(candidates, |l| cum_increments(residuals, l).map(|inc| inc.factors))
}

/// Minimum-volatility block length for the regression factors.
pub fn mv_select_regression<T: Scalar>(
    kernel: KernelSpec,
    x: ArrayView2<'_, T>,
    residuals: ArrayView1<'_, T>,
    contrast: ArrayView2<'_, T>,
    hr: T,
    ridge: Option<T>,
    candidates: &[usize],
) -> Result<usize> {
    mv_select_with(candidates, |l| sigma_c_factors(kernel, x, residuals, contrast, l, hr, ridge).map(|inc| inc.factors))
}

/// Data-driven tuning parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tuned<T: Scalar> {
    /// Per-coordinate GCV selections (one entry in regression mode).
    pub hr_each: Vec<T>,
    pub hr: T,
    pub hd: T,
    pub block: usize,
}

/// GCV average for `h_r`, the `h_d` rule, and MV for `L` on the jackknife residuals.
pub fn tune_trend<T: Scalar>(kernel: KernelSpec, panel: &TimeSeriesPanel<T>) -> Result<Tuned<T>> {
    let n = panel.n();
    let (hr_each, hr) = gcv_select_panel(kernel, panel, &candidate_grid::<T>(n))?;
    let hd = hd_default(hr, n);
    let fitted = trend_at_obs(kernel, panel, &vec![hr; panel.p()])?;
    let resid = residual_panel(panel, fitted.view());
    let block = mv_select(resid.view(), &mv_candidates(n))?;
    Ok(Tuned { hr_each, hr, hd, block })
}

/// Tuning for regression mode with contrast `C`.
pub fn tune_regression<T: Scalar>(
    kernel: KernelSpec,
    panel: &TimeSeriesPanel<T>,
    contrast: ArrayView2<'_, T>,
    ridge: Option<T>,
) -> Result<Tuned<T>> {
    let x = panel.x().ok_or_else(|| MonobandError::InvalidInput("regression mode needs covariates".into()))?;
    let n = panel.n();
    let y = panel.response();
    let hr = gcv_select_regression(kernel, y, x, &candidate_grid::<T>(n))?;
    let hd = hd_default(hr, n);
    let fitted = fit_regression_grid(kernel, y, x, hr, &panel.times())?;
    let resid = residual_panel(panel, fitted.view());
    let block = mv_select_regression(kernel, x, resid.column(0), contrast, hr, ridge, &mv_candidates(n))?;
    Ok(Tuned { hr_each: vec![hr], hr, hd, block })
}

impl<T: Scalar> Tuned<T> {
    /// Default configuration for `dims` output coordinates.
    pub fn config(&self, dims: usize) -> BandwidthConfig<T> {
        BandwidthConfig::new(vec![self.hr], vec![self.hd; dims], self.block)
    }
}
