//! Local-linear and jackknife bias-corrected smoothing on the rescaled grid `i/n`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{MonobandError, Result};
use crate::kernels::KernelSpec;
use crate::linalg::lu_with_cond;
use crate::Scalar;

/// Minimum number of observations a bandwidth must span (`n*h`).
pub const MIN_SPAN: f64 = 8.0;
/// Relative determinant floor of the 2x2 normal equations.
pub const DET_FLOOR: f64 = 1e-14;
/// Largest acceptable condition number of the regression Gram matrix.
pub const COND_CEILING: f64 = 1e12;

/// Observations on the grid `t_i = i/n`, `i = 1..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel<T: Scalar> {
    y: Array2<T>,
    x: Option<Array2<T>>,
}

impl<T: Scalar> TimeSeriesPanel<T> {
    /// Trend-mode panel from an `n x p` matrix.
    pub fn new(y: Array2<T>) -> Result<Self> {
        validate(&y, "y")?;
        Ok(TimeSeriesPanel { y, x: None })
    }

    /// Regression-mode panel: response of length `n`, covariates `n x p`.
    pub fn regression(y: Array1<T>, x: Array2<T>) -> Result<Self> {
        let y = y.insert_axis(Axis(1));
        validate(&y, "y")?;
        validate(&x, "x")?;
        if x.nrows() != y.nrows() {
            return Err(MonobandError::InvalidInput(format!(
                "covariates have {} rows, response has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        Ok(TimeSeriesPanel { y, x: Some(x) })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    /// Number of series (trend) or covariates (regression).
    pub fn p(&self) -> usize {
        match &self.x {
            Some(x) => x.ncols(),
            None => self.y.ncols(),
        }
    }

    pub fn y(&self) -> ArrayView2<'_, T> {
        self.y.view()
    }

    pub fn x(&self) -> Option<ArrayView2<'_, T>> {
        self.x.as_ref().map(|x| x.view())
    }

    pub fn is_regression(&self) -> bool {
        self.x.is_some()
    }

    /// Observation times `i/n`.
    pub fn times(&self) -> Vec<T> {
        obs_times(self.n())
    }

    /// Response column of a regression panel.
    pub fn response(&self) -> ArrayView1<'_, T> {
        self.y.column(0)
    }
}

fn validate<T: Scalar>(a: &Array2<T>, what: &str) -> Result<()> {
    if a.nrows() < 10 {
        return Err(MonobandError::InvalidInput(format!("{what}: need n >= 10, got {}", a.nrows())));
    }
    if a.ncols() == 0 {
        return Err(MonobandError::InvalidInput(format!("{what}: no columns")));
    }
    if let Some(pos) = a.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos / a.ncols(), pos % a.ncols());
        return Err(MonobandError::InvalidInput(format!("{what}: non-finite value at row {r}, column {c}")));
    }
    Ok(())
}

/// `i/n` for `i = 1..n`.
pub fn obs_times<T: Scalar>(n: usize) -> Vec<T> {
    let nf = T::of_usize(n);
    (1..=n).map(|i| T::of_usize(i) / nf).collect()
}

/// Jackknife and plain local-linear fits on the grid `i/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherFit<T: Scalar> {
    pub grid: Vec<T>,
    /// `N x p` jackknife estimates.
    pub mtilde: Array2<T>,
    /// `N x p` plain local-linear estimates at `h_r`.
    pub mhat: Array2<T>,
    pub hr: Vec<T>,
}

/// Kernel-weighted moments of a local window, with offsets measured in bandwidths.
#[derive(Debug, Clone, Copy, Default)]
struct Window<T> {
    s0: T,
    s1: T,
    s2: T,
    t0: T,
    t1: T,
    support: usize,
}

/// Index range `lo..hi` (0-based) of observations with `|i/n - t| <= h`.
#[inline]
fn span<T: Scalar>(n: usize, t: T, h: T) -> (usize, usize) {
    let nf = T::of_usize(n);
    let lo = ((t - h) * nf).ceil().max(T::one()).to_usize().unwrap_or(1);
    let hi = ((t + h) * nf).floor().min(nf).to_usize().unwrap_or(0);
    (lo.saturating_sub(1), hi.max(lo.saturating_sub(1)))
}

#[inline]
fn window<T: Scalar>(kernel: KernelSpec, y: ArrayView1<'_, T>, t: T, h: T) -> Window<T> {
    let n = y.len();
    let nf = T::of_usize(n);
    let (lo, hi) = span(n, t, h);
    let mut w = Window::default();
    for i in lo..hi {
        let u = (T::of_usize(i + 1) / nf - t) / h;
        let k = kernel.eval(u);
        if k > T::zero() {
            let ku = k * u;
            w.s0 += k;
            w.s1 += ku;
            w.s2 += ku * u;
            w.t0 += k * y[i];
            w.t1 += ku * y[i];
            w.support += 1;
        }
    }
    w
}

fn check_bandwidth<T: Scalar>(n: usize, h: T) -> Result<()> {
    if !(h > T::zero()) || h >= T::lit(0.5) {
        return Err(MonobandError::InvalidInput(format!("bandwidth {h} outside (0, 0.5)")));
    }
    if (T::of_usize(n) * h).as_f64() < MIN_SPAN {
        return Err(MonobandError::SingularDesign {
            t: f64::NAN,
            reason: format!("n*h = {:.3} below {MIN_SPAN}", (T::of_usize(n) * h).as_f64()),
        });
    }
    Ok(())
}

impl<T: Scalar> Window<T> {
    fn det(&self, t: T) -> Result<T> {
        if self.support < 3 {
            return Err(MonobandError::SingularDesign {
                t: t.as_f64(),
                reason: format!("only {} observations in the kernel window", self.support),
            });
        }
        let det = self.s0 * self.s2 - self.s1 * self.s1;
        if !(det > T::lit(DET_FLOOR) * self.s0 * self.s2) {
            return Err(MonobandError::SingularDesign {
                t: t.as_f64(),
                reason: format!("normal-equation determinant {:e}", det.as_f64()),
            });
        }
        Ok(det)
    }
}

/// Local-linear level and slope at each evaluation point.
pub fn ll_trend<T: Scalar>(
    kernel: KernelSpec,
    y: ArrayView1<'_, T>,
    h: T,
    points: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    check_bandwidth(y.len(), h)?;
    let mut level = Vec::with_capacity(points.len());
    let mut slope = Vec::with_capacity(points.len());
    for &t in points {
        let w = window(kernel, y, t, h);
        let det = w.det(t)?;
        level.push((w.s2 * w.t0 - w.s1 * w.t1) / det);
        slope.push((w.s0 * w.t1 - w.s1 * w.t0) / det / h);
    }
    Ok((level, slope))
}

/// Plain local-linear levels at bandwidth `h`.
pub fn ll_levels<T: Scalar>(kernel: KernelSpec, y: ArrayView1<'_, T>, h: T, points: &[T]) -> Result<Vec<T>> {
    ll_trend(kernel, y, h, points).map(|(l, _)| l)
}

/// Jackknife estimate `2 m_{h/sqrt2} - m_h`.
pub fn jackknife_trend<T: Scalar>(
    kernel: KernelSpec,
    y: ArrayView1<'_, T>,
    h: T,
    points: &[T],
) -> Result<Vec<T>> {
    let full = ll_levels(kernel, y, h, points)?;
    let half = ll_levels(kernel, y, h / T::SQRT_2(), points)?;
    Ok(half.iter().zip(&full).map(|(&a, &b)| a + a - b).collect())
}

/// Fitted values and hat-matrix diagonal of the plain smoother at the observation times.
pub fn ll_trend_hat<T: Scalar>(kernel: KernelSpec, y: ArrayView1<'_, T>, h: T) -> Result<(Vec<T>, Vec<T>)> {
    check_bandwidth(y.len(), h)?;
    let k0 = kernel.eval(T::zero());
    obs_times::<T>(y.len())
        .into_iter()
        .map(|t| {
            let w = window(kernel, y, t, h);
            let det = w.det(t)?;
            Ok(((w.s2 * w.t0 - w.s1 * w.t1) / det, k0 * w.s2 / det))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

/// Jackknife fit on the grid `i/N` for every coordinate, with per-coordinate bandwidths.
pub fn fit_trend<T: Scalar>(
    kernel: KernelSpec,
    panel: &TimeSeriesPanel<T>,
    hr: &[T],
    big_n: usize,
) -> Result<SmootherFit<T>> {
    let p = panel.p();
    if hr.len() != p {
        return Err(MonobandError::InvalidInput(format!("{} bandwidths for {p} coordinates", hr.len())));
    }
    let grid = obs_times::<T>(big_n);
    let y = panel.y();
    let cols = (0..p)
        .into_par_iter()
        .map(|k| {
            let col = y.column(k);
            let full = ll_levels(kernel, col, hr[k], &grid)?;
            let half = ll_levels(kernel, col, hr[k] / T::SQRT_2(), &grid)?;
            let tilde: Vec<T> = half.iter().zip(&full).map(|(&a, &b)| a + a - b).collect();
            Ok((tilde, full))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mtilde = Array2::zeros((big_n, p));
    let mut mhat = Array2::zeros((big_n, p));
    for (k, (tilde, full)) in cols.into_iter().enumerate() {
        mtilde.column_mut(k).assign(&Array1::from(tilde));
        mhat.column_mut(k).assign(&Array1::from(full));
    }
    Ok(SmootherFit { grid, mtilde, mhat, hr: hr.to_vec() })
}

/// Local-linear fit of time-varying coefficients: `(levels, slopes)`, each `|points| x p`.
pub fn ll_regression<T: Scalar>(
    kernel: KernelSpec,
    y: ArrayView1<'_, T>,
    x: ArrayView2<'_, T>,
    h: T,
    points: &[T],
) -> Result<(Array2<T>, Array2<T>)> {
    let n = y.len();
    let p = x.ncols();
    check_bandwidth(n, h)?;
    let mut level = Array2::zeros((points.len(), p));
    let mut slope = Array2::zeros((points.len(), p));
    for (g, &t) in points.iter().enumerate() {
        let sys = regression_system(kernel, y, x, t, h)?;
        let (lu, _, _) = sys.factor(t)?;
        let sol = lu.solve(&sys.rhs);
        for j in 0..p {
            level[[g, j]] = sol[j];
            slope[[g, j]] = sol[p + j] / h;
        }
    }
    Ok((level, slope))
}

struct RegressionSystem<T: Scalar> {
    gram: Array2<T>,
    rhs: Vec<T>,
}

impl<T: Scalar> RegressionSystem<T> {
    fn factor(&self, t: T) -> Result<(crate::linalg::Lu<T>, T, Array2<T>)> {
        let singular = |reason: String| MonobandError::SingularDesign { t: t.as_f64(), reason };
        let (lu, cond, inv) =
            lu_with_cond(self.gram.view()).ok_or_else(|| singular("zero pivot in weighted Gram matrix".into()))?;
        if !(cond <= T::lit(COND_CEILING)) {
            return Err(singular(format!("Gram condition number {:e}", cond.as_f64())));
        }
        Ok((lu, cond, inv))
    }
}

fn regression_system<T: Scalar>(
    kernel: KernelSpec,
    y: ArrayView1<'_, T>,
    x: ArrayView2<'_, T>,
    t: T,
    h: T,
) -> Result<RegressionSystem<T>> {
    let n = y.len();
    let p = x.ncols();
    let nf = T::of_usize(n);
    let (lo, hi) = span(n, t, h);
    let mut gram = Array2::zeros((2 * p, 2 * p));
    let mut rhs = vec![T::zero(); 2 * p];
    let mut z = vec![T::zero(); 2 * p];
    let mut support = 0usize;
    for i in lo..hi {
        let u = (T::of_usize(i + 1) / nf - t) / h;
        let k = kernel.eval(u);
        if k <= T::zero() {
            continue;
        }
        support += 1;
        for j in 0..p {
            z[j] = x[[i, j]];
            z[p + j] = x[[i, j]] * u;
        }
        for a in 0..2 * p {
            let kz = k * z[a];
            rhs[a] += kz * y[i];
            for b in a..2 * p {
                gram[[a, b]] += kz * z[b];
            }
        }
    }
    if support < 2 * p + 1 {
        return Err(MonobandError::SingularDesign {
            t: t.as_f64(),
            reason: format!("only {support} observations in the kernel window"),
        });
    }
    for a in 0..2 * p {
        for b in 0..a {
            gram[[a, b]] = gram[[b, a]];
        }
    }
    Ok(RegressionSystem { gram, rhs })
}

/// Jackknife coefficient estimates, `|points| x p`.
pub fn jackknife_regression<T: Scalar>(
    kernel: KernelSpec,
    y: ArrayView1<'_, T>,
    x: ArrayView2<'_, T>,
    h: T,
    points: &[T],
) -> Result<Array2<T>> {
    let (full, _) = ll_regression(kernel, y, x, h, points)?;
    let (half, _) = ll_regression(kernel, y, x, h / T::SQRT_2(), points)?;
    Ok(&half * T::lit(2.0) - &full)
}

/// Parallel jackknife regression over a long grid (chunks are independent).
pub fn fit_regression_grid<T: Scalar>(
    kernel: KernelSpec,
    y: ArrayView1<'_, T>,
    x: ArrayView2<'_, T>,
    h: T,
    points: &[T],
) -> Result<Array2<T>> {
    let chunks = points
        .par_chunks(256)
        .map(|c| jackknife_regression(kernel, y, x, h, c))
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = chunks.iter().map(|c| c.view()).collect();
    Ok(ndarray::concatenate(Axis(0), &views).expect("consistent widths"))
}

/// Fitted response and hat diagonal of the plain regression smoother at observation times.
pub fn ll_regression_hat<T: Scalar>(
    kernel: KernelSpec,
    y: ArrayView1<'_, T>,
    x: ArrayView2<'_, T>,
    h: T,
) -> Result<(Vec<T>, Vec<T>)> {
    let n = y.len();
    let p = x.ncols();
    check_bandwidth(n, h)?;
    let k0 = kernel.eval(T::zero());
    obs_times::<T>(n)
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let sys = regression_system(kernel, y, x, t, h)?;
            let (lu, _, inv) = sys.factor(t)?;
            let sol = lu.solve(&sys.rhs);
            let xi = x.row(i);
            let fitted: T = (0..p).map(|j| xi[j] * sol[j]).sum();
            let mut quad = T::zero();
            for a in 0..p {
                for b in 0..p {
                    quad += xi[a] * inv[[a, b]] * xi[b];
                }
            }
            Ok((fitted, k0 * quad))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

/// Residuals `y - m~(t_i)` (trend, `n x p`) or `y - x' m~(t_i)` (regression, `n x 1`).
/// `fitted` holds the jackknife estimate at the observation times.
pub fn residual_panel<T: Scalar>(panel: &TimeSeriesPanel<T>, fitted: ArrayView2<'_, T>) -> Array2<T> {
    match panel.x() {
        None => &panel.y() - &fitted,
        Some(x) => {
            let y = panel.response();
            let r = Array1::from_iter(
                (0..panel.n()).map(|i| y[i] - x.row(i).iter().zip(fitted.row(i)).map(|(&a, &b)| a * b).sum::<T>()),
            );
            r.insert_axis(Axis(1))
        }
    }
}

/// Jackknife estimates at the observation times for every trend coordinate (`n x p`).
pub fn trend_at_obs<T: Scalar>(kernel: KernelSpec, panel: &TimeSeriesPanel<T>, hr: &[T]) -> Result<Array2<T>> {
    let times = panel.times();
    let y = panel.y();
    let cols = (0..panel.p())
        .into_par_iter()
        .map(|k| jackknife_trend(kernel, y.column(k), hr[k], &times))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Array2::zeros((panel.n(), panel.p()));
    for (k, c) in cols.into_iter().enumerate() {
        out.column_mut(k).assign(&Array1::from(c));
    }
    Ok(out)
}
