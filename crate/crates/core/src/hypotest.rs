//! Band-based tests: containment of a curve, increases of a given size, and VIC.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::bootstrap::ScbResult;
use crate::error::{MonobandError, Result};
use crate::kernels::KernelSpec;
use crate::linalg::Lu;
use crate::smoother::{ll_regression, obs_times};
use crate::Scalar;

const SNAP_SLACK: f64 = 1e-12;

/// Where a criterion binds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub coordinate: usize,
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub reject: bool,
    pub level: f64,
    pub p_value: Option<f64>,
    pub witness: Option<Witness>,
    /// Left side of the rejection inequality.
    pub statistic: f64,
}

/// Containment of a `G x K` curve in the band at level `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Containment {
    pub contained: bool,
    /// Largest signed distance outside the band; non-positive iff contained.
    pub excursion: f64,
    pub grid_index: usize,
    pub coordinate: usize,
}

pub fn band_contains<T: Scalar>(scb: &ScbResult<T>, alpha: f64, curve: ArrayView2<'_, T>) -> Result<Containment> {
    if curve.dim() != scb.estimate.dim() {
        return Err(MonobandError::InvalidInput(format!(
            "curve has shape {:?}, band has {:?}",
            curve.dim(),
            scb.estimate.dim()
        )));
    }
    let q = scb.quantile(alpha);
    let mut worst = (T::neg_infinity(), 0, 0);
    let mut contained = true;
    for ((g, k), &c) in curve.indexed_iter() {
        let m = scb.estimate[[g, k]];
        let (lo, hi) = (m - q, m + q);
        contained &= lo <= c && c <= hi;
        let d = (c - hi).max(lo - c);
        if d > worst.0 {
            worst = (d, g, k);
        }
    }
    Ok(Containment { contained, excursion: worst.0.as_f64(), grid_index: worst.1, coordinate: worst.2 })
}

/// [`band_contains`] for a curve given as a function of time.
pub fn band_contains_fn<T: Scalar>(scb: &ScbResult<T>, alpha: f64, curve: impl Fn(T) -> Vec<T>) -> Result<Containment> {
    let (g, k) = scb.estimate.dim();
    let mut vals = Array2::zeros((g, k));
    for (mut row, &t) in vals.axis_iter_mut(Axis(0)).zip(&scb.eval_grid) {
        let c = curve(t);
        if c.len() != k {
            return Err(MonobandError::InvalidInput(format!("curve returned {} values, expected {k}", c.len())));
        }
        row.assign(&ArrayView1::from(&c));
    }
    band_contains(scb, alpha, vals.view())
}

/// Least squares `a t^2 + b t + c` on `t_i = i/n` subject to `a, b >= 0`.
pub fn constrained_quadratic_fit<T: Scalar>(series: ArrayView1<'_, T>) -> Result<(T, T, T)> {
    let n = series.len();
    if n < 3 {
        return Err(MonobandError::InvalidInput("quadratic fit needs n >= 3".into()));
    }
    let t = obs_times::<T>(n);
    let basis = |i: usize, j: usize| match j {
        0 => t[i] * t[i],
        1 => t[i],
        _ => T::one(),
    };
    let mut best: Option<(T, [T; 3])> = None;
    for (use_a, use_b) in [(true, true), (false, true), (true, false), (false, false)] {
        let cols: Vec<usize> = [(use_a, 0), (use_b, 1), (true, 2)].iter().filter(|c| c.0).map(|c| c.1).collect();
        let m = cols.len();
        let mut gram = Array2::<T>::zeros((m, m));
        let mut rhs = vec![T::zero(); m];
        for i in 0..n {
            for (r, &cr) in cols.iter().enumerate() {
                rhs[r] += basis(i, cr) * series[i];
                for (c, &cc) in cols.iter().enumerate() {
                    gram[[r, c]] += basis(i, cr) * basis(i, cc);
                }
            }
        }
        let Some(lu) = Lu::new(gram.view()) else { continue };
        let sol = lu.solve(&rhs);
        let mut coef = [T::zero(); 3];
        for (&c, &v) in cols.iter().zip(&sol) {
            coef[c] = v;
        }
        if coef[0] < T::zero() || coef[1] < T::zero() {
            continue;
        }
        let sse: T = (0..n)
            .map(|i| {
                let r = series[i] - (0..3).map(|j| coef[j] * basis(i, j)).sum::<T>();
                r * r
            })
            .sum();
        if best.as_ref().is_none_or(|b| sse < b.0) {
            best = Some((sse, coef));
        }
    }
    let (_, c) = best.ok_or_else(|| MonobandError::InvalidInput("no feasible quadratic fit".into()))?;
    Ok((c[0], c[1], c[2]))
}

/// Coefficients `(a, b, c)` of `a t^2 + b t + c`.
pub type Quadratic<T> = (T, T, T);

/// Joint test of quadratic monotone trends: per-coordinate constrained fits checked against one band.
pub fn test_quadratic_trend<T: Scalar>(scb: &ScbResult<T>, alpha: f64, y: ArrayView2<'_, T>) -> Result<(TestOutcome, Vec<Quadratic<T>>)> {
    let fits = y.axis_iter(Axis(1)).map(constrained_quadratic_fit).collect::<Result<Vec<_>>>()?;
    let curve = Array2::from_shape_fn(scb.estimate.dim(), |(g, k)| {
        let t = scb.eval_grid[g];
        let (a, b, c) = fits[k];
        a * t * t + b * t + c
    });
    let res = band_contains(scb, alpha, curve.view())?;
    let t = scb.eval_grid[res.grid_index].as_f64();
    let outcome = TestOutcome {
        reject: !res.contained,
        level: alpha,
        p_value: None,
        witness: Some(Witness { coordinate: res.coordinate, t0: t, t1: t }),
        statistic: res.excursion,
    };
    Ok((outcome, fits))
}

fn snap<T: Scalar>(scb: &ScbResult<T>, t: f64) -> Result<usize> {
    let (lo, hi) = (scb.domain.0.as_f64(), scb.domain.1.as_f64());
    if t < lo - SNAP_SLACK || t > hi + SNAP_SLACK {
        return Err(MonobandError::DomainViolation { t, lo, hi });
    }
    let idx = scb
        .eval_grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.as_f64() - t).abs().total_cmp(&(b.1.as_f64() - t).abs()))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    Ok(idx)
}

/// Largest estimated rise `m(t1) - m(t0)` over coordinates.
fn rise<T: Scalar>(scb: &ScbResult<T>, g0: usize, g1: usize) -> (f64, usize) {
    scb.estimate
        .axis_iter(Axis(1))
        .enumerate()
        .map(|(k, col)| ((col[g1] - col[g0]).as_f64(), k))
        .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
}

/// Rejects "no coordinate increases by more than `c` between `t0` and `t1`".
pub fn test_increase_span<T: Scalar>(scb: &ScbResult<T>, alpha: f64, t0: f64, t1: f64, c: f64) -> Result<TestOutcome> {
    if t0 >= t1 {
        return Err(MonobandError::InvalidInput(format!("need t0 < t1, got {t0} and {t1}")));
    }
    let (g0, g1) = (snap(scb, t0)?, snap(scb, t1)?);
    let (d, k) = rise(scb, g0, g1);
    let q = scb.quantile(alpha).as_f64();
    let stat = d - 2.0 * q;
    Ok(TestOutcome {
        reject: stat > c,
        level: alpha,
        p_value: None,
        witness: Some(Witness { coordinate: k, t0: scb.eval_grid[g0].as_f64(), t1: scb.eval_grid[g1].as_f64() }),
        statistic: stat,
    })
}

/// Best rise over grid pairs at most `delta` apart, scanning only the widest pair per left end.
pub fn max_rise_window<T: Scalar>(scb: &ScbResult<T>, delta: f64) -> Option<(f64, Witness)> {
    let grid: Vec<f64> = scb.eval_grid.iter().map(|t| t.as_f64()).collect();
    let mut best: Option<(f64, Witness)> = None;
    let mut g1 = 0;
    for g0 in 0..grid.len() {
        g1 = g1.max(g0);
        while g1 + 1 < grid.len() && grid[g1 + 1] - grid[g0] <= delta + SNAP_SLACK {
            g1 += 1;
        }
        if g1 == g0 {
            continue;
        }
        let (d, k) = rise(scb, g0, g1);
        if best.is_none_or(|b| d > b.0) {
            best = Some((d, Witness { coordinate: k, t0: grid[g0], t1: grid[g1] }));
        }
    }
    best
}

/// Same as [`max_rise_window`] by exhaustive search over all pairs.
pub fn max_rise_window_full<T: Scalar>(scb: &ScbResult<T>, delta: f64) -> Option<(f64, Witness)> {
    let grid: Vec<f64> = scb.eval_grid.iter().map(|t| t.as_f64()).collect();
    let mut best: Option<(f64, Witness)> = None;
    for g0 in 0..grid.len() {
        for g1 in g0 + 1..grid.len() {
            if grid[g1] - grid[g0] > delta + SNAP_SLACK {
                break;
            }
            let (d, k) = rise(scb, g0, g1);
            if best.is_none_or(|b| d > b.0) {
                best = Some((d, Witness { coordinate: k, t0: grid[g0], t1: grid[g1] }));
            }
        }
    }
    best
}

/// Rejects "no coordinate increases by more than `c` within any window of length `delta`".
pub fn test_increase_window<T: Scalar>(scb: &ScbResult<T>, alpha: f64, delta: f64, c: f64) -> Result<TestOutcome> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(MonobandError::InvalidInput(format!("window length {delta} outside (0, 1]")));
    }
    let q = scb.quantile(alpha).as_f64();
    Ok(match max_rise_window(scb, delta) {
        Some((d, w)) => {
            let stat = d - 2.0 * q;
            TestOutcome { reject: stat > c, level: alpha, p_value: None, witness: Some(w), statistic: stat }
        }
        None => TestOutcome { reject: false, level: alpha, p_value: None, witness: None, statistic: f64::NEG_INFINITY },
    })
}

/// `1 - ` the highest confidence level at which `reject(q_hat)` holds, searched over the stored sample.
///
/// `reject` must hold for small `q_hat` and fail for large ones.
pub fn pvalue_search<T: Scalar>(scb: &ScbResult<T>, reject: impl Fn(T) -> bool) -> f64 {
    let mut sorted = scb.sup_samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let b = sorted.len();
    // largest 1-based rank r with reject(sorted[r-1])
    let (mut lo, mut hi) = (0usize, b);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if reject(sorted[mid - 1]) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    1.0 - lo as f64 / b as f64
}

/// Attaches the p-value of the test that produced `outcome` at level `alpha`.
pub fn with_p_value<T: Scalar>(mut outcome: TestOutcome, scb: &ScbResult<T>, reject: impl Fn(T) -> bool) -> TestOutcome {
    outcome.p_value = Some(pvalue_search(scb, reject));
    outcome
}

/// `log(SSE) + n^{-2/5} |D|` for the local-linear fit on the columns in `subset`.
pub fn vic_score<T: Scalar>(
    kernel: KernelSpec,
    y: ArrayView1<'_, T>,
    x: ArrayView2<'_, T>,
    subset: &[usize],
    hr: T,
) -> Result<f64> {
    if subset.is_empty() {
        return Err(MonobandError::InvalidInput("VIC needs a non-empty subset".into()));
    }
    if let Some(&bad) = subset.iter().find(|&&j| j >= x.ncols()) {
        return Err(MonobandError::InvalidInput(format!("column {bad} out of range")));
    }
    let n = y.len();
    let xd = x.select(Axis(1), subset);
    let times = obs_times::<T>(n);
    let (level, _) = ll_regression(kernel, y, xd.view(), hr, &times)?;
    let sse: f64 = (0..n)
        .map(|i| {
            let fit: T = xd.row(i).iter().zip(level.row(i)).map(|(&a, &b)| a * b).sum();
            (y[i] - fit).as_f64().powi(2)
        })
        .sum();
    Ok(sse.max(1e-300).ln() + (n as f64).powf(-0.4) * subset.len() as f64)
}
