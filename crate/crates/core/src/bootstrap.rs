//! Gaussian bootstrap of the sup-deviation process and joint simultaneous bands.

use ndarray::{linalg::general_mat_mul, s, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{MonobandError, Result};
use crate::kernels::KernelSpec;
use crate::lrcov::{cum_increments, sigma_c_factors, LongRunIncrements};
use crate::rearrange::{MonotoneFit, Rearrangement};
use crate::rng::{stream, Tag};
use crate::smoother::{
    fit_regression_grid, fit_trend, obs_times, residual_panel, trend_at_obs, TimeSeriesPanel,
};
use crate::tuning::BandwidthConfig;
use crate::Scalar;

/// Grid rows multiplied together in one dense block.
const ROW_BLOCK: usize = 32;
/// Replicates handled per task; fixed so results never depend on the thread count.
const REPLICATE_CHUNK: usize = 128;

/// Normalized rearrangement weights of one evaluation point, over grid indices `i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightRow<T> {
    pub idx: Vec<usize>,
    pub w: Vec<T>,
}

/// `K_d((m~(i/N) - m_I(t))/hd)` normalized over `i`, for each `t` on the grid.
pub fn weights_w<T: Scalar>(kernel: KernelSpec, re: &Rearrangement<T>, m_at_grid: &[T]) -> Result<Vec<WeightRow<T>>> {
    let hd = re.hd();
    m_at_grid
        .iter()
        .enumerate()
        .map(|(g, &s)| {
            let range = re.window(s);
            let mut row = WeightRow { idx: Vec::with_capacity(range.len()), w: Vec::with_capacity(range.len()) };
            let mut total = T::zero();
            for r in range {
                let k = kernel.eval((re.sorted()[r] - s) / hd);
                if k > T::zero() {
                    row.idx.push(re.order()[r]);
                    row.w.push(k);
                    total += k;
                }
            }
            if !(total > T::min_positive_value()) || !total.is_finite() {
                return Err(MonobandError::EmptyWeightRow { row: g });
            }
            row.w.iter_mut().for_each(|v| *v /= total);
            Ok(row)
        })
        .collect()
}

/// Rows of `(1/(n h)) K~*((j/n - i/N)/h, i/N)` over `j`, one per grid index `i`.
#[derive(Debug, Clone)]
pub struct KStarBand<T> {
    h: T,
    starts: Vec<usize>,
    offsets: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> KStarBand<T> {
    pub fn new(kernel: KernelSpec, h: T, n: usize, big_n: usize) -> Result<Self> {
        let nf = T::of_usize(n);
        let scale = T::one() / (nf * h);
        let mut starts = Vec::with_capacity(big_n);
        let mut offsets = Vec::with_capacity(big_n + 1);
        let mut vals = Vec::new();
        offsets.push(0);
        for i in 1..=big_n {
            let t = T::of_usize(i) / T::of_usize(big_n);
            let (a, b) = kernel.kstar_factors(t, h)?;
            let lo = ((t - h) * nf).ceil().max(T::one()).to_usize().unwrap_or(1);
            let hi = ((t + h) * nf).floor().min(nf).to_usize().unwrap_or(0);
            starts.push(lo - 1);
            for j in lo..=hi {
                let u = (T::of_usize(j) / nf - t) / h;
                vals.push(scale * kernel.jackknife(u) * (a - b * u));
            }
            offsets.push(vals.len());
        }
        Ok(KStarBand { h, starts, offsets, vals })
    }

    pub fn h(&self) -> T {
        self.h
    }

    /// First 0-based `j` and the values for grid index `i` (0-based).
    pub fn row(&self, i: usize) -> (usize, &[T]) {
        (self.starts[i], &self.vals[self.offsets[i]..self.offsets[i + 1]])
    }
}

/// Dense slice of coefficients over `j = start..start+vals.len()` (0-based).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoefRow<T> {
    pub start: usize,
    pub vals: Vec<T>,
}

/// `c_{k,j}(g)` for every output coordinate `k` and grid point `g`.
#[derive(Debug, Clone)]
pub struct BootstrapCoefficients<T> {
    pub n: usize,
    pub grid_len: usize,
    pub dims: usize,
    rows: Vec<CoefRow<T>>,
}

impl<T: Scalar> BootstrapCoefficients<T> {
    pub fn row(&self, k: usize, g: usize) -> &CoefRow<T> {
        &self.rows[k * self.grid_len + g]
    }
}

/// Contracts the weights with the boundary kernel band once for all replicates.
pub fn precompute_coefficients<T: Scalar>(
    weights: &[Vec<WeightRow<T>>],
    bands: &[&KStarBand<T>],
    n: usize,
) -> BootstrapCoefficients<T> {
    let dims = weights.len();
    let grid_len = weights.first().map_or(0, Vec::len);
    let rows = (0..dims * grid_len)
        .into_par_iter()
        .map(|r| {
            let (k, g) = (r / grid_len, r % grid_len);
            let band = bands[k];
            let wr = &weights[k][g];
            let (mut lo, mut hi) = (usize::MAX, 0usize);
            for &i in &wr.idx {
                let (st, v) = band.row(i);
                lo = lo.min(st);
                hi = hi.max(st + v.len());
            }
            if lo >= hi {
                return CoefRow::default();
            }
            let mut vals = vec![T::zero(); hi - lo];
            for (&i, &w) in wr.idx.iter().zip(&wr.w) {
                let (st, v) = band.row(i);
                for (acc, &b) in vals[st - lo..].iter_mut().zip(v) {
                    *acc += w * b;
                }
            }
            CoefRow { start: lo, vals }
        })
        .collect();
    BootstrapCoefficients { n, grid_len, dims, rows }
}

/// Standard normal draws of replicate `b`.
pub fn replicate_normals<T: Scalar>(seed: u64, b: usize, n: usize) -> Vec<T> {
    let mut rng = stream(seed, Tag::Bootstrap, b as u64);
    (0..n).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect()
}

/// `max_{k,g} |sum_j c_{k,j}(g) z_j f_{j,k} / sqrt(L)|` for given draws `z`.
pub fn sup_stat_with<T: Scalar>(coeffs: &BootstrapCoefficients<T>, inc: &LongRunIncrements<T>, z: &[T]) -> T {
    let root = T::of_usize(inc.block).sqrt();
    let f = &inc.factors;
    let mut best = T::zero();
    for k in 0..coeffs.dims {
        for g in 0..coeffs.grid_len {
            let row = coeffs.row(k, g);
            let v: T = row.vals.iter().enumerate().map(|(o, &c)| {
                let j = row.start + o;
                c * z[j] * f[[j, k]]
            }).sum();
            best = best.max((v / root).abs());
        }
    }
    best
}

/// One replicate of the sup statistic using fresh draws from `rng`.
pub fn draw_sup_stat<T: Scalar, R: Rng>(coeffs: &BootstrapCoefficients<T>, inc: &LongRunIncrements<T>, rng: &mut R) -> T {
    let z: Vec<T> = (0..coeffs.n).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
    sup_stat_with(coeffs, inc, &z)
}

struct DenseBlock<T> {
    start: usize,
    mat: Array2<T>,
}

fn dense_blocks<T: Scalar>(coeffs: &BootstrapCoefficients<T>, inc: &LongRunIncrements<T>) -> Vec<DenseBlock<T>> {
    let inv_root = T::one() / T::of_usize(inc.block).sqrt();
    let mut blocks = Vec::new();
    for k in 0..coeffs.dims {
        for g0 in (0..coeffs.grid_len).step_by(ROW_BLOCK) {
            let g1 = (g0 + ROW_BLOCK).min(coeffs.grid_len);
            let rows: Vec<&CoefRow<T>> = (g0..g1).map(|g| coeffs.row(k, g)).filter(|r| !r.vals.is_empty()).collect();
            let Some(lo) = rows.iter().map(|r| r.start).min() else { continue };
            let hi = rows.iter().map(|r| r.start + r.vals.len()).max().unwrap_or(lo);
            let mut mat = Array2::zeros((rows.len(), hi - lo));
            for (a, r) in rows.iter().enumerate() {
                for (o, &c) in r.vals.iter().enumerate() {
                    let j = r.start + o;
                    mat[[a, j - lo]] = c * inc.factors[[j, k]] * inv_root;
                }
            }
            blocks.push(DenseBlock { start: lo, mat });
        }
    }
    blocks
}

/// `B` replicates of the sup statistic, computed in column blocks with dense products.
pub fn sup_samples<T: Scalar>(
    coeffs: &BootstrapCoefficients<T>,
    inc: &LongRunIncrements<T>,
    replicates: usize,
    seed: u64,
) -> Vec<T> {
    let n = coeffs.n;
    let blocks = dense_blocks(coeffs, inc);
    let chunks: Vec<usize> = (0..replicates).step_by(REPLICATE_CHUNK).collect();
    chunks
        .into_par_iter()
        .map(|b0| {
            let b1 = (b0 + REPLICATE_CHUNK).min(replicates);
            let width = b1 - b0;
            let mut z = Array2::<T>::zeros((n, width));
            for (c, b) in (b0..b1).enumerate() {
                for (j, v) in replicate_normals::<T>(seed, b, n).into_iter().enumerate() {
                    z[[j, c]] = v;
                }
            }
            let mut best = vec![T::zero(); width];
            for blk in &blocks {
                let zs = z.slice(s![blk.start..blk.start + blk.mat.ncols(), ..]);
                let mut out = Array2::<T>::zeros((blk.mat.nrows(), width));
                general_mat_mul(T::one(), &blk.mat, &zs, T::zero(), &mut out);
                for row in out.axis_iter(Axis(0)) {
                    for (m, &v) in best.iter_mut().zip(row.iter()) {
                        *m = m.max(v.abs());
                    }
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .concat()
}

/// The `ceil((1 - alpha) B)`-th order statistic.
pub fn empirical_quantile<T: Scalar>(samples: &[T], alpha: f64) -> T {
    assert!(!samples.is_empty(), "quantile of an empty sample");
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    v[quantile_rank(v.len(), alpha) - 1]
}

/// 1-based rank used by [`empirical_quantile`].
pub fn quantile_rank(b: usize, alpha: f64) -> usize {
    let r = ((1.0 - alpha) * b as f64 - 1e-9).ceil();
    (r.max(1.0) as usize).min(b)
}

/// Bands at one confidence level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelBand<T: Scalar> {
    pub alpha: f64,
    pub q_hat: T,
    pub lower: Array2<T>,
    pub upper: Array2<T>,
}

/// Bootstrap output: sup-statistic sample, quantiles and constant-width bands.
#[derive(Debug, Clone)]
pub struct ScbResult<T: Scalar> {
    pub sup_samples: Vec<T>,
    pub eval_grid: Vec<T>,
    /// `G x K` monotone estimate.
    pub estimate: Array2<T>,
    pub domain: (T, T),
    pub levels: Vec<LevelBand<T>>,
    pub seed: u64,
    pub config: BandwidthConfig<T>,
}

impl<T: Scalar> ScbResult<T> {
    pub fn new(
        sup_samples: Vec<T>,
        fit: &MonotoneFit<T>,
        config: &BandwidthConfig<T>,
    ) -> Self {
        let mut res = ScbResult {
            sup_samples,
            eval_grid: fit.eval_grid.clone(),
            estimate: fit.m_i.clone(),
            domain: fit.domain,
            levels: Vec::new(),
            seed: config.seed,
            config: config.clone(),
        };
        res.levels = config.alphas.iter().map(|&a| res.level_band(a)).collect();
        res
    }

    pub fn replicates(&self) -> usize {
        self.sup_samples.len()
    }

    pub fn quantile(&self, alpha: f64) -> T {
        empirical_quantile(&self.sup_samples, alpha)
    }

    /// Bands at any level from the stored sample (no new bootstrap).
    pub fn level_band(&self, alpha: f64) -> LevelBand<T> {
        let q = self.quantile(alpha);
        LevelBand { alpha, q_hat: q, lower: self.estimate.mapv(|v| v - q), upper: self.estimate.mapv(|v| v + q) }
    }

    pub fn band(&self, alpha: f64) -> Option<&LevelBand<T>> {
        self.levels.iter().find(|b| (b.alpha - alpha).abs() < 1e-12)
    }

    /// Shifts estimate and bands by `shift[g]` at every coordinate.
    pub fn shifted(mut self, shift: &[T]) -> Self {
        let apply = |a: &mut Array2<T>| {
            for (mut row, &d) in a.axis_iter_mut(Axis(0)).zip(shift) {
                row.mapv_inplace(|v| v + d);
            }
        };
        apply(&mut self.estimate);
        for lb in &mut self.levels {
            apply(&mut lb.lower);
            apply(&mut lb.upper);
        }
        self
    }
}

/// Intermediate objects of a bootstrap run, exposed for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct ScbParts<T: Scalar> {
    pub mtilde: Array2<T>,
    pub fit: MonotoneFit<T>,
    pub increments: LongRunIncrements<T>,
    pub coefficients: BootstrapCoefficients<T>,
}

fn coefficients_for<T: Scalar>(
    kernel: KernelSpec,
    fit: &MonotoneFit<T>,
    hr: &[T],
    n: usize,
    big_n: usize,
) -> Result<BootstrapCoefficients<T>> {
    let weights = fit
        .parts
        .par_iter()
        .enumerate()
        .map(|(k, re)| weights_w(kernel, re, &fit.m_i.column(k).to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let mut distinct: Vec<KStarBand<T>> = Vec::new();
    for &h in hr {
        if !distinct.iter().any(|b| b.h() == h) {
            distinct.push(KStarBand::new(kernel, h, n, big_n)?);
        }
    }
    let bands: Vec<&KStarBand<T>> = hr.iter().map(|&h| distinct.iter().find(|b| b.h() == h).expect("band built")).collect();
    Ok(precompute_coefficients(&weights, &bands, n))
}

/// Fit, rearrangement, long-run increments and coefficients for trend mode.
pub fn prepare_trend<T: Scalar>(panel: &TimeSeriesPanel<T>, cfg: &BandwidthConfig<T>) -> Result<ScbParts<T>> {
    let (n, p) = (panel.n(), panel.p());
    cfg.validate(n)?;
    if cfg.hd.len() != p {
        return Err(MonobandError::InvalidInput(format!("{} rearrangement bandwidths for {p} series", cfg.hd.len())));
    }
    let hr: Vec<T> = (0..p).map(|k| cfg.hr_at(k)).collect();
    let smooth = fit_trend(cfg.kernel, panel, &hr, cfg.big_n)?;
    let fit = MonotoneFit::new(cfg.kernel, smooth.mtilde.view(), &cfg.hd, cfg.grid_size(n))?;
    let at_obs = trend_at_obs(cfg.kernel, panel, &hr)?;
    let resid = residual_panel(panel, at_obs.view());
    let increments = cum_increments(resid.view(), cfg.block)?;
    let coefficients = coefficients_for(cfg.kernel, &fit, &hr, n, cfg.big_n)?;
    Ok(ScbParts { mtilde: smooth.mtilde, fit, increments, coefficients })
}

/// Joint bands for a panel of monotone trends.
pub fn run_scb_trend<T: Scalar>(panel: &TimeSeriesPanel<T>, cfg: &BandwidthConfig<T>) -> Result<ScbResult<T>> {
    let parts = prepare_trend(panel, cfg)?;
    let samples = sup_samples(&parts.coefficients, &parts.increments, cfg.replicates, cfg.seed);
    Ok(ScbResult::new(samples, &parts.fit, cfg))
}

/// Fit, rearrangement, long-run factors and coefficients for contrasts of regression coefficients.
pub fn prepare_regression<T: Scalar>(
    panel: &TimeSeriesPanel<T>,
    contrast: ArrayView2<'_, T>,
    cfg: &BandwidthConfig<T>,
) -> Result<ScbParts<T>> {
    let x = panel.x().ok_or_else(|| MonobandError::InvalidInput("regression mode needs covariates".into()))?;
    let n = panel.n();
    let s = contrast.nrows();
    cfg.validate(n)?;
    if contrast.ncols() != panel.p() || s == 0 {
        return Err(MonobandError::InvalidInput(format!(
            "contrast is {}x{}, expected s x {}",
            s,
            contrast.ncols(),
            panel.p()
        )));
    }
    if cfg.hd.len() != s {
        return Err(MonobandError::InvalidInput(format!("{} rearrangement bandwidths for {s} contrasts", cfg.hd.len())));
    }
    let hr = cfg.hr[0];
    let y = panel.response();
    let grid = obs_times::<T>(cfg.big_n);
    let coef = fit_regression_grid(cfg.kernel, y, x, hr, &grid)?;
    let mtilde = coef.dot(&contrast.t());
    let fit = MonotoneFit::new(cfg.kernel, mtilde.view(), &cfg.hd, cfg.grid_size(n))?;
    let at_obs = fit_regression_grid(cfg.kernel, y, x, hr, &obs_times::<T>(n))?;
    let resid = residual_panel(panel, at_obs.view());
    let increments = sigma_c_factors(cfg.kernel, x, resid.column(0), contrast, cfg.block, hr, cfg.ridge)?;
    let coefficients = coefficients_for(cfg.kernel, &fit, &vec![hr; s], n, cfg.big_n)?;
    Ok(ScbParts { mtilde, fit, increments, coefficients })
}

/// Joint bands for monotone contrasts `C m(t)` of time-varying coefficients.
pub fn run_scb_regression<T: Scalar>(
    panel: &TimeSeriesPanel<T>,
    contrast: ArrayView2<'_, T>,
    cfg: &BandwidthConfig<T>,
) -> Result<ScbResult<T>> {
    let parts = prepare_regression(panel, contrast, cfg)?;
    let samples = sup_samples(&parts.coefficients, &parts.increments, cfg.replicates, cfg.seed);
    Ok(ScbResult::new(samples, &parts.fit, cfg))
}
