//! Simulation designs and the Monte Carlo coverage harness.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{run_scb_regression, run_scb_trend, ScbResult};
use crate::error::{MonobandError, Result};
use crate::kernels::KernelSpec;
use crate::linalg::psd_sqrt;
use crate::penalize::{penalized_scb, tune_penalized, PenaltyConfig};
use crate::rng::{derive_seed, stream, Tag};
use crate::smoother::TimeSeriesPanel;
use crate::tuning::{tune_regression, tune_trend, BandwidthConfig, Tuned};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    /// Locally stationary vector AR(1) errors.
    TrendA,
    /// Piecewise stationary AR(+-0.5) errors switching at 1/3.
    TrendB,
    /// Time-varying regression, locally stationary MA errors.
    RegC,
    /// Time-varying regression, piecewise AR errors.
    RegD,
    /// `TrendA` with standardized exponential innovations.
    SkewExp,
    /// `TrendA` with standardized log-normal innovations.
    SkewLogNormal,
    /// Weakly monotone trends with `TrendA` errors.
    WeakMonotone,
    /// Weakly monotone trends with `TrendB` errors.
    WeakMonotoneB,
}

impl Model {
    pub fn is_regression(self) -> bool {
        matches!(self, Model::RegC | Model::RegD)
    }

    pub fn variant(self) -> TrendVariant {
        match self {
            Model::WeakMonotone | Model::WeakMonotoneB => TrendVariant::Weak,
            _ => TrendVariant::Strict,
        }
    }

    fn innovation(self) -> Innovation {
        match self {
            Model::SkewExp => Innovation::Exponential,
            Model::SkewLogNormal => Innovation::LogNormal,
            _ => Innovation::Gaussian,
        }
    }

    fn piecewise(self) -> bool {
        matches!(self, Model::TrendB | Model::WeakMonotoneB | Model::RegD)
    }
}

impl std::str::FromStr for Model {
    type Err = MonobandError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "a" | "trend-a" => Model::TrendA,
            "b" | "trend-b" => Model::TrendB,
            "c" | "reg-c" => Model::RegC,
            "d" | "reg-d" => Model::RegD,
            "exp" | "skew-exp" => Model::SkewExp,
            "lognormal" | "skew-lognormal" => Model::SkewLogNormal,
            "weak" | "weak-a" => Model::WeakMonotone,
            "weak-b" => Model::WeakMonotoneB,
            other => return Err(MonobandError::InvalidInput(format!("unknown model '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrendVariant {
    Strict,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Innovation {
    Gaussian,
    Exponential,
    LogNormal,
}

/// Optional replacements of the design's dependence parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    /// Constant AR coefficient replacing `b(t)` (or the piecewise coefficients).
    pub ar: Option<f64>,
    /// Constant covariate coefficient replacing `c(t)`.
    pub covariate_c: Option<f64>,
    pub zero_errors: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub model: Model,
    pub n: usize,
    pub p: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub overrides: Overrides,
}

impl DgpSpec {
    pub fn new(model: Model, n: usize, p: usize, seed: u64) -> Self {
        DgpSpec { model, n, p, burn_in: 200, seed, overrides: Overrides::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.burn_in < 100 {
            return Err(MonobandError::InvalidInput(format!("burn-in {} below 100", self.burn_in)));
        }
        if !self.model.is_regression() && self.p < 3 {
            return Err(MonobandError::InvalidInput("trend designs need p >= 3".into()));
        }
        if self.n < 10 {
            return Err(MonobandError::InvalidInput("n must be at least 10".into()));
        }
        Ok(())
    }
}

pub fn m1(t: f64) -> f64 {
    0.5 * t * t + t
}

pub fn m2(t: f64) -> f64 {
    t.exp()
}

pub fn m3(t: f64) -> f64 {
    2.0 * (t + 1.0).ln()
}

pub fn m1_weak(t: f64) -> f64 {
    if t < 1.0 / 3.0 {
        2.0 * (1.0f64 / 3.0).exp()
    } else {
        (t * t - 8.0 * t / 3.0 + 25.0 / 9.0) * t.exp()
    }
}

pub fn m2_weak(t: f64) -> f64 {
    if t < 1.0 / 3.0 {
        1.0 + (3.0 * (t - 1.0 / 3.0)).powi(3)
    } else if t < 2.0 / 3.0 {
        1.0
    } else {
        1.0 + (3.0 * (t - 2.0 / 3.0)).powi(3)
    }
}

pub fn m3_weak(t: f64) -> f64 {
    if t < 2.0 / 3.0 {
        2.0 * (3.0 * PI * (t - 2.0 / 3.0) / 4.0).cos()
    } else {
        2.0
    }
}

/// The `p`-dimensional trend: block `b(k)` function scaled by `a_k = 1 + 0.2 (k/p)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trends {
    pub p: usize,
    pub variant: TrendVariant,
}

impl Trends {
    pub fn scale(&self, k: usize) -> f64 {
        1.0 + 0.2 * ((k + 1) as f64 / self.p as f64).sqrt()
    }

    /// Which of the three base functions coordinate `k` (0-based) uses.
    pub fn block(&self, k: usize) -> usize {
        if k < self.p / 3 {
            0
        } else if k < 2 * self.p / 3 {
            1
        } else {
            2
        }
    }

    pub fn eval_at(&self, k: usize, t: f64) -> f64 {
        let f = match (self.variant, self.block(k)) {
            (TrendVariant::Strict, 0) => m1(t),
            (TrendVariant::Strict, 1) => m2(t),
            (TrendVariant::Strict, _) => m3(t),
            (TrendVariant::Weak, 0) => m1_weak(t),
            (TrendVariant::Weak, 1) => m2_weak(t),
            (TrendVariant::Weak, _) => m3_weak(t),
        };
        self.scale(k) * f
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        (0..self.p).map(|k| self.eval_at(k, t)).collect()
    }
}

pub fn make_trends(p: usize, variant: TrendVariant) -> Trends {
    Trends { p, variant }
}

/// Unit diagonal, `(-0.95)^{|j-l|}` inside the leading `floor(p/2)` block, zero elsewhere.
pub fn make_sigma_e(p: usize) -> Array2<f64> {
    let q = p / 2;
    Array2::from_shape_fn((p, p), |(j, l)| {
        if j == l {
            1.0
        } else if j < q && l < q {
            (-0.95f64).powi((j as i32 - l as i32).abs())
        } else {
            0.0
        }
    })
}

fn standardized(rng: &mut ChaCha8Rng, kind: Innovation) -> f64 {
    match kind {
        Innovation::Gaussian => rng.sample(StandardNormal),
        Innovation::Exponential => rng.sample::<f64, _>(Exp1) - 1.0,
        Innovation::LogNormal => {
            let e = std::f64::consts::E;
            let z: f64 = rng.sample(StandardNormal);
            (z.exp() - e.sqrt()) / ((e - 1.0) * e).sqrt()
        }
    }
}

fn innovations(rng: &mut ChaCha8Rng, root: &Array2<f64>, kind: Innovation, rows: usize) -> Array2<f64> {
    let p = root.nrows();
    let eta = Array2::from_shape_fn((rows, p), |_| standardized(rng, kind));
    eta.dot(&root.t())
}

/// `n x p` error panel of a trend design.
pub fn make_errors(spec: &DgpSpec, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (n, p) = (spec.n, spec.p);
    if spec.overrides.zero_errors {
        return Array2::zeros((n, p));
    }
    let root = psd_sqrt(make_sigma_e(p).view());
    let xi = innovations(rng, &root, spec.model.innovation(), spec.burn_in + n);
    let mut e = Array2::zeros((n, p));
    if spec.model.piecewise() {
        let (c0, c1) = spec.overrides.ar.map_or((0.5, -0.5), |a| (a, a));
        let mut g0 = Array1::<f64>::zeros(p);
        let mut g1 = Array1::<f64>::zeros(p);
        for s in 0..spec.burn_in + n {
            let x = xi.row(s);
            g0 = &g0 * c0 + x;
            g1 = &g1 * c1 + x;
            if s >= spec.burn_in {
                let i = s - spec.burn_in + 1;
                let src = if i as f64 / n as f64 <= 1.0 / 3.0 { &g0 } else { &g1 };
                e.row_mut(i - 1).assign(src);
            }
        }
    } else {
        let b = |t: f64| spec.overrides.ar.unwrap_or(0.15 * (0.9 + 0.1 * (2.0 * PI * t).sin()));
        let mut g = Array1::<f64>::zeros(p);
        for s in 0..spec.burn_in + n {
            let t = if s < spec.burn_in { 0.0 } else { (s - spec.burn_in + 1) as f64 / n as f64 };
            g = &g * b(t) + xi.row(s);
            if s >= spec.burn_in {
                e.row_mut(s - spec.burn_in).assign(&g);
            }
        }
    }
    e
}

/// Terms kept in `sum_j c^j v_{i-j}`: those with `c^j >= 1e-12`.
pub fn ma_terms(c: f64) -> usize {
    let c = c.abs();
    if c == 0.0 {
        return 1;
    }
    let mut j = 0;
    let mut w = 1.0;
    while w >= 1e-12 {
        j += 1;
        w *= c;
    }
    j
}

fn ma_series(noise: &[f64], offset: usize, n: usize, coef: impl Fn(f64) -> f64) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let c = coef(i as f64 / n as f64);
            let mut w = 1.0;
            let mut acc = 0.0;
            for j in 0..ma_terms(c) {
                acc += w * noise[offset + i - 1 - j];
                w *= c;
            }
            acc
        })
        .collect()
}

/// Response and covariate column of a regression design.
pub fn make_regression(spec: &DgpSpec, rng: &mut ChaCha8Rng) -> (Array1<f64>, Array1<f64>) {
    let n = spec.n;
    let pad = spec.burn_in.max(ma_terms(0.75));
    let eps: Vec<f64> = (0..pad + n).map(|_| rng.sample(StandardNormal)).collect();
    let xi: Vec<f64> = (0..pad + n).map(|_| rng.sample(StandardNormal)).collect();
    let x = ma_series(&eps, pad, n, |t| spec.overrides.covariate_c.unwrap_or(0.25 + t / 2.0));
    let e: Vec<f64> = if spec.overrides.zero_errors {
        vec![0.0; n]
    } else if spec.model.piecewise() {
        let (c0, c1) = spec.overrides.ar.map_or((0.5, -0.5), |a| (a, a));
        let (mut g0, mut g1) = (0.0, 0.0);
        let mut out = Vec::with_capacity(n);
        for (s, &v) in xi.iter().enumerate() {
            g0 = c0 * g0 + v;
            g1 = c1 * g1 + v;
            if s >= pad {
                let i = s - pad + 1;
                out.push(if i as f64 / n as f64 <= 1.0 / 3.0 { g0 } else { g1 });
            }
        }
        out
    } else {
        ma_series(&xi, pad, n, |t| spec.overrides.ar.unwrap_or(0.5 - (t - 0.5) * (t - 0.5)))
    };
    let y = Array1::from_shape_fn(n, |i| {
        let t = (i + 1) as f64 / n as f64;
        m1(t) + m2(t) * x[i] + e[i]
    });
    (y, Array1::from(x))
}

/// A simulated data set with its true monotone curves.
#[derive(Debug, Clone)]
pub struct Dataset<T: Scalar> {
    pub panel: TimeSeriesPanel<T>,
    pub model: Model,
    pub p: usize,
}

impl<T: Scalar> Dataset<T> {
    /// True curves at `t`: trend coordinates, or `(m1, m2)` in regression designs.
    pub fn truth(&self, t: f64) -> Vec<f64> {
        if self.model.is_regression() {
            vec![m1(t), m2(t)]
        } else {
            make_trends(self.p, self.model.variant()).eval(t)
        }
    }
}

/// Simulates one data set of the design.
pub fn simulate<T: Scalar>(spec: &DgpSpec) -> Result<Dataset<T>> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Tag::Simulation, 0);
    let n = spec.n;
    let panel = if spec.model.is_regression() {
        let (y, x) = make_regression(spec, &mut rng);
        let xm = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { T::one() } else { T::lit(x[i]) });
        TimeSeriesPanel::regression(y.mapv(T::lit), xm)?
    } else {
        let e = make_errors(spec, &mut rng);
        let trends = make_trends(spec.p, spec.model.variant());
        let y = Array2::from_shape_fn((n, spec.p), |(i, k)| T::lit(trends.eval_at(k, (i + 1) as f64 / n as f64) + e[[i, k]]));
        TimeSeriesPanel::new(y)?
    };
    Ok(Dataset { panel, model: spec.model, p: spec.p })
}

pub const MIN_RUNS: usize = 50;

/// How each Monte Carlo run picks its bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Bandwidths {
    /// GCV, the `h_d` rule and MV block length on every run.
    Tuned,
    Fixed { hr: f64, hd: f64, block: usize },
}

/// Settings shared by all runs of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub runs: usize,
    pub replicates: usize,
    pub big_n: usize,
    pub grid: Option<usize>,
    pub alphas: Vec<f64>,
    pub bandwidths: Bandwidths,
    pub penalty: Option<PenaltyConfig>,
    pub seed: u64,
}

impl StudyConfig {
    pub fn new(runs: usize, seed: u64) -> Self {
        StudyConfig {
            runs,
            replicates: crate::tuning::DEFAULT_REPLICATES,
            big_n: crate::tuning::DEFAULT_GRID_N,
            grid: None,
            alphas: crate::tuning::DEFAULT_ALPHAS.to_vec(),
            bandwidths: Bandwidths::Tuned,
            penalty: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub alpha: f64,
    pub coverage: f64,
    /// Binomial standard error of the coverage estimate.
    pub std_error: f64,
    /// Mean of `2 q_hat`.
    pub mean_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub model: Model,
    pub n: usize,
    pub p: usize,
    pub runs: usize,
    pub completed: usize,
    pub failures: Vec<String>,
    pub levels: Vec<LevelSummary>,
    pub mean_hr: f64,
    pub mean_hd: f64,
    pub mean_block: f64,
    /// Share of completed runs with a monotone (corrected) estimate.
    pub monotone_share: f64,
}

impl StudyReport {
    pub fn level(&self, alpha: f64) -> Option<&LevelSummary> {
        self.levels.iter().find(|l| (l.alpha - alpha).abs() < 1e-12)
    }
}

struct RunOutcome {
    covered: Vec<bool>,
    widths: Vec<f64>,
    tuned: Tuned<f64>,
    monotone: bool,
}

/// True iff `lower <= truth <= upper` at every grid point and coordinate.
pub fn covers<T: Scalar>(scb: &ScbResult<T>, alpha: f64, truth: impl Fn(f64) -> Vec<f64>) -> bool {
    let q = scb.quantile(alpha).as_f64();
    scb.eval_grid.iter().enumerate().all(|(g, &t)| {
        truth(t.as_f64())
            .iter()
            .enumerate()
            .all(|(k, &m)| (m - scb.estimate[[g, k]].as_f64()).abs() <= q)
    })
}

fn one_run(spec: &DgpSpec, study: &StudyConfig, run: usize) -> Result<RunOutcome> {
    let mut spec = *spec;
    spec.seed = derive_seed(study.seed, Tag::Study, run as u64);
    let data = simulate::<f64>(&spec)?;
    let kernel = KernelSpec::Epanechnikov;
    let contrast = Array2::<f64>::eye(2);
    let dims = if spec.model.is_regression() { 2 } else { spec.p };
    let tuned = match (&study.bandwidths, spec.model.is_regression(), &study.penalty) {
        (Bandwidths::Fixed { hr, hd, block }, _, _) => Tuned { hr_each: vec![*hr], hr: *hr, hd: *hd, block: *block },
        (Bandwidths::Tuned, true, _) => tune_regression(kernel, &data.panel, contrast.view(), None)?,
        (Bandwidths::Tuned, false, Some(pen)) => tune_penalized(kernel, &data.panel, pen)?,
        (Bandwidths::Tuned, false, None) => tune_trend(kernel, &data.panel)?,
    };
    let mut cfg: BandwidthConfig<f64> = tuned.config(dims);
    cfg.big_n = study.big_n;
    cfg.replicates = study.replicates;
    cfg.grid = study.grid;
    cfg.alphas = study.alphas.clone();
    cfg.seed = derive_seed(spec.seed, Tag::Bootstrap, 0);
    let (scb, monotone) = if spec.model.is_regression() {
        (run_scb_regression(&data.panel, contrast.view(), &cfg)?, true)
    } else if let Some(pen) = &study.penalty {
        let fit = penalized_scb(&data.panel, &cfg, pen)?;
        (fit.scb, fit.monotone)
    } else {
        let scb = run_scb_trend(&data.panel, &cfg)?;
        let m = crate::penalize::is_monotone(&scb.estimate);
        (scb, m)
    };
    let covered = study.alphas.iter().map(|&a| covers(&scb, a, |t| data.truth(t))).collect();
    let widths = study.alphas.iter().map(|&a| 2.0 * scb.quantile(a)).collect();
    Ok(RunOutcome { covered, widths, tuned, monotone })
}

/// Coverage and width of the joint bands over `study.runs` simulated data sets.
pub fn coverage_study(spec: &DgpSpec, study: &StudyConfig) -> Result<StudyReport> {
    spec.validate()?;
    if study.runs < MIN_RUNS {
        return Err(MonobandError::InvalidInput(format!("a study needs at least {MIN_RUNS} runs")));
    }
    let outcomes: Vec<Result<RunOutcome>> = (0..study.runs).into_par_iter().map(|r| one_run(spec, study, r)).collect();
    let mut failures = Vec::new();
    let ok: Vec<RunOutcome> = outcomes
        .into_iter()
        .enumerate()
        .filter_map(|(r, o)| o.map_err(|e| failures.push(format!("run {r}: {e}"))).ok())
        .collect();
    let done = ok.len().max(1) as f64;
    let levels = study
        .alphas
        .iter()
        .enumerate()
        .map(|(a, &alpha)| {
            let cov = ok.iter().filter(|o| o.covered[a]).count() as f64 / done;
            LevelSummary {
                alpha,
                coverage: cov,
                std_error: (cov * (1.0 - cov) / done).sqrt(),
                mean_width: ok.iter().map(|o| o.widths[a]).sum::<f64>() / done,
            }
        })
        .collect();
    Ok(StudyReport {
        model: spec.model,
        n: spec.n,
        p: if spec.model.is_regression() { 2 } else { spec.p },
        runs: study.runs,
        completed: ok.len(),
        failures,
        levels,
        mean_hr: ok.iter().map(|o| o.tuned.hr).sum::<f64>() / done,
        mean_hd: ok.iter().map(|o| o.tuned.hd).sum::<f64>() / done,
        mean_block: ok.iter().map(|o| o.tuned.block as f64).sum::<f64>() / done,
        monotone_share: ok.iter().filter(|o| o.monotone).count() as f64 / done,
    })
}
