//! Penalized bands for weakly monotone trends: shift the data by a cubic
//! penalty, band the shifted trend, then undo the shift.

use serde::{Deserialize, Serialize};

use crate::bootstrap::{run_scb_trend, ScbResult};
use crate::error::Result;
use crate::kernels::KernelSpec;
use crate::smoother::TimeSeriesPanel;
use crate::tuning::{tune_trend, BandwidthConfig, Tuned};
use crate::Scalar;

/// Minimum eval-grid increment accepted as monotone.
pub const MONOTONE_TOL: f64 = 1e-10;

/// `lambda(t) = c1 t + c2 t^2 + c3 t^3` and the correction offset `g_n1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub g_n1: f64,
}

impl PenaltyConfig {
    /// `c2 = c3 = c1^{19/8}`, `g_n1 = 0`.
    pub fn new(c1: f64) -> Self {
        let c = c1.powf(19.0 / 8.0);
        PenaltyConfig { c1, c2: c, c3: c, g_n1: 0.0 }
    }

    pub fn zero() -> Self {
        PenaltyConfig { c1: 0.0, c2: 0.0, c3: 0.0, g_n1: 0.0 }
    }

    pub fn lambda(&self, t: f64) -> f64 {
        t * (self.c1 + t * (self.c2 + t * self.c3))
    }

    /// Amount subtracted from the pseudo-data fit at time `t`.
    pub fn correction(&self, t: f64) -> f64 {
        self.lambda(t) - self.c3 * self.g_n1 * t
    }

    /// Sets `g_n1 = scale * (ln^4 n / (hd sqrt(n hr)) + hd^2 ln n / c1^{5/2})`.
    pub fn with_formula_g(mut self, scale: f64, n: usize, hr: f64, hd: f64) -> Self {
        let ln = (n as f64).ln();
        self.g_n1 = scale * (ln.powi(4) / (hd * (n as f64 * hr).sqrt()) + hd * hd * ln / self.c1.powf(2.5));
        self
    }
}

/// Default ladder `1.0, 0.9, ..., 0.1`.
pub fn default_ladder() -> Vec<f64> {
    (0..10).map(|i| (10 - i) as f64 / 10.0).collect()
}

/// `y + lambda(t_i)` for every coordinate.
pub fn pseudo_panel<T: Scalar>(panel: &TimeSeriesPanel<T>, pen: &PenaltyConfig) -> Result<TimeSeriesPanel<T>> {
    let n = panel.n();
    let mut y = panel.y().to_owned();
    for (i, mut row) in y.rows_mut().into_iter().enumerate() {
        let shift = T::lit(pen.lambda((i + 1) as f64 / n as f64));
        row.mapv_inplace(|v| v + shift);
    }
    TimeSeriesPanel::new(y)
}

/// Corrected bands with the penalty that produced them.
#[derive(Debug, Clone)]
pub struct PenalizedScb<T: Scalar> {
    pub scb: ScbResult<T>,
    pub penalty: PenaltyConfig,
    pub monotone: bool,
}

/// Whether every column of `estimate` is nondecreasing up to [`MONOTONE_TOL`].
pub fn is_monotone<T: Scalar>(estimate: &ndarray::Array2<T>) -> bool {
    estimate.columns().into_iter().all(|c| {
        c.iter().zip(c.iter().skip(1)).all(|(&a, &b)| (b - a).as_f64() >= -MONOTONE_TOL)
    })
}

/// Bands for `m` from bands for `m + lambda` on the pseudo data.
pub fn penalized_scb<T: Scalar>(
    panel: &TimeSeriesPanel<T>,
    cfg: &BandwidthConfig<T>,
    pen: &PenaltyConfig,
) -> Result<PenalizedScb<T>> {
    let pseudo = pseudo_panel(panel, pen)?;
    let raw = run_scb_trend(&pseudo, cfg)?;
    let shift: Vec<T> = raw.eval_grid.iter().map(|&t| T::lit(-pen.correction(t.as_f64()))).collect();
    let scb = raw.shifted(&shift);
    let monotone = is_monotone(&scb.estimate);
    Ok(PenalizedScb { scb, penalty: *pen, monotone })
}

/// Tuning parameters chosen on the pseudo data.
pub fn tune_penalized<T: Scalar>(kernel: KernelSpec, panel: &TimeSeriesPanel<T>, pen: &PenaltyConfig) -> Result<Tuned<T>> {
    tune_trend(kernel, &pseudo_panel(panel, pen)?)
}

/// Raised when no ladder step yields a monotone corrected estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityWarning {
    pub c1: f64,
}

#[derive(Debug, Clone)]
pub struct C1Selection<T: Scalar> {
    pub fit: PenalizedScb<T>,
    pub steps: usize,
    pub warning: Option<MonotonicityWarning>,
}

/// Walks `c1 = a * c1_0` down the ladder and keeps the first monotone fit.
pub fn select_c1<T: Scalar>(
    panel: &TimeSeriesPanel<T>,
    cfg: &BandwidthConfig<T>,
    c1_0: f64,
    ladder: &[f64],
) -> Result<C1Selection<T>> {
    let mut last = None;
    for (step, &a) in ladder.iter().enumerate() {
        let fit = penalized_scb(panel, cfg, &PenaltyConfig::new(a * c1_0))?;
        if fit.monotone {
            return Ok(C1Selection { fit, steps: step + 1, warning: None });
        }
        last = Some(fit);
    }
    let fit = last.ok_or_else(|| crate::MonobandError::InvalidInput("empty C1 ladder".into()))?;
    let warning = Some(MonotonicityWarning { c1: fit.penalty.c1 });
    Ok(C1Selection { fit, steps: ladder.len(), warning })
}
