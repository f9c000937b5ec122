//! Structural invariants of every module, each returning a description of the
//! first violation found.

use monoband::bootstrap::{prepare_trend, run_scb_regression, run_scb_trend, sup_samples};
use monoband::hypotest::{constrained_quadratic_fit, pvalue_search, test_increase_span, test_increase_window};
use monoband::kernels::KernelSpec;
use monoband::linalg::{sym_eigen, Lu};
use monoband::lrcov::cum_increments;
use monoband::penalize::{is_monotone, penalized_scb, pseudo_panel, PenaltyConfig, MONOTONE_TOL};
use monoband::rearrange::{monotone_eval, MonotoneFit, Rearrangement};
use monoband::simgen::{coverage_study, make_errors, simulate, Bandwidths, DgpSpec, Model, StudyConfig};
use monoband::smoother::{fit_regression_grid, jackknife_trend, ll_levels, obs_times};
use monoband::tuning::{gcv_select, gcv_select_panel, mv_candidates, mv_select, tune_trend};
use monoband::{BandwidthConfig, ScbResult, TimeSeriesPanel};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::reference::noise;

pub type Check = fn() -> Result<(), String>;

const K: KernelSpec = KernelSpec::Epanechnikov;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Composite Simpson rule with `m` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Integral over `[-1, 1]` split at the jackknife kernel's kinks.
fn jack_integral(f: impl Fn(f64) -> f64) -> f64 {
    let r = 1.0 / 2f64.sqrt();
    [(-1.0, -r), (-r, r), (r, 1.0)].iter().map(|&(a, b)| simpson(&f, a, b, 2000)).sum()
}

pub fn kernel_cdf_monotone() -> Result<(), String> {
    ensure(K.cdf(1.0f64) == 1.0 && K.cdf(-1.0f64) == 0.0, || "cdf endpoints".into())?;
    let mut prev = K.cdf(-1.5f64);
    for i in 1..=3000 {
        let v = K.cdf(-1.5 + i as f64 * 1e-3);
        ensure(v >= prev, || format!("cdf decreases at step {i}"))?;
        prev = v;
    }
    Ok(())
}

pub fn jackknife_kernel_moments() -> Result<(), String> {
    let m0 = jack_integral(|x| K.jackknife(x));
    let m2 = jack_integral(|x| x * x * K.jackknife(x));
    ensure((m0 - 1.0).abs() < 1e-10, || format!("integral of the jackknife kernel is {m0}"))?;
    ensure(m2.abs() < 1e-10, || format!("second moment of the jackknife kernel is {m2:e}"))
}

pub fn boundary_kernel_interior() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5000 {
        let h: f64 = rng.random_range(0.02..0.49);
        let t = rng.random_range(h..=1.0 - h);
        let u = rng.random_range(-1.2..1.2);
        let (a, b) = (K.kstar(u, t, h).map_err(err)?, K.jackknife(u));
        ensure((a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0), || format!("K* {a} vs K~ {b} at u={u}, t={t}, h={h}"))?;
    }
    Ok(())
}

pub fn moment_determinant_bound() -> Result<(), String> {
    let bound = (K.kappa2() - K.kappa1().powi(2)) / 4.0;
    for &h in &[0.02, 0.1, 0.25, 0.45, 0.8] {
        for i in 0..=10_000 {
            let t = i as f64 / 10_000.0;
            let [n0, n1, n2] = K.moments(t, h);
            let c = n0 * n2 - n1 * n1;
            ensure(c >= bound - 1e-15, || format!("c({t}) = {c} below {bound} at h = {h}"))?;
        }
    }
    Ok(())
}

pub fn smoother_reproduces_affine() -> Result<(), String> {
    let n = 300;
    let h = 0.2;
    let y = Array1::from_iter((1..=n).map(|i| 1.5 - 2.0 * i as f64 / n as f64));
    let pts: Vec<f64> = (0..=50).map(|i| h + (1.0 - 2.0 * h) * i as f64 / 50.0).collect();
    let fit = jackknife_trend(K, y.view(), h, &pts).map_err(err)?;
    for (&t, &m) in pts.iter().zip(&fit) {
        let truth = 1.5 - 2.0 * t;
        ensure((m - truth).abs() <= 1e-10 * truth.abs().max(1.0), || format!("affine trend {m} vs {truth} at {t}"))?;
    }
    let x = Array2::from_shape_fn((n, 3), |(i, a)| if a == 0 { 1.0 } else { ((i * (a + 3)) % 7) as f64 - 3.0 });
    let beta = [0.7, -1.2, 2.5];
    let y = Array1::from_iter((0..n).map(|i| (0..3).map(|a| x[[i, a]] * beta[a]).sum::<f64>()));
    let coef = fit_regression_grid(K, y.view(), x.view(), h, &pts).map_err(err)?;
    for (r, row) in coef.rows().into_iter().enumerate() {
        for (a, &b) in row.iter().enumerate() {
            ensure((b - beta[a]).abs() <= 1e-10 * beta[a].abs(), || format!("coefficient {a} at point {r}: {b}"))?;
        }
    }
    Ok(())
}

pub fn smoother_locality() -> Result<(), String> {
    let n = 200;
    let h = 0.15;
    let base = noise(n, 1, 3).column(0).to_owned();
    let pts = obs_times::<f64>(n);
    let before_ll = ll_levels(K, base.view(), h, &pts).map_err(err)?;
    let before_jk = jackknife_trend(K, base.view(), h, &pts).map_err(err)?;
    for &j in &[0usize, 57, 120, 199] {
        let mut y = base.clone();
        y[j] += 5.0;
        let after_ll = ll_levels(K, y.view(), h, &pts).map_err(err)?;
        let after_jk = jackknife_trend(K, y.view(), h, &pts).map_err(err)?;
        let tj = (j + 1) as f64 / n as f64;
        for (g, &t) in pts.iter().enumerate() {
            if (t - tj).abs() > h + 1e-12 {
                ensure(after_ll[g] == before_ll[g] && after_jk[g] == before_jk[g], || format!("y_{j} moved the fit at {t}"))?;
            }
        }
    }
    Ok(())
}

fn wiggly(big_n: usize) -> Array1<f64> {
    Array1::from_iter((1..=big_n).map(|i| {
        let t = i as f64 / big_n as f64;
        t + 0.3 * (12.0 * t).sin()
    }))
}

pub fn rearranged_inverse_monotone_with_limits() -> Result<(), String> {
    let m = wiggly(500);
    for &hd in &[0.02, 0.1] {
        let re = Rearrangement::new(K, m.view(), hd);
        let (lo, hi) = (re.min() - hd, re.max() + hd);
        ensure(re.inverse(lo) == 0.0 && re.inverse(hi - 1e-12) <= 1.0, || "inverse leaves [0, 1]".into())?;
        ensure(re.inverse(hi + 1.0) == 1.0 && re.inverse(lo - 1.0) == 0.0, || "inverse limits".into())?;
        let mut prev = 0.0;
        for i in 0..=4000 {
            let s = lo + (hi - lo) * i as f64 / 4000.0;
            let v = re.inverse(s);
            ensure(v >= prev, || format!("inverse decreases at s = {s}"))?;
            prev = v;
        }
    }
    Ok(())
}

pub fn rearrangement_idempotent() -> Result<(), String> {
    let curves: [fn(f64) -> f64; 4] = [|t| t, |t| t + t * t, |t| t.exp() - 1.0, |t| 2.0 * t + 0.1 * (6.0 * t).sin()];
    let big_n = 2000;
    for (c, f) in curves.iter().enumerate() {
        let m = Array1::from_iter((1..=big_n).map(|i| f(i as f64 / big_n as f64)));
        for &hd in &[0.03, 0.08] {
            let re = Rearrangement::new(K, m.view(), hd);
            let (lo, hi) = re.domain();
            let targets: Vec<f64> = (0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect();
            let est = monotone_eval(&re, &targets).map_err(err)?;
            let allowed = 5.0 * (hd * hd + 1.0 / (big_n as f64 * hd));
            let worst = targets.iter().zip(&est).map(|(&t, &e)| (e - f(t)).abs()).fold(0.0, f64::max);
            ensure(worst <= allowed, || format!("curve {c}, hd {hd}: error {worst} above {allowed}"))?;
        }
    }
    Ok(())
}

pub fn rearrangement_permutation_invariant() -> Result<(), String> {
    let m = wiggly(400);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut shuffled = m.to_vec();
    shuffled.shuffle(&mut rng);
    let hd = 0.08;
    let a = Rearrangement::new(K, m.view(), hd);
    let b = Rearrangement::new(K, Array1::from(shuffled).view(), hd);
    let (lo, hi) = a.domain();
    let targets: Vec<f64> = (0..=60).map(|i| lo + (hi - lo) * i as f64 / 60.0).collect();
    let (ea, eb) = (monotone_eval(&a, &targets).map_err(err)?, monotone_eval(&b, &targets).map_err(err)?);
    let worst = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ensure(worst <= 1e-9, || format!("storage order changed the estimate by {worst}"))
}

pub fn monotone_fit_nondecreasing() -> Result<(), String> {
    let m1 = wiggly(600);
    let m2 = Array1::from_iter((1..=600).map(|i| {
        let t = i as f64 / 600.0;
        (3.0 * t).powi(2) - 0.4 * (20.0 * t).cos()
    }));
    let mut mt = Array2::zeros((600, 2));
    mt.column_mut(0).assign(&m1);
    mt.column_mut(1).assign(&m2);
    let fit = MonotoneFit::new(K, mt.view(), &[0.06, 0.04], 300).map_err(err)?;
    ensure(is_monotone(&fit.m_i), || "monotone estimate decreases on the domain".into())
}

pub fn increments_rank_one() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let n = rng.random_range(20..200);
        let block = rng.random_range(2..=n / 2);
        let p = rng.random_range(1..=4);
        let r = noise(n, p, case);
        let inc = cum_increments(r.view(), block).map_err(err)?;
        for j in 1..=n {
            let f: Vec<f64> = if j < block {
                vec![0.0; p]
            } else {
                (0..p).map(|a| (j - block..j).map(|i| r[[i, a]]).sum()).collect()
            };
            for a in 0..p {
                ensure((inc.factors[[j - 1, a]] - f[a]).abs() <= 1e-12, || format!("block sum at j={j}, n={n}, L={block}"))?;
            }
            let m = inc.increment(j);
            for a in 0..p {
                for b in 0..p {
                    let textbook = f[a] * f[b] / block as f64;
                    ensure((m[[a, b]] - textbook).abs() <= 1e-12, || format!("increment ({a},{b}) at j={j}"))?;
                }
            }
        }
    }
    Ok(())
}

pub fn cumulative_loewner_monotone() -> Result<(), String> {
    let r = noise(150, 4, 11);
    let inc = cum_increments(r.view(), 6).map_err(err)?;
    let mut prev = inc.cumulative(0);
    for k in 1..=150 {
        let next = inc.cumulative(k);
        let diff = &next - &prev;
        let (vals, _) = sym_eigen(diff.view());
        let low = vals.iter().copied().fold(f64::INFINITY, f64::min);
        ensure(low >= -1e-12, || format!("Q({k}) - Q({}) has eigenvalue {low:e}", k - 1))?;
        prev = next;
    }
    Ok(())
}

fn trend_panel(n: usize, p: usize, seed: u64) -> TimeSeriesPanel<f64> {
    let e = noise(n, p, seed);
    let y = Array2::from_shape_fn((n, p), |(i, k)| {
        let t = (i + 1) as f64 / n as f64;
        (1.0 + 0.3 * k as f64) * t + 0.4 * t * t + 0.3 * e[[i, k]]
    });
    TimeSeriesPanel::new(y).expect("finite panel")
}

fn small_config(p: usize, replicates: usize) -> BandwidthConfig<f64> {
    let mut cfg = BandwidthConfig::new(vec![0.25], vec![0.1; p], 5);
    cfg.big_n = 800;
    cfg.replicates = replicates;
    cfg.alphas = vec![0.2, 0.1, 0.05, 0.01];
    cfg.seed = 99;
    cfg
}

fn small_scb() -> Result<ScbResult<f64>, String> {
    run_scb_trend(&trend_panel(300, 3, 21), &small_config(3, 600)).map_err(err)
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool").install(f)
}

pub fn thread_count_determinism() -> Result<(), String> {
    let panel = trend_panel(250, 3, 31);
    let cfg = small_config(3, 700);
    let n = 250;
    let e = noise(n, 2, 32);
    let x = Array2::from_shape_fn((n, 2), |(i, a)| if a == 0 { 1.0 } else { e[[i, 0]] });
    let y = Array1::from_iter((0..n).map(|i| {
        let t = (i + 1) as f64 / n as f64;
        t + (0.5 + t) * x[[i, 1]] + 0.3 * e[[i, 1]]
    }));
    let reg = TimeSeriesPanel::regression(y, x).map_err(err)?;
    let eye = Array2::<f64>::eye(2);
    let mut reg_cfg = small_config(2, 700);
    reg_cfg.hr = vec![0.3];
    let runs: Vec<(Vec<f64>, Vec<f64>)> = [1, 2, 3, 4]
        .iter()
        .map(|&t| {
            in_pool(t, || {
                let a = run_scb_trend(&panel, &cfg).map_err(err)?;
                let b = run_scb_regression(&reg, eye.view(), &reg_cfg).map_err(err)?;
                Ok::<_, String>((a.sup_samples, b.sup_samples))
            })
        })
        .collect::<Result<_, _>>()?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    for (i, r) in runs.iter().enumerate().skip(1) {
        ensure(bits(&r.0) == bits(&runs[0].0), || format!("trend samples differ with {} threads", i + 1))?;
        ensure(bits(&r.1) == bits(&runs[0].1), || format!("regression samples differ with {} threads", i + 1))?;
    }
    Ok(())
}

pub fn band_geometry() -> Result<(), String> {
    let scb = small_scb()?;
    for lb in &scb.levels {
        for ((&lo, &up), &e) in lb.lower.iter().zip(&lb.upper).zip(&scb.estimate) {
            ensure(((up - lo) - 2.0 * lb.q_hat).abs() <= 1e-12, || format!("width {} vs {}", up - lo, 2.0 * lb.q_hat))?;
            ensure((0.5 * (up + lo) - e).abs() <= 1e-12, || "estimate is not the midpoint".into())?;
        }
    }
    Ok(())
}

pub fn quantile_monotone_in_level() -> Result<(), String> {
    let scb = small_scb()?;
    ensure(scb.quantile(0.05) >= scb.quantile(0.10), || "q(0.05) < q(0.10)".into())?;
    let mut prev = 0.0;
    for i in (1..=99).rev() {
        let q = scb.quantile(i as f64 / 100.0);
        ensure(q >= prev, || format!("quantile decreases at alpha = {}", i as f64 / 100.0))?;
        prev = q;
    }
    Ok(())
}

/// Doubling the evaluation grid on a model (a) smoke data set moves `q_hat` by under 1%.
pub fn grid_robustness() -> Result<(), String> {
    let data = simulate::<f64>(&DgpSpec::new(Model::TrendA, 300, 9, 2024)).map_err(err)?;
    let tuned = tune_trend(K, &data.panel).map_err(err)?;
    let mut cfg = tuned.config(9);
    cfg.replicates = 500;
    cfg.seed = 17;
    let base = run_scb_trend(&data.panel, &cfg).map_err(err)?;
    let g = cfg.grid_size(300);
    cfg.grid = Some(2 * g);
    let fine = run_scb_trend(&data.panel, &cfg).map_err(err)?;
    for &a in &[0.1, 0.05] {
        let (q1, q2) = (base.quantile(a), fine.quantile(a));
        ensure(((q2 - q1) / q1).abs() < 0.01, || format!("alpha {a}: q_hat {q1} with G={g}, {q2} with G={}", 2 * g))?;
    }
    Ok(())
}

pub fn selection_scale_equivariant() -> Result<(), String> {
    let panel = trend_panel(300, 2, 41);
    let y = panel.y();
    let cands = monoband::tuning::candidate_grid::<f64>(300);
    for k in 0..2 {
        let col = y.column(k);
        let h = gcv_select(K, col, &cands).map_err(err)?;
        for &c in &[1e-3, 0.5, 7.0, 1e3] {
            let scaled = col.mapv(|v| v * c);
            let hc = gcv_select(K, scaled.view(), &cands).map_err(err)?;
            ensure(hc == h, || format!("GCV argmin moved from {h} to {hc} under scale {c}"))?;
        }
    }
    let resid = noise(300, 3, 42);
    let l = mv_select(resid.view(), &mv_candidates(300)).map_err(err)?;
    for &c in &[1e-3, 7.0, 1e3] {
        let lc = mv_select(resid.mapv(|v| v * c).view(), &mv_candidates(300)).map_err(err)?;
        ensure(lc == l, || format!("MV argmin moved from {l} to {lc} under scale {c}"))?;
    }
    Ok(())
}

pub fn panel_selection_idempotent() -> Result<(), String> {
    let panel = trend_panel(300, 4, 43);
    let cands = monoband::tuning::candidate_grid::<f64>(300);
    let (each, avg) = gcv_select_panel(K, &panel, &cands).map_err(err)?;
    let mean = each.iter().sum::<f64>() / each.len() as f64;
    ensure((avg - mean).abs() <= 1e-15, || "shared bandwidth is not the average".into())?;
    let again = gcv_select_panel(K, &panel, &cands).map_err(err)?;
    ensure(again == (each, avg), || "repeated selection differs".into())?;
    let (a, b) = (tune_trend(K, &panel).map_err(err)?, tune_trend(K, &panel).map_err(err)?);
    ensure(a == b && a.hr == avg, || "tuning is not reproducible".into())
}

pub fn penalized_band_geometry() -> Result<(), String> {
    let n = 300;
    let e = noise(n, 2, 51);
    let y = Array2::from_shape_fn((n, 2), |(i, k)| {
        let t = (i + 1) as f64 / n as f64;
        (t - 0.5).max(0.0) * (1.0 + k as f64) + 0.2 * e[[i, k]]
    });
    let panel = TimeSeriesPanel::new(y).map_err(err)?;
    let cfg = small_config(2, 400);
    let pen = PenaltyConfig::new(0.3);
    let fit = penalized_scb(&panel, &cfg, &pen).map_err(err)?;
    let raw = run_scb_trend(&pseudo_panel(&panel, &pen).map_err(err)?, &cfg).map_err(err)?;
    for (lb, rb) in fit.scb.levels.iter().zip(&raw.levels) {
        ensure(lb.q_hat == rb.q_hat, || "penalized width differs from the pseudo-data width".into())?;
        for ((&lo, &up), &m) in lb.lower.iter().zip(&lb.upper).zip(&fit.scb.estimate) {
            ensure((up - m - lb.q_hat).abs() <= 1e-12 && (m - lo - lb.q_hat).abs() <= 1e-12, || "shift broke the band".into())?;
        }
    }
    let est = &fit.scb.estimate;
    let min_step = (1..est.nrows())
        .flat_map(|g| (0..est.ncols()).map(move |k| est[[g, k]] - est[[g - 1, k]]))
        .fold(f64::INFINITY, f64::min);
    ensure(fit.monotone == (min_step >= -MONOTONE_TOL), || format!("flag {} with min step {min_step:e}", fit.monotone))
}

pub fn simulation_reproducible() -> Result<(), String> {
    for model in [Model::TrendA, Model::TrendB, Model::RegC, Model::RegD, Model::SkewExp, Model::WeakMonotone] {
        let spec = DgpSpec::new(model, 200, 3, 77);
        let (a, b) = (simulate::<f64>(&spec).map_err(err)?, simulate::<f64>(&spec).map_err(err)?);
        ensure(a.panel.y() == b.panel.y() && a.panel.x() == b.panel.x(), || format!("{model:?} not reproducible"))?;
    }
    Ok(())
}

pub fn coverage_is_binomial_mean() -> Result<(), String> {
    let spec = DgpSpec::new(Model::TrendA, 200, 3, 5);
    let mut study = StudyConfig::new(50, 8);
    study.replicates = 200;
    study.big_n = 600;
    study.bandwidths = Bandwidths::Fixed { hr: 0.3, hd: 0.12, block: 4 };
    let rep = coverage_study(&spec, &study).map_err(err)?;
    ensure(rep.completed == 50, || format!("{} of 50 runs completed", rep.completed))?;
    for l in &rep.levels {
        let hits = l.coverage * 50.0;
        ensure((hits - hits.round()).abs() < 1e-9, || "coverage is not a share of runs".into())?;
        let se = (l.coverage * (1.0 - l.coverage) / 50.0).sqrt();
        ensure((l.std_error - se).abs() < 1e-15, || "standard error is not binomial".into())?;
    }
    Ok(())
}

pub fn skewed_innovations_standardized() -> Result<(), String> {
    for model in [Model::SkewExp, Model::SkewLogNormal] {
        let (n, p, runs) = (2000, 3, 50);
        let mut draws: Vec<Vec<f64>> = vec![Vec::with_capacity(n * runs); p];
        for run in 0..runs {
            let mut spec = DgpSpec::new(model, n, p, 1000 + run as u64);
            spec.overrides.ar = Some(0.0);
            let mut rng = monoband::rng::stream(spec.seed, monoband::rng::Tag::Simulation, 0);
            let e = make_errors(&spec, &mut rng);
            for k in 0..p {
                draws[k].extend(e.column(k).iter());
            }
        }
        for (k, d) in draws.iter().enumerate() {
            let m = d.len() as f64;
            let mean = d.iter().sum::<f64>() / m;
            let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
            let m4 = d.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / m;
            ensure(mean.abs() <= 3.0 * (var / m).sqrt(), || format!("{model:?} coordinate {k}: mean {mean}"))?;
            ensure((var - 1.0).abs() <= 3.0 * ((m4 - var * var) / m).sqrt(), || format!("{model:?} coordinate {k}: variance {var}"))?;
        }
    }
    Ok(())
}

pub fn tests_level_monotone() -> Result<(), String> {
    let scb = small_scb()?;
    let levels = [0.2, 0.1, 0.05, 0.01];
    for &c in &[-0.5, 0.0, 0.2] {
        let span: Vec<bool> =
            levels.iter().map(|&a| test_increase_span(&scb, a, 0.3, 0.7, c).map(|o| o.reject)).collect::<Result<_, _>>().map_err(err)?;
        let window: Vec<bool> =
            levels.iter().map(|&a| test_increase_window(&scb, a, 0.2, c).map(|o| o.reject)).collect::<Result<_, _>>().map_err(err)?;
        for v in [&span, &window] {
            ensure(v.windows(2).all(|w| w[0] || !w[1]), || format!("rejection not nested in the level at c = {c}: {v:?}"))?;
        }
    }
    Ok(())
}

pub fn pvalue_agrees_with_rejection() -> Result<(), String> {
    let scb = small_scb()?;
    let b = scb.replicates() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let est = &scb.estimate;
    let g1 = est.nrows() - 1;
    let rise = (0..est.ncols()).map(|k| est[[g1, k]] - est[[0, k]]).fold(f64::NEG_INFINITY, f64::max);
    let c = rise - 2.0 * scb.quantile(0.25);
    let reject_at = |q: f64| rise - 2.0 * q > c;
    let p = pvalue_search(&scb, reject_at);
    ensure(p > 0.1 && p < 0.4, || format!("p-value {p} outside the informative range"))?;
    for _ in 0..20 {
        let alpha: f64 = rng.random_range(0.001..0.5);
        if (alpha - p).abs() <= 1.0 / b {
            continue;
        }
        let direct = reject_at(scb.quantile(alpha));
        ensure(direct == (p <= alpha), || format!("alpha {alpha}: reject {direct}, p-value {p}"))?;
    }
    Ok(())
}

pub fn constrained_fit_matches_ls() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    for case in 0..30 {
        let n = rng.random_range(20..200);
        let (a, b, c) = (rng.random_range(1.0..3.0), rng.random_range(1.0..3.0), rng.random_range(-1.0..1.0));
        let e = noise(n, 1, case);
        let t = obs_times::<f64>(n);
        let y = Array1::from_iter((0..n).map(|i| a * t[i] * t[i] + b * t[i] + c + 0.01 * e[[i, 0]]));
        let mut gram = Array2::zeros((3, 3));
        let mut rhs = vec![0.0; 3];
        for i in 0..n {
            let z = [t[i] * t[i], t[i], 1.0];
            for r in 0..3 {
                rhs[r] += z[r] * y[i];
                for s in 0..3 {
                    gram[[r, s]] += z[r] * z[s];
                }
            }
        }
        let ls = Lu::new(gram.view()).ok_or("singular design")?.solve(&rhs);
        if ls[0] < 0.0 || ls[1] < 0.0 {
            continue;
        }
        let (fa, fb, fc) = constrained_quadratic_fit(y.view()).map_err(err)?;
        for (x, z) in [fa, fb, fc].iter().zip(&ls) {
            ensure((x - z).abs() <= 1e-8 * z.abs().max(1.0), || format!("constrained {x} vs least squares {z}"))?;
        }
    }
    Ok(())
}

pub fn replicate_batches_consistent() -> Result<(), String> {
    let panel = trend_panel(200, 2, 81);
    let cfg = small_config(2, 300);
    let parts = prepare_trend(&panel, &cfg).map_err(err)?;
    let all = sup_samples(&parts.coefficients, &parts.increments, 300, cfg.seed);
    let head = sup_samples(&parts.coefficients, &parts.increments, 130, cfg.seed);
    ensure(all[..130] == head[..], || "replicates depend on the batch size".into())
}

/// Every invariant with a short name.
pub fn all() -> Vec<(&'static str, Check)> {
    vec![
        ("kernel cdf nondecreasing with exact endpoints", kernel_cdf_monotone),
        ("jackknife kernel integrates to 1 with zero second moment", jackknife_kernel_moments),
        ("boundary kernel equals jackknife kernel in the interior", boundary_kernel_interior),
        ("moment determinant lower bound", moment_determinant_bound),
        ("smoother reproduces affine trends and constant coefficients", smoother_reproduces_affine),
        ("smoother locality", smoother_locality),
        ("rearranged inverse nondecreasing with limits 0 and 1", rearranged_inverse_monotone_with_limits),
        ("rearrangement idempotent up to smoothing error", rearrangement_idempotent),
        ("rearrangement invariant to storage order", rearrangement_permutation_invariant),
        ("monotone estimate nondecreasing on the domain", monotone_fit_nondecreasing),
        ("rank-1 increments equal the textbook formula", increments_rank_one),
        ("cumulative covariance Loewner-monotone", cumulative_loewner_monotone),
        ("bootstrap samples identical across thread counts", thread_count_determinism),
        ("replicates independent of batch size", replicate_batches_consistent),
        ("constant band width 2 q_hat around the estimate", band_geometry),
        ("quantile monotone in the level", quantile_monotone_in_level),
        ("doubling the grid moves q_hat under 1%", grid_robustness),
        ("GCV and MV argmin scale-equivariant", selection_scale_equivariant),
        ("shared bandwidth is the reproducible average", panel_selection_idempotent),
        ("penalized bands keep the pseudo-data geometry", penalized_band_geometry),
        ("simulated panels reproducible", simulation_reproducible),
        ("coverage is a binomial mean", coverage_is_binomial_mean),
        ("skewed innovations standardized", skewed_innovations_standardized),
        ("test rejections nested in the level", tests_level_monotone),
        ("p-values agree with direct rejection", pvalue_agrees_with_rejection),
        ("constrained quadratic fit equals least squares when feasible", constrained_fit_matches_ls),
    ]
}
