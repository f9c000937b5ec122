//! Command-line front end: ingestion, configuration, dispatch and result files.

pub mod config;
pub mod error;
pub mod ingest;
pub mod output;

use std::path::Path;

use clap::{Args, Parser, Subcommand};
use monoband::hypotest::{pvalue_search, test_increase_span, test_increase_window, test_quadratic_trend};
use monoband::penalize::{penalized_scb, tune_penalized};
use monoband::simgen::{coverage_study, Bandwidths, DgpSpec, Model, StudyConfig};
use monoband::tuning::{hd_default, tune_regression, tune_trend, DEFAULT_GRID_N, DEFAULT_REPLICATES};
use monoband::{run_scb_regression, run_scb_trend, Config64, KernelSpec, Panel64, PenaltyConfig, Scb64, Tuned};
use ndarray::Array2;
use serde::Serialize;
use serde_json::json;

pub use config::{parse_contrast, Settings, TestKind};
pub use error::{CliError, CliResult};
pub use ingest::{ingest_csv, InputMode};
pub use output::ResultJson;

const SEASONALITY_WARN: f64 = 0.3;

#[derive(Debug, Parser)]
#[command(name = "monoband", version, about = "Monotone trend estimation with joint simultaneous confidence bands")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Joint bands for the monotone trends of every column.
    Trend(Settings),
    /// Joint bands for monotone contrasts of time-varying coefficients.
    Regression(Settings),
    /// Monte Carlo coverage study on a simulation design.
    Simulate(SimulateArgs),
    /// Data-driven bandwidths and block length only.
    Tune(TuneArgs),
    /// Band-based hypothesis tests.
    Test(TestArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Design: a, b, c, d, exp, lognormal, weak, weak-b.
    #[arg(long)]
    pub model: Model,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 9)]
    pub p: usize,
    #[arg(long, default_value_t = 400)]
    pub runs: usize,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Tune the regression model (y column plus covariates).
    #[arg(long)]
    pub regression: bool,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long, value_enum)]
    pub kind: TestKind,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t1: Option<f64>,
    /// Window length for the window test.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Size of the increase under the null.
    #[arg(long, default_value_t = 0.0)]
    pub c: f64,
    #[command(flatten)]
    pub settings: Settings,
}

/// Runs a parsed command and returns the text printed on success.
pub fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Trend(s) => run_bands(s.resolve()?, false),
        Command::Regression(s) => run_bands(s.resolve()?, true),
        Command::Simulate(a) => run_simulate(a),
        Command::Tune(a) => run_tune(a),
        Command::Test(a) => run_test(a),
    }
}

fn mode_of(s: &Settings, regression: bool) -> InputMode {
    if regression {
        InputMode::Regression { intercept: !s.no_intercept }
    } else {
        InputMode::Trend
    }
}

fn load(s: &Settings, regression: bool) -> CliResult<Panel64> {
    let panel = ingest_csv(s.input_path()?, mode_of(s, regression), s.interpolate_missing)?;
    if s.check_seasonality {
        let acf = ingest::seasonal_acf(&panel);
        if acf > SEASONALITY_WARN {
            eprintln!("warning: lag-12 autocorrelation {acf:.2}; consider removing seasonality first");
        }
    }
    Ok(panel)
}

/// Tunes what the settings leave open and applies the explicit overrides.
fn tuned(s: &Settings, panel: &Panel64, contrast: Option<&Array2<f64>>) -> CliResult<Tuned<f64>> {
    let kernel = KernelSpec::Epanechnikov;
    let n = panel.n();
    let mut t = match (s.hr, s.hd, s.block) {
        (Some(hr), Some(hd), Some(block)) => Tuned { hr_each: vec![hr], hr, hd, block },
        _ => match (contrast, s.penalty) {
            (Some(c), _) => tune_regression(kernel, panel, c.view(), s.ridge)?,
            (None, Some(c1)) => tune_penalized(kernel, panel, &PenaltyConfig::new(c1))?,
            (None, None) => tune_trend(kernel, panel)?,
        },
    };
    if let Some(hr) = s.hr {
        t.hr = hr;
        t.hr_each = vec![hr];
        t.hd = hd_default(hr, n);
    }
    if let Some(hd) = s.hd {
        t.hd = hd;
    }
    if let Some(b) = s.block {
        t.block = b;
    }
    Ok(t)
}

fn band_config(s: &Settings, t: &Tuned<f64>, dims: usize) -> CliResult<Config64> {
    let mut cfg = t.config(dims);
    cfg.alphas = s.alphas()?;
    cfg.seed = s.seed.unwrap_or(0);
    cfg.replicates = s.replicates.unwrap_or(DEFAULT_REPLICATES);
    cfg.big_n = s.big_n.unwrap_or(DEFAULT_GRID_N);
    cfg.grid = s.grid;
    cfg.ridge = s.ridge;
    Ok(cfg)
}

fn write_results(s: &Settings, res: &ResultJson) -> CliResult<()> {
    let dir = s.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    output::write_json(&dir.join("result.json"), res)?;
    if s.bands {
        output::write_bands(&dir.join("bands.csv"), res)?;
    }
    Ok(())
}

fn summary(res: &ResultJson) -> String {
    let q: Vec<String> = res.q_hat.iter().map(|(a, q)| format!("q_hat[{a}]={q:.6}")).collect();
    format!("{} n={} p={} domain=[{:.4}, {:.4}] {}", res.mode, res.n, res.p, res.domain[0], res.domain[1], q.join(" "))
}

/// Fits the bands for `trend` or `regression` without writing anything.
pub fn fit_bands(s: &Settings, regression: bool) -> CliResult<(Scb64, ResultJson)> {
    let panel = load(s, regression)?;
    let (scb, config) = if regression {
        let p = panel.p();
        let contrast = parse_contrast(s.contrast.as_deref(), p)?;
        let t = tuned(s, &panel, Some(&contrast))?;
        let cfg = band_config(s, &t, contrast.nrows())?;
        let scb = run_scb_regression(&panel, contrast.view(), &cfg)?;
        let contrast_rows: Vec<Vec<f64>> = contrast.rows().into_iter().map(|r| r.to_vec()).collect();
        (scb, json!({ "bandwidths": cfg, "contrast": contrast_rows }))
    } else {
        let t = tuned(s, &panel, None)?;
        let cfg = band_config(s, &t, panel.p())?;
        match s.penalty {
            Some(c1) => {
                let pen = PenaltyConfig::new(c1);
                let fit = penalized_scb(&panel, &cfg, &pen)?;
                if !fit.monotone {
                    eprintln!("warning: corrected estimate is not monotone at C1={c1}; try a larger constant");
                }
                (fit.scb, json!({ "bandwidths": cfg, "penalty": pen }))
            }
            None => (run_scb_trend(&panel, &cfg)?, json!({ "bandwidths": cfg })),
        }
    };
    let mode = if regression { "regression" } else { "trend" };
    let res = ResultJson::from_scb(mode, panel.n(), &scb, config);
    Ok((scb, res))
}

fn run_bands(s: Settings, regression: bool) -> CliResult<String> {
    let (_, res) = fit_bands(&s, regression)?;
    write_results(&s, &res)?;
    Ok(summary(&res))
}

fn run_simulate(a: SimulateArgs) -> CliResult<String> {
    let s = a.settings.resolve()?;
    let seed = s.seed.unwrap_or(0);
    let mut study = StudyConfig::new(a.runs, seed);
    study.alphas = s.alphas()?;
    study.replicates = s.replicates.unwrap_or(DEFAULT_REPLICATES);
    study.big_n = s.big_n.unwrap_or(DEFAULT_GRID_N);
    study.grid = s.grid;
    study.penalty = s.penalty.map(PenaltyConfig::new);
    if let (Some(hr), Some(block)) = (s.hr, s.block) {
        study.bandwidths = Bandwidths::Fixed { hr, hd: s.hd.unwrap_or_else(|| hd_default(hr, a.n)), block };
    } else if s.hr.is_some() || s.hd.is_some() || s.block.is_some() {
        return Err(CliError::Config("fixed bandwidths need at least --hr and --block".into()));
    }
    let spec = DgpSpec::new(a.model, a.n, a.p, seed);
    let report = coverage_study(&spec, &study)?;
    let dir = s.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    output::write_json(&dir.join("study.json"), &json!({ "spec": spec, "study": study, "report": report }))?;
    let lines: Vec<String> = report
        .levels
        .iter()
        .map(|l| format!("alpha={} coverage={:.3} (se {:.3}) width={:.4}", l.alpha, l.coverage, l.std_error, l.mean_width))
        .collect();
    Ok(format!(
        "{:?} n={} p={} runs={}/{}\n{}",
        report.model,
        report.n,
        report.p,
        report.completed,
        report.runs,
        lines.join("\n")
    ))
}

fn run_tune(a: TuneArgs) -> CliResult<String> {
    let s = a.settings.resolve()?;
    let panel = load(&s, a.regression)?;
    let contrast = if a.regression { Some(parse_contrast(s.contrast.as_deref(), panel.p())?) } else { None };
    let t = tuned(&s, &panel, contrast.as_ref())?;
    let dir = s.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    output::write_json(&dir.join("tune.json"), &t)?;
    Ok(format!("hr={:.4} hd={:.4} block={}", t.hr, t.hd, t.block))
}

#[derive(Debug, Serialize)]
struct TestReport {
    kind: String,
    alpha: f64,
    c: f64,
    q_hat: f64,
    outcome: monoband::TestOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    quadratic_fits: Option<Vec<[f64; 3]>>,
}

fn run_test(a: TestArgs) -> CliResult<String> {
    let mut s = a.settings.resolve()?;
    let alphas = s.alphas()?;
    let alpha = alphas[0];
    s.alpha = Some(vec![alpha]);
    let (scb, _) = fit_bands(&s, false)?;
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::Config(format!("--{name} is required for this test")));
    let (outcome, fits) = match a.kind {
        TestKind::Span => {
            let (t0, t1) = (need(a.t0, "t0")?, need(a.t1, "t1")?);
            let out = test_increase_span(&scb, alpha, t0, t1, a.c)?;
            let rise = out.statistic + 2.0 * scb.quantile(alpha);
            (with_p(out, &scb, |q| rise - 2.0 * q > a.c), None)
        }
        TestKind::Window => {
            let delta = need(a.delta, "delta")?;
            let out = test_increase_window(&scb, alpha, delta, a.c)?;
            let rise = out.statistic + 2.0 * scb.quantile(alpha);
            (with_p(out, &scb, |q| rise - 2.0 * q > a.c), None)
        }
        TestKind::Quadratic => {
            let panel = load(&s, false)?;
            let (out, fits) = test_quadratic_trend(&scb, alpha, panel.y())?;
            let dist = out.statistic + scb.quantile(alpha);
            let fits = fits.into_iter().map(|(x, y, z)| [x, y, z]).collect();
            (with_p(out, &scb, |q| dist > q), Some(fits))
        }
    };
    let report = TestReport {
        kind: format!("{:?}", a.kind).to_lowercase(),
        alpha,
        c: a.c,
        q_hat: scb.quantile(alpha),
        outcome,
        quadratic_fits: fits,
    };
    let dir = s.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    output::write_json(&dir.join("test.json"), &report)?;
    Ok(format!(
        "{} test at alpha={alpha}: {} (p-value {:.4})",
        report.kind,
        if outcome.reject { "reject" } else { "do not reject" },
        outcome.p_value.unwrap_or(f64::NAN)
    ))
}

fn with_p(mut out: monoband::TestOutcome, scb: &Scb64, reject: impl Fn(f64) -> bool) -> monoband::TestOutcome {
    out.p_value = Some(pvalue_search(scb, reject));
    out
}

/// Caps the global worker pool from `MONOBAND_THREADS` when set.
pub fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("MONOBAND_THREADS") else { return Ok(()) };
    let k: usize = v.trim().parse().map_err(|_| CliError::Config(format!("MONOBAND_THREADS='{v}' is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(k.max(1))
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Reads `result.json` back.
pub fn read_result(path: &Path) -> CliResult<ResultJson> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
