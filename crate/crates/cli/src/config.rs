//! Command-line flags, optionally merged over a JSON config file with the same keys.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ndarray::Array2;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Input CSV (wide format).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory for result files.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Comma-separated significance levels.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Local-linear bandwidth (GCV when absent).
    #[arg(long)]
    pub hr: Option<f64>,
    /// Rearrangement bandwidth (rule of thumb when absent).
    #[arg(long)]
    pub hd: Option<f64>,
    /// Block length of the long-run covariance (minimum volatility when absent).
    #[arg(long)]
    pub block: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Number of evaluation points.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Rearrangement grid size.
    #[arg(long)]
    pub big_n: Option<usize>,
    /// Linear interpolation of empty or NA cells.
    #[arg(long)]
    pub interpolate_missing: bool,
    /// Also write bands.csv.
    #[arg(long)]
    pub bands: bool,
    /// Warn on strong lag-12 autocorrelation.
    #[arg(long)]
    pub check_seasonality: bool,
    /// Penalization constant C1 for weakly monotone trends.
    #[arg(long)]
    pub penalty: Option<f64>,
    /// Contrast matrix, rows separated by ';' and entries by ','.
    #[arg(long)]
    pub contrast: Option<String>,
    /// Ridge added to the local design matrix in regression mode.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Do not prepend an intercept column in regression mode.
    #[arg(long)]
    pub no_intercept: bool,
    /// JSON file with defaults for any of these keys.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Settings {
    /// Flags take precedence over the config file.
    pub fn resolve(self) -> CliResult<Settings> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let file: Settings = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(Settings {
            input: self.input.or(file.input),
            output: self.output.or(file.output),
            alpha: self.alpha.or(file.alpha),
            seed: self.seed.or(file.seed),
            hr: self.hr.or(file.hr),
            hd: self.hd.or(file.hd),
            block: self.block.or(file.block),
            replicates: self.replicates.or(file.replicates),
            grid: self.grid.or(file.grid),
            big_n: self.big_n.or(file.big_n),
            interpolate_missing: self.interpolate_missing || file.interpolate_missing,
            bands: self.bands || file.bands,
            check_seasonality: self.check_seasonality || file.check_seasonality,
            penalty: self.penalty.or(file.penalty),
            contrast: self.contrast.or(file.contrast),
            ridge: self.ridge.or(file.ridge),
            no_intercept: self.no_intercept || file.no_intercept,
            config: Some(path),
        })
    }

    pub fn input_path(&self) -> CliResult<&Path> {
        self.input.as_deref().ok_or_else(|| CliError::Config("--input is required".into()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn alphas(&self) -> CliResult<Vec<f64>> {
        let a = self.alpha.clone().unwrap_or_else(|| monoband::tuning::DEFAULT_ALPHAS.to_vec());
        if a.is_empty() || a.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(CliError::Config(format!("alpha values must lie in (0, 1), got {a:?}")));
        }
        Ok(a)
    }
}

/// Parses `"1,0;0,1"` into a matrix; identity of size `p` when absent.
pub fn parse_contrast(spec: Option<&str>, p: usize) -> CliResult<Array2<f64>> {
    let Some(spec) = spec else { return Ok(Array2::eye(p)) };
    let rows: Vec<Vec<f64>> = spec
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad contrast entry '{v}'"))))
                .collect()
        })
        .collect::<CliResult<_>>()?;
    if rows.iter().any(|r| r.len() != p) {
        return Err(CliError::Config(format!("every contrast row needs {p} entries")));
    }
    Ok(Array2::from_shape_fn((rows.len(), p), |(i, j)| rows[i][j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestKind {
    /// Increase of more than C between two time points.
    Span,
    /// Increase of more than C within some window of length delta.
    Window,
    /// Monotone quadratic trends in every coordinate.
    Quadratic,
}
