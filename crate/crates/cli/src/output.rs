//! `result.json` and the long-format `bands.csv`.

use std::collections::BTreeMap;
use std::path::Path;

use monoband::Scb64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Level keys as written in `result.json`, e.g. `"0.05"`.
pub fn alpha_key(alpha: f64) -> String {
    format!("{alpha}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultJson {
    pub mode: String,
    pub n: usize,
    pub p: usize,
    pub alpha: Vec<f64>,
    pub q_hat: BTreeMap<String, f64>,
    pub domain: [f64; 2],
    pub grid: Vec<f64>,
    pub estimate: Vec<Vec<f64>>,
    pub lower: BTreeMap<String, Vec<Vec<f64>>>,
    pub upper: BTreeMap<String, Vec<Vec<f64>>>,
    pub config: serde_json::Value,
    pub seed: u64,
}

fn rows(a: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

impl ResultJson {
    pub fn from_scb(mode: &str, n: usize, scb: &Scb64, config: serde_json::Value) -> Self {
        let alpha = scb.config.alphas.clone();
        let bands: Vec<_> = alpha.iter().map(|&a| scb.band(a).cloned().unwrap_or_else(|| scb.level_band(a))).collect();
        ResultJson {
            mode: mode.to_owned(),
            n,
            p: scb.estimate.ncols(),
            q_hat: bands.iter().map(|b| (alpha_key(b.alpha), b.q_hat)).collect(),
            domain: [scb.domain.0, scb.domain.1],
            grid: scb.eval_grid.clone(),
            estimate: rows(&scb.estimate),
            lower: bands.iter().map(|b| (alpha_key(b.alpha), rows(&b.lower))).collect(),
            upper: bands.iter().map(|b| (alpha_key(b.alpha), rows(&b.upper))).collect(),
            alpha,
            config,
            seed: scb.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub alpha: f64,
    pub coordinate: usize,
    pub t: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn band_rows(res: &ResultJson) -> Vec<BandRow> {
    let mut out = Vec::new();
    for &a in &res.alpha {
        let key = alpha_key(a);
        for k in 0..res.p {
            for (g, &t) in res.grid.iter().enumerate() {
                out.push(BandRow {
                    alpha: a,
                    coordinate: k,
                    t,
                    estimate: res.estimate[g][k],
                    lower: res.lower[&key][g][k],
                    upper: res.upper[&key][g][k],
                });
            }
        }
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn write_bands(path: &Path, res: &ResultJson) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in band_rows(res) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_bands(path: &Path) -> CliResult<Vec<BandRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}
