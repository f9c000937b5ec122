//! Wide CSV input with optional linear interpolation of missing cells.

use std::path::Path;

use monoband::Panel64;
use ndarray::{Array1, Array2};

use crate::error::{CliError, CliResult};

pub const MIN_ROWS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    Trend,
    /// `y` column plus covariates; `intercept` prepends a column of ones.
    Regression { intercept: bool },
}

/// Column names and values, with `None` for empty or `NA` cells.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub names: Vec<String>,
    pub columns: Vec<Vec<Option<f64>>>,
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan")
}

pub fn read_table(path: &Path) -> CliResult<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let skip_t = header.first().is_some_and(|h| h.eq_ignore_ascii_case("t"));
    let keep: Vec<usize> = (usize::from(skip_t)..header.len()).collect();
    if keep.is_empty() {
        return Err(CliError::Config("input has no data columns".into()));
    }
    let mut columns = vec![Vec::new(); keep.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, &j) in keep.iter().enumerate() {
            let cell = rec.get(j).unwrap_or("");
            let v = if is_missing(cell) {
                None
            } else {
                Some(cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::ParseError {
                    row: r + 2,
                    column: header[j].clone(),
                    value: cell.to_owned(),
                })?)
            };
            columns[c].push(v);
        }
    }
    Ok(RawTable { names: keep.iter().map(|&j| header[j].clone()).collect(), columns })
}

/// Fills interior gaps linearly and edge gaps with the nearest observed value.
pub fn interpolate(col: &[Option<f64>]) -> Option<Vec<f64>> {
    let known: Vec<usize> = (0..col.len()).filter(|&i| col[i].is_some()).collect();
    let (&first, &last) = (known.first()?, known.last()?);
    let mut out = vec![0.0; col.len()];
    for (i, v) in out.iter_mut().enumerate() {
        *v = match col[i] {
            Some(x) => x,
            None if i < first => col[first].unwrap_or_default(),
            None if i > last => col[last].unwrap_or_default(),
            None => {
                let right = known.partition_point(|&k| k < i);
                let (a, b) = (known[right - 1], known[right]);
                let (ya, yb) = (col[a].unwrap_or_default(), col[b].unwrap_or_default());
                ya + (yb - ya) * (i - a) as f64 / (b - a) as f64
            }
        };
    }
    Some(out)
}

fn complete(table: &RawTable, interpolate_missing: bool) -> CliResult<Vec<Vec<f64>>> {
    table
        .columns
        .iter()
        .zip(&table.names)
        .map(|(col, name)| {
            if let Some(row) = col.iter().position(Option::is_none) {
                if !interpolate_missing {
                    return Err(CliError::MissingData { row: row + 2, column: name.clone() });
                }
                return interpolate(col).ok_or_else(|| CliError::MissingData { row: 2, column: name.clone() });
            }
            Ok(col.iter().map(|v| v.unwrap_or_default()).collect())
        })
        .collect()
}

pub fn ingest_csv(path: &Path, mode: InputMode, interpolate_missing: bool) -> CliResult<Panel64> {
    let table = read_table(path)?;
    let n = table.columns.first().map_or(0, Vec::len);
    if n < MIN_ROWS {
        return Err(CliError::TooShort { n, min: MIN_ROWS });
    }
    let cols = complete(&table, interpolate_missing)?;
    match mode {
        InputMode::Trend => {
            let y = Array2::from_shape_fn((n, cols.len()), |(i, k)| cols[k][i]);
            Ok(Panel64::new(y)?)
        }
        InputMode::Regression { intercept } => {
            let yi = table
                .names
                .iter()
                .position(|c| c == "y")
                .ok_or_else(|| CliError::Config("regression input needs a 'y' column".into()))?;
            let covs: Vec<&Vec<f64>> = cols.iter().enumerate().filter(|(j, _)| *j != yi).map(|(_, c)| c).collect();
            let p = covs.len() + usize::from(intercept);
            if p == 0 {
                return Err(CliError::Config("regression input has no covariates".into()));
            }
            let off = usize::from(intercept);
            let x = Array2::from_shape_fn((n, p), |(i, j)| if j < off { 1.0 } else { covs[j - off][i] });
            Ok(Panel64::regression(Array1::from(cols[yi].clone()), x)?)
        }
    }
}

/// Largest absolute lag-12 autocorrelation of the first differences over all columns.
pub fn seasonal_acf(panel: &Panel64) -> f64 {
    let y = panel.y();
    y.columns()
        .into_iter()
        .map(|c| {
            let d: Vec<f64> = c.windows(2).into_iter().map(|w| w[1] - w[0]).collect();
            let m = d.iter().sum::<f64>() / d.len() as f64;
            let var: f64 = d.iter().map(|v| (v - m).powi(2)).sum();
            if d.len() <= 12 || var == 0.0 {
                return 0.0;
            }
            let cov: f64 = (12..d.len()).map(|i| (d[i] - m) * (d[i - 12] - m)).sum();
            (cov / var).abs()
        })
        .fold(0.0, f64::max)
}
