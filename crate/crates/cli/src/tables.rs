//! Reading the CSV files this tool writes.

use std::path::Path;

use anyhow::{bail, Context, Result};
use eegdif_core::Matrix;

/// A forecast CSV regrouped per channel, channels in first-seen order.
#[derive(Debug, Clone)]
pub struct ForecastTable {
    pub channels: Vec<String>,
    pub pred: Matrix<f64>,
    pub truth: Option<Matrix<f64>>,
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .with_context(|| format!("{}: missing column `{name}`", path.display()))
}

fn field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<&str> {
    rec.get(i).with_context(|| format!("line {line}: missing field {}", i + 1))
}

pub fn read_forecast(path: &Path) -> Result<ForecastTable> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let (ti, ci, pi) = (
        column(&headers, "time_index", path)?,
        column(&headers, "channel", path)?,
        column(&headers, "value_pred", path)?,
    );
    let vi = headers.iter().position(|h| h == "value_true");
    let mut channels: Vec<String> = Vec::new();
    let mut pred: Vec<Vec<f64>> = Vec::new();
    let mut truth: Vec<Vec<f64>> = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec.with_context(|| format!("{}: line {line}", path.display()))?;
        let t: usize = field(&rec, ti, line)?.parse().with_context(|| format!("line {line}: time_index"))?;
        let name = field(&rec, ci, line)?;
        let c = match channels.iter().position(|x| x == name) {
            Some(c) => c,
            None => {
                channels.push(name.to_string());
                pred.push(Vec::new());
                truth.push(Vec::new());
                channels.len() - 1
            }
        };
        if t != pred[c].len() {
            bail!("{}: line {line}: channel {name} expected time_index {}, found {t}", path.display(), pred[c].len());
        }
        pred[c].push(field(&rec, pi, line)?.parse().with_context(|| format!("line {line}: value_pred"))?);
        if let Some(vi) = vi {
            truth[c].push(field(&rec, vi, line)?.parse().with_context(|| format!("line {line}: value_true"))?);
        }
    }
    if channels.is_empty() {
        bail!("{}: no forecast rows", path.display());
    }
    let n = pred[0].len();
    if pred.iter().any(|p| p.len() != n) {
        bail!("{}: channels have different lengths", path.display());
    }
    let to_matrix = |rows: Vec<Vec<f64>>| Matrix::from_rows(&rows);
    Ok(ForecastTable {
        channels,
        pred: to_matrix(pred)?,
        truth: vi.map(|_| to_matrix(truth)).transpose()?,
    })
}

/// Scores CSV: columns `probability` and `label` (other columns ignored).
pub fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<u8>)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let (pi, li) = (column(&headers, "probability", path)?, column(&headers, "label", path)?);
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec?;
        scores.push(field(&rec, pi, line)?.parse().with_context(|| format!("line {line}: probability"))?);
        let l: u8 = field(&rec, li, line)?.parse().with_context(|| format!("line {line}: label"))?;
        if l > 1 {
            bail!("{}: line {line}: label must be 0 or 1", path.display());
        }
        labels.push(l);
    }
    Ok((scores, labels))
}
