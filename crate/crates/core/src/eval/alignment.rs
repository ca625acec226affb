use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

pub const ALIGNMENT_MAGIC: &[u8; 4] = b"ALGN";
/// Minimum R² for the fitted slope to be trusted.
pub const DEFAULT_CONFIDENCE: f64 = 0.5;

/// Attention weights, decoder steps × encoder steps, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentMatrix {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl AlignmentMatrix {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(EvalError::Invalid(format!(
                "{rows}x{cols} matrix needs {} weights, got {}",
                rows * cols,
                weights.len()
            )));
        }
        if let Some(k) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(EvalError::BadCell { row: k / cols, col: k % cols });
        }
        Ok(Self { rows, cols, weights })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != cols) {
            return Err(EvalError::Invalid(format!("row {r} has a different length")));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, weights: w }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    /// The same matrix with decoder steps in reverse order.
    pub fn reverse_steps(&self) -> Self {
        let weights = (0..self.rows).rev().flat_map(|r| self.row(r).iter().copied()).collect();
        Self { weights, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeSign {
    Forward,
    Reverse,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentDiagnostics {
    pub slope_sign: SlopeSign,
    pub fitted_slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub monotonicity: f64,
    /// Mean row entropy in nats.
    pub concentration: f64,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &w) in row.iter().enumerate() {
        if w > row[best] {
            best = i;
        }
    }
    best
}

pub fn analyze_alignment(m: &AlignmentMatrix, confidence_threshold: f64) -> Result<AlignmentDiagnostics> {
    if m.rows < 2 || m.cols < 2 {
        return Err(EvalError::Invalid(format!(
            "alignment analysis needs at least 2x2, got {}x{}",
            m.rows, m.cols
        )));
    }
    let mut path = Vec::with_capacity(m.rows);
    let mut entropy_sum = 0.0;
    for r in 0..m.rows {
        let row = m.row(r);
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Err(EvalError::ZeroRow { row: r });
        }
        entropy_sum -= row
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| {
                let p = w / total;
                p * p.ln()
            })
            .sum::<f64>();
        path.push(argmax(row) as f64);
    }

    let n = m.rows as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = path.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, &y) in path.iter().enumerate() {
        let dx = x as f64 - x_mean;
        let dy = y - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    // a flat path explains nothing
    let r_squared = if syy == 0.0 { 0.0 } else { (sxy * sxy) / (sxx * syy) };

    let steps = path.windows(2).map(|w| w[1] - w[0]);
    let up = steps.clone().filter(|d| *d >= 0.0).count() as f64;
    let down = steps.filter(|d| *d <= 0.0).count() as f64;
    let total_steps = n - 1.0;
    let monotonicity = if slope > 0.0 {
        up / total_steps
    } else if slope < 0.0 {
        down / total_steps
    } else {
        up.max(down) / total_steps
    };

    let slope_sign = if r_squared >= confidence_threshold && slope > 0.0 {
        SlopeSign::Forward
    } else if r_squared >= confidence_threshold && slope < 0.0 {
        SlopeSign::Reverse
    } else {
        SlopeSign::Undetermined
    };

    Ok(AlignmentDiagnostics {
        slope_sign,
        fitted_slope: slope,
        intercept: y_mean - slope * x_mean,
        r_squared,
        monotonicity,
        concentration: entropy_sum / n,
    })
}

fn format_err(path: &Path, detail: impl Into<String>) -> EvalError {
    EvalError::Format {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// Loads either the binary container (detected by its magic) or dense CSV.
pub fn load_alignment(path: impl AsRef<Path>) -> Result<AlignmentMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.starts_with(ALIGNMENT_MAGIC) {
        return parse_binary(path, &bytes);
    }
    let text = std::str::from_utf8(&bytes).map_err(|_| format_err(path, "neither ALGN nor UTF-8 CSV"))?;
    parse_alignment_csv(text)
}

fn parse_binary(path: &Path, bytes: &[u8]) -> Result<AlignmentMatrix> {
    if bytes.len() < 16 {
        return Err(format_err(path, "truncated header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (word(4), word(8));
    let payload = &bytes[16..];
    let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(4));
    if expected != Some(payload.len()) {
        return Err(format_err(
            path,
            format!("header says {rows}x{cols} but payload has {} bytes", payload.len()),
        ));
    }
    let weights = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    AlignmentMatrix::new(rows, cols, weights)
}

/// Dense CSV, one decoder step per line. NaN or negative cells are rejected
/// with their position.
pub fn parse_alignment_csv(text: &str) -> Result<AlignmentMatrix> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r = rows.len();
        let row = line
            .split(',')
            .enumerate()
            .map(|(c, cell)| {
                let v: f64 = cell.trim().parse().map_err(|_| EvalError::Parse {
                    line: i + 1,
                    message: format!("row {r}, col {c}: not a number: {:?}", cell.trim()),
                })?;
                if v.is_finite() && v >= 0.0 {
                    Ok(v)
                } else {
                    Err(EvalError::BadCell { row: r, col: c })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    AlignmentMatrix::from_rows(&rows)
}

pub fn write_alignment(m: &AlignmentMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(16 + 4 * m.weights.len());
    out.extend_from_slice(ALIGNMENT_MAGIC);
    out.extend_from_slice(&(m.rows as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for &w in &m.weights {
        out.extend_from_slice(&(w as f32).to_le_bytes());
    }
    std::fs::write(path, out).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}
