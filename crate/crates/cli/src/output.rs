//! CSV rows and PGM heatmaps.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// `v` to four decimals, `NaN` for gaps.
pub fn fmt_v(v: f64) -> String {
    if v.is_finite() {
        // Adding 0.0 turns a rounded -0 into 0.
        format!("{:.4}", round4(v) + 0.0)
    } else {
        "NaN".into()
    }
}

pub fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::write(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::Compute(format!("stdout: {e}")))
        }
    }
}

/// Binary 8-bit PGM of a row-major `rows x cols` grid. Finite values map
/// linearly onto 0..=254 between their min and max; NaN cells are 255.
pub fn pgm(values: &[f64], rows: usize, cols: usize) -> (Vec<u8>, Option<(f64, f64)>) {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let range = finite.fold(None, |acc: Option<(f64, f64)>, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    });
    let mut bytes = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    bytes.extend(values.iter().map(|&v| match range {
        Some((lo, hi)) if v.is_finite() => {
            if hi > lo {
                ((v - lo) / (hi - lo) * 254.0).round() as u8
            } else {
                0
            }
        }
        _ => 255,
    }));
    (bytes, range)
}

/// Sidecar path holding a heatmap's value range.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

pub fn write_pgm(
    path: &Path,
    values: &[f64],
    alphas: &[f64],
    betas: &[f64],
    quantity: &str,
) -> Result<(), CliError> {
    let (bytes, range) = pgm(values, alphas.len(), betas.len());
    std::fs::write(path, bytes).map_err(|e| CliError::write(path, e))?;
    let (lo, hi) = range.unwrap_or((f64::NAN, f64::NAN));
    let side = sidecar(path);
    let text = format!(
        "quantity {quantity}\nmin {lo}\nmax {hi}\nrows alpha_deg {} .. {}\ncols beta_deg {} .. {}\nhole 255\n",
        alphas[0],
        alphas[alphas.len() - 1],
        betas[0],
        betas[betas.len() - 1],
    );
    std::fs::write(&side, text).map_err(|e| CliError::write(&side, e))
}
