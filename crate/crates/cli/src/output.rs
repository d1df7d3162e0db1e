//! Run artifacts: norm CSV traces and JSON summaries.
//!
//! Every file embeds the config hash and the seed, floats are written with
//! seventeen significant digits, and writes go through a temporary file in
//! the same directory followed by a rename so readers never see a partial
//! artifact.

use anyhow::{Context, Result};
use kslab_core::{fit_decay_rate, DecayFit, RunRecord, TimeSeries};
use serde_json::json;
use std::fs;
use std::path::Path;

/// Writes `bytes` to `path` atomically.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = Path::new(&tmp);
    fs::write(tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Seventeen significant digits; enough to reproduce any f64 exactly.
fn full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Norm trace CSV: a hash comment, a header `t,<label>...`, one row per
/// output time.
pub fn norms_csv(record: &RunRecord, hash: &str, seed: u64) -> String {
    let mut out = format!("# config_hash={hash} seed={seed}\n");
    out.push('t');
    for label in &record.labels {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for (row, &t) in record.times.iter().enumerate() {
        out.push_str(&full(t));
        for column in &record.series {
            out.push(',');
            out.push_str(&full(column[row]));
        }
        out.push('\n');
    }
    out
}

/// Sweep table CSV with one line per `(domain, m)` cell.
pub fn sweep_csv(cells: &[kslab_core::SweepCell], hash: &str, seed: u64) -> String {
    let mut out = format!("# config_hash={hash} seed={seed}\n");
    out.push_str("m,lambda1,volume,outcome,fitted_rate\n");
    for cell in cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            full(cell.m),
            full(cell.lambda1),
            full(cell.volume),
            cell.outcome.as_str(),
            full(cell.fitted_rate),
        ));
    }
    out
}

/// Fits the requested norm columns; columns that never rise above the
/// noise floor inside the window are skipped rather than reported.
pub fn fit_columns(record: &RunRecord, labels: &[String], window: (f64, f64)) -> Vec<(String, DecayFit)> {
    let mut fits = Vec::new();
    for label in labels {
        let Some(series) = TimeSeries::from_record(record, label) else {
            continue;
        };
        if let Ok(fit) = fit_decay_rate(&series, window) {
            fits.push((label.clone(), fit));
        }
    }
    fits
}

/// JSON summary of a run.
pub fn summary_json(
    record: &RunRecord,
    fits: &[(String, DecayFit)],
    hash: &str,
    seed: u64,
) -> String {
    let fits: Vec<_> = fits
        .iter()
        .map(|(label, fit)| {
            json!({
                "label": label,
                "rate": fit.rate,
                "r2": fit.r_squared,
                "window": [fit.window.0, fit.window.1],
            })
        })
        .collect();
    let summary = json!({
        "config_hash": hash,
        "seed": seed,
        "status": record.status.as_str(),
        "mass_drift": record.mass_drift,
        "fits": fits,
    });
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    text
}
