//! Result files. Every writer goes through a temporary file in the target
//! directory and renames it into place, so a failed run never leaves a
//! truncated file behind.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{Error, Result};
use crate::harness::{RunSummary, SimulationRecord, TrajectoryRecord};

pub const RECORDS_HEADER: &str = "t,apriori_err,aposteriori_err,fidelity,gain_fro,trace_P";

/// Paths written by a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultFiles {
    pub records_csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

/// 17 significant digits: parses back to the identical `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Renders trajectory records. With `log_states`, the true and estimated
/// state amplitudes follow as `psi_re_k,psi_im_k,...,psi_hat_re_k,psi_hat_im_k`.
pub fn records_csv(records: &[TrajectoryRecord], log_states: bool) -> Result<String> {
    let first = records
        .first()
        .ok_or_else(|| Error::BadConfig("no records to write".into()))?;
    let d = first.psi_true.dim();
    let mut out = String::from(RECORDS_HEADER);
    if log_states {
        for prefix in ["psi", "psi_hat"] {
            for k in 0..d {
                write!(out, ",{prefix}_re_{k},{prefix}_im_{k}").unwrap();
            }
        }
    }
    out.push('\n');
    for r in records {
        write!(
            out,
            "{},{},{},{},{},{}",
            r.t,
            fmt_f64(r.apriori_err),
            fmt_f64(r.aposteriori_err),
            fmt_f64(r.fidelity),
            fmt_f64(r.gain_fro),
            fmt_f64(r.trace_p)
        )
        .unwrap();
        if log_states {
            for v in [r.psi_true.ket(), r.psi_hat.ket()] {
                for z in v.iter() {
                    write!(out, ",{},{}", fmt_f64(z.re), fmt_f64(z.im)).unwrap();
                }
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_records_csv(
    records: &[TrajectoryRecord],
    path: &Path,
    log_states: bool,
) -> Result<ResultFiles> {
    atomic_write(path, records_csv(records, log_states)?.as_bytes())?;
    Ok(ResultFiles {
        records_csv: Some(path.to_path_buf()),
        summary: None,
    })
}

/// `t,norm,p_<label>...` per step.
pub fn simulation_csv(records: &[SimulationRecord], labels: &[&str]) -> Result<String> {
    let mut out = String::from("t,norm");
    for l in labels {
        write!(out, ",p_{l}").unwrap();
    }
    out.push('\n');
    for r in records {
        if r.probabilities.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "simulation record has {} probabilities for {} labels",
                r.probabilities.len(),
                labels.len()
            )));
        }
        write!(out, "{},{}", r.t, fmt_f64(r.norm)).unwrap();
        for p in &r.probabilities {
            write!(out, ",{}", fmt_f64(*p)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_simulation_csv(
    records: &[SimulationRecord],
    labels: &[&str],
    path: &Path,
) -> Result<()> {
    atomic_write(path, simulation_csv(records, labels)?.as_bytes())
}

pub fn summary_json(summary: &RunSummary) -> Result<String> {
    serde_json::to_string_pretty(summary).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_summary(summary: &RunSummary, path: &Path) -> Result<ResultFiles> {
    let text = summary_json(summary)? + "\n";
    atomic_write(path, text.as_bytes())?;
    Ok(ResultFiles {
        records_csv: None,
        summary: Some(path.to_path_buf()),
    })
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}
