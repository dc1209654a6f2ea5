//! Serialization of run results: node and accuracy CSVs, the scalar summary
//! file, and the shared 9-significant-digit number format.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::metrics::Metrics;
use crate::sim::EventTrace;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Locale-independent number format with 9 significant digits, stable across
/// runs and parseable by `f64::from_str`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{x:.8e}")
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), ReportError> {
    let io_err = |source| ReportError::Io { path: path.display().to_string(), source };
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(io_err)?;
    file.write_all(contents.as_bytes()).map_err(io_err)?;
    file.sync_all().map_err(io_err)?;
    drop(file);
    fs::rename(&tmp, path).map_err(io_err)
}

/// One row per node: `id,x,y,energy_j,flagged_by,compromised`.
pub fn write_nodes_csv(metrics: &Metrics, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let mut out = String::from("id,x,y,energy_j,flagged_by,compromised\n");
    for n in &metrics.per_node {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            n.id,
            format_sig9(n.x),
            format_sig9(n.y),
            format_sig9(n.energy_j),
            n.flagged_by,
            n.compromised,
        ));
    }
    write_atomic(path.as_ref(), &out)
}

/// Time series of the estimate error against the running true maximum.
pub fn write_accuracy_csv(metrics: &Metrics, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let mut out = String::from("t_s,max_abs_err,mean_abs_err,true_max,alive_nodes\n");
    for p in &metrics.accuracy_trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            format_sig9(p.t_s),
            format_sig9(p.max_abs_err),
            format_sig9(p.mean_abs_err),
            format_sig9(p.true_max),
            p.alive_nodes,
        ));
    }
    write_atomic(path.as_ref(), &out)
}

/// Every scalar metric as `key = value` lines in a stable order.
pub fn write_summary(metrics: &Metrics, path: impl AsRef<Path>) -> Result<(), ReportError> {
    write_atomic(path.as_ref(), &summary_string(metrics))
}

pub fn summary_string(metrics: &Metrics) -> String {
    let mut out = String::new();
    for (key, value) in metrics.scalar_fields() {
        out.push_str(&format!("{key} = {}\n", format_sig9(value)));
    }
    out
}

/// Parses a summary file back into its scalar map.
pub fn read_summary(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>, ReportError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|source| ReportError::Io { path: path.display().to_string(), source })?;
    Ok(parse_summary(&text))
}

pub fn parse_summary(text: &str) -> BTreeMap<String, f64> {
    text.lines()
        .filter_map(|line| {
            let (key, value) = line.split_once('=')?;
            Some((key.trim().to_string(), value.trim().parse::<f64>().ok()?))
        })
        .collect()
}

/// Writes nodes, accuracy, and summary files into `dir`, creating it first.
pub fn write_all(metrics: &Metrics, dir: impl AsRef<Path>) -> Result<(), ReportError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)
        .map_err(|source| ReportError::Io { path: dir.display().to_string(), source })?;
    write_nodes_csv(metrics, dir.join("nodes.csv"))?;
    write_accuracy_csv(metrics, dir.join("accuracy.csv"))?;
    write_summary(metrics, dir.join("summary.txt"))
}

/// Writes the event trace in its line format.
pub fn write_trace(trace: &EventTrace, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let path = path.as_ref();
    let io_err = |source| ReportError::Io { path: path.display().to_string(), source };
    let mut buf = Vec::new();
    trace.write_to(&mut buf).map_err(io_err)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &buf).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}
