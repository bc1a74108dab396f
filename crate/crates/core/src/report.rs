//! Output formatting and atomic file writes.
//!
//! CSV numbers carry 4 decimals; p-values are written in scientific notation
//! so that small values stay readable. JSON keeps full precision.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::classify::{EvalReport, FeatureMatrix};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::pid::PidScore;
use crate::stats::GroupSummary;

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn fmt4(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.4}")
    }
}

pub fn fmt_p(p: f64) -> String {
    format!("{p:.4e}")
}

/// `mean (sd)` with 4 decimals each.
pub fn mean_sd_cell(mean: f64, sd: f64) -> String {
    format!("{} ({})", fmt4(mean), fmt4(sd))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub sample_id: String,
    pub subject_id: String,
    pub label: Label,
    pub score: PidScore,
}

pub fn score_csv(rows: &[ScoreRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "sample_id",
        "subject_id",
        "label",
        "measure",
        "value",
        "prop_tokens",
        "prop_types",
        "word_tokens",
    ])?;
    for r in rows {
        w.write_record([
            r.sample_id.clone(),
            r.subject_id.clone(),
            r.label.to_string(),
            r.score.measure.to_string(),
            fmt4(r.score.value),
            r.score.prop_tokens.to_string(),
            r.score.prop_types.map(|n| n.to_string()).unwrap_or_default(),
            r.score.word_tokens.to_string(),
        ])?;
    }
    finish(w)
}

/// Group comparison table: one row per measure, `*` marking significance.
pub fn stats_csv(summaries: &[GroupSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["measure", "ad_mean", "ad_sd", "ctrl_mean", "ctrl_sd", "p", "significant"])?;
    for s in summaries {
        w.write_record([
            s.measure.clone(),
            fmt4(s.patient_mean),
            fmt4(s.patient_sd),
            fmt4(s.control_mean),
            fmt4(s.control_sd),
            fmt_p(s.p_value),
            if s.significant { "*".into() } else { String::new() },
        ])?;
    }
    finish(w)
}

pub fn eval_json(report: &EvalReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// One classification row: feature set, then precision, recall and F-score as
/// `mean (sd)`.
pub fn eval_csv(report: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["features", "precision", "recall", "f_score"])?;
    w.write_record([
        report.config.features.join("+"),
        mean_sd_cell(report.precision.mean, report.precision.sd),
        mean_sd_cell(report.recall.mean, report.recall.sd),
        mean_sd_cell(report.f_score.mean, report.f_score.sd),
    ])?;
    finish(w)
}

/// `sample_id,subject_id,label,f0..fN`.
pub fn feature_csv(m: &FeatureMatrix) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sample_id".to_string(), "subject_id".into(), "label".into()];
    header.extend((0..m.n_features()).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for i in 0..m.n_samples() {
        let mut rec = vec![m.sample_ids[i].clone(), m.subject_ids[i].clone(), m.labels[i].to_string()];
        rec.extend(m.rows[i].iter().map(|&v| fmt4(v)));
        w.write_record(&rec)?;
    }
    finish(w)
}

/// Square correlation matrix with column names as the header and first column.
pub fn correlation_csv(names: &[String], matrix: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in names.iter().zip(matrix) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|&v| fmt4(v)));
        w.write_record(&rec)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells() {
        assert_eq!(mean_sd_cell(0.95, 0.01234), "0.9500 (0.0123)");
        assert_eq!(fmt_p(0.000123), "1.2300e-4");
        assert_eq!(fmt4(f64::NAN), "nan");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn atomic_write_missing_dir_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = write_atomic(&dir.path().join("nope/out.txt"), b"x").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
