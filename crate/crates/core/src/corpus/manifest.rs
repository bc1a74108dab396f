use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::Label;
use crate::error::{Error, Result};

const REQUIRED: [&str; 4] = ["subject_id", "sample_id", "label", "conllu_path"];
const SPECIFICITY_COLUMN: &str = "specificity_path";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub sample_id: String,
    pub label: Label,
    /// Resolved against the manifest's directory.
    pub conllu_path: PathBuf,
    pub specificity_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn subject_count(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.subject_id.as_str())
            .collect::<HashSet<_>>()
            .len()
    }
}

/// Reads a manifest CSV with header
/// `subject_id,sample_id,label,conllu_path,specificity_path`.
///
/// The `specificity_path` column is optional, as are its cells. Relative paths
/// are resolved against the manifest's directory; existence is checked when
/// the files are loaded.
pub fn read_manifest(path: &Path) -> Result<CorpusManifest> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(file, base, &path.display().to_string())
}

pub(crate) fn parse_manifest<R: std::io::Read>(reader: R, base: &Path, origin: &str) -> Result<CorpusManifest> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| relabel(e.into(), origin))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(REQUIRED) {
        *slot = column(name).ok_or_else(|| Error::Schema {
            path: origin.to_string(),
            column: name.to_string(),
        })?;
    }
    let spec_idx = column(SPECIFICITY_COLUMN);

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| relabel(e.into(), origin))?;
        let get = |i: usize| record.get(i).unwrap_or("").to_string();
        let sample_id = get(idx[1]);
        if !seen.insert(sample_id.clone()) {
            return Err(Error::Validation(format!(
                "{origin}: duplicate sample_id `{sample_id}` (data row {})",
                row + 1
            )));
        }
        let label = get(idx[2])
            .parse::<Label>()
            .map_err(|e| e.context(format!("{origin}: data row {}", row + 1)))?;
        let specificity_path = spec_idx
            .map(get)
            .filter(|p| !p.is_empty())
            .map(|p| base.join(p));
        entries.push(ManifestEntry {
            subject_id: get(idx[0]),
            sample_id,
            label,
            conllu_path: base.join(get(idx[3])),
            specificity_path,
        });
    }
    if entries.is_empty() {
        log::warn!("{origin}: manifest has no data rows");
    }
    Ok(CorpusManifest { entries })
}

fn relabel(err: Error, origin: &str) -> Error {
    match err {
        Error::Parse { line, message, .. } => Error::Parse {
            path: origin.to_string(),
            line,
            message,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<CorpusManifest> {
        parse_manifest(text.as_bytes(), Path::new("/data"), "m.csv")
    }

    #[test]
    fn three_rows_two_subjects() {
        let m = parse(
            "subject_id,sample_id,label,conllu_path,specificity_path\n\
             p1,p1-a,AD,a.conllu,a.spec.csv\n\
             p1,p1-b,ProbableAD,b.conllu,\n\
             c1,c1-a,Ctrl,c.conllu,\n",
        )
        .unwrap();
        assert_eq!(m.entries.len(), 3);
        assert_eq!(m.subject_count(), 2);
        assert_eq!(m.entries[0].label, Label::Patient);
        assert_eq!(m.entries[1].label, Label::Patient);
        assert_eq!(m.entries[2].label, Label::Control);
        assert_eq!(m.entries[0].conllu_path, Path::new("/data/a.conllu"));
        assert_eq!(m.entries[0].specificity_path.as_deref(), Some(Path::new("/data/a.spec.csv")));
        assert_eq!(m.entries[1].specificity_path, None);
    }

    #[test]
    fn empty_data_section() {
        let m = parse("subject_id,sample_id,label,conllu_path,specificity_path\n").unwrap();
        assert!(m.entries.is_empty());
    }

    #[test]
    fn specificity_column_is_optional() {
        let m = parse("subject_id,sample_id,label,conllu_path\ns,x,HC,x.conllu\n").unwrap();
        assert_eq!(m.entries[0].specificity_path, None);
    }

    #[test]
    fn missing_column_named() {
        let err = parse("subject_id,sample_id,conllu_path\n").unwrap_err();
        match err {
            Error::Schema { column, .. } => assert_eq!(column, "label"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_sample_rejected() {
        let err = parse(
            "subject_id,sample_id,label,conllu_path\n\
             s,x,AD,a.conllu\n\
             t,x,HC,b.conllu\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("`x`"));
    }
}
