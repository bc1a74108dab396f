//! Per-sample feature matrices built from a corpus.
//!
//! Proposition density and the noun/verb share depend only on the sample
//! itself. SID and cluster features depend on a cluster model, and the
//! bag-of-words columns on a vocabulary; under the `fold` cluster scope both
//! are rebuilt from the training samples of every fold.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::{ClusterScope, FeatureMatrix, FeatureSource};
use crate::corpus::{Label, Transcript};
use crate::embed::{ClusterModel, EmbeddingTable, KmeansParams};
use crate::error::{Error, Result};
use crate::pid::{self, Measure, PidSettings};
use crate::sid::{self, ContentOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Pid,
    Sid,
    Clusters,
    Bow,
    Nv,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Pid => "pid",
            FeatureKind::Sid => "sid",
            FeatureKind::Clusters => "clusters",
            FeatureKind::Bow => "bow",
            FeatureKind::Nv => "nv",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, FeatureKind::Sid | FeatureKind::Clusters)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pid" => Ok(FeatureKind::Pid),
            "sid" => Ok(FeatureKind::Sid),
            "clusters" => Ok(FeatureKind::Clusters),
            "bow" => Ok(FeatureKind::Bow),
            "nv" => Ok(FeatureKind::Nv),
            other => Err(Error::Config(format!("unknown feature kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub kinds: Vec<FeatureKind>,
    /// Density used for the `pid` column.
    pub measure: Measure,
    pub pid: PidSettings,
    pub threshold: f64,
    pub kmeans: KmeansParams,
    pub content: ContentOptions,
    pub bow_min_freq: usize,
    pub scope: ClusterScope,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            kinds: vec![FeatureKind::Pid],
            measure: Measure::Depid,
            pid: PidSettings::default(),
            threshold: sid::DEFAULT_THRESHOLD,
            kmeans: KmeansParams::default(),
            content: ContentOptions::default(),
            bow_min_freq: 2,
            scope: ClusterScope::Fold,
        }
    }
}

impl FeatureSpec {
    fn fold_dependent(&self) -> bool {
        self.kinds.iter().any(|k| match k {
            FeatureKind::Bow => true,
            k if k.needs_model() => self.scope == ClusterScope::Fold,
            _ => false,
        })
    }

    pub fn column_names(&self) -> Vec<String> {
        self.kinds
            .iter()
            .flat_map(|k| match k {
                FeatureKind::Pid => vec![self.measure.name().to_string()],
                FeatureKind::Clusters => (0..self.kmeans.k).map(|c| format!("cluster{c}")).collect(),
                other => vec![other.as_str().to_string()],
            })
            .collect()
    }
}

/// Feature matrix over `transcripts` with models and vocabularies built from
/// the samples in `train`. A `model` given here is used as is for SID and
/// cluster columns instead of fitting one.
pub fn build_matrix(
    transcripts: &[Transcript],
    table: Option<&EmbeddingTable>,
    spec: &FeatureSpec,
    train: &[usize],
    model: Option<&ClusterModel>,
) -> Result<FeatureMatrix> {
    let fitted;
    let model = if spec.kinds.iter().any(|k| k.needs_model()) {
        match model {
            Some(m) => Some(m),
            None => {
                fitted = fit_fold_model(transcripts, table, spec, train)?;
                Some(&fitted)
            }
        }
    } else {
        None
    };
    let bow_vocab = if spec.kinds.contains(&FeatureKind::Bow) {
        let vocab = sid::build_bow_vocabulary(train.iter().map(|&i| &transcripts[i]), spec.bow_min_freq, &spec.content);
        if vocab.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no noun or verb lemma occurs {} times in the training samples",
                spec.bow_min_freq
            )));
        }
        vocab
    } else {
        Vec::new()
    };

    let mut names = Vec::new();
    for k in &spec.kinds {
        match k {
            FeatureKind::Pid => names.push(spec.measure.name().to_string()),
            FeatureKind::Sid => names.push("sid".into()),
            FeatureKind::Clusters => {
                let k = model.map_or(0, |m| m.k);
                names.extend((0..k).map(|c| format!("cluster{c}")));
            }
            FeatureKind::Bow => names.extend(bow_vocab.iter().map(|w| format!("bow:{w}"))),
            FeatureKind::Nv => names.push("nv".into()),
        }
    }

    let rows = crate::par::map(transcripts, |t| -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(names.len());
        for k in &spec.kinds {
            match k {
                FeatureKind::Pid => row.push(pid::score(t, spec.measure, &spec.pid)?.value),
                FeatureKind::Sid => {
                    let table = table.ok_or_else(|| missing_embeddings(*k))?;
                    row.push(sid::sid_score(t, model.expect("model"), table, spec.threshold, &spec.content)?);
                }
                FeatureKind::Clusters => {
                    let table = table.ok_or_else(|| missing_embeddings(*k))?;
                    row.extend(sid::cluster_features(t, model.expect("model"), table, &spec.content)?.values);
                }
                FeatureKind::Bow => row.extend(sid::bow_features(t, &bow_vocab, &spec.content)?),
                FeatureKind::Nv => row.push(sid::nv_proportion(t, &spec.content)?),
            }
        }
        Ok(row)
    })
    .into_iter()
    .zip(transcripts)
    .map(|(r, t)| r.map_err(|e| e.context(format!("sample `{}`", t.sample_id))))
    .collect::<Result<Vec<_>>>()?;

    FeatureMatrix::new(
        names,
        rows,
        transcripts.iter().map(|t| t.sample_id.clone()).collect(),
        transcripts.iter().map(|t| t.subject_id.clone()).collect(),
        transcripts.iter().map(|t| t.label).collect(),
    )
}

fn missing_embeddings(kind: FeatureKind) -> Error {
    Error::Config(format!("feature `{kind}` needs an embedding table"))
}

/// Cluster model fitted on the content-word types of the samples in `train`.
pub fn fit_fold_model(
    transcripts: &[Transcript],
    table: Option<&EmbeddingTable>,
    spec: &FeatureSpec,
    train: &[usize],
) -> Result<ClusterModel> {
    let table = table.ok_or_else(|| missing_embeddings(FeatureKind::Sid))?;
    sid::fit_model(train.iter().map(|&i| &transcripts[i]), table, &spec.content, &spec.kmeans)
}

/// Corpus-backed [`FeatureSource`].
pub struct CorpusFeatures<'a> {
    transcripts: &'a [Transcript],
    table: Option<&'a EmbeddingTable>,
    spec: FeatureSpec,
    subject_ids: Vec<String>,
    labels: Vec<Label>,
    full_model: Option<ClusterModel>,
    fixed: Option<FeatureMatrix>,
}

impl<'a> CorpusFeatures<'a> {
    pub fn new(transcripts: &'a [Transcript], table: Option<&'a EmbeddingTable>, spec: FeatureSpec) -> Result<Self> {
        if spec.kinds.is_empty() {
            return Err(Error::Config("no feature kinds selected".into()));
        }
        if spec.kinds.iter().any(|k| k.needs_model()) && table.is_none() {
            return Err(missing_embeddings(*spec.kinds.iter().find(|k| k.needs_model()).unwrap()));
        }
        let all: Vec<usize> = (0..transcripts.len()).collect();
        let full_model = if spec.scope == ClusterScope::Full && spec.kinds.iter().any(|k| k.needs_model()) {
            Some(fit_fold_model(transcripts, table, &spec, &all)?)
        } else {
            None
        };
        let fixed = if spec.fold_dependent() {
            None
        } else {
            Some(build_matrix(transcripts, table, &spec, &all, full_model.as_ref())?)
        };
        Ok(CorpusFeatures {
            transcripts,
            table,
            subject_ids: transcripts.iter().map(|t| t.subject_id.clone()).collect(),
            labels: transcripts.iter().map(|t| t.label).collect(),
            spec,
            full_model,
            fixed,
        })
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    /// The cluster model the SID and cluster columns of a fold are computed with.
    pub fn fold_model(&self, train: &[usize]) -> Result<ClusterModel> {
        match &self.full_model {
            Some(m) => Ok(m.clone()),
            None => fit_fold_model(self.transcripts, self.table, &self.spec, train),
        }
    }
}

impl FeatureSource for CorpusFeatures<'_> {
    fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    fn labels(&self) -> &[Label] {
        &self.labels
    }

    fn feature_names(&self) -> Vec<String> {
        self.spec.kinds.iter().map(|k| k.as_str().to_string()).collect()
    }

    fn fold_matrix(&self, train: &[usize]) -> Result<Cow<'_, FeatureMatrix>> {
        if let Some(m) = &self.fixed {
            return Ok(Cow::Borrowed(m));
        }
        build_matrix(self.transcripts, self.table, &self.spec, train, self.full_model.as_ref()).map(Cow::Owned)
    }

    fn cluster_scope(&self) -> Option<ClusterScope> {
        self.spec
            .kinds
            .iter()
            .any(|k| k.needs_model())
            .then_some(self.spec.scope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Sentence, Token};

    fn transcript(id: &str, label: Label, words: &[(&str, &str)]) -> Transcript {
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, (w, pos))| {
                let head = if i == 0 { 0 } else { 1 };
                let rel = if i == 0 { "root" } else { "obj" };
                Token::new(i + 1, w, w, pos, head, rel)
            })
            .collect();
        Transcript {
            sample_id: id.into(),
            subject_id: id.into(),
            label,
            sentences: vec![Sentence::new("s1", tokens).unwrap()],
        }
    }

    fn corpus() -> Vec<Transcript> {
        vec![
            transcript("a", Label::Patient, &[("see", "VERB"), ("dog", "NOUN"), ("dog", "NOUN")]),
            transcript("b", Label::Control, &[("see", "VERB"), ("cat", "NOUN"), ("big", "ADJ")]),
            transcript("c", Label::Patient, &[("run", "VERB"), ("fox", "NOUN")]),
        ]
    }

    fn table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2, true);
        for (w, v) in [("see", [0.0, 0.0]), ("dog", [1.0, 0.0]), ("cat", [0.0, 1.0]), ("run", [5.0, 5.0]), ("fox", [6.0, 5.0])] {
            t.insert(w, v.to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn nv_and_pid_columns() {
        let spec = FeatureSpec {
            kinds: vec![FeatureKind::Nv, FeatureKind::Pid],
            ..Default::default()
        };
        let m = build_matrix(&corpus(), None, &spec, &[0, 1, 2], None).unwrap();
        assert_eq!(m.names, vec!["nv", "depid"]);
        assert_eq!(m.rows[1][0], 2.0 / 3.0);
    }

    #[test]
    fn bow_vocabulary_from_training_rows_only() {
        let spec = FeatureSpec {
            kinds: vec![FeatureKind::Bow],
            bow_min_freq: 1,
            ..Default::default()
        };
        let m = build_matrix(&corpus(), None, &spec, &[0, 1], None).unwrap();
        assert_eq!(m.names, vec!["bow:cat", "bow:dog", "bow:see"]);
        assert_eq!(m.rows[2], vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn fold_model_sees_training_words_only() {
        let t = table();
        let spec = FeatureSpec {
            kinds: vec![FeatureKind::Sid],
            kmeans: KmeansParams { k: 2, ..Default::default() },
            ..Default::default()
        };
        let docs = corpus();
        let source = CorpusFeatures::new(&docs, Some(&t), spec).unwrap();
        let model = source.fold_model(&[0, 1]).unwrap();
        assert!(!model.training_vocab.contains("fox"));
        assert!(!model.training_vocab.contains("run"));
        assert_eq!(source.cluster_scope(), Some(ClusterScope::Fold));
    }

    #[test]
    fn sid_requires_table() {
        let spec = FeatureSpec {
            kinds: vec![FeatureKind::Sid],
            ..Default::default()
        };
        let docs = corpus();
        assert!(CorpusFeatures::new(&docs, None, spec).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [FeatureKind::Pid, FeatureKind::Sid, FeatureKind::Clusters, FeatureKind::Bow, FeatureKind::Nv] {
            assert_eq!(k.as_str().parse::<FeatureKind>().unwrap(), k);
        }
    }
}
