//! Per-sentence specificity scores for the vague-sentence filter.
//!
//! Scores come either from a sidecar CSV (`sentence_id,score`) produced by an
//! external specificity model, or from a small logistic heuristic over four
//! surface features. Sidecar scores take precedence over the heuristic.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Transcript};
use crate::error::{Error, Result};

/// Word count at which the length feature saturates.
const LENGTH_SATURATION: f64 = 20.0;

/// Corpus lemma frequencies, used for the rare-word feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    counts: HashMap<String, usize>,
    median: f64,
}

impl FrequencyTable {
    pub fn from_sentences<'a, I>(sentences: I) -> Self
    where
        I: IntoIterator<Item = &'a Sentence>,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for t in sentences.into_iter().flat_map(|s| &s.tokens).filter(|t| t.is_word()) {
            *counts.entry(t.lemma_key()).or_default() += 1;
        }
        let mut values: Vec<usize> = counts.values().copied().collect();
        values.sort_unstable();
        let median = match values.len() {
            0 => 0.0,
            n if n % 2 == 1 => values[n / 2] as f64,
            n => (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0,
        };
        FrequencyTable { counts, median }
    }

    pub fn from_transcripts(transcripts: &[Transcript]) -> Self {
        FrequencyTable::from_sentences(transcripts.iter().flat_map(|t| &t.sentences))
    }

    pub fn median(&self) -> f64 {
        self.median
    }

    pub fn is_rare(&self, lemma: &str) -> bool {
        (self.counts.get(lemma).copied().unwrap_or(0) as f64) < self.median
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicWeights {
    pub bias: f64,
    pub length: f64,
    pub content: f64,
    pub rare: f64,
    pub marker: f64,
}

/// Output of [`calibrate`] on the bundled 40-sentence labeled fixture.
pub const DEFAULT_WEIGHTS: HeuristicWeights = HeuristicWeights {
    bias: -9.0,
    length: 10.0,
    content: 8.0,
    rare: 0.0,
    marker: 0.0,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentenceFeatures {
    /// Word count over 20, capped at 1.
    pub length: f64,
    /// Share of words tagged NOUN, PROPN, VERB, ADJ or NUM.
    pub content: f64,
    /// Share of words whose lemma is rarer than the corpus median.
    pub rare: f64,
    /// 1 if the sentence has a numeral or proper noun.
    pub marker: f64,
}

pub fn sentence_features(sentence: &Sentence, freq: &FrequencyTable) -> SentenceFeatures {
    let words: Vec<_> = sentence.tokens.iter().filter(|t| t.is_word()).collect();
    if words.is_empty() {
        return SentenceFeatures {
            length: 0.0,
            content: 0.0,
            rare: 0.0,
            marker: 0.0,
        };
    }
    let n = words.len() as f64;
    let content = words
        .iter()
        .filter(|t| matches!(t.upos.as_str(), "NOUN" | "PROPN" | "VERB" | "ADJ" | "NUM"))
        .count() as f64;
    let rare = words.iter().filter(|t| freq.is_rare(&t.lemma_key())).count() as f64;
    let marker = words.iter().any(|t| matches!(t.upos.as_str(), "NUM" | "PROPN"));
    SentenceFeatures {
        length: (n / LENGTH_SATURATION).min(1.0),
        content: content / n,
        rare: rare / n,
        marker: if marker { 1.0 } else { 0.0 },
    }
}

fn logit(w: &HeuristicWeights, f: &SentenceFeatures) -> f64 {
    w.bias + w.length * f.length + w.content * f.content + w.rare * f.rare + w.marker * f.marker
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicScorer {
    pub weights: HeuristicWeights,
    pub frequencies: FrequencyTable,
}

impl HeuristicScorer {
    pub fn score(&self, sentence: &Sentence) -> f64 {
        sigmoid(logit(&self.weights, &sentence_features(sentence, &self.frequencies)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpecificityModel {
    /// Stored scores keyed by sentence id.
    Sidecar(HashMap<String, f64>),
    Heuristic(HeuristicScorer),
}

pub fn score_sentence(sentence: &Sentence, model: &SpecificityModel) -> Result<f64> {
    match model {
        SpecificityModel::Sidecar(scores) => scores
            .get(&sentence.sentence_id)
            .copied()
            .ok_or_else(|| Error::MissingScore(sentence.sentence_id.clone())),
        SpecificityModel::Heuristic(h) => Ok(h.score(sentence)),
    }
}

/// Scores every sentence, replacing any score already attached.
pub fn attach_scores(transcript: &Transcript, model: &SpecificityModel) -> Result<Transcript> {
    let mut out = transcript.clone();
    for s in &mut out.sentences {
        let score = score_sentence(s, model).map_err(|e| e.context(format!("sample `{}`", transcript.sample_id)))?;
        s.specificity = Some(score);
    }
    Ok(out)
}

pub fn load_sidecar(path: &Path) -> Result<HashMap<String, f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_sidecar(file, &path.display().to_string())
}

pub fn parse_sidecar<R: std::io::Read>(reader: R, origin: &str) -> Result<HashMap<String, f64>> {
    #[derive(Deserialize)]
    struct Row {
        sentence_id: String,
        score: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut scores = HashMap::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        if !(0.0..=1.0).contains(&row.score) {
            return Err(Error::Validation(format!(
                "{origin}: score {} for `{}` is outside [0, 1]",
                row.score, row.sentence_id
            )));
        }
        scores.insert(row.sentence_id, row.score);
    }
    Ok(scores)
}

/// Picks the model for one sample: its sidecar if it has one, else the
/// heuristic if enabled, else an error.
pub fn resolve_model(
    sample_id: &str,
    sidecar: Option<&Path>,
    heuristic: Option<&HeuristicScorer>,
) -> Result<SpecificityModel> {
    match (sidecar, heuristic) {
        (Some(path), _) => Ok(SpecificityModel::Sidecar(load_sidecar(path)?)),
        (None, Some(h)) => Ok(SpecificityModel::Heuristic(h.clone())),
        (None, None) => Err(Error::Config(format!(
            "sample `{sample_id}` has no specificity sidecar and the heuristic scorer is disabled"
        ))),
    }
}

/// Weight grid searched by [`calibrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationGrid {
    pub bias: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        CalibrationGrid {
            bias: (0..=12).map(|b| -f64::from(b)).collect(),
            weights: (0..=5).map(|w| f64::from(2 * w)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub weights: HeuristicWeights,
    /// Fixture sentences on the right side of their cut-off.
    pub correct: usize,
    /// Smallest logit margin to the cut-off over all sentences.
    pub margin: f64,
}

/// Grid search for heuristic weights on labeled sentences (`true` = specific).
///
/// A vague sentence is correct when it scores below `vague_cutoff`, a
/// specific one when it scores at least 0.5. Candidates are ranked by the
/// number correct, then by the smallest logit margin; remaining ties keep the
/// first candidate in grid order.
pub fn calibrate(
    labeled: &[(&Sentence, bool)],
    freq: &FrequencyTable,
    grid: &CalibrationGrid,
    vague_cutoff: f64,
) -> Calibration {
    let features: Vec<(SentenceFeatures, bool)> = labeled
        .iter()
        .map(|(s, specific)| (sentence_features(s, freq), *specific))
        .collect();
    let vague_logit = (vague_cutoff / (1.0 - vague_cutoff)).ln();
    let mut best: Option<Calibration> = None;
    for &bias in &grid.bias {
        for &length in &grid.weights {
            for &content in &grid.weights {
                for &rare in &grid.weights {
                    for &marker in &grid.weights {
                        let weights = HeuristicWeights {
                            bias,
                            length,
                            content,
                            rare,
                            marker,
                        };
                        let mut correct = 0;
                        let mut margin = f64::INFINITY;
                        for (f, specific) in &features {
                            let z = logit(&weights, f);
                            let m = if *specific { z } else { vague_logit - z };
                            if (*specific && z >= 0.0) || (!*specific && m > 0.0) {
                                correct += 1;
                            }
                            margin = margin.min(m);
                        }
                        let better = best.is_none_or(|b| correct > b.correct || (correct == b.correct && margin > b.margin));
                        if better {
                            best = Some(Calibration {
                                weights,
                                correct,
                                margin,
                            });
                        }
                    }
                }
            }
        }
    }
    best.expect("non-empty grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Token};

    fn sentence(id: &str) -> Sentence {
        Sentence::new(
            id,
            vec![Token::new(1, "go", "go", "VERB", 0, "root"), Token::new(2, "now", "now", "ADV", 1, "advmod")],
        )
        .unwrap()
    }

    fn transcript(n: usize) -> Transcript {
        Transcript {
            sample_id: "x".into(),
            subject_id: "x".into(),
            label: Label::Control,
            sentences: (1..=n).map(|i| sentence(&format!("s{i}"))).collect(),
        }
    }

    #[test]
    fn sidecar_pass_through() {
        let scores = parse_sidecar("sentence_id,score\ns17,0.003\n".as_bytes(), "x").unwrap();
        let m = SpecificityModel::Sidecar(scores);
        assert_eq!(score_sentence(&sentence("s17"), &m).unwrap(), 0.003);
        assert!(matches!(score_sentence(&sentence("s18"), &m), Err(Error::MissingScore(_))));
    }

    #[test]
    fn sidecar_range_checked() {
        assert!(parse_sidecar("sentence_id,score\na,1.5\n".as_bytes(), "x").is_err());
    }

    #[test]
    fn attach_all_and_override() {
        let mut t = transcript(3);
        t.sentences[0].specificity = Some(0.9);
        let scores = (1..=3).map(|i| (format!("s{i}"), 0.1 * i as f64)).collect();
        let out = attach_scores(&t, &SpecificityModel::Sidecar(scores)).unwrap();
        let got: Vec<_> = out.sentences.iter().map(|s| s.specificity.unwrap()).collect();
        assert_eq!(got, vec![0.1, 0.2, 0.1 * 3.0]);

        let empty = transcript(0);
        assert_eq!(attach_scores(&empty, &SpecificityModel::Sidecar(HashMap::new())).unwrap(), empty);
    }

    #[test]
    fn heuristic_is_deterministic_and_idempotent() {
        let t = transcript(2);
        let h = SpecificityModel::Heuristic(HeuristicScorer {
            weights: DEFAULT_WEIGHTS,
            frequencies: FrequencyTable::from_transcripts(std::slice::from_ref(&t)),
        });
        let once = attach_scores(&t, &h).unwrap();
        let twice = attach_scores(&once, &h).unwrap();
        assert_eq!(once, twice);
        let s = once.sentences[0].specificity.unwrap();
        assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn precedence() {
        let h = HeuristicScorer {
            weights: DEFAULT_WEIGHTS,
            frequencies: FrequencyTable::from_sentences([]),
        };
        assert!(matches!(resolve_model("x", None, Some(&h)).unwrap(), SpecificityModel::Heuristic(_)));
        assert!(matches!(resolve_model("x", None, None), Err(Error::Config(_))));
        assert!(matches!(
            resolve_model("x", Some(Path::new("/nonexistent/side.csv")), Some(&h)),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn median_frequency() {
        let t = transcript(3); // go ×3, now ×3
        let f = FrequencyTable::from_transcripts(&[t]);
        assert_eq!(f.median(), 3.0);
        assert!(!f.is_rare("go"));
        assert!(f.is_rare("unseen"));
    }
}
