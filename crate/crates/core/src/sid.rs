//! Semantic idea density and related lexical features.
//!
//! Content words (nouns and verbs) are placed in the cluster model; a word
//! whose scaled distance to its nearest centroid is below the threshold counts
//! as an automatic information unit. SID is the number of such word tokens
//! over all word tokens.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{word_token_count, Token, Transcript};
use crate::embed::{scaled_distance, ClusterModel, EmbeddingTable, KmeansParams};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentOptions {
    /// Count `PROPN` tokens as nouns.
    pub include_proper_nouns: bool,
}

impl ContentOptions {
    pub fn is_content(&self, token: &Token) -> bool {
        match token.upos.as_str() {
            "NOUN" | "VERB" => true,
            "PROPN" => self.include_proper_nouns,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContentWord {
    pub surface: String,
    pub lemma: String,
    pub upos: String,
    /// Table key the vector was found under.
    pub key: Option<String>,
    pub vector: Option<Vec<f64>>,
    pub cluster_id: Option<usize>,
    pub d_scaled: Option<f64>,
}

/// Table key for a token: lowercased surface first, then lowercased lemma.
pub fn lookup_key(token: &Token, table: &EmbeddingTable) -> Option<String> {
    table
        .resolve(&token.surface.to_lowercase())
        .or_else(|| table.resolve(&token.lemma_key()))
}

/// Noun and verb tokens with their vectors; when a model is given, every
/// in-vocabulary word is also placed in its nearest cluster.
pub fn content_words(
    transcript: &Transcript,
    table: &EmbeddingTable,
    model: Option<&ClusterModel>,
    options: &ContentOptions,
) -> Result<Vec<ContentWord>> {
    transcript
        .tokens()
        .filter(|t| options.is_content(t))
        .map(|t| {
            let key = lookup_key(t, table);
            let vector = key.as_deref().and_then(|k| table.get(k)).map(<[f64]>::to_vec);
            let placement = match (&vector, model) {
                (Some(v), Some(m)) => Some(scaled_distance(v, m)?),
                _ => None,
            };
            Ok(ContentWord {
                surface: t.surface.clone(),
                lemma: t.lemma_key(),
                upos: t.upos.clone(),
                key,
                vector,
                cluster_id: placement.map(|p| p.0),
                d_scaled: placement.map(|p| p.1),
            })
        })
        .collect()
}

/// Fraction of content words with a vector; 0 when there are none.
pub fn coverage(words: &[ContentWord]) -> f64 {
    if words.is_empty() {
        return 0.0;
    }
    words.iter().filter(|w| w.vector.is_some()).count() as f64 / words.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SidScore {
    pub value: f64,
    pub icu_count: usize,
    pub content_tokens: usize,
    pub word_tokens: usize,
    pub coverage: f64,
}

pub fn sid_detail(
    transcript: &Transcript,
    model: &ClusterModel,
    table: &EmbeddingTable,
    threshold: f64,
    options: &ContentOptions,
) -> Result<SidScore> {
    let words = content_words(transcript, table, Some(model), options)?;
    let word_tokens = word_token_count(transcript);
    if word_tokens == 0 {
        return Err(Error::UndefinedDensity(transcript.sample_id.clone()));
    }
    let icu_count = words.iter().filter(|w| w.d_scaled.is_some_and(|d| d < threshold)).count();
    Ok(SidScore {
        value: icu_count as f64 / word_tokens as f64,
        icu_count,
        content_tokens: words.len(),
        word_tokens,
        coverage: coverage(&words),
    })
}

pub fn sid_score(
    transcript: &Transcript,
    model: &ClusterModel,
    table: &EmbeddingTable,
    threshold: f64,
    options: &ContentOptions,
) -> Result<f64> {
    sid_detail(transcript, model, table, threshold, options).map(|s| s.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterFeatureVector {
    pub values: Vec<f64>,
    pub coverage: f64,
}

/// Mean scaled distance of the content words assigned to each cluster
/// (0 for clusters with none).
pub fn cluster_features(
    transcript: &Transcript,
    model: &ClusterModel,
    table: &EmbeddingTable,
    options: &ContentOptions,
) -> Result<ClusterFeatureVector> {
    let words = content_words(transcript, table, Some(model), options)?;
    let mut sums = vec![0.0; model.k];
    let mut counts = vec![0usize; model.k];
    for w in &words {
        if let (Some(c), Some(d)) = (w.cluster_id, w.d_scaled) {
            sums[c] += d;
            counts[c] += 1;
        }
    }
    let values = sums
        .into_iter()
        .zip(counts)
        .map(|(s, n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();
    Ok(ClusterFeatureVector {
        values,
        coverage: coverage(&words),
    })
}

/// Distinct in-vocabulary content-word types of the given transcripts, keyed
/// by their table key.
pub fn cluster_vocabulary<'a, I>(transcripts: I, table: &EmbeddingTable, options: &ContentOptions) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a Transcript>,
{
    transcripts
        .into_iter()
        .flat_map(|t| t.tokens())
        .filter(|t| options.is_content(t))
        .filter_map(|t| lookup_key(t, table))
        .collect()
}

/// Fits a cluster model on the content-word types of `transcripts`.
pub fn fit_model<'a, I>(
    transcripts: I,
    table: &EmbeddingTable,
    options: &ContentOptions,
    params: &KmeansParams,
) -> Result<ClusterModel>
where
    I: IntoIterator<Item = &'a Transcript>,
{
    let vocab = cluster_vocabulary(transcripts, table, options);
    let words = vocab
        .iter()
        .map(|w| (w.as_str(), table.get(w).expect("resolved key")));
    ClusterModel::fit(words, params)
}

/// Sorted noun/verb lemmas occurring at least `min_freq` times.
pub fn build_bow_vocabulary<'a, I>(transcripts: I, min_freq: usize, options: &ContentOptions) -> Vec<String>
where
    I: IntoIterator<Item = &'a Transcript>,
{
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for t in transcripts.into_iter().flat_map(|t| t.tokens()) {
        if options.is_content(t) {
            *freq.entry(t.lemma_key()).or_default() += 1;
        }
    }
    freq.into_iter()
        .filter(|(_, n)| *n >= min_freq.max(1))
        .map(|(w, _)| w)
        .collect()
}

/// Per-vocabulary-word noun/verb lemma counts over the word-token count.
pub fn bow_features(transcript: &Transcript, vocabulary: &[String], options: &ContentOptions) -> Result<Vec<f64>> {
    if vocabulary.is_empty() {
        return Err(Error::Config("bag-of-words vocabulary is empty".into()));
    }
    let index: BTreeMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let mut counts = vec![0usize; vocabulary.len()];
    for t in transcript.tokens().filter(|t| options.is_content(t)) {
        if let Some(&i) = index.get(t.lemma_key().as_str()) {
            counts[i] += 1;
        }
    }
    let words = word_token_count(transcript);
    if words == 0 {
        return Ok(vec![0.0; vocabulary.len()]);
    }
    Ok(counts.into_iter().map(|c| c as f64 / words as f64).collect())
}

/// Share of word tokens that are nouns or verbs.
pub fn nv_proportion(transcript: &Transcript, options: &ContentOptions) -> Result<f64> {
    let words = word_token_count(transcript);
    if words == 0 {
        return Err(Error::UndefinedDensity(transcript.sample_id.clone()));
    }
    let nv = transcript.tokens().filter(|t| options.is_content(t)).count();
    Ok(nv as f64 / words as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Sentence};

    fn boy_steals_cookies() -> Transcript {
        let s = Sentence::new(
            "s1",
            vec![
                Token::new(1, "the", "the", "DET", 2, "det"),
                Token::new(2, "boy", "boy", "NOUN", 3, "nsubj"),
                Token::new(3, "steals", "steal", "VERB", 0, "root"),
                Token::new(4, "cookies", "cookie", "NOUN", 3, "obj"),
                Token::new(5, ".", ".", "PUNCT", 3, "punct"),
            ],
        )
        .unwrap();
        Transcript {
            sample_id: "t".into(),
            subject_id: "t".into(),
            label: Label::Patient,
            sentences: vec![s],
        }
    }

    fn table(words: &[(&str, [f64; 2])]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2, true);
        for (w, v) in words {
            t.insert(w, v.to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn bow_example() {
        let vocab = vec!["boy".to_string(), "steal".to_string(), "cookie".to_string()];
        let v = bow_features(&boy_steals_cookies(), &vocab, &ContentOptions::default()).unwrap();
        assert_eq!(v, vec![0.25, 0.25, 0.25]);
        let none = bow_features(&boy_steals_cookies(), &["cat".to_string()], &ContentOptions::default()).unwrap();
        assert_eq!(none, vec![0.0]);
        assert!(bow_features(&boy_steals_cookies(), &[], &ContentOptions::default()).is_err());
    }

    #[test]
    fn bow_vocabulary_min_freq() {
        let t = boy_steals_cookies();
        let v = build_bow_vocabulary([&t, &t], 2, &ContentOptions::default());
        assert_eq!(v, ["boy", "cookie", "steal"]);
        assert!(build_bow_vocabulary([&t], 2, &ContentOptions::default()).is_empty());
    }

    #[test]
    fn nv_and_coverage() {
        let t = boy_steals_cookies();
        assert_eq!(nv_proportion(&t, &ContentOptions::default()).unwrap(), 0.75);
        let tab = table(&[("boy", [0.0, 0.0]), ("cookies", [1.0, 1.0])]);
        let words = content_words(&t, &tab, None, &ContentOptions::default()).unwrap();
        assert_eq!(words.len(), 3);
        assert!((coverage(&words) - 2.0 / 3.0).abs() < 1e-15);
        // lemma fallback: "steals" misses, "steal" hits
        let tab = table(&[("steal", [0.0, 0.0])]);
        let words = content_words(&t, &tab, None, &ContentOptions::default()).unwrap();
        assert_eq!(words[1].key.as_deref(), Some("steal"));
    }

    #[test]
    fn sid_threshold_limits() {
        let t = boy_steals_cookies();
        let tab = table(&[("boy", [0.0, 0.0]), ("steals", [0.0, 0.0]), ("cookies", [0.0, 0.0])]);
        let mut m = ClusterModel::from_centroids(vec![vec![0.0, 0.0]], 0);
        m.mu[0] = 1.0;
        m.sigma[0] = 1.0;
        let opts = ContentOptions::default();
        // every vector sits on the centroid: d_scaled = -1 < 3
        assert_eq!(sid_score(&t, &m, &tab, 3.0, &opts).unwrap(), 0.75);
        assert_eq!(sid_score(&t, &m, &tab, f64::NEG_INFINITY, &opts).unwrap(), 0.0);
    }

    #[test]
    fn cluster_feature_means() {
        let t = boy_steals_cookies();
        // boy at distance 2, cookies at distance 4 from centroid 0; steals OOV
        let tab = table(&[("boy", [2.0, 0.0]), ("cookies", [4.0, 0.0])]);
        let mut m = ClusterModel::from_centroids(vec![vec![0.0, 0.0], vec![100.0, 100.0]], 0);
        m.mu = vec![1.0, 0.0];
        m.sigma = vec![1.0, 0.0];
        let f = cluster_features(&t, &m, &tab, &ContentOptions::default()).unwrap();
        assert_eq!(f.values, vec![2.0, 0.0]);
        assert!((f.coverage - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn proper_nouns_switch() {
        let tok = Token::new(1, "Mary", "Mary", "PROPN", 0, "root");
        assert!(!ContentOptions::default().is_content(&tok));
        assert!(ContentOptions { include_proper_nouns: true }.is_content(&tok));
    }
}
