//! Propositional idea density.
//!
//! DEPID counts the dependency arcs whose relation encodes a proposition and
//! divides by the number of word tokens. DEPID-R counts each lexicalised
//! `deprel(dependent lemma, head lemma)` triple once per transcript, so
//! repeated ideas do not add to the count. DEPID-R-ADD further drops
//! conjunction arcs, sentences whose subject is *I* or *you*, and sentences
//! scored as vague. CPIDR-lite is the part-of-speech counting baseline.

mod whitelist;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{word_token_count, Sentence, Token, Transcript};
use crate::error::{Error, Result};
use crate::stats;

pub use whitelist::{
    Decision, RelationRule, Tagset, Whitelist, DET_EXCEPTIONS, NEGATION_LEMMAS, NSUBJ_EXCEPTIONS,
};

/// Threshold below which a sentence counts as vague for DEPID-R-ADD.
pub const DEFAULT_VAGUE_THRESHOLD: f64 = 0.01;
pub const PRONOMINAL_SUBJECTS: [&str; 2] = ["i", "you"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropositionArc {
    pub deprel: String,
    pub dependent_lemma: String,
    pub head_lemma: String,
    pub sentence_id: String,
    /// Index of the dependent token within its sentence.
    pub arc_index: usize,
}

impl PropositionArc {
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.deprel, &self.dependent_lemma, &self.head_lemma)
    }
}

impl fmt::Display for PropositionArc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.deprel, self.dependent_lemma, self.head_lemma)
    }
}

/// Arcs removed from the count, by the first rule that removed them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FilterTally {
    pub lexical_exception: usize,
    pub vague_sentence: usize,
    pub pronominal_subject: usize,
    pub cc: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropositionInventory {
    pub arcs: Vec<PropositionArc>,
    pub token_total: usize,
    pub filtered: FilterTally,
}

impl PropositionInventory {
    pub fn proposition_tokens(&self) -> usize {
        self.arcs.len()
    }

    /// Distinct `(deprel, dependent lemma, head lemma)` triples.
    pub fn proposition_types(&self) -> usize {
        self.arcs.iter().map(PropositionArc::key).collect::<HashSet<_>>().len()
    }

    /// Arcs that introduce a new triple, in transcript order.
    pub fn first_occurrences(&self) -> Vec<&PropositionArc> {
        let mut seen = HashSet::new();
        self.arcs.iter().filter(|a| seen.insert(a.key())).collect()
    }

    pub fn count(&self, dedup: bool) -> usize {
        if dedup {
            self.proposition_types()
        } else {
            self.proposition_tokens()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PidConfig {
    pub whitelist: Whitelist,
    pub exclude_cc: bool,
    pub exclude_pronominal_subjects: bool,
    /// Relations whose I/you dependents mark a sentence as meta-conversation.
    pub pronominal_subject_relations: BTreeSet<String>,
    pub vague_threshold: Option<f64>,
    pub dedup: bool,
}

impl PidConfig {
    /// Plain DEPID configuration for a tagset.
    pub fn new(tagset: Tagset) -> Self {
        PidConfig {
            whitelist: Whitelist::for_tagset(tagset),
            exclude_cc: false,
            exclude_pronominal_subjects: false,
            pronominal_subject_relations: ["nsubj".to_string()].into_iter().collect(),
            vague_threshold: None,
            dedup: false,
        }
    }

    /// All three closed-topic filters plus deduplication.
    pub fn depid_r_add(tagset: Tagset) -> Self {
        PidConfig {
            exclude_cc: true,
            exclude_pronominal_subjects: true,
            vague_threshold: Some(DEFAULT_VAGUE_THRESHOLD),
            dedup: true,
            ..PidConfig::new(tagset)
        }
    }

    /// Also treat passive subjects as pronominal-subject markers.
    pub fn include_passive_subjects(mut self) -> Self {
        for label in ["nsubjpass", "nsubj:pass"] {
            self.pronominal_subject_relations.insert(label.to_string());
        }
        self
    }
}

impl Default for PidConfig {
    fn default() -> Self {
        PidConfig::new(Tagset::default())
    }
}

pub fn extract_propositions(transcript: &Transcript, config: &PidConfig) -> Result<PropositionInventory> {
    let mut arcs = Vec::new();
    let mut filtered = FilterTally::default();
    for sentence in &transcript.sentences {
        extract_sentence(sentence, config, &mut arcs, &mut filtered)?;
    }
    Ok(PropositionInventory {
        arcs,
        token_total: word_token_count(transcript),
        filtered,
    })
}

fn extract_sentence(
    sentence: &Sentence,
    config: &PidConfig,
    arcs: &mut Vec<PropositionArc>,
    filtered: &mut FilterTally,
) -> Result<()> {
    let vague = match config.vague_threshold {
        Some(threshold) => {
            let score = sentence.specificity.ok_or_else(|| {
                Error::Config(format!(
                    "vague-sentence filter is active but sentence `{}` has no specificity score",
                    sentence.sentence_id
                ))
            })?;
            score < threshold
        }
        None => false,
    };
    let pronominal = config.exclude_pronominal_subjects && has_pronominal_subject(sentence, config);

    for token in &sentence.tokens {
        let Some(head) = sentence.head_of(token) else {
            continue;
        };
        let deprel = token.deprel.to_lowercase();
        let lemma = token.lemma_key();
        match config.whitelist.decide(&deprel, &lemma) {
            Decision::NotListed => continue,
            Decision::LexicalException => {
                filtered.lexical_exception += 1;
                continue;
            }
            Decision::Proposition => {}
        }
        if vague {
            filtered.vague_sentence += 1;
        } else if pronominal {
            filtered.pronominal_subject += 1;
        } else if config.exclude_cc && deprel == "cc" {
            filtered.cc += 1;
        } else {
            arcs.push(PropositionArc {
                deprel,
                dependent_lemma: lemma,
                head_lemma: head.lemma_key(),
                sentence_id: sentence.sentence_id.clone(),
                arc_index: token.index,
            });
        }
    }
    Ok(())
}

fn has_pronominal_subject(sentence: &Sentence, config: &PidConfig) -> bool {
    sentence.tokens.iter().any(|t| {
        config
            .pronominal_subject_relations
            .contains(&t.deprel.to_lowercase())
            && PRONOMINAL_SUBJECTS.contains(&t.lemma_key().as_str())
    })
}

fn ratio(count: usize, tokens: usize, sample_id: &str) -> Result<f64> {
    if tokens == 0 {
        return Err(Error::UndefinedDensity(sample_id.to_string()));
    }
    Ok(count as f64 / tokens as f64)
}

/// Density under `config`, counting triples once when `config.dedup` is set.
pub fn density(transcript: &Transcript, config: &PidConfig) -> Result<f64> {
    let inv = extract_propositions(transcript, config)?;
    ratio(inv.count(config.dedup), inv.token_total, &transcript.sample_id)
}

pub fn depid(transcript: &Transcript, config: &PidConfig) -> Result<f64> {
    density(transcript, &PidConfig { dedup: false, ..config.clone() })
}

pub fn depid_r(transcript: &Transcript, config: &PidConfig) -> Result<f64> {
    density(transcript, &PidConfig { dedup: true, ..config.clone() })
}

/// Whether a token's part of speech is one the POS-counting baseline treats as
/// a proposition: verbs (auxiliaries included), adjectives, adverbs,
/// adpositions and coordinating conjunctions. Falls back to Penn tags in the
/// XPOS column when UPOS is unspecified.
pub fn is_cpidr_proposition(token: &Token) -> bool {
    if !token.upos.is_empty() && token.upos != "_" {
        return matches!(token.upos.as_str(), "VERB" | "AUX" | "ADJ" | "ADV" | "ADP" | "CCONJ");
    }
    let x = token.xpos.as_str();
    x.starts_with("VB") || x.starts_with("JJ") || matches!(x, "MD" | "RB" | "RBR" | "RBS" | "IN" | "CC")
}

pub fn cpidr_count(transcript: &Transcript) -> usize {
    transcript.tokens().filter(|t| t.is_word() && is_cpidr_proposition(t)).count()
}

/// POS-count density without the original tool's adjustment rules.
pub fn cpidr_lite(transcript: &Transcript) -> Result<f64> {
    ratio(cpidr_count(transcript), word_token_count(transcript), &transcript.sample_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "cpidr-lite")]
    CpidrLite,
    #[serde(rename = "depid")]
    Depid,
    #[serde(rename = "depid-r")]
    DepidR,
    #[serde(rename = "depid-r-add")]
    DepidRAdd,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::CpidrLite, Measure::Depid, Measure::DepidR, Measure::DepidRAdd];

    pub fn name(self) -> &'static str {
        match self {
            Measure::CpidrLite => "cpidr-lite",
            Measure::Depid => "depid",
            Measure::DepidR => "depid-r",
            Measure::DepidRAdd => "depid-r-add",
        }
    }

    /// The arc configuration for this measure; `None` for CPIDR-lite.
    pub fn config(self, settings: &PidSettings) -> Option<PidConfig> {
        let mut config = match self {
            Measure::CpidrLite => return None,
            Measure::Depid => PidConfig::new(settings.tagset),
            Measure::DepidR => PidConfig {
                dedup: true,
                ..PidConfig::new(settings.tagset)
            },
            Measure::DepidRAdd => PidConfig::depid_r_add(settings.tagset),
        };
        for label in &settings.extra_relations {
            config.whitelist.add(RelationRule::plain(&label.to_lowercase()));
        }
        if settings.include_passive_subjects {
            config = config.include_passive_subjects();
        }
        if settings.vague_threshold.is_some() {
            config.vague_threshold = settings.vague_threshold;
        }
        Some(config)
    }

    pub fn needs_specificity(self, settings: &PidSettings) -> bool {
        self.config(settings).is_some_and(|c| c.vague_threshold.is_some())
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown measure `{s}`")))
    }
}

/// User-level knobs shared by all PID measures.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PidSettings {
    pub tagset: Tagset,
    /// Relations added to the whitelist, e.g. `obj`.
    pub extra_relations: Vec<String>,
    pub include_passive_subjects: bool,
    /// Overrides the vague threshold; DEPID-R-ADD defaults to 0.01.
    pub vague_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PidScore {
    pub measure: Measure,
    pub value: f64,
    pub prop_tokens: usize,
    /// Not defined for CPIDR-lite.
    pub prop_types: Option<usize>,
    pub word_tokens: usize,
}

pub fn score(transcript: &Transcript, measure: Measure, settings: &PidSettings) -> Result<PidScore> {
    match measure.config(settings) {
        None => {
            let count = cpidr_count(transcript);
            let words = word_token_count(transcript);
            Ok(PidScore {
                measure,
                value: ratio(count, words, &transcript.sample_id)?,
                prop_tokens: count,
                prop_types: None,
                word_tokens: words,
            })
        }
        Some(config) => {
            let inv = extract_propositions(transcript, &config)?;
            Ok(PidScore {
                measure,
                value: ratio(inv.count(config.dedup), inv.token_total, &transcript.sample_id)?,
                prop_tokens: inv.proposition_tokens(),
                prop_types: Some(inv.proposition_types()),
                word_tokens: inv.token_total,
            })
        }
    }
}

/// Proposition count of a single sentence under a measure.
pub fn sentence_count(sentence: &Sentence, measure: Measure, settings: &PidSettings) -> Result<usize> {
    let t = Transcript {
        sample_id: sentence.sentence_id.clone(),
        subject_id: String::new(),
        label: crate::corpus::Label::Control,
        sentences: vec![sentence.clone()],
    };
    match measure.config(settings) {
        None => Ok(cpidr_count(&t)),
        Some(config) => Ok(extract_propositions(&t, &config)?.count(config.dedup)),
    }
}

/// Spearman correlation between automatic and manual per-sentence counts.
pub fn correlate_with_manual(samples: &[(Sentence, f64)], measure: Measure, settings: &PidSettings) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 3 sentences, got {}",
            samples.len()
        )));
    }
    let auto = samples
        .iter()
        .map(|(s, _)| sentence_count(s, measure, settings).map(|c| c as f64))
        .collect::<Result<Vec<_>>>()?;
    let manual: Vec<f64> = samples.iter().map(|(_, m)| *m).collect();
    stats::spearman(&auto, &manual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn t(index: usize, surface: &str, lemma: &str, upos: &str, head: usize, deprel: &str) -> Token {
        Token::new(index, surface, lemma, upos, head, deprel)
    }

    fn transcript(sentences: Vec<Sentence>) -> Transcript {
        Transcript {
            sample_id: "x".into(),
            subject_id: "x".into(),
            label: Label::Control,
            sentences,
        }
    }

    fn what_else() -> Sentence {
        // what else can I tell you about the picture ?
        Sentence::new(
            "meta",
            vec![
                t(1, "what", "what", "PRON", 5, "obj"),
                t(2, "else", "else", "ADV", 1, "advmod"),
                t(3, "can", "can", "AUX", 5, "aux"),
                t(4, "I", "I", "PRON", 5, "nsubj"),
                t(5, "tell", "tell", "VERB", 0, "root"),
                t(6, "you", "you", "PRON", 5, "iobj"),
                t(7, "about", "about", "ADP", 9, "case"),
                t(8, "the", "the", "DET", 9, "det"),
                t(9, "picture", "picture", "NOUN", 5, "obl"),
                t(10, "?", "?", "PUNCT", 5, "punct"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn pronominal_subject_sentence_contributes_nothing() {
        let tr = transcript(vec![what_else()]);
        let plain = extract_propositions(&tr, &PidConfig::new(Tagset::Ud)).unwrap();
        assert_eq!(plain.proposition_tokens(), 3); // advmod, nsubj, case
        let cfg = PidConfig {
            exclude_pronominal_subjects: true,
            ..PidConfig::new(Tagset::Ud)
        };
        let inv = extract_propositions(&tr, &cfg).unwrap();
        assert_eq!(inv.proposition_tokens(), 0);
        assert_eq!(inv.filtered.pronominal_subject, 3);
        assert_eq!(inv.token_total, 9);
    }

    #[test]
    fn vague_sentence_keeps_tokens() {
        let mut s = what_else();
        s.specificity = Some(0.005);
        let tr = transcript(vec![s]);
        let cfg = PidConfig {
            vague_threshold: Some(0.01),
            ..PidConfig::new(Tagset::Ud)
        };
        let inv = extract_propositions(&tr, &cfg).unwrap();
        assert_eq!(inv.proposition_tokens(), 0);
        assert_eq!(inv.token_total, 9);
        assert_eq!(depid(&tr, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn vague_filter_without_score_names_sentence() {
        let tr = transcript(vec![what_else()]);
        let cfg = PidConfig {
            vague_threshold: Some(0.01),
            ..PidConfig::new(Tagset::Ud)
        };
        let err = extract_propositions(&tr, &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("meta"));
    }

    #[test]
    fn cc_filter() {
        let s = Sentence::new(
            "s",
            vec![
                t(1, "cats", "cat", "NOUN", 4, "nsubj"),
                t(2, "and", "and", "CCONJ", 3, "cc"),
                t(3, "dogs", "dog", "NOUN", 1, "conj"),
                t(4, "run", "run", "VERB", 0, "root"),
            ],
        )
        .unwrap();
        let tr = transcript(vec![s]);
        let base = PidConfig::new(Tagset::Ud);
        assert_eq!(extract_propositions(&tr, &base).unwrap().proposition_tokens(), 2);
        let inv = extract_propositions(&tr, &PidConfig { exclude_cc: true, ..base }).unwrap();
        assert_eq!(inv.proposition_tokens(), 1);
        assert_eq!(inv.filtered.cc, 1);
    }

    #[test]
    fn empty_transcript_density_undefined() {
        let tr = transcript(vec![]);
        assert!(matches!(depid(&tr, &PidConfig::default()), Err(Error::UndefinedDensity(_))));
        assert!(matches!(cpidr_lite(&tr), Err(Error::UndefinedDensity(_))));
    }

    #[test]
    fn no_whitelisted_arcs_is_zero() {
        let s = Sentence::new("s", vec![t(1, "go", "go", "VERB", 0, "root"), t(2, "home", "home", "NOUN", 1, "obj")]).unwrap();
        assert_eq!(depid(&transcript(vec![s]), &PidConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn cat_sat_on_the_mat_cpidr() {
        let s = Sentence::new(
            "s",
            vec![
                t(1, "the", "the", "DET", 2, "det"),
                t(2, "cat", "cat", "NOUN", 3, "nsubj"),
                t(3, "sat", "sit", "VERB", 0, "root"),
                t(4, "on", "on", "ADP", 6, "case"),
                t(5, "the", "the", "DET", 6, "det"),
                t(6, "mat", "mat", "NOUN", 3, "obl"),
                t(7, ".", ".", "PUNCT", 3, "punct"),
            ],
        )
        .unwrap();
        let v = cpidr_lite(&transcript(vec![s])).unwrap();
        assert!((v - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn penn_fallback_when_upos_missing() {
        let mut tok = t(1, "quickly", "quickly", "_", 0, "root");
        tok.xpos = "RB".into();
        assert!(is_cpidr_proposition(&tok));
        tok.xpos = "NN".into();
        assert!(!is_cpidr_proposition(&tok));
    }

    #[test]
    fn measure_names_round_trip() {
        for m in Measure::ALL {
            assert_eq!(m.name().parse::<Measure>().unwrap(), m);
        }
        assert!(Measure::DepidRAdd.needs_specificity(&PidSettings::default()));
        assert!(!Measure::DepidR.needs_specificity(&PidSettings::default()));
    }

    #[test]
    fn extra_relation_is_counted() {
        let s = Sentence::new("s", vec![t(1, "go", "go", "VERB", 0, "root"), t(2, "home", "home", "NOUN", 1, "obj")]).unwrap();
        let settings = PidSettings {
            extra_relations: vec!["obj".into()],
            ..PidSettings::default()
        };
        let sc = score(&transcript(vec![s]), Measure::Depid, &settings).unwrap();
        assert_eq!(sc.prop_tokens, 1);
    }

    #[test]
    fn correlate_needs_three() {
        let s = what_else();
        let err = correlate_with_manual(&[(s.clone(), 1.0), (s, 2.0)], Measure::Depid, &PidSettings::default());
        assert!(matches!(err, Err(Error::InsufficientData(_))));
    }
}
