//! Transcripts and their loading.
//!
//! A [`Transcript`] is one scored speech sample: an ordered list of
//! dependency-parsed [`Sentence`]s plus subject and diagnostic-label metadata.
//! Transcripts are read from CoNLL-U files listed in a CSV manifest.

mod conllu;
mod manifest;
mod preprocess;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub use conllu::{load_conllu, parse_conllu, write_conllu, ConlluOptions};
pub use manifest::{read_manifest, CorpusManifest, ManifestEntry};
pub use preprocess::{preprocess, preprocess_corpus, FillerLexicon, DEFAULT_FILLERS};

/// Universal POS tag for punctuation.
pub const PUNCT_TAG: &str = "PUNCT";

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    /// Head position, 0 for the root.
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
    pub is_punct: bool,
}

impl Token {
    /// A token with the optional CoNLL-U columns left unspecified.
    pub fn new(index: usize, surface: &str, lemma: &str, upos: &str, head: usize, deprel: &str) -> Self {
        Token {
            index,
            surface: surface.into(),
            lemma: lemma.into(),
            upos: upos.into(),
            xpos: "_".into(),
            feats: "_".into(),
            head,
            deprel: deprel.into(),
            deps: "_".into(),
            misc: "_".into(),
            is_punct: upos == PUNCT_TAG,
        }
    }

    /// Lowercased lemma, or the lowercased surface when the lemma is unspecified.
    pub fn lemma_key(&self) -> String {
        if self.lemma.is_empty() || self.lemma == "_" {
            self.surface.to_lowercase()
        } else {
            self.lemma.to_lowercase()
        }
    }

    pub fn is_word(&self) -> bool {
        !self.is_punct
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub sentence_id: String,
    pub tokens: Vec<Token>,
    /// Specificity score in [0, 1], when one has been attached.
    pub specificity: Option<f64>,
}

impl Sentence {
    pub fn new(sentence_id: impl Into<String>, tokens: Vec<Token>) -> Result<Self> {
        let sentence = Sentence {
            sentence_id: sentence_id.into(),
            tokens,
            specificity: None,
        };
        sentence.validate()?;
        Ok(sentence)
    }

    pub fn word_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.is_word()).count()
    }

    pub fn root(&self) -> Option<&Token> {
        self.tokens.iter().find(|t| t.head == 0)
    }

    /// The head token of `token`, `None` for the root.
    pub fn head_of(&self, token: &Token) -> Option<&Token> {
        token.head.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// Checks index contiguity, head ranges, the single root and acyclicity.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::Tree {
            sentence_id: self.sentence_id.clone(),
            message,
        };
        let n = self.tokens.len();
        if n == 0 {
            return Err(fail("empty sentence".into()));
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(fail(format!("token {} found at position {}", t.index, i + 1)));
            }
            if t.head > n {
                return Err(fail(format!("token {} has head {} beyond length {n}", t.index, t.head)));
            }
            if t.head == t.index {
                return Err(fail(format!("token {} is its own head", t.index)));
            }
            if t.deprel.is_empty() {
                return Err(fail(format!("token {} has an empty relation", t.index)));
            }
        }
        let roots = self.tokens.iter().filter(|t| t.head == 0).count();
        if roots != 1 {
            return Err(fail(format!("expected exactly one root, found {roots}")));
        }
        // every token must reach the root within n steps
        for t in &self.tokens {
            let mut cur = t.head;
            let mut steps = 0;
            while cur != 0 {
                steps += 1;
                if steps > n {
                    return Err(fail(format!("cycle through token {}", t.index)));
                }
                cur = self.tokens[cur - 1].head;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Patient,
    Control,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Patient => "patient",
            Label::Control => "control",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Label aliases, matched case-insensitively:
///
/// | class   | accepted values                     |
/// |---------|-------------------------------------|
/// | patient | `AD`, `ProbableAD`, `patient`, `1`  |
/// | control | `Ctrl`, `Control`, `HC`, `0`        |
impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ad" | "probablead" | "patient" | "1" => Ok(Label::Patient),
            "ctrl" | "control" | "hc" | "0" => Ok(Label::Control),
            other => Err(Error::Validation(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub sample_id: String,
    pub subject_id: String,
    pub label: Label,
    pub sentences: Vec<Sentence>,
}

impl Transcript {
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }
}

/// Number of non-punctuation tokens, the denominator of every density.
///
/// Contracted forms split into separate syntactic words count separately.
pub fn word_token_count(transcript: &Transcript) -> usize {
    transcript.sentences.iter().map(Sentence::word_count).sum()
}

/// Loads every manifest entry in parallel. Specificity sidecars are not
/// attached here; see [`crate::specificity`].
pub fn load_corpus(manifest: &CorpusManifest, options: &ConlluOptions) -> Result<Vec<Transcript>> {
    let loaded = par::map(&manifest.entries, |entry| {
        let sentences = load_conllu(&entry.conllu_path, options)?;
        Ok(Transcript {
            sample_id: entry.sample_id.clone(),
            subject_id: entry.subject_id.clone(),
            label: entry.label,
            sentences,
        })
    });
    loaded.into_iter().collect()
}

/// Loads a single CoNLL-U file as a transcript with placeholder metadata.
pub fn load_transcript(path: &Path, label: Label, options: &ConlluOptions) -> Result<Transcript> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Transcript {
        sample_id: stem.clone(),
        subject_id: stem,
        label,
        sentences: load_conllu(path, options)?,
    })
}

pub fn distinct_subjects(transcripts: &[Transcript]) -> BTreeSet<&str> {
    transcripts.iter().map(|t| t.subject_id.as_str()).collect()
}
