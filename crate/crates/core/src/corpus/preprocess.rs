//! Filled-pause removal on parsed tokens.

use std::collections::BTreeSet;

use super::{Sentence, Token, Transcript};
use crate::par;

pub const DEFAULT_FILLERS: [&str; 4] = ["um", "uh", "er", "ah"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FillerLexicon(BTreeSet<String>);

impl FillerLexicon {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        FillerLexicon(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect())
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.0.contains(&surface.to_lowercase())
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for FillerLexicon {
    fn default() -> Self {
        FillerLexicon::new(DEFAULT_FILLERS)
    }
}

/// Removes filler tokens and returns the cleaned transcript together with the
/// number of sentences dropped because nothing but fillers remained.
///
/// Dependents of a removed token are promoted to its nearest surviving
/// ancestor. When the root itself is removed, the first surviving token that
/// hung off it becomes the new root and the others attach to it.
pub fn preprocess(transcript: &Transcript, lexicon: &FillerLexicon) -> (Transcript, usize) {
    let mut dropped = 0;
    let sentences = transcript
        .sentences
        .iter()
        .filter_map(|s| {
            let out = strip_sentence(s, lexicon);
            if out.is_none() {
                dropped += 1;
                log::warn!(
                    "{}: sentence {} consisted only of fillers and was dropped",
                    transcript.sample_id,
                    s.sentence_id
                );
            }
            out
        })
        .collect();
    (
        Transcript {
            sentences,
            ..transcript.clone()
        },
        dropped,
    )
}

pub fn preprocess_corpus(transcripts: &[Transcript], lexicon: &FillerLexicon) -> Vec<Transcript> {
    par::map(transcripts, |t| preprocess(t, lexicon).0)
}

fn strip_sentence(sentence: &Sentence, lexicon: &FillerLexicon) -> Option<Sentence> {
    let removed: Vec<bool> = sentence
        .tokens
        .iter()
        .map(|t| !t.is_punct && lexicon.contains(&t.surface))
        .collect();
    if !removed.contains(&true) {
        return Some(sentence.clone());
    }
    if removed.iter().all(|&r| r) {
        return None;
    }

    let tokens = &sentence.tokens;
    let resolve = |t: &Token| {
        let mut h = t.head;
        while h != 0 && removed[h - 1] {
            h = tokens[h - 1].head;
        }
        h
    };
    let mut heads: Vec<usize> = tokens.iter().map(resolve).collect();

    let orphans: Vec<usize> = (0..tokens.len())
        .filter(|&i| !removed[i] && heads[i] == 0)
        .collect();
    let new_root = orphans[0];
    for &i in &orphans[1..] {
        heads[i] = new_root + 1;
    }

    let mut new_index = vec![0usize; tokens.len()];
    let mut next = 0;
    for (i, &r) in removed.iter().enumerate() {
        if !r {
            next += 1;
            new_index[i] = next;
        }
    }

    let kept = tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed[*i])
        .map(|(i, t)| {
            let mut t = t.clone();
            t.index = new_index[i];
            t.head = if heads[i] == 0 { 0 } else { new_index[heads[i] - 1] };
            if t.head == 0 && sentence.tokens[i].head != 0 {
                t.deprel = "root".into();
            }
            t
        })
        .collect();

    Some(Sentence {
        sentence_id: sentence.sentence_id.clone(),
        tokens: kept,
        specificity: sentence.specificity,
    })
}
