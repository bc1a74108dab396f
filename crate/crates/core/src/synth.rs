//! Synthetic corpora for property tests, benchmarks and end-to-end studies.

use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_conllu, Label, Sentence, Token, Transcript};
use crate::error::{Error, Result};
use crate::report::write_atomic;
use crate::seed;

/// Box-Muller draw from N(0, 1).
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

const RELATIONS: [&str; 22] = [
    "nsubj", "nsubj:pass", "obj", "amod", "advmod", "det", "det:predet", "cc", "cc:preconj", "conj", "case", "nmod",
    "nummod", "nmod:poss", "compound", "acl", "advcl", "mark", "obl:tmod", "obl:npmod", "aux", "appos",
];
const LEMMAS: [&str; 24] = [
    "i", "you", "it", "this", "the", "a", "not", "never", "boy", "cookie", "jar", "take", "fall", "big", "very", "and",
    "on", "two", "mother", "window", "water", "sink", "happy", "life",
];
const UPOS: [&str; 10] = ["NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "CCONJ", "NUM", "AUX"];

/// A random transcript of 1 to 4 well-formed sentences. The first token of
/// every sentence is a non-punctuation root, so the transcript always has
/// word tokens. About a fifth of the sentences get a specificity score below
/// 0.02, the rest a uniform one.
pub fn random_transcript<R: Rng>(rng: &mut R, sample_id: &str) -> Transcript {
    let n_sentences = rng.random_range(1..=4);
    let sentences = (0..n_sentences)
        .map(|s| {
            let n = rng.random_range(1..=12);
            let tokens = (1..=n)
                .map(|i| {
                    let lemma = *LEMMAS.choose(rng).unwrap();
                    if i == 1 {
                        return Token::new(1, lemma, lemma, UPOS.choose(rng).unwrap(), 0, "root");
                    }
                    let head = rng.random_range(1..i);
                    if rng.random_bool(0.1) {
                        Token::new(i, ".", ".", "PUNCT", head, "punct")
                    } else {
                        let rel = *RELATIONS.choose(rng).unwrap();
                        Token::new(i, lemma, lemma, UPOS.choose(rng).unwrap(), head, rel)
                    }
                })
                .collect();
            let mut sentence = Sentence::new(format!("s{}", s + 1), tokens).expect("generated tree is valid");
            sentence.specificity = Some(if rng.random_bool(0.2) {
                rng.random_range(0.0..0.02)
            } else {
                rng.random()
            });
            sentence
        })
        .collect();
    Transcript {
        sample_id: sample_id.into(),
        subject_id: sample_id.into(),
        label: if rng.random_bool(0.5) { Label::Patient } else { Label::Control },
        sentences,
    }
}

/// Construction parameters for a two-group corpus with a controlled DEPID gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyParams {
    pub subjects_per_group: usize,
    pub samples_per_subject: usize,
    pub patient_mean: f64,
    pub control_mean: f64,
    pub noise_sd: f64,
    pub words_per_sample: usize,
    pub words_per_sentence: usize,
}

impl Default for StudyParams {
    fn default() -> Self {
        StudyParams {
            subjects_per_group: 20,
            samples_per_subject: 1,
            patient_mean: 0.33,
            control_mean: 0.37,
            noise_sd: 0.02,
            words_per_sample: 400,
            words_per_sentence: 10,
        }
    }
}

const VERBS: [&str; 6] = ["take", "reach", "wash", "fall", "hold", "see"];
const NOUNS: [&str; 8] = ["boy", "cookie", "jar", "stool", "mother", "dish", "window", "water"];
const ADJECTIVES: [&str; 6] = ["big", "little", "wet", "open", "full", "tall"];

/// One sample whose DEPID under the UD whitelist is `round(density * words) / words`.
///
/// Sentences are `words_per_sentence` words plus a full stop: a root verb, a
/// noun that is either its `nsubj` (counted) or `obj` (not counted), and
/// further words that are either `amod` adjectives (counted) or `compound`
/// nouns (not counted) of that noun.
pub fn sample_with_density<R: Rng>(
    rng: &mut R,
    density: f64,
    words: usize,
    words_per_sentence: usize,
) -> Result<Vec<Sentence>> {
    if words_per_sentence < 2 || !words.is_multiple_of(words_per_sentence) {
        return Err(Error::Config(format!(
            "{words} words cannot be split into sentences of {words_per_sentence}"
        )));
    }
    let n_sentences = words / words_per_sentence;
    let slots = words - n_sentences;
    let counted = ((density * words as f64).round().max(0.0) as usize).min(slots);
    let mut flags: Vec<bool> = (0..slots).map(|i| i < counted).collect();
    flags.shuffle(rng);
    let mut flags = flags.into_iter();

    (0..n_sentences)
        .map(|s| {
            let verb = VERBS.choose(rng).unwrap();
            let mut tokens = vec![Token::new(1, verb, verb, "VERB", 0, "root")];
            let noun = NOUNS.choose(rng).unwrap();
            let rel = if flags.next().unwrap() { "nsubj" } else { "obj" };
            tokens.push(Token::new(2, noun, noun, "NOUN", 1, rel));
            for i in 3..=words_per_sentence {
                tokens.push(if flags.next().unwrap() {
                    let adj = ADJECTIVES.choose(rng).unwrap();
                    Token::new(i, adj, adj, "ADJ", 2, "amod")
                } else {
                    let n = NOUNS.choose(rng).unwrap();
                    Token::new(i, n, n, "NOUN", 2, "compound")
                });
            }
            tokens.push(Token::new(words_per_sentence + 1, ".", ".", "PUNCT", 1, "punct"));
            Sentence::new(format!("s{}", s + 1), tokens)
        })
        .collect()
}

/// Patients `P01..` and controls `C01..`, each sample drawing its target
/// density from N(group mean, noise_sd). Randomness comes from the seed
/// stream `[STREAM_SYNTH]`.
pub fn synthetic_study(params: &StudyParams, seed_value: u64) -> Result<Vec<Transcript>> {
    let mut rng = seed::rng(seed_value, &[seed::STREAM_SYNTH]);
    let mut out = Vec::new();
    for (label, prefix, mean) in [
        (Label::Patient, "P", params.patient_mean),
        (Label::Control, "C", params.control_mean),
    ] {
        for s in 1..=params.subjects_per_group {
            let subject = format!("{prefix}{s:02}");
            for v in 1..=params.samples_per_subject {
                let density = mean + params.noise_sd * standard_normal(&mut rng);
                let sentences = sample_with_density(&mut rng, density, params.words_per_sample, params.words_per_sentence)?;
                out.push(Transcript {
                    sample_id: format!("{subject}-{v}"),
                    subject_id: subject.clone(),
                    label,
                    sentences,
                });
            }
        }
    }
    Ok(out)
}

/// Writes one CoNLL-U file per transcript plus `manifest.csv` into `dir`,
/// returning the manifest path.
pub fn write_corpus(dir: &Path, transcripts: &[Transcript]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subject_id", "sample_id", "label", "conllu_path"])?;
    for t in transcripts {
        let file = format!("{}.conllu", t.sample_id);
        write_atomic(&dir.join(&file), write_conllu(&t.sentences).as_bytes())?;
        let label = match t.label {
            Label::Patient => "AD",
            Label::Control => "Ctrl",
        };
        w.write_record([t.subject_id.as_str(), t.sample_id.as_str(), label, file.as_str()])?;
    }
    let manifest = dir.join("manifest.csv");
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&manifest, &bytes)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pid::{depid, PidConfig};

    #[test]
    fn random_transcripts_are_valid() {
        let mut rng = seed::rng(1, &[]);
        for i in 0..200 {
            let t = random_transcript(&mut rng, &format!("t{i}"));
            assert!(t.sentences.iter().all(|s| s.validate().is_ok()));
            assert!(crate::corpus::word_token_count(&t) > 0);
        }
    }

    #[test]
    fn sample_hits_target_density() {
        let mut rng = seed::rng(2, &[]);
        let sentences = sample_with_density(&mut rng, 0.33, 400, 10).unwrap();
        let t = Transcript {
            sample_id: "x".into(),
            subject_id: "x".into(),
            label: Label::Patient,
            sentences,
        };
        assert_eq!(depid(&t, &PidConfig::default()).unwrap(), 132.0 / 400.0);
    }

    #[test]
    fn study_shape() {
        let study = synthetic_study(&StudyParams::default(), 1).unwrap();
        assert_eq!(study.len(), 40);
        assert_eq!(study.iter().filter(|t| t.label == Label::Patient).count(), 20);
    }

    #[test]
    fn bad_sentence_length() {
        let mut rng = seed::rng(0, &[]);
        assert!(sample_with_density(&mut rng, 0.3, 95, 10).is_err());
    }
}
