use std::collections::HashMap;
use std::path::Path;

use idense::corpus::{load_conllu, ConlluOptions, Sentence};
use idense::specificity::{
    calibrate, score_sentence, CalibrationGrid, FrequencyTable, HeuristicScorer, SpecificityModel, DEFAULT_WEIGHTS,
};

fn fixture() -> (Vec<Sentence>, HashMap<String, bool>) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let sentences = load_conllu(&dir.join("specificity_calibration.conllu"), &ConlluOptions::default()).unwrap();
    let mut labels = HashMap::new();
    let mut rdr = csv::Reader::from_path(dir.join("specificity_calibration_labels.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        labels.insert(rec[0].to_string(), &rec[1] == "specific");
    }
    (sentences, labels)
}

fn scorer(sentences: &[Sentence]) -> HeuristicScorer {
    HeuristicScorer {
        weights: DEFAULT_WEIGHTS,
        frequencies: FrequencyTable::from_sentences(sentences),
    }
}

#[test]
fn default_weights_are_the_calibration_result() {
    let (sentences, labels) = fixture();
    assert_eq!(sentences.len(), 40);
    let labeled: Vec<(&Sentence, bool)> = sentences.iter().map(|s| (s, labels[&s.sentence_id])).collect();
    let freq = FrequencyTable::from_sentences(&sentences);
    let cal = calibrate(&labeled, &freq, &CalibrationGrid::default(), 0.01);
    assert_eq!(cal.weights, DEFAULT_WEIGHTS);
    // v02 is long and content-heavy for a vague sentence; no grid point separates it
    assert_eq!(cal.correct, 39);
}

#[test]
fn upper_one_is_there_is_vague() {
    let (sentences, _) = fixture();
    let s = sentences.iter().find(|s| s.sentence_id == "v01").unwrap();
    let words: Vec<&str> = s.tokens.iter().map(|t| t.surface.as_str()).collect();
    assert_eq!(words, ["the", "upper", "one", "is", "there"]);
    let score = score_sentence(s, &SpecificityModel::Heuristic(scorer(&sentences))).unwrap();
    assert!(score < 0.01, "{score}");
}

#[test]
fn specific_sentences_score_high() {
    let (sentences, labels) = fixture();
    let model = SpecificityModel::Heuristic(scorer(&sentences));
    for s in sentences.iter().filter(|s| labels[&s.sentence_id]) {
        let score = score_sentence(s, &model).unwrap();
        assert!(score >= 0.5, "{} scored {score}", s.sentence_id);
    }
}

#[test]
fn scores_stay_in_unit_interval_and_repeat_exactly() {
    let (sentences, _) = fixture();
    let model = SpecificityModel::Heuristic(scorer(&sentences));
    for s in &sentences {
        let a = score_sentence(s, &model).unwrap();
        assert!((0.0..=1.0).contains(&a));
        assert_eq!(a.to_bits(), score_sentence(s, &model).unwrap().to_bits());
    }
}

#[test]
fn sidecar_passes_scores_through() {
    let (sentences, _) = fixture();
    let mut s = sentences[0].clone();
    s.sentence_id = "s17".into();
    let model = SpecificityModel::Sidecar(HashMap::from([("s17".to_string(), 0.003)]));
    assert_eq!(score_sentence(&s, &model).unwrap(), 0.003);
}
