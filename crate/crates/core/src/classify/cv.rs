//! Subject-grouped k-fold assignment.

use std::collections::HashMap;

use rand::seq::SliceRandom;

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::seed;

/// Splits sample indices into `k` folds so that every subject's samples share
/// one fold.
///
/// Subjects are taken in order of first appearance and labelled by their first
/// sample. With `stratify`, subjects are shuffled within each label (patients,
/// then controls) and the two lists are concatenated; otherwise all subjects
/// are shuffled together. Fold `i` receives every `k`-th subject starting at
/// position `i`.
pub fn grouped_kfold(
    subject_ids: &[String],
    labels: &[Label],
    k: usize,
    seed_value: u64,
    stratify: bool,
) -> Result<Vec<Vec<usize>>> {
    if subject_ids.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} subject ids but {} labels",
            subject_ids.len(),
            labels.len()
        )));
    }
    if k < 2 {
        return Err(Error::Config(format!("folds must be at least 2, got {k}")));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut members: HashMap<&str, (Label, Vec<usize>)> = HashMap::new();
    for (i, (s, &l)) in subject_ids.iter().zip(labels).enumerate() {
        members
            .entry(s.as_str())
            .or_insert_with(|| {
                order.push(s.as_str());
                (l, Vec::new())
            })
            .1
            .push(i);
    }
    if order.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} distinct subjects cannot fill {k} folds",
            order.len()
        )));
    }

    let mut rng = seed::rng(seed_value, &[]);
    let subjects: Vec<&str> = if stratify {
        let mut out = Vec::with_capacity(order.len());
        for label in [Label::Patient, Label::Control] {
            let mut group: Vec<&str> = order.iter().copied().filter(|s| members[s].0 == label).collect();
            group.shuffle(&mut rng);
            out.extend(group);
        }
        out
    } else {
        let mut all = order.clone();
        all.shuffle(&mut rng);
        all
    };

    let mut folds = vec![Vec::new(); k];
    for (pos, s) in subjects.iter().enumerate() {
        folds[pos % k].extend_from_slice(&members[s].1);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Indices not in `test`, in ascending order.
pub fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in test {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    fn alternating(n: usize) -> Vec<Label> {
        (0..n).map(|i| if i % 2 == 0 { Label::Patient } else { Label::Control }).collect()
    }

    #[test]
    fn twenty_subjects_ten_folds() {
        let folds = grouped_kfold(&ids(20), &alternating(20), 10, 3, true).unwrap();
        assert_eq!(folds.len(), 10);
        assert!(folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn subject_samples_stay_together() {
        let mut subjects = ids(12);
        subjects.extend(["s3".to_string(), "s3".to_string()]);
        let labels = alternating(14);
        let folds = grouped_kfold(&subjects, &labels, 4, 0, true).unwrap();
        let holder: Vec<usize> = [3, 12, 13]
            .iter()
            .map(|i| folds.iter().position(|f| f.contains(i)).unwrap())
            .collect();
        assert!(holder.iter().all(|&f| f == holder[0]));
    }

    #[test]
    fn too_few_subjects() {
        assert!(grouped_kfold(&ids(3), &alternating(3), 4, 0, true).is_err());
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = grouped_kfold(&ids(30), &alternating(30), 5, 7, true).unwrap();
        assert_eq!(a, grouped_kfold(&ids(30), &alternating(30), 5, 7, true).unwrap());
        assert_ne!(a, grouped_kfold(&ids(30), &alternating(30), 5, 8, true).unwrap());
    }

    #[test]
    fn stratified_folds_balance_labels() {
        let labels = alternating(20);
        for fold in grouped_kfold(&ids(20), &labels, 5, 1, true).unwrap() {
            let patients = fold.iter().filter(|&&i| labels[i] == Label::Patient).count();
            assert_eq!(patients, 2);
        }
    }

    #[test]
    fn complement_of_fold() {
        assert_eq!(complement(5, &[1, 3]), vec![0, 2, 4]);
    }
}
