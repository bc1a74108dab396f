//! Elastic-net logistic regression evaluated by repeated, subject-grouped
//! cross-validation.
//!
//! Each repeat draws a fresh fold assignment from the seed stream
//! `[STREAM_CV, repeat]`. Inside every outer training fold the penalty
//! strength is picked from `lambda_grid` by an inner grouped CV (seed stream
//! `[STREAM_INNER_CV, repeat, fold]`) under the configured [`Selection`]
//! criterion. Metrics of a repeat are computed over its pooled out-of-fold
//! predictions (or averaged over folds, see [`Aggregation`]), and the report
//! gives their mean and sample standard deviation across repeats.

mod cv;
mod logistic;
mod metrics;

use std::borrow::Cow;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::{par, seed, stats};

pub use cv::{complement, grouped_kfold};
pub use logistic::{
    fit_logistic, objective, objective_gradient, FitOptions, LogisticFit, LogisticModel, Penalty, Standardizer,
};
pub use metrics::{accuracy, weighted_prf, Prf};

pub const DEFAULT_LAMBDA_GRID: [f64; 6] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];

/// Criterion for picking the penalty strength in the inner cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Highest pooled class-weighted F-score.
    #[default]
    FScore,
    /// Lowest pooled log-loss.
    LogLoss,
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f-score" => Ok(Selection::FScore),
            "log-loss" => Ok(Selection::LogLoss),
            other => Err(Error::Config(format!("unknown lambda selection `{other}`"))),
        }
    }
}

/// How the folds of one repeat are combined into its metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// One set of metrics over all out-of-fold predictions.
    #[default]
    Pooled,
    /// Unweighted mean of per-fold metrics.
    FoldMean,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Aggregation::Pooled),
            "fold-mean" => Ok(Aggregation::FoldMean),
            other => Err(Error::Config(format!("unknown aggregation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub sample_ids: Vec<String>,
    pub subject_ids: Vec<String>,
    pub labels: Vec<Label>,
}

impl FeatureMatrix {
    pub fn new(
        names: Vec<String>,
        rows: Vec<Vec<f64>>,
        sample_ids: Vec<String>,
        subject_ids: Vec<String>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        let n = rows.len();
        if sample_ids.len() != n || subject_ids.len() != n || labels.len() != n {
            return Err(Error::Validation(format!(
                "feature matrix has {n} rows, {} sample ids, {} subject ids, {} labels",
                sample_ids.len(),
                subject_ids.len(),
                labels.len()
            )));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != names.len()) {
            return Err(Error::Validation(format!(
                "row {} (`{}`) has {} values for {} features",
                i,
                sample_ids[i],
                r.len(),
                names.len()
            )));
        }
        Ok(FeatureMatrix {
            names,
            rows,
            sample_ids,
            subject_ids,
            labels,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    /// Appends the columns of `other`, which must describe the same samples.
    pub fn hstack(mut self, other: FeatureMatrix) -> Result<Self> {
        if self.sample_ids != other.sample_ids {
            return Err(Error::Validation("cannot join feature matrices over different samples".into()));
        }
        self.names.extend(other.names);
        for (r, o) in self.rows.iter_mut().zip(other.rows) {
            r.extend(o);
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterScope {
    /// Clusters refitted on each training fold's vocabulary.
    #[default]
    Fold,
    /// Clusters fitted once on the whole corpus.
    Full,
}

impl ClusterScope {
    pub fn as_str(self) -> &'static str {
        match self {
            ClusterScope::Fold => "fold",
            ClusterScope::Full => "full",
        }
    }
}

impl fmt::Display for ClusterScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClusterScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fold" => Ok(ClusterScope::Fold),
            "full" => Ok(ClusterScope::Full),
            other => Err(Error::Config(format!("unknown cluster scope `{other}`"))),
        }
    }
}

/// Supplies the feature matrix for one training fold. Features that depend on
/// the training data (cluster models, bag-of-words vocabularies) are rebuilt
/// from the rows in `train` only.
pub trait FeatureSource: Sync {
    fn subject_ids(&self) -> &[String];
    fn labels(&self) -> &[Label];
    fn feature_names(&self) -> Vec<String>;
    fn fold_matrix(&self, train: &[usize]) -> Result<Cow<'_, FeatureMatrix>>;

    fn cluster_scope(&self) -> Option<ClusterScope> {
        None
    }
}

impl FeatureSource for FeatureMatrix {
    fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    fn labels(&self) -> &[Label] {
        &self.labels
    }

    fn feature_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn fold_matrix(&self, _train: &[usize]) -> Result<Cow<'_, FeatureMatrix>> {
        Ok(Cow::Borrowed(self))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub alpha: f64,
    pub lambda_grid: Vec<f64>,
    pub selection: Selection,
    pub aggregation: Aggregation,
    pub folds: usize,
    pub inner_folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub standardize: bool,
    pub stratify: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            alpha: 0.5,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            selection: Selection::FScore,
            aggregation: Aggregation::Pooled,
            folds: 10,
            inner_folds: 5,
            repeats: 100,
            seed: 0,
            standardize: true,
            stratify: true,
            tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Config("lambda grid must hold positive finite values".into()));
        }
        Ok(())
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

/// Standardisation followed by a fitted logistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub standardizer: Standardizer,
    pub model: LogisticModel,
}

impl Pipeline {
    pub fn fit(rows: &[Vec<f64>], labels: &[Label], lambda: f64, config: &ClassifierConfig) -> Result<Self> {
        let standardizer = if config.standardize {
            Standardizer::fit(rows)
        } else {
            Standardizer::identity(rows.first().map_or(0, Vec::len))
        };
        let x: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.transform(r)).collect();
        let y: Vec<f64> = labels.iter().map(|&l| target(l)).collect();
        let penalty = Penalty {
            alpha: config.alpha,
            lambda,
        };
        let fit = fit_logistic(&x, &y, penalty, &config.fit_options())?;
        if !fit.converged {
            log::debug!("logistic fit stopped after {} iterations without converging", fit.iterations);
        }
        Ok(Pipeline {
            standardizer,
            model: fit.model,
        })
    }

    /// Probability that the sample is a patient.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        self.model.predict_proba(&self.standardizer.transform(row))
    }

    pub fn predict(&self, row: &[f64]) -> Label {
        classify_proba(self.predict_proba(row))
    }
}

fn target(label: Label) -> f64 {
    match label {
        Label::Patient => 1.0,
        Label::Control => 0.0,
    }
}

fn both_classes(labels: &[Label]) -> bool {
    labels.contains(&Label::Patient) && labels.contains(&Label::Control)
}

fn pick<T: Clone>(values: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| values[i].clone()).collect()
}

/// Penalty strength from the grid that scores best under `config.selection`
/// over the pooled inner-CV predictions; ties go to the larger value. Inner
/// training folds holding one class only are skipped.
pub fn select_lambda(
    rows: &[Vec<f64>],
    labels: &[Label],
    subject_ids: &[String],
    config: &ClassifierConfig,
    seed_value: u64,
) -> Result<f64> {
    let largest = config.lambda_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if config.lambda_grid.len() == 1 {
        return Ok(largest);
    }
    let subjects = subject_ids.iter().collect::<HashSet<_>>().len();
    let k = config.inner_folds.min(subjects);
    if k < 2 {
        log::warn!("too few subjects for inner cross-validation; using lambda {largest}");
        return Ok(largest);
    }
    let folds = grouped_kfold(subject_ids, labels, k, seed_value, config.stratify)?;
    let mut grid = config.lambda_grid.clone();
    grid.sort_by(|a, b| b.total_cmp(a));

    let mut best = (largest, f64::NEG_INFINITY);
    for &lambda in &grid {
        let mut truth = Vec::new();
        let mut proba = Vec::new();
        for test in &folds {
            let train = complement(rows.len(), test);
            let train_labels = pick(labels, &train);
            if !both_classes(&train_labels) {
                continue;
            }
            let pipe = Pipeline::fit(&pick(rows, &train), &train_labels, lambda, config)?;
            for &i in test {
                truth.push(labels[i]);
                proba.push(pipe.predict_proba(&rows[i]));
            }
        }
        if truth.is_empty() {
            continue;
        }
        let score = match config.selection {
            Selection::FScore => {
                let predicted: Vec<Label> = proba.iter().map(|&p| classify_proba(p)).collect();
                weighted_prf(&truth, &predicted).f_score
            }
            Selection::LogLoss => {
                let loss: f64 = truth
                    .iter()
                    .zip(&proba)
                    .map(|(&t, &p)| {
                        let p = p.clamp(1e-15, 1.0 - 1e-15);
                        if t == Label::Patient { -p.ln() } else { -(1.0 - p).ln() }
                    })
                    .sum();
                -loss / truth.len() as f64
            }
        };
        if score > best.1 {
            best = (lambda, score);
        }
    }
    Ok(best.0)
}

fn classify_proba(p: f64) -> Label {
    if p >= 0.5 {
        Label::Patient
    } else {
        Label::Control
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
}

impl MetricSummary {
    fn of(values: &[f64]) -> Self {
        let (mean, sd) = stats::mean_sd(values);
        MetricSummary { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub accuracy: f64,
    /// Penalty strength chosen in each outer fold.
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub features: Vec<String>,
    pub cluster_scope: Option<ClusterScope>,
    pub samples: usize,
    pub subjects: usize,
    pub classifier: ClassifierConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f_score: MetricSummary,
    pub per_repeat: Vec<RepeatResult>,
    pub config: ReportConfig,
}

fn run_repeat<S: FeatureSource + ?Sized>(source: &S, config: &ClassifierConfig, repeat: usize) -> Result<RepeatResult> {
    let subjects = source.subject_ids();
    let labels = source.labels();
    let n = labels.len();
    let fold_seed = seed::derive(config.seed, &[seed::STREAM_CV, repeat as u64]);
    let folds = grouped_kfold(subjects, labels, config.folds, fold_seed, config.stratify)?;

    let mut predicted: Vec<Option<Label>> = vec![None; n];
    let mut lambdas = Vec::with_capacity(folds.len());
    let mut fold_scores = Vec::with_capacity(folds.len());
    for (f, test) in folds.iter().enumerate() {
        let ctx = |e: Error| e.context(format!("repeat {repeat}, fold {f}"));
        let train = complement(n, test);
        let train_subjects: HashSet<&str> = train.iter().map(|&i| subjects[i].as_str()).collect();
        if let Some(&i) = test.iter().find(|&&i| train_subjects.contains(subjects[i].as_str())) {
            return Err(ctx(Error::Validation(format!(
                "subject `{}` is in both training and test partitions",
                subjects[i]
            ))));
        }
        let matrix = source.fold_matrix(&train).map_err(ctx)?;
        let rows = pick(&matrix.rows, &train);
        let train_labels = pick(labels, &train);
        let train_subject_ids = pick(subjects, &train);
        let inner_seed = seed::derive(config.seed, &[seed::STREAM_INNER_CV, repeat as u64, f as u64]);
        let lambda = select_lambda(&rows, &train_labels, &train_subject_ids, config, inner_seed).map_err(ctx)?;
        let pipe = Pipeline::fit(&rows, &train_labels, lambda, config).map_err(ctx)?;
        for &i in test {
            predicted[i] = Some(pipe.predict(&matrix.rows[i]));
        }
        let fold_true = pick(labels, test);
        let fold_pred: Vec<Label> = test.iter().map(|&i| predicted[i].expect("just predicted")).collect();
        let prf = weighted_prf(&fold_true, &fold_pred);
        fold_scores.push([prf.precision, prf.recall, prf.f_score, accuracy(&fold_true, &fold_pred)]);
        lambdas.push(lambda);
    }

    let [precision, recall, f_score, acc] = match config.aggregation {
        Aggregation::Pooled => {
            let predicted: Vec<Label> = predicted.into_iter().map(|p| p.expect("every sample is tested once")).collect();
            let prf = weighted_prf(labels, &predicted);
            [prf.precision, prf.recall, prf.f_score, accuracy(labels, &predicted)]
        }
        Aggregation::FoldMean => {
            let k = fold_scores.len() as f64;
            std::array::from_fn(|m| fold_scores.iter().map(|s| s[m]).sum::<f64>() / k)
        }
    };
    Ok(RepeatResult {
        repeat,
        precision,
        recall,
        f_score,
        accuracy: acc,
        lambdas,
    })
}

pub fn evaluate<S: FeatureSource + ?Sized>(source: &S, config: &ClassifierConfig) -> Result<EvalReport> {
    config.validate()?;
    let labels = source.labels();
    if labels.len() != source.subject_ids().len() {
        return Err(Error::Validation("labels and subject ids differ in length".into()));
    }
    if !both_classes(labels) {
        return Err(Error::InsufficientData("classification needs samples of both classes".into()));
    }
    let per_repeat = par::map_range(config.repeats, |r| run_repeat(source, config, r))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let column = |f: fn(&RepeatResult) -> f64| per_repeat.iter().map(f).collect::<Vec<_>>();
    Ok(EvalReport {
        precision: MetricSummary::of(&column(|r| r.precision)),
        recall: MetricSummary::of(&column(|r| r.recall)),
        f_score: MetricSummary::of(&column(|r| r.f_score)),
        config: ReportConfig {
            features: source.feature_names(),
            cluster_scope: source.cluster_scope(),
            samples: labels.len(),
            subjects: source.subject_ids().iter().collect::<HashSet<_>>().len(),
            classifier: config.clone(),
        },
        per_repeat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::standard_normal as normal;
    use rand::Rng;

    fn two_gaussians(n: usize, gap: f64, shuffle_labels: bool, seed_value: u64) -> FeatureMatrix {
        let mut rng = seed::rng(seed_value, &[]);
        let mut labels: Vec<Label> = (0..n).map(|i| if i % 2 == 0 { Label::Patient } else { Label::Control }).collect();
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| {
                let centre = if l == Label::Patient { 0.0 } else { gap };
                vec![centre + normal(&mut rng)]
            })
            .collect();
        if shuffle_labels {
            for i in (1..n).rev() {
                labels.swap(i, rng.random_range(0..=i));
            }
        }
        let ids: Vec<String> = (0..n).map(|i| format!("s{i:02}")).collect();
        FeatureMatrix::new(vec!["x".into()], rows, ids.clone(), ids, labels).unwrap()
    }

    fn quick() -> ClassifierConfig {
        ClassifierConfig {
            repeats: 10,
            seed: 1,
            ..Default::default()
        }
    }

    #[test]
    fn separable_corpus_scores_high() {
        let report = evaluate(&two_gaussians(40, 10.0, false, 5), &quick()).unwrap();
        assert!(report.f_score.mean > 0.95, "{:?}", report.f_score);
    }

    #[test]
    fn shuffled_labels_near_chance() {
        let report = evaluate(&two_gaussians(40, 10.0, true, 5), &quick()).unwrap();
        assert!((report.f_score.mean - 0.5).abs() <= 0.1, "{:?}", report.f_score);
    }

    #[test]
    fn recall_equals_accuracy_every_repeat() {
        let report = evaluate(&two_gaussians(30, 1.0, false, 2), &quick()).unwrap();
        assert!(report.per_repeat.iter().all(|r| r.recall == r.accuracy));
    }

    #[test]
    fn fold_mean_aggregation() {
        let m = two_gaussians(30, 1.0, false, 2);
        let pooled = evaluate(&m, &quick()).unwrap();
        let config = ClassifierConfig {
            aggregation: Aggregation::FoldMean,
            ..quick()
        };
        let averaged = evaluate(&m, &config).unwrap();
        assert!(averaged.per_repeat.iter().all(|r| (r.recall - r.accuracy).abs() < 1e-12));
        let lambdas = |r: &EvalReport| r.per_repeat.iter().map(|x| x.lambdas.clone()).collect::<Vec<_>>();
        assert_eq!(lambdas(&pooled), lambdas(&averaged));
        assert_ne!(pooled.f_score, averaged.f_score);
    }

    #[test]
    fn deterministic() {
        let m = two_gaussians(24, 1.5, false, 3);
        assert_eq!(evaluate(&m, &quick()).unwrap(), evaluate(&m, &quick()).unwrap());
    }

    #[test]
    fn invalid_config() {
        let m = two_gaussians(24, 1.5, false, 3);
        let bad = ClassifierConfig { alpha: 1.5, ..quick() };
        assert!(matches!(evaluate(&m, &bad), Err(Error::Config(_))));
        let bad = ClassifierConfig { folds: 1, ..quick() };
        assert!(evaluate(&m, &bad).is_err());
    }

    #[test]
    fn matrix_shape_checked() {
        let r = FeatureMatrix::new(vec!["a".into()], vec![vec![1.0, 2.0]], vec!["x".into()], vec!["x".into()], vec![
            Label::Patient,
        ]);
        assert!(r.is_err());
    }
}
