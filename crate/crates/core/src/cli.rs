//! Command-line front end.
//!
//! Every subcommand reads its settings from flags and, optionally, from the
//! `[<subcommand>]` table of a TOML file given with `--config`; flags win.
//! The fully resolved settings are written next to the main output as
//! `<out>.config.toml`. Exit codes: 0 success, 1 usage or validation error,
//! 2 I/O error.

use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classify::{evaluate, Aggregation, ClassifierConfig, ClusterScope, Selection, DEFAULT_LAMBDA_GRID};
use crate::corpus::{
    load_corpus, preprocess, read_manifest, word_token_count, ConlluOptions, CorpusManifest, FillerLexicon, Transcript,
};
use crate::embed::{load_embeddings, ClusterModel, EmbeddingTable, KmeansParams, DEFAULT_DIM};
use crate::error::{Error, Result};
use crate::features::{build_matrix, CorpusFeatures, FeatureKind, FeatureSpec};
use crate::pid::{self, Measure, PidSettings, Tagset};
use crate::report::{self, write_atomic, ScoreRow};
use crate::sid::{self, ContentOptions};
use crate::specificity::{self, FrequencyTable, HeuristicScorer, DEFAULT_WEIGHTS};
use crate::{par, stats};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (report format 1, model format 1)");

#[derive(Debug, Parser)]
#[command(name = "idense", version = VERSION, about = "Idea-density scoring, group statistics and classification")]
struct Cli {
    /// TOML file with a table per subcommand, e.g. `[classify]`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (overrides IDENSE_THREADS; 0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Proposition density per sample.
    Score(ScoreArgs),
    /// Sentence specificity scores.
    Specificity(SpecificityArgs),
    /// Feature matrix per sample.
    Features(FeaturesArgs),
    /// Group means and rank-sum tests per measure.
    Stats(StatsArgs),
    /// Repeated grouped cross-validation of an elastic-net classifier.
    Classify(ClassifyArgs),
    /// Spearman matrix between count columns of two files.
    Correlate(CorrelateArgs),
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Corpus loading options shared by the corpus-reading subcommands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct CorpusArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<PathBuf>,
    /// Keep filled pauses (um, uh, er, ah).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    keep_fillers: bool,
    /// Filled-pause words to remove.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    fillers: Option<Vec<String>>,
    /// UPOS tags treated as punctuation.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    punct_tags: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct PidArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tagset: Option<Tagset>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    vague_threshold: Option<f64>,
    /// Relations added to the whitelist.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    extra_relations: Option<Vec<String>>,
    /// Count passive subjects in the pronominal-subject filter.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    passive_subjects: bool,
    /// Fail instead of falling back to the heuristic when a sample has no
    /// specificity sidecar.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    no_heuristic: bool,
}

impl PidArgs {
    fn settings(&self) -> PidSettings {
        PidSettings {
            tagset: self.tagset.unwrap_or_default(),
            extra_relations: self.extra_relations.clone().unwrap_or_default(),
            include_passive_subjects: self.passive_subjects,
            vague_threshold: self.vague_threshold,
        }
    }

    fn fill(&mut self) {
        self.tagset.get_or_insert_with(Tagset::default);
        self.extra_relations.get_or_insert_with(Vec::new);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct EmbeddingArgs {
    /// Whitespace-separated word vectors.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    restarts: Option<usize>,
    /// Count proper nouns as content words.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    proper_nouns: bool,
}

impl EmbeddingArgs {
    fn fill(&mut self) {
        self.dim.get_or_insert(DEFAULT_DIM);
        self.k.get_or_insert(KmeansParams::default().k);
        self.threshold.get_or_insert(sid::DEFAULT_THRESHOLD);
        self.restarts.get_or_insert(KmeansParams::default().restarts);
    }

    fn kmeans(&self, seed: u64) -> KmeansParams {
        KmeansParams {
            k: self.k.unwrap_or(KmeansParams::default().k),
            seed,
            restarts: self.restarts.unwrap_or(KmeansParams::default().restarts),
            ..Default::default()
        }
    }

    fn content(&self) -> ContentOptions {
        ContentOptions {
            include_proper_nouns: self.proper_nouns,
        }
    }

    fn load(&self) -> Result<Option<EmbeddingTable>> {
        self.embeddings
            .as_deref()
            .map(|p| load_embeddings(p, self.dim.unwrap_or(DEFAULT_DIM), true))
            .transpose()
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct ScoreArgs {
    #[command(flatten)]
    #[serde(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pid: PidArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    measure: Option<Measure>,
    /// Write per-sentence proposition counts (`sample:sentence` ids) instead.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    per_sentence: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
enum SpecificityMode {
    Sidecar,
    Heuristic,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct SpecificityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<SpecificityMode>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct FeaturesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pid: PidArgs,
    #[command(flatten)]
    #[serde(flatten)]
    embedding: EmbeddingArgs,
    /// Feature kinds: pid, sid, clusters, bow, nv.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<Vec<FeatureKind>>,
    /// Density used for the `pid` kind.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    measure: Option<Measure>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    cluster_scope: Option<ClusterScope>,
    /// File listing training subject ids, one per line (fold scope).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    train_subjects: Option<PathBuf>,
    /// Use a saved cluster model instead of fitting one.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<PathBuf>,
    /// Save the cluster model used.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bow_min_freq: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct StatsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pid: PidArgs,
    #[command(flatten)]
    #[serde(flatten)]
    embedding: EmbeddingArgs,
    /// Measures: cpidr-lite, depid, depid-r, depid-r-add, sid, nv.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    measures: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct ClassifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pid: PidArgs,
    #[command(flatten)]
    #[serde(flatten)]
    embedding: EmbeddingArgs,
    /// Feature kinds: pid, sid, clusters, bow, nv.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<Vec<FeatureKind>>,
    /// Density used for the `pid` feature.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    measure: Option<Measure>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    cluster_scope: Option<ClusterScope>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_grid: Option<Vec<f64>>,
    /// Inner-CV criterion for the penalty strength: f-score or log-loss.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    selection: Option<Selection>,
    /// Per-repeat metrics from pooled out-of-fold predictions or the mean over folds.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    aggregation: Option<Aggregation>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    folds: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    inner_folds: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    repeats: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Assign subjects to folds without balancing labels.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    no_stratify: bool,
    /// Fit on raw feature values.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    no_standardize: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bow_min_freq: Option<usize>,
    /// JSON report path; the one-row CSV table goes next to it with a `.csv` extension.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct CorrelateArgs {
    /// CSV of automatic counts: id column first, then one column per measure.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    auto: Option<PathBuf>,
    /// CSV of manual counts in the same layout.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    manual: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.threads.or_else(|| std::env::var("IDENSE_THREADS").ok().and_then(|v| v.parse().ok()));
    match par::with_threads(threads.unwrap_or(0), || dispatch(&cli)) {
        Ok(()) => 0,
        Err(Failure::Usage(subcommand, message)) => {
            eprintln!("error: {message}\n");
            let mut cmd = Cli::command();
            cmd.build();
            if let Some(sub) = cmd.find_subcommand_mut(subcommand) {
                eprintln!("{}", sub.render_usage());
            }
            1
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

enum Failure {
    Usage(&'static str, String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn dispatch(cli: &Cli) -> std::result::Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => Some(read_config(p)?),
        None => None,
    };
    let file = file.as_ref();
    match &cli.command {
        Command::Score(a) => {
            let a = merge(a, file, "score")?;
            require(a.corpus.manifest.is_some(), "score", "--manifest")?;
            require(a.out.is_some(), "score", "--out")?;
            Ok(score(a)?)
        }
        Command::Specificity(a) => {
            let a = merge(a, file, "specificity")?;
            require(a.corpus.manifest.is_some(), "specificity", "--manifest")?;
            require(a.out.is_some(), "specificity", "--out")?;
            Ok(specificity_cmd(a)?)
        }
        Command::Features(a) => {
            let a = merge(a, file, "features")?;
            require(a.corpus.manifest.is_some(), "features", "--manifest")?;
            require(a.kind.as_ref().is_some_and(|k| !k.is_empty()), "features", "--kind")?;
            require(a.out.is_some(), "features", "--out")?;
            if a.cluster_scope.unwrap_or_default() == ClusterScope::Fold
                && a.model.is_none()
                && a.train_subjects.is_none()
                && a.kind.iter().flatten().any(|k| k.needs_model() || *k == FeatureKind::Bow)
            {
                return Err(Failure::Usage(
                    "features",
                    "the fold cluster scope needs --train-subjects (or --model)".into(),
                ));
            }
            Ok(features_cmd(a)?)
        }
        Command::Stats(a) => {
            let a = merge(a, file, "stats")?;
            require(a.corpus.manifest.is_some(), "stats", "--manifest")?;
            require(a.out.is_some(), "stats", "--out")?;
            Ok(stats_cmd(a)?)
        }
        Command::Classify(a) => {
            let a = merge(a, file, "classify")?;
            require(a.corpus.manifest.is_some(), "classify", "--manifest")?;
            require(a.features.as_ref().is_some_and(|f| !f.is_empty()), "classify", "--features")?;
            require(a.out.is_some(), "classify", "--out")?;
            Ok(classify_cmd(a)?)
        }
        Command::Correlate(a) => {
            let a = merge(a, file, "correlate")?;
            require(a.auto.is_some(), "correlate", "--auto")?;
            require(a.manual.is_some(), "correlate", "--manual")?;
            Ok(correlate_cmd(a)?)
        }
    }
}

fn require(present: bool, subcommand: &'static str, flag: &str) -> std::result::Result<(), Failure> {
    if present {
        Ok(())
    } else {
        Err(Failure::Usage(subcommand, format!("the argument {flag} is required")))
    }
}

fn read_config(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Overlays the flags given on the command line onto the file's table for
/// `section`.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&toml::Table>, section: &str) -> Result<T> {
    let mut table = match file.and_then(|f| f.get(section)) {
        Some(toml::Value::Table(t)) => t.clone(),
        Some(_) => return Err(Error::Config(format!("`{section}` in the config file must be a table"))),
        None => toml::Table::new(),
    };
    let given = toml::Table::try_from(flags).map_err(|e| Error::Config(e.to_string()))?;
    table.extend(given);
    let merged: T = toml::Value::Table(table.clone())
        .try_into()
        .map_err(|e| Error::Config(format!("config section `{section}`: {e}")))?;
    let known = toml::Table::try_from(&merged).map_err(|e| Error::Config(e.to_string()))?;
    let unknown: Vec<&str> = table
        .iter()
        .filter(|(k, v)| !known.contains_key(*k) && **v != toml::Value::Boolean(false))
        .map(|(k, _)| k.as_str())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Config(format!(
            "config section `{section}`: unknown keys {}",
            unknown.join(", ")
        )));
    }
    Ok(merged)
}

fn config_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".config.toml");
    PathBuf::from(s)
}

fn write_snapshot<T: Serialize>(out: &Path, section: &str, resolved: &T) -> Result<()> {
    let mut root = toml::Table::new();
    root.insert("version".into(), toml::Value::String(VERSION.into()));
    let table = toml::Table::try_from(resolved).map_err(|e| Error::Format(e.to_string()))?;
    root.insert(section.into(), toml::Value::Table(table));
    let text = toml::to_string(&root).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&config_path(out), text.as_bytes())
}

impl CorpusArgs {
    fn fill(&mut self) {
        self.fillers
            .get_or_insert_with(|| crate::corpus::DEFAULT_FILLERS.iter().map(|s| s.to_string()).collect());
        self.punct_tags.get_or_insert_with(|| vec![crate::corpus::PUNCT_TAG.to_string()]);
    }

    fn load(&self) -> Result<(CorpusManifest, Vec<Transcript>)> {
        let path = self.manifest.as_deref().expect("checked");
        let manifest = read_manifest(path)?;
        let options = ConlluOptions {
            punct_tags: self.punct_tags.iter().flatten().cloned().collect(),
        };
        let mut transcripts = load_corpus(&manifest, &options)?;
        if !self.keep_fillers {
            let lexicon = FillerLexicon::new(self.fillers.iter().flatten());
            for t in &mut transcripts {
                let (clean, dropped) = preprocess(t, &lexicon);
                if dropped > 0 {
                    log::info!("{}: dropped {dropped} filler-only sentences", t.sample_id);
                }
                *t = clean;
            }
        }
        Ok((manifest, transcripts))
    }
}

/// Drops samples without word tokens, reporting each on the error stream.
fn exclude_empty(transcripts: Vec<Transcript>) -> Vec<Transcript> {
    transcripts
        .into_iter()
        .filter(|t| {
            let keep = word_token_count(t) > 0;
            if !keep {
                eprintln!("warning: sample `{}` has no word tokens and is excluded", t.sample_id);
            }
            keep
        })
        .collect()
}

/// Attaches specificity scores: a sample's sidecar when the manifest names
/// one, otherwise the heuristic (unless disabled).
fn attach_specificity(
    manifest: &CorpusManifest,
    transcripts: Vec<Transcript>,
    heuristic: bool,
) -> Result<Vec<Transcript>> {
    let scorer = heuristic.then(|| HeuristicScorer {
        weights: DEFAULT_WEIGHTS,
        frequencies: FrequencyTable::from_transcripts(&transcripts),
    });
    let sidecars: BTreeMap<&str, &Path> = manifest
        .entries
        .iter()
        .filter_map(|e| e.specificity_path.as_deref().map(|p| (e.sample_id.as_str(), p)))
        .collect();
    let mut warned = false;
    transcripts
        .iter()
        .map(|t| {
            let sidecar = sidecars.get(t.sample_id.as_str()).copied();
            if sidecar.is_none() && scorer.is_some() && !warned {
                warned = true;
                log::warn!("using heuristic specificity scores; they are not comparable to a trained specificity model");
            }
            let model = specificity::resolve_model(&t.sample_id, sidecar, scorer.as_ref())?;
            specificity::attach_scores(t, &model)
        })
        .collect()
}

fn needs_specificity(measures: &[Measure], settings: &PidSettings) -> bool {
    measures.iter().any(|m| m.needs_specificity(settings))
}

fn score(mut a: ScoreArgs) -> Result<()> {
    a.corpus.fill();
    a.pid.fill();
    let measure = *a.measure.get_or_insert(Measure::DepidR);
    let out = a.out.clone().expect("checked");
    let settings = a.pid.settings();
    let (manifest, mut transcripts) = a.corpus.load()?;
    if needs_specificity(&[measure], &settings) {
        transcripts = attach_specificity(&manifest, transcripts, !a.pid.no_heuristic)?;
    }

    let text = if a.per_sentence {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sentence_id", measure.name()])?;
        for t in &transcripts {
            for s in &t.sentences {
                let n = pid::sentence_count(s, measure, &settings)?;
                w.write_record([format!("{}:{}", t.sample_id, s.sentence_id), n.to_string()])?;
            }
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
            .map_err(|e| Error::Format(e.to_string()))?
    } else {
        let transcripts = exclude_empty(transcripts);
        let scores = par::map(&transcripts, |t| pid::score(t, measure, &settings));
        let rows = transcripts
            .iter()
            .zip(scores)
            .map(|(t, s)| {
                Ok(ScoreRow {
                    sample_id: t.sample_id.clone(),
                    subject_id: t.subject_id.clone(),
                    label: t.label,
                    score: s?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        report::score_csv(&rows)?
    };
    write_atomic(&out, text.as_bytes())?;
    write_snapshot(&out, "score", &a)
}

fn specificity_cmd(mut a: SpecificityArgs) -> Result<()> {
    a.corpus.fill();
    let mode = *a.mode.get_or_insert(SpecificityMode::Heuristic);
    let out = a.out.clone().expect("checked");
    let (manifest, transcripts) = a.corpus.load()?;
    let scored = match mode {
        SpecificityMode::Sidecar => attach_specificity(&manifest, transcripts, false)?,
        SpecificityMode::Heuristic => {
            let scorer = HeuristicScorer {
                weights: DEFAULT_WEIGHTS,
                frequencies: FrequencyTable::from_transcripts(&transcripts),
            };
            let model = specificity::SpecificityModel::Heuristic(scorer);
            transcripts
                .iter()
                .map(|t| specificity::attach_scores(t, &model))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "sentence_id", "score"])?;
    for t in &scored {
        for s in &t.sentences {
            let score = s.specificity.expect("attached");
            w.write_record([t.sample_id.as_str(), s.sentence_id.as_str(), &format!("{score:.6}")])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&out, &bytes)?;
    write_snapshot(&out, "specificity", &a)
}

fn read_subject_list(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn features_cmd(mut a: FeaturesArgs) -> Result<()> {
    a.corpus.fill();
    a.pid.fill();
    a.embedding.fill();
    let seed = *a.seed.get_or_insert(0);
    let scope = *a.cluster_scope.get_or_insert(ClusterScope::Fold);
    let measure = *a.measure.get_or_insert(Measure::Depid);
    let bow_min_freq = *a.bow_min_freq.get_or_insert(2);
    let out = a.out.clone().expect("checked");
    let kinds = a.kind.clone().expect("checked");

    let spec = FeatureSpec {
        kinds: kinds.clone(),
        measure,
        pid: a.pid.settings(),
        threshold: a.embedding.threshold.expect("filled"),
        kmeans: a.embedding.kmeans(seed),
        content: a.embedding.content(),
        bow_min_freq,
        scope,
    };
    let (manifest, mut transcripts) = a.corpus.load()?;
    if kinds.contains(&FeatureKind::Pid) && needs_specificity(&[measure], &spec.pid) {
        transcripts = attach_specificity(&manifest, transcripts, !a.pid.no_heuristic)?;
    }
    let transcripts = exclude_empty(transcripts);
    let table = if kinds.iter().any(|k| k.needs_model()) {
        Some(
            a.embedding
                .load()?
                .ok_or_else(|| Error::Config("sid and cluster features need --embeddings".into()))?,
        )
    } else {
        None
    };

    let train: Vec<usize> = match (&a.train_subjects, scope) {
        (Some(path), ClusterScope::Fold) => {
            let subjects = read_subject_list(path)?;
            let idx: Vec<usize> = (0..transcripts.len())
                .filter(|&i| subjects.contains(&transcripts[i].subject_id))
                .collect();
            if idx.is_empty() {
                return Err(Error::Validation(format!(
                    "{}: no sample belongs to the listed training subjects",
                    path.display()
                )));
            }
            idx
        }
        _ => (0..transcripts.len()).collect(),
    };
    let model = match &a.model {
        Some(p) => Some(ClusterModel::load(p)?),
        None if kinds.iter().any(|k| k.needs_model()) => {
            Some(crate::features::fit_fold_model(&transcripts, table.as_ref(), &spec, &train)?)
        }
        None => None,
    };
    if let (Some(path), Some(m)) = (&a.model_out, &model) {
        m.save(path)?;
    }
    let matrix = build_matrix(&transcripts, table.as_ref(), &spec, &train, model.as_ref())?;
    write_atomic(&out, report::feature_csv(&matrix)?.as_bytes())?;
    write_snapshot(&out, "features", &a)
}

/// Per-sample values of one named measure.
fn measure_values(
    name: &str,
    transcripts: &[Transcript],
    settings: &PidSettings,
    sid_inputs: Option<&(EmbeddingTable, ClusterModel, f64, ContentOptions)>,
) -> Result<Vec<f64>> {
    let results: Vec<Result<f64>> = match name {
        "sid" => {
            let (table, model, threshold, content) =
                sid_inputs.ok_or_else(|| Error::Config("measure `sid` needs --embeddings".into()))?;
            par::map(transcripts, |t| sid::sid_score(t, model, table, *threshold, content))
        }
        "nv" => par::map(transcripts, |t| sid::nv_proportion(t, &ContentOptions::default())),
        other => {
            let m: Measure = other.parse()?;
            par::map(transcripts, |t| pid::score(t, m, settings).map(|s| s.value))
        }
    };
    results.into_iter().collect()
}

fn stats_cmd(mut a: StatsArgs) -> Result<()> {
    a.corpus.fill();
    a.pid.fill();
    a.embedding.fill();
    let seed = *a.seed.get_or_insert(0);
    let measures = a
        .measures
        .get_or_insert_with(|| Measure::ALL.iter().map(|m| m.name().to_string()).collect())
        .clone();
    let out = a.out.clone().expect("checked");
    let settings = a.pid.settings();

    let (manifest, mut transcripts) = a.corpus.load()?;
    let pid_measures: Vec<Measure> = measures
        .iter()
        .filter(|m| *m != "sid" && *m != "nv")
        .map(|m| m.parse())
        .collect::<Result<_>>()?;
    if needs_specificity(&pid_measures, &settings) {
        transcripts = attach_specificity(&manifest, transcripts, !a.pid.no_heuristic)?;
    }
    let transcripts = exclude_empty(transcripts);
    let sid_inputs = if measures.iter().any(|m| m == "sid") {
        let table = a
            .embedding
            .load()?
            .ok_or_else(|| Error::Config("measure `sid` needs --embeddings".into()))?;
        let content = a.embedding.content();
        let model = sid::fit_model(&transcripts, &table, &content, &a.embedding.kmeans(seed))?;
        Some((table, model, a.embedding.threshold.expect("filled"), content))
    } else {
        None
    };
    let labels: Vec<_> = transcripts.iter().map(|t| t.label).collect();
    let summaries = measures
        .iter()
        .map(|m| {
            let values = measure_values(m, &transcripts, &settings, sid_inputs.as_ref())?;
            stats::group_summary(&values, &labels, m)
        })
        .collect::<Result<Vec<_>>>()?;
    write_atomic(&out, report::stats_csv(&summaries)?.as_bytes())?;
    write_snapshot(&out, "stats", &a)
}

fn classify_cmd(mut a: ClassifyArgs) -> Result<()> {
    a.corpus.fill();
    a.pid.fill();
    a.embedding.fill();
    let defaults = ClassifierConfig::default();
    let config = ClassifierConfig {
        alpha: *a.alpha.get_or_insert(defaults.alpha),
        lambda_grid: a.lambda_grid.get_or_insert_with(|| DEFAULT_LAMBDA_GRID.to_vec()).clone(),
        selection: *a.selection.get_or_insert(defaults.selection),
        aggregation: *a.aggregation.get_or_insert(defaults.aggregation),
        folds: *a.folds.get_or_insert(defaults.folds),
        inner_folds: *a.inner_folds.get_or_insert(defaults.inner_folds),
        repeats: *a.repeats.get_or_insert(defaults.repeats),
        seed: *a.seed.get_or_insert(defaults.seed),
        standardize: !a.no_standardize,
        stratify: !a.no_stratify,
        ..defaults
    };
    config.validate()?;
    let measure = *a.measure.get_or_insert(Measure::Depid);
    let scope = *a.cluster_scope.get_or_insert(ClusterScope::Fold);
    let bow_min_freq = *a.bow_min_freq.get_or_insert(2);
    let kinds = a.features.clone().expect("checked");
    let out = a.out.clone().expect("checked");

    let spec = FeatureSpec {
        kinds: kinds.clone(),
        measure,
        pid: a.pid.settings(),
        threshold: a.embedding.threshold.expect("filled"),
        kmeans: a.embedding.kmeans(config.seed),
        content: a.embedding.content(),
        bow_min_freq,
        scope,
    };
    let (manifest, mut transcripts) = a.corpus.load()?;
    if kinds.contains(&FeatureKind::Pid) && needs_specificity(&[measure], &spec.pid) {
        transcripts = attach_specificity(&manifest, transcripts, !a.pid.no_heuristic)?;
    }
    let transcripts = exclude_empty(transcripts);
    let table = if kinds.iter().any(|k| k.needs_model()) {
        Some(
            a.embedding
                .load()?
                .ok_or_else(|| Error::Config("sid and cluster features need --embeddings".into()))?,
        )
    } else {
        None
    };
    let source = CorpusFeatures::new(&transcripts, table.as_ref(), spec)?;
    let report = evaluate(&source, &config)?;

    write_atomic(&out, report::eval_json(&report)?.as_bytes())?;
    write_atomic(&out.with_extension("csv"), report::eval_csv(&report)?.as_bytes())?;
    write_snapshot(&out, "classify", &a)
}

struct CountTable {
    ids: Vec<String>,
    columns: Vec<String>,
    values: BTreeMap<String, Vec<f64>>,
}

fn read_counts(path: &Path) -> Result<CountTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Schema {
            path: path.display().to_string(),
            column: "<count column>".into(),
        });
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut values = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 2,
            message,
        };
        let id = rec.get(0).unwrap_or_default().to_string();
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| parse_err(format!("`{v}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.insert(id.clone(), row).is_some() {
            return Err(parse_err(format!("duplicate id `{id}`")));
        }
        ids.push(id);
    }
    Ok(CountTable { ids, columns, values })
}

/// Pairwise Spearman matrix over the count columns of both tables, joined on
/// the id column.
pub fn correlation_matrix(auto: &Path, manual: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let a = read_counts(auto)?;
    let m = read_counts(manual)?;
    let unmatched: Vec<&str> = a
        .ids
        .iter()
        .filter(|id| !m.values.contains_key(*id))
        .chain(m.ids.iter().filter(|id| !a.values.contains_key(*id)))
        .map(String::as_str)
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::Validation(format!("unmatched ids: {}", unmatched.join(", "))));
    }
    let mut names = a.columns.clone();
    for c in &m.columns {
        names.push(if a.columns.contains(c) { format!("manual:{c}") } else { c.clone() });
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(a.ids.len()); names.len()];
    for id in &a.ids {
        for (j, v) in a.values[id].iter().chain(&m.values[id]).enumerate() {
            cols[j].push(*v);
        }
    }
    let n = names.len();
    let mut matrix = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let r = stats::spearman(&cols[i], &cols[j])
                .map_err(|e| e.context(format!("columns `{}` and `{}`", names[i], names[j])))?;
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    Ok((names, matrix))
}

fn correlate_cmd(a: CorrelateArgs) -> Result<()> {
    let (names, matrix) = correlation_matrix(a.auto.as_deref().expect("checked"), a.manual.as_deref().expect("checked"))?;
    let text = report::correlation_csv(&names, &matrix)?;
    print!("{text}");
    if let Some(out) = &a.out {
        write_atomic(out, text.as_bytes())?;
        write_snapshot(out, "correlate", &a)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn version_names_format() {
        assert!(VERSION.contains(&format!("report format {}", crate::FORMAT_VERSION)));
        assert!(VERSION.contains(&format!("model format {}", crate::embed::MODEL_FORMAT_VERSION)));
    }

    #[test]
    fn flags_override_file() {
        let file: toml::Table = "[classify]\nalpha = 0.2\nfolds = 5\n".parse().unwrap();
        let flags = ClassifyArgs {
            alpha: Some(0.9),
            ..Default::default()
        };
        let merged = merge(&flags, Some(&file), "classify").unwrap();
        assert_eq!(merged.alpha, Some(0.9));
        assert_eq!(merged.folds, Some(5));
    }

    #[test]
    fn nested_option_groups_read_from_file() {
        let file: toml::Table = "[classify]\nmanifest = \"m.csv\"\ntagset = \"sd\"\nk = 4\nno_stratify = true\n"
            .parse()
            .unwrap();
        let merged = merge(&ClassifyArgs::default(), Some(&file), "classify").unwrap();
        assert_eq!(merged.corpus.manifest, Some(PathBuf::from("m.csv")));
        assert_eq!(merged.pid.tagset, Some(Tagset::Sd));
        assert_eq!(merged.embedding.k, Some(4));
        assert!(merged.no_stratify);
    }

    #[test]
    fn unknown_config_key_rejected() {
        let file: toml::Table = "[score]\nbogus = 1\n".parse().unwrap();
        assert!(merge(&ScoreArgs::default(), Some(&file), "score").is_err());
    }

    #[test]
    fn help_and_unknown_flag_codes() {
        assert_eq!(run(["idense", "--help"]), 0);
        assert_eq!(run(["idense", "--version"]), 0);
        assert_eq!(run(["idense", "score", "--bogus"]), 1);
    }
}
