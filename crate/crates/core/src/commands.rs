//! The pipeline stages behind the command-line tool. Each stage reads and
//! writes plain files so it can be run and checked on its own.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dataset::{
    generate_synthetic, load_manifest, resolve_genres, split, split_stratified, write_synthetic,
    DatasetSplit, GameRecord, GenreMap, SyntheticSpec, GENRES, NUM_GENRES,
};
use crate::error::{Error, Result};
use crate::imaging::preprocess;
use crate::models::{predict_topk, Classifier, Sample};
use crate::text::Vocabulary;
use crate::training::{self, EvaluationReport, Examples, TrainReport};

pub const PREPARED_FILE: &str = "prepared.json";
pub const SPLIT_FILE: &str = "split.json";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const PREPARE_REPORT_FILE: &str = "prepare_report.json";
pub const RUN_CONFIG_FILE: &str = "run_config.toml";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.csv";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const PER_GENRE_FILE: &str = "per_genre.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const SYNTH_SPEC_FILE: &str = "synth.json";

/// Which partition of a prepared dataset to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "validation" | "val" => Ok(Self::Validation),
            "test" => Ok(Self::Test),
            other => Err(Error::Usage(format!(
                "unknown split {other:?} (expected train, validation or test)"
            ))),
        }
    }
}

impl std::fmt::Display for SplitName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Validation => "validation",
            Self::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedDataset {
    pub config: RunConfig,
    pub records: Vec<GameRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SplitFile {
    config: RunConfig,
    #[serde(flatten)]
    split: DatasetSplit,
}

/// Genre histogram of one split, in canonical genre order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepareReport {
    pub config: RunConfig,
    pub records: usize,
    pub vocabulary_size: usize,
    pub split_sizes: BTreeMap<String, usize>,
    pub genre_histogram: BTreeMap<String, Vec<(String, usize)>>,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

fn from_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_file(path)?).map_err(|e| Error::format(path, e))
}

fn config_comment(config: &RunConfig) -> String {
    format!("# config: {}\n", config.to_json_line())
}

/// Text fed to the text encoder for `record`.
pub fn record_text(record: &GameRecord, include_title: bool) -> String {
    if include_title {
        format!("{} {}", record.title, record.description)
    } else {
        record.description.clone()
    }
}

fn histogram<'a>(labels: impl Iterator<Item = &'a GameRecord>) -> Vec<(String, usize)> {
    let mut counts = [0usize; NUM_GENRES];
    for r in labels {
        if let Some(g) = r.resolved_genre {
            counts[g] += 1;
        }
    }
    GENRES
        .iter()
        .zip(counts)
        .map(|(g, c)| (g.to_string(), c))
        .collect()
}

/// Resolves genres, splits 70/10/20 and builds the vocabulary from the
/// training split. Writes the prepared records, split listings,
/// vocabulary and a preparation report into `out_dir`.
pub fn prepare(manifest: &Path, out_dir: &Path, config: &RunConfig) -> Result<PrepareReport> {
    let mut records = load_manifest(manifest)?;
    for r in &mut records {
        if r.cover_path.is_relative() {
            r.cover_path =
                std::path::absolute(&r.cover_path).map_err(|e| Error::io(&r.cover_path, e))?;
        }
    }
    let map = GenreMap::load(config.alias_table.as_deref())?;
    resolve_genres(&mut records, &map, config.seed)?;

    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let split = if config.stratify {
        let labels: Vec<usize> = records.iter().filter_map(|r| r.resolved_genre).collect();
        split_stratified(&ids, &labels, config.seed)?
    } else {
        split(&ids, config.seed)?
    };

    let by_id: BTreeMap<&str, &GameRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let texts: Vec<String> = split
        .train
        .iter()
        .map(|id| record_text(by_id[id.as_str()], config.include_title))
        .collect();
    let vocab = Vocabulary::build(&texts, config.min_count)?;

    let parts = [
        (SplitName::Train, &split.train),
        (SplitName::Validation, &split.validation),
        (SplitName::Test, &split.test),
    ];
    let report = PrepareReport {
        config: config.clone(),
        records: records.len(),
        vocabulary_size: vocab.size(),
        split_sizes: parts
            .iter()
            .map(|(n, ids)| (n.to_string(), ids.len()))
            .collect(),
        genre_histogram: parts
            .iter()
            .map(|(n, ids)| {
                (
                    n.to_string(),
                    histogram(ids.iter().map(|id| by_id[id.as_str()])),
                )
            })
            .collect(),
    };

    create_dir(out_dir)?;
    for (name, ids) in parts {
        let mut listing = String::new();
        ids.iter().for_each(|id| {
            let _ = writeln!(listing, "{id}");
        });
        write_file(&out_dir.join(format!("{name}.txt")), listing)?;
    }
    let config_line = config.to_json_line();
    vocab.save(
        &out_dir.join(VOCAB_FILE),
        Some(&format!("config: {config_line}")),
    )?;
    write_file(
        &out_dir.join(SPLIT_FILE),
        to_json(&SplitFile {
            config: config.clone(),
            split,
        }),
    )?;
    write_file(
        &out_dir.join(PREPARED_FILE),
        to_json(&PreparedDataset {
            config: config.clone(),
            records,
        }),
    )?;
    write_file(&out_dir.join(PREPARE_REPORT_FILE), to_json(&report))?;
    write_file(&out_dir.join(RUN_CONFIG_FILE), config.to_toml())?;
    Ok(report)
}

/// A prepared dataset as read back from disk.
pub struct Prepared {
    pub records: Vec<GameRecord>,
    pub split: DatasetSplit,
    pub vocabulary: Vocabulary,
}

impl Prepared {
    pub fn load(dir: &Path) -> Result<Self> {
        let prepared: PreparedDataset = from_json(&dir.join(PREPARED_FILE))?;
        let split: SplitFile = from_json(&dir.join(SPLIT_FILE))?;
        let vocabulary = Vocabulary::load(&dir.join(VOCAB_FILE))?;
        Ok(Self {
            records: prepared.records,
            split: split.split,
            vocabulary,
        })
    }

    pub fn records(&self, which: SplitName) -> Result<Vec<&GameRecord>> {
        let ids = match which {
            SplitName::Train => &self.split.train,
            SplitName::Validation => &self.split.validation,
            SplitName::Test => &self.split.test,
        };
        let by_id: BTreeMap<&str, &GameRecord> =
            self.records.iter().map(|r| (r.id.as_str(), r)).collect();
        ids.iter()
            .map(|id| {
                by_id.get(id.as_str()).copied().ok_or_else(|| {
                    Error::Compatibility(format!("split lists unknown record {id:?}"))
                })
            })
            .collect()
    }
}

/// Encodes `records` for a model with the given configuration.
pub fn build_examples(
    records: &[&GameRecord],
    config: &RunConfig,
    vocabulary: Option<&Vocabulary>,
) -> Result<Examples> {
    let mut out = Examples::default();
    for r in records {
        let text = match (config.modality.uses_text(), vocabulary) {
            (true, Some(v)) => {
                Some(v.encode(&record_text(r, config.include_title), config.max_len))
            }
            (true, None) => return Err(Error::Contract("text model needs a vocabulary".into())),
            (false, _) => None,
        };
        let image = if config.modality.uses_image() {
            Some(preprocess(&r.cover_path, config.image_size)?)
        } else {
            None
        };
        out.samples.push(Sample { text, image });
        out.labels.push(
            r.resolved_genre.ok_or_else(|| {
                Error::Contract(format!("record {:?} has no resolved genre", r.id))
            })?,
        );
    }
    Ok(out)
}

fn history_csv(config: &RunConfig, report: &TrainReport) -> String {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut out = config_comment(config);
    out.push_str("epoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
    for e in &report.history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.epoch,
            e.train_loss,
            e.train_accuracy,
            opt(e.val_loss),
            opt(e.val_accuracy)
        );
    }
    out
}

/// Trains on a prepared dataset, selecting the epoch with the best
/// validation loss. Writes the checkpoint and per-epoch history.
pub fn train(
    prepared_dir: &Path,
    out_dir: &Path,
    config: &RunConfig,
) -> Result<(Checkpoint, TrainReport)> {
    let prepared = Prepared::load(prepared_dir)?;
    let vocabulary = config.modality.uses_text().then_some(&prepared.vocabulary);
    let train_set = build_examples(&prepared.records(SplitName::Train)?, config, vocabulary)?;
    let val_set = build_examples(
        &prepared.records(SplitName::Validation)?,
        config,
        vocabulary,
    )?;

    let mut model = Classifier::new(config.model_config(prepared.vocabulary.size()), config.seed)?;
    let report = training::train(
        &mut model,
        &train_set,
        Some(&val_set),
        &config.train_config(),
    )?;
    let checkpoint = Checkpoint {
        config: config.clone(),
        model,
        vocabulary: vocabulary.cloned(),
        best_epoch: report.best_epoch,
    };

    create_dir(out_dir)?;
    checkpoint.save(&out_dir.join(CHECKPOINT_FILE))?;
    write_file(&out_dir.join(HISTORY_FILE), history_csv(config, &report))?;
    write_file(&out_dir.join(RUN_CONFIG_FILE), config.to_toml())?;
    Ok((checkpoint, report))
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config: &'a RunConfig,
    split: SplitName,
    best_epoch: usize,
    #[serde(flatten)]
    report: &'a EvaluationReport,
}

/// Evaluates a checkpoint on one split of a prepared dataset and writes
/// the report as JSON, a text table, and per-genre and confusion CSVs.
pub fn evaluate(
    checkpoint_path: &Path,
    prepared_dir: &Path,
    which: SplitName,
    out_dir: &Path,
) -> Result<EvaluationReport> {
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let prepared = Prepared::load(prepared_dir)?;
    let config = &checkpoint.config;
    if let Some(vocab) = &checkpoint.vocabulary {
        if vocab != &prepared.vocabulary {
            return Err(Error::Compatibility(format!(
                "checkpoint vocabulary ({} ids, min_count {}) differs from {} ({} ids, min_count {})",
                vocab.size(),
                vocab.min_count(),
                prepared_dir.join(VOCAB_FILE).display(),
                prepared.vocabulary.size(),
                prepared.vocabulary.min_count()
            )));
        }
    }
    if checkpoint.model.config().num_classes != NUM_GENRES {
        return Err(Error::Compatibility(format!(
            "checkpoint predicts {} classes, dataset has {NUM_GENRES} genres",
            checkpoint.model.config().num_classes
        )));
    }
    let examples = build_examples(
        &prepared.records(which)?,
        config,
        checkpoint.vocabulary.as_ref(),
    )?;
    let probs = training::predict(&checkpoint.model, &examples.samples, config.batch_size)?;
    let report = EvaluationReport::new(&probs, &examples.labels, &GENRES)?;

    create_dir(out_dir)?;
    let comment = config_comment(config);
    write_file(
        &out_dir.join(REPORT_JSON_FILE),
        to_json(&ReportFile {
            config,
            split: which,
            best_epoch: checkpoint.best_epoch,
            report: &report,
        }),
    )?;
    write_file(
        &out_dir.join(REPORT_TEXT_FILE),
        format!("{comment}# split: {which}\n{}", report.to_table()),
    )?;
    write_file(
        &out_dir.join(PER_GENRE_FILE),
        format!("{comment}{}", report.per_genre_csv()),
    )?;
    write_file(
        &out_dir.join(CONFUSION_FILE),
        format!("{comment}{}", report.confusion_csv()),
    )?;
    Ok(report)
}

/// The `k` most probable genres for one game, most probable first.
pub fn predict(
    checkpoint: &Checkpoint,
    text: Option<&str>,
    image: Option<&Path>,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    let config = &checkpoint.config;
    let modality = checkpoint.model.modality();
    let text = match (modality.uses_text(), text) {
        (true, Some(t)) => {
            let vocab = checkpoint
                .vocabulary
                .as_ref()
                .ok_or_else(|| Error::Compatibility("text checkpoint has no vocabulary".into()))?;
            Some(vocab.encode(t, config.max_len))
        }
        (true, None) => {
            return Err(Error::Usage(format!(
                "a {modality} model needs a description (--text)"
            )))
        }
        (false, _) => None,
    };
    let image = match (modality.uses_image(), image) {
        (true, Some(p)) => Some(preprocess(p, config.image_size)?),
        (true, None) => {
            return Err(Error::Usage(format!(
                "a {modality} model needs a cover image (--image)"
            )))
        }
        (false, _) => None,
    };
    let probs = checkpoint.model.predict_proba(&[&Sample { text, image }])?;
    let top = predict_topk(&probs, k)?;
    Ok(top[0]
        .iter()
        .map(|&g| (GENRES[g].to_string(), probs.values()[g]))
        .collect())
}

/// Writes a synthetic corpus (manifest, covers and the generating spec).
pub fn synth(spec: &SyntheticSpec, out_dir: &Path) -> Result<PathBuf> {
    let games = generate_synthetic(spec)?;
    create_dir(out_dir)?;
    let manifest = write_synthetic(&games, out_dir)?;
    write_file(&out_dir.join(SYNTH_SPEC_FILE), to_json(spec))?;
    Ok(manifest)
}
