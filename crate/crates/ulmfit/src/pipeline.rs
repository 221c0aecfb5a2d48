//! The pipeline stages behind the subcommands, free of argument parsing and
//! file layout.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ulmfit_core::corpus::{
    clean_all, clean_text, split, subsample_labels, tokenize, CleanTweet, DatasetSplit, Label,
    RawTweet, Vocabulary,
};
use ulmfit_core::eval::{
    confusion, pr_curve, precision_recall_f1, ConfusionMatrix, Metrics, MetricsReport, PrCurve,
};
use ulmfit_core::lm::{train_lm, AwdLstm, Checkpoint, LmTrainOptions, Stage, TrainingLog};
use ulmfit_core::synthetic::{synthetic_tweets, TweetConfig};
use ulmfit_core::transfer::{
    build_classifier, finetune_lm, train_classifier, ClassifierModel, HEAD_HIDDEN,
};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::general;

/// General-domain lines from the configured file or the bundled corpus.
pub fn general_lines(cfg: &RunConfig) -> Result<Vec<String>> {
    match &cfg.paths.general {
        Some(p) => general::load_lines(p),
        None => Ok(general::bundled_lines()),
    }
}

/// The labeled tweet corpus: the configured CSV, or synthetic tweets drawn
/// with the run seed.
pub fn load_corpus(cfg: &RunConfig) -> Result<Vec<RawTweet>> {
    match &cfg.paths.corpus {
        Some(p) => crate::data::load_tweets(p),
        None => Ok(synthetic_tweets(&TweetConfig::new(
            cfg.data.synthetic_count,
            cfg.seed,
        ))?),
    }
}

/// Cleaned tweets split into a labeled train/test partition plus any
/// unlabeled tweets, which only feed language-model fine-tuning.
#[derive(Debug, Clone)]
pub struct TargetData {
    pub split: DatasetSplit,
    pub unlabeled: Vec<CleanTweet>,
}

pub fn prepare_target(cfg: &RunConfig, raw: &[RawTweet]) -> Result<TargetData> {
    let clean = clean_all(raw, cfg.data.cleaning);
    let (labeled, unlabeled): (Vec<CleanTweet>, Vec<CleanTweet>) =
        clean.into_iter().partition(|t| t.label.is_some());
    if labeled.is_empty() {
        return Err(Error::Core(ulmfit_core::Error::Data(
            "corpus has no labeled tweets".into(),
        )));
    }
    let split = split(
        &labeled,
        cfg.data.train_ratio,
        cfg.seed,
        cfg.data.stratified,
    )?;
    Ok(TargetData { split, unlabeled })
}

pub fn load_target(cfg: &RunConfig) -> Result<TargetData> {
    prepare_target(cfg, &load_corpus(cfg)?)
}

/// Builds the vocabulary from the general corpus and pretrains a language
/// model on it. The last `heldout_fraction` of lines measure perplexity.
pub fn pretrain(cfg: &RunConfig, lines: &[String]) -> Result<Checkpoint> {
    let docs: Vec<Vec<String>> = lines
        .iter()
        .map(|l| tokenize(&clean_text(l, cfg.data.cleaning)))
        .filter(|d| !d.is_empty())
        .collect();
    let n_held = (docs.len() as f64 * cfg.data.heldout_fraction).ceil() as usize;
    if docs.len() < 2 || n_held >= docs.len() {
        return Err(Error::Core(ulmfit_core::Error::Data(format!(
            "general corpus has {} usable lines; need more than the {} held out",
            docs.len(),
            n_held
        ))));
    }
    let (train_docs, held_docs) = docs.split_at(docs.len() - n_held);
    let vocab = Vocabulary::build(
        train_docs.iter().flatten().map(String::as_str),
        cfg.data.min_freq,
        cfg.data.max_vocab,
    )?;
    let stream = |ds: &[Vec<String>]| -> Vec<usize> {
        ds.iter().flat_map(|d| vocab.encode(d, true)).collect()
    };
    let train = stream(train_docs);
    let held = stream(held_docs);

    let lm_cfg = cfg.lm_config(vocab.len());
    let mut model = AwdLstm::<f32>::new(lm_cfg.clone(), cfg.seed)?;
    let opts = LmTrainOptions::pretraining(&lm_cfg, cfg.seed);
    let log = train_lm(
        &mut model,
        &train,
        (!held.is_empty()).then_some(held.as_slice()),
        &opts,
    )?;
    Ok(Checkpoint::from_lm(&model, Stage::Pretrained, vocab, log))
}

/// Adapts the pretrained model to the target tweets: the training split and
/// the unlabeled tweets, with the test split as held-out text.
pub fn finetune(
    cfg: &RunConfig,
    pretrained: &Checkpoint,
    target: &TargetData,
) -> Result<Checkpoint> {
    let mut text = target.split.train.clone();
    text.extend(target.unlabeled.iter().cloned());
    Ok(finetune_lm(
        pretrained,
        &text,
        Some(&target.split.test),
        &cfg.finetune_plan(),
        cfg.seed,
    )?)
}

/// A trained classifier with the labeled subsample it saw.
pub struct TrainedClassifier {
    pub model: ClassifierModel,
    pub log: TrainingLog,
    pub train: Vec<CleanTweet>,
    pub seconds: f64,
}

/// Subsamples `percent` of the training labels and trains a classifier on
/// top of the fine-tuned encoder.
pub fn train_clf(
    cfg: &RunConfig,
    encoder: &Checkpoint,
    train: &[CleanTweet],
    percent: f64,
    seed: u64,
) -> Result<TrainedClassifier> {
    let sub = subsample_labels(train, percent, seed)?;
    let start = Instant::now();
    let mut model = build_classifier(encoder, HEAD_HIDDEN, seed)?;
    let log = train_classifier(&mut model, &sub, &cfg.classifier_plan(), seed, |_, _| {})?;
    Ok(TrainedClassifier {
        model,
        log,
        train: sub,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Test-set metrics, losses and the precision-recall curve.
pub struct Evaluation {
    pub report: MetricsReport,
    pub curve: PrCurve,
}

pub fn evaluate(
    model: &ClassifierModel,
    train: &[CleanTweet],
    test: &[CleanTweet],
    seconds: f64,
) -> Result<Evaluation> {
    let scores = model.scores(test)?;
    let truths: Vec<Label> = test
        .iter()
        .map(|t| {
            t.label.ok_or_else(|| {
                Error::Core(ulmfit_core::Error::Label(format!(
                    "tweet `{}` is unlabeled",
                    t.id
                )))
            })
        })
        .collect::<Result<_>>()?;
    let preds: Vec<Label> = scores
        .iter()
        .map(|&p| {
            if p >= 0.5 {
                Label::Related
            } else {
                Label::Unrelated
            }
        })
        .collect();
    let cm = confusion(&preds, &truths)?;
    let report = MetricsReport {
        confusion: cm,
        metrics: precision_recall_f1(&cm),
        train_loss: if train.is_empty() {
            None
        } else {
            Some(model.loss(train)?)
        },
        test_loss: model.loss(test)?,
        seconds,
    };
    let curve = pr_curve(&scores, &truths)?;
    Ok(Evaluation { report, curve })
}

/// SHA-256 over ids, labels and tokens of a tweet list.
pub fn split_hash(tweets: &[CleanTweet]) -> String {
    let mut h = Sha256::new();
    for t in tweets {
        h.update(t.id.as_bytes());
        h.update([0u8]);
        h.update(t.label.map_or("", Label::as_str).as_bytes());
        h.update([0u8]);
        h.update(t.tokens.join(" ").as_bytes());
        h.update([b'\n']);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// One `(fraction, seed)` cell of the label-fraction ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub fraction: f64,
    pub seed: u64,
    pub train_examples: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub test_loss: f64,
    pub test_sha256: String,
    /// Classifier-stage wall clock; excluded from reproducibility checks.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, fraction: f64, seed: u64) -> Option<&AblationRow> {
        self.rows
            .iter()
            .find(|r| r.fraction == fraction && r.seed == seed)
    }
}

/// Trains and evaluates one classifier per `(fraction, seed)`, in that
/// order, against the fixed test split. Rows are appended to `table` as
/// they finish, so a failure leaves the completed rows in place.
pub fn ablation_run(
    cfg: &RunConfig,
    encoder: &Checkpoint,
    data: &DatasetSplit,
    fractions: &[f64],
    seeds: &[u64],
    table: &mut AblationTable,
) -> Result<()> {
    for &fraction in fractions {
        for &seed in seeds {
            let trained = train_clf(cfg, encoder, &data.train, fraction, seed)?;
            let eval = evaluate(&trained.model, &[], &data.test, trained.seconds)?;
            table.rows.push(AblationRow {
                fraction,
                seed,
                train_examples: trained.train.len(),
                confusion: eval.report.confusion,
                metrics: eval.report.metrics,
                test_loss: eval.report.test_loss,
                test_sha256: split_hash(&data.test),
                seconds: trained.seconds,
            });
        }
    }
    Ok(())
}
