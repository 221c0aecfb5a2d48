//! Argument parsing and the subcommands.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use ulmfit_core::corpus::{class_counts, clean_all, length_stats, ngram_stats, CleanProfile};
use ulmfit_core::lm::{Checkpoint, Preset, Stage};
use ulmfit_core::transfer::ClassifierModel;

use crate::codec::{load_checkpoint, save_checkpoint};
use crate::config::{parse_fractions, RunConfig};
use crate::data;
use crate::error::{Error, Result};
use crate::pipeline::{self, AblationTable};
use crate::report::{self, ReportJson};

pub const PRETRAINED: &str = "pretrained";
pub const LM_FINETUNED: &str = "lm_finetuned";
pub const CLASSIFIER: &str = "classifier";

#[derive(Debug, Parser)]
#[command(
    name = "ulmfit",
    version,
    about = "Tweet relevance classification by language-model transfer"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Model size preset: desk or paper.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Label percentages for the ablation, e.g. 5,10,20,50,80.
    #[arg(long, global = true)]
    pub fractions: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// N-gram tables, length histograms and class counts of the corpus.
    Stats,
    /// Pretrain the language model on the general corpus.
    Pretrain,
    /// Fine-tune the pretrained language model on target tweets.
    FinetuneLm,
    /// Train the classifier on a fraction of the labels.
    TrainClf {
        /// Percent of training labels to use; overrides the config.
        #[arg(long)]
        label_percent: Option<f64>,
    },
    /// Evaluate the classifier on the test split.
    Eval,
    /// Classifier accuracy across label fractions and seeds.
    Ablate,
    /// Class probabilities for each text argument.
    Predict {
        #[arg(required = true)]
        texts: Vec<String>,
    },
}

impl Command {
    fn dir_name(&self) -> &'static str {
        match self {
            Command::Stats => "stats",
            Command::Pretrain => "pretrain",
            Command::FinetuneLm => "finetune-lm",
            Command::TrainClf { .. } => "train-clf",
            Command::Eval => "eval",
            Command::Ablate => "ablate",
            Command::Predict { .. } => "predict",
        }
    }
}

impl Cli {
    /// File values overridden by flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = &self.preset {
            cfg.preset = p.parse::<Preset>()?;
        }
        if let Some(f) = &self.fractions {
            cfg.ablation.fractions = parse_fractions(f)?;
        }
        if let Some(o) = &self.out {
            cfg.paths.out = o.clone();
        }
        if let Command::TrainClf {
            label_percent: Some(p),
        } = self.command
        {
            cfg.data.label_percent = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses arguments and runs; returns the process exit code. Errors are
/// reported as one line on `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let usage = Error::Usage(e.kind().to_string() + ": " + first_line(&e.to_string()));
            let _ = writeln!(err, "{}", usage.report_line());
            return usage.exit_code();
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.report_line());
            e.exit_code()
        }
    }
}

fn first_line(s: &str) -> &str {
    s.lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("")
        .trim_start_matches("error: ")
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = cli.resolve()?;
    let dir = cfg.paths.out.join(cli.command.dir_name());
    match &cli.command {
        Command::Stats => cmd_stats(&cfg, &dir, out),
        Command::Pretrain => cmd_pretrain(&cfg, &dir, out),
        Command::FinetuneLm => cmd_finetune_lm(&cfg, &dir, out),
        Command::TrainClf { .. } => cmd_train_clf(&cfg, &dir, out),
        Command::Eval => cmd_eval(&cfg, &dir, out),
        Command::Ablate => cmd_ablate(&cfg, &dir, out),
        Command::Predict { texts } => cmd_predict(&cfg, &dir, texts, out),
    }
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) {
    let _ = writeln!(out, "{}", line.as_ref());
}

/// Creates the output directory and writes the resolved configuration.
fn prepare_dir(cfg: &RunConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    report::write_file(&dir.join("config.toml"), cfg.resolved().to_toml())
}

fn write_timing(dir: &Path, seconds: f64) -> Result<()> {
    report::write_file(
        &dir.join("timing.json"),
        format!("{{\"seconds\": {seconds:.3}}}\n"),
    )
}

/// Loads an earlier stage's checkpoint; a missing file is a usage error
/// naming the expected path.
fn require_checkpoint(
    cfg: &RunConfig,
    name: &str,
    stage: Stage,
    producer: &str,
) -> Result<Checkpoint> {
    let path = cfg.checkpoint_path(name);
    if !path.exists() {
        return Err(Error::MissingPrerequisite {
            path,
            what: format!("run `{producer}` first"),
        });
    }
    let ckpt = load_checkpoint(&path)?;
    if ckpt.stage != stage {
        return Err(Error::Core(ulmfit_core::Error::Config(format!(
            "{} holds a {:?} checkpoint, expected {:?}",
            path.display(),
            ckpt.stage,
            stage
        ))));
    }
    Ok(ckpt)
}

fn write_logs(dir: &Path, log: &ulmfit_core::lm::TrainingLog) -> Result<()> {
    report::write_with(&dir.join("epochs.csv"), |b| report::write_epoch_log(b, log))?;
    report::write_with(&dir.join("steps.csv"), |b| report::write_step_log(b, log))
}

pub fn cmd_stats(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let raw = pipeline::load_corpus(cfg)?;
    prepare_dir(cfg, dir)?;
    let clean = clean_all(&raw, CleanProfile::Stats);
    for (n, name) in [(1, "unigrams"), (2, "bigrams"), (3, "trigrams")] {
        let stats = ngram_stats(&clean, n, cfg.data.top_k)?;
        report::write_with(&dir.join(format!("{name}.csv")), |b| {
            data::write_ngrams(b, &stats)
        })?;
    }
    let lengths = length_stats(&raw);
    report::write_with(&dir.join("word_lengths.csv"), |b| {
        data::write_histogram(b, &lengths.words)
    })?;
    report::write_with(&dir.join("char_lengths.csv"), |b| {
        data::write_histogram(b, &lengths.chars)
    })?;
    let counts = class_counts(&raw);
    report::write_with(&dir.join("class_counts.csv"), |b| {
        data::write_class_counts(b, &counts)
    })?;
    say(
        out,
        format!(
            "tweets {} related {} unrelated {} unlabeled {}",
            raw.len(),
            counts.related,
            counts.unrelated,
            counts.unlabeled
        ),
    );
    Ok(())
}

pub fn cmd_pretrain(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let lines = pipeline::general_lines(cfg)?;
    prepare_dir(cfg, dir)?;
    let start = Instant::now();
    let ckpt = pipeline::pretrain(cfg, &lines)?;
    let seconds = start.elapsed().as_secs_f64();
    let path = cfg.checkpoint_path(PRETRAINED);
    save_checkpoint(&ckpt, &path)?;
    write_logs(dir, &ckpt.log)?;
    write_timing(dir, seconds)?;
    for e in &ckpt.log.epochs {
        say(
            out,
            format!(
                "epoch {} train_loss {:.4} heldout_ppl {}",
                e.epoch,
                e.train_loss,
                e.heldout_perplexity
                    .map_or("-".into(), |p| format!("{p:.2}"))
            ),
        );
    }
    say(
        out,
        format!("vocab {} checkpoint {}", ckpt.vocab.len(), path.display()),
    );
    Ok(())
}

pub fn cmd_finetune_lm(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let pretrained = require_checkpoint(cfg, PRETRAINED, Stage::Pretrained, "pretrain")?;
    let target = pipeline::load_target(cfg)?;
    prepare_dir(cfg, dir)?;
    let start = Instant::now();
    let ckpt = pipeline::finetune(cfg, &pretrained, &target)?;
    let seconds = start.elapsed().as_secs_f64();
    let path = cfg.checkpoint_path(LM_FINETUNED);
    save_checkpoint(&ckpt, &path)?;
    let stage_log = ulmfit_core::lm::TrainingLog {
        epochs: ckpt.log.epochs[pretrained.log.epochs.len()..].to_vec(),
        steps: ckpt.log.steps.clone(),
    };
    write_logs(dir, &stage_log)?;
    write_timing(dir, seconds)?;
    for e in &stage_log.epochs {
        say(
            out,
            format!(
                "epoch {} train_loss {:.4} target_ppl {}",
                e.epoch,
                e.train_loss,
                e.heldout_perplexity
                    .map_or("-".into(), |p| format!("{p:.2}"))
            ),
        );
    }
    say(out, format!("checkpoint {}", path.display()));
    Ok(())
}

pub fn cmd_train_clf(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let encoder = require_checkpoint(cfg, LM_FINETUNED, Stage::LmFinetuned, "finetune-lm")?;
    let target = pipeline::load_target(cfg)?;
    prepare_dir(cfg, dir)?;
    let trained = pipeline::train_clf(
        cfg,
        &encoder,
        &target.split.train,
        cfg.data.label_percent,
        cfg.seed,
    )?;
    let path = cfg.checkpoint_path(CLASSIFIER);
    save_checkpoint(&trained.model.to_checkpoint(trained.log.clone()), &path)?;
    write_logs(dir, &trained.log)?;
    write_timing(dir, trained.seconds)?;
    for e in &trained.log.epochs {
        say(
            out,
            format!(
                "epoch {} train_loss {:.4} frozen_groups {}",
                e.epoch, e.train_loss, e.frozen_groups
            ),
        );
    }
    say(
        out,
        format!(
            "trained on {} labeled tweets ({}%) checkpoint {}",
            trained.train.len(),
            cfg.data.label_percent,
            path.display()
        ),
    );
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let ckpt = require_checkpoint(cfg, CLASSIFIER, Stage::Classifier, "train-clf")?;
    let model = ClassifierModel::from_checkpoint(&ckpt)?;
    let target = pipeline::load_target(cfg)?;
    prepare_dir(cfg, dir)?;
    let sub = ulmfit_core::corpus::subsample_labels(
        &target.split.train,
        cfg.data.label_percent,
        cfg.seed,
    )?;
    let start = Instant::now();
    let mut eval = pipeline::evaluate(&model, &sub, &target.split.test, 0.0)?;
    eval.report.seconds = start.elapsed().as_secs_f64();
    let r = &eval.report;
    report::write_with(&dir.join("metrics.csv"), |b| {
        report::write_metrics(b, &r.metrics)
    })?;
    report::write_with(&dir.join("pr_curve.csv"), |b| {
        report::write_pr_curve(b, &eval.curve)
    })?;
    report::write_file(
        &dir.join("report.json"),
        report::to_json(&ReportJson::new(r, &eval.curve)),
    )?;
    write_timing(dir, r.seconds)?;
    say(
        out,
        format!(
            "accuracy {:.4} macro_f1 {:.4} train_loss {} test_loss {:.4} average_precision {:.4}",
            r.metrics.accuracy,
            r.metrics.macro_f1,
            r.train_loss.map_or("-".into(), |l| format!("{l:.4}")),
            r.test_loss,
            eval.curve.average_precision
        ),
    );
    for c in &r.metrics.classes {
        say(
            out,
            format!(
                "{} precision {:.4} recall {:.4} f1 {:.4} support {}",
                c.label, c.precision, c.recall, c.f1, c.support
            ),
        );
    }
    Ok(())
}

pub fn cmd_ablate(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let encoder = require_checkpoint(cfg, LM_FINETUNED, Stage::LmFinetuned, "finetune-lm")?;
    let target = pipeline::load_target(cfg)?;
    prepare_dir(cfg, dir)?;
    let mut table = AblationTable::default();
    let result = pipeline::ablation_run(
        cfg,
        &encoder,
        &target.split,
        &cfg.ablation.fractions,
        &cfg.ablation_seeds(),
        &mut table,
    );
    report::write_with(&dir.join("ablation.csv"), |b| {
        report::write_ablation(b, &table)
    })?;
    report::write_file(&dir.join("ablation.json"), report::to_json(&table))?;
    report::write_file(
        &dir.join("test_split.sha256"),
        pipeline::split_hash(&target.split.test) + "\n",
    )?;
    for row in &table.rows {
        say(
            out,
            format!(
                "fraction {} seed {} examples {} accuracy {:.4}",
                row.fraction, row.seed, row.train_examples, row.metrics.accuracy
            ),
        );
    }
    result
}

pub fn cmd_predict(
    cfg: &RunConfig,
    dir: &Path,
    texts: &[String],
    out: &mut dyn Write,
) -> Result<()> {
    let ckpt = require_checkpoint(cfg, CLASSIFIER, Stage::Classifier, "train-clf")?;
    let model = ClassifierModel::from_checkpoint(&ckpt)?;
    prepare_dir(cfg, dir)?;
    let mut lines = String::new();
    for text in texts {
        let p = model.predict(text)?;
        let mut line = format!(
            "related={:.6} unrelated={:.6} label={}",
            p.related,
            p.unrelated,
            p.label()
        );
        if p.empty_input {
            line.push_str(" empty_input");
        }
        lines.push_str(&line);
        lines.push('\n');
        say(out, line);
    }
    report::write_file(&dir.join("predictions.txt"), lines)
}
