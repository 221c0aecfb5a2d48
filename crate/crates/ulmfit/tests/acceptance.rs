//! Acceptance run: one `PASS`/`FAIL`/`SKIP` line per criterion, non-zero
//! exit if any criterion fails.
//!
//! The end-to-end criteria train the desk preset on five seeds and take
//! several minutes on one core.

#[path = "../../core/tests/support/grad_cases.rs"]
mod grad_cases;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ulmfit::config::RunConfig;
use ulmfit::pipeline::{
    ablation_run, evaluate, finetune, general_lines, load_target, pretrain, AblationTable,
};
use ulmfit_core::corpus::{class_counts, ngram_stats, subsample_labels, CleanTweet, Label};
use ulmfit_core::eval::{confusion, pr_curve, precision_recall_f1};
use ulmfit_core::lm::LmConfig;
use ulmfit_core::numerics::{ParamSet, RngStream};
use ulmfit_core::synthetic::{synthetic_tweets, TweetConfig};
use ulmfit_core::transfer::{
    discriminative_lrs, stlr, train_classifier, ClassifierModel, FineTunePlan, HeadKind,
    LayerGroups, StlrConfig, HEAD_HIDDEN,
};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(2024, 11);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (name, case) in grad_cases::CASES {
        for instance in 0..grad_cases::INSTANCES {
            let err = case(&mut rng);
            worst = worst.max(err);
            if !(err < grad_cases::TOL) {
                failures.push(format!("{name}#{instance}={err:.2e}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        failures.is_empty() && secs < 60.0,
        format!(
            "{} operator cases x {} instances, max rel err {worst:.2e}, {secs:.2}s{}",
            grad_cases::CASES.len(),
            grad_cases::INSTANCES,
            if failures.is_empty() {
                String::new()
            } else {
                format!(", failing: {}", failures.join(" "))
            }
        ),
    )
}

/// Linear interpolation between `lr_max / ratio` and `lr_max`, rising over
/// `[0, cut]` and falling over `[cut, cut / cut_frac]`.
fn stlr_oracle(t: f64, lr_max: f64, cut_frac: f64, ratio: f64, cut: f64) -> f64 {
    let lo = lr_max / ratio;
    let end = cut / cut_frac;
    if t <= cut {
        lo + (lr_max - lo) * (t / cut)
    } else {
        lr_max - (lr_max - lo) * ((t - cut) / (end - cut))
    }
}

fn schedule_suite() -> Outcome {
    let mut problems = Vec::new();
    let cfg = StlrConfig::new(0.01, 100);
    for (t, want) in [(0, 0.0003125), (10, 0.01), (100, 0.0003125)] {
        let got = stlr(t, &cfg).unwrap();
        if got != want {
            problems.push(format!("stlr({t}) = {got:e}, want {want:e}"));
        }
    }

    let mut rng = RngStream::new(77, 0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let cut_frac = *rng.choose(&[0.1, 0.2, 0.25, 0.5]);
        let total = 20 * (1 + rng.index(50));
        let cfg = StlrConfig {
            lr_max: rng.uniform(1e-4, 1.0),
            cut_frac,
            ratio: rng.uniform(2.0, 64.0),
            total_steps: total,
        };
        let t = rng.index(total + 1);
        let got = stlr(t, &cfg).unwrap();
        let want = stlr_oracle(
            t as f64,
            cfg.lr_max,
            cfg.cut_frac,
            cfg.ratio,
            (cut_frac * total as f64).round(),
        );
        worst = worst.max((got - want).abs());
    }
    if worst > 1e-12 {
        problems.push(format!("stlr closed-form gap {worst:e}"));
    }

    let mut disc_worst = 0.0f64;
    for _ in 0..20 {
        let base = rng.uniform(1e-5, 1.0);
        let factor = rng.uniform(1.1, 5.0);
        let n = 1 + rng.index(8);
        let got = discriminative_lrs(base, n, factor).unwrap();
        let mut lr = base;
        for g in got {
            disc_worst = disc_worst.max((g - lr).abs());
            lr /= factor;
        }
    }
    if disc_worst > 1e-12 {
        problems.push(format!("discriminative gap {disc_worst:e}"));
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!("endpoints exact, stlr gap {worst:.1e}, discriminative gap {disc_worst:.1e}")
        } else {
            problems.join("; ")
        },
    )
}

fn tensors(params: &ParamSet<f32>) -> BTreeMap<String, Vec<u32>> {
    params
        .iter()
        .map(|(n, t)| {
            (
                n.to_string(),
                t.data().iter().map(|v| v.to_bits()).collect(),
            )
        })
        .collect()
}

fn unfreezing_suite() -> Outcome {
    let raw = synthetic_tweets(&TweetConfig::new(200, 9)).unwrap();
    let tweets: Vec<CleanTweet> =
        ulmfit_core::corpus::clean_all(&raw, ulmfit_core::corpus::CleanProfile::Model);
    let vocab = ulmfit_core::corpus::Vocabulary::build(
        tweets
            .iter()
            .flat_map(|t| t.tokens.iter().map(String::as_str)),
        1,
        None,
    )
    .unwrap();
    let mut cfg = LmConfig::desk(vocab.len());
    cfg.emb_dim = 16;
    cfg.hidden_dim = 24;
    cfg.n_layers = 3;
    let mut model = ClassifierModel::<f32>::from_scratch(cfg.clone(), vocab, 20, 9).unwrap();
    let groups = LayerGroups::new(&cfg, HeadKind::Classifier);
    let mut plan = FineTunePlan::classifier(cfg.n_layers);
    plan.epochs = 4;

    let mut before = tensors(model.params());
    let mut problems = Vec::new();
    let mut frozen_trace = Vec::new();
    train_classifier(&mut model, &tweets, &plan, 9, |rec, m| {
        let after = tensors(m.params());
        frozen_trace.push(rec.frozen_groups);
        for (name, values) in &after {
            let g = groups.group_of(name).unwrap();
            let same = before[name] == *values;
            if g < rec.frozen_groups && !same {
                problems.push(format!("epoch {}: frozen `{name}` changed", rec.epoch));
            }
            if g >= rec.frozen_groups && same {
                problems.push(format!(
                    "epoch {}: trainable `{name}` did not move",
                    rec.epoch
                ));
            }
        }
        before = after;
    })
    .unwrap();
    if frozen_trace != [3, 2, 1, 0] {
        problems.push(format!("frozen groups per epoch {frozen_trace:?}"));
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!("frozen groups per epoch {frozen_trace:?}, all frozen tensors bit-identical")
        } else {
            problems.join("; ")
        },
    )
}

fn oracle_suite() -> Outcome {
    let words = ["a", "b", "c", "d"];
    let mut rng = RngStream::new(4242, 0);
    let mut problems = Vec::new();
    let mut ap_worst = 0.0f64;
    for case in 0..200 {
        let n_items = 1 + rng.index(50);

        let corpus: Vec<CleanTweet> = (0..n_items)
            .map(|i| {
                let toks: Vec<&str> = (0..rng.index(8)).map(|_| *rng.choose(&words)).collect();
                CleanTweet::new(i.to_string(), &toks, None)
            })
            .collect();
        for n in 1..=3 {
            let stats = ngram_stats(&corpus, n, 5).unwrap();
            let mut candidates: Vec<Vec<String>> = Vec::new();
            for t in &corpus {
                for start in 0..t.tokens.len().saturating_sub(n - 1) {
                    let g = t.tokens[start..start + n].to_vec();
                    if !candidates.contains(&g) {
                        candidates.push(g);
                    }
                }
            }
            let brute: BTreeMap<Vec<String>, usize> = candidates
                .into_iter()
                .map(|g| {
                    let mut c = 0;
                    for t in &corpus {
                        for start in 0..t.tokens.len() {
                            if start + n <= t.tokens.len() && t.tokens[start..start + n] == g[..] {
                                c += 1;
                            }
                        }
                    }
                    (g, c)
                })
                .collect();
            if stats.counts != brute {
                problems.push(format!("case {case}: {n}-gram counts differ"));
            }
        }

        let pick = |rng: &mut RngStream| {
            if rng.index(2) == 0 {
                Label::Related
            } else {
                Label::Unrelated
            }
        };
        let truths: Vec<Label> = (0..n_items).map(|_| pick(&mut rng)).collect();
        let preds: Vec<Label> = (0..n_items).map(|_| pick(&mut rng)).collect();
        let cm = confusion(&preds, &truths).unwrap();
        let count = |p: Label, t: Label| {
            preds
                .iter()
                .zip(&truths)
                .filter(|&(&a, &b)| a == p && b == t)
                .count()
        };
        let (tp, fp) = (
            count(Label::Related, Label::Related),
            count(Label::Related, Label::Unrelated),
        );
        let (fn_, tn) = (
            count(Label::Unrelated, Label::Related),
            count(Label::Unrelated, Label::Unrelated),
        );
        if (cm.tp, cm.fp, cm.fn_, cm.tn) != (tp, fp, fn_, tn) {
            problems.push(format!("case {case}: confusion differs"));
        }
        let m = precision_recall_f1(&cm);
        for label in Label::ALL {
            let hits = count(label, label);
            let predicted = preds.iter().filter(|&&p| p == label).count();
            let actual = truths.iter().filter(|&&t| t == label).count();
            let p = if predicted == 0 {
                0.0
            } else {
                hits as f64 / predicted as f64
            };
            let r = if actual == 0 {
                0.0
            } else {
                hits as f64 / actual as f64
            };
            let f = if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            };
            let c = m.class(label);
            if c.precision != p || c.recall != r || (c.f1 - f).abs() > 1e-12 || c.support != actual
            {
                problems.push(format!("case {case}: {label} metrics differ"));
            }
        }
        if m.accuracy != (tp + tn) as f64 / n_items as f64 {
            problems.push(format!("case {case}: accuracy differs"));
        }

        if truths.contains(&Label::Related) {
            let scores: Vec<f64> = (0..n_items).map(|_| rng.index(10) as f64 / 10.0).collect();
            let got = pr_curve(&scores, &truths).unwrap().average_precision;
            let mut thresholds = scores.clone();
            thresholds.sort_by(|a, b| b.total_cmp(a));
            thresholds.dedup();
            let positives = truths.iter().filter(|&&t| t == Label::Related).count() as f64;
            let (mut want, mut prev_r) = (0.0, 0.0);
            for th in thresholds {
                let selected: Vec<usize> = (0..n_items).filter(|&i| scores[i] >= th).collect();
                let hits = selected
                    .iter()
                    .filter(|&&i| truths[i] == Label::Related)
                    .count() as f64;
                let r = hits / positives;
                want += hits / selected.len() as f64 * (r - prev_r);
                prev_r = r;
            }
            ap_worst = ap_worst.max((got - want).abs());
        }
    }
    if ap_worst > 1e-9 {
        problems.push(format!("AP gap {ap_worst:e}"));
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!("200 instances of 1..=50 items, counts exact, AP gap {ap_worst:.1e}")
        } else {
            problems.join("; ")
        },
    )
}

struct SeedRun {
    seed: u64,
    seconds: f64,
    acc5: f64,
    acc80: f64,
    scratch5: f64,
}

fn accuracy(table: &AblationTable, fraction: f64, seed: u64) -> f64 {
    table.row(fraction, seed).unwrap().metrics.accuracy
}

fn desk_seed(seed: u64) -> ulmfit::error::Result<SeedRun> {
    let cfg = RunConfig {
        seed,
        ..RunConfig::default()
    };
    let start = Instant::now();
    let pretrained = pretrain(&cfg, &general_lines(&cfg)?)?;
    let target = load_target(&cfg)?;
    let encoder = finetune(&cfg, &pretrained, &target)?;
    let mut table = AblationTable::default();
    ablation_run(&cfg, &encoder, &target.split, &[5.0], &[seed], &mut table)?;
    let seconds = start.elapsed().as_secs_f64();
    ablation_run(&cfg, &encoder, &target.split, &[80.0], &[seed], &mut table)?;

    let sub = subsample_labels(&target.split.train, 5.0, seed)?;
    let mut scratch = ClassifierModel::<f32>::from_scratch(
        encoder.config.clone(),
        encoder.vocab.clone(),
        HEAD_HIDDEN,
        seed,
    )?;
    train_classifier(&mut scratch, &sub, &cfg.classifier_plan(), seed, |_, _| {})?;
    let scratch_eval = evaluate(&scratch, &[], &target.split.test, 0.0)?;

    Ok(SeedRun {
        seed,
        seconds,
        acc5: accuracy(&table, 5.0, seed),
        acc80: accuracy(&table, 80.0, seed),
        scratch5: scratch_eval.report.metrics.accuracy,
    })
}

fn desk_criteria(runs: &[SeedRun]) -> [(&'static str, Outcome); 3] {
    let list = |f: &dyn Fn(&SeedRun) -> String| runs.iter().map(f).collect::<Vec<_>>().join(" ");
    let e2e_ok = runs
        .iter()
        .filter(|r| r.acc5 >= 0.90 && r.seconds < 600.0)
        .count();
    let e2e = verdict(
        e2e_ok >= 4,
        format!(
            "{e2e_ok}/5 seeds at >= 0.90 within 600s: {}",
            list(&|r| format!("s{}={:.3}@{:.0}s", r.seed, r.acc5, r.seconds))
        ),
    );

    let n = runs.len() as f64;
    let mean5 = runs.iter().map(|r| r.acc5).sum::<f64>() / n;
    let mean80 = runs.iter().map(|r| r.acc80).sum::<f64>() / n;
    let flat = verdict(
        (mean5 - mean80).abs() <= 0.05,
        format!(
            "mean 5% {mean5:.3} vs 80% {mean80:.3}: {}",
            list(&|r| format!("s{}={:.3}/{:.3}", r.seed, r.acc5, r.acc80))
        ),
    );

    let wins = runs.iter().filter(|r| r.acc5 > r.scratch5).count();
    let transfer = verdict(
        wins >= 4,
        format!(
            "fine-tuned beats scratch on {wins}/5 seeds: {}",
            list(&|r| format!("s{}={:.3}>{:.3}", r.seed, r.acc5, r.scratch5))
        ),
    );
    [
        ("end-to-end desk run", e2e),
        ("flat learning curve", flat),
        ("transfer benefit", transfer),
    ]
}

fn queensland() -> Outcome {
    let Some(path) = std::env::var_os("ULMFIT_QUEENSLAND_CSV").map(PathBuf::from) else {
        return Outcome::Skip("ULMFIT_QUEENSLAND_CSV not set".into());
    };
    if !path.exists() {
        return Outcome::Skip(format!("{} does not exist", path.display()));
    }
    let run = || -> ulmfit::error::Result<Outcome> {
        let counts = class_counts(&ulmfit::data::load_tweets(&path)?);
        let mut cfg = RunConfig::default();
        cfg.paths.corpus = Some(path.clone());
        let pretrained = pretrain(&cfg, &general_lines(&cfg)?)?;
        let target = load_target(&cfg)?;
        let encoder = finetune(&cfg, &pretrained, &target)?;
        let mut table = AblationTable::default();
        ablation_run(
            &cfg,
            &encoder,
            &target.split,
            &[100.0],
            &[cfg.seed],
            &mut table,
        )?;
        let acc = accuracy(&table, 100.0, cfg.seed);
        Ok(verdict(
            counts.related == 5414 && counts.unrelated == 4619 && acc >= 0.85,
            format!(
                "related {} unrelated {}, 70-30 accuracy {acc:.3}",
                counts.related, counts.unrelated
            ),
        ))
    };
    run().unwrap_or_else(|e| Outcome::Fail(format!("pipeline failed: {e}")))
}

fn read_all(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timing.json" {
                let mut bytes = fs::read(&p).unwrap();
                if p.file_name().unwrap() == "ablation.csv" {
                    let text = String::from_utf8(bytes).unwrap();
                    bytes = text
                        .lines()
                        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
                        .collect::<String>()
                        .into_bytes();
                }
                files.insert(p.strip_prefix(dir).unwrap().to_path_buf(), bytes);
            }
        }
    }
    files
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let general = dir.path().join("general.txt");
    fs::write(
        &general,
        ulmfit_core::synthetic::general_corpus(4000, 11).join("\n"),
    )
    .unwrap();
    let out = dir.path().join("out");
    let cfg_path = dir.path().join("run.toml");
    fs::write(
        &cfg_path,
        format!(
            "seed = 3\n\n[paths]\ngeneral = {:?}\nout = {:?}\n\n[data]\nsynthetic_count = 200\n\n\
             [lm]\nemb_dim = 8\nhidden_dim = 12\nbptt_len = 10\nbatch_size = 4\nepochs = 1\n\n\
             [classifier]\nepochs = 2\n\n[ablation]\nfractions = [10.0, 50.0]\nseeds = [1, 2]\n",
            general.to_str().unwrap(),
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let commands: [&[&str]; 7] = [
        &["stats"],
        &["pretrain"],
        &["finetune-lm"],
        &["train-clf"],
        &["eval"],
        &["ablate"],
        &[
            "predict",
            "flood water over the bridge",
            "what a lovely day",
        ],
    ];
    let cfg = cfg_path.to_str().unwrap();
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        for args in commands {
            let mut argv = vec!["ulmfit", "--config", cfg];
            argv.extend_from_slice(args);
            let (mut o, mut e) = (Vec::new(), Vec::new());
            let code = ulmfit::cli::main_with(argv, &mut o, &mut e);
            if code != 0 {
                return Outcome::Fail(format!(
                    "{args:?} exited {code}: {}",
                    String::from_utf8_lossy(&e).trim()
                ));
            }
        }
        snapshots.push(read_all(&out));
    }
    let differing: Vec<String> = snapshots[0]
        .iter()
        .filter(|(p, b)| snapshots[1].get(*p) != Some(*b))
        .map(|(p, _)| p.display().to_string())
        .collect();
    verdict(
        differing.is_empty() && snapshots[0].len() == snapshots[1].len(),
        if differing.is_empty() {
            format!(
                "{} artifacts of 7 subcommands byte-identical",
                snapshots[0].len()
            )
        } else {
            format!("differing: {}", differing.join(" "))
        },
    )
}

fn report(name: &str, outcome: &Outcome) -> bool {
    let (tag, detail, failed) = match outcome {
        Outcome::Pass(d) => ("PASS", d, false),
        Outcome::Fail(d) => ("FAIL", d, true),
        Outcome::Skip(d) => ("SKIP", d, false),
    };
    println!("{tag} {name}: {detail}");
    failed
}

fn main() {
    let mut failed = false;
    for (name, check) in [
        ("gradient suite", gradient_suite as fn() -> Outcome),
        ("schedule suite", schedule_suite),
        ("unfreezing suite", unfreezing_suite),
        ("oracle suite", oracle_suite),
        ("reproducibility", reproducibility),
    ] {
        failed |= report(name, &check());
    }

    let mut runs = Vec::new();
    let mut errors = Vec::new();
    for seed in SEEDS {
        match desk_seed(seed) {
            Ok(r) => runs.push(r),
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    if errors.is_empty() {
        for (name, outcome) in desk_criteria(&runs) {
            failed |= report(name, &outcome);
        }
    } else {
        let outcome = Outcome::Fail(errors.join("; "));
        for name in [
            "end-to-end desk run",
            "flat learning curve",
            "transfer benefit",
        ] {
            failed |= report(name, &outcome);
        }
    }

    failed |= report("queensland data", &queensland());
    if failed {
        std::process::exit(1);
    }
}
