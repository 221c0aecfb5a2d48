use proptest::prelude::*;
use ulmfit_core::corpus::{clean_all, CleanProfile, CleanTweet, Label, Vocabulary};
use ulmfit_core::lm::{
    perplexity, train_lm, tweet_stream, AwdLstm, Checkpoint, LmConfig, LmTrainOptions, Stage,
    TrainingLog,
};
use ulmfit_core::numerics::RngStream;
use ulmfit_core::synthetic::{general_corpus, synthetic_tweets, TweetConfig};
use ulmfit_core::transfer::{
    build_classifier, classifier_lr_range_test, discriminative_lrs, finetune_lm, lr_range_test,
    stlr, train_classifier, ClassifierModel, FineTunePlan, LrProbe, StlrConfig, HEAD_HIDDEN,
};
use ulmfit_core::Error;

fn tweets(n: usize, seed: u64) -> Vec<CleanTweet> {
    clean_all(
        &synthetic_tweets(&TweetConfig::new(n, seed)).unwrap(),
        CleanProfile::Model,
    )
}

fn vocab_for(data: &[CleanTweet]) -> Vocabulary {
    Vocabulary::build(
        data.iter()
            .flat_map(|t| t.tokens.iter().map(String::as_str)),
        1,
        None,
    )
    .unwrap()
}

fn small_config(vocab: usize) -> LmConfig {
    let mut c = LmConfig::desk(vocab);
    c.emb_dim = 16;
    c.hidden_dim = 24;
    c.n_layers = 3;
    c.bptt_len = 12;
    c.batch_size = 8;
    c
}

fn accuracy(model: &ClassifierModel, data: &[CleanTweet]) -> f64 {
    let scores = model.scores(data).unwrap();
    let right = scores
        .iter()
        .zip(data)
        .filter(|(&p, t)| (p >= 0.5) == (t.label == Some(Label::Related)))
        .count();
    right as f64 / data.len() as f64
}

/// Related tweets use only flood words and unrelated ones only everyday
/// words, so the classes are separable by vocabulary alone.
fn keyword_tweets(n: usize, seed: u64) -> Vec<CleanTweet> {
    let related = ["flood", "river", "levee", "rain", "water", "storm"];
    let unrelated = ["cat", "movie", "pizza", "game", "music", "coffee"];
    let mut rng = RngStream::new(seed, 0);
    (0..n)
        .map(|i| {
            let (words, label) = if i % 2 == 0 {
                (&related, Label::Related)
            } else {
                (&unrelated, Label::Unrelated)
            };
            let toks: Vec<&str> = (0..3 + rng.index(6)).map(|_| *rng.choose(words)).collect();
            CleanTweet::new(i.to_string(), &toks, Some(label))
        })
        .collect()
}

/// A small language model pretrained briefly on general text that shares
/// the tweets' vocabulary.
fn pretrained(target: &[CleanTweet]) -> Checkpoint {
    let general: Vec<CleanTweet> = general_corpus(6000, 3)
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let toks = ulmfit_core::corpus::tokenize(&ulmfit_core::corpus::clean_text(
                l,
                CleanProfile::Model,
            ));
            let refs: Vec<&str> = toks.iter().map(String::as_str).collect();
            CleanTweet::new(i.to_string(), &refs, None)
        })
        .collect();
    let mut all = general.clone();
    all.extend(target.iter().cloned());
    let vocab = vocab_for(&all);
    let cfg = small_config(vocab.len());
    let mut model = AwdLstm::<f32>::new(cfg.clone(), 5).unwrap();
    let mut opts = LmTrainOptions::pretraining(&cfg, 5);
    opts.epochs = 1;
    let log = train_lm(&mut model, &tweet_stream(&general, &vocab), None, &opts).unwrap();
    Checkpoint::from_lm(&model, Stage::Pretrained, vocab, log)
}

proptest! {
    #[test]
    fn stlr_single_peak_and_floor(
        lr_max in 1e-4f64..1.0,
        cut_frac in 0.05f64..0.5,
        ratio in 1.5f64..100.0,
        total in 20usize..400,
    ) {
        let cfg = StlrConfig { lr_max, cut_frac, ratio, total_steps: total };
        let cut = cfg.cut();
        prop_assert_eq!(cut, ((cut_frac * total as f64).floor() as usize).max(1));
        let lrs: Vec<f64> = (0..=total).map(|t| stlr(t, &cfg).unwrap()).collect();
        prop_assert!((lrs[0] - lr_max / ratio).abs() <= 1e-15 * lr_max);
        prop_assert!((lrs[cut] - lr_max).abs() <= 1e-15 * lr_max);
        for t in 0..cut {
            prop_assert!(lrs[t] < lrs[t + 1]);
        }
        for t in cut..total {
            prop_assert!(lrs[t] >= lrs[t + 1]);
            if lrs[t + 1] > lr_max / ratio {
                prop_assert!(lrs[t] > lrs[t + 1]);
            }
        }
        prop_assert!(lrs.iter().all(|&l| l > 0.0 && l <= lr_max * (1.0 + 1e-15)));
        prop_assert!(stlr(total + 1, &cfg).is_err());
    }

    #[test]
    fn discriminative_rates_fall_by_the_factor(
        base in 1e-6f64..1.0,
        n in 1usize..10,
        factor in 1.01f64..10.0,
    ) {
        let lrs = discriminative_lrs(base, n, factor).unwrap();
        prop_assert_eq!(lrs.len(), n);
        prop_assert_eq!(lrs[0], base);
        for w in lrs.windows(2) {
            prop_assert!(w[1] < w[0]);
            prop_assert!((w[0] / w[1] - factor).abs() < 1e-12 * factor);
        }
    }
}

#[test]
fn documented_schedule_values() {
    let cfg = StlrConfig::new(0.01, 100);
    let closed = |t: f64| {
        let p = if t < 10.0 {
            t / 10.0
        } else {
            1.0 - (t - 10.0) / (10.0 * 9.0)
        };
        0.01 * (1.0 + 31.0 * p) / 32.0
    };
    assert!((stlr(55, &cfg).unwrap() - 0.00515625).abs() < 1e-15);
    assert!((stlr(55, &cfg).unwrap() - closed(55.0)).abs() < 1e-15);
    let lrs = discriminative_lrs(0.01, 4, 2.6).unwrap();
    for (got, want) in lrs.iter().zip([0.01, 0.0038462, 0.0014793, 0.0005690]) {
        assert!((got - want).abs() < 1e-7);
    }
}

#[test]
fn classifier_learns_separable_tweets_with_logged_schedule() {
    let data = keyword_tweets(240, 4);
    let vocab = vocab_for(&data);
    let cfg = small_config(vocab.len());
    let mut model =
        ClassifierModel::<f32>::from_scratch(cfg.clone(), vocab, HEAD_HIDDEN, 4).unwrap();
    let embedding_before = model
        .params()
        .iter()
        .find(|(n, _)| *n == ulmfit_core::lm::param_names::EMBEDDING)
        .map(|(_, t)| t.clone())
        .unwrap();
    let mut plan = FineTunePlan::classifier(cfg.n_layers);
    plan.epochs = 3;
    plan.frozen_groups_initial = 0;
    plan.stlr.lr_max = 0.05;

    let mut after_first = None;
    let log = train_classifier(&mut model, &data, &plan, 4, |rec, m| {
        if rec.epoch == 0 {
            after_first = Some(m.params().clone());
        }
    })
    .unwrap();
    assert!(after_first.is_some());
    let acc = accuracy(&model, &data);
    assert!(acc >= 0.98, "train accuracy {acc}");

    let total = plan.epochs * data.len().div_ceil(plan.batch_size);
    let schedule = StlrConfig {
        total_steps: total,
        ..plan.stlr
    };
    let n_groups = cfg.n_layers + 1;
    assert_eq!(log.steps.len(), total * n_groups);
    for rec in &log.steps {
        let depth = n_groups - 1 - rec.group;
        let want = stlr(rec.step, &schedule).unwrap() / plan.disc_factor.powi(depth as i32);
        assert!(
            (rec.lr - want).abs() <= 1e-15 * want,
            "step {} group {}",
            rec.step,
            rec.group
        );
    }

    let flood = model
        .predict("Flood water at the river, rain and storm!")
        .unwrap();
    assert!(flood.related > 0.9, "{flood:?}");
    let embedding_after = model
        .params()
        .iter()
        .find(|(n, _)| *n == ulmfit_core::lm::param_names::EMBEDDING)
        .map(|(_, t)| t.clone())
        .unwrap();
    assert_ne!(embedding_before, embedding_after);
}

#[test]
fn first_epoch_trains_only_the_head() {
    let data = tweets(60, 8);
    let vocab = vocab_for(&data);
    let cfg = small_config(vocab.len());
    let mut model = ClassifierModel::<f32>::from_scratch(cfg.clone(), vocab, 10, 8).unwrap();
    let before = model.params().clone();
    let mut plan = FineTunePlan::classifier(cfg.n_layers);
    plan.epochs = 2;
    let mut snapshots = Vec::new();
    train_classifier(&mut model, &data, &plan, 8, |_, m| {
        snapshots.push(m.params().clone())
    })
    .unwrap();
    for ((name, a), (_, b)) in before.iter().zip(snapshots[0].iter()) {
        if name.starts_with("head.") {
            assert_ne!(a, b, "{name}");
        } else {
            assert_eq!(a, b, "{name}");
        }
    }
    let top = ulmfit_core::lm::param_names::w_ih(cfg.n_layers - 1);
    let moved: Vec<&str> = snapshots[0]
        .iter()
        .zip(snapshots[1].iter())
        .filter(|((_, a), (_, b))| a != b)
        .map(|((n, _), _)| n)
        .collect();
    assert!(moved.contains(&top.as_str()), "{moved:?}");
    assert!(!moved.contains(&ulmfit_core::lm::param_names::EMBEDDING));
}

#[test]
fn unlabeled_training_record_is_a_label_error() {
    let mut data = tweets(20, 2);
    let vocab = vocab_for(&data);
    let mut model =
        ClassifierModel::<f32>::from_scratch(small_config(vocab.len()), vocab, 10, 2).unwrap();
    data[3].label = None;
    let plan = FineTunePlan::classifier(3);
    assert!(matches!(
        train_classifier(&mut model, &data, &plan, 2, |_, _| {}),
        Err(Error::Label(_))
    ));
}

#[test]
fn probabilities_form_a_distribution() {
    let data = tweets(30, 6);
    let vocab = vocab_for(&data);
    let n = vocab.len();
    let model =
        ClassifierModel::<f32>::from_scratch(small_config(n), vocab, HEAD_HIDDEN, 6).unwrap();
    assert_eq!(model.head_input_dim(), 3 * model.config().output_dim());
    let mut rng = RngStream::new(6, 0);
    let seqs: Vec<Vec<usize>> = (0..50)
        .map(|_| (0..1 + rng.index(15)).map(|_| rng.index(n)).collect())
        .collect();
    for p in model.probabilities(&seqs).unwrap() {
        assert!(p[0] >= 0.0 && p[1] >= 0.0);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
    }

    let a = model.predict("Water over the bridge!").unwrap();
    assert_eq!(a, model.predict("Water over the bridge!").unwrap());
    assert!(!a.empty_input);
    assert!((a.related + a.unrelated - 1.0).abs() < 1e-6);
    let empty = model.predict("@someone http://x.co 1234 !!").unwrap();
    assert!(empty.empty_input);
    assert!((empty.related + empty.unrelated - 1.0).abs() < 1e-6);
}

#[test]
fn build_classifier_copies_the_encoder() {
    let data = tweets(40, 1);
    let ckpt = pretrained(&data);
    let a = build_classifier(&ckpt, 12, 3).unwrap();
    let b = build_classifier(&ckpt, 12, 3).unwrap();
    assert_eq!(a.params(), b.params());
    for (name, t) in a.params().iter() {
        if let Some(src) = ckpt.tensor(name) {
            assert_eq!(src, t, "{name}");
        } else {
            assert!(name.starts_with("head."), "{name}");
        }
    }
    let c = build_classifier(&ckpt, 12, 4).unwrap();
    assert_ne!(a.params(), c.params());

    let clf = a.to_checkpoint(TrainingLog::default());
    assert!(matches!(
        build_classifier(&clf, 12, 3),
        Err(Error::Config(_))
    ));
}

#[test]
fn lm_finetuning_lowers_target_perplexity() {
    let target = tweets(400, 12);
    let (train, held) = target.split_at(320);
    let ckpt = pretrained(&target);
    let held_ids = tweet_stream(held, &ckpt.vocab);
    let before = perplexity(&ckpt, &held_ids).unwrap();

    let mut plan = FineTunePlan::lm_finetune();
    let tuned = finetune_lm(&ckpt, train, Some(held), &plan, 12).unwrap();
    assert_eq!(tuned.stage, Stage::LmFinetuned);
    let after = perplexity(&tuned, &held_ids).unwrap();
    assert!(after < before, "{after} vs {before}");

    plan.epochs = 0;
    let same = finetune_lm(&ckpt, train, Some(held), &plan, 12).unwrap();
    assert_eq!(same.tensors, ckpt.tensors);
}

/// `f(w) = 200 w^2` under plain gradient steps: stable for `lr < 0.005`,
/// divergent above.
struct Quadratic {
    w: f64,
}

impl LrProbe for Quadratic {
    fn probe_step(&mut self, lr: f64) -> ulmfit_core::Result<f64> {
        let loss = 200.0 * self.w * self.w;
        self.w -= lr * 400.0 * self.w;
        Ok(loss)
    }
}

#[test]
fn range_test_shows_the_divergent_tail() {
    let curve = lr_range_test(&mut Quadratic { w: 1.0 }, 1e-5, 0.1, 100).unwrap();
    assert_eq!(curve.len(), 100);
    assert_eq!(curve[0].0, 1e-5);
    assert_eq!(curve[99].0, 0.1);
    let mid = curve[50].1;
    assert!(curve[99].1 > mid, "{} vs {mid}", curve[99].1);
    assert!(lr_range_test(&mut Quadratic { w: 1.0 }, 0.1, 1e-5, 10).is_err());

    let data = tweets(40, 3);
    let vocab = vocab_for(&data);
    let model =
        ClassifierModel::<f32>::from_scratch(small_config(vocab.len()), vocab, 10, 3).unwrap();
    let before = model.params().clone();
    let curve = classifier_lr_range_test(&model, &data, 1e-5, 0.1, 12, 8, 3).unwrap();
    assert_eq!(curve.len(), 12);
    assert!(curve.iter().all(|(_, l)| l.is_finite()));
    assert_eq!(model.params(), &before);
}
