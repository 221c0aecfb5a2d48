use std::time::Instant;

use ulmfit_core::corpus::{clean_text, tokenize, CleanProfile, Vocabulary};
use ulmfit_core::lm::{
    batchify, lm_forward, param_names, train_lm, AwdLstm, Dropouts, EncoderMasks, LmConfig,
    LmTrainOptions, LstmState,
};
use ulmfit_core::numerics::{RngStream, Tensor};
use ulmfit_core::synthetic::general_corpus;
use ulmfit_core::Error;

fn small_config(vocab: usize) -> LmConfig {
    let mut c = LmConfig::desk(vocab);
    c.emb_dim = 8;
    c.hidden_dim = 12;
    c.bptt_len = 5;
    c.batch_size = 3;
    c
}

fn corpus_stream(min_tokens: usize, seed: u64) -> (Vocabulary, Vec<usize>) {
    let lines: Vec<Vec<String>> = general_corpus(min_tokens, seed)
        .iter()
        .map(|l| tokenize(&clean_text(l, CleanProfile::Model)))
        .collect();
    let vocab = Vocabulary::build(lines.iter().flatten().map(String::as_str), 1, None).unwrap();
    let stream = lines.iter().flat_map(|l| vocab.encode(l, true)).collect();
    (vocab, stream)
}

/// Plain f64 loops over the stored weights: independent of the tape.
fn brute_force_mean_ce(model: &AwdLstm<f32>, stream: &[usize]) -> f64 {
    let cfg = model.config();
    let p = model.params();
    let get = |name: &str| -> Vec<f64> {
        p.get(p.require(name).unwrap())
            .data()
            .iter()
            .map(|&v| v as f64)
            .collect()
    };
    let emb = get(param_names::EMBEDDING);
    let dec_b = get(param_names::DECODER_BIAS);
    let dims = cfg.layer_dims();
    let layers: Vec<_> = (0..cfg.n_layers)
        .map(|l| {
            (
                get(&param_names::w_ih(l)),
                get(&param_names::w_hh(l)),
                get(&param_names::bias(l)),
            )
        })
        .collect();
    let mut h: Vec<Vec<f64>> = dims.iter().map(|&(_, d)| vec![0.0; d]).collect();
    let mut c = h.clone();
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut total = 0.0;
    for w in stream.windows(2) {
        let mut x: Vec<f64> = emb[w[0] * cfg.emb_dim..(w[0] + 1) * cfg.emb_dim].to_vec();
        for (l, &(inp, hid)) in dims.iter().enumerate() {
            let (wih, whh, b) = &layers[l];
            let mut gates = b.clone();
            for j in 0..4 * hid {
                for i in 0..inp {
                    gates[j] += x[i] * wih[i * 4 * hid + j];
                }
                for i in 0..hid {
                    gates[j] += h[l][i] * whh[i * 4 * hid + j];
                }
            }
            for k in 0..hid {
                let (ig, fg, gg, og) = (
                    sig(gates[k]),
                    sig(gates[hid + k]),
                    gates[2 * hid + k].tanh(),
                    sig(gates[3 * hid + k]),
                );
                c[l][k] = fg * c[l][k] + ig * gg;
                h[l][k] = og * c[l][k].tanh();
            }
            x = h[l].clone();
        }
        let logits: Vec<f64> = (0..cfg.vocab_size)
            .map(|v| {
                dec_b[v]
                    + (0..cfg.emb_dim)
                        .map(|d| x[d] * emb[v * cfg.emb_dim + d])
                        .sum::<f64>()
            })
            .collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        total += lse - logits[w[1]];
    }
    total / (stream.len() - 1) as f64
}

#[test]
fn forward_shape_and_determinism() {
    let mut cfg = small_config(30);
    cfg.dropouts = Dropouts::NONE;
    let model = AwdLstm::<f32>::new(cfg.clone(), 3).unwrap();
    let stream: Vec<usize> = (0..200).map(|i| 4 + (i * 7) % 26).collect();
    let blocks = batchify(&stream, 3, 5).unwrap();
    let state = LstmState::zeros(&cfg, 3);
    let (a, s1) = lm_forward(&model, &blocks[0], &state).unwrap();
    let (b, s2) = lm_forward(&model, &blocks[0], &state).unwrap();
    assert_eq!(a.shape(), &[3, 5, 30]);
    assert_eq!(a, b);
    assert_eq!(s1, s2);
    // carried state changes the next block's output
    let (fresh, _) = lm_forward(&model, &blocks[1], &state).unwrap();
    let (carried, _) = lm_forward(&model, &blocks[1], &s1).unwrap();
    assert_ne!(fresh, carried);
}

#[test]
fn out_of_range_id_is_index_error() {
    let cfg = small_config(30);
    let model = AwdLstm::<f32>::new(cfg.clone(), 3).unwrap();
    let state = LstmState::zeros(&cfg, 1);
    assert!(matches!(
        model.forward(&[1, 2, 30], 1, &state),
        Err(Error::Index(_))
    ));
}

#[test]
fn fresh_model_loss_near_log_vocab() {
    let (vocab, stream) = corpus_stream(3000, 1);
    let cfg = LmConfig::desk(vocab.len());
    let model = AwdLstm::<f32>::new(cfg, 11).unwrap();
    let (sum, n) = model.stream_loss(&stream[..1000]).unwrap();
    let ln_v = (vocab.len() as f64).ln();
    let loss = sum / n as f64;
    assert!(
        (loss - ln_v).abs() < 0.1 * ln_v,
        "loss {loss} vs ln V {ln_v}"
    );
}

#[test]
fn zero_weight_perplexity_is_vocab_size() {
    let cfg = small_config(40);
    let mut model = AwdLstm::<f32>::new(cfg, 5).unwrap();
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        for v in model.params_mut().get_mut(id).data_mut() {
            *v = 0.0;
        }
    }
    let stream: Vec<usize> = (0..300).map(|i| (i * 13) % 40).collect();
    let ppl = model.perplexity(&stream).unwrap();
    assert!((ppl - 40.0).abs() / 40.0 < 1e-3, "{ppl}");
}

#[test]
fn perplexity_matches_brute_force() {
    let (vocab, stream) = corpus_stream(3000, 2);
    let mut cfg = LmConfig::desk(vocab.len());
    cfg.emb_dim = 16;
    cfg.hidden_dim = 24;
    let model = AwdLstm::<f32>::new(cfg, 9).unwrap();
    let slice = &stream[..1000];
    let ppl = model.perplexity(slice).unwrap();
    let oracle = brute_force_mean_ce(&model, slice).exp();
    assert!(ppl >= 1.0);
    assert!((ppl - oracle).abs() / oracle < 1e-4, "{ppl} vs {oracle}");
}

#[test]
fn empty_stream_is_data_error() {
    let model = AwdLstm::<f32>::new(small_config(30), 1).unwrap();
    assert!(matches!(model.perplexity(&[]), Err(Error::Data(_))));
}

#[test]
fn zero_epochs_leave_model_unchanged() {
    let cfg = small_config(30);
    let mut model = AwdLstm::<f32>::new(cfg.clone(), 2).unwrap();
    let before = model.params().clone();
    let stream: Vec<usize> = (0..400).map(|i| 4 + (i * 5) % 26).collect();
    let mut opts = LmTrainOptions::pretraining(&cfg, 1);
    opts.epochs = 0;
    let log = train_lm(&mut model, &stream, None, &opts).unwrap();
    assert!(log.epochs.is_empty());
    assert_eq!(model.params(), &before);
}

#[test]
fn same_seed_same_log() {
    let cfg = small_config(30);
    let stream: Vec<usize> = (0..600).map(|i| 4 + (i * i + 3 * i) % 26).collect();
    let run = || {
        let mut model = AwdLstm::<f32>::new(cfg.clone(), 2).unwrap();
        let log = train_lm(
            &mut model,
            &stream,
            Some(&stream[..100]),
            &LmTrainOptions::pretraining(&cfg, 7),
        )
        .unwrap();
        (log, model.params().clone())
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a, b);
    assert_eq!(pa, pb);
    assert_eq!(a.epochs.len(), cfg.epochs);
}

#[test]
fn locked_masks_repeat_within_a_block_and_vary_across_blocks() {
    let cfg = LmConfig::desk(100);
    let mut rng = RngStream::new(3, 2);
    let a = EncoderMasks::<f32>::draw(&cfg, &cfg.dropouts, 32, &mut rng).unwrap();
    let b = EncoderMasks::<f32>::draw(&cfg, &cfg.dropouts, 32, &mut rng).unwrap();
    let input = a.input.as_ref().unwrap();
    assert_eq!(input.shape(), &[32, cfg.emb_dim]);
    assert_ne!(a.input, b.input);
    assert_ne!(a.weight[0], b.weight[0]);
    let rows = a.embedding_rows.as_ref().unwrap();
    assert_eq!(rows.len(), 100);
    assert!(a.hidden[2].is_none() && a.hidden[0].is_some());
    // fraction dropped is close to p over many blocks
    let mut zeros = 0usize;
    let mut total = 0usize;
    for _ in 0..200 {
        let m = EncoderMasks::<f32>::draw(&cfg, &cfg.dropouts, 32, &mut rng).unwrap();
        let t: &Tensor<f32> = m.output.as_ref().unwrap();
        zeros += t.data().iter().filter(|v| **v == 0.0).count();
        total += t.len();
    }
    let rate = zeros as f64 / total as f64;
    assert!((rate - cfg.dropouts.output).abs() < 0.01, "{rate}");
}

#[test]
fn weight_drop_is_functional() {
    let cfg = small_config(30);
    let mut model = AwdLstm::<f32>::new(cfg.clone(), 2).unwrap();
    let w_hh = model.params().require(&param_names::w_hh(0)).unwrap();
    let stored = model.params().get(w_hh).clone();
    let stream: Vec<usize> = (0..400).map(|i| 4 + (i * 5) % 26).collect();
    let mut opts = LmTrainOptions::pretraining(&cfg, 1);
    opts.epochs = 1;
    // the forward pass itself must not write the mask into the weights
    let state = LstmState::zeros(&cfg, cfg.batch_size);
    let mut rng = RngStream::new(1, 2);
    let masks = EncoderMasks::draw(&cfg, &cfg.dropouts, cfg.batch_size, &mut rng).unwrap();
    let blocks = batchify(&stream, cfg.batch_size, cfg.bptt_len).unwrap();
    {
        let mut g = ulmfit_core::numerics::Graph::new(model.params());
        model
            .block_loss(&mut g, &blocks[0], &state, Some(&masks))
            .unwrap();
    }
    assert_eq!(model.params().get(w_hh), &stored);
    train_lm(&mut model, &stream, None, &opts).unwrap();
    assert!(model
        .params()
        .get(w_hh)
        .data()
        .iter()
        .all(|v| v.is_finite()));
}

#[test]
fn two_epochs_reduce_perplexity() {
    let (vocab, stream) = corpus_stream(100_000, 42);
    let heldout_start = stream.len() * 9 / 10;
    let (train, heldout) = stream.split_at(heldout_start);
    let cfg = LmConfig::desk(vocab.len());
    let mut model = AwdLstm::<f32>::new(cfg.clone(), 1).unwrap();
    let initial = model.perplexity(heldout).unwrap();
    let start = Instant::now();
    let log = train_lm(
        &mut model,
        train,
        Some(heldout),
        &LmTrainOptions::pretraining(&cfg, 1),
    )
    .unwrap();
    let final_ppl = log.epochs.last().unwrap().heldout_perplexity.unwrap();
    eprintln!(
        "vocab {} tokens {} initial ppl {:.1} epochs {:?} in {:.1}s",
        vocab.len(),
        train.len(),
        initial,
        log.epochs
            .iter()
            .map(|e| (e.train_loss, e.heldout_perplexity))
            .collect::<Vec<_>>(),
        start.elapsed().as_secs_f64()
    );
    assert!(final_ppl < 0.8 * initial);
    assert!(log.epochs[1].train_loss <= log.epochs[0].train_loss);
    assert!(final_ppl < vocab.len() as f64);
}
