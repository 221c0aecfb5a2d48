//! Random instances of every differentiable tape operator, shared by the
//! gradient tests and the acceptance run.
#![allow(dead_code)]

use ulmfit_core::numerics::{grad_check, Graph, RngStream, Tensor, Var};

pub const EPS: f64 = 1e-6;
pub const TOL: f64 = 1e-6;
pub const INSTANCES: usize = 5;

pub fn random(shape: &[usize], rng: &mut RngStream, scale: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.uniform(-scale, scale)).collect();
    Tensor::from_vec(shape, v).unwrap()
}

pub fn weights(n: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

/// `(name, case)`; each case draws one instance and returns its maximum
/// relative error.
pub const CASES: &[(&str, fn(&mut RngStream) -> f64)] = &[
    ("affine", affine),
    ("affine^T", affine_transposed),
    ("embedding", embedding),
    ("lstm_cell", lstm_cell),
    ("unrolled lstm", unrolled_lstm_with_projection),
    ("softmax_ce", softmax_cross_entropy),
    ("relu/mask/concat", relu_mask_concat),
    ("concat_pool", concat_pool),
];

pub fn affine(rng: &mut RngStream) -> f64 {
    let inputs = vec![
        random(&[3, 4], rng, 1.0),
        random(&[4, 5], rng, 1.0),
        random(&[5], rng, 1.0),
    ];
    let w = weights(15, rng);
    grad_check(
        move |g: &mut Graph<'static, f64>, v: &[Var]| {
            let y = g.affine(v[0], v[1], Some(v[2]), false)?;
            g.dot_const(y, &w)
        },
        &inputs,
        EPS,
    )
    .unwrap()
}

pub fn affine_transposed(rng: &mut RngStream) -> f64 {
    let inputs = vec![
        random(&[3, 4], rng, 1.0),
        random(&[6, 4], rng, 1.0),
        random(&[6], rng, 1.0),
    ];
    let w = weights(18, rng);
    grad_check(
        move |g: &mut Graph<'static, f64>, v: &[Var]| {
            let y = g.affine(v[0], v[1], Some(v[2]), true)?;
            g.dot_const(y, &w)
        },
        &inputs,
        EPS,
    )
    .unwrap()
}

pub fn embedding(rng: &mut RngStream) -> f64 {
    let inputs = vec![random(&[5, 3], rng, 1.0)];
    let ids = vec![0, 3, 3, 1, 4, 3];
    let scale: Vec<f64> = (0..5).map(|i| if i == 1 { 0.0 } else { 1.25 }).collect();
    let w = weights(18, rng);
    grad_check(
        move |g: &mut Graph<'static, f64>, v: &[Var]| {
            let y = g.embedding(v[0], &ids, Some(scale.clone()))?;
            g.dot_const(y, &w)
        },
        &inputs,
        EPS,
    )
    .unwrap()
}

pub fn lstm_cell(rng: &mut RngStream) -> f64 {
    let (b, d, h) = (2, 3, 4);
    let inputs = vec![
        random(&[b, d], rng, 1.0),
        random(&[b, h], rng, 1.0),
        random(&[b, h], rng, 1.0),
        random(&[d, 4 * h], rng, 0.8),
        random(&[h, 4 * h], rng, 0.8),
        random(&[4 * h], rng, 0.5),
    ];
    let wh = weights(b * h, rng);
    let wc = weights(b * h, rng);
    grad_check(
        move |g: &mut Graph<'static, f64>, v: &[Var]| {
            let (hn, cn) = g.lstm_cell(v[0], v[1], v[2], v[3], v[4], v[5])?;
            let a = g.dot_const(hn, &wh)?;
            let c = g.dot_const(cn, &wc)?;
            let both = g.concat_rows(&[a, c])?;
            g.dot_const(both, &[1.0, 1.0])
        },
        &inputs,
        EPS,
    )
    .unwrap()
}

/// Three steps sharing one input projection, as the language model runs them.
pub fn unrolled_lstm_with_projection(rng: &mut RngStream) -> f64 {
    let (b, d, h, steps) = (2, 3, 3, 3);
    let inputs = vec![
        random(&[steps * b, d], rng, 1.0),
        random(&[d, 4 * h], rng, 0.8),
        random(&[h, 4 * h], rng, 0.8),
        random(&[4 * h], rng, 0.5),
    ];
    let mask = random(&[h, 4 * h], rng, 2.0);
    let w = weights(steps * b * h, rng);
    grad_check(
        move |g: &mut Graph<'static, f64>, v: &[Var]| {
            let proj = g.affine(v[0], v[1], Some(v[3]), false)?;
            let w_hh = g.mask(v[2], &mask)?;
            let mut hs = g.constant(Tensor::zeros(&[b, h]));
            let mut cs = g.constant(Tensor::zeros(&[b, h]));
            let mut outs = Vec::new();
            for t in 0..steps {
                let pre = g.recurrent_gates(proj, t * b, hs, w_hh)?;
                let act = g.gate_activations(pre)?;
                cs = g.cell_update(act, cs)?;
                hs = g.hidden_output(act, cs)?;
                outs.push(hs);
            }
            let all = g.concat_rows(&outs)?;
            g.dot_const(all, &w)
        },
        &inputs,
        EPS,
    )
    .unwrap()
}

pub fn softmax_cross_entropy(rng: &mut RngStream) -> f64 {
    let inputs = vec![random(&[4, 5], rng, 3.0)];
    let targets: Vec<usize> = (0..4).map(|_| rng.index(5)).collect();
    grad_check(
        move |g: &mut Graph<'static, f64>, v: &[Var]| g.softmax_cross_entropy(v[0], &targets),
        &inputs,
        EPS,
    )
    .unwrap()
}

pub fn relu_mask_concat(rng: &mut RngStream) -> f64 {
    let inputs = vec![random(&[2, 3], rng, 1.0), random(&[1, 3], rng, 1.0)];
    let mask = random(&[2, 3], rng, 2.0);
    let w = weights(9, rng);
    grad_check(
        move |g: &mut Graph<'static, f64>, v: &[Var]| {
            let m = g.mask(v[0], &mask)?;
            let r = g.relu(m)?;
            let c = g.concat_rows(&[r, v[1]])?;
            g.dot_const(c, &w)
        },
        &inputs,
        EPS,
    )
    .unwrap()
}

pub fn concat_pool(rng: &mut RngStream) -> f64 {
    let (b, d, steps) = (3, 4, 4);
    let inputs: Vec<Tensor<f64>> = (0..steps).map(|_| random(&[b, d], rng, 1.0)).collect();
    // left padding: sequence 0 full, 1 has one pad, 2 has two pads
    let mut valid = vec![true; b * steps];
    valid[steps] = false;
    valid[2 * steps] = false;
    valid[2 * steps + 1] = false;
    let w = weights(b * 3 * d, rng);
    grad_check(
        move |g: &mut Graph<'static, f64>, v: &[Var]| {
            let y = g.concat_pool(v, &valid)?;
            g.dot_const(y, &w)
        },
        &inputs,
        EPS,
    )
    .unwrap()
}
