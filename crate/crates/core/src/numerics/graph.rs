//! Reverse-mode tape.
//!
//! A [`Graph`] records every operator application as a node holding its
//! forward value. [`Graph::backward`] walks the nodes in reverse creation
//! order, which is a valid topological order because an operator can only
//! consume nodes that already exist.
//!
//! Parameters are never copied into the tape: a parameter node reads its value
//! straight from the borrowed [`ParamSet`], and its gradient is accumulated
//! into a caller-owned [`ParamGrads`].

use alloc::vec;
use alloc::vec::Vec;

use super::{ParamGrads, ParamId, ParamSet, Scalar, Tensor};
use crate::error::{bail, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<S> {
    Leaf,
    Param(ParamId),
    Affine {
        x: Var,
        w: Var,
        b: Option<Var>,
        transpose_w: bool,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
        row_scale: Option<Vec<S>>,
    },
    RecurrentGates {
        proj: Var,
        row0: usize,
        h: Var,
        w: Var,
    },
    GateAct {
        pre: Var,
    },
    CellUpdate {
        act: Var,
        c: Var,
    },
    HiddenOut {
        act: Var,
        c: Var,
    },
    Mask {
        x: Var,
        mask: Vec<S>,
    },
    ConcatRows {
        parts: Vec<Var>,
    },
    Relu {
        x: Var,
    },
    ConcatPool {
        states: Vec<Var>,
        last: Vec<usize>,
        argmax: Vec<usize>,
        valid: Vec<bool>,
        lengths: Vec<usize>,
    },
    SoftmaxCe {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<S>,
    },
    DotConst {
        x: Var,
        w: Vec<S>,
    },
}

struct Node<S> {
    value: Option<Tensor<S>>,
    op: Op<S>,
    tracked: bool,
}

/// Recording tape for one forward/backward pass.
pub struct Graph<'p, S: Scalar> {
    params: Option<&'p ParamSet<S>>,
    nodes: Vec<Node<S>>,
}

/// Gradients of tracked leaves after [`Graph::backward_leaves`].
pub struct LeafGrads<S> {
    grads: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> LeafGrads<S> {
    /// Gradient of a tracked leaf; all zeros if the loss did not depend on it.
    pub fn get(&self, v: Var) -> Option<&[S]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn check_finite<S: Scalar>(op: &str, t: &Tensor<S>) -> Result<()> {
    if !t.all_finite() {
        bail!(Numerics, "non-finite value produced by {}", op);
    }
    Ok(())
}

fn add_into<S: Scalar>(dst: &mut [S], src: &[S]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

impl<S: Scalar> Graph<'static, S> {
    /// Tape without parameters, for free-standing computations and checks.
    pub fn detached() -> Self {
        Graph {
            params: None,
            nodes: Vec::new(),
        }
    }
}

impl<'p, S: Scalar> Graph<'p, S> {
    pub fn new(params: &'p ParamSet<S>) -> Self {
        Graph {
            params: Some(params),
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, tracked: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            tracked,
        });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, t: Tensor<S>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Input whose gradient is reported by [`Graph::backward_leaves`].
    pub fn leaf(&mut self, t: Tensor<S>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        assert!(self.params.is_some(), "param node on a detached graph");
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            tracked: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.expect("param graph").get(*id),
            _ => unreachable!("node without value"),
        }
    }

    /// `y = x W + b`, with `W` stored `[I, O]`; `transpose_w` reads `W` as
    /// `[O, I]` instead (tied decoders reuse the `[V, D]` embedding).
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>, transpose_w: bool) -> Result<Var> {
        let (xt, wt) = (self.value(x), self.value(w));
        if xt.shape().len() != 2 || wt.shape().len() != 2 {
            bail!(
                Shape,
                "affine expects matrices, got {:?} and {:?}",
                xt.shape(),
                wt.shape()
            );
        }
        let (batch, inp) = (xt.shape()[0], xt.shape()[1]);
        let (w_in, out) = if transpose_w {
            (wt.shape()[1], wt.shape()[0])
        } else {
            (wt.shape()[0], wt.shape()[1])
        };
        if w_in != inp {
            bail!(
                Shape,
                "affine: x {:?} incompatible with W {:?}",
                xt.shape(),
                wt.shape()
            );
        }
        let mut y = Tensor::zeros(&[batch, out]);
        let mut beta = S::ZERO;
        if let Some(b) = b {
            let bt = self.value(b);
            if bt.len() != out {
                bail!(
                    Shape,
                    "affine: bias {:?} but output width {}",
                    bt.shape(),
                    out
                );
            }
            for row in y.data_mut().chunks_mut(out) {
                row.copy_from_slice(bt.data());
            }
            beta = S::ONE;
        }
        S::gemm(
            batch,
            inp,
            out,
            S::ONE,
            xt.data(),
            false,
            wt.data(),
            transpose_w,
            beta,
            y.data_mut(),
        );
        check_finite("affine", &y)?;
        let tracked = self.tracked(x) || self.tracked(w) || b.is_some_and(|b| self.tracked(b));
        Ok(self.push(
            y,
            Op::Affine {
                x,
                w,
                b,
                transpose_w,
            },
            tracked,
        ))
    }

    /// Row gather `out[n] = table[ids[n]] * row_scale[ids[n]]`, output `[N, D]`.
    pub fn embedding(
        &mut self,
        table: Var,
        ids: &[usize],
        row_scale: Option<Vec<S>>,
    ) -> Result<Var> {
        let tt = self.value(table);
        if tt.shape().len() != 2 {
            bail!(
                Shape,
                "embedding table must be [V, D], got {:?}",
                tt.shape()
            );
        }
        let (vocab, dim) = (tt.shape()[0], tt.shape()[1]);
        if let Some(s) = &row_scale {
            if s.len() != vocab {
                bail!(
                    Shape,
                    "row scale has {} entries for {} rows",
                    s.len(),
                    vocab
                );
            }
        }
        if ids.is_empty() {
            bail!(Shape, "embedding lookup of zero ids");
        }
        let mut out = Tensor::zeros(&[ids.len(), dim]);
        for (row, &id) in out.data_mut().chunks_mut(dim).zip(ids) {
            if id >= vocab {
                bail!(
                    Index,
                    "token id {} out of range for vocabulary of {}",
                    id,
                    vocab
                );
            }
            let src = &tt.data()[id * dim..(id + 1) * dim];
            match &row_scale {
                Some(s) => {
                    for (o, v) in row.iter_mut().zip(src) {
                        *o = *v * s[id];
                    }
                }
                None => row.copy_from_slice(src),
            }
        }
        let tracked = self.tracked(table);
        Ok(self.push(
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
                row_scale,
            },
            tracked,
        ))
    }

    /// Pre-activation gates for one time step: rows `row0..row0+B` of the
    /// input projection plus `h W_hh`.
    pub fn recurrent_gates(&mut self, proj: Var, row0: usize, h: Var, w: Var) -> Result<Var> {
        let (pt, ht, wt) = (self.value(proj), self.value(h), self.value(w));
        let (batch, hidden) = (ht.rows(), ht.cols());
        let gates = pt.cols();
        if wt.shape() != [hidden, gates] || row0 + batch > pt.rows() {
            bail!(
                Shape,
                "recurrent gates: proj {:?} row {} h {:?} W {:?}",
                pt.shape(),
                row0,
                ht.shape(),
                wt.shape()
            );
        }
        let mut y = Tensor::from_vec(
            &[batch, gates],
            pt.data()[row0 * gates..(row0 + batch) * gates].to_vec(),
        )?;
        S::gemm(
            batch,
            hidden,
            gates,
            S::ONE,
            ht.data(),
            false,
            wt.data(),
            false,
            S::ONE,
            y.data_mut(),
        );
        check_finite("recurrent_gates", &y)?;
        let tracked = self.tracked(proj) || self.tracked(h) || self.tracked(w);
        Ok(self.push(y, Op::RecurrentGates { proj, row0, h, w }, tracked))
    }

    /// Gate nonlinearities on `[B, 4H]` laid out as `[input, forget, cell, output]`.
    pub fn gate_activations(&mut self, pre: Var) -> Result<Var> {
        let pt = self.value(pre);
        if pt.cols() % 4 != 0 {
            bail!(Shape, "gate block width {} not divisible by 4", pt.cols());
        }
        let hidden = pt.cols() / 4;
        let mut y = pt.clone();
        for row in y.data_mut().chunks_mut(4 * hidden) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if j / hidden == 2 {
                    v.tanh()
                } else {
                    v.sigmoid()
                };
            }
        }
        let tracked = self.tracked(pre);
        Ok(self.push(y, Op::GateAct { pre }, tracked))
    }

    /// `c' = f * c + i * g`.
    pub fn cell_update(&mut self, act: Var, c: Var) -> Result<Var> {
        let (at, ct) = (self.value(act), self.value(c));
        let (batch, hidden) = (ct.rows(), ct.cols());
        if at.shape() != [batch, 4 * hidden] {
            bail!(
                Shape,
                "cell update: gates {:?} vs cell {:?}",
                at.shape(),
                ct.shape()
            );
        }
        let mut y = Tensor::zeros(&[batch, hidden]);
        for b in 0..batch {
            let g = &at.data()[b * 4 * hidden..(b + 1) * 4 * hidden];
            let cr = &ct.data()[b * hidden..(b + 1) * hidden];
            for j in 0..hidden {
                y.data_mut()[b * hidden + j] = g[hidden + j] * cr[j] + g[j] * g[2 * hidden + j];
            }
        }
        check_finite("cell_update", &y)?;
        let tracked = self.tracked(act) || self.tracked(c);
        Ok(self.push(y, Op::CellUpdate { act, c }, tracked))
    }

    /// `h = o * tanh(c)`.
    pub fn hidden_output(&mut self, act: Var, c: Var) -> Result<Var> {
        let (at, ct) = (self.value(act), self.value(c));
        let (batch, hidden) = (ct.rows(), ct.cols());
        if at.shape() != [batch, 4 * hidden] {
            bail!(
                Shape,
                "hidden output: gates {:?} vs cell {:?}",
                at.shape(),
                ct.shape()
            );
        }
        let mut y = Tensor::zeros(&[batch, hidden]);
        for b in 0..batch {
            for j in 0..hidden {
                let o = at.data()[b * 4 * hidden + 3 * hidden + j];
                y.data_mut()[b * hidden + j] = o * ct.data()[b * hidden + j].tanh();
            }
        }
        let tracked = self.tracked(act) || self.tracked(c);
        Ok(self.push(y, Op::HiddenOut { act, c }, tracked))
    }

    /// One LSTM step. `b` is the combined input/recurrent bias.
    #[allow(clippy::too_many_arguments)]
    pub fn lstm_cell(
        &mut self,
        x: Var,
        h: Var,
        c: Var,
        w_ih: Var,
        w_hh: Var,
        b: Var,
    ) -> Result<(Var, Var)> {
        let proj = self.affine(x, w_ih, Some(b), false)?;
        let pre = self.recurrent_gates(proj, 0, h, w_hh)?;
        let act = self.gate_activations(pre)?;
        let c_next = self.cell_update(act, c)?;
        let h_next = self.hidden_output(act, c_next)?;
        Ok((h_next, c_next))
    }

    /// Elementwise product with a constant mask of the same size.
    pub fn mask(&mut self, x: Var, mask: &Tensor<S>) -> Result<Var> {
        let xt = self.value(x);
        if xt.len() != mask.len() {
            bail!(Shape, "mask {:?} vs input {:?}", mask.shape(), xt.shape());
        }
        let mut y = xt.clone();
        for (v, m) in y.data_mut().iter_mut().zip(mask.data()) {
            *v *= *m;
        }
        let tracked = self.tracked(x);
        Ok(self.push(
            y,
            Op::Mask {
                x,
                mask: mask.data().to_vec(),
            },
            tracked,
        ))
    }

    /// Stacks `[B_i, D]` blocks into `[sum B_i, D]`.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            bail!(Shape, "concat of zero blocks");
        }
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                bail!(Shape, "concat: width {} vs {}", t.cols(), cols);
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let y = Tensor::from_vec(&[rows, cols], data)?;
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(
            y,
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
            tracked,
        ))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let mut y = self.value(x).clone();
        for v in y.data_mut() {
            if *v < S::ZERO {
                *v = S::ZERO;
            }
        }
        let tracked = self.tracked(x);
        Ok(self.push(y, Op::Relu { x }, tracked))
    }

    /// Concat pooling over a sequence of `[B, D]` states.
    ///
    /// `valid[b * L + t]` marks real (non-pad) positions. The output row for
    /// `b` is `[state at last valid t | max over valid t | mean over valid t]`.
    pub fn concat_pool(&mut self, states: &[Var], valid: &[bool]) -> Result<Var> {
        let steps = states.len();
        if steps == 0 {
            bail!(Shape, "concat pool over zero steps");
        }
        let (batch, dim) = (self.value(states[0]).rows(), self.value(states[0]).cols());
        if valid.len() != batch * steps {
            bail!(
                Shape,
                "valid mask has {} entries for {}x{}",
                valid.len(),
                batch,
                steps
            );
        }
        let mut y = Tensor::zeros(&[batch, 3 * dim]);
        let mut last = vec![0; batch];
        let mut lengths = vec![0; batch];
        let mut argmax = vec![0; batch * dim];
        for b in 0..batch {
            let ts: Vec<usize> = (0..steps).filter(|&t| valid[b * steps + t]).collect();
            if ts.is_empty() {
                bail!(Shape, "sequence {} has no valid positions", b);
            }
            last[b] = *ts.last().unwrap();
            lengths[b] = ts.len();
            let inv_len = S::ONE / S::from_f64(ts.len() as f64);
            let row = &mut y.data_mut()[b * 3 * dim..(b + 1) * 3 * dim];
            for j in 0..dim {
                let at = |t: usize| self.value(states[t]).data()[b * dim + j];
                row[j] = at(last[b]);
                let mut best_t = ts[0];
                let mut sum = S::ZERO;
                for &t in &ts {
                    let v = at(t);
                    if v > at(best_t) {
                        best_t = t;
                    }
                    sum += v;
                }
                argmax[b * dim + j] = best_t;
                row[dim + j] = at(best_t);
                row[2 * dim + j] = sum * inv_len;
            }
        }
        let tracked = states.iter().any(|&s| self.tracked(s));
        Ok(self.push(
            y,
            Op::ConcatPool {
                states: states.to_vec(),
                last,
                argmax,
                valid: valid.to_vec(),
                lengths,
            },
            tracked,
        ))
    }

    /// Mean cross-entropy of `softmax(logits)` against integer targets;
    /// returns a scalar node.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let lt = self.value(logits);
        let (n, classes) = (lt.rows(), lt.cols());
        if targets.len() != n {
            bail!(Shape, "{} targets for {} logit rows", targets.len(), n);
        }
        let probs = softmax_rows(lt.data(), classes);
        let mut loss = 0.0f64;
        for (i, &t) in targets.iter().enumerate() {
            if t >= classes {
                bail!(Index, "target {} out of range for {} classes", t, classes);
            }
            // log-softmax directly, so tiny probabilities do not underflow to ln 0
            let row = &lt.data()[i * classes..(i + 1) * classes];
            let max = row.iter().copied().fold(row[0], S::max_of);
            let z: S = row.iter().fold(S::ZERO, |acc, &v| acc + (v - max).exp());
            loss -= (row[t] - max - z.ln()).to_f64();
        }
        let y = Tensor::from_vec(&[1], vec![S::from_f64(loss / n as f64)])?;
        check_finite("softmax_cross_entropy", &y)?;
        let tracked = self.tracked(logits);
        Ok(self.push(
            y,
            Op::SoftmaxCe {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            tracked,
        ))
    }

    /// `sum(x * w)` against a constant weight vector. Reduces any tensor to a
    /// scalar, which is how gradient checks probe non-scalar operators.
    pub fn dot_const(&mut self, x: Var, w: &[S]) -> Result<Var> {
        let xt = self.value(x);
        if xt.len() != w.len() {
            bail!(
                Shape,
                "dot with {} weights for {} values",
                w.len(),
                xt.len()
            );
        }
        let s = xt
            .data()
            .iter()
            .zip(w)
            .fold(S::ZERO, |acc, (&a, &b)| acc + a * b);
        let y = Tensor::from_vec(&[1], vec![s])?;
        let tracked = self.tracked(x);
        Ok(self.push(y, Op::DotConst { x, w: w.to_vec() }, tracked))
    }

    fn run_backward(&self, loss: Var) -> Result<Vec<Option<Vec<S>>>> {
        if self.value(loss).len() != 1 {
            bail!(
                Shape,
                "backward needs a scalar, got {:?}",
                self.value(loss).shape()
            );
        }
        let mut grads: Vec<Option<Vec<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![S::ONE]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            let dy = match &node.op {
                Op::Leaf | Op::Param(_) => continue,
                _ => match grads[i].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            self.backward_node(i, &dy, &mut grads);
        }
        Ok(grads)
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<S>>], v: Var) -> Option<&'g mut Vec<S>> {
        if !self.nodes[v.0].tracked {
            return None;
        }
        let n = self.value(v).len();
        Some(grads[v.0].get_or_insert_with(|| vec![S::ZERO; n]))
    }

    fn backward_node(&self, i: usize, dy: &[S], grads: &mut [Option<Vec<S>>]) {
        match &self.nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            Op::Affine {
                x,
                w,
                b,
                transpose_w,
            } => {
                let (xt, wt) = (self.value(*x), self.value(*w));
                let (batch, inp) = (xt.shape()[0], xt.shape()[1]);
                let out = dy.len() / batch;
                if let Some(dx) = self.acc(grads, *x) {
                    // dx = dy op(W)^T
                    S::gemm(
                        batch,
                        out,
                        inp,
                        S::ONE,
                        dy,
                        false,
                        wt.data(),
                        !*transpose_w,
                        S::ONE,
                        dx,
                    );
                }
                if let Some(dw) = self.acc(grads, *w) {
                    if *transpose_w {
                        S::gemm(
                            out,
                            batch,
                            inp,
                            S::ONE,
                            dy,
                            true,
                            xt.data(),
                            false,
                            S::ONE,
                            dw,
                        );
                    } else {
                        S::gemm(
                            inp,
                            batch,
                            out,
                            S::ONE,
                            xt.data(),
                            true,
                            dy,
                            false,
                            S::ONE,
                            dw,
                        );
                    }
                }
                if let Some(b) = b {
                    if let Some(db) = self.acc(grads, *b) {
                        for row in dy.chunks(out) {
                            add_into(db, row);
                        }
                    }
                }
            }
            Op::Embedding {
                table,
                ids,
                row_scale,
            } => {
                let dim = self.value(*table).cols();
                if let Some(dt) = self.acc(grads, *table) {
                    for (row, &id) in dy.chunks(dim).zip(ids) {
                        let dst = &mut dt[id * dim..(id + 1) * dim];
                        match row_scale {
                            Some(s) => {
                                for (d, g) in dst.iter_mut().zip(row) {
                                    *d += *g * s[id];
                                }
                            }
                            None => add_into(dst, row),
                        }
                    }
                }
            }
            Op::RecurrentGates { proj, row0, h, w } => {
                let (ht, wt) = (self.value(*h), self.value(*w));
                let (batch, hidden) = (ht.rows(), ht.cols());
                let gates = wt.cols();
                if let Some(dp) = self.acc(grads, *proj) {
                    add_into(&mut dp[row0 * gates..(row0 + batch) * gates], dy);
                }
                if let Some(dh) = self.acc(grads, *h) {
                    S::gemm(
                        batch,
                        gates,
                        hidden,
                        S::ONE,
                        dy,
                        false,
                        wt.data(),
                        true,
                        S::ONE,
                        dh,
                    );
                }
                if let Some(dw) = self.acc(grads, *w) {
                    S::gemm(
                        hidden,
                        batch,
                        gates,
                        S::ONE,
                        ht.data(),
                        true,
                        dy,
                        false,
                        S::ONE,
                        dw,
                    );
                }
            }
            Op::GateAct { pre } => {
                let y = self.nodes[i].value.as_ref().unwrap();
                let hidden = y.cols() / 4;
                if let Some(dp) = self.acc(grads, *pre) {
                    for (k, (d, (&g, &a))) in dp.iter_mut().zip(dy.iter().zip(y.data())).enumerate()
                    {
                        let local = if (k % (4 * hidden)) / hidden == 2 {
                            S::ONE - a * a
                        } else {
                            a * (S::ONE - a)
                        };
                        *d += g * local;
                    }
                }
            }
            Op::CellUpdate { act, c } => {
                let (at, ct) = (self.value(*act), self.value(*c));
                let (batch, hidden) = (ct.rows(), ct.cols());
                if let Some(da) = self.acc(grads, *act) {
                    for b in 0..batch {
                        let g = &at.data()[b * 4 * hidden..(b + 1) * 4 * hidden];
                        let d = &mut da[b * 4 * hidden..(b + 1) * 4 * hidden];
                        for j in 0..hidden {
                            let up = dy[b * hidden + j];
                            d[j] += up * g[2 * hidden + j];
                            d[hidden + j] += up * ct.data()[b * hidden + j];
                            d[2 * hidden + j] += up * g[j];
                        }
                    }
                }
                if let Some(dc) = self.acc(grads, *c) {
                    for b in 0..batch {
                        for j in 0..hidden {
                            dc[b * hidden + j] +=
                                dy[b * hidden + j] * at.data()[b * 4 * hidden + hidden + j];
                        }
                    }
                }
            }
            Op::HiddenOut { act, c } => {
                let (at, ct) = (self.value(*act), self.value(*c));
                let (batch, hidden) = (ct.rows(), ct.cols());
                if let Some(da) = self.acc(grads, *act) {
                    for b in 0..batch {
                        for j in 0..hidden {
                            da[b * 4 * hidden + 3 * hidden + j] +=
                                dy[b * hidden + j] * ct.data()[b * hidden + j].tanh();
                        }
                    }
                }
                if let Some(dc) = self.acc(grads, *c) {
                    for b in 0..batch {
                        for j in 0..hidden {
                            let th = ct.data()[b * hidden + j].tanh();
                            let o = at.data()[b * 4 * hidden + 3 * hidden + j];
                            dc[b * hidden + j] += dy[b * hidden + j] * o * (S::ONE - th * th);
                        }
                    }
                }
            }
            Op::Mask { x, mask } => {
                if let Some(dx) = self.acc(grads, *x) {
                    for (d, (&g, &m)) in dx.iter_mut().zip(dy.iter().zip(mask)) {
                        *d += g * m;
                    }
                }
            }
            Op::ConcatRows { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    if let Some(dp) = self.acc(grads, p) {
                        add_into(dp, &dy[offset..offset + n]);
                    }
                    offset += n;
                }
            }
            Op::Relu { x } => {
                let xt = self.value(*x);
                if let Some(dx) = self.acc(grads, *x) {
                    for (d, (&g, &v)) in dx.iter_mut().zip(dy.iter().zip(xt.data())) {
                        if v > S::ZERO {
                            *d += g;
                        }
                    }
                }
            }
            Op::ConcatPool {
                states,
                last,
                argmax,
                valid,
                lengths,
            } => {
                let steps = states.len();
                let (batch, dim) = (self.value(states[0]).rows(), self.value(states[0]).cols());
                for (t, &s) in states.iter().enumerate() {
                    let Some(ds) = self.acc(grads, s) else {
                        continue;
                    };
                    for b in 0..batch {
                        if !valid[b * steps + t] {
                            continue;
                        }
                        let inv_len = S::ONE / S::from_f64(lengths[b] as f64);
                        let g = &dy[b * 3 * dim..(b + 1) * 3 * dim];
                        for j in 0..dim {
                            let mut d = g[2 * dim + j] * inv_len;
                            if last[b] == t {
                                d += g[j];
                            }
                            if argmax[b * dim + j] == t {
                                d += g[dim + j];
                            }
                            ds[b * dim + j] += d;
                        }
                    }
                }
            }
            Op::SoftmaxCe {
                logits,
                targets,
                probs,
            } => {
                let classes = self.value(*logits).cols();
                let scale = dy[0] / S::from_f64(targets.len() as f64);
                if let Some(dl) = self.acc(grads, *logits) {
                    for (r, &t) in targets.iter().enumerate() {
                        let row = &mut dl[r * classes..(r + 1) * classes];
                        for (c, d) in row.iter_mut().enumerate() {
                            let onehot = if c == t { S::ONE } else { S::ZERO };
                            *d += (probs[r * classes + c] - onehot) * scale;
                        }
                    }
                }
            }
            Op::DotConst { x, w } => {
                if let Some(dx) = self.acc(grads, *x) {
                    for (d, &wv) in dx.iter_mut().zip(w) {
                        *d += dy[0] * wv;
                    }
                }
            }
        }
    }

    /// Backpropagates a scalar loss and adds parameter gradients into `grads`.
    pub fn backward(&self, loss: Var, grads: &mut ParamGrads<S>) -> Result<()> {
        let node_grads = self.run_backward(loss)?;
        for (node, g) in self.nodes.iter().zip(node_grads) {
            if let (Op::Param(id), Some(g)) = (&node.op, g) {
                for v in &g {
                    if !v.is_finite() {
                        bail!(Numerics, "non-finite gradient for parameter #{}", id.0);
                    }
                }
                add_into(grads.get_mut(*id), &g);
            }
        }
        Ok(())
    }

    /// Backpropagates a scalar loss and returns the gradients of tracked leaves.
    pub fn backward_leaves(&self, loss: Var) -> Result<LeafGrads<S>> {
        let mut grads = self.run_backward(loss)?;
        for (k, node) in self.nodes.iter().enumerate() {
            match node.op {
                Op::Leaf if node.tracked => {
                    if grads[k].is_none() {
                        grads[k] = Some(vec![S::ZERO; self.value(Var(k)).len()]);
                    }
                }
                _ => grads[k] = None,
            }
        }
        Ok(LeafGrads { grads })
    }
}

/// Row-wise softmax of a `[N, C]` buffer with max subtraction.
pub fn softmax_rows<S: Scalar>(logits: &[S], classes: usize) -> Vec<S> {
    let mut out = logits.to_vec();
    for row in out.chunks_mut(classes) {
        let max = row.iter().copied().fold(row[0], S::max_of);
        let mut z = S::ZERO;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v = *v / z;
        }
    }
    out
}
