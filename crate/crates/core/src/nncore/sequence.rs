use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::gru::{step_backward, step_forward, CondGruParams, GruParams, OutputProjection, StepCache};
use super::Scalar;
use crate::corpus::{EncodedSentence, GO};

/// Reading order of an encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

struct EncodeStep<F> {
    rows: Vec<usize>,
    ids: Vec<usize>,
    cache: StepCache<F>,
}

pub(crate) struct EncodeTrace<F> {
    steps: Vec<EncodeStep<F>>,
}

/// Runs the encoder over a batch of equal-length sentences. At each position
/// only rows whose mask is set are stepped; the others carry their state
/// unchanged, so the result is the state after the last real token.
pub(crate) fn encode_batch<F: Scalar>(
    p: &GruParams<F>,
    emb: ArrayView2<F>,
    batch: &[&EncodedSentence],
    dir: Direction,
    keep_trace: bool,
) -> (Array2<F>, Option<EncodeTrace<F>>) {
    let n = batch.len();
    let len = batch.first().map_or(0, |s| s.len());
    assert!(batch.iter().all(|s| s.len() == len), "batch sentences differ in length");
    let mut h = Array2::zeros((n, p.hidden_dim()));
    let mut steps = Vec::new();
    let positions: Vec<usize> = match dir {
        Direction::Forward => (0..len).collect(),
        Direction::Backward => (0..len).rev().collect(),
    };
    for t in positions {
        let rows: Vec<usize> = (0..n).filter(|&b| batch[b].mask[t]).collect();
        if rows.is_empty() {
            continue;
        }
        let ids: Vec<usize> = rows.iter().map(|&b| batch[b].ids[t]).collect();
        let x = emb.select(Axis(0), &ids);
        let hp = h.select(Axis(0), &rows);
        let (hn, cache) = step_forward(p, hp.view(), x.view(), None, None);
        for (k, &b) in rows.iter().enumerate() {
            h.row_mut(b).assign(&hn.row(k));
        }
        if keep_trace {
            steps.push(EncodeStep { rows, ids, cache });
        }
    }
    (h, keep_trace.then_some(EncodeTrace { steps }))
}

/// Backward through [`encode_batch`] given the gradient of the final states.
pub(crate) fn encode_backward<F: Scalar>(
    p: &GruParams<F>,
    trace: &EncodeTrace<F>,
    dh_final: Array2<F>,
    grads: &mut GruParams<F>,
    demb: &mut Array2<F>,
) {
    let mut dh = dh_final;
    for step in trace.steps.iter().rev() {
        let dh_sub = dh.select(Axis(0), &step.rows);
        let g = step_backward(p, &step.cache, dh_sub.view(), grads);
        for (k, &b) in step.rows.iter().enumerate() {
            dh.row_mut(b).assign(&g.dh_prev.row(k));
        }
        for (k, &id) in step.ids.iter().enumerate() {
            let mut r = demb.row_mut(id);
            r += &g.dx.row(k);
        }
    }
}

pub(crate) struct DecodeTrace<F> {
    steps: Vec<StepCache<F>>,
    hidden: Vec<Array2<F>>,
    inputs: Vec<Vec<usize>>,
    z: Array2<F>,
}

/// Teacher-forced decoding of a batch of equal-length targets conditioned on
/// the rows of `z`. Step 0 reads GO; step `t` reads target token `t - 1`.
/// Returns one `(batch, vocab)` logit matrix per position.
pub(crate) fn decode_batch<F: Scalar>(
    cell: &CondGruParams<F>,
    proj: &OutputProjection<F>,
    emb: ArrayView2<F>,
    z: ArrayView2<F>,
    targets: &[&EncodedSentence],
) -> (Vec<Array2<F>>, DecodeTrace<F>) {
    let n = targets.len();
    assert_eq!(z.nrows(), n, "one conditioning row per target");
    let len = targets.first().map_or(0, |s| s.len());
    assert!(targets.iter().all(|s| s.len() == len), "batch targets differ in length");
    let (zg, zc) = cell.conditioning(z);
    let mut h = Array2::zeros((n, cell.gru.hidden_dim()));
    let mut logits = Vec::with_capacity(len);
    let mut trace = DecodeTrace {
        steps: Vec::with_capacity(len),
        hidden: Vec::with_capacity(len),
        inputs: Vec::with_capacity(len),
        z: z.to_owned(),
    };
    for t in 0..len {
        let inputs: Vec<usize> = targets
            .iter()
            .map(|s| if t == 0 { GO } else { s.ids[t - 1] })
            .collect();
        let x = emb.select(Axis(0), &inputs);
        let (hn, cache) = step_forward(&cell.gru, h.view(), x.view(), Some(zg.view()), Some(zc.view()));
        logits.push(proj.logits(hn.view()));
        trace.steps.push(cache);
        trace.hidden.push(hn.clone());
        trace.inputs.push(inputs);
        h = hn;
    }
    (logits, trace)
}

/// Backward through [`decode_batch`] given per-position logit gradients.
/// Accumulates into the decoder gradients, the embedding gradient and `dz`.
pub(crate) fn decode_backward<F: Scalar>(
    cell: &CondGruParams<F>,
    proj: &OutputProjection<F>,
    trace: &DecodeTrace<F>,
    dlogits: &[Array2<F>],
    cell_grads: &mut CondGruParams<F>,
    proj_grads: &mut OutputProjection<F>,
    demb: &mut Array2<F>,
    dz: &mut Array2<F>,
) {
    let one = F::one();
    let n = trace.z.nrows();
    let d = cell.gru.hidden_dim();
    let mut dh_next: Array2<F> = Array2::zeros((n, d));
    let mut dzg: Array2<F> = Array2::zeros((n, 2 * d));
    let mut dzc: Array2<F> = Array2::zeros((n, d));
    for t in (0..trace.steps.len()).rev() {
        let dl = &dlogits[t];
        general_mat_mul(one, &dl.t(), &trace.hidden[t], one, &mut proj_grads.v);
        proj_grads.b += &dl.sum_axis(Axis(0));
        let mut dh = dh_next;
        general_mat_mul(one, dl, &proj.v, one, &mut dh);
        let g = step_backward(&cell.gru, &trace.steps[t], dh.view(), &mut cell_grads.gru);
        dzg += &g.dgate;
        dzc += &g.dcand;
        for (k, &id) in trace.inputs[t].iter().enumerate() {
            let mut r = demb.row_mut(id);
            r += &g.dx.row(k);
        }
        dh_next = g.dh_prev;
    }
    general_mat_mul(one, &dzg.t(), &trace.z, one, &mut cell_grads.c_g);
    general_mat_mul(one, &dzc.t(), &trace.z, one, &mut cell_grads.c_c);
    general_mat_mul(one, &dzg, &cell.c_g, one, dz);
    general_mat_mul(one, &dzc, &cell.c_c, one, dz);
}

/// Final encoder state for one sentence; `h_0 = 0`, masked positions are
/// skipped. An all-padding sentence encodes to zero.
pub fn encode_sequence<F: Scalar>(
    p: &GruParams<F>,
    emb: ArrayView2<F>,
    s: &EncodedSentence,
    dir: Direction,
) -> Array1<F> {
    let (h, _) = encode_batch(p, emb, &[s], dir, false);
    h.row(0).to_owned()
}

/// Teacher-forced logits `(len, vocab)` for one target conditioned on `z`.
pub fn decode_logits<F: Scalar>(
    cell: &CondGruParams<F>,
    proj: &OutputProjection<F>,
    emb: ArrayView2<F>,
    z: ArrayView1<F>,
    target: &EncodedSentence,
) -> Array2<F> {
    let zr = z.insert_axis(Axis(0));
    let (steps, _) = decode_batch(cell, proj, emb, zr, &[target]);
    let mut out = Array2::zeros((steps.len(), proj.vocab_size()));
    for (t, l) in steps.iter().enumerate() {
        out.row_mut(t).assign(&l.row(0));
    }
    out
}
