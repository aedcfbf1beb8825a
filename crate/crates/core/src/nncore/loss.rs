use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::Scalar;
use crate::corpus::EncodedSentence;

/// Max-shifted log-softmax.
pub fn log_softmax<F: Scalar>(logits: ArrayView1<F>) -> Array1<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let log_z = logits.iter().map(|&l| (l - max).exp()).sum::<F>().ln() + max;
    logits.mapv(|l| l - log_z)
}

/// Summed negative log-likelihood of `target` under per-step `logits`
/// `(len, vocab)`. Padding positions contribute nothing.
pub fn nll_loss<F: Scalar>(logits: ArrayView2<F>, target: &EncodedSentence) -> F {
    assert_eq!(logits.nrows(), target.len(), "logits length mismatch");
    let mut total = F::zero();
    for (t, (&id, &real)) in target.ids.iter().zip(&target.mask).enumerate() {
        if real {
            total -= log_softmax(logits.row(t))[id];
        }
    }
    total
}

/// Row-wise NLL for one decoding step across a batch. Returns the unscaled
/// loss sum and `scale * (softmax - onehot)` on unmasked rows, zero elsewhere.
pub(crate) fn nll_rows_with_grad<F: Scalar>(
    logits: ArrayView2<F>,
    ids: &[usize],
    mask: &[bool],
    scale: F,
) -> (F, Array2<F>) {
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = F::zero();
    for (b, row) in logits.rows().into_iter().enumerate() {
        if !mask[b] {
            continue;
        }
        let lsm = log_softmax(row);
        total -= lsm[ids[b]];
        let mut g = grad.row_mut(b);
        for (o, &l) in g.iter_mut().zip(lsm.iter()) {
            *o = l.exp() * scale;
        }
        g[ids[b]] -= scale;
    }
    (total, grad)
}
