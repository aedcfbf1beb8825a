use ndarray::{Array, ArrayBase, Data, Dimension};

use crate::models::Params;
use crate::nncore::Scalar;

/// Clamps every component into `[-c, c]`. This is element-wise, not a
/// rescaling by the gradient norm.
pub fn clip_gradient<F, S, D>(g: &ArrayBase<S, D>, c: F) -> Array<F, D>
where
    F: Scalar,
    S: Data<Elem = F>,
    D: Dimension,
{
    assert!(c > F::zero(), "clip bound must be positive");
    g.mapv(|x| x.max(-c).min(c))
}

/// In-place [`clip_gradient`] over every key.
pub fn clip_params<F: Scalar>(grads: &mut Params<F>, c: F) {
    assert!(c > F::zero(), "clip bound must be positive");
    for (_, mut t) in grads.tensors_mut() {
        t.mapv_inplace(|x| x.max(-c).min(c));
    }
}
