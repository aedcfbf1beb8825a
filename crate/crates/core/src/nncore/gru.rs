use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;

use super::init::uniform_matrix;
use super::scalar::{sigmoid, Scalar};
use crate::{Error, Result};

/// GRU weights: gate block `[m; r] = sigmoid(w_h h + w_x x)` and candidate
/// `tanh(w x + u (r * h))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<F> {
    /// `(2 hidden, hidden)`
    pub w_h: Array2<F>,
    /// `(2 hidden, input)`
    pub w_x: Array2<F>,
    /// `(hidden, input)`
    pub w: Array2<F>,
    /// `(hidden, hidden)`
    pub u: Array2<F>,
}

impl<F: Scalar> GruParams<F> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        GruParams {
            w_h: Array2::zeros((2 * hidden, hidden)),
            w_x: Array2::zeros((2 * hidden, input)),
            w: Array2::zeros((hidden, input)),
            u: Array2::zeros((hidden, hidden)),
        }
    }

    pub fn random<R: Rng + ?Sized>(hidden: usize, input: usize, scale: f64, rng: &mut R) -> Self {
        GruParams {
            w_h: uniform_matrix(2 * hidden, hidden, scale, rng),
            w_x: uniform_matrix(2 * hidden, input, scale, rng),
            w: uniform_matrix(hidden, input, scale, rng),
            u: uniform_matrix(hidden, hidden, scale, rng),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let (h, i) = (self.hidden_dim(), self.input_dim());
        let ok = self.w_h.dim() == (2 * h, h)
            && self.w_x.dim() == (2 * h, i)
            && self.w.dim() == (h, i)
            && self.u.dim() == (h, h);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "inconsistent GRU shapes w_h {:?} w_x {:?} w {:?} u {:?}",
                self.w_h.dim(),
                self.w_x.dim(),
                self.w.dim(),
                self.u.dim()
            )))
        }
    }

    pub fn step(&self, h_prev: ArrayView1<F>, x: ArrayView1<F>) -> Array1<F> {
        gru_step(self, h_prev, x)
    }
}

/// A GRU whose gate and candidate pre-activations also receive `c_g z` and
/// `c_c z` at every step.
#[derive(Clone, Debug, PartialEq)]
pub struct CondGruParams<F> {
    pub gru: GruParams<F>,
    /// `(2 hidden, d_z)`
    pub c_g: Array2<F>,
    /// `(hidden, d_z)`
    pub c_c: Array2<F>,
}

impl<F: Scalar> CondGruParams<F> {
    pub fn zeros(hidden: usize, input: usize, cond: usize) -> Self {
        CondGruParams {
            gru: GruParams::zeros(hidden, input),
            c_g: Array2::zeros((2 * hidden, cond)),
            c_c: Array2::zeros((hidden, cond)),
        }
    }

    pub fn random<R: Rng + ?Sized>(hidden: usize, input: usize, cond: usize, scale: f64, rng: &mut R) -> Self {
        let gru = GruParams::random(hidden, input, scale, rng);
        CondGruParams {
            gru,
            c_g: uniform_matrix(2 * hidden, cond, scale, rng),
            c_c: uniform_matrix(hidden, cond, scale, rng),
        }
    }

    pub fn cond_dim(&self) -> usize {
        self.c_c.ncols()
    }

    pub fn check_shapes(&self) -> Result<()> {
        self.gru.check_shapes()?;
        let h = self.gru.hidden_dim();
        if self.c_g.dim() != (2 * h, self.cond_dim()) || self.c_c.nrows() != h {
            return Err(Error::Shape(format!(
                "conditioning shapes c_g {:?} c_c {:?} for hidden {h}",
                self.c_g.dim(),
                self.c_c.dim()
            )));
        }
        Ok(())
    }

    /// Additive conditioning terms `(z c_g^T, z c_c^T)` for a batch of `z`
    /// rows. They are constant over a decode, so they are computed once.
    pub(crate) fn conditioning(&self, z: ArrayView2<F>) -> (Array2<F>, Array2<F>) {
        (z.dot(&self.c_g.t()), z.dot(&self.c_c.t()))
    }
}

/// Word-probability head: `logits = v h + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputProjection<F> {
    /// `(vocab, hidden)`
    pub v: Array2<F>,
    /// `(vocab)`
    pub b: Array1<F>,
}

impl<F: Scalar> OutputProjection<F> {
    pub fn zeros(vocab: usize, hidden: usize) -> Self {
        OutputProjection {
            v: Array2::zeros((vocab, hidden)),
            b: Array1::zeros(vocab),
        }
    }

    pub fn random<R: Rng + ?Sized>(vocab: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        OutputProjection {
            v: uniform_matrix(vocab, hidden, scale, rng),
            b: Array1::zeros(vocab),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.b.len()
    }

    pub(crate) fn logits(&self, h: ArrayView2<F>) -> Array2<F> {
        let mut out = h.dot(&self.v.t());
        out += &self.b;
        out
    }
}

/// Activations kept from a forward step for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct StepCache<F> {
    pub h_prev: Array2<F>,
    pub x: Array2<F>,
    pub m: Array2<F>,
    pub r: Array2<F>,
    pub cand: Array2<F>,
    pub rh: Array2<F>,
}

/// One batched GRU step. `gate_extra` and `cand_extra` are added to the gate
/// and candidate pre-activations (the conditioning terms of the decoder).
pub(crate) fn step_forward<F: Scalar>(
    p: &GruParams<F>,
    h_prev: ArrayView2<F>,
    x: ArrayView2<F>,
    gate_extra: Option<ArrayView2<F>>,
    cand_extra: Option<ArrayView2<F>>,
) -> (Array2<F>, StepCache<F>) {
    let d = p.hidden_dim();
    let mut gates = h_prev.dot(&p.w_h.t());
    general_mat_mul(F::one(), &x, &p.w_x.t(), F::one(), &mut gates);
    if let Some(g) = gate_extra {
        gates += &g;
    }
    gates.mapv_inplace(sigmoid);
    let m = gates.slice(s![.., ..d]).to_owned();
    let r = gates.slice(s![.., d..]).to_owned();
    let rh = &r * &h_prev;
    let mut cand = x.dot(&p.w.t());
    general_mat_mul(F::one(), &rh, &p.u.t(), F::one(), &mut cand);
    if let Some(c) = cand_extra {
        cand += &c;
    }
    cand.mapv_inplace(F::tanh);
    let mut h = Array2::zeros(h_prev.raw_dim());
    Zip::from(&mut h)
        .and(&m)
        .and(&h_prev)
        .and(&cand)
        .for_each(|h, &m, &hp, &c| *h = (F::one() - m) * hp + m * c);
    let cache = StepCache {
        h_prev: h_prev.to_owned(),
        x: x.to_owned(),
        m,
        r,
        cand,
        rh,
    };
    (h, cache)
}

/// Gradients flowing out of one step.
pub(crate) struct StepGrad<F> {
    pub dh_prev: Array2<F>,
    pub dx: Array2<F>,
    /// Gradient w.r.t. the gate pre-activation, `(batch, 2 hidden)`.
    pub dgate: Array2<F>,
    /// Gradient w.r.t. the candidate pre-activation, `(batch, hidden)`.
    pub dcand: Array2<F>,
}

/// Backward through [`step_forward`], accumulating weight gradients into
/// `grads`.
pub(crate) fn step_backward<F: Scalar>(
    p: &GruParams<F>,
    c: &StepCache<F>,
    dh: ArrayView2<F>,
    grads: &mut GruParams<F>,
) -> StepGrad<F> {
    let one = F::one();
    let mut dcand = Array2::zeros(dh.raw_dim());
    Zip::from(&mut dcand)
        .and(&dh)
        .and(&c.m)
        .and(&c.cand)
        .for_each(|o, &g, &m, &cd| *o = g * m * (one - cd * cd));
    let mut dm = Array2::zeros(dh.raw_dim());
    Zip::from(&mut dm)
        .and(&dh)
        .and(&c.cand)
        .and(&c.h_prev)
        .for_each(|o, &g, &cd, &hp| *o = g * (cd - hp));
    let mut dh_prev = &dh * &c.m.mapv(|m| one - m);

    general_mat_mul(one, &dcand.t(), &c.x, one, &mut grads.w);
    general_mat_mul(one, &dcand.t(), &c.rh, one, &mut grads.u);
    let mut dx = dcand.dot(&p.w);
    let drh = dcand.dot(&p.u);
    let dr = &drh * &c.h_prev;
    dh_prev += &(&drh * &c.r);

    let dm_pre = &dm * &c.m.mapv(|m| m * (one - m));
    let dr_pre = &dr * &c.r.mapv(|r| r * (one - r));
    let dgate = concatenate(Axis(1), &[dm_pre.view(), dr_pre.view()]).expect("gate halves");
    general_mat_mul(one, &dgate.t(), &c.h_prev, one, &mut grads.w_h);
    general_mat_mul(one, &dgate.t(), &c.x, one, &mut grads.w_x);
    general_mat_mul(one, &dgate, &p.w_h, one, &mut dh_prev);
    general_mat_mul(one, &dgate, &p.w_x, one, &mut dx);
    StepGrad {
        dh_prev,
        dx,
        dgate,
        dcand,
    }
}

fn row<F: Scalar>(v: ArrayView1<F>) -> ArrayView2<F> {
    v.insert_axis(Axis(0))
}

/// Single GRU step on one hidden vector. Panics if shapes disagree.
pub fn gru_step<F: Scalar>(p: &GruParams<F>, h_prev: ArrayView1<F>, x: ArrayView1<F>) -> Array1<F> {
    assert_eq!(h_prev.len(), p.hidden_dim(), "hidden size mismatch");
    assert_eq!(x.len(), p.input_dim(), "input size mismatch");
    let (h, _) = step_forward(p, row(h_prev), row(x), None, None);
    h.row(0).to_owned()
}

/// Single conditional GRU step. Panics if shapes disagree.
pub fn cond_gru_step<F: Scalar>(
    p: &CondGruParams<F>,
    h_prev: ArrayView1<F>,
    x: ArrayView1<F>,
    z: ArrayView1<F>,
) -> Array1<F> {
    assert_eq!(h_prev.len(), p.gru.hidden_dim(), "hidden size mismatch");
    assert_eq!(x.len(), p.gru.input_dim(), "input size mismatch");
    assert_eq!(z.len(), p.cond_dim(), "conditioning size mismatch");
    let (zg, zc) = p.conditioning(row(z));
    let (h, _) = step_forward(&p.gru, row(h_prev), row(x), Some(zg.view()), Some(zc.view()));
    h.row(0).to_owned()
}
