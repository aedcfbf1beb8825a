use std::collections::BTreeMap;

use ndarray::{Array2, ArrayD, ArrayViewD, ArrayViewMutD};

use crate::nncore::{CondGruParams, GruParams, OutputProjection, Scalar};

/// One decoder parameter group: the conditional GRU and its word head.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderParams<F> {
    pub cell: CondGruParams<F>,
    pub out: OutputProjection<F>,
}

/// Every learnable array of a model. The embedding table is shared by the
/// encoder and all decoder inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<F> {
    pub embedding: Array2<F>,
    /// One entry per encoder direction (forward first).
    pub encoders: Vec<GruParams<F>>,
    pub decoders: Vec<DecoderParams<F>>,
}

fn encoder_prefix(count: usize, idx: usize) -> &'static str {
    match (count, idx) {
        (1, _) => "encoder",
        (_, 0) => "encoder.fwd",
        _ => "encoder.bwd",
    }
}

fn decoder_prefix(count: usize, idx: usize) -> &'static str {
    match count {
        1 => "decoder",
        2 => ["decoder.prev", "decoder.next"][idx],
        _ => ["decoder.prev", "decoder.self", "decoder.next"][idx],
    }
}

impl<F: Scalar> Params<F> {
    /// Named views of all arrays in canonical order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        let mut out = vec![("embedding".to_string(), self.embedding.view().into_dyn())];
        let ne = self.encoders.len();
        for (i, e) in self.encoders.iter().enumerate() {
            let p = encoder_prefix(ne, i);
            push_gru(&mut out, p, e);
        }
        let nd = self.decoders.len();
        for (i, d) in self.decoders.iter().enumerate() {
            let p = decoder_prefix(nd, i);
            push_gru(&mut out, p, &d.cell.gru);
            out.push((format!("{p}.c_g"), d.cell.c_g.view().into_dyn()));
            out.push((format!("{p}.c_c"), d.cell.c_c.view().into_dyn()));
            out.push((format!("{p}.out.v"), d.out.v.view().into_dyn()));
            out.push((format!("{p}.out.b"), d.out.b.view().into_dyn()));
        }
        out
    }

    /// Mutable counterpart of [`Params::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        let Params {
            embedding,
            encoders,
            decoders,
        } = self;
        let mut out = vec![("embedding".to_string(), embedding.view_mut().into_dyn())];
        let ne = encoders.len();
        for (i, e) in encoders.iter_mut().enumerate() {
            push_gru_mut(&mut out, encoder_prefix(ne, i), e);
        }
        let nd = decoders.len();
        for (i, d) in decoders.iter_mut().enumerate() {
            let p = decoder_prefix(nd, i);
            let DecoderParams { cell, out: proj } = d;
            let CondGruParams { gru, c_g, c_c } = cell;
            push_gru_mut(&mut out, p, gru);
            out.push((format!("{p}.c_g"), c_g.view_mut().into_dyn()));
            out.push((format!("{p}.c_c"), c_c.view_mut().into_dyn()));
            let OutputProjection { v, b } = proj;
            out.push((format!("{p}.out.v"), v.view_mut().into_dyn()));
            out.push((format!("{p}.out.b"), b.view_mut().into_dyn()));
        }
        out
    }

    pub fn to_map(&self) -> BTreeMap<String, ArrayD<F>> {
        self.tensors().into_iter().map(|(k, v)| (k, v.to_owned())).collect()
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| F::zero())
    }

    /// Element-wise conversion to another scalar type.
    pub fn cast<G: Scalar>(&self) -> Params<G> {
        self.map(|x| G::of(x.as_f64()))
    }

    fn map<G: Scalar>(&self, f: impl Fn(F) -> G + Copy) -> Params<G> {
        let gru = |g: &GruParams<F>| GruParams {
            w_h: g.w_h.mapv(f),
            w_x: g.w_x.mapv(f),
            w: g.w.mapv(f),
            u: g.u.mapv(f),
        };
        Params {
            embedding: self.embedding.mapv(f),
            encoders: self.encoders.iter().map(gru).collect(),
            decoders: self
                .decoders
                .iter()
                .map(|d| DecoderParams {
                    cell: CondGruParams {
                        gru: gru(&d.cell.gru),
                        c_g: d.cell.c_g.mapv(f),
                        c_c: d.cell.c_c.mapv(f),
                    },
                    out: OutputProjection {
                        v: d.out.v.mapv(f),
                        b: d.out.b.mapv(f),
                    },
                })
                .collect(),
        }
    }

    /// Scalar count per key, canonical order.
    pub fn counts(&self) -> Vec<(String, usize)> {
        self.tensors().into_iter().map(|(k, v)| (k, v.len())).collect()
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|(_, v)| v.len()).sum()
    }

    /// `self += other`, key by key.
    pub fn add_assign(&mut self, other: &Params<F>) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a += &b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, v)| v.iter().all(|x| x.is_finite()))
    }
}

fn push_gru<'a, F>(out: &mut Vec<(String, ArrayViewD<'a, F>)>, p: &str, g: &'a GruParams<F>) {
    out.push((format!("{p}.w_h"), g.w_h.view().into_dyn()));
    out.push((format!("{p}.w_x"), g.w_x.view().into_dyn()));
    out.push((format!("{p}.w"), g.w.view().into_dyn()));
    out.push((format!("{p}.u"), g.u.view().into_dyn()));
}

fn push_gru_mut<'a, F>(out: &mut Vec<(String, ArrayViewMutD<'a, F>)>, p: &str, g: &'a mut GruParams<F>) {
    let GruParams { w_h, w_x, w, u } = g;
    out.push((format!("{p}.w_h"), w_h.view_mut().into_dyn()));
    out.push((format!("{p}.w_x"), w_x.view_mut().into_dyn()));
    out.push((format!("{p}.w"), w.view_mut().into_dyn()));
    out.push((format!("{p}.u"), u.view_mut().into_dyn()));
}
