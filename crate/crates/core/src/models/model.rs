use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{EncoderKind, ModelConfig};
use super::params::{DecoderParams, Params};
use crate::corpus::{EncodedSentence, NeighborhoodExample};
use crate::nncore::{
    decode_backward, decode_batch, encode_backward, encode_batch, nll_rows_with_grad, uniform_matrix,
    CondGruParams, Direction, GruParams, OutputProjection, Scalar,
};
use crate::{Error, Result};

/// Scale of the uniform initializer.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Model<F = f32> {
    pub config: ModelConfig,
    pub params: Params<F>,
}

/// Allocates every parameter group the variant needs, drawn from
/// `U(-0.1, 0.1)` with a ChaCha8 stream seeded by `seed`. Output biases
/// start at zero.
pub fn build_model<F: Scalar>(config: &ModelConfig, seed: u64) -> Result<Model<F>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (v, e, z) = (config.vocab_size, config.d_emb, config.d_z);
    let embedding = uniform_matrix(v, e, INIT_SCALE, &mut rng);
    let encoders = (0..config.encoder_directions())
        .map(|_| GruParams::random(config.encoder_hidden(), e, INIT_SCALE, &mut rng))
        .collect();
    let decoders = (0..config.variant.decoder_groups())
        .map(|_| DecoderParams {
            cell: CondGruParams::random(z, e, z, INIT_SCALE, &mut rng),
            out: OutputProjection::random(v, z, INIT_SCALE, &mut rng),
        })
        .collect();
    Ok(Model {
        config: config.clone(),
        params: Params {
            embedding,
            encoders,
            decoders,
        },
    })
}

/// A model of the right shape with every parameter zero.
pub(crate) fn zeroed_model<F: Scalar>(config: &ModelConfig) -> Result<Model<F>> {
    config.validate()?;
    let (v, e, z) = (config.vocab_size, config.d_emb, config.d_z);
    Ok(Model {
        config: config.clone(),
        params: Params {
            embedding: Array2::zeros((v, e)),
            encoders: (0..config.encoder_directions())
                .map(|_| GruParams::zeros(config.encoder_hidden(), e))
                .collect(),
            decoders: (0..config.variant.decoder_groups())
                .map(|_| DecoderParams {
                    cell: CondGruParams::zeros(z, e, z),
                    out: OutputProjection::zeros(v, z),
                })
                .collect(),
        },
    })
}

struct Forward<F> {
    loss_sum: F,
    tokens: usize,
    grads: Option<Params<F>>,
}

impl<F: Scalar> Model<F> {
    /// Exact number of learnable scalars.
    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    /// Scalar count per parameter key.
    pub fn param_report(&self) -> Vec<(String, usize)> {
        self.params.counts()
    }

    pub fn cast<G: Scalar>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
        }
    }

    /// Sentence representations `(batch, d_z)` for equal-length sentences,
    /// reading word vectors from `emb` (normally the model's own table).
    /// Bi encoders concatenate the forward then the backward final state.
    pub fn encode_batch_with(&self, emb: ArrayView2<F>, batch: &[&EncodedSentence]) -> Array2<F> {
        let states: Vec<Array2<F>> = self
            .params
            .encoders
            .iter()
            .zip(directions(self.config.encoder))
            .map(|(p, dir)| encode_batch(p, emb, batch, dir, false).0)
            .collect();
        join_states(states)
    }

    pub fn encode_batch(&self, batch: &[&EncodedSentence]) -> Array2<F> {
        self.encode_batch_with(self.params.embedding.view(), batch)
    }

    pub fn encode(&self, s: &EncodedSentence) -> Array1<F> {
        self.encode_batch(&[s]).row(0).to_owned()
    }

    /// Teacher-forced logits of decoder group `decoder` for `target`.
    pub fn decode_logits(&self, decoder: usize, z: ArrayView1<F>, target: &EncodedSentence) -> Array2<F> {
        let d = &self.params.decoders[decoder];
        crate::nncore::decode_logits(&d.cell, &d.out, self.params.embedding.view(), z, target)
    }

    /// Summed NLL of all targets of `ex` given the encoding of its center.
    pub fn example_loss(&self, ex: &NeighborhoodExample) -> Result<F> {
        Ok(self.run(&[ex], false)?.loss_sum)
    }

    /// Mean of [`Model::example_loss`] over the batch.
    pub fn batch_loss(&self, batch: &[&NeighborhoodExample]) -> Result<F> {
        let f = self.run(batch, false)?;
        Ok(f.loss_sum / F::of(batch.len() as f64))
    }

    /// Total NLL and number of scored tokens over the batch.
    pub fn token_nll(&self, batch: &[&NeighborhoodExample]) -> Result<(F, usize)> {
        let f = self.run(batch, false)?;
        Ok((f.loss_sum, f.tokens))
    }

    /// Mean batch loss and its exact gradient for every parameter key.
    /// Keys off the loss path get zero gradients. A non-finite loss is
    /// reported as an error.
    pub fn loss_and_gradients(&self, batch: &[&NeighborhoodExample]) -> Result<(F, Params<F>)> {
        let f = self.run(batch, true)?;
        let loss = f.loss_sum / F::of(batch.len() as f64);
        Ok((loss, f.grads.expect("gradients requested")))
    }

    fn run(&self, batch: &[&NeighborhoodExample], want_grad: bool) -> Result<Forward<F>> {
        let variant = self.config.variant;
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        for ex in batch {
            if ex.variant != variant || ex.targets.len() != variant.num_targets() {
                return Err(Error::VariantMismatch {
                    model: variant.to_string(),
                    example: ex.variant.to_string(),
                });
            }
        }
        let n = batch.len();
        let scale = F::one() / F::of(n as f64);
        let emb = self.params.embedding.view();
        let centers: Vec<&EncodedSentence> = batch.iter().map(|e| &e.center).collect();
        check_lengths(&centers)?;

        let mut traces = Vec::new();
        let mut states = Vec::new();
        for (p, dir) in self.params.encoders.iter().zip(directions(self.config.encoder)) {
            let (h, tr) = encode_batch(p, emb, &centers, dir, want_grad);
            states.push(h);
            traces.push(tr);
        }
        let z = join_states(states);

        let mut grads = want_grad.then(|| self.params.zeros_like());
        let mut dz = Array2::zeros(z.raw_dim());
        let mut loss_sum = F::zero();
        let mut tokens = 0;
        for slot in 0..variant.num_targets() {
            let g = variant.decoder_for_slot(slot);
            let dec = &self.params.decoders[g];
            let targets: Vec<&EncodedSentence> = batch.iter().map(|e| &e.targets[slot]).collect();
            check_lengths(&targets)?;
            let (logits, trace) = decode_batch(&dec.cell, &dec.out, emb, z.view(), &targets);
            let mut dlogits = Vec::with_capacity(logits.len());
            for (t, l) in logits.iter().enumerate() {
                let ids: Vec<usize> = targets.iter().map(|s| s.ids[t]).collect();
                let mask: Vec<bool> = targets.iter().map(|s| s.mask[t]).collect();
                tokens += mask.iter().filter(|&&m| m).count();
                let (loss, dl) = nll_rows_with_grad(l.view(), &ids, &mask, scale);
                loss_sum += loss;
                dlogits.push(dl);
            }
            if let Some(grads) = grads.as_mut() {
                let Params {
                    embedding: gemb,
                    decoders: gdec,
                    ..
                } = grads;
                let DecoderParams { cell, out } = &mut gdec[g];
                decode_backward(&dec.cell, &dec.out, &trace, &dlogits, cell, out, gemb, &mut dz);
            }
        }
        if !loss_sum.is_finite() {
            return Err(Error::NonFinite(format!("loss is {loss_sum}")));
        }

        if let Some(grads) = grads.as_mut() {
            let h = self.config.encoder_hidden();
            let Params {
                embedding: gemb,
                encoders: genc,
                ..
            } = grads;
            for (i, (p, tr)) in self.params.encoders.iter().zip(&traces).enumerate() {
                let part = dz.slice(s![.., i * h..(i + 1) * h]).to_owned();
                encode_backward(p, tr.as_ref().expect("trace kept"), part, &mut genc[i], gemb);
            }
        }
        Ok(Forward {
            loss_sum,
            tokens,
            grads,
        })
    }
}

fn directions(kind: EncoderKind) -> Vec<Direction> {
    match kind {
        EncoderKind::Uni => vec![Direction::Forward],
        EncoderKind::Bi => vec![Direction::Forward, Direction::Backward],
    }
}

fn join_states<F: Scalar>(mut states: Vec<Array2<F>>) -> Array2<F> {
    if states.len() == 1 {
        return states.pop().expect("one state");
    }
    let views: Vec<_> = states.iter().map(|s| s.view()).collect();
    concatenate(Axis(1), &views).expect("equal batch sizes")
}

fn check_lengths(batch: &[&EncodedSentence]) -> Result<()> {
    let len = batch[0].len();
    if batch.iter().any(|s| s.len() != len) {
        return Err(Error::Shape("sentences in a batch must share one padded length".into()));
    }
    Ok(())
}
