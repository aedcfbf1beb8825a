//! Qualitative tools: exact cosine retrieval and greedy generation.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::corpus::{EOS, GO};
use crate::models::Model;
use crate::nncore::{cond_gru_step, Scalar};
use crate::representation::SentenceVector;
use crate::{Error, Result};

/// Unit-normalized vectors with their sentence texts.
#[derive(Clone, Debug)]
pub struct VectorIndex {
    vectors: Array2<f64>,
    texts: Vec<String>,
}

/// A retrieved sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct Hit {
    pub index: usize,
    pub text: String,
    pub similarity: f64,
}

impl VectorIndex {
    /// Stores normalized copies of `vectors` (rows). Zero rows are rejected.
    pub fn new(vectors: Array2<f64>, texts: Vec<String>) -> Result<Self> {
        if vectors.nrows() != texts.len() {
            return Err(Error::Shape(format!(
                "{} vectors but {} texts",
                vectors.nrows(),
                texts.len()
            )));
        }
        let mut vectors = vectors;
        for (i, mut row) in vectors.axis_iter_mut(Axis(0)).enumerate() {
            let n = row.dot(&row).sqrt();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::Degenerate(format!("vector {i} has no direction")));
            }
            row /= n;
        }
        Ok(VectorIndex { vectors, texts })
    }

    pub fn from_sentence_vectors(vectors: &[SentenceVector], texts: Vec<String>) -> Result<Self> {
        let dim = vectors.first().map_or(0, |v| v.values.len());
        let mut m = Array2::zeros((vectors.len(), dim));
        for (mut row, v) in m.axis_iter_mut(Axis(0)).zip(vectors) {
            if v.values.len() != dim {
                return Err(Error::Shape("vectors differ in dimension".into()));
            }
            row.assign(&v.values);
        }
        Self::new(m, texts)
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    /// Exhaustive top-`k` by cosine similarity, descending, ties by index.
    /// `k` larger than the index returns every entry.
    pub fn nearest_neighbors(&self, query: ArrayView1<f64>, k: usize) -> Result<Vec<Hit>> {
        if self.is_empty() {
            return Err(Error::Degenerate("empty index".into()));
        }
        if query.len() != self.dim() {
            return Err(Error::Shape(format!(
                "query has dimension {}, index {}",
                query.len(),
                self.dim()
            )));
        }
        let norm = query.dot(&query).sqrt();
        if !(norm > 0.0) {
            return Err(Error::Degenerate("zero query vector".into()));
        }
        let q = query.mapv(|x| x / norm);
        let sims: Array1<f64> = self.vectors.dot(&q);
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
        Ok(order
            .into_iter()
            .take(k)
            .map(|i| Hit {
                index: i,
                text: self.texts[i].clone(),
                similarity: sims[i],
            })
            .collect())
    }
}

/// Greedy generation from decoder group `decoder` conditioned on `z`.
/// Starts from GO, feeds back each argmax (ties to the smallest id) and
/// stops at EOS or after `max_len` tokens. EOS is not returned.
pub fn greedy_decode_with<F: Scalar>(model: &Model<F>, decoder: usize, z: ArrayView1<F>, max_len: usize) -> Vec<usize> {
    let dec = &model.params.decoders[decoder];
    let emb = &model.params.embedding;
    let mut h = Array1::zeros(dec.cell.gru.hidden_dim());
    let mut prev = GO;
    let mut out = Vec::new();
    while out.len() < max_len {
        h = cond_gru_step(&dec.cell, h.view(), emb.row(prev), z);
        let logits = dec.out.v.dot(&h) + &dec.out.b;
        let mut best = 0;
        for (i, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = i;
            }
        }
        if best == EOS {
            break;
        }
        out.push(best);
        prev = best;
    }
    out
}

/// [`greedy_decode_with`] on the model's generation decoder (the shared
/// decoder, or the next-sentence decoder of the skip-thought baselines).
pub fn greedy_decode(model: &Model<f32>, z: &SentenceVector, max_len: usize) -> Result<Vec<usize>> {
    if z.values.len() != model.config.d_z {
        return Err(Error::Shape(format!(
            "representation has dimension {}, decoder expects {}",
            z.values.len(),
            model.config.d_z
        )));
    }
    let zf: Array1<f32> = z.values.mapv(|x| x as f32);
    Ok(greedy_decode_with(
        model,
        model.config.variant.generation_decoder(),
        zf.view(),
        max_len,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Variant;
    use crate::models::{build_model, EncoderKind, ModelConfig};
    use crate::representation::Source;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_index(n: usize, d: usize, seed: u64) -> (Array2<f64>, VectorIndex) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..1.0));
        let texts = (0..n).map(|i| format!("s{i}")).collect();
        (m.clone(), VectorIndex::new(m, texts).unwrap())
    }

    #[test]
    fn self_match_and_scale_invariance() {
        let (m, idx) = random_index(50, 6, 1);
        let hits = idx.nearest_neighbors(m.row(17), 3).unwrap();
        assert_eq!(hits[0].index, 17);
        assert!((hits[0].similarity - 1.0).abs() < 1e-12);
        let scaled = m.row(17).mapv(|x| x * 42.0);
        let again = idx.nearest_neighbors(scaled.view(), 3).unwrap();
        assert_eq!(
            hits.iter().map(|h| h.index).collect::<Vec<_>>(),
            again.iter().map(|h| h.index).collect::<Vec<_>>()
        );
        assert!(hits.windows(2).all(|w| w[0].similarity >= w[1].similarity));
    }

    #[test]
    fn ties_break_by_index() {
        let m = ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0], [2.0, 0.0], [1.0, 0.0]]);
        let idx = VectorIndex::new(m, (0..4).map(|i| i.to_string()).collect()).unwrap();
        let hits = idx.nearest_neighbors(ndarray::arr1(&[1.0, 0.0]).view(), 4).unwrap();
        assert_eq!(hits.iter().map(|h| h.index).collect::<Vec<_>>(), [0, 2, 3, 1]);
    }

    #[test]
    fn errors() {
        let idx = VectorIndex::new(Array2::zeros((0, 3)), vec![]).unwrap();
        assert!(idx.nearest_neighbors(ndarray::arr1(&[1.0, 0.0, 0.0]).view(), 1).is_err());
        assert!(VectorIndex::new(Array2::zeros((1, 3)), vec!["x".into()]).is_err());
        assert!(VectorIndex::new(Array2::ones((2, 3)), vec!["x".into()]).is_err());
    }

    fn tiny_model() -> Model<f32> {
        let cfg = ModelConfig {
            encoder: EncoderKind::Uni,
            d_emb: 3,
            d_z: 4,
            vocab_size: 9,
            max_len: 5,
            variant: Variant::Neighbor,
        };
        build_model(&cfg, 2).unwrap()
    }

    #[test]
    fn eos_bias_stops_immediately() {
        let mut m = tiny_model();
        m.params.decoders[0].out.b[EOS] = 100.0;
        let z = SentenceVector::new(Array1::from_elem(4, 0.3), Source::Uni, false);
        assert!(greedy_decode(&m, &z, 10).unwrap().is_empty());
    }

    #[test]
    fn bounded_and_deterministic() {
        let mut m = tiny_model();
        m.params.decoders[0].out.b[5] = 100.0;
        let z = SentenceVector::new(Array1::from_elem(4, -0.2), Source::Uni, false);
        let a = greedy_decode(&m, &z, 7).unwrap();
        assert_eq!(a, vec![5; 7]);
        assert_eq!(greedy_decode(&m, &z, 7).unwrap(), a);
        let wrong = SentenceVector::new(Array1::zeros(3), Source::Uni, false);
        assert!(greedy_decode(&m, &wrong, 7).is_err());
    }
}
