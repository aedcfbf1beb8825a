//! Sentence-vector extraction from trained models: uni, bi and combine
//! encoders, l2 normalization, the binary vector file, and vocabulary
//! expansion into a larger pretrained word space.

use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;
use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::corpus::{encode_sentence, EncodedSentence, Vocabulary, RESERVED};
use crate::models::{EncoderKind, Model};
use crate::{Error, Result};

/// Which encoder produced a vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Uni,
    Bi,
    Combine,
}

impl Source {
    fn code(self) -> u32 {
        match self {
            Source::Uni => 0,
            Source::Bi => 1,
            Source::Combine => 2,
        }
    }

    fn from_code(c: u32) -> Option<Self> {
        match c {
            0 => Some(Source::Uni),
            1 => Some(Source::Bi),
            2 => Some(Source::Combine),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceVector {
    pub values: Array1<f64>,
    pub source: Source,
    /// Set only when `values` has unit l2 norm.
    pub normalized: bool,
}

impl SentenceVector {
    pub fn new(values: Array1<f64>, source: Source, normalized: bool) -> Self {
        SentenceVector {
            values,
            source,
            normalized,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.dot(&self.values).sqrt()
    }

    /// Divided by its l2 norm. A zero vector is returned unchanged and stays
    /// unnormalized.
    pub fn normalized(&self) -> SentenceVector {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            SentenceVector::new(self.values.mapv(|x| x / n), self.source, true)
        } else {
            self.clone()
        }
    }
}

/// Word vectors used to embed input tokens: the model's own table, or an
/// expanded one covering a larger vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct Lexicon {
    pub vocab: Vocabulary,
    pub embedding: Array2<f32>,
}

impl Lexicon {
    pub fn new(vocab: Vocabulary, embedding: Array2<f32>) -> Result<Self> {
        if embedding.nrows() != vocab.len() {
            return Err(Error::Shape(format!(
                "{} embedding rows for {} tokens",
                embedding.nrows(),
                vocab.len()
            )));
        }
        Ok(Lexicon { vocab, embedding })
    }

    pub fn from_model(vocab: &Vocabulary, model: &Model<f32>) -> Result<Self> {
        Self::new(vocab.clone(), model.params.embedding.clone())
    }

    pub fn dim(&self) -> usize {
        self.embedding.ncols()
    }

    /// Every row as a text word vector, reserved tokens included.
    pub fn to_word_vectors(&self) -> WordVectors {
        WordVectors {
            tokens: (0..self.vocab.len())
                .map(|i| self.vocab.token(i).expect("id in range").to_string())
                .collect(),
            vectors: self.embedding.mapv(f64::from),
        }
    }

    /// Inverse of [`Lexicon::to_word_vectors`]: the first rows must be the
    /// reserved tokens in id order.
    pub fn from_word_vectors(wv: &WordVectors) -> Result<Self> {
        if wv.tokens.len() < RESERVED.len() || wv.tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::Config(
                "lexicon must start with the reserved tokens in id order".into(),
            ));
        }
        let vocab = Vocabulary::from_tokens(wv.tokens[RESERVED.len()..].iter().cloned())?;
        Self::new(vocab, wv.vectors.mapv(|x| x as f32))
    }
}

/// Anything that maps tokenized sentences to sentence vectors.
pub trait SentenceEncoder {
    fn dim(&self) -> usize;
    fn source(&self) -> Source;
    /// One vector per sentence, in order.
    fn encode(&self, sentences: &[Vec<String>], normalize: bool) -> Result<Vec<SentenceVector>>;

    fn encode_one(&self, sentence: &[String], normalize: bool) -> Result<SentenceVector> {
        Ok(self
            .encode(&[sentence.to_vec()], normalize)?
            .pop()
            .expect("one sentence in, one vector out"))
    }
}

/// Sentences per forward pass when encoding.
pub const ENCODE_BATCH: usize = 128;

/// Uni or bi encoder over a trained model. Sentences are never clipped; an
/// empty sentence encodes its lone EOS token.
pub struct ModelEncoder<'a> {
    model: &'a Model<f32>,
    lexicon: Lexicon,
}

impl<'a> ModelEncoder<'a> {
    pub fn new(model: &'a Model<f32>, lexicon: Lexicon) -> Result<Self> {
        if lexicon.dim() != model.config.d_emb {
            return Err(Error::Shape(format!(
                "lexicon has dimension {}, model embeds in {}",
                lexicon.dim(),
                model.config.d_emb
            )));
        }
        Ok(ModelEncoder { model, lexicon })
    }

    /// Encoder reading the model's own embedding table.
    pub fn with_vocab(model: &'a Model<f32>, vocab: &Vocabulary) -> Result<Self> {
        Self::new(model, Lexicon::from_model(vocab, model)?)
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Raw `(n, d_z)` representations.
    pub fn encode_matrix(&self, sentences: &[Vec<String>]) -> Array2<f32> {
        let mut out = Array2::zeros((sentences.len(), self.model.config.d_z));
        let emb = self.lexicon.embedding.view();
        for (c, chunk) in sentences.chunks(ENCODE_BATCH).enumerate() {
            let len = chunk.iter().map(Vec::len).max().unwrap_or(0) + 1;
            let encoded: Vec<EncodedSentence> = chunk
                .iter()
                .map(|s| encode_sentence(&self.lexicon.vocab, s, len))
                .collect();
            let refs: Vec<&EncodedSentence> = encoded.iter().collect();
            let z = self.model.encode_batch_with(emb, &refs);
            let start = c * ENCODE_BATCH;
            out.slice_mut(ndarray::s![start..start + chunk.len(), ..]).assign(&z);
        }
        out
    }
}

impl SentenceEncoder for ModelEncoder<'_> {
    fn dim(&self) -> usize {
        self.model.config.d_z
    }

    fn source(&self) -> Source {
        match self.model.config.encoder {
            EncoderKind::Uni => Source::Uni,
            EncoderKind::Bi => Source::Bi,
        }
    }

    fn encode(&self, sentences: &[Vec<String>], normalize: bool) -> Result<Vec<SentenceVector>> {
        let z = self.encode_matrix(sentences);
        let source = self.source();
        Ok(z
            .axis_iter(Axis(0))
            .map(|row| {
                let v = SentenceVector::new(row.mapv(f64::from), source, false);
                if normalize {
                    v.normalized()
                } else {
                    v
                }
            })
            .collect())
    }
}

/// How a combine encoder normalizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombineNorm {
    /// Concatenate raw vectors, then divide by the joint norm.
    #[default]
    Joint,
    /// Normalize each part, concatenate, and do not re-normalize. The result
    /// has norm sqrt(2) and is flagged as unnormalized.
    PerModel,
}

/// Concatenation of a uni vector and a bi vector, in that order.
pub struct CombineEncoder<'a> {
    pub uni: ModelEncoder<'a>,
    pub bi: ModelEncoder<'a>,
    pub norm: CombineNorm,
}

impl<'a> CombineEncoder<'a> {
    pub fn new(uni: ModelEncoder<'a>, bi: ModelEncoder<'a>, norm: CombineNorm) -> Result<Self> {
        if uni.source() != Source::Uni || bi.source() != Source::Bi {
            return Err(Error::Config(
                "combine needs one uni model and one bi model".into(),
            ));
        }
        Ok(CombineEncoder { uni, bi, norm })
    }
}

impl SentenceEncoder for CombineEncoder<'_> {
    fn dim(&self) -> usize {
        self.uni.dim() + self.bi.dim()
    }

    fn source(&self) -> Source {
        Source::Combine
    }

    fn encode(&self, sentences: &[Vec<String>], normalize: bool) -> Result<Vec<SentenceVector>> {
        let per_model = normalize && self.norm == CombineNorm::PerModel;
        let u = self.uni.encode(sentences, per_model)?;
        let b = self.bi.encode(sentences, per_model)?;
        Ok(u
            .into_iter()
            .zip(b)
            .map(|(u, b)| {
                let joined = concatenate![Axis(0), u.values, b.values];
                let v = SentenceVector::new(joined, Source::Combine, false);
                if normalize && self.norm == CombineNorm::Joint {
                    v.normalized()
                } else {
                    v
                }
            })
            .collect())
    }
}

const FLAG_NORMALIZED: u32 = 1;

/// Writes `u64 count, u32 dim, u32 flags` then the values as little-endian
/// `f32`, row-major. Flags: bit 0 normalized, bits 1-2 source. All vectors
/// must share dimension, source and normalization.
pub fn write_vectors<W: Write>(mut w: W, vectors: &[SentenceVector]) -> Result<()> {
    let (dim, source, normalized) = match vectors.first() {
        Some(v) => (v.dim(), v.source, v.normalized),
        None => (0, Source::Uni, false),
    };
    if vectors
        .iter()
        .any(|v| v.dim() != dim || v.source != source || v.normalized != normalized)
    {
        return Err(Error::Shape("vectors differ in dimension or provenance".into()));
    }
    let flags = u32::from(normalized) * FLAG_NORMALIZED | source.code() << 1;
    w.write_all(&(vectors.len() as u64).to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&flags.to_le_bytes())?;
    let mut buf = Vec::with_capacity(vectors.len() * dim * 4);
    for v in vectors {
        for &x in &v.values {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a file written by [`write_vectors`]; trailing bytes are an error.
pub fn read_vectors<R: Read>(mut r: R) -> Result<Vec<SentenceVector>> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    let count = u64::from_le_bytes(head[..8].try_into().expect("8 bytes")) as usize;
    let dim = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
    let flags = u32::from_le_bytes(head[12..].try_into().expect("4 bytes"));
    let source = Source::from_code((flags >> 1) & 3)
        .ok_or_else(|| Error::Parse { line: 0, msg: format!("unknown source flags {flags:#x}") })?;
    let normalized = flags & FLAG_NORMALIZED != 0;
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() != count * dim * 4 {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {} data bytes, found {}", count * dim * 4, data.len()),
        });
    }
    let values: Vec<f64> = data
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    Ok(values
        .chunks(dim.max(1))
        .take(count)
        .map(|c| SentenceVector::new(Array1::from(c[..dim].to_vec()), source, normalized))
        .collect())
}

/// A table of text word vectors: one `token v1 ... vd` line per word.
#[derive(Clone, Debug, PartialEq)]
pub struct WordVectors {
    pub tokens: Vec<String>,
    pub vectors: Array2<f64>,
}

impl WordVectors {
    pub fn new(tokens: Vec<String>, vectors: Array2<f64>) -> Result<Self> {
        if tokens.len() != vectors.nrows() {
            return Err(Error::Shape(format!(
                "{} tokens but {} vectors",
                tokens.len(),
                vectors.nrows()
            )));
        }
        Ok(WordVectors { tokens, vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Parses the text format. A leading `count dim` line is skipped, blank
    /// lines are ignored, and for repeated tokens the first line wins.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut values = Vec::new();
        let mut dim = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
            let d = fields.len() - 1;
            match dim {
                None if d == 0 => return Err(parse_err("word vector has no values".into())),
                None => dim = Some(d),
                Some(expected) if expected != d => {
                    return Err(parse_err(format!("expected {expected} values, found {d}")))
                }
                _ => {}
            }
            if !seen.insert(fields[0].to_string()) {
                continue;
            }
            tokens.push(fields[0].to_string());
            for f in &fields[1..] {
                let x: f64 = f.parse().map_err(|_| parse_err(format!("bad number {f:?}")))?;
                values.push(x);
            }
        }
        let dim = dim.unwrap_or(0);
        let vectors = Array2::from_shape_vec((tokens.len(), dim), values).expect("consistent rows");
        Ok(WordVectors { tokens, vectors })
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (tok, row) in self.tokens.iter().zip(self.vectors.axis_iter(Axis(0))) {
            write!(w, "{tok}")?;
            for x in row {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Regularization of the expansion regression.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularization {
    /// Ordinary least squares with at least `10 * d_outer` shared tokens,
    /// ridge `1e-3` with at least `d_outer`, an error below that.
    #[default]
    Auto,
    /// Ordinary least squares (minimum-norm when underdetermined).
    None,
    Ridge(f64),
}

/// Ridge strength chosen by [`Regularization::Auto`] for small systems.
pub const AUTO_RIDGE: f64 = 1e-3;

/// Linear map `A` (`d_emb x d_outer`) from an outer word space into a
/// model's embedding space.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionMap {
    pub a: Array2<f64>,
    /// Shared tokens used as regression data.
    pub shared: usize,
    /// Ridge strength actually used (0 for least squares).
    pub ridge: f64,
}

impl ExpansionMap {
    pub fn inner_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn outer_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn apply(&self, outer: ArrayView1<f64>) -> Array1<f64> {
        self.a.dot(&outer)
    }

    /// Inner vocabulary followed by every outer token it lacks, in outer file
    /// order. Known tokens keep their trained vectors; the rest embed as
    /// `A * E_outer[w]`. Outer tokens spelled like reserved tokens are skipped.
    pub fn expand(&self, inner: &Lexicon, outer: &WordVectors) -> Result<Lexicon> {
        self.check(inner.dim(), outer.dim())?;
        let extra: Vec<usize> = (0..outer.tokens.len())
            .filter(|&i| inner.vocab.get(&outer.tokens[i]).is_none())
            .collect();
        let mut tokens: Vec<String> = inner.vocab.corpus_tokens().to_vec();
        tokens.extend(extra.iter().map(|&i| outer.tokens[i].clone()));
        let vocab = Vocabulary::from_tokens(tokens)?;
        let mapped = outer.vectors.select(Axis(0), &extra).dot(&self.a.t());
        let embedding = concatenate![Axis(0), inner.embedding.view(), mapped.mapv(|x| x as f32).view()];
        Lexicon::new(vocab, embedding)
    }

    fn check(&self, inner: usize, outer: usize) -> Result<()> {
        if inner != self.inner_dim() || outer != self.outer_dim() {
            return Err(Error::Shape(format!(
                "map is {}x{}, spaces are {inner} and {outer}",
                self.inner_dim(),
                self.outer_dim()
            )));
        }
        Ok(())
    }
}

/// Least-squares fit of `A = argmin sum |E_inner[w] - A E_outer[w]|^2` over
/// the non-reserved tokens present in both vocabularies.
pub fn expand_vocab(
    inner_vocab: &Vocabulary,
    inner: ArrayView2<f32>,
    outer: &WordVectors,
    reg: Regularization,
) -> Result<ExpansionMap> {
    if inner.nrows() != inner_vocab.len() {
        return Err(Error::Shape(format!(
            "{} embedding rows for {} tokens",
            inner.nrows(),
            inner_vocab.len()
        )));
    }
    let pairs: Vec<(usize, usize)> = outer
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| !RESERVED.contains(&t.as_str()))
        .filter_map(|(j, t)| inner_vocab.get(t).map(|i| (i, j)))
        .collect();
    let n = pairs.len();
    let d_outer = outer.dim();
    let ridge = match reg {
        Regularization::None => 0.0,
        Regularization::Ridge(l) if l >= 0.0 && l.is_finite() => l,
        Regularization::Ridge(l) => return Err(Error::Config(format!("invalid ridge strength {l}"))),
        Regularization::Auto if n >= 10 * d_outer => 0.0,
        Regularization::Auto if n >= d_outer && n > 0 => AUTO_RIDGE,
        Regularization::Auto => {
            return Err(Error::Degenerate(format!(
                "only {n} shared tokens for a {d_outer}-dimensional outer space; \
                 give an explicit ridge strength"
            )))
        }
    };
    if n == 0 {
        return Err(Error::Degenerate("no shared tokens".into()));
    }
    let d_inner = inner.ncols();
    let rows = n + if ridge > 0.0 { d_outer } else { 0 };
    let mut x = DMatrix::<f64>::zeros(rows, d_outer);
    let mut y = DMatrix::<f64>::zeros(rows, d_inner);
    for (r, &(i, j)) in pairs.iter().enumerate() {
        for c in 0..d_outer {
            x[(r, c)] = outer.vectors[(j, c)];
        }
        for c in 0..d_inner {
            y[(r, c)] = f64::from(inner[(i, c)]);
        }
    }
    if ridge > 0.0 {
        for c in 0..d_outer {
            x[(n + c, c)] = ridge.sqrt();
        }
    }
    let svd = x.svd(true, true);
    let tol = svd.singular_values.max() * 1e-12 * rows.max(d_outer) as f64;
    let at = svd
        .solve(&y, tol)
        .map_err(|e| Error::Degenerate(format!("expansion solve failed: {e}")))?;
    let a = Array2::from_shape_fn((d_inner, d_outer), |(r, c)| at[(c, r)]);
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("expansion map".into()));
    }
    Ok(ExpansionMap { a, shared: n, ridge })
}

/// Sum of squared residuals of `map` on the shared tokens.
pub fn expansion_residual(
    map: &ExpansionMap,
    inner_vocab: &Vocabulary,
    inner: ArrayView2<f32>,
    outer: &WordVectors,
) -> f64 {
    let mut total = 0.0;
    for (j, t) in outer.tokens.iter().enumerate() {
        if RESERVED.contains(&t.as_str()) {
            continue;
        }
        if let Some(i) = inner_vocab.get(t) {
            let pred = map.apply(outer.vectors.row(j));
            total += pred
                .iter()
                .zip(inner.row(i))
                .map(|(p, &e)| (p - f64::from(e)).powi(2))
                .sum::<f64>();
        }
    }
    total
}
