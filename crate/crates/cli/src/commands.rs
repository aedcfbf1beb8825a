//! Subcommand bodies. Each takes fully resolved, validated settings.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use nthought::corpus::{build_vocab, iter_neighborhoods, read_documents, tokenize, Document, Vocabulary};
use nthought::evaluation::{
    eval_classification, eval_msrp, eval_sick, read_labeled, read_pairs, EvalConfig, FitConfig,
};
use nthought::explore::{greedy_decode, VectorIndex};
use nthought::models::{build_model, Checkpoint, EncoderKind, Model};
use nthought::representation::{
    expand_vocab, expansion_residual, write_vectors, CombineEncoder, Lexicon, ModelEncoder, Regularization,
    SentenceEncoder, WordVectors,
};
use nthought::trainer::{train, TrainObserver};
use serde_json::json;

use crate::settings::{
    vocab_path, EncodeSettings, EvalSettings, ExpandSettings, GenerateSettings, InspectSettings, ModelInputs,
    RetrieveSettings, TrainSettings,
};

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut w = create(path)?;
    ckpt.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Non-blank lines, trimmed.
fn read_lines(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
    }
    Ok(out)
}

/// A checkpoint with the vocabulary stored next to it, checked against the
/// hash in the checkpoint header.
pub fn load_model(path: &Path) -> Result<(Checkpoint, Vocabulary)> {
    let ckpt = Checkpoint::read_from(open(path)?).with_context(|| format!("loading {}", path.display()))?;
    let vp = vocab_path(path);
    let vocab = Vocabulary::read_from(open(&vp)?).with_context(|| format!("loading {}", vp.display()))?;
    if vocab.content_hash() != ckpt.vocab_hash {
        bail!("{} does not match the vocabulary hash in {}", vp.display(), path.display());
    }
    if vocab.len() != ckpt.model.config.vocab_size {
        bail!("vocabulary has {} tokens, model expects {}", vocab.len(), ckpt.model.config.vocab_size);
    }
    Ok((ckpt, vocab))
}

fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let wv = WordVectors::read_text(open(path)?).with_context(|| format!("loading {}", path.display()))?;
    Ok(Lexicon::from_word_vectors(&wv)?)
}

fn model_encoder<'a>(model: &'a Model<f32>, vocab: &Vocabulary, lexicon: Option<&Path>) -> Result<ModelEncoder<'a>> {
    let lex = match lexicon {
        Some(p) => load_lexicon(p)?,
        None => Lexicon::from_model(vocab, model)?,
    };
    Ok(ModelEncoder::new(model, lex)?)
}

/// Runs `f` with the sentence encoder described by `m`: a single model, or
/// the combine of a uni and a bi model.
fn with_encoder<R>(m: &ModelInputs, f: impl FnOnce(&dyn SentenceEncoder) -> Result<R>) -> Result<R> {
    let (first, v1) = load_model(&m.ckpt)?;
    let enc1 = model_encoder(&first.model, &v1, m.lexicon.as_deref())?;
    let Some(p2) = &m.ckpt2 else {
        return f(&enc1);
    };
    let (second, v2) = load_model(p2)?;
    let enc2 = model_encoder(&second.model, &v2, m.lexicon2.as_deref())?;
    let combine = match (first.model.config.encoder, second.model.config.encoder) {
        (EncoderKind::Uni, EncoderKind::Bi) => CombineEncoder::new(enc1, enc2, m.combine_norm)?,
        (EncoderKind::Bi, EncoderKind::Uni) => CombineEncoder::new(enc2, enc1, m.combine_norm)?,
        _ => bail!("combine needs one uni and one bi checkpoint"),
    };
    f(&combine)
}

struct TrainLog<'a> {
    log: Option<Box<dyn Write + 'a>>,
    ckpt: &'a Path,
    vocab_hash: [u8; 32],
    settings: &'a TrainSettings,
}

impl TrainLog<'_> {
    fn snapshot(&self, step: u64, model: &Model<f32>) -> nthought::Result<()> {
        let ckpt = Checkpoint {
            model: model.clone(),
            vocab_hash: self.vocab_hash,
            training: Some(self.settings.train_config().record(step)),
        };
        let mut w = BufWriter::new(File::create(self.ckpt)?);
        ckpt.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

impl TrainObserver for TrainLog<'_> {
    fn on_log(&mut self, step: u64, loss: f32) -> nthought::Result<()> {
        if let Some(w) = self.log.as_mut() {
            writeln!(w, "{step},{loss}")?;
        }
        Ok(())
    }

    fn on_checkpoint(&mut self, step: u64, model: &Model<f32>) -> nthought::Result<()> {
        self.snapshot(step, model)
    }

    fn on_divergence(&mut self, step: u64, last_good: &Model<f32>) -> nthought::Result<()> {
        self.snapshot(step.saturating_sub(1), last_good)
    }
}

pub fn run_train(s: &TrainSettings, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let docs: Vec<Document> = read_documents(open(&s.corpus)?)
        .collect::<nthought::Result<_>>()
        .with_context(|| format!("reading {}", s.corpus.display()))?;
    let vocab = build_vocab(docs.iter().flatten().map(Vec::as_slice), s.vocab_size)?;
    let mut vw = create(&vocab_path(&s.out))?;
    vocab.write_to(&mut vw)?;
    vw.flush()?;

    let config = s.model_config(vocab.len());
    let model = build_model::<f32>(&config, s.seed)?;
    let examples: Vec<_> = iter_neighborhoods(docs, &vocab, s.variant, s.len).collect();
    if examples.is_empty() {
        bail!("the corpus has no complete neighborhood for {}", s.variant);
    }
    writeln!(
        err,
        "training {} {} on {} examples, {} parameters",
        s.encoder,
        s.variant,
        examples.len(),
        model.param_count()
    )?;

    let log: Option<Box<dyn Write + '_>> = match s.loss_log.as_deref() {
        None => None,
        Some("-") => Some(Box::new(&mut *out)),
        Some(p) => Some(Box::new(create(Path::new(p))?)),
    };
    let mut observer = TrainLog {
        log,
        ckpt: &s.out,
        vocab_hash: vocab.content_hash(),
        settings: s,
    };
    if let Some(w) = observer.log.as_mut() {
        writeln!(w, "step,loss")?;
    }
    let cfg = s.train_config();
    let outcome = train(model, &examples, &cfg, &mut observer)?;
    if let Some(mut w) = observer.log.take() {
        w.flush()?;
    }
    let ckpt = Checkpoint {
        model: outcome.model,
        vocab_hash: vocab.content_hash(),
        training: Some(cfg.record(outcome.steps)),
    };
    write_checkpoint(&s.out, &ckpt)?;
    if let Some(l) = outcome.losses.last() {
        writeln!(err, "step {} loss {l}", outcome.steps)?;
    }
    Ok(())
}

fn tokenized(lines: &[String]) -> Vec<Vec<String>> {
    lines.iter().map(|l| tokenize(l)).collect()
}

pub fn run_encode(s: &EncodeSettings, _out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let sentences = tokenized(&read_lines(&s.input)?);
    let vectors = with_encoder(&s.models, |enc| Ok(enc.encode(&sentences, s.normalize)?))?;
    let mut w = create(&s.out)?;
    write_vectors(&mut w, &vectors)?;
    w.flush()?;
    let dim = vectors.first().map_or(0, |v| v.dim());
    writeln!(err, "wrote {} vectors of dimension {dim}", vectors.len())?;
    Ok(())
}

pub fn run_eval(s: &EvalSettings, out: &mut dyn Write, _err: &mut dyn Write) -> Result<()> {
    let cfg = EvalConfig {
        folds: s.folds,
        seed: s.seed,
        normalize: s.normalize,
        fit: FitConfig {
            max_iter: s.max_iter,
            tol: s.tol,
        },
        ..EvalConfig::default()
    };
    let report = with_encoder(&s.models, |enc| {
        use nthought::evaluation::Task;
        Ok(match s.task {
            Task::Sick | Task::Msrp => {
                let train = read_pairs(open(&s.train)?)?;
                let test_path = s.test.as_deref().context("pair tasks need --test")?;
                let test = read_pairs(open(test_path)?)?;
                if s.task == Task::Sick {
                    eval_sick(&train, &test, enc, &cfg)?
                } else {
                    eval_msrp(&train, &test, enc, &cfg)?
                }
            }
            task => {
                let train = read_labeled(open(&s.train)?)?;
                let test = match &s.test {
                    Some(p) => Some(read_labeled(open(p)?)?),
                    None => None,
                };
                eval_classification(task, &train, test.as_deref(), enc, &cfg)?
            }
        })
    })?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    match &s.out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_target(path: Option<&Path>, stdout: &mut dyn Write, body: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(body.as_bytes())?;
            w.flush()?;
        }
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

pub fn run_retrieve(s: &RetrieveSettings, out: &mut dyn Write, _err: &mut dyn Write) -> Result<()> {
    let db = read_lines(&s.db)?;
    let queries = read_lines(&s.query)?;
    let (dv, qv) = with_encoder(&s.models, |enc| {
        Ok((enc.encode(&tokenized(&db), true)?, enc.encode(&tokenized(&queries), true)?))
    })?;
    let index = VectorIndex::from_sentence_vectors(&dv, db)?;
    let mut body = String::new();
    for (q, v) in queries.iter().zip(&qv) {
        let want = if s.exclude_self { index.len() } else { s.k };
        let hits = index.nearest_neighbors(v.values.view(), want)?;
        body.push_str(q);
        body.push('\n');
        for (rank, h) in hits.iter().filter(|h| !s.exclude_self || h.text != *q).take(s.k).enumerate() {
            body.push_str(&format!("{}\t{:.6}\t{}\n", rank + 1, h.similarity, h.text));
        }
        body.push('\n');
    }
    to_target(s.out.as_deref(), out, &body)
}

pub fn run_generate(s: &GenerateSettings, out: &mut dyn Write, _err: &mut dyn Write) -> Result<()> {
    let (ckpt, vocab) = load_model(&s.ckpt)?;
    let enc = model_encoder(&ckpt.model, &vocab, s.lexicon.as_deref())?;
    let lines = read_lines(&s.input)?;
    let mut body = String::new();
    for (line, tokens) in lines.iter().zip(tokenized(&lines)) {
        let z = enc.encode_one(&tokens, false)?;
        let ids = greedy_decode(&ckpt.model, &z, s.max_len)?;
        body.push_str(line);
        body.push('\n');
        body.push_str(&vocab.decode(&ids).join(" "));
        body.push_str("\n\n");
    }
    to_target(s.out.as_deref(), out, &body)
}

pub fn run_expand(s: &ExpandSettings, _out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let (ckpt, vocab) = load_model(&s.ckpt)?;
    let outer = WordVectors::read_text(open(&s.outer)?).with_context(|| format!("loading {}", s.outer.display()))?;
    let reg = match (s.ols, s.ridge) {
        (true, _) => Regularization::None,
        (false, Some(r)) => Regularization::Ridge(r),
        (false, None) => Regularization::Auto,
    };
    let emb = ckpt.model.params.embedding.view();
    let map = expand_vocab(&vocab, emb, &outer, reg)?;
    let lex = map.expand(&Lexicon::from_model(&vocab, &ckpt.model)?, &outer)?;
    let mut w = create(&s.out)?;
    lex.to_word_vectors().write_text(&mut w)?;
    w.flush()?;
    writeln!(
        err,
        "{} shared tokens, ridge {}, residual {:.6e}; lexicon has {} tokens",
        map.shared,
        map.ridge,
        expansion_residual(&map, &vocab, emb, &outer),
        lex.vocab.len()
    )?;
    Ok(())
}

pub fn run_inspect(s: &InspectSettings, out: &mut dyn Write, _err: &mut dyn Write) -> Result<()> {
    let ckpt = Checkpoint::read_from(open(&s.ckpt)?).with_context(|| format!("loading {}", s.ckpt.display()))?;
    let params: Vec<_> = ckpt
        .model
        .params
        .tensors()
        .into_iter()
        .map(|(name, t)| json!({"name": name, "shape": t.shape(), "count": t.len()}))
        .collect();
    let report = json!({
        "config": ckpt.model.config,
        "training": ckpt.training,
        "vocab_hash": hex::encode(ckpt.vocab_hash),
        "params": params,
        "param_count": ckpt.model.param_count(),
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(())
}
