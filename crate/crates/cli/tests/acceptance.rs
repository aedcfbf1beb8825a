//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances and budgets are pinned below.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, Axis};
use nthought::corpus::{encode_sentence, iter_neighborhoods, Document, NeighborhoodExample, Variant, Vocabulary};
use nthought::evaluation::{
    accuracy, correlation_metrics, eval_classification, eval_sick, f1_score, EvalConfig, LabeledRecord, PairRecord,
    Task,
};
use nthought::explore::{greedy_decode_with, VectorIndex};
use nthought::models::{build_model, EncoderKind, Model, ModelConfig};
use nthought::nncore::{cond_gru_step, encode_sequence, gru_step, CondGruParams, Direction, GruParams};
use nthought::representation::{CombineEncoder, CombineNorm, ModelEncoder, SentenceEncoder, SentenceVector, Source};
use nthought::trainer::{train, AdamConfig, AdamState, NoObserver, StepInfo, TrainConfig, TrainObserver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_EPS: f64 = 1e-5;
const FD_MAX_REL: f64 = 1e-5;
const FD_BUDGET: Duration = Duration::from_secs(120);
const GRU_CASES: usize = 100;
const OVERFIT_NLL: f32 = 0.1;
const OVERFIT_MAX_STEPS: u64 = 20_000;
const OVERFIT_EXACT: f64 = 0.9;
const OVERFIT_BUDGET: Duration = Duration::from_secs(600);
const ADAM_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-6;
const METRIC_TOL: f64 = 1e-12;
const SICK_MIN_R: f64 = 0.95;
const SEPARABLE_MIN_ACC: f64 = 0.95;
const CHANCE_BAND: f64 = 0.1;
const SELF_SIM_TOL: f64 = 1e-6;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

/// Documents of random sentences over a vocabulary of `tokens` words, some
/// long enough to be clipped at `len`.
fn random_docs(rng: &mut ChaCha8Rng, docs: usize, sents: usize, tokens: usize, max_words: usize) -> Vec<Document> {
    (0..docs)
        .map(|_| {
            (0..sents)
                .map(|_| {
                    let n = rng.random_range(0..=max_words);
                    (0..n).map(|_| format!("w{}", rng.random_range(0..tokens))).collect()
                })
                .collect()
        })
        .collect()
}

// 1. Finite-difference gradient check.

fn max_abs<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.fold(0.0, |m, x| m.max(x.abs()))
}

fn fd_check(variant: Variant, encoder: EncoderKind, seed: u64) -> Result<(f64, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocabulary::from_tokens(words(16)).map_err(err)?;
    let cfg = ModelConfig {
        encoder,
        d_emb: 8,
        d_z: 12,
        vocab_size: 20,
        max_len: 5,
        variant,
    };
    ensure(vocab.len() == cfg.vocab_size, || "vocabulary size".into())?;
    let docs = random_docs(&mut rng, 2, 6, 16, 6);
    let examples: Vec<NeighborhoodExample> = iter_neighborhoods(docs, &vocab, variant, cfg.max_len).take(3).collect();
    ensure(!examples.is_empty(), || "no examples".into())?;
    let batch: Vec<&NeighborhoodExample> = examples.iter().collect();
    let mut model: Model<f64> = build_model(&cfg, seed).map_err(err)?;
    // Larger weights than the initializer so every nonlinearity is exercised.
    for (_, mut t) in model.params.tensors_mut() {
        t.mapv_inplace(|x| x * 5.0);
    }
    let (_, grads) = model.loss_and_gradients(&batch).map_err(err)?;
    let analytic = grads.to_map();
    let keys: Vec<String> = analytic.keys().cloned().collect();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for key in keys {
        let a = &analytic[&key];
        let mut numeric = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            let orig = tensor_get(&model, &key, i);
            tensor_set(&mut model, &key, i, orig + FD_EPS);
            let up = model.batch_loss(&batch).map_err(err)?;
            tensor_set(&mut model, &key, i, orig - FD_EPS);
            let down = model.batch_loss(&batch).map_err(err)?;
            tensor_set(&mut model, &key, i, orig);
            numeric.push((up - down) / (2.0 * FD_EPS));
        }
        let diff = max_abs(a.iter().zip(&numeric).map(|(x, y)| x - y).collect::<Vec<_>>().iter());
        let scale = max_abs(a.iter()).max(max_abs(numeric.iter()));
        let rel = if scale == 0.0 { 0.0 } else { diff / scale };
        ensure(rel < FD_MAX_REL, || format!("{variant}/{encoder} key {key}: relative error {rel:.3e}"))?;
        worst = worst.max(rel);
        checked += a.len();
    }
    Ok((worst, checked))
}

fn tensor_get(m: &Model<f64>, key: &str, i: usize) -> f64 {
    let t = m.params.tensors().into_iter().find(|(k, _)| k == key).expect("key").1;
    *t.iter().nth(i).expect("index")
}

fn tensor_set(m: &mut Model<f64>, key: &str, i: usize, v: f64) {
    let mut t = m.params.tensors_mut().into_iter().find(|(k, _)| k == key).expect("key").1;
    *t.iter_mut().nth(i).expect("index") = v;
}

fn c1_gradient_check() -> Result<String, String> {
    let t0 = Instant::now();
    let cases = [
        (Variant::Neighbor, EncoderKind::Uni),
        (Variant::NeighborAe, EncoderKind::Uni),
        (Variant::OneTarget, EncoderKind::Uni),
        (Variant::SkipThought, EncoderKind::Uni),
        (Variant::KNeighbor(2), EncoderKind::Uni),
        (Variant::Neighbor, EncoderKind::Bi),
    ];
    let mut worst: f64 = 0.0;
    let mut total = 0;
    for (i, (v, e)) in cases.into_iter().enumerate() {
        let (w, n) = fd_check(v, e, 100 + i as u64)?;
        worst = worst.max(w);
        total += n;
    }
    let took = t0.elapsed();
    ensure(took < FD_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("{total} components over {} configurations, max relative error {worst:.2e}, {took:.1?}", cases.len()))
}

// 2. GRU algebra.

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || rng.random_range(-1.0..1.0))
}

fn c2_gru_algebra() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..GRU_CASES {
        let h = rng.random_range(1..10);
        let e = rng.random_range(1..8);
        let v = rng.random_range(5..12);
        let emb = Array2::from_shape_simple_fn((v, e), || rng.random_range(-2.0..2.0));
        let n = rng.random_range(0..7);
        let ids: Vec<usize> = (0..n).map(|_| rng.random_range(4..v)).collect();
        let vocab = Vocabulary::from_tokens((4..v).map(|i| format!("t{i}"))).map_err(err)?;
        let toks: Vec<String> = ids.iter().map(|&i| format!("t{i}")).collect();
        let s = encode_sentence(&vocab, &toks, n + 1);

        let zero = GruParams::<f64>::zeros(h, e);
        for dir in [Direction::Forward, Direction::Backward] {
            let out = encode_sequence(&zero, emb.view(), &s, dir);
            ensure(out.iter().all(|&x| x == 0.0), || format!("case {case}: zero model gave {out}"))?;
        }

        let mut p = CondGruParams::<f64>::random(h, e, 4, 0.5, &mut rng);
        p.gru = GruParams::random(h, e, 0.5, &mut rng);
        let hp = rand_vec(&mut rng, h);
        let x = rand_vec(&mut rng, e);
        let plain = gru_step(&p.gru, hp.view(), x.view());
        let cond = cond_gru_step(&p, hp.view(), x.view(), Array1::zeros(4).view());
        ensure(plain == cond, || format!("case {case}: conditional step with z = 0 differs"))?;

        let extra = rng.random_range(1..6);
        for dir in [Direction::Forward, Direction::Backward] {
            let a = encode_sequence(&p.gru, emb.view(), &s, dir);
            let b = encode_sequence(&p.gru, emb.view(), &s.with_len(s.len() + extra), dir);
            ensure(a == b, || format!("case {case}: padding changed the encoding"))?;
        }
    }
    Ok(format!("{GRU_CASES} cases each: zero model, z = 0 reduction, padding invariance (exact)"))
}

// 3. Parameter accounting.

fn c3_param_accounting() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen = Vec::new();
    for i in 0..5 {
        let encoder = if i % 2 == 0 { EncoderKind::Uni } else { EncoderKind::Bi };
        let d_z = 2 * rng.random_range(1..12);
        let d_emb = rng.random_range(1..16);
        let vocab_size = rng.random_range(5..60);
        let mk = |variant| ModelConfig {
            encoder,
            d_emb,
            d_z,
            vocab_size,
            max_len: 6,
            variant,
        };
        let skip = build_model::<f32>(&mk(Variant::SkipThought), 1).map_err(err)?.param_count();
        let nb = build_model::<f32>(&mk(Variant::Neighbor), 1).map_err(err)?.param_count();
        // GRU (3h^2 + 3hE), conditioning (3h d_z) and output head (Vh + V).
        let h = d_z;
        let group = 3 * h * h + 3 * h * d_emb + 3 * h * d_z + vocab_size * h + vocab_size;
        ensure(skip - nb == group, || format!("difference {} != group {group}", skip - nb))?;
        seen.push(format!("{encoder}/{d_emb}/{d_z}/{vocab_size}:{group}"));
    }
    Ok(format!("difference equals one decoder group on {}", seen.join(", ")))
}

// 4. Overfit then decode.

fn chain(n: usize, tokens: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<String>> = Vec::new();
    while out.len() < n {
        let len = rng.random_range(3..=6);
        let s: Vec<String> = (0..len).map(|_| format!("w{}", rng.random_range(0..tokens))).collect();
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn c4_overfit() -> Result<String, String> {
    let t0 = Instant::now();
    let doc = chain(32, 24, 11);
    let vocab = Vocabulary::from_tokens(words(24)).map_err(err)?;
    let len = 7;
    let examples: Vec<_> = iter_neighborhoods([doc], &vocab, Variant::OneTarget, len).collect();
    let cfg = ModelConfig {
        encoder: EncoderKind::Uni,
        d_emb: 32,
        d_z: 64,
        vocab_size: vocab.len(),
        max_len: len,
        variant: Variant::OneTarget,
    };
    let steps = 2000;
    ensure(steps <= OVERFIT_MAX_STEPS, || "step budget".into())?;
    let tc = TrainConfig {
        batch_size: examples.len(),
        max_steps: steps,
        seed: 1,
        adam: AdamConfig {
            alpha: 3e-3,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let model = build_model(&cfg, 5).map_err(err)?;
    let out = train(model, &examples, &tc, &mut NoObserver).map_err(err)?;
    let refs: Vec<_> = examples.iter().collect();
    let (nll, tokens) = out.model.token_nll(&refs).map_err(err)?;
    let per_token = nll / tokens as f32;
    let exact = examples
        .iter()
        .filter(|ex| {
            let z = out.model.encode(&ex.center);
            let got = greedy_decode_with(&out.model, 0, z.view(), len);
            got == ex.targets[0].ids[..ex.targets[0].real_len() - 1]
        })
        .count();
    let frac = exact as f64 / examples.len() as f64;
    let took = t0.elapsed();
    ensure(per_token < OVERFIT_NLL, || format!("per-token NLL {per_token}"))?;
    ensure(frac >= OVERFIT_EXACT, || format!("{exact}/{} exact decodes", examples.len()))?;
    ensure(took < OVERFIT_BUDGET, || format!("took {took:?}"))?;
    Ok(format!(
        "per-token NLL {per_token:.2e} after {steps} steps, {exact}/{} successors decoded exactly, {took:.1?}",
        examples.len()
    ))
}

// 5. Clipping bound and ADAM trace.

struct ClipWatch {
    components: usize,
    saturated: usize,
    violation: Option<String>,
}

impl TrainObserver for ClipWatch {
    fn on_step(&mut self, info: &StepInfo<'_>) -> nthought::Result<()> {
        for (key, t) in info.clipped.tensors() {
            for &g in t.iter() {
                self.components += 1;
                if g.abs() == 1.0 {
                    self.saturated += 1;
                }
                if !(-1.0..=1.0).contains(&g) && self.violation.is_none() {
                    self.violation = Some(format!("step {}: {key} component {g}", info.step));
                }
            }
        }
        Ok(())
    }
}

fn c5_clip_and_adam() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vocab = Vocabulary::from_tokens(words(20)).map_err(err)?;
    let docs = random_docs(&mut rng, 3, 8, 20, 8);
    let examples: Vec<_> = iter_neighborhoods(docs, &vocab, Variant::Neighbor, 8).collect();
    let cfg = ModelConfig {
        encoder: EncoderKind::Bi,
        d_emb: 8,
        d_z: 12,
        vocab_size: vocab.len(),
        max_len: 8,
        variant: Variant::Neighbor,
    };
    let mut model = build_model::<f32>(&cfg, 9).map_err(err)?;
    // Large weights give gradients well outside the bound.
    for (_, mut t) in model.params.tensors_mut() {
        t.mapv_inplace(|x| x * 30.0);
    }
    let tc = TrainConfig {
        batch_size: 4,
        max_steps: 500,
        adam: AdamConfig {
            alpha: 1e-2,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let mut watch = ClipWatch {
        components: 0,
        saturated: 0,
        violation: None,
    };
    train(model, &examples, &tc, &mut watch).map_err(err)?;
    if let Some(v) = watch.violation {
        return Err(v);
    }
    ensure(watch.saturated > 0, || "clipping never engaged".into())?;

    // Two ADAM steps on every parameter against the textbook update.
    let small = ModelConfig {
        encoder: EncoderKind::Uni,
        d_emb: 2,
        d_z: 2,
        vocab_size: 5,
        max_len: 3,
        variant: Variant::OneTarget,
    };
    let mut params = build_model::<f64>(&small, 1).map_err(err)?.params;
    let theta0: Vec<f64> = params.tensors().iter().flat_map(|(_, t)| t.iter().copied().collect::<Vec<_>>()).collect();
    let draws: Vec<Vec<f64>> = (0..2).map(|_| (0..theta0.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let ac = AdamConfig {
        alpha: 0.01,
        beta1: 0.8,
        beta2: 0.95,
        eps: 1e-6,
    };
    let mut state = AdamState::new(&params, ac.clone()).map_err(err)?;
    for g in &draws {
        let mut grads = params.zeros_like();
        let mut it = g.iter();
        for (_, mut t) in grads.tensors_mut() {
            t.iter_mut().for_each(|x| *x = *it.next().unwrap());
        }
        state.step(&mut params, &grads).map_err(err)?;
    }
    let got: Vec<f64> = params.tensors().iter().flat_map(|(_, t)| t.iter().copied().collect::<Vec<_>>()).collect();
    let mut worst: f64 = 0.0;
    for (i, &t0) in theta0.iter().enumerate() {
        let (mut m, mut v, mut th) = (0.0f64, 0.0f64, t0);
        for (t, g) in draws.iter().map(|d| d[i]).enumerate() {
            let t = (t + 1) as i32;
            m = ac.beta1 * m + (1.0 - ac.beta1) * g;
            v = ac.beta2 * v + (1.0 - ac.beta2) * g * g;
            let mh = m / (1.0 - ac.beta1.powi(t));
            let vh = v / (1.0 - ac.beta2.powi(t));
            th -= ac.alpha * mh / (vh.sqrt() + ac.eps);
        }
        worst = worst.max((th - got[i]).abs());
    }
    ensure(worst <= ADAM_TOL, || format!("ADAM trace off by {worst:.3e}"))?;
    Ok(format!(
        "{} clipped components in [-1, 1] over 500 steps ({} at the bound); ADAM two-step trace max error {worst:.1e}",
        watch.components, watch.saturated
    ))
}

// 6. Normalization and combine dimension.

fn sentences(rng: &mut ChaCha8Rng, n: usize, tokens: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(0..12);
            (0..len).map(|_| format!("w{}", rng.random_range(0..tokens + 3))).collect()
        })
        .collect()
}

fn c6_normalization() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let vocab = Vocabulary::from_tokens(words(26)).map_err(err)?;
    let mk = |encoder, d_emb, d_z, seed| {
        let cfg = ModelConfig {
            encoder,
            d_emb,
            d_z,
            vocab_size: vocab.len(),
            max_len: 30,
            variant: Variant::Neighbor,
        };
        build_model::<f32>(&cfg, seed)
    };
    let s = sentences(&mut rng, 40, 26);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let (u, b) = (mk(EncoderKind::Uni, 10, 14, 1).map_err(err)?, mk(EncoderKind::Bi, 10, 8, 2).map_err(err)?);
    let enc_u = ModelEncoder::with_vocab(&u, &vocab).map_err(err)?;
    let enc_b = ModelEncoder::with_vocab(&b, &vocab).map_err(err)?;
    let mut all = enc_u.encode(&s, true).map_err(err)?;
    all.extend(enc_b.encode(&s, true).map_err(err)?);
    let combine = CombineEncoder::new(enc_u, enc_b, CombineNorm::Joint).map_err(err)?;
    let c = combine.encode(&s, true).map_err(err)?;
    ensure(c.iter().all(|v| v.dim() == 22 && v.source == Source::Combine), || "combine dimension".into())?;
    all.extend(c);
    for v in &all {
        ensure(v.normalized, || "vector not flagged normalized".into())?;
        worst = worst.max((v.norm() - 1.0).abs());
        count += 1;
    }
    ensure(worst < NORM_TOL, || format!("norm off by {worst:.3e}"))?;

    let (u, b) = (mk(EncoderKind::Uni, 620, 1200, 3).map_err(err)?, mk(EncoderKind::Bi, 620, 1200, 4).map_err(err)?);
    let combine = CombineEncoder::new(
        ModelEncoder::with_vocab(&u, &vocab).map_err(err)?,
        ModelEncoder::with_vocab(&b, &vocab).map_err(err)?,
        CombineNorm::Joint,
    )
    .map_err(err)?;
    let big = combine.encode(&s[..3], true).map_err(err)?;
    ensure(combine.dim() == 2400 && big.iter().all(|v| v.dim() == 2400), || "published-size combine is not 2400".into())?;
    for v in &big {
        worst = worst.max((v.norm() - 1.0).abs());
    }
    ensure(worst < NORM_TOL, || format!("norm off by {worst:.3e}"))?;
    Ok(format!(
        "{} normalized vectors (uni, bi, combine) max |norm - 1| {worst:.1e}; 1200 + 1200 combine gives 2400",
        count + big.len()
    ))
}

// 7. Metric oracles.

fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let sy: f64 = y.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    cov / (sx * sy)
}

/// Rank by counting: one plus the number below, plus half the other ties.
fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&a| {
            let below = x.iter().filter(|&&b| b < a).count() as f64;
            let equal = x.iter().filter(|&&b| b == a).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

fn c7_metrics() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for inst in 0..100 {
        // Every other instance is rounded to force ties.
        let round = inst % 2 == 0;
        let mut draw = || {
            let v: f64 = rng.random_range(1.0..5.0);
            if round {
                (v * 2.0).round() / 2.0
            } else {
                v
            }
        };
        let pred: Vec<f64> = (0..50).map(|_| draw()).collect();
        let gold: Vec<f64> = (0..50).map(|_| draw()).collect();
        let c = correlation_metrics(&pred, &gold).map_err(err)?;
        let r = oracle_pearson(&pred, &gold);
        let rho = oracle_pearson(&oracle_ranks(&pred), &oracle_ranks(&gold));
        let mse = pred.iter().zip(&gold).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 50.0;
        for (name, a, b) in [("pearson", c.pearson, r), ("spearman", c.spearman, rho), ("mse", c.mse, mse)] {
            let d = (a - b).abs();
            ensure(d <= METRIC_TOL, || format!("instance {inst}: {name} {a} vs {b}"))?;
            worst = worst.max(d);
        }
    }
    for inst in 0..100 {
        let n = rng.random_range(1..60);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let gold: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let mut cm = [[0usize; 2]; 2];
        for (&p, &g) in pred.iter().zip(&gold) {
            cm[g][p] += 1;
        }
        let (tp, fp, fn_) = (cm[1][1] as f64, cm[0][1] as f64, cm[1][0] as f64);
        let acc = (cm[0][0] + cm[1][1]) as f64 / n as f64;
        let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
        let (a, f) = (accuracy(&pred, &gold).map_err(err)?, f1_score(&pred, &gold, 1).map_err(err)?);
        ensure(a == acc, || format!("instance {inst}: accuracy {a} vs {acc}"))?;
        // 2PR/(P+R) and 2tp/(2tp+fp+fn) agree up to rounding.
        ensure((f - f1).abs() <= 1e-15, || format!("instance {inst}: f1 {f} vs {f1}"))?;
    }
    Ok(format!("100 correlation instances max deviation {worst:.1e}; accuracy and F1 agree on 100 random predictions"))
}

// 8. Harness sensitivity.

/// Sentences are `["s<i>"]`; the encoder returns row `i` of a table.
struct TableEncoder(Array2<f64>);

impl SentenceEncoder for TableEncoder {
    fn dim(&self) -> usize {
        self.0.ncols()
    }
    fn source(&self) -> Source {
        Source::Uni
    }
    fn encode(&self, sentences: &[Vec<String>], normalize: bool) -> nthought::Result<Vec<SentenceVector>> {
        Ok(sentences
            .iter()
            .map(|s| {
                let i: usize = s[0][1..].parse().expect("table sentence");
                let v = SentenceVector::new(self.0.row(i).to_owned(), Source::Uni, false);
                if normalize {
                    v.normalized()
                } else {
                    v
                }
            })
            .collect())
    }
}

fn tok(i: usize) -> Vec<String> {
    vec![format!("s{i}")]
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let (u1, u2): (f64, f64) = (rng.random_range(f64::EPSILON..1.0), rng.random_range(0.0..1.0));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn c8_harness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // Relatedness that is an affine function of cosine similarity.
    let (n_train, n_test, d) = (200, 100, 8);
    let table = Array2::from_shape_simple_fn((2 * (n_train + n_test), d), || gaussian(&mut rng));
    let pairs: Vec<PairRecord> = (0..n_train + n_test)
        .map(|i| {
            let (u, v) = (table.row(2 * i), table.row(2 * i + 1));
            let cos = u.dot(&v) / (u.dot(&u).sqrt() * v.dot(&v).sqrt());
            PairRecord {
                score: 3.0 + 2.0 * cos,
                a: tok(2 * i),
                b: tok(2 * i + 1),
            }
        })
        .collect();
    let cfg = EvalConfig {
        normalize: true,
        ..EvalConfig::default()
    };
    let sick = eval_sick(&pairs[..n_train], &pairs[n_train..], &TableEncoder(table), &cfg).map_err(err)?;
    let r = sick.metrics["pearson_r"];
    ensure(r > SICK_MIN_R, || format!("relatedness r = {r}"))?;

    // Six separable clusters, TREC-shaped train/test split.
    let (classes, per, d) = (6, 40, 10);
    let centers = Array2::from_shape_simple_fn((classes, d), || 4.0 * gaussian(&mut rng));
    let n = classes * per * 2;
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let mut table = Array2::zeros((n, d));
    for (i, mut row) in table.axis_iter_mut(Axis(0)).enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = centers[(labels[i], j)] + 0.5 * gaussian(&mut rng);
        }
    }
    let recs: Vec<LabeledRecord> = (0..n)
        .map(|i| LabeledRecord {
            label: format!("C{}", labels[i]),
            tokens: tok(i),
        })
        .collect();
    let sep = eval_classification(Task::Trec, &recs[..n / 2], Some(&recs[n / 2..]), &TableEncoder(table), &EvalConfig::default())
        .map_err(err)?;
    let sep_acc = sep.metrics["accuracy"];
    ensure(sep_acc > SEPARABLE_MIN_ACC, || format!("separable accuracy {sep_acc}"))?;

    // Random vectors against balanced random labels, cross validated.
    let n = 400;
    let table = Array2::from_shape_simple_fn((n, 10), || gaussian(&mut rng));
    let recs: Vec<LabeledRecord> = (0..n)
        .map(|i| LabeledRecord {
            label: ["neg", "pos"][i % 2].to_string(),
            tokens: tok(i),
        })
        .collect();
    let chance = eval_classification(Task::Mr, &recs, None, &TableEncoder(table), &EvalConfig::default()).map_err(err)?;
    let chance_acc = chance.metrics["accuracy"];
    ensure((chance_acc - 0.5).abs() <= CHANCE_BAND, || format!("random-encoder accuracy {chance_acc}"))?;
    Ok(format!(
        "affine relatedness r = {r:.4}; separable 6-class accuracy {sep_acc:.3}; random encoder accuracy {chance_acc:.3}"
    ))
}

// 9. Determinism and manifest replay.

fn cli(args: &[&str]) -> Result<String, String> {
    let (mut out, mut errs) = (Vec::new(), Vec::new());
    let code = nthought_cli::run(std::iter::once("nthought").chain(args.iter().copied()), &mut out, &mut errs);
    if code != 0 {
        return Err(format!("`{}` exited {code}: {}", args.join(" "), String::from_utf8_lossy(&errs)));
    }
    Ok(String::from_utf8_lossy(&out).into_owned())
}

fn write_corpus(dir: &Path, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = random_docs(&mut rng, 4, 8, 30, 9);
    let text: String = docs
        .iter()
        .map(|d| d.iter().map(|s| format!("{}\n", s.join(" "))).collect::<String>())
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.join("corpus.txt");
    fs::write(&path, text).map_err(err)?;
    Ok(path.display().to_string())
}

fn c9_determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(err)?;
    let dir = tmp.path();
    let corpus = write_corpus(dir, 9)?;
    let p = |name: &str| dir.join(name).display().to_string();
    let train_args = |out: &str| {
        vec![
            "train".to_string(),
            "--corpus".into(),
            corpus.clone(),
            "--out".into(),
            out.to_string(),
            "--variant".into(),
            "neighbor-ae".into(),
            "--encoder".into(),
            "bi".into(),
            "--d-emb".into(),
            "8".into(),
            "--d-z".into(),
            "12".into(),
            "--len".into(),
            "10".into(),
            "--batch".into(),
            "8".into(),
            "--steps".into(),
            "40".into(),
            "--seed".into(),
            "17".into(),
            "--shuffle".into(),
        ]
    };
    let (a, b) = (p("a.ckpt"), p("b.ckpt"));
    for out in [&a, &b] {
        let args = train_args(out);
        cli(&args.iter().map(String::as_str).collect::<Vec<_>>())?;
    }
    let (ba, bb) = (fs::read(&a).map_err(err)?, fs::read(&b).map_err(err)?);
    ensure(ba == bb, || "same-seed checkpoints differ".into())?;

    let input = p("sentences.txt");
    fs::write(&input, "w1 w2 w3\nw4 w5\nw9 w2 w7 w7 w1\nw3\n").map_err(err)?;
    let vecs = p("vecs.bin");
    cli(&["encode", "--ckpt", &a, "--input", &input, "--normalize", "--out", &vecs])?;
    let train_tsv = p("train.tsv");
    let lines: String = (0..40)
        .map(|i| format!("{}\tw{} w{} w{}\n", ["neg", "pos"][i % 2], i % 7, (i * 3) % 11, i % 2))
        .collect();
    fs::write(&train_tsv, lines).map_err(err)?;
    let report = p("report.json");
    cli(&["eval", "--task", "subj", "--ckpt", &a, "--train", &train_tsv, "--folds", "4", "--out", &report])?;

    let mut replayed = Vec::new();
    for primary in [&a, &vecs, &report] {
        let manifest = format!("{primary}.manifest.json");
        let out = cli(&["replay", "--manifest", &manifest])?;
        ensure(out.lines().all(|l| l.starts_with("identical")), || format!("replay of {primary}: {out}"))?;
        replayed.push(out.lines().count());
    }
    Ok(format!(
        "two seed-17 train runs byte-identical ({} bytes); replay reproduced train ({} files), encode and eval outputs exactly",
        ba.len(),
        replayed[0]
    ))
}

// 10. Retrieval.

fn c10_retrieval() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let vocab = Vocabulary::from_tokens(words(30)).map_err(err)?;
    let cfg = ModelConfig {
        encoder: EncoderKind::Bi,
        d_emb: 12,
        d_z: 16,
        vocab_size: vocab.len(),
        max_len: 20,
        variant: Variant::Neighbor,
    };
    let model = build_model::<f32>(&cfg, 3).map_err(err)?;
    let enc = ModelEncoder::with_vocab(&model, &vocab).map_err(err)?;
    let mut db = sentences(&mut rng, 200, 30);
    db.sort();
    db.dedup();
    let vecs = enc.encode(&db, true).map_err(err)?;
    let texts: Vec<String> = db.iter().map(|s| s.join(" ")).collect();
    let index = VectorIndex::from_sentence_vectors(&vecs, texts).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (i, v) in vecs.iter().enumerate() {
        let hits = index.nearest_neighbors(v.values.view(), 1).map_err(err)?;
        // Distinct sentences can share a vector only if they tie exactly;
        // then the lower index wins and must also be similarity 1.
        ensure(hits[0].index == i || hits[0].similarity >= 1.0 - SELF_SIM_TOL, || format!("query {i} missed itself"))?;
        worst = worst.max((hits[0].similarity - 1.0).abs());
    }
    ensure(worst <= SELF_SIM_TOL, || format!("self similarity off by {worst:.3e}"))?;

    let mut checked = 0;
    for trial in 0..5 {
        let d = 8 + trial * 4;
        let m = Array2::from_shape_simple_fn((1000, d), || gaussian(&mut rng));
        let index = VectorIndex::new(m.clone(), (0..1000).map(|i| i.to_string()).collect()).map_err(err)?;
        let unit: Vec<Array1<f64>> = m.axis_iter(Axis(0)).map(|r| &r / r.dot(&r).sqrt()).collect();
        for _ in 0..10 {
            let q = Array1::from_shape_simple_fn(d, || gaussian(&mut rng));
            let k = rng.random_range(1..=50);
            let qn = &q / q.dot(&q).sqrt();
            let mut oracle: Vec<(f64, usize)> = unit.iter().enumerate().map(|(i, u)| (u.dot(&qn), i)).collect();
            oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let hits = index.nearest_neighbors(q.view(), k).map_err(err)?;
            let got: Vec<usize> = hits.iter().map(|h| h.index).collect();
            let want: Vec<usize> = oracle.iter().take(k).map(|o| o.1).collect();
            ensure(got == want, || format!("trial {trial}: ranking differs from full sort"))?;
            for (h, o) in hits.iter().zip(&oracle) {
                ensure((h.similarity - o.0).abs() < 1e-12, || "similarity differs from oracle".into())?;
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{} self-queries at similarity 1 (max deviation {worst:.1e}); {checked} queries on 1000-vector databases match a full sort",
        vecs.len()
    ))
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("finite-difference gradients", c1_gradient_check),
        ("GRU algebra", c2_gru_algebra),
        ("parameter accounting", c3_param_accounting),
        ("overfit and greedy decode", c4_overfit),
        ("clipping bound and ADAM trace", c5_clip_and_adam),
        ("normalization and combine dimension", c6_normalization),
        ("correlation and classification metrics", c7_metrics),
        ("evaluation harness sensitivity", c8_harness),
        ("determinism and manifest replay", c9_determinism),
        ("exact retrieval", c10_retrieval),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let took = t0.elapsed();
        match result {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail} [{took:.1?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {detail} [{took:.1?}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
