//! A one-target model memorizes a small chain of distinct sentences and
//! greedy decoding then reproduces each successor.

use nthought::corpus::{iter_neighborhoods, Variant, Vocabulary};
use nthought::explore::greedy_decode_with;
use nthought::models::{build_model, EncoderKind, ModelConfig};
use nthought::trainer::{train, AdamConfig, NoObserver, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn chain(n: usize, words: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<String>> = Vec::new();
    while out.len() < n {
        let len = rng.random_range(3..=6);
        let s: Vec<String> = (0..len).map(|_| format!("w{}", rng.random_range(0..words))).collect();
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

#[test]
fn memorizes_and_decodes_successors() {
    let n = 32;
    let doc = chain(n, 24, 11);
    let vocab = Vocabulary::from_tokens((0..24).map(|i| format!("w{i}"))).unwrap();
    let len = 7;
    let examples: Vec<_> = iter_neighborhoods([doc.clone()], &vocab, Variant::OneTarget, len).collect();
    assert_eq!(examples.len(), n - 1);
    let cfg = ModelConfig {
        encoder: EncoderKind::Uni,
        d_emb: 32,
        d_z: 64,
        vocab_size: vocab.len(),
        max_len: len,
        variant: Variant::OneTarget,
    };
    let model = build_model(&cfg, 5).unwrap();
    let tc = TrainConfig {
        batch_size: examples.len(),
        max_steps: 800,
        seed: 1,
        adam: AdamConfig { alpha: 3e-3, ..AdamConfig::default() },
        ..TrainConfig::default()
    };
    let out = train(model, &examples, &tc, &mut NoObserver).unwrap();
    let refs: Vec<_> = examples.iter().collect();
    let (nll, tokens) = out.model.token_nll(&refs).unwrap();
    let per_token = nll / tokens as f32;
    let mut exact = 0;
    for ex in &examples {
        let z = out.model.encode(&ex.center);
        let got = greedy_decode_with(&out.model, 0, z.view(), len);
        let want: Vec<usize> = ex.targets[0].ids[..ex.targets[0].real_len() - 1].to_vec();
        exact += usize::from(got == want);
    }
    assert!(per_token < 0.1, "per-token NLL {per_token}");
    assert!(exact * 10 >= examples.len() * 9, "{exact} exact decodes");
}
