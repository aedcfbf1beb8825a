use std::fs;
use std::path::Path;

use serde_json::Value;

const CORPUS: &str = "The cat sat on the mat.\nIt was a sunny day.\nThe dog barked loudly.\nNobody cared.\n\n\
A new document starts here.\nIt has three sentences.\nThis is the last one.\n";

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("nthought").chain(args.iter().copied());
    let code = nthought_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn train_small(dir: &Path, name: &str, extra: &[&str]) -> String {
    fs::write(dir.join("corpus.txt"), CORPUS).unwrap();
    let out = p(dir, name);
    let corpus = p(dir, "corpus.txt");
    let mut args = vec![
        "train", "--corpus", &corpus, "--out", &out, "--d-emb", "6", "--d-z", "8", "--len", "8", "--steps", "5",
    ];
    args.extend_from_slice(extra);
    let (code, _, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    out
}

#[test]
fn inspect_counts_sum_to_total() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_small(dir.path(), "m.ckpt", &["--variant", "skip-thought", "--encoder", "bi"]);
    let (code, out, _) = run(&["inspect-ckpt", "--ckpt", &ckpt]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    let sum: u64 = v["params"].as_array().unwrap().iter().map(|p| p["count"].as_u64().unwrap()).sum();
    assert_eq!(sum, v["param_count"].as_u64().unwrap());
    assert_eq!(v["config"]["variant"], "skip-thought");
    assert_eq!(v["training"]["steps"], 5);
}

#[test]
fn usage_errors_exit_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("corpus.txt"), CORPUS).unwrap();
    let out = p(dir.path(), "m.ckpt");
    let corpus = p(dir.path(), "corpus.txt");
    let (code, _, err) = run(&["train", "--corpus", &corpus, "--out", &out, "--encoder", "bi", "--d-z", "7"]);
    assert_eq!(code, 2);
    assert!(err.contains("even"), "{err}");
    assert!(!dir.path().join("m.ckpt.vocab").exists());
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["train", "--no-such-flag"]).0, 2);
    assert_eq!(run(&["train", "--corpus", "/nonexistent", "--out", &out]).0, 2);
    assert_eq!(run(&[]).0, 2);
    assert_eq!(run(&["train", "--help"]).0, 0);
}

#[test]
fn version_is_json() {
    let (code, out, _) = run(&["--version"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["name"], "nthought");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("corpus.txt"), CORPUS).unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"d_emb": 4, "d_z": 6, "steps": 9, "variant": "one-target"}"#).unwrap();
    let (code, out, _) = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--corpus",
        &p(dir.path(), "corpus.txt"),
        "--out",
        &p(dir.path(), "m.ckpt"),
        "--steps",
        "3",
        "--dump-config",
    ]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!((v["d_emb"].as_u64(), v["steps"].as_u64()), (Some(4), Some(3)));
    assert_eq!(v["variant"], "one-target");
    assert!(!dir.path().join("m.ckpt").exists());
    fs::write(&cfg, r#"{"d_embedding": 4}"#).unwrap();
    let (code, _, _) = run(&["train", "--config", cfg.to_str().unwrap(), "--corpus", "x", "--out", "y"]);
    assert_eq!(code, 2);
}

#[test]
fn replay_detects_changed_inputs_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_small(dir.path(), "m.ckpt", &[]);
    let manifest = format!("{ckpt}.manifest.json");
    assert_eq!(run(&["replay", "--manifest", &manifest]).0, 0);

    let mut m: Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    m["outputs"][0][1] = Value::String("0".repeat(64));
    fs::write(&manifest, m.to_string()).unwrap();
    let (code, out, _) = run(&["replay", "--manifest", &manifest]);
    assert_eq!(code, 1);
    assert!(out.contains("DIFFERS"));

    fs::write(dir.path().join("corpus.txt"), "changed\n").unwrap();
    assert_eq!(run(&["replay", "--manifest", &manifest]).0, 2);
}

#[test]
fn encode_retrieve_generate_round() {
    let dir = tempfile::tempdir().unwrap();
    let uni = train_small(dir.path(), "u.ckpt", &[]);
    let bi = train_small(dir.path(), "b.ckpt", &["--encoder", "bi"]);
    let input = p(dir.path(), "in.txt");
    fs::write(&input, "the cat sat.\n\nnobody cared\n").unwrap();
    let vecs = p(dir.path(), "v.bin");
    let (code, _, err) = run(&["encode", "--ckpt", &uni, "--ckpt2", &bi, "--input", &input, "--normalize", "--out", &vecs]);
    assert_eq!(code, 0, "{err}");
    let vs = nthought::representation::read_vectors(fs::File::open(&vecs).unwrap()).unwrap();
    assert_eq!(vs.len(), 2);
    assert_eq!(vs[0].dim(), 16);
    assert!(vs.iter().all(|v| v.normalized && (v.norm() - 1.0).abs() < 1e-6));
    assert_eq!(run(&["encode", "--ckpt", &uni, "--ckpt2", &uni, "--input", &input, "--out", &vecs]).0, 1);

    let db = p(dir.path(), "corpus.txt");
    let (code, out, _) = run(&["retrieve", "--ckpt", &uni, "--db", &db, "--query", &db, "-k", "1"]);
    assert_eq!(code, 0);
    let first_block: Vec<&str> = out.lines().take(2).collect();
    assert_eq!(first_block[0], "The cat sat on the mat.");
    assert!(first_block[1].starts_with("1\t1.000000\tThe cat sat on the mat."), "{out}");
    let (_, out, _) = run(&["retrieve", "--ckpt", &uni, "--db", &db, "--query", &db, "-k", "1", "--exclude-self"]);
    assert!(!out.lines().nth(1).unwrap().ends_with("The cat sat on the mat."));

    let (code, out, _) = run(&["generate", "--ckpt", &uni, "--input", &input, "--max-len", "4"]);
    assert_eq!(code, 0);
    let gen: Vec<&str> = out.lines().collect();
    assert_eq!(gen[0], "the cat sat.");
    assert!(gen[1].split_whitespace().count() <= 4);
}
