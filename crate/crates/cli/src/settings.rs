//! Resolved per-subcommand settings. Each is built by layering explicit
//! flags over an optional `--config` JSON object over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use nthought::corpus::Variant;
use nthought::evaluation::Task;
use nthought::models::{EncoderKind, ModelConfig};
use nthought::representation::CombineNorm;
use nthought::trainer::{AdamConfig, TrainConfig};
use serde::{Deserialize, Serialize};

fn must_exist(label: &str, p: &Path) -> Result<()> {
    if !p.is_file() {
        bail!("{label} file {} does not exist", p.display());
    }
    Ok(())
}

fn redirect(dir: &Path, p: &Path) -> PathBuf {
    dir.join(p.file_name().unwrap_or(p.as_os_str()))
}

/// Path with `suffix` appended to the full file name.
pub fn sibling(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Vocabulary file stored next to a checkpoint.
pub fn vocab_path(ckpt: &Path) -> PathBuf {
    sibling(ckpt, ".vocab")
}

fn d_emb() -> usize {
    620
}
fn d_z() -> usize {
    1200
}
fn len() -> usize {
    30
}
fn vocab_size() -> usize {
    20_000
}
fn batch() -> usize {
    64
}
fn steps() -> u64 {
    1000
}
fn log_every() -> u64 {
    100
}
fn clip() -> f64 {
    1.0
}
fn folds() -> usize {
    10
}
fn k() -> usize {
    3
}
fn max_len() -> usize {
    30
}
fn variant() -> Variant {
    Variant::Neighbor
}
fn encoder() -> EncoderKind {
    EncoderKind::Uni
}
fn alpha() -> f64 {
    AdamConfig::default().alpha
}
fn beta1() -> f64 {
    AdamConfig::default().beta1
}
fn beta2() -> f64 {
    AdamConfig::default().beta2
}
fn eps() -> f64 {
    AdamConfig::default().eps
}
fn max_iter() -> usize {
    nthought::evaluation::FitConfig::default().max_iter
}
fn tol() -> f64 {
    nthought::evaluation::FitConfig::default().tol
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub corpus: PathBuf,
    pub out: PathBuf,
    #[serde(default = "variant")]
    pub variant: Variant,
    #[serde(default = "encoder")]
    pub encoder: EncoderKind,
    #[serde(default = "d_emb")]
    pub d_emb: usize,
    #[serde(default = "d_z")]
    pub d_z: usize,
    /// Fixed sentence length, EOS included.
    #[serde(default = "len")]
    pub len: usize,
    /// Upper bound on the vocabulary, reserved tokens included.
    #[serde(default = "vocab_size")]
    pub vocab_size: usize,
    #[serde(default = "batch")]
    pub batch: usize,
    #[serde(default = "steps")]
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "alpha")]
    pub alpha: f64,
    #[serde(default = "beta1")]
    pub beta1: f64,
    #[serde(default = "beta2")]
    pub beta2: f64,
    #[serde(default = "eps")]
    pub eps: f64,
    #[serde(default = "clip")]
    pub clip: f64,
    #[serde(default)]
    pub shuffle: bool,
    #[serde(default = "log_every")]
    pub log_every: u64,
    /// CSV `step,loss` destination; `-` is standard output.
    #[serde(default)]
    pub loss_log: Option<String>,
    /// Steps between snapshot rewrites of `out`; 0 disables them.
    #[serde(default)]
    pub checkpoint_every: u64,
}

impl TrainSettings {
    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            encoder: self.encoder,
            d_emb: self.d_emb,
            d_z: self.d_z,
            vocab_size,
            max_len: self.len,
            variant: self.variant,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch,
            max_steps: self.steps,
            seed: self.seed,
            clip: self.clip,
            adam: AdamConfig {
                alpha: self.alpha,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            checkpoint_every: self.checkpoint_every,
            log_every: self.log_every,
            shuffle: self.shuffle,
        }
    }

    fn loss_log_file(&self) -> Option<PathBuf> {
        self.loss_log.as_deref().filter(|p| *p != "-").map(PathBuf::from)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelInputs {
    pub ckpt: PathBuf,
    /// Second checkpoint; with one uni and one bi model the sentence
    /// vector is their combine concatenation.
    #[serde(default)]
    pub ckpt2: Option<PathBuf>,
    /// Expanded word-vector table replacing the embedding of `ckpt`.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub lexicon2: Option<PathBuf>,
    #[serde(default)]
    pub combine_norm: CombineNorm,
}

impl ModelInputs {
    fn validate(&self) -> Result<()> {
        must_exist("checkpoint", &self.ckpt)?;
        must_exist("vocabulary", &vocab_path(&self.ckpt))?;
        if let Some(c) = &self.ckpt2 {
            must_exist("checkpoint", c)?;
            must_exist("vocabulary", &vocab_path(c))?;
        } else if self.lexicon2.is_some() {
            bail!("--lexicon2 needs --ckpt2");
        }
        for l in [&self.lexicon, &self.lexicon2].into_iter().flatten() {
            must_exist("lexicon", l)?;
        }
        Ok(())
    }

    fn files(&self) -> Vec<PathBuf> {
        let mut v = vec![self.ckpt.clone(), vocab_path(&self.ckpt)];
        if let Some(c) = &self.ckpt2 {
            v.push(c.clone());
            v.push(vocab_path(c));
        }
        v.extend(self.lexicon.iter().cloned());
        v.extend(self.lexicon2.iter().cloned());
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodeSettings {
    #[serde(flatten)]
    pub models: ModelInputs,
    /// One sentence per line; blank lines are skipped.
    pub input: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    pub task: Task,
    #[serde(flatten)]
    pub models: ModelInputs,
    pub train: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default = "folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "max_iter")]
    pub max_iter: usize,
    #[serde(default = "tol")]
    pub tol: f64,
    /// JSON report destination; standard output when absent.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieveSettings {
    #[serde(flatten)]
    pub models: ModelInputs,
    pub db: PathBuf,
    pub query: PathBuf,
    #[serde(default = "k")]
    pub k: usize,
    /// Drop database sentences identical to the query.
    #[serde(default)]
    pub exclude_self: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSettings {
    pub ckpt: PathBuf,
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    pub input: PathBuf,
    #[serde(default = "max_len")]
    pub max_len: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandSettings {
    pub ckpt: PathBuf,
    /// Text word vectors of the larger space.
    pub outer: PathBuf,
    pub out: PathBuf,
    /// Explicit ridge strength; overrides the automatic choice.
    #[serde(default)]
    pub ridge: Option<f64>,
    /// Plain least squares regardless of the shared-token count.
    #[serde(default)]
    pub ols: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InspectSettings {
    pub ckpt: PathBuf,
}

/// What the generic driver needs from each subcommand.
pub trait Settings: Serialize + serde::de::DeserializeOwned {
    const NAME: &'static str;
    /// Usage-level checks, run before any compute.
    fn validate(&self) -> Result<()>;
    fn inputs(&self) -> Vec<PathBuf>;
    /// Output files; the first is the primary output. Empty means the
    /// subcommand writes only to standard output and leaves no manifest.
    fn outputs(&self) -> Vec<PathBuf>;
    /// Points every output path into `dir`, keeping file names.
    fn redirect(&mut self, dir: &Path);
    fn seed(&self) -> Option<u64> {
        None
    }
}

impl Settings for TrainSettings {
    const NAME: &'static str = "train";

    fn validate(&self) -> Result<()> {
        self.model_config(self.vocab_size).validate()?;
        self.train_config().validate()?;
        if self.len < 2 {
            bail!("--len must leave room for at least one token and EOS");
        }
        must_exist("corpus", &self.corpus)
    }

    fn inputs(&self) -> Vec<PathBuf> {
        vec![self.corpus.clone()]
    }

    fn outputs(&self) -> Vec<PathBuf> {
        let mut v = vec![self.out.clone(), vocab_path(&self.out)];
        v.extend(self.loss_log_file());
        v
    }

    fn redirect(&mut self, dir: &Path) {
        self.out = redirect(dir, &self.out);
        if let Some(p) = self.loss_log_file() {
            self.loss_log = Some(redirect(dir, &p).display().to_string());
        }
    }

    fn seed(&self) -> Option<u64> {
        Some(self.seed)
    }
}

impl Settings for EncodeSettings {
    const NAME: &'static str = "encode";

    fn validate(&self) -> Result<()> {
        self.models.validate()?;
        must_exist("input", &self.input)
    }

    fn inputs(&self) -> Vec<PathBuf> {
        let mut v = self.models.files();
        v.push(self.input.clone());
        v
    }

    fn outputs(&self) -> Vec<PathBuf> {
        vec![self.out.clone()]
    }

    fn redirect(&mut self, dir: &Path) {
        self.out = redirect(dir, &self.out);
    }
}

impl Settings for EvalSettings {
    const NAME: &'static str = "eval";

    fn validate(&self) -> Result<()> {
        self.models.validate()?;
        must_exist("training", &self.train)?;
        match (&self.test, self.task.is_cross_validated()) {
            (Some(_), true) => bail!("{} is scored by cross validation; drop --test", self.task),
            (None, false) => bail!("{} needs --test", self.task),
            (Some(t), false) => must_exist("test", t)?,
            (None, true) => {}
        }
        if self.folds < 2 {
            bail!("--folds must be at least 2");
        }
        Ok(())
    }

    fn inputs(&self) -> Vec<PathBuf> {
        let mut v = self.models.files();
        v.push(self.train.clone());
        v.extend(self.test.iter().cloned());
        v
    }

    fn outputs(&self) -> Vec<PathBuf> {
        self.out.iter().cloned().collect()
    }

    fn redirect(&mut self, dir: &Path) {
        self.out = self.out.as_deref().map(|p| redirect(dir, p));
    }

    fn seed(&self) -> Option<u64> {
        Some(self.seed)
    }
}

impl Settings for RetrieveSettings {
    const NAME: &'static str = "retrieve";

    fn validate(&self) -> Result<()> {
        self.models.validate()?;
        must_exist("database", &self.db)?;
        must_exist("query", &self.query)?;
        if self.k == 0 {
            bail!("-k must be at least 1");
        }
        Ok(())
    }

    fn inputs(&self) -> Vec<PathBuf> {
        let mut v = self.models.files();
        v.push(self.db.clone());
        v.push(self.query.clone());
        v
    }

    fn outputs(&self) -> Vec<PathBuf> {
        self.out.iter().cloned().collect()
    }

    fn redirect(&mut self, dir: &Path) {
        self.out = self.out.as_deref().map(|p| redirect(dir, p));
    }
}

impl Settings for GenerateSettings {
    const NAME: &'static str = "generate";

    fn validate(&self) -> Result<()> {
        must_exist("checkpoint", &self.ckpt)?;
        must_exist("vocabulary", &vocab_path(&self.ckpt))?;
        if let Some(l) = &self.lexicon {
            must_exist("lexicon", l)?;
        }
        must_exist("input", &self.input)
    }

    fn inputs(&self) -> Vec<PathBuf> {
        let mut v = vec![self.ckpt.clone(), vocab_path(&self.ckpt)];
        v.extend(self.lexicon.iter().cloned());
        v.push(self.input.clone());
        v
    }

    fn outputs(&self) -> Vec<PathBuf> {
        self.out.iter().cloned().collect()
    }

    fn redirect(&mut self, dir: &Path) {
        self.out = self.out.as_deref().map(|p| redirect(dir, p));
    }
}

impl Settings for ExpandSettings {
    const NAME: &'static str = "expand-vocab";

    fn validate(&self) -> Result<()> {
        must_exist("checkpoint", &self.ckpt)?;
        must_exist("vocabulary", &vocab_path(&self.ckpt))?;
        must_exist("outer word-vector", &self.outer)?;
        if self.ols && self.ridge.is_some() {
            bail!("--ols and --ridge contradict each other");
        }
        if let Some(r) = self.ridge {
            if !(r >= 0.0) || !r.is_finite() {
                bail!("--ridge must be a nonnegative number");
            }
        }
        Ok(())
    }

    fn inputs(&self) -> Vec<PathBuf> {
        vec![self.ckpt.clone(), vocab_path(&self.ckpt), self.outer.clone()]
    }

    fn outputs(&self) -> Vec<PathBuf> {
        vec![self.out.clone()]
    }

    fn redirect(&mut self, dir: &Path) {
        self.out = redirect(dir, &self.out);
    }
}

impl Settings for InspectSettings {
    const NAME: &'static str = "inspect-ckpt";

    fn validate(&self) -> Result<()> {
        must_exist("checkpoint", &self.ckpt)
    }

    fn inputs(&self) -> Vec<PathBuf> {
        vec![self.ckpt.clone()]
    }

    fn outputs(&self) -> Vec<PathBuf> {
        Vec::new()
    }

    fn redirect(&mut self, _dir: &Path) {}
}
