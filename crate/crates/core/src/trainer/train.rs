use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::clip::clip_params;
use crate::corpus::NeighborhoodExample;
use crate::models::{Model, Params, TrainingRecord};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_steps: u64,
    pub seed: u64,
    /// Element-wise gradient bound.
    pub clip: f64,
    pub adam: AdamConfig,
    /// Steps between checkpoint callbacks; 0 disables them.
    pub checkpoint_every: u64,
    /// Steps between log records; 0 disables them.
    pub log_every: u64,
    /// Reshuffle example order every epoch with a seeded generator. Off
    /// means batches follow corpus order.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            max_steps: 1000,
            seed: 0,
            clip: 1.0,
            adam: AdamConfig::default(),
            checkpoint_every: 0,
            log_every: 100,
            shuffle: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.clip > 0.0) {
            return Err(Error::Config("clip bound must be positive".into()));
        }
        self.adam.validate()
    }

    pub fn record(&self, steps: u64) -> TrainingRecord {
        TrainingRecord {
            alpha: self.adam.alpha,
            beta1: self.adam.beta1,
            beta2: self.adam.beta2,
            eps: self.adam.eps,
            clip: self.clip,
            batch_size: self.batch_size,
            seed: self.seed,
            steps,
        }
    }
}

/// What a training step exposes to observers.
pub struct StepInfo<'a> {
    /// 1-based step number.
    pub step: u64,
    /// Mean example loss of the batch.
    pub loss: f32,
    /// Gradients after clipping, before the optimizer update.
    pub clipped: &'a Params<f32>,
}

/// Hooks into the training loop. All methods default to doing nothing.
pub trait TrainObserver {
    fn on_step(&mut self, _info: &StepInfo<'_>) -> Result<()> {
        Ok(())
    }

    /// Called every `log_every` steps.
    fn on_log(&mut self, _step: u64, _loss: f32) -> Result<()> {
        Ok(())
    }

    /// Called every `checkpoint_every` steps with the updated model.
    fn on_checkpoint(&mut self, _step: u64, _model: &Model<f32>) -> Result<()> {
        Ok(())
    }

    /// Called once when training halts on a non-finite loss or gradient,
    /// with the last model whose parameters were all finite.
    fn on_divergence(&mut self, _step: u64, _last_good: &Model<f32>) -> Result<()> {
        Ok(())
    }
}

pub struct NoObserver;

impl TrainObserver for NoObserver {}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    /// Batch loss at every step.
    pub losses: Vec<f32>,
    pub steps: u64,
}

/// Runs `cfg.max_steps` optimizer steps over `examples`, cycling through
/// them in fixed-size batches. Single-threaded and deterministic given the
/// config.
pub fn train(
    mut model: Model<f32>,
    examples: &[NeighborhoodExample],
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::Config("no training examples for this variant".into()));
    }
    let mut adam = AdamState::new(&model.params, cfg.adam.clone())?;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cursor = examples.len();
    let mut losses = Vec::with_capacity(cfg.max_steps as usize);
    let clip = cfg.clip as f32;

    for step in 1..=cfg.max_steps {
        if cursor >= order.len() {
            if cfg.shuffle {
                order.shuffle(&mut rng);
            }
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(order.len());
        let batch: Vec<&NeighborhoodExample> = order[cursor..end].iter().map(|&i| &examples[i]).collect();
        cursor = end;

        let (loss, mut grads) = match model.loss_and_gradients(&batch) {
            Ok(r) => r,
            Err(Error::NonFinite(msg)) => return diverged(step, &model, observer, msg),
            Err(e) => return Err(e),
        };
        clip_params(&mut grads, clip);
        observer.on_step(&StepInfo {
            step,
            loss,
            clipped: &grads,
        })?;
        let before = model.params.clone();
        if let Err(Error::NonFinite(msg)) = adam.step(&mut model.params, &grads) {
            return diverged(step, &model, observer, msg);
        }
        if !model.params.all_finite() {
            model.params = before;
            return diverged(step, &model, observer, "parameters".into());
        }
        losses.push(loss);
        if cfg.log_every > 0 && step % cfg.log_every == 0 {
            observer.on_log(step, loss)?;
        }
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
            observer.on_checkpoint(step, &model)?;
        }
    }
    Ok(TrainOutcome {
        model,
        losses,
        steps: cfg.max_steps,
    })
}

fn diverged(
    step: u64,
    last_good: &Model<f32>,
    observer: &mut dyn TrainObserver,
    what: String,
) -> Result<TrainOutcome> {
    observer.on_divergence(step, last_good)?;
    Err(Error::NonFinite(format!("training diverged at step {step}: {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{iter_neighborhoods, Variant, Vocabulary};
    use crate::models::{build_model, EncoderKind, ModelConfig};

    fn setup(variant: Variant) -> (Model<f32>, Vec<NeighborhoodExample>) {
        let v = Vocabulary::from_tokens(["a", "b", "c", "d", "e"]).unwrap();
        let doc: Vec<Vec<String>> = ["a b", "c d e", "e a", "b b c", "d"]
            .iter()
            .map(|s| s.split(' ').map(String::from).collect())
            .collect();
        let exs: Vec<_> = iter_neighborhoods(vec![doc], &v, variant, 5).collect();
        let cfg = ModelConfig {
            encoder: EncoderKind::Uni,
            d_emb: 4,
            d_z: 6,
            vocab_size: v.len(),
            max_len: 5,
            variant,
        };
        (build_model(&cfg, 1).unwrap(), exs)
    }

    struct Recorder {
        max_abs: f32,
        steps: Vec<u64>,
        logs: Vec<u64>,
        checkpoints: Vec<u64>,
    }

    impl TrainObserver for Recorder {
        fn on_step(&mut self, info: &StepInfo<'_>) -> Result<()> {
            for (_, t) in info.clipped.tensors() {
                for &x in t.iter() {
                    self.max_abs = self.max_abs.max(x.abs());
                }
            }
            self.steps.push(info.step);
            Ok(())
        }
        fn on_log(&mut self, step: u64, _loss: f32) -> Result<()> {
            self.logs.push(step);
            Ok(())
        }
        fn on_checkpoint(&mut self, step: u64, _m: &Model<f32>) -> Result<()> {
            self.checkpoints.push(step);
            Ok(())
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let (model, exs) = setup(Variant::Neighbor);
        let cfg = TrainConfig {
            batch_size: 2,
            max_steps: 7,
            adam: AdamConfig {
                alpha: 0.0,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        };
        let out = train(model.clone(), &exs, &cfg, &mut NoObserver).unwrap();
        assert_eq!(out.model, model);
        assert_eq!(out.losses.len(), 7);
    }

    #[test]
    fn hooks_and_clip_bound() {
        let (model, exs) = setup(Variant::SkipThought);
        let cfg = TrainConfig {
            batch_size: 2,
            max_steps: 10,
            clip: 0.01,
            checkpoint_every: 4,
            log_every: 5,
            adam: AdamConfig {
                alpha: 0.05,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        };
        let mut rec = Recorder {
            max_abs: 0.0,
            steps: vec![],
            logs: vec![],
            checkpoints: vec![],
        };
        train(model, &exs, &cfg, &mut rec).unwrap();
        assert!(rec.max_abs <= 0.01);
        assert_eq!(rec.steps, (1..=10).collect::<Vec<_>>());
        assert_eq!(rec.logs, [5, 10]);
        assert_eq!(rec.checkpoints, [4, 8]);
    }

    #[test]
    fn deterministic_with_and_without_shuffle() {
        for shuffle in [false, true] {
            let (model, exs) = setup(Variant::OneTarget);
            let cfg = TrainConfig {
                batch_size: 3,
                max_steps: 12,
                shuffle,
                ..TrainConfig::default()
            };
            let a = train(model.clone(), &exs, &cfg, &mut NoObserver).unwrap();
            let b = train(model, &exs, &cfg, &mut NoObserver).unwrap();
            assert_eq!(a.model, b.model);
            assert_eq!(a.losses, b.losses);
        }
    }

    #[test]
    fn divergence_reports_last_good_model() {
        struct Catch(Option<Model<f32>>);
        impl TrainObserver for Catch {
            fn on_divergence(&mut self, _s: u64, m: &Model<f32>) -> Result<()> {
                self.0 = Some(m.clone());
                Ok(())
            }
        }
        let (mut model, exs) = setup(Variant::Neighbor);
        model.params.decoders[0].out.b[4] = f32::INFINITY;
        let mut c = Catch(None);
        let err = train(model.clone(), &exs, &TrainConfig::default(), &mut c).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert!(c.0.is_some());
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let (model, _) = setup(Variant::Neighbor);
        assert!(train(model, &[], &TrainConfig::default(), &mut NoObserver).is_err());
    }
}
