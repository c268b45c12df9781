use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, TrainingMeta};
use super::model::{argmax_class, head_range, loss_and_grad, Example, Gradients, ModelConfig, ModelParams};
use super::optim::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::types::PartialLabelVector;

/// The rate used for full-size transformer fine-tuning; selectable but far
/// too small for the hashed model.
pub const TRANSFORMER_LEARNING_RATE: f64 = 5e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 5,
            batch_size: 32,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    /// Defaults for fine-tuning: a single epoch.
    pub fn fine_tune() -> Self {
        TrainConfig {
            epochs: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::Validation("epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation("learning_rate must be positive".into()));
        }
        let in_unit = |b: f64| (0.0..1.0).contains(&b);
        if !in_unit(self.beta1) || !in_unit(self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Validation("invalid Adam hyperparameters".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean of per-batch losses.
    pub train_loss: f64,
    pub val_parity: Option<f64>,
    pub elapsed_secs: f64,
}

pub enum Init<'a> {
    /// Fresh parameters drawn from the training seed.
    Fresh(ModelConfig),
    From(&'a Checkpoint),
}

/// Examples with their features hashed once up front.
pub struct HashedSet<'a> {
    items: Vec<(Vec<u32>, &'a PartialLabelVector)>,
    fingerprint: String,
}

impl<'a> HashedSet<'a> {
    pub fn new(examples: &'a [Example], config: &ModelConfig) -> Self {
        HashedSet {
            items: examples
                .iter()
                .map(|e| (config.hasher.features(&e.text), &e.labels))
                .collect(),
            fingerprint: fingerprint(examples),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// FNV-1a over texts and labels, in order.
pub fn fingerprint(examples: &[Example]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for e in examples {
        eat(e.text.as_bytes());
        eat(&[0]);
        for (task, class) in e.labels.iter() {
            eat(&[task.index() as u8, class.ordinal() as u8]);
        }
        eat(&[0xff]);
    }
    format!("{h:016x}")
}

/// Fraction of labelled pairs where the argmax matches the label.
pub fn parity_on(params: &ModelParams, data: &HashedSet) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for (features, labels) in &data.items {
        let act = params.activations(features);
        for (task, class) in labels.iter() {
            total += 1;
            hit += usize::from(argmax_class(task, &act.probs[head_range(task)]) == class);
        }
    }
    if total == 0 {
        return 1.0;
    }
    hit as f64 / total as f64
}

/// Sequential single-writer training loop.
pub struct Trainer {
    params: ModelParams,
    adam: Adam,
    grads: Gradients,
    config: TrainConfig,
    rng: ChaCha8Rng,
    meta: TrainingMeta,
    epoch: usize,
}

impl Trainer {
    pub fn new(init: Init, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let (params, meta) = match init {
            Init::Fresh(model) => (
                ModelParams::init(model, config.seed)?,
                TrainingMeta {
                    epochs_seen: 0,
                    steps: 0,
                    data_fingerprint: String::new(),
                },
            ),
            Init::From(ck) => (ck.params.clone(), ck.meta.clone()),
        };
        Ok(Trainer {
            adam: Adam::new(config.adam(), &params),
            grads: Gradients::zeros(&params.config),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            params,
            config,
            meta,
            epoch: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn model_config(&self) -> &ModelConfig {
        &self.params.config
    }

    /// One pass over `data`. A non-finite loss or update aborts, naming the
    /// epoch and batch.
    pub fn run_epoch(&mut self, data: &HashedSet, validation: Option<&HashedSet>) -> Result<EpochLog> {
        if data.is_empty() {
            return Err(Error::Precondition("empty training set".into()));
        }
        let start = Instant::now();
        self.epoch += 1;
        let mut order: Vec<usize> = (0..data.len()).collect();
        if self.config.shuffle {
            order.shuffle(&mut self.rng);
        }
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for (b, chunk) in order.chunks(self.config.batch_size).enumerate() {
            let batch: Vec<_> = chunk
                .iter()
                .map(|&i| (data.items[i].0.as_slice(), data.items[i].1))
                .collect();
            let loss = loss_and_grad(&self.params, &batch, Some(&mut self.grads))?;
            let nonfinite = Error::NonFinite {
                epoch: self.epoch,
                batch: b,
            };
            if !loss.is_finite() {
                return Err(nonfinite);
            }
            if !self.adam.step(&mut self.params, &self.grads) {
                return Err(nonfinite);
            }
            self.meta.steps += 1;
            loss_sum += loss;
            n_batches += 1;
        }
        self.meta.epochs_seen += 1;
        self.meta.data_fingerprint = data.fingerprint.clone();
        Ok(EpochLog {
            epoch: self.epoch,
            train_loss: loss_sum / n_batches as f64,
            val_parity: validation.map(|v| parity_on(&self.params, v)),
            elapsed_secs: start.elapsed().as_secs_f64(),
        })
    }

    pub fn into_checkpoint(self) -> Checkpoint {
        Checkpoint {
            params: self.params,
            meta: self.meta,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
}

/// Trains for `config.epochs` epochs, reporting each epoch to `on_epoch`.
pub fn train_with(
    dataset: &[Example],
    config: &TrainConfig,
    init: Init,
    validation: Option<&[Example]>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::Precondition("empty training set".into()));
    }
    let mut trainer = Trainer::new(init, *config)?;
    let data = HashedSet::new(dataset, trainer.model_config());
    let val = validation.map(|v| HashedSet::new(v, trainer.model_config()));
    let mut log = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let entry = trainer.run_epoch(&data, val.as_ref())?;
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(TrainOutcome {
        checkpoint: trainer.into_checkpoint(),
        log,
    })
}

pub fn train(
    dataset: &[Example],
    config: &TrainConfig,
    init: Init,
    validation: Option<&[Example]>,
) -> Result<TrainOutcome> {
    train_with(dataset, config, init, validation, |_| {})
}

/// Continues training `checkpoint` on partially labelled annotations.
pub fn fine_tune(
    checkpoint: &Checkpoint,
    annotations: &[Example],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if annotations.is_empty() {
        return Err(Error::Precondition("no annotations to fine-tune on".into()));
    }
    train(annotations, config, Init::From(checkpoint), None)
}

/// Appends `round(fraction * annotations.len())` teacher examples drawn
/// without replacement from `teacher_pool`.
pub fn mix_teacher(
    annotations: &[Example],
    teacher_pool: &[Example],
    fraction: f64,
    seed: u64,
) -> Result<Vec<Example>> {
    if !(fraction >= 0.0 && fraction.is_finite()) {
        return Err(Error::Validation(format!("mix fraction {fraction} must be >= 0")));
    }
    let want = (fraction * annotations.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = annotations.to_vec();
    out.extend(
        teacher_pool
            .choose_multiple(&mut rng, want.min(teacher_pool.len()))
            .cloned(),
    );
    Ok(out)
}
