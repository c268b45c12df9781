use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hasher::FeatureHasher;
use crate::error::{Error, Result};
use crate::types::{MentionClass, PartialLabelVector, TaskId, N_TASKS};

pub const DEFAULT_EMBED_DIM: usize = 64;
pub const DEFAULT_HIDDEN_DIM: usize = 128;
pub const INIT_SCALE: f32 = 0.05;

/// Total head outputs: four per finding, two for `no_finding`.
pub const HEAD_WIDTH: usize = 13 * 4 + 2;

const fn head_offsets() -> [usize; N_TASKS + 1] {
    let mut out = [0; N_TASKS + 1];
    let mut i = 0;
    while i < N_TASKS {
        let width = if i == TaskId::NoFinding as usize { 2 } else { 4 };
        out[i + 1] = out[i] + width;
        i += 1;
    }
    out
}

const HEAD_OFFSETS: [usize; N_TASKS + 1] = head_offsets();

/// Column range of `task` in the concatenated head.
pub fn head_range(task: TaskId) -> std::ops::Range<usize> {
    HEAD_OFFSETS[task.index()]..HEAD_OFFSETS[task.index() + 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hasher: FeatureHasher,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hasher: FeatureHasher::default(),
            embed_dim: DEFAULT_EMBED_DIM,
            hidden_dim: DEFAULT_HIDDEN_DIM,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.hasher.validate()?;
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Validation("model dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Student parameters, stored as f32 and evaluated in f64.
///
/// Layout is row-major: `embedding[bucket * d + i]`,
/// `hidden_w[i * h + j]`, `head_w[j * HEAD_WIDTH + k]`. The per-task heads
/// are concatenated column-wise in canonical task order; see [`head_range`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub embedding: Vec<f32>,
    pub hidden_w: Vec<f32>,
    pub hidden_b: Vec<f32>,
    pub head_w: Vec<f32>,
    pub head_b: Vec<f32>,
}

/// Addresses one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Embedding { row: usize, col: usize },
    HiddenW { i: usize, j: usize },
    HiddenB(usize),
    HeadW { j: usize, k: usize },
    HeadB(usize),
}

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (d, h) = (config.embed_dim, config.hidden_dim);
        Ok(ModelParams {
            config,
            embedding: vec![0.0; config.hasher.n_buckets * d],
            hidden_w: vec![0.0; d * h],
            hidden_b: vec![0.0; h],
            head_w: vec![0.0; h * HEAD_WIDTH],
            head_b: vec![0.0; HEAD_WIDTH],
        })
    }

    /// Weights uniform in ±[`INIT_SCALE`], biases zero.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in p
            .embedding
            .iter_mut()
            .chain(p.hidden_w.iter_mut())
            .chain(p.head_w.iter_mut())
        {
            *w = rng.gen_range(-INIT_SCALE..INIT_SCALE);
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn tensors(&self) -> [(&'static str, &Vec<f32>); 5] {
        [
            ("embedding", &self.embedding),
            ("hidden_w", &self.hidden_w),
            ("hidden_b", &self.hidden_b),
            ("head_w", &self.head_w),
            ("head_b", &self.head_b),
        ]
    }

    fn slot(&self, p: Param) -> (usize, usize) {
        let (d, h) = (self.config.embed_dim, self.config.hidden_dim);
        match p {
            Param::Embedding { row, col } => (0, row * d + col),
            Param::HiddenW { i, j } => (1, i * h + j),
            Param::HiddenB(j) => (2, j),
            Param::HeadW { j, k } => (3, j * HEAD_WIDTH + k),
            Param::HeadB(k) => (4, k),
        }
    }

    pub fn get(&self, p: Param) -> f32 {
        let (t, i) = self.slot(p);
        self.tensors()[t].1[i]
    }

    pub fn set(&mut self, p: Param, value: f32) {
        let (t, i) = self.slot(p);
        let tensor = match t {
            0 => &mut self.embedding,
            1 => &mut self.hidden_w,
            2 => &mut self.hidden_b,
            3 => &mut self.head_w,
            _ => &mut self.head_b,
        };
        tensor[i] = value;
    }

    pub(crate) fn activations(&self, features: &[u32]) -> Activations {
        let (d, h) = (self.config.embed_dim, self.config.hidden_dim);
        let mut x = vec![0.0f64; d];
        if !features.is_empty() {
            for &f in features {
                let row = &self.embedding[f as usize * d..(f as usize + 1) * d];
                for (xi, &e) in x.iter_mut().zip(row) {
                    *xi += f64::from(e);
                }
            }
            let inv = 1.0 / features.len() as f64;
            x.iter_mut().for_each(|v| *v *= inv);
        }

        let mut z: Vec<f64> = self.hidden_b.iter().map(|&b| f64::from(b)).collect();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.hidden_w[i * h..(i + 1) * h];
            for (zj, &w) in z.iter_mut().zip(row) {
                *zj += xi * f64::from(w);
            }
        }
        z.iter_mut().for_each(|v| *v = v.tanh());

        let mut logits: Vec<f64> = self.head_b.iter().map(|&b| f64::from(b)).collect();
        for (j, &zj) in z.iter().enumerate() {
            let row = &self.head_w[j * HEAD_WIDTH..(j + 1) * HEAD_WIDTH];
            for (l, &w) in logits.iter_mut().zip(row) {
                *l += zj * f64::from(w);
            }
        }
        for task in TaskId::ALL {
            softmax_in_place(&mut logits[head_range(task)]);
        }
        Activations { x, z, probs: logits }
    }

    /// Per-task class distributions for one sentence, in the task's class
    /// order (`no_finding`: negative, positive).
    pub fn forward(&self, text: &str) -> BTreeMap<TaskId, Vec<f64>> {
        let act = self.activations(&self.config.hasher.features(text));
        TaskId::ALL
            .iter()
            .map(|&t| (t, act.probs[head_range(t)].to_vec()))
            .collect()
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}

pub(crate) struct Activations {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// Per-task softmax outputs, concatenated like the head.
    pub probs: Vec<f64>,
}

/// Argmax within a task's slice; ties go to the lowest ordinal class.
pub fn argmax_class(task: TaskId, probs: &[f64]) -> MentionClass {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    task.classes()[best]
}

/// One training example: text plus whichever task labels are known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub text: String,
    pub labels: PartialLabelVector,
}

impl Example {
    pub fn new(text: impl Into<String>, labels: PartialLabelVector) -> Self {
        Example {
            text: text.into(),
            labels,
        }
    }
}

/// Gradients of the mean loss. Embedding rows appear only when touched.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: BTreeMap<u32, Vec<f64>>,
    pub hidden_w: Vec<f64>,
    pub hidden_b: Vec<f64>,
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

impl Gradients {
    pub fn zeros(config: &ModelConfig) -> Self {
        let (d, h) = (config.embed_dim, config.hidden_dim);
        Gradients {
            embedding: BTreeMap::new(),
            hidden_w: vec![0.0; d * h],
            hidden_b: vec![0.0; h],
            head_w: vec![0.0; h * HEAD_WIDTH],
            head_b: vec![0.0; HEAD_WIDTH],
        }
    }

    fn reset(&mut self) {
        self.embedding.clear();
        for t in [
            &mut self.hidden_w,
            &mut self.hidden_b,
            &mut self.head_w,
            &mut self.head_b,
        ] {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn get(&self, p: Param, config: &ModelConfig) -> f64 {
        let h = config.hidden_dim;
        match p {
            Param::Embedding { row, col } => self
                .embedding
                .get(&(row as u32))
                .map_or(0.0, |r| r[col]),
            Param::HiddenW { i, j } => self.hidden_w[i * h + j],
            Param::HiddenB(j) => self.hidden_b[j],
            Param::HeadW { j, k } => self.head_w[j * HEAD_WIDTH + k],
            Param::HeadB(k) => self.head_b[k],
        }
    }
}

fn check_batch<'a, I>(batch: I) -> Result<usize>
where
    I: IntoIterator<Item = &'a PartialLabelVector>,
{
    let mut pairs = 0;
    let mut any = false;
    for labels in batch {
        any = true;
        if labels.is_empty() {
            return Err(Error::Precondition("example with no labels".into()));
        }
        for (task, class) in labels.iter() {
            task.check(class)?;
        }
        pairs += labels.len();
    }
    if !any {
        return Err(Error::Precondition("empty batch".into()));
    }
    Ok(pairs)
}

/// Masked mean cross-entropy over hashed examples. When `grads` is given
/// it is overwritten with the gradient.
pub(crate) fn loss_and_grad(
    params: &ModelParams,
    batch: &[(&[u32], &PartialLabelVector)],
    mut grads: Option<&mut Gradients>,
) -> Result<f64> {
    let n_pairs = check_batch(batch.iter().map(|(_, l)| *l))? as f64;
    let (d, h) = (params.config.embed_dim, params.config.hidden_dim);
    if let Some(g) = grads.as_deref_mut() {
        g.reset();
    }

    let mut total = 0.0;
    let mut dlogits = vec![0.0f64; HEAD_WIDTH];
    let mut dpre = vec![0.0f64; h];
    let mut dx = vec![0.0f64; d];
    for (features, labels) in batch {
        let act = params.activations(features);
        dlogits.iter_mut().for_each(|v| *v = 0.0);
        for (task, class) in labels.iter() {
            let range = head_range(task);
            let slot = task.class_slot(class).expect("checked above");
            total -= act.probs[range.start + slot].ln();
            for (k, g) in range.clone().zip(&mut dlogits[range.clone()]) {
                *g = act.probs[k] / n_pairs;
            }
            dlogits[range.start + slot] -= 1.0 / n_pairs;
        }
        let Some(g) = grads.as_deref_mut() else {
            continue;
        };

        for (gb, dl) in g.head_b.iter_mut().zip(&dlogits) {
            *gb += dl;
        }
        for (j, &zj) in act.z.iter().enumerate() {
            let grow = &mut g.head_w[j * HEAD_WIDTH..(j + 1) * HEAD_WIDTH];
            let wrow = &params.head_w[j * HEAD_WIDTH..(j + 1) * HEAD_WIDTH];
            let mut dz = 0.0;
            for k in 0..HEAD_WIDTH {
                grow[k] += zj * dlogits[k];
                dz += f64::from(wrow[k]) * dlogits[k];
            }
            dpre[j] = dz * (1.0 - zj * zj);
        }
        for (gb, dp) in g.hidden_b.iter_mut().zip(&dpre) {
            *gb += dp;
        }
        for (i, &xi) in act.x.iter().enumerate() {
            let grow = &mut g.hidden_w[i * h..(i + 1) * h];
            let wrow = &params.hidden_w[i * h..(i + 1) * h];
            let mut acc = 0.0;
            for j in 0..h {
                grow[j] += xi * dpre[j];
                acc += f64::from(wrow[j]) * dpre[j];
            }
            dx[i] = acc;
        }
        if !features.is_empty() {
            let inv = 1.0 / features.len() as f64;
            for &f in *features {
                let row = g.embedding.entry(f).or_insert_with(|| vec![0.0; d]);
                for (r, v) in row.iter_mut().zip(&dx) {
                    *r += v * inv;
                }
            }
        }
    }
    Ok(total / n_pairs)
}

fn hashed<'a>(params: &ModelParams, batch: &'a [Example]) -> Vec<(Vec<u32>, &'a PartialLabelVector)> {
    batch
        .iter()
        .map(|e| (params.config.hasher.features(&e.text), &e.labels))
        .collect()
}

/// Mean cross-entropy over every labelled (sentence, task) pair.
pub fn loss(batch: &[Example], params: &ModelParams) -> Result<f64> {
    let owned = hashed(params, batch);
    let view: Vec<_> = owned.iter().map(|(f, l)| (f.as_slice(), *l)).collect();
    loss_and_grad(params, &view, None)
}

/// Loss and its exact gradient with respect to every parameter.
pub fn backward(batch: &[Example], params: &ModelParams) -> Result<(f64, Gradients)> {
    let owned = hashed(params, batch);
    let view: Vec<_> = owned.iter().map(|(f, l)| (f.as_slice(), *l)).collect();
    let mut g = Gradients::zeros(&params.config);
    let loss = loss_and_grad(params, &view, Some(&mut g))?;
    Ok((loss, g))
}
