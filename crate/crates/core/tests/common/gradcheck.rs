//! Central finite-difference oracle for the student's analytic gradients.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use silverloop_core::surrogate::{
    backward, loss, Example, FeatureHasher, ModelConfig, ModelParams, Param, HEAD_WIDTH,
};
use silverloop_core::{MentionClass, PartialLabelVector, TaskId};

pub const EPS: f64 = 1e-4;
/// Denominator floor for coordinates whose true gradient is ~0.
pub const REL_FLOOR: f64 = 1e-6;

const WORDS: &[&str] = &[
    "no", "possible", "pleural", "effusion", "edema", "there", "is", "a", "small", "right",
    "not", "seen", "pneumonia", ";", ".", "cardiomegaly", "fracture", "tube", "mild", "or",
];

pub fn small_config(seed: u64) -> ModelConfig {
    ModelConfig {
        hasher: FeatureHasher::new(128, seed).unwrap(),
        embed_dim: 8,
        hidden_dim: 6,
    }
}

/// Random params with a larger spread than the training init so that
/// tanh and softmax are exercised away from their linear regime.
pub fn random_params(rng: &mut ChaCha8Rng, config: ModelConfig) -> ModelParams {
    let mut p = ModelParams::zeros(config).unwrap();
    for t in [&mut p.embedding, &mut p.hidden_w, &mut p.hidden_b, &mut p.head_w, &mut p.head_b] {
        for v in t.iter_mut() {
            *v = rng.gen_range(-0.8f32..0.8);
        }
    }
    p
}

pub fn random_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(0..9);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// A random non-empty partial label vector.
pub fn random_mask(rng: &mut ChaCha8Rng) -> PartialLabelVector {
    let mut out = PartialLabelVector::new();
    while out.is_empty() {
        for task in TaskId::ALL {
            if rng.gen_bool(0.4) {
                let classes = task.classes();
                out.insert(task, classes[rng.gen_range(0..classes.len())]).unwrap();
            }
        }
    }
    out
}

pub fn random_batch(rng: &mut ChaCha8Rng, size: usize) -> Vec<Example> {
    (0..size)
        .map(|_| Example::new(random_text(rng), random_mask(rng)))
        .collect()
}

/// Coordinates worth checking: every touched embedding cell is eligible,
/// plus all dense parameters.
pub fn candidate_params(params: &ModelParams, batch: &[Example]) -> Vec<Param> {
    let c = params.config;
    let mut rows: Vec<usize> = batch
        .iter()
        .flat_map(|e| c.hasher.features(&e.text))
        .map(|f| f as usize)
        .collect();
    rows.sort_unstable();
    rows.dedup();
    let mut out = Vec::new();
    for row in rows {
        for col in 0..c.embed_dim {
            out.push(Param::Embedding { row, col });
        }
    }
    for i in 0..c.embed_dim {
        for j in 0..c.hidden_dim {
            out.push(Param::HiddenW { i, j });
        }
    }
    for j in 0..c.hidden_dim {
        out.push(Param::HiddenB(j));
        for k in 0..HEAD_WIDTH {
            out.push(Param::HeadW { j, k });
        }
    }
    for k in 0..HEAD_WIDTH {
        out.push(Param::HeadB(k));
    }
    out
}

/// Central difference using the step sizes actually representable in f32.
pub fn numeric_grad(params: &ModelParams, batch: &[Example], p: Param) -> f64 {
    let orig = params.get(p);
    let mut work = params.clone();
    let up = (f64::from(orig) + EPS) as f32;
    let down = (f64::from(orig) - EPS) as f32;
    work.set(p, up);
    let lp = loss(batch, &work).unwrap();
    work.set(p, down);
    let lm = loss(batch, &work).unwrap();
    (lp - lm) / (f64::from(up) - f64::from(down))
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Max relative error over `n_coords` sampled coordinates.
pub fn check(params: &ModelParams, batch: &[Example], n_coords: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (_, grads) = backward(batch, params).unwrap();
    let cands = candidate_params(params, batch);
    let mut worst: f64 = 0.0;
    for p in cands.choose_multiple(rng, n_coords.min(cands.len())) {
        let a = grads.get(*p, &params.config);
        let n = numeric_grad(params, batch, *p);
        worst = worst.max(rel_err(a, n));
    }
    worst
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[allow(dead_code)]
pub fn single(task: TaskId, class: MentionClass) -> PartialLabelVector {
    [(task, class)].into_iter().collect()
}
