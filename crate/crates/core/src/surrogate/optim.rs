use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::model::{Gradients, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with lazy embedding updates: a bucket's moments only advance on
/// steps where that bucket received a gradient. Bias correction uses the
/// global step count.
pub(crate) struct Adam {
    cfg: AdamConfig,
    step: i32,
    embedding: HashMap<u32, (Vec<f64>, Vec<f64>)>,
    dense: [(Vec<f64>, Vec<f64>); 4],
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &ModelParams) -> Self {
        let zeros = |n: usize| (vec![0.0; n], vec![0.0; n]);
        Adam {
            cfg,
            step: 0,
            embedding: HashMap::new(),
            dense: [
                zeros(params.hidden_w.len()),
                zeros(params.hidden_b.len()),
                zeros(params.head_w.len()),
                zeros(params.head_b.len()),
            ],
        }
    }

    /// Applies one update. Returns false if any updated value is not finite.
    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients) -> bool {
        self.step += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.step);
        let bc2 = 1.0 - c.beta2.powi(self.step);
        let update = |p: &mut [f32], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            let mut finite = true;
            for i in 0..p.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                let next = f64::from(p[i]) - c.learning_rate * mhat / (vhat.sqrt() + c.epsilon);
                p[i] = next as f32;
                finite &= p[i].is_finite();
            }
            finite
        };

        let mut finite = true;
        let d = params.config.embed_dim;
        for (&row, g) in &grads.embedding {
            let (m, v) = self
                .embedding
                .entry(row)
                .or_insert_with(|| (vec![0.0; d], vec![0.0; d]));
            let start = row as usize * d;
            finite &= update(&mut params.embedding[start..start + d], g, m, v);
        }
        let [hw, hb, ow, ob] = &mut self.dense;
        finite &= update(&mut params.hidden_w, &grads.hidden_w, &mut hw.0, &mut hw.1);
        finite &= update(&mut params.hidden_b, &grads.hidden_b, &mut hb.0, &mut hb.1);
        finite &= update(&mut params.head_w, &grads.head_w, &mut ow.0, &mut ow.1);
        finite &= update(&mut params.head_b, &grads.head_b, &mut ob.0, &mut ob.1);
        finite
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::hasher::FeatureHasher;
    use crate::surrogate::model::ModelConfig;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // with bias correction, step one is lr * sign(g) for |g| >> eps
        let cfg = ModelConfig {
            hasher: FeatureHasher::new(4, 0).unwrap(),
            embed_dim: 2,
            hidden_dim: 2,
        };
        let mut p = ModelParams::zeros(cfg).unwrap();
        let mut g = Gradients::zeros(&cfg);
        g.head_b[0] = 3.0;
        g.head_b[1] = -0.5;
        g.embedding.insert(2, vec![1.0, 0.0]);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        assert!(adam.step(&mut p, &g));
        assert!((f64::from(p.head_b[0]) + 5e-3).abs() < 1e-9);
        assert!((f64::from(p.head_b[1]) - 5e-3).abs() < 1e-9);
        assert_eq!(p.head_b[2], 0.0);
        assert!((f64::from(p.embedding[4]) + 5e-3).abs() < 1e-9);
        assert_eq!(p.embedding[0], 0.0);
    }
}
