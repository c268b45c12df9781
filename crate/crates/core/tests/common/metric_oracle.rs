//! Random label-file pairs and an independent micro-F1 computation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use silverloop_core::{LabelRecord, LabelVector, MentionClass, TaskId};

fn random_vector(rng: &mut ChaCha8Rng, skew: f64) -> LabelVector {
    let drawn: Vec<MentionClass> = (0..TaskId::ALL.len())
        .map(|_| {
            if rng.gen_bool(skew) {
                MentionClass::NoMention
            } else {
                MentionClass::ALL[rng.gen_range(0..4)]
            }
        })
        .collect();
    LabelVector::from_findings(|t| drawn[t.index()])
}

/// A reference file and a prediction that copies it with per-pair flips.
pub fn random_pair(rng: &mut ChaCha8Rng) -> (Vec<LabelRecord>, Vec<LabelRecord>) {
    let n = rng.gen_range(1..=60);
    let skew = rng.gen_range(0.0..0.95);
    let flip = rng.gen_range(0.0..0.6);
    let mut reference = Vec::with_capacity(n);
    let mut prediction = Vec::with_capacity(n);
    for i in 0..n {
        let r = random_vector(rng, skew);
        let p = if rng.gen_bool(flip) { random_vector(rng, skew) } else { r };
        let id = format!("rep{}", i / 5);
        reference.push(LabelRecord { report_id: id.clone(), sentence_index: (i % 5) as u32, labels: r });
        prediction.push(LabelRecord { report_id: id, sentence_index: (i % 5) as u32, labels: p });
    }
    (reference, prediction)
}

/// Micro F1 computed from pooled set sizes: |truth ∩ predicted| and the
/// two set cardinalities, over every (sentence, finding) pair.
pub fn micro_f1(
    reference: &[LabelRecord],
    prediction: &[LabelRecord],
    positive: impl Fn(MentionClass) -> bool,
) -> (u64, u64, u64, f64) {
    let (mut truth, mut predicted, mut both) = (0u64, 0u64, 0u64);
    for (r, p) in reference.iter().zip(prediction) {
        for task in TaskId::ALL.into_iter().filter(|t| *t != TaskId::NoFinding) {
            let (a, b) = (positive(r.labels.get(task)), positive(p.labels.get(task)));
            truth += u64::from(a);
            predicted += u64::from(b);
            both += u64::from(a && b);
        }
    }
    let f1 = if truth + predicted == 0 {
        0.0
    } else {
        2.0 * both as f64 / (truth + predicted) as f64
    };
    (both, predicted - both, truth - both, f1)
}
