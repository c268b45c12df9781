//! Brute-force cue-window oracle for the rule engine, over random small
//! rule sets and short sentences of space-separated tokens.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use silverloop_core::rules::RuleSet;
use silverloop_core::{LabelVector, MentionClass, TaskId, N_TASKS};

const VOCAB: &[&str] = &["aa", "bb", "cc", "dd", "ee", "ff", "gg", "hh", "ii", "jj"];
const PUNCT: &[&str] = &[".", ";", ",", ":"];

fn phrase(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

pub fn random_rules(rng: &mut ChaCha8Rng) -> RuleSet {
    let mut cues = |n: usize| (0..rng.gen_range(0..=n)).map(|_| phrase(rng, 2)).collect::<Vec<_>>();
    let (pre, post, unc) = (cues(2), cues(2), cues(2));
    let mut mention_phrases = BTreeMap::new();
    mention_phrases.insert(TaskId::NoFinding, Vec::new());
    for task in TaskId::findings() {
        let n = rng.gen_range(1..=2);
        mention_phrases.insert(task, (0..n).map(|_| phrase(rng, 3)).collect());
    }
    RuleSet {
        version: "random".into(),
        window: rng.gen_range(1..=6),
        negation_pre_cues: pre,
        negation_post_cues: post,
        uncertainty_cues: unc,
        mention_phrases,
    }
}

pub fn random_sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(0..=14);
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.15) {
                *PUNCT.choose(rng).unwrap()
            } else {
                *VOCAB.choose(rng).unwrap()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn split(p: &str) -> Vec<&str> {
    p.split(' ').collect()
}

/// Every (first, last) token position where any of `cues` occurs.
fn occurrences(tokens: &[&str], cues: &[String]) -> Vec<(isize, isize)> {
    let mut out = Vec::new();
    for cue in cues {
        let c = split(cue);
        for start in 0..tokens.len() {
            if tokens[start..].starts_with(&c) {
                out.push((start as isize, (start + c.len()) as isize - 1));
            }
        }
    }
    out
}

fn boundary_free(tokens: &[&str], from: isize, to: isize) -> bool {
    (from..to).all(|i| !matches!(tokens[i as usize], "." | ";" | ":" | "!" | "?"))
}

fn in_scope_before(tokens: &[&str], cues: &[(isize, isize)], first: isize, window: isize) -> bool {
    cues.iter()
        .any(|&(_, last)| last < first && first - last <= window && boundary_free(tokens, last + 1, first))
}

fn in_scope_after(tokens: &[&str], cues: &[(isize, isize)], last: isize, window: isize) -> bool {
    cues.iter()
        .any(|&(start, _)| start > last && start - last <= window && boundary_free(tokens, last + 1, start))
}

pub fn oracle(text: &str, rules: &RuleSet) -> LabelVector {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let w = rules.window as isize;
    let pre = occurrences(&tokens, &rules.negation_pre_cues);
    let post = occurrences(&tokens, &rules.negation_post_cues);
    let unc = occurrences(&tokens, &rules.uncertainty_cues);
    let mut labels = [MentionClass::NoMention; N_TASKS];
    for task in TaskId::findings() {
        let phrases: Vec<Vec<&str>> = rules.mention_phrases[&task].iter().map(|p| split(p)).collect();
        let mut best = MentionClass::NoMention;
        let mut i = 0;
        while i < tokens.len() {
            let longest = phrases
                .iter()
                .filter(|p| tokens[i..].starts_with(p))
                .map(Vec::len)
                .max();
            let Some(len) = longest else {
                i += 1;
                continue;
            };
            let (first, last) = (i as isize, (i + len) as isize - 1);
            let class = if in_scope_before(&tokens, &unc, first, w) || in_scope_after(&tokens, &unc, last, w) {
                MentionClass::Uncertain
            } else if in_scope_before(&tokens, &pre, first, w) || in_scope_after(&tokens, &post, last, w) {
                MentionClass::Negative
            } else {
                MentionClass::Positive
            };
            best = best.max(class);
            i += len;
        }
        labels[task.index()] = best;
    }
    let findings_present = labels
        .iter()
        .any(|c| matches!(c, MentionClass::Uncertain | MentionClass::Positive));
    labels[TaskId::NoFinding.index()] = if findings_present {
        MentionClass::Negative
    } else {
        MentionClass::Positive
    };
    LabelVector::from_array(labels).unwrap()
}
