//! Template-based synthetic report generator with exact gold labels.
//!
//! Template syntax:
//! - `{0}`, `{1}`: finding slots, each filled with a phrase for a distinct
//!   randomly chosen task; the template declares the gold class per slot.
//! - `{side}`, `{size}`: optional modifiers (may expand to nothing).
//! - `[no|negative for]`: a cue. The first alternative is used in clean
//!   text; the others are synonym swaps.
//!
//! Noise only perturbs text. Gold labels come from the template.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::RuleSet;
use crate::tokenize::tokenize;
use crate::types::{LabelRecord, LabelVector, MentionClass, SentenceRecord, TaskId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub text: String,
    /// Gold class for `{0}`, `{1}`, ...
    pub slots: Vec<MentionClass>,
    #[serde(default = "one")]
    pub weight: u32,
}

fn one() -> u32 {
    1
}

impl Template {
    pub fn new(text: &str, slots: &[MentionClass], weight: u32) -> Self {
        Template {
            text: text.to_string(),
            slots: slots.to_vec(),
            weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Per eligible word probability of one character edit.
    pub typo_rate: f64,
    /// Per finding/cue probability of replacing the primary phrase with a synonym.
    pub synonym_swap_rate: f64,
    /// Per cue word probability of one character edit. Cue typos are what
    /// make the teacher wrong.
    #[serde(default)]
    pub cue_typo_rate: f64,
}

impl NoiseConfig {
    pub fn none() -> Self {
        NoiseConfig {
            typo_rate: 0.0,
            synonym_swap_rate: 0.0,
            cue_typo_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_reports: usize,
    /// Inclusive range of sentences per report.
    pub sentences_per_report: (usize, usize),
    #[serde(default = "default_template_bank")]
    pub template_bank: Vec<Template>,
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_reports: 1000,
            sentences_per_report: (4, 10),
            template_bank: default_template_bank(),
            noise: NoiseConfig {
                typo_rate: 0.01,
                synonym_swap_rate: 0.1,
                cue_typo_rate: 0.0,
            },
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let p = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        p("typo_rate", self.noise.typo_rate)?;
        p("synonym_swap_rate", self.noise.synonym_swap_rate)?;
        p("cue_typo_rate", self.noise.cue_typo_rate)?;
        if self.n_reports < 1 {
            return Err(Error::Validation("n_reports must be at least 1".into()));
        }
        let (lo, hi) = self.sentences_per_report;
        if lo < 1 || lo > hi {
            return Err(Error::Validation(format!(
                "invalid sentences_per_report range ({lo}, {hi})"
            )));
        }
        if self.template_bank.is_empty() {
            return Err(Error::Validation("template bank is empty".into()));
        }
        if self.template_bank.iter().all(|t| t.weight == 0) {
            return Err(Error::Validation("all template weights are zero".into()));
        }
        for t in &self.template_bank {
            if t.slots.len() > FINDINGS.len() {
                return Err(Error::Validation(format!("too many slots in {:?}", t.text)));
            }
            if t.slots.iter().any(|c| *c == MentionClass::NoMention) {
                return Err(Error::Validation(format!(
                    "slot declared no_mention in {:?}",
                    t.text
                )));
            }
            Pattern::parse(&t.text)?;
        }
        Ok(())
    }
}

/// Surface phrases per finding: the primary (known to the fixture rules)
/// followed by synonyms (known only to the default rules).
pub const FINDINGS: [(TaskId, &[&str]); 13] = [
    (
        TaskId::EnlargedCardiomediastinum,
        &["enlarged cardiomediastinum", "widened mediastinum", "mediastinal widening"],
    ),
    (
        TaskId::Cardiomegaly,
        &["cardiomegaly", "enlarged heart", "cardiac enlargement"],
    ),
    (TaskId::LungLesion, &["pulmonary nodule", "lung mass", "pulmonary mass"]),
    (TaskId::AirspaceOpacity, &["opacity", "opacities", "airspace disease"]),
    (TaskId::Edema, &["edema", "pulmonary edema", "vascular congestion"]),
    (
        TaskId::Consolidation,
        &["consolidation", "consolidations", "airspace consolidation"],
    ),
    (TaskId::Pneumonia, &["pneumonia", "infectious process", "infection"]),
    (TaskId::Atelectasis, &["atelectasis", "collapse", "atelectatic change"]),
    (TaskId::Pneumothorax, &["pneumothorax", "pneumothoraces", "ptx"]),
    (
        TaskId::PleuralEffusion,
        &["pleural effusion", "effusion", "pleural fluid"],
    ),
    (
        TaskId::PleuralOther,
        &["pleural thickening", "pleural scarring", "fibrothorax"],
    ),
    (TaskId::Fracture, &["fracture", "fractures", "rib fracture"]),
    (
        TaskId::SupportDevices,
        &["endotracheal tube", "pacemaker", "picc line", "nasogastric tube"],
    ),
];

const SIDES: [&str; 4] = ["left", "right", "bilateral", ""];
const SIZES: [&str; 5] = ["small", "moderate", "large", "trace", ""];

pub fn default_template_bank() -> Vec<Template> {
    use MentionClass::*;
    vec![
        // no findings
        Template::new("The cardiomediastinal silhouette is within normal limits.", &[], 3),
        Template::new("Comparison is made to the prior radiograph.", &[], 3),
        Template::new("Frontal and lateral views of the chest were obtained.", &[], 3),
        Template::new("The osseous structures are unremarkable.", &[], 2),
        Template::new("The lungs are clear.", &[], 2),
        Template::new("[no] acute cardiopulmonary process.", &[], 3),
        Template::new("Heart size is normal.", &[], 2),
        Template::new("Stable {side} hilar contours.", &[], 1),
        // positive
        Template::new("There is a {size} {side} {0}.", &[Positive], 4),
        Template::new("{side} {0} is present.", &[Positive], 2),
        Template::new("Interval increase in {side} {0}.", &[Positive], 2),
        Template::new("Persistent {size} {0}.", &[Positive], 2),
        Template::new("{0} and {1} are again noted.", &[Positive, Positive], 1),
        // negative
        Template::new("[no|negative for|free of] {0}.", &[Negative], 4),
        Template::new("[no|negative for] {0} or {1}.", &[Negative, Negative], 2),
        Template::new("There is [no] {side} {0}.", &[Negative], 2),
        Template::new("[no] evidence of {0}.", &[Negative], 2),
        Template::new("{0} is [not seen|not identified].", &[Negative], 2),
        Template::new("The lungs are clear [without|free of] {0}.", &[Negative], 2),
        // uncertain
        Template::new("[possible|possibly|questionable] {side} {0}.", &[Uncertain], 3),
        Template::new("[cannot exclude|concerning for|suggestive of] {0}.", &[Uncertain], 2),
        Template::new("Findings [may represent|could represent] {0}.", &[Uncertain], 2),
        Template::new("{0} [may represent|could represent] {1}.", &[Uncertain, Uncertain], 1),
        // mixed
        Template::new("[possible|possibly] {0}; [no] {1}.", &[Uncertain, Negative], 2),
        Template::new("There is a {size} {0}; [no] {1}.", &[Positive, Negative], 2),
        Template::new("{side} {0} [without|free of] {1}.", &[Positive, Negative], 2),
        Template::new(
            "{0} is [not seen|not identified]; there is a {size} {1}.",
            &[Negative, Positive],
            1,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Literal(String),
    Slot(usize),
    Side,
    Size,
    Cue(Vec<String>),
}

struct Pattern(Vec<Piece>);

impl Pattern {
    fn parse(text: &str) -> Result<Pattern> {
        let bad = |why: &str| Error::Validation(format!("template {text:?}: {why}"));
        let mut pieces = Vec::new();
        let mut rest = text;
        while !rest.is_empty() {
            let next = rest.find(['{', '[']).unwrap_or(rest.len());
            if next > 0 {
                pieces.push(Piece::Literal(rest[..next].to_string()));
                rest = &rest[next..];
                continue;
            }
            let (close, is_slot) = if rest.starts_with('{') {
                ('}', true)
            } else {
                (']', false)
            };
            let end = rest.find(close).ok_or_else(|| bad("unclosed placeholder"))?;
            let inner = &rest[1..end];
            pieces.push(if is_slot {
                match inner {
                    "side" => Piece::Side,
                    "size" => Piece::Size,
                    n => Piece::Slot(n.parse().map_err(|_| bad("unknown placeholder"))?),
                }
            } else {
                let alts: Vec<String> = inner.split('|').map(|s| s.trim().to_string()).collect();
                if alts.iter().any(|a| a.is_empty()) {
                    return Err(bad("empty cue alternative"));
                }
                Piece::Cue(alts)
            });
            rest = &rest[end + 1..];
        }
        Ok(Pattern(pieces))
    }

    fn n_slots(&self) -> usize {
        self.0
            .iter()
            .filter_map(|p| match p {
                Piece::Slot(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }
}

/// Words a typo must never produce: anything appearing in a rule phrase.
fn protected_words() -> HashSet<String> {
    let rules = RuleSet::builtin_default();
    rules
        .negation_pre_cues
        .iter()
        .chain(&rules.negation_post_cues)
        .chain(&rules.uncertainty_cues)
        .chain(rules.mention_phrases.values().flatten())
        .flat_map(|p| tokenize(p))
        .collect()
}

fn typo(word: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    match rng.gen_range(0..4) {
        0 if n >= 2 => {
            let i = rng.gen_range(0..n - 1);
            chars.swap(i, i + 1);
        }
        1 if n >= 2 => {
            chars.remove(rng.gen_range(0..n));
        }
        2 => {
            let i = rng.gen_range(0..n);
            chars[i] = (b'a' + rng.gen_range(0..26u8)) as char;
        }
        _ => {
            let i = rng.gen_range(0..=n);
            chars.insert(i, (b'a' + rng.gen_range(0..26u8)) as char);
        }
    }
    chars.into_iter().collect()
}

struct Generator<'a> {
    noise: NoiseConfig,
    protected: &'a HashSet<String>,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn chance(&mut self, p: f64) -> bool {
        p > 0.0 && self.rng.gen::<f64>() < p
    }

    fn pick_alternative<'s>(&mut self, alts: &'s [String]) -> &'s str {
        if alts.len() > 1 && self.chance(self.noise.synonym_swap_rate) {
            &alts[self.rng.gen_range(1..alts.len())]
        } else {
            &alts[0]
        }
    }

    /// Applies typo noise word by word. Only purely alphabetic words of
    /// length >= 2 are touched, and the result never collides with a rule word.
    fn noisy(&mut self, words: &str, rate: f64, out: &mut String) {
        for (i, word) in words.split(' ').enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let core_len = word.trim_end_matches(|c: char| c.is_ascii_punctuation()).len();
            let (core, tail) = word.split_at(core_len);
            let eligible = core.len() >= 2 && core.chars().all(|c| c.is_ascii_alphabetic());
            if eligible && self.chance(rate) {
                let candidate = (0..4)
                    .map(|_| typo(core, &mut self.rng))
                    .find(|c| c != core && !self.protected.contains(&c.to_lowercase()));
                out.push_str(candidate.as_deref().unwrap_or(core));
            } else {
                out.push_str(core);
            }
            out.push_str(tail);
        }
    }

    fn sentence(&mut self, template: &Template, pattern: &Pattern) -> (String, LabelVector) {
        let n_slots = pattern.n_slots();
        let mut order: Vec<usize> = (0..FINDINGS.len()).collect();
        order.shuffle(&mut self.rng);
        let chosen = &order[..n_slots];

        let mut text = String::new();
        for piece in &pattern.0 {
            match piece {
                Piece::Literal(s) => self.noisy(s, self.noise.typo_rate, &mut text),
                Piece::Side => {
                    let s = SIDES[self.rng.gen_range(0..SIDES.len())];
                    self.noisy(s, self.noise.typo_rate, &mut text);
                }
                Piece::Size => {
                    let s = SIZES[self.rng.gen_range(0..SIZES.len())];
                    self.noisy(s, self.noise.typo_rate, &mut text);
                }
                Piece::Slot(i) => {
                    let phrases: Vec<String> =
                        FINDINGS[chosen[*i]].1.iter().map(|s| s.to_string()).collect();
                    let phrase = self.pick_alternative(&phrases).to_string();
                    text.push_str(&phrase);
                }
                Piece::Cue(alts) => {
                    let cue = self.pick_alternative(alts).to_string();
                    self.noisy(&cue, self.noise.cue_typo_rate, &mut text);
                }
            }
        }
        let text = tidy(&text);
        let gold = LabelVector::from_findings(|task| {
            chosen
                .iter()
                .zip(&template.slots)
                .filter(|(f, _)| FINDINGS[**f].0 == task)
                .map(|(_, c)| *c)
                .max()
                .unwrap_or(MentionClass::NoMention)
        });
        (text, gold)
    }
}

/// Collapses the double spaces left by empty modifiers, drops spaces
/// before punctuation and capitalizes the first letter.
fn tidy(text: &str) -> String {
    let mut out = text.split_whitespace().collect::<Vec<_>>().join(" ");
    for p in [" .", " ;", " ,"] {
        out = out.replace(p, &p[1..]);
    }
    let mut chars = out.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => out,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedCorpus {
    pub sentences: Vec<SentenceRecord>,
    pub gold: Vec<LabelRecord>,
}

pub fn generate(config: &GeneratorConfig) -> Result<GeneratedCorpus> {
    config.validate()?;
    let patterns = config
        .template_bank
        .iter()
        .map(|t| Pattern::parse(&t.text))
        .collect::<Result<Vec<_>>>()?;
    for (t, p) in config.template_bank.iter().zip(&patterns) {
        if p.n_slots() != t.slots.len() {
            return Err(Error::Validation(format!(
                "template {:?} has {} slots but declares {} labels",
                t.text,
                p.n_slots(),
                t.slots.len()
            )));
        }
    }
    let total_weight: u64 = config.template_bank.iter().map(|t| u64::from(t.weight)).sum();
    let protected = protected_words();
    let mut gen = Generator {
        noise: config.noise,
        protected: &protected,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
    };

    let (lo, hi) = config.sentences_per_report;
    let mut sentences = Vec::new();
    let mut gold = Vec::new();
    let width = config.n_reports.to_string().len().max(5);
    for r in 0..config.n_reports {
        let report_id = format!("r{r:0width$}");
        let n = gen.rng.gen_range(lo..=hi);
        for s in 0..n {
            let mut pick = gen.rng.gen_range(0..total_weight);
            let idx = config
                .template_bank
                .iter()
                .position(|t| {
                    let w = u64::from(t.weight);
                    if pick < w {
                        true
                    } else {
                        pick -= w;
                        false
                    }
                })
                .expect("weights sum to total");
            let (text, labels) = gen.sentence(&config.template_bank[idx], &patterns[idx]);
            sentences.push(SentenceRecord::new(report_id.clone(), s as u32, text));
            gold.push(LabelRecord {
                report_id: report_id.clone(),
                sentence_index: s as u32,
                labels,
            });
        }
    }
    Ok(GeneratedCorpus { sentences, gold })
}
