//! The rule-based teacher: mention lexicons plus windowed negation and
//! uncertainty cues.
//!
//! A rule file is JSON:
//!
//! ```json
//! {"version": "fixture-1", "window": 5,
//!  "negation_pre_cues": ["no"], "negation_post_cues": ["not seen"],
//!  "uncertainty_cues": ["possible"],
//!  "mention_phrases": {"edema": ["edema"], ...}}
//! ```
//!
//! Phrases are matched as token sequences produced by
//! [`tokenize`](crate::tokenize::tokenize). `no_finding` carries no lexicon
//! of its own; it is derived from the other 13 tasks.

mod engine;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::tokenize;
use crate::types::TaskId;

pub use engine::{
    aggregate_report, classify_corpus, classify_sentence, CorpusTiming, MentionHit,
};

pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub version: String,
    pub window: usize,
    pub negation_pre_cues: Vec<String>,
    #[serde(default)]
    pub negation_post_cues: Vec<String>,
    pub uncertainty_cues: Vec<String>,
    pub mention_phrases: BTreeMap<TaskId, Vec<String>>,
}

const FIXTURE_JSON: &str = include_str!("../../../../rules/fixture.json");
const DEFAULT_JSON: &str = include_str!("../../../../rules/default.json");

impl RuleSet {
    /// The small test-pinned rule set shipped as `rules/fixture.json`.
    pub fn fixture() -> RuleSet {
        Self::from_json(FIXTURE_JSON).expect("shipped fixture rules are valid")
    }

    /// The fuller lexicon shipped as `rules/default.json`.
    pub fn builtin_default() -> RuleSet {
        Self::from_json(DEFAULT_JSON).expect("shipped default rules are valid")
    }

    pub fn from_json(json: &str) -> Result<RuleSet> {
        let mut rules: RuleSet = serde_json::from_str(json).map_err(|e| Error::Parse {
            source_name: "rule set".into(),
            line: e.line(),
            message: e.to_string(),
        })?;
        rules.mention_phrases.entry(TaskId::NoFinding).or_default();
        rules.validate()?;
        Ok(rules)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::Validation("window must be at least 1".into()));
        }
        for task in TaskId::findings() {
            let empty = self
                .mention_phrases
                .get(&task)
                .map_or(true, |p| p.is_empty());
            if empty {
                return Err(Error::Validation(format!("empty mention lexicon for {task}")));
            }
        }
        let cue_lists = [
            ("negation_pre_cues", &self.negation_pre_cues),
            ("negation_post_cues", &self.negation_post_cues),
            ("uncertainty_cues", &self.uncertainty_cues),
        ];
        let lexicons = self
            .mention_phrases
            .iter()
            .map(|(t, p)| (t.as_str(), p));
        for (name, phrases) in cue_lists.into_iter().chain(lexicons) {
            for phrase in phrases {
                if tokenize(phrase).is_empty() {
                    return Err(Error::Validation(format!("empty phrase in {name}")));
                }
                if *phrase != phrase.to_lowercase() {
                    return Err(Error::Validation(format!(
                        "phrase {phrase:?} in {name} is not lowercase"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Removes one mention phrase from a task's lexicon. Returns whether it
    /// was present.
    pub fn remove_phrase(&mut self, task: TaskId, phrase: &str) -> bool {
        match self.mention_phrases.get_mut(&task) {
            Some(list) => {
                let before = list.len();
                list.retain(|p| p != phrase);
                list.len() != before
            }
            None => false,
        }
    }

    pub fn compile(&self) -> CompiledRuleSet {
        let cues = |list: &[String]| list.iter().map(|p| tokenize(p)).collect::<Vec<_>>();
        let mut lexicons: Vec<Vec<Vec<String>>> = vec![Vec::new(); TaskId::ALL.len()];
        for task in TaskId::findings() {
            let mut phrases: Vec<Vec<String>> = self
                .mention_phrases
                .get(&task)
                .into_iter()
                .flatten()
                .map(|p| tokenize(p))
                .collect();
            // Longest first; ties in lexical order so matching is deterministic.
            phrases.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            phrases.dedup();
            lexicons[task.index()] = phrases;
        }
        CompiledRuleSet {
            version: self.version.clone(),
            window: self.window,
            pre_cues: cues(&self.negation_pre_cues),
            post_cues: cues(&self.negation_post_cues),
            uncertainty_cues: cues(&self.uncertainty_cues),
            lexicons,
        }
    }
}

/// A validated rule set with every phrase pre-tokenized. Immutable.
#[derive(Debug, Clone)]
pub struct CompiledRuleSet {
    pub version: String,
    pub window: usize,
    pub(crate) pre_cues: Vec<Vec<String>>,
    pub(crate) post_cues: Vec<Vec<String>>,
    pub(crate) uncertainty_cues: Vec<Vec<String>>,
    /// Indexed by `TaskId::index`; sorted longest phrase first.
    pub(crate) lexicons: Vec<Vec<Vec<String>>>,
}

pub fn load_rules(path: impl AsRef<Path>) -> Result<RuleSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RuleSet::from_json(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            source_name: path.display().to_string(),
            line,
            message,
        },
        other => other,
    })
}
