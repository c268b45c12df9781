use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CompiledRuleSet;
use crate::error::{Error, Result};
use crate::tokenize::{is_clause_boundary, tokenize};
use crate::types::{LabelRecord, LabelVector, MentionClass, SentenceRecord, TaskId};

/// One lexicon match and the class its cue context resolved to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionHit {
    pub task: TaskId,
    pub phrase: String,
    /// Half-open token range `[start, end)`.
    pub token_span: (usize, usize),
    pub resolved_class: MentionClass,
}

struct Scope<'a> {
    tokens: &'a [String],
    /// `boundaries[i]` = number of clause-boundary tokens in `tokens[..i]`.
    boundaries: Vec<usize>,
    window: usize,
}

impl<'a> Scope<'a> {
    fn new(tokens: &'a [String], window: usize) -> Self {
        let mut boundaries = Vec::with_capacity(tokens.len() + 1);
        let mut count = 0;
        boundaries.push(0);
        for t in tokens {
            count += usize::from(is_clause_boundary(t));
            boundaries.push(count);
        }
        Scope {
            tokens,
            boundaries,
            window,
        }
    }

    fn matches_at(&self, phrase: &[String], at: usize) -> bool {
        self.tokens.get(at..at + phrase.len()) == Some(phrase)
    }

    fn clear_between(&self, from: usize, to: usize) -> bool {
        self.boundaries[to] == self.boundaries[from]
    }

    /// A cue ending at or before `start` whose last token is within
    /// `window` positions of the mention's first token.
    fn has_cue_before(&self, cues: &[Vec<String>], start: usize) -> bool {
        let lo = start.saturating_sub(self.window);
        cues.iter().any(|cue| {
            (lo..start).any(|cue_last| {
                cue_last + 1 >= cue.len()
                    && self.matches_at(cue, cue_last + 1 - cue.len())
                    && self.clear_between(cue_last + 1, start)
            })
        })
    }

    /// A cue starting at or after `end` whose first token is within
    /// `window` positions of the mention's last token.
    fn has_cue_after(&self, cues: &[Vec<String>], end: usize) -> bool {
        let hi = (end - 1 + self.window).min(self.tokens.len().saturating_sub(1));
        cues.iter().any(|cue| {
            (end..=hi).any(|cue_first| {
                self.matches_at(cue, cue_first) && self.clear_between(end, cue_first)
            })
        })
    }
}

/// Labels one sentence. Each mention resolves to uncertain if an
/// uncertainty cue is in scope on either side, else negative if a
/// pre-negation cue precedes it or a post-negation cue follows it in
/// scope, else positive. Hits for one task merge as
/// positive > uncertain > negative.
pub fn classify_sentence(text: &str, rules: &CompiledRuleSet) -> (LabelVector, Vec<MentionHit>) {
    let tokens = tokenize(text);
    let scope = Scope::new(&tokens, rules.window);
    let mut hits = Vec::new();
    let mut merged = [MentionClass::NoMention; TaskId::ALL.len()];

    for task in TaskId::findings() {
        let lexicon = &rules.lexicons[task.index()];
        let mut i = 0;
        while i < tokens.len() {
            let Some(phrase) = lexicon.iter().find(|p| scope.matches_at(p, i)) else {
                i += 1;
                continue;
            };
            let (start, end) = (i, i + phrase.len());
            let class = if scope.has_cue_before(&rules.uncertainty_cues, start)
                || scope.has_cue_after(&rules.uncertainty_cues, end)
            {
                MentionClass::Uncertain
            } else if scope.has_cue_before(&rules.pre_cues, start)
                || scope.has_cue_after(&rules.post_cues, end)
            {
                MentionClass::Negative
            } else {
                MentionClass::Positive
            };
            let slot = &mut merged[task.index()];
            *slot = (*slot).max(class);
            hits.push(MentionHit {
                task,
                phrase: phrase.join(" "),
                token_span: (start, end),
                resolved_class: class,
            });
            i = end;
        }
    }

    (LabelVector::from_findings(|t| merged[t.index()]), hits)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusTiming {
    pub n_sentences: usize,
    pub parallelism: usize,
    pub elapsed_secs: f64,
    pub sentences_per_second: f64,
}

impl CorpusTiming {
    pub(crate) fn measure(n_sentences: usize, parallelism: usize, start: Instant) -> Self {
        let elapsed_secs = start.elapsed().as_secs_f64();
        CorpusTiming {
            n_sentences,
            parallelism,
            elapsed_secs,
            sentences_per_second: n_sentences as f64 / elapsed_secs.max(1e-9),
        }
    }
}

/// Labels every sentence on a pool of `parallelism` threads. Output order
/// always matches input order.
pub fn classify_corpus(
    corpus: &[SentenceRecord],
    rules: &CompiledRuleSet,
    parallelism: usize,
) -> Result<(Vec<LabelRecord>, CorpusTiming)> {
    if parallelism == 0 {
        return Err(Error::Precondition("parallelism must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let labels = pool.install(|| {
        corpus
            .par_iter()
            .map(|rec| LabelRecord {
                report_id: rec.report_id.clone(),
                sentence_index: rec.sentence_index,
                labels: classify_sentence(&rec.text, rules).0,
            })
            .collect::<Vec<_>>()
    });
    Ok((labels, CorpusTiming::measure(corpus.len(), parallelism, start)))
}

/// Merges sentence labels into a report label: per finding the maximum
/// under positive > uncertain > negative > no_mention; `no_finding` is
/// positive iff every finding merged to no_mention or negative.
pub fn aggregate_report(sentence_labels: &[LabelVector]) -> Result<LabelVector> {
    if sentence_labels.is_empty() {
        return Err(Error::Precondition(
            "cannot aggregate an empty report".into(),
        ));
    }
    Ok(LabelVector::from_findings(|task| {
        sentence_labels
            .iter()
            .map(|v| v.get(task))
            .max()
            .unwrap_or(MentionClass::NoMention)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleSet;
    use MentionClass::*;

    fn fixture() -> CompiledRuleSet {
        RuleSet::fixture().compile()
    }

    fn label(text: &str, task: TaskId) -> MentionClass {
        classify_sentence(text, &fixture()).0.get(task)
    }

    #[test]
    fn fixture_examples() {
        assert_eq!(
            label("There is a small right pleural effusion.", TaskId::PleuralEffusion),
            Positive
        );
        let (v, _) = classify_sentence("No pleural effusion or pneumothorax.", &fixture());
        assert_eq!(v.get(TaskId::PleuralEffusion), Negative);
        assert_eq!(v.get(TaskId::Pneumothorax), Negative);
        assert_eq!(label("Possible pleural effusion.", TaskId::PleuralEffusion), Uncertain);
        let (v, _) =
            classify_sentence("Findings may represent pneumonia; no pleural effusion.", &fixture());
        assert_eq!(v.get(TaskId::Pneumonia), Uncertain);
        assert_eq!(v.get(TaskId::PleuralEffusion), Negative);
    }

    #[test]
    fn empty_text_is_all_no_mention() {
        let (v, hits) = classify_sentence("", &fixture());
        assert_eq!(v, LabelVector::empty());
        assert!(hits.is_empty());
        assert_eq!(v.get(TaskId::NoFinding), Positive);
    }

    #[test]
    fn uncertainty_beats_negation_at_one_mention() {
        assert_eq!(label("No possible edema.", TaskId::Edema), Uncertain);
        assert_eq!(label("Possible edema not seen.", TaskId::Edema), Uncertain);
    }

    #[test]
    fn positive_wins_across_hits() {
        let (v, hits) = classify_sentence("No edema; edema.", &fixture());
        assert_eq!(hits.len(), 2);
        assert_eq!(v.get(TaskId::Edema), Positive);
        assert_eq!(v.get(TaskId::NoFinding), Negative);
    }

    #[test]
    fn window_limits_scope() {
        // five tokens between: last cue token at 0, mention at 6 -> distance 6
        assert_eq!(label("no a b c d e edema", TaskId::Edema), Positive);
        assert_eq!(label("no a b c d edema", TaskId::Edema), Negative);
        assert_eq!(label("edema a b c d not seen", TaskId::Edema), Negative);
        assert_eq!(label("edema a b c d e not seen", TaskId::Edema), Positive);
    }

    #[test]
    fn pre_cue_does_not_look_backwards() {
        assert_eq!(label("Edema without pneumonia.", TaskId::Edema), Positive);
        assert_eq!(label("Edema without pneumonia.", TaskId::Pneumonia), Negative);
    }

    #[test]
    fn hit_spans_are_reported() {
        let (_, hits) = classify_sentence("There is a pleural effusion.", &fixture());
        assert_eq!(
            hits,
            vec![MentionHit {
                task: TaskId::PleuralEffusion,
                phrase: "pleural effusion".into(),
                token_span: (3, 5),
                resolved_class: Positive,
            }]
        );
    }

    #[test]
    fn longest_match_first() {
        let rules = RuleSet::builtin_default().compile();
        let (_, hits) = classify_sentence("Large pleural effusion.", &rules);
        let effusion: Vec<_> = hits
            .iter()
            .filter(|h| h.task == TaskId::PleuralEffusion)
            .collect();
        assert_eq!(effusion.len(), 1);
        assert_eq!(effusion[0].phrase, "pleural effusion");
    }

    fn lv(pairs: &[(TaskId, MentionClass)]) -> LabelVector {
        LabelVector::from_findings(|t| {
            pairs
                .iter()
                .find(|(task, _)| *task == t)
                .map_or(NoMention, |(_, c)| *c)
        })
    }

    #[test]
    fn aggregate_examples() {
        let agg = aggregate_report(&[lv(&[(TaskId::Edema, Negative)]), lv(&[(TaskId::Edema, Positive)])])
            .unwrap();
        assert_eq!(agg.get(TaskId::Edema), Positive);
        let agg = aggregate_report(&[lv(&[(TaskId::Edema, Uncertain)]), lv(&[(TaskId::Edema, Negative)])])
            .unwrap();
        assert_eq!(agg.get(TaskId::Edema), Uncertain);
        let agg = aggregate_report(&[LabelVector::empty(), LabelVector::empty()]).unwrap();
        assert_eq!(agg, LabelVector::empty());
        assert!(aggregate_report(&[]).is_err());
    }

    #[test]
    fn corpus_order_and_parallelism() {
        let corpus: Vec<_> = ["No edema.", "Possible pneumonia.", "Cardiomegaly."]
            .iter()
            .enumerate()
            .map(|(i, t)| SentenceRecord::new("r1", i as u32, *t))
            .collect();
        let rules = fixture();
        let (one, timing) = classify_corpus(&corpus, &rules, 1).unwrap();
        let (eight, _) = classify_corpus(&corpus, &rules, 8).unwrap();
        assert_eq!(one.len(), 3);
        assert_eq!(one[1].sentence_index, 1);
        assert_eq!(one[1].labels.get(TaskId::Pneumonia), Uncertain);
        assert_eq!(
            crate::io::to_jsonl_bytes(&one),
            crate::io::to_jsonl_bytes(&eight)
        );
        assert!(timing.sentences_per_second > 0.0);
        assert!(classify_corpus(&corpus, &rules, 0).is_err());
    }
}
