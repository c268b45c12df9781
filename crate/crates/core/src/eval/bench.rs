use serde::{Deserialize, Serialize};

use super::REPORT_SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::rules::{classify_corpus, CompiledRuleSet, CorpusTiming};
use crate::surrogate::{predict_corpus, ModelParams};
use crate::types::SentenceRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub n_sentences: usize,
    pub parallelism: usize,
    pub teacher: CorpusTiming,
    pub student: CorpusTiming,
    /// Student throughput divided by teacher throughput.
    pub student_speedup: f64,
}

impl BenchReport {
    pub fn render(&self) -> String {
        format!(
            "sentences: {}  threads: {}\nteacher: {:.3}s  {:.0} sent/s\nstudent: {:.3}s  {:.0} sent/s\nstudent/teacher throughput: {:.2}x\n",
            self.n_sentences,
            self.parallelism,
            self.teacher.elapsed_secs,
            self.teacher.sentences_per_second,
            self.student.elapsed_secs,
            self.student.sentences_per_second,
            self.student_speedup
        )
    }
}

/// Times teacher and student over the same sentences on equal thread pools.
pub fn bench(
    corpus: &[SentenceRecord],
    rules: &CompiledRuleSet,
    params: &ModelParams,
    parallelism: usize,
    batch_size: usize,
) -> Result<BenchReport> {
    if corpus.is_empty() {
        return Err(Error::Precondition("cannot benchmark an empty corpus".into()));
    }
    let (_, teacher) = classify_corpus(corpus, rules, parallelism)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    let mut student = pool.install(|| predict_corpus(corpus, params, batch_size))?.timing;
    student.parallelism = parallelism;
    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n_sentences: corpus.len(),
        parallelism,
        student_speedup: student.sentences_per_second / teacher.sentences_per_second,
        teacher,
        student,
    })
}
