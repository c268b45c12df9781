//! Corpus generation, ingestion and report-level splitting.

mod generate;
mod ingest;
mod split;

pub use generate::{
    default_template_bank, generate, GeneratedCorpus, GeneratorConfig, NoiseConfig, Template,
    FINDINGS,
};
pub use ingest::{ingest, ingest_reader, split_sentences, IngestFormat};
pub use split::{split, SplitFractions, SplitManifest};
