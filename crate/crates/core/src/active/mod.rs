//! The active-learning loop: a tiered gold held-out set, per-task
//! uncertainty sampling, append-only annotation logs, and fine-tuning
//! rounds scored against the held-out gold.

mod heldout;
mod records;
mod round;
mod select;
mod store;
mod uncertainty;

pub use heldout::{build_heldout, Heldout, HeldoutTask, Shortfall, DEFAULT_PER_CELL};
pub use records::{AdjudicationRecord, AnnotationRecord, AnnotationSource, Verdict};
pub use round::{
    annotate_selection, annotation_examples, run_round, run_rounds, Annotator, GoldOracle,
    LoopData, RoundConfig, RoundInputs, RoundReport,
};
pub use select::{select_uncertain, SelectedItem, Selection, DEFAULT_K_PER_TASK};
pub use store::{AdjudicationStore, AnnotationStore, JsonlStore, StoreRecord};
pub use uncertainty::{entropy, margin, UncertaintyMeasure};
