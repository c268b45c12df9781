//! The student: hashed unigram and bigram features averaged into an
//! embedding, one tanh hidden layer, and a softmax head per task. Gradients
//! are derived by hand; parameters are f32, arithmetic is f64.

mod checkpoint;
mod hasher;
mod model;
mod optim;
mod predict;
mod train;

pub use checkpoint::{Checkpoint, TrainingMeta, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use hasher::{FeatureHasher, DEFAULT_BUCKETS, DEFAULT_HASH_SEED};
pub use model::{
    argmax_class, backward, head_range, loss, Example, Gradients, ModelConfig, ModelParams, Param,
    DEFAULT_EMBED_DIM, DEFAULT_HIDDEN_DIM, HEAD_WIDTH, INIT_SCALE,
};
pub use optim::AdamConfig;
pub use predict::{predict_corpus, predict_text, Predictions};
pub use train::{
    fine_tune, fingerprint, mix_teacher, parity_on, train, train_with, EpochLog, HashedSet, Init,
    TrainConfig, TrainOutcome, Trainer, TRANSFORMER_LEARNING_RATE,
};
