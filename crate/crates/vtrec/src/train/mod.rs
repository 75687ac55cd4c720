//! Training: clip-classifier pretraining, table distillation, and the
//! margin-based recommender loop.

mod classifier;
pub mod dataset;
mod loss;
mod recommender;
mod schedule;
#[cfg(test)]
pub(crate) mod testutil;

pub use classifier::{
    build_embedding_table, classifier_accuracy, classifier_embeddings,
    pretrain_transition_classifier, EpochLog, PretrainConfig, PretrainOutcome,
};
pub use dataset::{
    featurize_record, load_clip_dataset, load_sequence_dataset, shot_window,
    transition_clip_range, ClipDataset, SequenceDataset, SequenceItem,
};
pub use loss::{
    batch_loss, sample_loss, triplet_batch_loss, triplet_term, TripletForm, DEFAULT_MARGIN,
};
pub use recommender::{
    adopt_frozen_params, evaluate_sequences, score_video, sequence_ranks, train_recommender,
    RecEpochLog, RecTrainConfig, TrainObjective, TrainedRecommender,
};
pub use schedule::LrSchedule;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Store(#[from] crate::synthgen::store::StoreError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error("bad data: {0}")]
    BadData(String),
}
