//! The two learned pieces: a clip classifier that yields transition
//! embeddings, and a transformer recommender that matches shot context
//! against the frozen embedding table.

mod classifier;
mod config;
mod encoders;
mod features;
mod recommender;

pub use classifier::{
    aggregate_category_embeddings, random_table, TransitionClassifier, TransitionEmbeddingTable,
    EMBED_EPS, OUTLIER_MIN_COUNT,
};
pub use config::{ModelConfig, ModelError};
pub use encoders::{AudioEncoder, VisualEncoder};
pub use features::{clip_tensor, pooled_frame, sample_indices, MelExtractor};
pub use recommender::{
    forward_with_pad, rank_scores, recommender_forward, register_recommender, register_table,
    score_against_table, RankedRecommendation, VideoFeatures, TABLE_PARAM,
};
