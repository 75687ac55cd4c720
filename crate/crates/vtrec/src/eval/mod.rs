//! Evaluation: retrieval metrics, ablation grids, and embedding plots.

mod ablation;
mod evaluate;
mod metrics;
mod plot;
mod tsne;

pub use ablation::{
    run_ablation_grid, standard_variants, AblationContext, AblationReport, AblationRun,
    AblationSpec, TableKind, VariantSummary,
};
pub use evaluate::{evaluate_with_breakdown, CategoryBreakdown, EvalSummary};
pub use metrics::{mean_rank, rank_of_correct, recall_at_k, MetricsReport};
pub use plot::{palette, save_coords_csv, scatter_png};
pub use tsne::{tsne_embed, TsneConfig};
