//! Full evaluation pass: overall retrieval metrics plus a per-category
//! breakdown of where the model lands the correct answer.

use super::metrics::{mean_rank, recall_at_k, MetricsReport};
use crate::model::{rank_scores, ModelConfig};
use crate::nn::{Graph, ParamStore};
use crate::train::{SequenceDataset, TrainObjective};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryBreakdown {
    pub id: usize,
    pub name: String,
    pub n_queries: usize,
    pub recall_at_1: f64,
    pub mean_rank: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub overall: MetricsReport,
    pub per_category: Vec<CategoryBreakdown>,
}

impl EvalSummary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{}\n\n", self.overall));
        out.push_str(&format!(
            "{:<4} {:<16} {:>6} {:>8} {:>8}\n",
            "id", "category", "n", "R@1", "MR"
        ));
        for c in &self.per_category {
            out.push_str(&format!(
                "{:<4} {:<16} {:>6} {:>8.4} {:>8.3}\n",
                c.id, c.name, c.n_queries, c.recall_at_1, c.mean_rank
            ));
        }
        out
    }
}

/// Rank every transition point and group the outcomes by the correct
/// category. Categories with no queries are omitted.
pub fn evaluate_with_breakdown(
    store: &ParamStore,
    cfg: &ModelConfig,
    ds: &SequenceDataset,
    objective: &TrainObjective,
    names: &[String],
) -> EvalSummary {
    let mut labelled_ranks: Vec<(usize, usize)> = Vec::new();
    for item in &ds.items {
        let mut g = Graph::new();
        let queries = crate::model::recommender_forward(&mut g, store, cfg, &item.feats);
        let scores = match objective {
            TrainObjective::Matching { .. } => {
                crate::model::score_against_table(&mut g, store, cfg, queries)
            }
            TrainObjective::Classification => {
                let w = g.param(store, "cls.w");
                let b = g.param(store, "cls.b");
                let lo = g.matmul(queries, w);
                g.add_bias(lo, b)
            }
        };
        let vals = g.value2(scores).to_owned();
        let keep = item.labels.len().min(cfg.max_transitions);
        for (row, &correct) in vals.rows().into_iter().zip(&item.labels[..keep]) {
            labelled_ranks.push((correct, rank_scores(&row.to_vec()).rank_of(correct)));
        }
    }

    let all: Vec<usize> = labelled_ranks.iter().map(|(_, r)| *r).collect();
    let per_category = (0..names.len())
        .filter_map(|cat| {
            let ranks: Vec<usize> = labelled_ranks
                .iter()
                .filter(|(c, _)| *c == cat)
                .map(|(_, r)| *r)
                .collect();
            if ranks.is_empty() {
                return None;
            }
            Some(CategoryBreakdown {
                id: cat,
                name: names[cat].clone(),
                n_queries: ranks.len(),
                recall_at_1: recall_at_k(&ranks, 1),
                mean_rank: mean_rank(&ranks),
            })
        })
        .collect();

    EvalSummary {
        overall: MetricsReport::from_ranks(&all),
        per_category,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_table, register_recommender, register_table, TransitionEmbeddingTable};
    use crate::train::testutil::{fake_sequence_dataset, tiny_model_config};
    use crate::train::sequence_ranks;

    #[test]
    fn breakdown_counts_match_the_overall_pass() {
        let cfg = tiny_model_config();
        let n_cat = 4;
        let ds = fake_sequence_dataset(&cfg, 5, n_cat, 50);
        let mut store = ParamStore::new();
        register_recommender(&mut store, &cfg, 17);
        let table = TransitionEmbeddingTable::new(
            random_table(n_cat, cfg.d_matching, 5),
            (0..n_cat).map(|i| format!("c{i}")).collect(),
        )
        .unwrap();
        register_table(&mut store, &table.embeddings);
        let objective = TrainObjective::default();
        let summary = evaluate_with_breakdown(&store, &cfg, &ds, &objective, &table.names);
        let n_from_cats: usize = summary.per_category.iter().map(|c| c.n_queries).sum();
        assert_eq!(n_from_cats, summary.overall.n_queries);
        assert_eq!(summary.overall.n_queries, ds.n_points(&cfg));

        // Same ranks as the training-loop evaluator.
        let ranks = sequence_ranks(&store, &cfg, &ds, &objective);
        assert_eq!(
            MetricsReport::from_ranks(&ranks),
            summary.overall
        );
        let text = summary.to_text();
        assert!(text.contains("category"));
    }
}
