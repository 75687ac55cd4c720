//! Stage two: train the transformer recommender against the frozen
//! category table with the margin loss, or as a plain per-point
//! classifier for the baseline comparison.

use super::dataset::SequenceDataset;
use super::loss::{triplet_batch_loss, TripletForm, DEFAULT_MARGIN};
use super::schedule::LrSchedule;
use super::TrainError;
use crate::eval::MetricsReport;
use crate::model::{
    rank_scores, recommender_forward, register_recommender, register_table,
    score_against_table, ModelConfig, TransitionEmbeddingTable,
};
use crate::nn::{init_rng, xavier_uniform, zeros, Adam, Graph, NodeId, ParamStore};
use crate::util::seeded_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrainObjective {
    /// Rank the correct category's dot-product score above the rest.
    Matching { margin: f32, form: TripletForm },
    /// Baseline: softmax over categories, ignoring the table.
    Classification,
}

impl Default for TrainObjective {
    fn default() -> Self {
        TrainObjective::Matching {
            margin: DEFAULT_MARGIN,
            form: TripletForm::Corrected,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecTrainConfig {
    pub epochs: usize,
    pub batch_videos: usize,
    pub schedule: LrSchedule,
    pub seed: u64,
    pub objective: TrainObjective,
}

impl RecTrainConfig {
    pub fn desk() -> Self {
        RecTrainConfig {
            epochs: 30,
            batch_videos: 8,
            schedule: LrSchedule {
                initial: 1e-3,
                warmup_epochs: 0,
                warmup_init: 1e-3,
                decay_factor: 0.1,
                decay_every: 20,
            },
            seed: 2,
            objective: TrainObjective::default(),
        }
    }

    /// Published settings: Adam at 1e-5, tenfold decay every ten epochs.
    pub fn paper() -> Self {
        RecTrainConfig {
            epochs: 30,
            batch_videos: 8,
            schedule: LrSchedule::recommender_default(),
            seed: 2,
            objective: TrainObjective::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecEpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub grad_norm: f64,
    pub val: Option<MetricsReport>,
}

pub struct TrainedRecommender {
    pub store: ParamStore,
    pub logs: Vec<RecEpochLog>,
}

const CLS_W: &str = "cls.w";
const CLS_B: &str = "cls.b";

/// Scores node for one video under the configured objective.
fn video_scores(
    g: &mut Graph,
    store: &ParamStore,
    cfg: &ModelConfig,
    feats: &crate::model::VideoFeatures,
    objective: &TrainObjective,
) -> NodeId {
    let queries = recommender_forward(g, store, cfg, feats);
    match objective {
        TrainObjective::Matching { .. } => score_against_table(g, store, cfg, queries),
        TrainObjective::Classification => {
            let w = g.param(store, CLS_W);
            let b = g.param(store, CLS_B);
            let lo = g.matmul(queries, w);
            g.add_bias(lo, b)
        }
    }
}

/// Train on `train`, tracking retrieval metrics on `val` after each
/// epoch when it is given. The table rides along frozen; the returned
/// store is self-contained for inference.
pub fn train_recommender(
    train: &SequenceDataset,
    val: Option<&SequenceDataset>,
    table: &TransitionEmbeddingTable,
    cfg: &ModelConfig,
    tcfg: &RecTrainConfig,
) -> Result<TrainedRecommender, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::BadData("empty training set".into()));
    }
    if table.dim() != cfg.d_matching {
        return Err(TrainError::BadData(format!(
            "table dimension {} != d_matching {}",
            table.dim(),
            cfg.d_matching
        )));
    }
    if table.n_categories() != train.n_categories {
        return Err(TrainError::BadData(format!(
            "table has {} categories, dataset {}",
            table.n_categories(),
            train.n_categories
        )));
    }

    let mut store = ParamStore::new();
    register_recommender(&mut store, cfg, tcfg.seed);
    register_table(&mut store, &table.embeddings);
    if matches!(tcfg.objective, TrainObjective::Classification) {
        let n = train.n_categories;
        let mut rng = init_rng(tcfg.seed, CLS_W);
        store.insert(CLS_W, xavier_uniform(&[cfg.d_matching, n], cfg.d_matching, n, &mut rng));
        store.insert(CLS_B, zeros(&[n]));
    }

    let mut adam = Adam::new();
    let mut logs = Vec::with_capacity(tcfg.epochs);
    for epoch in 0..tcfg.epochs {
        let lr = tcfg.schedule.lr_at(epoch);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut rng = seeded_rng(tcfg.seed, &format!("rec-epoch-{epoch}"));
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }

        let mut loss_sum = 0.0f64;
        let mut points = 0usize;
        let mut norm_sum = 0.0f64;
        let mut batches = 0usize;
        for chunk in order.chunks(tcfg.batch_videos) {
            let mut g = Graph::new();
            let mut score_nodes = Vec::with_capacity(chunk.len());
            let mut labels = Vec::new();
            for &vi in chunk {
                let item = &train.items[vi];
                score_nodes.push(video_scores(&mut g, &store, cfg, &item.feats, &tcfg.objective));
                let keep = item.labels.len().min(cfg.max_transitions);
                labels.extend_from_slice(&item.labels[..keep]);
            }
            let scores = if score_nodes.len() == 1 {
                score_nodes[0]
            } else {
                g.concat_rows(&score_nodes)
            };
            let loss = match tcfg.objective {
                TrainObjective::Matching { margin, form } => {
                    triplet_batch_loss(&mut g, scores, &labels, margin, form)
                }
                TrainObjective::Classification => g.cross_entropy_mean(scores, &labels),
            };
            loss_sum += g.scalar(loss) as f64 * labels.len() as f64;
            points += labels.len();
            let grads = g.backward(loss);
            norm_sum += grads.global_norm() as f64;
            batches += 1;
            adam.step(&mut store, &grads, lr as f32);
        }

        let val_report = val.map(|ds| evaluate_sequences(&store, cfg, ds, &tcfg.objective));
        logs.push(RecEpochLog {
            epoch,
            lr,
            train_loss: loss_sum / points.max(1) as f64,
            grad_norm: norm_sum / batches.max(1) as f64,
            val: val_report,
        });
    }
    Ok(TrainedRecommender { store, logs })
}

/// Forward-only category scores for one video, one row per transition
/// point kept after truncation.
pub fn score_video(
    store: &ParamStore,
    cfg: &ModelConfig,
    feats: &crate::model::VideoFeatures,
    objective: &TrainObjective,
) -> ndarray::Array2<f32> {
    let mut g = Graph::new();
    let scores = video_scores(&mut g, store, cfg, feats, objective);
    g.value2(scores).to_owned()
}

/// 1-based rank of the correct category at every transition point.
pub fn sequence_ranks(
    store: &ParamStore,
    cfg: &ModelConfig,
    ds: &SequenceDataset,
    objective: &TrainObjective,
) -> Vec<usize> {
    let mut ranks = Vec::new();
    for item in &ds.items {
        let mut g = Graph::new();
        let scores = video_scores(&mut g, store, cfg, &item.feats, objective);
        let vals = g.value2(scores).to_owned();
        let keep = item.labels.len().min(cfg.max_transitions);
        for (row, &correct) in vals.rows().into_iter().zip(&item.labels[..keep]) {
            ranks.push(rank_scores(&row.to_vec()).rank_of(correct));
        }
    }
    ranks
}

pub fn evaluate_sequences(
    store: &ParamStore,
    cfg: &ModelConfig,
    ds: &SequenceDataset,
    objective: &TrainObjective,
) -> MetricsReport {
    MetricsReport::from_ranks(&sequence_ranks(store, cfg, ds, objective))
}

/// Copy `prefix`-named parameters from `src` into `dst`, frozen, so a
/// recommender checkpoint can featurize raw video on its own.
pub fn adopt_frozen_params(dst: &mut ParamStore, src: &ParamStore, prefix: &str) -> usize {
    let mut n = 0;
    for (name, p) in src.iter() {
        if name.starts_with(prefix) {
            dst.insert(name, p.value.clone());
            n += 1;
        }
    }
    dst.set_frozen(prefix, true);
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_table;
    use crate::train::testutil::{fake_sequence_dataset, tiny_model_config};

    fn quick_cfg(epochs: usize) -> RecTrainConfig {
        RecTrainConfig {
            epochs,
            batch_videos: 4,
            schedule: LrSchedule::constant(3e-3),
            seed: 9,
            objective: TrainObjective::default(),
        }
    }

    fn fixture() -> (SequenceDataset, SequenceDataset, ModelConfig, TransitionEmbeddingTable)
    {
        let cfg = tiny_model_config();
        let n_cat = 5;
        let train = fake_sequence_dataset(&cfg, 8, n_cat, 31);
        let val = fake_sequence_dataset(&cfg, 3, n_cat, 32);
        let names = (0..n_cat).map(|i| format!("c{i}")).collect();
        let table =
            TransitionEmbeddingTable::new(random_table(n_cat, cfg.d_matching, 77), names)
                .unwrap();
        (train, val, cfg, table)
    }

    #[test]
    fn margin_training_reduces_loss_deterministically() {
        let (train, val, cfg, table) = fixture();
        let a = train_recommender(&train, Some(&val), &table, &cfg, &quick_cfg(5)).unwrap();
        let b = train_recommender(&train, Some(&val), &table, &cfg, &quick_cfg(5)).unwrap();
        assert!(
            a.logs.last().unwrap().train_loss < a.logs[0].train_loss,
            "loss trace {:?}",
            a.logs.iter().map(|l| l.train_loss).collect::<Vec<_>>()
        );
        for (x, y) in a.logs.iter().zip(&b.logs) {
            assert_eq!(x.train_loss, y.train_loss);
        }
        assert!(a.logs.iter().all(|l| l.val.is_some()));
        assert!(a.logs.iter().all(|l| l.grad_norm.is_finite()));
    }

    #[test]
    fn classification_objective_trains_too() {
        let (train, _, cfg, table) = fixture();
        let mut tcfg = quick_cfg(4);
        tcfg.objective = TrainObjective::Classification;
        let out = train_recommender(&train, None, &table, &cfg, &tcfg).unwrap();
        assert!(out.logs.last().unwrap().train_loss < out.logs[0].train_loss);
        assert!(out.store.names().contains(&"cls.w"));
        let ranks = sequence_ranks(&out.store, &cfg, &train, &tcfg.objective);
        assert_eq!(ranks.len(), train.n_points(&cfg));
    }

    #[test]
    fn shape_mismatches_are_refused() {
        let (train, _, cfg, _) = fixture();
        let bad_dim = TransitionEmbeddingTable::new(
            random_table(5, cfg.d_matching + 1, 1),
            (0..5).map(|i| format!("c{i}")).collect(),
        )
        .unwrap();
        assert!(train_recommender(&train, None, &bad_dim, &cfg, &quick_cfg(1)).is_err());
        let bad_count = TransitionEmbeddingTable::new(
            random_table(4, cfg.d_matching, 1),
            (0..4).map(|i| format!("c{i}")).collect(),
        )
        .unwrap();
        assert!(train_recommender(&train, None, &bad_count, &cfg, &quick_cfg(1)).is_err());
    }

    #[test]
    fn table_stays_frozen_through_training() {
        let (train, _, cfg, table) = fixture();
        let out = train_recommender(&train, None, &table, &cfg, &quick_cfg(3)).unwrap();
        let stored = &out.store.get(crate::model::TABLE_PARAM).value;
        for (a, b) in stored.iter().zip(table.embeddings.iter()) {
            assert_eq!(a, b, "table moved during training");
        }
        assert!(out.store.get(crate::model::TABLE_PARAM).frozen);
    }

    #[test]
    fn adopting_backbone_params_freezes_them() {
        let cfg = tiny_model_config();
        let mut src = ParamStore::new();
        crate::model::VisualEncoder::register(&mut src, &cfg, 6);
        let mut dst = ParamStore::new();
        let n = adopt_frozen_params(&mut dst, &src, "visual.");
        assert_eq!(n, 6); // three conv stages, weight + bias each
        for name in dst.names() {
            assert!(dst.get(name).frozen);
        }
    }

    #[test]
    fn overfit_sanity_margin_beats_chance_on_train() {
        let (train, _, cfg, table) = fixture();
        let mut tcfg = quick_cfg(40);
        tcfg.schedule = LrSchedule::constant(5e-3);
        let out = train_recommender(&train, None, &table, &cfg, &tcfg).unwrap();
        let report = evaluate_sequences(&out.store, &cfg, &train, &tcfg.objective);
        // Chance R@1 is 0.2 with five categories; an overfit run on
        // eight fixed videos should be far above it.
        assert!(
            report.recall_at_1 > 0.5,
            "train R@1 {} after overfitting",
            report.recall_at_1
        );
    }
}
