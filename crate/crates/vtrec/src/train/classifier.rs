//! Stage one: train the clip classifier, then distill its unit
//! embeddings into the per-category table.

use super::dataset::ClipDataset;
use super::schedule::LrSchedule;
use super::TrainError;
use crate::model::{
    aggregate_category_embeddings, ModelConfig, TransitionClassifier, TransitionEmbeddingTable,
};
use crate::nn::{Adam, Graph, ParamStore};
use crate::util::seeded_rng;
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub seed: u64,
    /// Stop once training accuracy reaches this level, if set.
    pub target_accuracy: Option<f64>,
}

impl PretrainConfig {
    /// Desk-sized run: converges on the small corpus in under a minute.
    pub fn desk() -> Self {
        PretrainConfig {
            epochs: 30,
            batch_size: 16,
            schedule: LrSchedule {
                initial: 2e-3,
                warmup_epochs: 2,
                warmup_init: 2e-4,
                decay_factor: 0.1,
                decay_every: 24,
            },
            seed: 1,
            target_accuracy: Some(0.99),
        }
    }

    /// Published full-scale settings: 30 epochs, five-epoch warmup from
    /// 1e-6 to 1e-3, tenfold decay every ten epochs.
    pub fn paper() -> Self {
        PretrainConfig {
            epochs: 30,
            batch_size: 128,
            schedule: LrSchedule::classifier_default(),
            seed: 1,
            target_accuracy: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub accuracy: f64,
}

pub struct PretrainOutcome {
    pub store: ParamStore,
    pub logs: Vec<EpochLog>,
}

/// Cross-entropy training over transition clips.
pub fn pretrain_transition_classifier(
    ds: &ClipDataset,
    cfg: &ModelConfig,
    tcfg: &PretrainConfig,
) -> Result<PretrainOutcome, TrainError> {
    if ds.is_empty() {
        return Err(TrainError::BadData("empty clip dataset".into()));
    }
    cfg.validate()?;
    let mut store = ParamStore::new();
    TransitionClassifier::register(&mut store, cfg, ds.n_categories, tcfg.seed);
    let mut adam = Adam::new();
    let mut logs = Vec::with_capacity(tcfg.epochs);

    for epoch in 0..tcfg.epochs {
        let lr = tcfg.schedule.lr_at(epoch);
        let mut order: Vec<usize> = (0..ds.len()).collect();
        let mut rng = seeded_rng(tcfg.seed, &format!("pretrain-epoch-{epoch}"));
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }

        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for chunk in order.chunks(tcfg.batch_size) {
            let (batch, labels) = ds.batch(chunk);
            let mut g = Graph::new();
            let x = g.input(batch);
            let (_embed, logits) = TransitionClassifier::forward(&mut g, &store, cfg, x);
            correct += count_argmax_hits(&g.value2(logits).to_owned(), &labels);
            let loss = g.cross_entropy_mean(logits, &labels);
            loss_sum += g.scalar(loss) as f64 * chunk.len() as f64;
            let grads = g.backward(loss);
            adam.step(&mut store, &grads, lr as f32);
        }
        let accuracy = correct as f64 / ds.len() as f64;
        logs.push(EpochLog {
            epoch,
            lr,
            loss: loss_sum / ds.len() as f64,
            accuracy,
        });
        if tcfg.target_accuracy.is_some_and(|t| accuracy >= t) {
            break;
        }
    }
    Ok(PretrainOutcome { store, logs })
}

fn count_argmax_hits(logits: &Array2<f32>, labels: &[usize]) -> usize {
    logits
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &l)| {
            let mut best = 0usize;
            for (k, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = k;
                }
            }
            best == l
        })
        .count()
}

/// Forward-only pass collecting unit embeddings for every clip.
pub fn classifier_embeddings(
    store: &ParamStore,
    cfg: &ModelConfig,
    ds: &ClipDataset,
    batch_size: usize,
) -> (Array2<f32>, Vec<usize>) {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut all = Array2::<f32>::zeros((ds.len(), cfg.d_matching));
    let mut row = 0usize;
    for chunk in idx.chunks(batch_size.max(1)) {
        let (batch, _) = ds.batch(chunk);
        let mut g = Graph::new();
        let x = g.input(batch);
        let (embed, _) = TransitionClassifier::forward(&mut g, &store, cfg, x);
        let vals = g.value2(embed).to_owned();
        for r in vals.rows() {
            all.row_mut(row).assign(&r);
            row += 1;
        }
    }
    (all, ds.labels.clone())
}

/// Classification accuracy of a trained store over a dataset.
pub fn classifier_accuracy(
    store: &ParamStore,
    cfg: &ModelConfig,
    ds: &ClipDataset,
    batch_size: usize,
) -> f64 {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut correct = 0usize;
    for chunk in idx.chunks(batch_size.max(1)) {
        let (batch, labels) = ds.batch(chunk);
        let mut g = Graph::new();
        let x = g.input(batch);
        let (_, logits) = TransitionClassifier::forward(&mut g, &store, cfg, x);
        correct += count_argmax_hits(&g.value2(logits).to_owned(), &labels);
    }
    correct as f64 / ds.len() as f64
}

/// Aggregate per-clip embeddings into the frozen category table.
pub fn build_embedding_table(
    store: &ParamStore,
    cfg: &ModelConfig,
    ds: &ClipDataset,
    names: &[String],
) -> Result<TransitionEmbeddingTable, TrainError> {
    if names.len() != ds.n_categories {
        return Err(TrainError::BadData(format!(
            "{} category names for {} categories",
            names.len(),
            ds.n_categories
        )));
    }
    let (embeds, labels) = classifier_embeddings(store, cfg, ds, 32);
    let table = aggregate_category_embeddings(embeds.view(), &labels, ds.n_categories);
    Ok(TransitionEmbeddingTable::new(table, names.to_vec())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{build_corpus, Split};
    use crate::train::dataset::load_clip_dataset;
    use crate::train::testutil::{tiny_corpus_config, tiny_model_config};

    fn fixture() -> (ClipDataset, ModelConfig) {
        let dir = std::env::temp_dir().join("vtrec-train-clf");
        std::fs::remove_dir_all(&dir).ok();
        let corpus = build_corpus(&tiny_corpus_config(), &dir).unwrap();
        let cfg = tiny_model_config();
        let ds = load_clip_dataset(&corpus, &cfg, Split::Train).unwrap();
        std::fs::remove_dir_all(&dir).ok();
        (ds, cfg)
    }

    fn quick_cfg(epochs: usize) -> PretrainConfig {
        PretrainConfig {
            epochs,
            batch_size: 8,
            schedule: LrSchedule::constant(3e-3),
            seed: 4,
            target_accuracy: None,
        }
    }

    #[test]
    fn loss_falls_and_runs_are_reproducible() {
        let (ds, cfg) = fixture();
        let out1 = pretrain_transition_classifier(&ds, &cfg, &quick_cfg(4)).unwrap();
        let out2 = pretrain_transition_classifier(&ds, &cfg, &quick_cfg(4)).unwrap();
        assert!(
            out1.logs.last().unwrap().loss < out1.logs[0].loss,
            "loss should fall: {:?}",
            out1.logs.iter().map(|l| l.loss).collect::<Vec<_>>()
        );
        for (a, b) in out1.logs.iter().zip(&out2.logs) {
            assert_eq!(a.loss, b.loss);
            assert_eq!(a.accuracy, b.accuracy);
        }
        for (name, p) in out1.store.iter() {
            assert_eq!(p.value, out2.store.get(name).value, "{name} diverged");
        }
    }

    #[test]
    fn early_stop_respects_the_target() {
        let (ds, cfg) = fixture();
        let mut tcfg = quick_cfg(50);
        tcfg.target_accuracy = Some(0.0); // any accuracy passes
        let out = pretrain_transition_classifier(&ds, &cfg, &tcfg).unwrap();
        assert_eq!(out.logs.len(), 1);
    }

    #[test]
    fn table_has_unit_rows_for_seen_categories() {
        let (ds, cfg) = fixture();
        let out = pretrain_transition_classifier(&ds, &cfg, &quick_cfg(2)).unwrap();
        let names: Vec<String> = (0..ds.n_categories).map(|i| format!("c{i}")).collect();
        let table = build_embedding_table(&out.store, &cfg, &ds, &names).unwrap();
        assert_eq!(table.n_categories(), ds.n_categories);
        assert_eq!(table.dim(), cfg.d_matching);
        let mut seen = vec![false; ds.n_categories];
        for &l in &ds.labels {
            seen[l] = true;
        }
        for (cat, was_seen) in seen.iter().enumerate() {
            let norm: f32 = table
                .embeddings
                .row(cat)
                .iter()
                .map(|v| v * v)
                .sum::<f32>()
                .sqrt();
            if *was_seen {
                assert!((norm - 1.0).abs() < 1e-4, "category {cat} norm {norm}");
            } else {
                assert_eq!(norm, 0.0, "unseen category {cat} must stay zero");
            }
        }
    }

    #[test]
    fn embeddings_match_dataset_order() {
        let (ds, cfg) = fixture();
        let out = pretrain_transition_classifier(&ds, &cfg, &quick_cfg(1)).unwrap();
        let (embeds, labels) = classifier_embeddings(&out.store, &cfg, &ds, 4);
        assert_eq!(embeds.nrows(), ds.len());
        assert_eq!(labels, ds.labels);
    }
}
