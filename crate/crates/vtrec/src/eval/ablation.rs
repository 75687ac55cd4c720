//! Ablation grid: retrain the recommender under controlled variants and
//! tabulate validation retrieval quality per variant across seeds.

use super::metrics::MetricsReport;
use crate::model::{random_table, ModelConfig, TransitionEmbeddingTable};
use crate::train::{
    train_recommender, evaluate_sequences, RecTrainConfig, SequenceDataset, TrainObjective,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    /// The distilled classifier table.
    Pretrained,
    /// Fresh unit-norm rows; pairs with projections off.
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationSpec {
    pub name: String,
    pub cfg: ModelConfig,
    pub table: TableKind,
    pub objective: TrainObjective,
}

/// The grid reported in the comparison tables: the full model plus one
/// variant per removed ingredient.
pub fn standard_variants(base: &ModelConfig) -> Vec<AblationSpec> {
    let full = AblationSpec {
        name: "full".into(),
        cfg: base.clone(),
        table: TableKind::Pretrained,
        objective: TrainObjective::default(),
    };
    let mut random_init = full.clone();
    random_init.name = "random_table".into();
    random_init.table = TableKind::Random;
    // No pretrained geometry to preserve, so no projections either.
    random_init.cfg.learnable_projections = false;

    let mut visual_only = full.clone();
    visual_only.name = "visual_only".into();
    visual_only.cfg.use_audio = false;

    let mut audio_only = full.clone();
    audio_only.name = "audio_only".into();
    audio_only.cfg.use_visual = false;

    let mut no_context = full.clone();
    no_context.name = "no_context".into();
    no_context.cfg.use_context = false;

    let mut classification = full.clone();
    classification.name = "classification".into();
    classification.objective = TrainObjective::Classification;

    vec![
        full,
        random_init,
        visual_only,
        audio_only,
        no_context,
        classification,
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRun {
    pub variant: String,
    pub seed: u64,
    /// Err holds the failure text; one bad run must not sink the grid.
    pub result: Result<MetricsReport, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub runs: Vec<AblationRun>,
}

pub struct AblationContext<'a> {
    pub train: &'a SequenceDataset,
    pub val: &'a SequenceDataset,
    pub pretrained: &'a TransitionEmbeddingTable,
    /// Template; each run overrides seed and objective.
    pub train_cfg: RecTrainConfig,
}

fn run_one(
    spec: &AblationSpec,
    seed: u64,
    ctx: &AblationContext<'_>,
) -> Result<MetricsReport, String> {
    let table = match spec.table {
        TableKind::Pretrained => ctx.pretrained.clone(),
        TableKind::Random => TransitionEmbeddingTable::new(
            random_table(
                ctx.pretrained.n_categories(),
                spec.cfg.d_matching,
                seed,
            ),
            ctx.pretrained.names.clone(),
        )
        .map_err(|e| e.to_string())?,
    };
    let mut tcfg = ctx.train_cfg.clone();
    tcfg.seed = seed;
    tcfg.objective = spec.objective;
    let trained = train_recommender(ctx.train, None, &table, &spec.cfg, &tcfg)
        .map_err(|e| e.to_string())?;
    Ok(evaluate_sequences(
        &trained.store,
        &spec.cfg,
        ctx.val,
        &tcfg.objective,
    ))
}

/// Train and score every (variant, seed) cell. Panics inside a run are
/// caught and recorded so the surviving cells still report.
pub fn run_ablation_grid(
    specs: &[AblationSpec],
    seeds: &[u64],
    ctx: &AblationContext<'_>,
) -> AblationReport {
    let mut runs = Vec::with_capacity(specs.len() * seeds.len());
    for spec in specs {
        for &seed in seeds {
            let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                run_one(spec, seed, ctx)
            }))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| p.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "panic".into());
                Err(format!("panicked: {msg}"))
            });
            runs.push(AblationRun {
                variant: spec.name.clone(),
                seed,
                result,
            });
        }
    }
    AblationReport { runs }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub r1_mean: f64,
    pub r1_std: f64,
    pub r5_mean: f64,
    pub mr_mean: f64,
}

fn mean_std(vals: &[f64]) -> (f64, f64) {
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = vals.iter().sum::<f64>() / vals.len() as f64;
    let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
    (m, v.sqrt())
}

impl AblationReport {
    /// Per-variant means over the seeds that finished, in first-seen
    /// variant order.
    pub fn summarize(&self) -> Vec<VariantSummary> {
        let mut order: Vec<&str> = Vec::new();
        for run in &self.runs {
            if !order.contains(&run.variant.as_str()) {
                order.push(&run.variant);
            }
        }
        order
            .iter()
            .map(|name| {
                let ok: Vec<&MetricsReport> = self
                    .runs
                    .iter()
                    .filter(|r| r.variant == *name)
                    .filter_map(|r| r.result.as_ref().ok())
                    .collect();
                let n_failed = self
                    .runs
                    .iter()
                    .filter(|r| r.variant == *name && r.result.is_err())
                    .count();
                let (r1_mean, r1_std) =
                    mean_std(&ok.iter().map(|m| m.recall_at_1).collect::<Vec<_>>());
                let (r5_mean, _) = mean_std(&ok.iter().map(|m| m.recall_at_5).collect::<Vec<_>>());
                let (mr_mean, _) = mean_std(&ok.iter().map(|m| m.mean_rank).collect::<Vec<_>>());
                VariantSummary {
                    variant: name.to_string(),
                    n_ok: ok.len(),
                    n_failed,
                    r1_mean,
                    r1_std,
                    r5_mean,
                    mr_mean,
                }
            })
            .collect()
    }

    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>4} {:>5}  {:>8} {:>8} {:>8} {:>8}\n",
            "variant", "ok", "fail", "R@1", "±", "R@5", "MR"
        ));
        for s in self.summarize() {
            out.push_str(&format!(
                "{:<16} {:>4} {:>5}  {:>8.4} {:>8.4} {:>8.4} {:>8.3}\n",
                s.variant, s.n_ok, s.n_failed, s.r1_mean, s.r1_std, s.r5_mean, s.mr_mean
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,n_ok,n_failed,r1_mean,r1_std,r5_mean,mr_mean\n");
        for s in self.summarize() {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
                s.variant, s.n_ok, s.n_failed, s.r1_mean, s.r1_std, s.r5_mean, s.mr_mean
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_table;
    use crate::train::LrSchedule;

    fn fake_report() -> AblationReport {
        AblationReport {
            runs: vec![
                AblationRun {
                    variant: "full".into(),
                    seed: 1,
                    result: Ok(MetricsReport {
                        n_queries: 10,
                        recall_at_1: 0.8,
                        recall_at_5: 1.0,
                        mean_rank: 1.4,
                    }),
                },
                AblationRun {
                    variant: "full".into(),
                    seed: 2,
                    result: Ok(MetricsReport {
                        n_queries: 10,
                        recall_at_1: 0.6,
                        recall_at_5: 0.9,
                        mean_rank: 1.8,
                    }),
                },
                AblationRun {
                    variant: "random_table".into(),
                    seed: 1,
                    result: Err("boom".into()),
                },
                AblationRun {
                    variant: "random_table".into(),
                    seed: 2,
                    result: Ok(MetricsReport {
                        n_queries: 10,
                        recall_at_1: 0.3,
                        recall_at_5: 0.7,
                        mean_rank: 3.0,
                    }),
                },
            ],
        }
    }

    #[test]
    fn summaries_average_only_finished_runs() {
        let rep = fake_report();
        let sums = rep.summarize();
        assert_eq!(sums.len(), 2);
        assert_eq!(sums[0].variant, "full");
        assert!((sums[0].r1_mean - 0.7).abs() < 1e-12);
        assert!((sums[0].r1_std - 0.1).abs() < 1e-12);
        assert_eq!(sums[1].n_ok, 1);
        assert_eq!(sums[1].n_failed, 1);
        assert!((sums[1].r1_mean - 0.3).abs() < 1e-12);
    }

    #[test]
    fn tables_render_every_variant() {
        let rep = fake_report();
        let text = rep.to_text_table();
        assert!(text.contains("full"));
        assert!(text.contains("random_table"));
        let csv = rep.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("variant,"));
    }

    #[test]
    fn standard_variants_toggle_the_right_knobs() {
        let base = crate::model::ModelConfig::desk();
        let variants = standard_variants(&base);
        let names: Vec<&str> = variants.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "full",
                "random_table",
                "visual_only",
                "audio_only",
                "no_context",
                "classification"
            ]
        );
        let rt = &variants[1];
        assert_eq!(rt.table, TableKind::Random);
        assert!(!rt.cfg.learnable_projections);
        assert!(!variants[2].cfg.use_audio && variants[2].cfg.use_visual);
        assert!(!variants[3].cfg.use_visual && variants[3].cfg.use_audio);
        assert!(!variants[4].cfg.use_context);
        assert!(matches!(
            variants[5].objective,
            TrainObjective::Classification
        ));
        assert!(variants[0].cfg.learnable_projections);
    }

    #[test]
    fn grid_survives_a_failing_cell() {
        // A variant with a broken table dimension fails; the good one runs.
        let cfg = crate::train::testutil::tiny_model_config();
        let train = crate::train::testutil::fake_sequence_dataset(&cfg, 4, 4, 1);
        let val = crate::train::testutil::fake_sequence_dataset(&cfg, 2, 4, 2);
        let table = TransitionEmbeddingTable::new(
            random_table(4, cfg.d_matching, 3),
            (0..4).map(|i| format!("c{i}")).collect(),
        )
        .unwrap();
        let ctx = AblationContext {
            train: &train,
            val: &val,
            pretrained: &table,
            train_cfg: RecTrainConfig {
                epochs: 1,
                batch_videos: 4,
                schedule: LrSchedule::constant(1e-3),
                seed: 0,
                objective: TrainObjective::default(),
            },
        };
        let mut bad = AblationSpec {
            name: "broken".into(),
            cfg: cfg.clone(),
            table: TableKind::Pretrained,
            objective: TrainObjective::default(),
        };
        bad.cfg.d_matching = cfg.d_matching + 1; // mismatches the table
        let good = AblationSpec {
            name: "good".into(),
            cfg,
            table: TableKind::Pretrained,
            objective: TrainObjective::default(),
        };
        let report = run_ablation_grid(&[bad, good], &[1], &ctx);
        assert!(report.runs[0].result.is_err());
        assert!(report.runs[1].result.is_ok());
    }
}
