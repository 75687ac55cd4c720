//! Subcommand bodies. Each artifact-producing command writes into a
//! fixed subdirectory of the output root and appends a run manifest
//! there; metric files are formatted deterministically so reruns under
//! the same config produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{s, Array1, ArrayD, Axis, IxDyn};
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::manifest::RunManifest;
use super::CliError;
use crate::eval::{
    run_ablation_grid, save_coords_csv, scatter_png, standard_variants, tsne_embed,
    AblationContext, TsneConfig,
};
use crate::fx::Shot;
use crate::model::{
    clip_tensor, random_table, rank_scores, MelExtractor, ModelConfig,
    TransitionEmbeddingTable, VideoFeatures, VisualEncoder, TABLE_PARAM,
};
use crate::nn::{load_checkpoint, save_checkpoint, Graph, ParamStore};
use crate::synthgen::store::{load_audio, load_shot};
use crate::synthgen::{build_corpus, corpus_stats, filter_corpus, CorpusManifest, Split};
use crate::train::{
    adopt_frozen_params, build_embedding_table, classifier_accuracy, classifier_embeddings,
    load_clip_dataset, load_sequence_dataset, pretrain_transition_classifier, score_video,
    shot_window, train_recommender, TrainObjective,
};

/// Where artifacts land when --out is not given.
pub const OUT_ROOT_ENV: &str = "VTREC_OUT_ROOT";
const DEFAULT_OUT_ROOT: &str = "vtrec-out";

fn out_root(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT))
}

/// Metadata stored inside every checkpoint, enough to run inference
/// without the original config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CkptMeta {
    kind: String,
    model: ModelConfig,
    category_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    objective: Option<TrainObjective>,
    pipeline_digest: String,
}

fn load_ckpt(path: &Path, expect_kind: &str) -> Result<(ParamStore, CkptMeta), CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "no checkpoint at {}",
            path.display()
        )));
    }
    let (store, meta) = load_checkpoint(path)?;
    let meta: CkptMeta = serde_json::from_value(meta).map_err(|e| {
        CliError::Usage(format!("{} has no usable metadata: {e}", path.display()))
    })?;
    if meta.kind != expect_kind {
        return Err(CliError::Usage(format!(
            "{} is a `{}` checkpoint, expected `{expect_kind}`",
            path.display(),
            meta.kind
        )));
    }
    meta.model.validate()?;
    Ok((store, meta))
}

fn load_corpus(dir: &Path) -> Result<(CorpusManifest, PathBuf), CliError> {
    let manifest_path = dir.join("manifest.jsonl");
    if !manifest_path.exists() {
        return Err(CliError::Usage(format!(
            "no corpus manifest at {} — run build-corpus first",
            manifest_path.display()
        )));
    }
    let manifest = CorpusManifest::load(&manifest_path)?;
    Ok((manifest, manifest_path))
}

/// The corpus a training command reads must be the one its config
/// describes, and records must pass the acceptance filter.
fn filtered_corpus(
    manifest: &CorpusManifest,
    pc: &PipelineConfig,
) -> Result<CorpusManifest, CliError> {
    if manifest.config_digest != pc.corpus.digest() {
        return Err(CliError::Usage(
            "corpus was built from a different config (digest mismatch); \
             rebuild it or point --config at the one used to build"
                .into(),
        ));
    }
    Ok(filter_corpus(manifest, manifest.config.min_distinct_types)?)
}

pub fn cmd_init_config(preset: &str, out: &Path, force: bool) -> Result<(), CliError> {
    let cfg = match preset {
        "desk" => PipelineConfig::desk(),
        "paper" => PipelineConfig::paper(),
        other => {
            return Err(CliError::Usage(format!(
                "unknown preset `{other}` (expected desk|paper)"
            )))
        }
    };
    if out.exists() && !force {
        return Err(CliError::Usage(format!(
            "{} already exists; pass --force to overwrite",
            out.display()
        )));
    }
    cfg.save(out)?;
    println!("wrote {} ({preset} preset)", out.display());
    Ok(())
}

pub fn cmd_build_corpus(config: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let started = Instant::now();
    let pc = PipelineConfig::load(config)?;
    let dir = out_root(out).join("corpus");
    fs::create_dir_all(&dir)?;

    let manifest = build_corpus(&pc.corpus, &dir)?;
    let filtered = filter_corpus(&manifest, pc.corpus.min_distinct_types)?;
    let kept = filtered.records.len();
    let total = manifest.records.len();
    let stats = corpus_stats(&filtered)?;

    let stats_txt = dir.join("stats.txt");
    let stats_json = dir.join("stats.json");
    fs::write(&stats_txt, stats.to_text())?;
    fs::write(&stats_json, stats.to_json())?;

    println!("rendered {total} videos, {kept} pass the acceptance filter");
    print!("{}", stats.to_text());
    println!("wrote {}", dir.display());

    let mut m = RunManifest::new("build-corpus", &pc.digest());
    m.input(config)?;
    m.output(&dir.join("manifest.jsonl"));
    m.output(&stats_txt);
    m.output(&stats_json);
    m.finish(&dir, started)?;
    Ok(())
}

pub fn cmd_pretrain(
    config: &Path,
    corpus: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let pc = PipelineConfig::load(config)?;
    let root = out_root(out);
    let corpus_dir = corpus.unwrap_or_else(|| root.join("corpus"));
    let (manifest, manifest_path) = load_corpus(&corpus_dir)?;
    let filtered = filtered_corpus(&manifest, &pc)?;

    let train_ds = load_clip_dataset(&filtered, &pc.model, Split::Train)?;
    let val_ds = load_clip_dataset(&filtered, &pc.model, Split::Val)?;
    println!(
        "pretraining on {} transition clips across {} categories",
        train_ds.len(),
        train_ds.n_categories
    );

    let outcome = pretrain_transition_classifier(&train_ds, &pc.model, &pc.pretrain)?;
    for l in &outcome.logs {
        println!(
            "epoch {:>3}  lr {:.2e}  loss {:.4}  acc {:.3}",
            l.epoch, l.lr, l.loss, l.accuracy
        );
    }
    let val_accuracy = (!val_ds.is_empty())
        .then(|| classifier_accuracy(&outcome.store, &pc.model, &val_ds, pc.pretrain.batch_size));
    if let Some(acc) = val_accuracy {
        println!("val clip accuracy {acc:.3}");
    }

    let table = build_embedding_table(&outcome.store, &pc.model, &train_ds, &filtered.category_names)?;

    let dir = root.join("pretrain");
    fs::create_dir_all(&dir)?;
    let ckpt_path = dir.join("classifier.ckpt");
    let meta = CkptMeta {
        kind: "classifier".into(),
        model: pc.model.clone(),
        category_names: filtered.category_names.clone(),
        objective: None,
        pipeline_digest: pc.digest(),
    };
    save_checkpoint(&outcome.store, &serde_json::to_value(&meta)?, &ckpt_path)?;
    let table_path = dir.join("table.csv");
    table.save_csv(&table_path)?;
    let log_path = dir.join("pretrain_log.json");
    let log = serde_json::json!({
        "epochs": outcome.logs,
        "val_accuracy": val_accuracy,
        "n_train_clips": train_ds.len(),
        "n_categories": train_ds.n_categories,
    });
    fs::write(&log_path, serde_json::to_string_pretty(&log)?)?;

    // Projection report over the training clips' unit embeddings.
    let png_path = dir.join("embeddings.png");
    let csv_path = dir.join("embeddings.csv");
    let (embeds, labels) = classifier_embeddings(&outcome.store, &pc.model, &train_ds, 32);
    let coords = tsne_embed(
        embeds.view(),
        &TsneConfig {
            seed: pc.pretrain.seed,
            ..TsneConfig::default()
        },
    );
    scatter_png(&png_path, &coords, &labels, &filtered.category_names)?;
    save_coords_csv(&csv_path, &coords, &labels, &filtered.category_names)?;

    println!("wrote {}", dir.display());
    let mut m = RunManifest::new("pretrain", &pc.digest());
    m.input(config)?;
    m.input(&manifest_path)?;
    for p in [&ckpt_path, &table_path, &log_path, &png_path, &csv_path] {
        m.output(p);
    }
    m.finish(&dir, started)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainFlags {
    pub random_embedding: bool,
    pub no_context: bool,
    pub no_visual: bool,
    pub no_audio: bool,
}

pub fn cmd_train(
    config: &Path,
    corpus: Option<PathBuf>,
    classifier: Option<PathBuf>,
    table: Option<PathBuf>,
    flags: TrainFlags,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let pc = PipelineConfig::load(config)?;
    let root = out_root(out);
    let corpus_dir = corpus.unwrap_or_else(|| root.join("corpus"));
    let (manifest, manifest_path) = load_corpus(&corpus_dir)?;
    let filtered = filtered_corpus(&manifest, &pc)?;

    let classifier_path = classifier.unwrap_or_else(|| root.join("pretrain/classifier.ckpt"));
    let (backbone, cmeta) = load_ckpt(&classifier_path, "classifier")?;
    if cmeta.model != pc.model {
        return Err(CliError::Usage(format!(
            "{} was pretrained under a different model config",
            classifier_path.display()
        )));
    }

    let mut cfg = pc.model.clone();
    if flags.no_context {
        cfg.use_context = false;
    }
    if flags.no_visual {
        cfg.use_visual = false;
    }
    if flags.no_audio {
        cfg.use_audio = false;
    }
    cfg.validate()?;

    let mut table_input: Option<PathBuf> = None;
    let table = if flags.random_embedding {
        // Nothing pretrained to preserve, so no projections either.
        cfg.learnable_projections = false;
        TransitionEmbeddingTable::new(
            random_table(filtered.category_count, cfg.d_matching, pc.recommender.seed),
            filtered.category_names.clone(),
        )?
    } else {
        let path = table.unwrap_or_else(|| root.join("pretrain/table.csv"));
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "no category table at {} — run pretrain first or pass --random-embedding",
                path.display()
            )));
        }
        let t = TransitionEmbeddingTable::load_csv(&path)?;
        table_input = Some(path);
        t
    };
    if table.names != filtered.category_names {
        return Err(CliError::Usage(
            "table categories do not match the corpus".into(),
        ));
    }
    if table.dim() != cfg.d_matching {
        return Err(CliError::Usage(format!(
            "table dimension {} vs d_matching {}",
            table.dim(),
            cfg.d_matching
        )));
    }

    let train_ds = load_sequence_dataset(&filtered, &cfg, Split::Train, &backbone)?;
    let val_ds = load_sequence_dataset(&filtered, &cfg, Split::Val, &backbone)?;
    println!(
        "training on {} videos ({} transition points), validating on {}",
        train_ds.items.len(),
        train_ds.n_points(&cfg),
        val_ds.items.len()
    );

    let mut trained = train_recommender(
        &train_ds,
        (!val_ds.items.is_empty()).then_some(&val_ds),
        &table,
        &cfg,
        &pc.recommender,
    )?;
    for l in &trained.logs {
        match &l.val {
            Some(v) => println!(
                "epoch {:>3}  lr {:.2e}  loss {:.4}  val R@1 {:.3} MR {:.2}",
                l.epoch, l.lr, l.train_loss, v.recall_at_1, v.mean_rank
            ),
            None => println!("epoch {:>3}  lr {:.2e}  loss {:.4}", l.epoch, l.lr, l.train_loss),
        }
    }

    // Fold the frozen backbone in so the checkpoint featurizes raw video
    // on its own.
    adopt_frozen_params(&mut trained.store, &backbone, "visual.");

    let dir = root.join("train");
    fs::create_dir_all(&dir)?;
    let ckpt_path = dir.join("recommender.ckpt");
    let meta = CkptMeta {
        kind: "recommender".into(),
        model: cfg,
        category_names: filtered.category_names.clone(),
        objective: Some(pc.recommender.objective),
        pipeline_digest: pc.digest(),
    };
    save_checkpoint(&trained.store, &serde_json::to_value(&meta)?, &ckpt_path)?;
    let log_path = dir.join("train_log.json");
    fs::write(
        &log_path,
        serde_json::to_string_pretty(&serde_json::json!({ "epochs": trained.logs }))?,
    )?;

    println!("wrote {}", dir.display());
    let mut m = RunManifest::new("train", &pc.digest());
    m.input(config)?;
    m.input(&manifest_path)?;
    m.input(&classifier_path)?;
    if let Some(p) = &table_input {
        m.input(p)?;
    }
    m.option(
        "embedding_init",
        if flags.random_embedding { "random" } else { "pretrained" },
    );
    m.option("context", if flags.no_context { "off" } else { "on" });
    m.option("visual", if flags.no_visual { "off" } else { "on" });
    m.option("audio", if flags.no_audio { "off" } else { "on" });
    m.output(&ckpt_path);
    m.output(&log_path);
    m.finish(&dir, started)?;
    Ok(())
}

fn parse_split(s: &str) -> Result<Split, CliError> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        other => Err(CliError::Usage(format!(
            "unknown split `{other}` (expected train|val)"
        ))),
    }
}

pub fn cmd_eval(
    checkpoint: Option<PathBuf>,
    corpus: Option<PathBuf>,
    split: &str,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let split = parse_split(split)?;
    let root = out_root(out);
    let ckpt_path = checkpoint.unwrap_or_else(|| root.join("train/recommender.ckpt"));
    let (store, meta) = load_ckpt(&ckpt_path, "recommender")?;

    let corpus_dir = corpus.unwrap_or_else(|| root.join("corpus"));
    let (manifest, manifest_path) = load_corpus(&corpus_dir)?;
    if meta.category_names != manifest.category_names {
        return Err(CliError::Usage(
            "checkpoint categories do not match the corpus".into(),
        ));
    }
    if meta.model.frame_height != manifest.config.height
        || meta.model.frame_width != manifest.config.width
        || meta.model.audio_sample_rate != manifest.config.sample_rate
    {
        return Err(CliError::Usage(
            "checkpoint was trained for a different corpus geometry".into(),
        ));
    }
    let filtered = filter_corpus(&manifest, manifest.config.min_distinct_types)?;

    // The checkpoint carries the frozen backbone, so it featurizes too.
    let ds = load_sequence_dataset(&filtered, &meta.model, split, &store)?;
    let objective = meta.objective.unwrap_or_default();
    let summary = crate::eval::evaluate_with_breakdown(
        &store,
        &meta.model,
        &ds,
        &objective,
        &meta.category_names,
    );

    let dir = root.join("eval");
    fs::create_dir_all(&dir)?;
    let csv_path = dir.join("metrics.csv");
    fs::write(
        &csv_path,
        format!(
            "Recall@1,Recall@5,Mean Rank\n{:.6},{:.6},{:.6}\n",
            summary.overall.recall_at_1, summary.overall.recall_at_5, summary.overall.mean_rank
        ),
    )?;
    let report_path = dir.join("report.txt");
    fs::write(&report_path, summary.to_text())?;
    let json_path = dir.join("metrics.json");
    fs::write(&json_path, serde_json::to_string_pretty(&summary)?)?;

    print!("{}", summary.to_text());
    println!("wrote {}", dir.display());
    let mut m = RunManifest::new("eval", &meta.pipeline_digest);
    m.input(&ckpt_path)?;
    m.input(&manifest_path)?;
    m.option("split", if split == Split::Val { "val" } else { "train" });
    for p in [&csv_path, &report_path, &json_path] {
        m.output(p);
    }
    m.finish(&dir, started)?;
    Ok(())
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Usage(format!("bad seed `{t}` in --seeds")))
        })
        .collect()
}

pub fn cmd_ablate(
    config: &Path,
    corpus: Option<PathBuf>,
    classifier: Option<PathBuf>,
    table: Option<PathBuf>,
    seeds: Option<String>,
    plot: bool,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let pc = PipelineConfig::load(config)?;
    let root = out_root(out);
    let corpus_dir = corpus.unwrap_or_else(|| root.join("corpus"));
    let (manifest, manifest_path) = load_corpus(&corpus_dir)?;
    let filtered = filtered_corpus(&manifest, &pc)?;

    let classifier_path = classifier.unwrap_or_else(|| root.join("pretrain/classifier.ckpt"));
    let (backbone, cmeta) = load_ckpt(&classifier_path, "classifier")?;
    if cmeta.model != pc.model {
        return Err(CliError::Usage(format!(
            "{} was pretrained under a different model config",
            classifier_path.display()
        )));
    }
    let table_path = table.unwrap_or_else(|| root.join("pretrain/table.csv"));
    if !table_path.exists() {
        return Err(CliError::Usage(format!(
            "no category table at {} — run pretrain first",
            table_path.display()
        )));
    }
    let table = TransitionEmbeddingTable::load_csv(&table_path)?;
    if table.names != filtered.category_names {
        return Err(CliError::Usage(
            "table categories do not match the corpus".into(),
        ));
    }

    let seeds = match seeds {
        Some(s) => parse_seeds(&s)?,
        None => pc.ablation_seeds.clone(),
    };

    // Features do not depend on the ablated switches, so one featurize
    // pass serves the whole grid.
    let train_ds = load_sequence_dataset(&filtered, &pc.model, Split::Train, &backbone)?;
    let val_ds = load_sequence_dataset(&filtered, &pc.model, Split::Val, &backbone)?;
    let specs = standard_variants(&pc.model);
    println!(
        "ablating {} variants x {} seeds on {} train / {} val videos",
        specs.len(),
        seeds.len(),
        train_ds.items.len(),
        val_ds.items.len()
    );
    let ctx = AblationContext {
        train: &train_ds,
        val: &val_ds,
        pretrained: &table,
        train_cfg: pc.recommender.clone(),
    };
    let report = run_ablation_grid(&specs, &seeds, &ctx);

    let dir = root.join("ablation");
    fs::create_dir_all(&dir)?;
    let csv_path = dir.join("ablation.csv");
    fs::write(&csv_path, report.to_csv())?;
    let txt_path = dir.join("ablation.txt");
    let text = report.to_text_table();
    fs::write(&txt_path, &text)?;
    let json_path = dir.join("ablation.json");
    fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
    print!("{text}");

    let mut m = RunManifest::new("ablate", &pc.digest());
    m.input(config)?;
    m.input(&manifest_path)?;
    m.input(&classifier_path)?;
    m.input(&table_path)?;
    m.option(
        "seeds",
        &seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
    );
    for p in [&csv_path, &txt_path, &json_path] {
        m.output(p);
    }

    if plot {
        let clip_ds = load_clip_dataset(&filtered, &pc.model, Split::Train)?;
        let (embeds, labels) = classifier_embeddings(&backbone, &pc.model, &clip_ds, 32);
        let coords = tsne_embed(
            embeds.view(),
            &TsneConfig {
                seed: pc.pretrain.seed,
                ..TsneConfig::default()
            },
        );
        let png_path = dir.join("embeddings.png");
        let coords_path = dir.join("embeddings.csv");
        scatter_png(&png_path, &coords, &labels, &filtered.category_names)?;
        save_coords_csv(&coords_path, &coords, &labels, &filtered.category_names)?;
        m.output(&png_path);
        m.output(&coords_path);
    }

    m.finish(&dir, started)?;
    println!("wrote {}", dir.display());

    if report.runs.iter().all(|r| r.result.is_err()) {
        return Err(CliError::Other("every ablation run failed".into()));
    }
    Ok(())
}

/// Visual tokens through the stored backbone plus mel windows anchored
/// at each shot's end within the shared soundtrack.
fn featurize_raw(
    shots: &[Shot],
    audio: Option<&crate::synthgen::AudioTrack>,
    cfg: &ModelConfig,
    store: &ParamStore,
) -> Result<VideoFeatures, CliError> {
    for (i, shot) in shots.iter().enumerate() {
        if shot.height() != cfg.frame_height || shot.width() != cfg.frame_width {
            return Err(CliError::Usage(format!(
                "shot {i} is {}x{} but the model expects {}x{}",
                shot.height(),
                shot.width(),
                cfg.frame_height,
                cfg.frame_width
            )));
        }
    }
    let mut batch = ArrayD::<f32>::zeros(IxDyn(&[
        shots.len(),
        3,
        cfg.n_frames,
        cfg.pooled_height(),
        cfg.pooled_width(),
    ]));
    for (i, shot) in shots.iter().enumerate() {
        let (lo, hi) = shot_window(0, shot.frames.len(), cfg.n_frames);
        let refs: Vec<&crate::fx::Frame> = shot.frames[lo..hi].iter().collect();
        batch.index_axis_mut(Axis(0), i).assign(&clip_tensor(&refs, cfg));
    }
    let mut g = Graph::new();
    let x = g.input(batch);
    let node = VisualEncoder::forward(&mut g, store, cfg, x);
    let visual = g.value2(node).to_owned();

    let mels = match audio {
        Some(track) => {
            if track.sample_rate != cfg.audio_sample_rate {
                return Err(CliError::Usage(format!(
                    "soundtrack is {} Hz but the model expects {} Hz",
                    track.sample_rate, cfg.audio_sample_rate
                )));
            }
            let extractor = MelExtractor::new(cfg);
            let window = (cfg.audio_sample_rate as f64 * cfg.audio_window_s).round() as usize;
            let mut mels = Vec::with_capacity(shots.len());
            let mut end_s = 0.0f64;
            for shot in shots {
                end_s += shot.duration_s();
                let end = ((end_s * track.sample_rate as f64).round() as usize)
                    .min(track.samples.len());
                let start = end.saturating_sub(window);
                mels.push(extractor.mel(&track.samples[start..end]));
            }
            mels
        }
        None => Vec::new(),
    };
    Ok(VideoFeatures { visual, mels })
}

pub fn cmd_recommend(
    checkpoint: &Path,
    shot_paths: &[PathBuf],
    audio: Option<PathBuf>,
    table: Option<PathBuf>,
    top_k: usize,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    if shot_paths.len() < 2 {
        return Err(CliError::Usage(
            "need at least two shots to have a transition point".into(),
        ));
    }
    if top_k == 0 {
        return Err(CliError::Usage("--top-k must be at least 1".into()));
    }
    let (mut store, meta) = load_ckpt(checkpoint, "recommender")?;
    let cfg = &meta.model;
    let objective = meta.objective.unwrap_or_default();

    if let Some(path) = table {
        let t = TransitionEmbeddingTable::load_csv(&path)?;
        if t.names != meta.category_names || t.dim() != cfg.d_matching {
            return Err(CliError::Usage(format!(
                "{} does not match the checkpoint's categories",
                path.display()
            )));
        }
        if !store.contains(TABLE_PARAM) {
            return Err(CliError::Usage(
                "checkpoint has no table to override (classification head)".into(),
            ));
        }
        store.get_mut(TABLE_PARAM).value = t.embeddings.into_dyn();
    }

    let shots: Vec<Shot> = shot_paths
        .iter()
        .map(|p| load_shot(p))
        .collect::<Result<_, _>>()?;
    let track = match (&audio, cfg.use_audio) {
        (Some(path), _) => Some(load_audio(path)?),
        (None, true) => {
            return Err(CliError::Usage(
                "this checkpoint uses audio; pass --audio".into(),
            ))
        }
        (None, false) => None,
    };
    let feats = featurize_raw(&shots, track.as_ref(), cfg, &store)?;

    // Long timelines are scored through sliding windows so a boundary
    // always sees as much left context as the model was trained on.
    let s_max = cfg.max_shots();
    let n = shots.len();
    let mut boundary_scores: Vec<Array1<f32>> = Vec::with_capacity(n - 1);
    if n <= s_max {
        let m = score_video(&store, cfg, &feats, &objective);
        for row in m.rows() {
            boundary_scores.push(row.to_owned());
        }
    } else {
        for t in 0..n - 1 {
            let w = (t + 2).saturating_sub(s_max);
            let window = VideoFeatures {
                visual: feats.visual.slice(s![w..w + s_max, ..]).to_owned(),
                mels: if feats.mels.is_empty() {
                    Vec::new()
                } else {
                    feats.mels[w..w + s_max].to_vec()
                },
            };
            let m = score_video(&store, cfg, &window, &objective);
            boundary_scores.push(m.row(t - w).to_owned());
        }
    }

    let k = top_k.min(meta.category_names.len());
    let mut csv = String::from("boundary,rank,category_id,category,score\n");
    for (t, scores) in boundary_scores.iter().enumerate() {
        let ranked = rank_scores(&scores.to_vec());
        for (r, &id) in ranked.order[..k].iter().enumerate() {
            csv.push_str(&format!(
                "{t},{},{id},{},{:.6}\n",
                r + 1,
                meta.category_names[id],
                ranked.scores[id]
            ));
        }
    }
    print!("{csv}");
    if let Some(path) = out {
        fs::write(&path, &csv)?;
    }
    Ok(())
}
