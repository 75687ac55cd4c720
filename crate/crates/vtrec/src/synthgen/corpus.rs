//! Corpus assembly: drive the scene generator, the labeling policy and
//! the compositor to produce edited videos with ground-truth annotation
//! sidecars, then filter and split them.
//!
//! Everything is a pure function of (config, seed). Building the same
//! config twice yields byte-identical frame containers and manifests,
//! which is what the replay tests downstream lean on.

use super::audio::{generate_audio, Mood};
use super::policy::{sample_transition_labels, PolicyConfig};
use super::scene::{generate_shot, Brightness, Motion, SceneSpec};
use super::store::{save_audio, save_frames, StoreError};
use crate::fx::{compose_edited_video, FxError, Registry, Shot, TransitionCategory};
use crate::util::{seeded_rng, sha256_hex};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// A category may label at most this many boundaries within one video.
pub const MAX_USES_PER_TYPE: usize = 6;
/// Videos longer than this are dropped by the filter pass.
pub const MAX_VIDEO_DURATION_S: f64 = 60.0;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("unknown policy kind `{0}` (expected deterministic|stochastic)")]
    UnknownPolicy(String),
    #[error("bad category priors: {0}")]
    BadPriors(String),
    #[error("need at least two scenes per video, got {0}")]
    TooFewScenes(usize),
    #[error("bad corpus config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Fx(#[from] FxError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest parse: {0}")]
    Json(#[from] serde_json::Error),
    #[error("corrupt manifest: {0}")]
    BadManifest(String),
    #[error("corpus is empty after filtering")]
    EmptyCorpus,
}

/// Which category table a corpus draws labels from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegistryScale {
    Full,
    Desk,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n_videos: usize,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub fps: f32,
    pub shots_min: usize,
    pub shots_max: usize,
    /// Uniform shot length range in seconds, inclusive of the low end.
    pub shot_duration_range: (f64, f64),
    pub transition_duration_s: f64,
    pub registry: RegistryScale,
    pub include_direct_cut: bool,
    pub policy: PolicyConfig,
    /// Probability a video gets an energetic (vs soft) soundtrack.
    pub energetic_fraction: f64,
    pub tempo_range: (f32, f32),
    pub sample_rate: u32,
    /// Sampling weights over [pan left, pan right, pan up, pan down,
    /// zoom in, zoom out, static].
    pub motion_weights: [f32; 7],
    /// Sampling weights over [bright, dark, flash].
    pub brightness_weights: [f32; 3],
    /// Drop trailing shots until a video fits under this many seconds.
    pub max_duration_cap: Option<f64>,
    /// Filter threshold: minimum distinct categories per video.
    pub min_distinct_types: usize,
    pub val_fraction: f64,
}

impl CorpusConfig {
    /// Small-footage preset: 64x64 at 12 fps over the 8-category table.
    /// Sized so the full pipeline trains in minutes on one core.
    pub fn desk() -> Self {
        CorpusConfig {
            n_videos: 80,
            seed: 17,
            height: 64,
            width: 64,
            fps: 12.0,
            shots_min: 3,
            shots_max: 5,
            shot_duration_range: (1.6, 2.6),
            transition_duration_s: 0.5,
            registry: RegistryScale::Desk,
            include_direct_cut: false,
            policy: PolicyConfig::default(),
            energetic_fraction: 0.5,
            tempo_range: (84.0, 132.0),
            sample_rate: 8000,
            motion_weights: [0.125, 0.125, 0.125, 0.125, 0.1, 0.1, 0.3],
            brightness_weights: [0.55, 0.30, 0.15],
            max_duration_cap: None,
            min_distinct_types: 2,
            val_fraction: 0.2,
        }
    }

    /// Production-scale preset over the full 30-category table. This is
    /// the shape of the real corpora; nobody should run it on a laptop.
    pub fn production() -> Self {
        CorpusConfig {
            n_videos: 35_000,
            seed: 1,
            height: 224,
            width: 224,
            fps: 16.0,
            shots_min: 3,
            shots_max: 9,
            shot_duration_range: (1.5, 6.0),
            transition_duration_s: 0.5,
            registry: RegistryScale::Full,
            include_direct_cut: false,
            policy: PolicyConfig::default(),
            energetic_fraction: 0.5,
            tempo_range: (70.0, 150.0),
            sample_rate: 16_000,
            motion_weights: [0.125, 0.125, 0.125, 0.125, 0.1, 0.1, 0.3],
            brightness_weights: [0.55, 0.30, 0.15],
            max_duration_cap: Some(MAX_VIDEO_DURATION_S),
            min_distinct_types: 2,
            val_fraction: 0.143,
        }
    }

    pub fn build_registry(&self) -> Registry {
        match self.registry {
            RegistryScale::Full => Registry::full(self.include_direct_cut),
            RegistryScale::Desk => Registry::desk(self.include_direct_cut),
        }
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        sha256_hex(&json)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::BadConfig(m));
        if self.n_videos == 0 {
            return bad("n_videos must be positive".into());
        }
        if self.shots_min < 2 || self.shots_max < self.shots_min {
            return bad(format!(
                "shot count range [{}, {}] must start at 2 and be non-decreasing",
                self.shots_min, self.shots_max
            ));
        }
        if !(self.fps > 0.0) {
            return bad(format!("fps {} must be positive", self.fps));
        }
        if self.height < 4 || self.width < 4 {
            return bad(format!("{}x{} frames are too small", self.height, self.width));
        }
        let (lo, hi) = self.shot_duration_range;
        if !(lo > 0.0 && hi >= lo) {
            return bad(format!("shot duration range ({lo}, {hi}) is invalid"));
        }
        // A shot flanked by two transitions loses duration/2 frames at
        // both ends; keep two frames of slack so composition never trips
        // the too-short guard.
        if lo <= self.transition_duration_s + 2.0 / self.fps as f64 {
            return bad(format!(
                "minimum shot duration {lo}s leaves no room for {}s transitions",
                self.transition_duration_s
            ));
        }
        if !(self.transition_duration_s > 0.0) {
            return bad("transition duration must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.energetic_fraction) {
            return bad(format!(
                "energetic_fraction {} outside [0, 1]",
                self.energetic_fraction
            ));
        }
        if !(self.tempo_range.0 > 0.0 && self.tempo_range.1 >= self.tempo_range.0) {
            return bad(format!("tempo range {:?} is invalid", self.tempo_range));
        }
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        for (name, ws) in [
            ("motion_weights", &self.motion_weights[..]),
            ("brightness_weights", &self.brightness_weights[..]),
        ] {
            if ws.iter().any(|w| !w.is_finite() || *w < 0.0) || ws.iter().sum::<f32>() <= 0.0 {
                return bad(format!("{name} must be non-negative with positive sum"));
            }
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction {} outside (0, 1)", self.val_fraction));
        }
        if self.min_distinct_types == 0 {
            return bad("min_distinct_types must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub label: usize,
    pub name: String,
    pub start_s: f64,
    pub end_s: f64,
}

/// One edited video plus everything needed to reconstruct its labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub video_id: String,
    pub split: Split,
    pub duration_s: f64,
    pub fps: f32,
    pub height: usize,
    pub width: usize,
    /// Paths are relative to the manifest's directory.
    pub frames_path: String,
    pub audio_path: String,
    /// Frame index ranges `[start, end)` of the uncontaminated shot
    /// segments, in timeline order.
    pub segments: Vec<(usize, usize)>,
    pub annotations: Vec<AnnotationRecord>,
    pub scene_specs: Vec<SceneSpec>,
    pub shot_durations: Vec<f64>,
    pub mood: Mood,
    pub tempo_bpm: f32,
}

impl SampleRecord {
    pub fn distinct_types(&self) -> usize {
        let mut labels: Vec<usize> = self.annotations.iter().map(|a| a.label).collect();
        labels.sort_unstable();
        labels.dedup();
        labels.len()
    }

    pub fn max_uses_of_any_type(&self) -> usize {
        let mut counts = std::collections::HashMap::new();
        for a in &self.annotations {
            *counts.entry(a.label).or_insert(0usize) += 1;
        }
        counts.values().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestHeader {
    category_count: usize,
    category_names: Vec<String>,
    config_digest: String,
    config: CorpusConfig,
}

#[derive(Debug, Clone)]
pub struct CorpusManifest {
    pub category_count: usize,
    pub category_names: Vec<String>,
    pub config_digest: String,
    pub config: CorpusConfig,
    pub records: Vec<SampleRecord>,
    /// Directory the relative paths in `records` resolve against.
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn frames_path(&self, record: &SampleRecord) -> PathBuf {
        self.root.join(&record.frames_path)
    }

    pub fn audio_path(&self, record: &SampleRecord) -> PathBuf {
        self.root.join(&record.audio_path)
    }

    pub fn registry(&self) -> Registry {
        self.config.build_registry()
    }

    pub fn split_records(&self, split: Split) -> Vec<&SampleRecord> {
        self.records.iter().filter(|r| r.split == split).collect()
    }

    /// One record per line: a header, then the samples.
    pub fn save(&self, path: &Path) -> Result<(), GenError> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        let header = ManifestHeader {
            category_count: self.category_count,
            category_names: self.category_names.clone(),
            config_digest: self.config_digest.clone(),
            config: self.config.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GenError> {
        let file = fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| GenError::BadManifest("empty manifest".into()))??;
        let header: ManifestHeader = serde_json::from_str(&header_line)?;
        if header.config.digest() != header.config_digest {
            return Err(GenError::BadManifest(
                "config digest does not match the stored config".into(),
            ));
        }
        let mut records = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: SampleRecord = serde_json::from_str(&line)?;
            for a in &r.annotations {
                if a.label >= header.category_count {
                    return Err(GenError::BadManifest(format!(
                        "{}: label {} out of range for {} categories",
                        r.video_id, a.label, header.category_count
                    )));
                }
            }
            records.push(r);
        }
        let root = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(CorpusManifest {
            category_count: header.category_count,
            category_names: header.category_names,
            config_digest: header.config_digest,
            config: header.config,
            records,
            root,
        })
    }
}

fn sample_weighted(weights: &[f32], rng: &mut impl Rng) -> usize {
    let total: f32 = weights.iter().sum();
    let mut u = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

const MOTIONS: [Motion; 7] = [
    Motion::PanLeft,
    Motion::PanRight,
    Motion::PanUp,
    Motion::PanDown,
    Motion::ZoomIn,
    Motion::ZoomOut,
    Motion::Static,
];
const BRIGHTNESS: [Brightness; 3] = [Brightness::Bright, Brightness::Dark, Brightness::Flash];

/// Generates one video worth of scene plans from the per-video stream.
struct VideoPlan {
    scene_specs: Vec<SceneSpec>,
    shot_durations: Vec<f64>,
    mood: Mood,
    tempo_bpm: f32,
    label_seed: u64,
    audio_seed: u64,
}

fn plan_video(cfg: &CorpusConfig, index: usize) -> VideoPlan {
    let mut rng = seeded_rng(cfg.seed, &format!("video-{index}"));
    let n_shots = rng.random_range(cfg.shots_min..=cfg.shots_max);
    let mut scene_specs = Vec::with_capacity(n_shots);
    let mut shot_durations = Vec::with_capacity(n_shots);
    for _ in 0..n_shots {
        let motion = MOTIONS[sample_weighted(&cfg.motion_weights, &mut rng)];
        let brightness = BRIGHTNESS[sample_weighted(&cfg.brightness_weights, &mut rng)];
        scene_specs.push(SceneSpec {
            motion,
            brightness,
            texture_seed: rng.random(),
        });
        let (lo, hi) = cfg.shot_duration_range;
        shot_durations.push(rng.random_range(lo..=hi));
    }
    // Trim from the tail to respect the duration cap; composition keeps
    // total length equal to the sum of shot lengths, so the plan is the
    // arithmetic.
    if let Some(cap) = cfg.max_duration_cap {
        while scene_specs.len() > 2 && shot_durations.iter().sum::<f64>() > cap {
            scene_specs.pop();
            shot_durations.pop();
        }
    }
    let mood = if rng.random_range(0.0..1.0) < cfg.energetic_fraction {
        Mood::Energetic
    } else {
        Mood::Soft
    };
    let tempo_bpm = rng.random_range(cfg.tempo_range.0..=cfg.tempo_range.1);
    VideoPlan {
        scene_specs,
        shot_durations,
        mood,
        tempo_bpm,
        label_seed: rng.random(),
        audio_seed: rng.random(),
    }
}

/// Renders the whole corpus under `out_dir` and writes
/// `out_dir/manifest.jsonl`. Already-existing files are overwritten; on
/// failure everything written so far is removed.
pub fn build_corpus(cfg: &CorpusConfig, out_dir: &Path) -> Result<CorpusManifest, GenError> {
    cfg.validate()?;
    let reg = cfg.build_registry();
    let videos_dir = out_dir.join("videos");
    fs::create_dir_all(&videos_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();

    let result = (|| -> Result<Vec<SampleRecord>, GenError> {
        let mut records = Vec::with_capacity(cfg.n_videos);
        for index in 0..cfg.n_videos {
            let plan = plan_video(cfg, index);
            let labels = sample_transition_labels(
                &plan.scene_specs,
                plan.mood,
                &cfg.policy,
                &reg,
                plan.label_seed,
            )?;
            let shots: Vec<Shot> = plan
                .scene_specs
                .iter()
                .zip(&plan.shot_durations)
                .map(|(spec, d)| generate_shot(spec, *d, cfg.fps, cfg.height, cfg.width))
                .collect();
            let cats: Vec<TransitionCategory> = labels
                .iter()
                .map(|&id| reg.get(id).expect("policy stays in range").clone())
                .collect();
            let total_s: f64 = plan.shot_durations.iter().sum();
            let audio = generate_audio(
                plan.mood,
                plan.tempo_bpm,
                total_s,
                cfg.sample_rate,
                plan.audio_seed,
            );
            let video =
                compose_edited_video(&shots, &cats, audio, cfg.transition_duration_s)?;

            let video_id = format!("v{index:05}");
            let frames_rel = format!("videos/{video_id}.vframes");
            let audio_rel = format!("videos/{video_id}.audio");
            let frames_abs = out_dir.join(&frames_rel);
            let audio_abs = out_dir.join(&audio_rel);
            let frames: Vec<crate::fx::Frame> =
                video.all_frames().into_iter().cloned().collect();
            save_frames(&frames_abs, &frames, cfg.fps)?;
            written.push(frames_abs);
            save_audio(&audio_abs, &video.audio)?;
            written.push(audio_abs);

            records.push(SampleRecord {
                video_id,
                split: Split::Train,
                duration_s: video.duration_s(),
                fps: cfg.fps,
                height: cfg.height,
                width: cfg.width,
                frames_path: frames_rel,
                audio_path: audio_rel,
                segments: video.segment_frame_ranges(),
                annotations: video
                    .annotations
                    .iter()
                    .zip(&labels)
                    .map(|(a, &label)| AnnotationRecord {
                        label,
                        name: reg.get(label).unwrap().name.to_string(),
                        start_s: a.start_s,
                        end_s: a.end_s,
                    })
                    .collect(),
                scene_specs: plan.scene_specs,
                shot_durations: plan.shot_durations,
                mood: plan.mood,
                tempo_bpm: plan.tempo_bpm,
            });
        }
        Ok(records)
    })();

    let records = match result {
        Ok(records) => records,
        Err(e) => {
            for p in written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
    };

    let mut manifest = CorpusManifest {
        category_count: reg.len(),
        category_names: reg.names().iter().map(|n| n.to_string()).collect(),
        config_digest: cfg.digest(),
        config: cfg.clone(),
        records,
        root: out_dir.to_path_buf(),
    };
    split_corpus(&mut manifest, cfg.val_fraction, cfg.seed);
    manifest.save(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

/// The per-record acceptance predicate behind [`filter_corpus`].
pub fn record_passes_filters(record: &SampleRecord, min_distinct_types: usize) -> bool {
    if record.annotations.is_empty() {
        return false;
    }
    if record.distinct_types() < min_distinct_types {
        return false;
    }
    if record.max_uses_of_any_type() > MAX_USES_PER_TYPE {
        return false;
    }
    if record.duration_s > MAX_VIDEO_DURATION_S {
        return false;
    }
    true
}

/// Drops records failing any acceptance predicate. Applying the filter
/// to its own output changes nothing.
pub fn filter_corpus(
    manifest: &CorpusManifest,
    min_distinct_types: usize,
) -> Result<CorpusManifest, GenError> {
    let records: Vec<SampleRecord> = manifest
        .records
        .iter()
        .filter(|r| record_passes_filters(r, min_distinct_types))
        .cloned()
        .collect();
    if records.is_empty() {
        return Err(GenError::EmptyCorpus);
    }
    Ok(CorpusManifest {
        records,
        ..manifest.clone()
    })
}

/// Reassigns train/val membership with a seeded shuffle. Keeps both
/// splits non-empty whenever there are at least two records.
pub fn split_corpus(manifest: &mut CorpusManifest, val_fraction: f64, seed: u64) {
    let n = manifest.records.len();
    if n == 0 {
        return;
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = seeded_rng(seed, "split");
    // Fisher-Yates; rand's shuffle would work too but this keeps the
    // stream layout pinned by our own code.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
    let mut n_val = (n as f64 * val_fraction).round() as usize;
    if n >= 2 {
        n_val = n_val.clamp(1, n - 1);
    } else {
        n_val = 0;
    }
    for (rank, &idx) in indices.iter().enumerate() {
        manifest.records[idx].split = if rank < n_val { Split::Val } else { Split::Train };
    }
}
