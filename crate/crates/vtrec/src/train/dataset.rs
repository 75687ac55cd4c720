//! Turns stored corpus videos into model inputs: labelled clip tensors
//! for the classifier, per-shot feature sequences for the recommender.

use crate::fx::{Frame, DEFAULT_CUT_WINDOW};
use crate::model::{clip_tensor, MelExtractor, ModelConfig, VideoFeatures, VisualEncoder};
use crate::nn::{Graph, ParamStore};
use crate::synthgen::store::load_audio;
use crate::synthgen::store::load_frames;
use crate::synthgen::{CorpusManifest, SampleRecord, Split};
use ndarray::{Array2, ArrayD, Axis, IxDyn};
use super::TrainError;

/// Frame range `[start, end)` of transition clip `i`: the gap between
/// shot segments `i` and `i + 1`. Direct cuts leave no gap, so a small
/// window straddling the cut point stands in (clamped at video edges).
pub fn transition_clip_range(
    segments: &[(usize, usize)],
    i: usize,
    n_frames_total: usize,
) -> (usize, usize) {
    assert!(i + 1 < segments.len(), "no transition {i}");
    let gap_start = segments[i].1;
    let gap_end = segments[i + 1].0;
    if gap_end > gap_start {
        (gap_start, gap_end)
    } else {
        let w = DEFAULT_CUT_WINDOW;
        (gap_start.saturating_sub(w), (gap_end + w).min(n_frames_total))
    }
}

/// Labelled transition clips, already shaped for the backbone.
pub struct ClipDataset {
    pub clips: Vec<ArrayD<f32>>,
    pub labels: Vec<usize>,
    pub n_categories: usize,
}

impl ClipDataset {
    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// Stack the chosen clips into one (B, 3, F, H, W) batch.
    pub fn batch(&self, idx: &[usize]) -> (ArrayD<f32>, Vec<usize>) {
        assert!(!idx.is_empty());
        let one = self.clips[idx[0]].shape().to_vec();
        let mut shape = vec![idx.len()];
        shape.extend_from_slice(&one);
        let mut out = ArrayD::<f32>::zeros(IxDyn(&shape));
        for (row, &i) in idx.iter().enumerate() {
            out.index_axis_mut(Axis(0), row).assign(&self.clips[i]);
        }
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        (out, labels)
    }
}

fn check_geometry(record: &SampleRecord, cfg: &ModelConfig) -> Result<(), TrainError> {
    if record.height != cfg.frame_height || record.width != cfg.frame_width {
        return Err(TrainError::BadData(format!(
            "video {} is {}x{} but the model expects {}x{}",
            record.video_id, record.height, record.width, cfg.frame_height, cfg.frame_width
        )));
    }
    Ok(())
}

pub fn load_clip_dataset(
    manifest: &CorpusManifest,
    cfg: &ModelConfig,
    split: Split,
) -> Result<ClipDataset, TrainError> {
    let mut clips = Vec::new();
    let mut labels = Vec::new();
    for record in manifest.split_records(split) {
        check_geometry(record, cfg)?;
        let (frames, _fps) = load_frames(&manifest.frames_path(record))?;
        for (i, ann) in record.annotations.iter().enumerate() {
            let (start, end) = transition_clip_range(&record.segments, i, frames.len());
            if end <= start {
                return Err(TrainError::BadData(format!(
                    "video {}: empty clip range for transition {i}",
                    record.video_id
                )));
            }
            let refs: Vec<&Frame> = frames[start..end].iter().collect();
            clips.push(clip_tensor(&refs, cfg));
            labels.push(ann.label);
        }
    }
    if clips.is_empty() {
        return Err(TrainError::BadData(format!(
            "no transition clips in the {split:?} split"
        )));
    }
    Ok(ClipDataset {
        clips,
        labels,
        n_categories: manifest.category_count,
    })
}

/// Centered window of at most `n_frames` consecutive frames inside
/// `[start, end)`.
pub fn shot_window(start: usize, end: usize, n_frames: usize) -> (usize, usize) {
    let len = end - start;
    let w = len.min(n_frames);
    let lo = start + (len - w) / 2;
    (lo, lo + w)
}

/// One video's recommender inputs.
pub struct SequenceItem {
    pub video_id: String,
    pub feats: VideoFeatures,
    pub labels: Vec<usize>,
}

pub struct SequenceDataset {
    pub items: Vec<SequenceItem>,
    pub n_categories: usize,
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Transition points actually scored under this config's budget.
    pub fn n_points(&self, cfg: &ModelConfig) -> usize {
        self.items
            .iter()
            .map(|it| it.labels.len().min(cfg.max_transitions))
            .sum()
    }
}

/// Featurize one stored video: shot frames go through the (fixed)
/// visual backbone, shot audio becomes a mel image anchored at the
/// shot's end. The backbone store must hold the pretrained visual
/// parameters.
pub fn featurize_record(
    manifest: &CorpusManifest,
    record: &SampleRecord,
    cfg: &ModelConfig,
    backbone: &ParamStore,
) -> Result<SequenceItem, TrainError> {
    check_geometry(record, cfg)?;
    let extractor = MelExtractor::new(cfg);
    let window = (cfg.audio_sample_rate as f64 * cfg.audio_window_s).round() as usize;
    let (frames, fps) = load_frames(&manifest.frames_path(record))?;
    let audio = load_audio(&manifest.audio_path(record))?;
    let n_shots = record.segments.len();
    if n_shots < 2 {
        return Err(TrainError::BadData(format!(
            "video {} has fewer than two shots",
            record.video_id
        )));
    }

    // Visual: one backbone pass over the stacked shot clips. Each shot
    // contributes the `n_frames` consecutive frames at the center of its
    // uncontaminated span — the backbone was trained on dense
    // transition-length windows, and sampling a whole multi-second shot
    // sparsely would show it several-times-faster apparent motion than
    // anything it ever saw.
    let mut batch = ArrayD::<f32>::zeros(IxDyn(&[
        n_shots,
        3,
        cfg.n_frames,
        cfg.pooled_height(),
        cfg.pooled_width(),
    ]));
    for (s, &(start, end)) in record.segments.iter().enumerate() {
        if end <= start || end > frames.len() {
            return Err(TrainError::BadData(format!(
                "video {}: bad segment {s}",
                record.video_id
            )));
        }
        let (lo, hi) = shot_window(start, end, cfg.n_frames);
        let refs: Vec<&Frame> = frames[lo..hi].iter().collect();
        batch.index_axis_mut(Axis(0), s).assign(&clip_tensor(&refs, cfg));
    }
    let mut g = Graph::new();
    let x = g.input(batch);
    let out = VisualEncoder::forward(&mut g, backbone, cfg, x);
    let visual: Array2<f32> = g.value2(out).to_owned();

    // Audio: the last `audio_window_s` seconds of each shot.
    let mut mels = Vec::with_capacity(n_shots);
    for &(_, end) in &record.segments {
        let end_sample =
            ((end as f64 / fps as f64) * audio.sample_rate as f64).round() as usize;
        let end_sample = end_sample.min(audio.samples.len());
        let start_sample = end_sample.saturating_sub(window);
        mels.push(extractor.mel(&audio.samples[start_sample..end_sample]));
    }

    Ok(SequenceItem {
        video_id: record.video_id.clone(),
        feats: VideoFeatures { visual, mels },
        labels: record.annotations.iter().map(|a| a.label).collect(),
    })
}

/// Featurize every video in a split.
pub fn load_sequence_dataset(
    manifest: &CorpusManifest,
    cfg: &ModelConfig,
    split: Split,
    backbone: &ParamStore,
) -> Result<SequenceDataset, TrainError> {
    let mut items = Vec::new();
    for record in manifest.split_records(split) {
        items.push(featurize_record(manifest, record, cfg, backbone)?);
    }
    if items.is_empty() {
        return Err(TrainError::BadData(format!(
            "no videos in the {split:?} split"
        )));
    }
    Ok(SequenceDataset {
        items,
        n_categories: manifest.category_count,
    })
}
