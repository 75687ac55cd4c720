//! Small fixtures shared by the training tests: a 16x16 corpus and a
//! model sized to train in well under a second.

use crate::model::{MelExtractor, ModelConfig, VideoFeatures};
use crate::synthgen::{CorpusConfig, PolicyConfig, RegistryScale};
use crate::train::dataset::{SequenceDataset, SequenceItem};
use ndarray::Array2;
use rand::Rng;

pub(crate) fn tiny_corpus_config() -> CorpusConfig {
    CorpusConfig {
        n_videos: 4,
        seed: 23,
        height: 16,
        width: 16,
        fps: 8.0,
        shots_min: 3,
        shots_max: 4,
        shot_duration_range: (0.8, 1.2),
        transition_duration_s: 0.25,
        registry: RegistryScale::Desk,
        include_direct_cut: true,
        policy: PolicyConfig::default(),
        energetic_fraction: 0.5,
        tempo_range: (90.0, 120.0),
        sample_rate: 4000,
        motion_weights: [0.125, 0.125, 0.125, 0.125, 0.1, 0.1, 0.3],
        brightness_weights: [0.55, 0.30, 0.15],
        max_duration_cap: None,
        min_distinct_types: 2,
        val_fraction: 0.25,
    }
}

pub(crate) fn tiny_model_config() -> ModelConfig {
    ModelConfig {
        n_frames: 4,
        input_pool: 2,
        frame_height: 16,
        frame_width: 16,
        visual_channels: [2, 3, 6],
        audio_sample_rate: 4000,
        mel_bands: 16,
        n_fft: 128,
        hop: 64,
        audio_window_s: 0.75,
        audio_channels: [3, 5],
        d_audio: 7,
        d_model: 16,
        n_heads: 2,
        n_layers: 1,
        d_ff: 24,
        d_matching: 6,
        max_transitions: 3,
        ..ModelConfig::desk()
    }
}

/// A fabricated sequence dataset whose labels are a deterministic
/// function of the visual features, so a healthy trainer can overfit it.
pub(crate) fn fake_sequence_dataset(
    cfg: &ModelConfig,
    n_videos: usize,
    n_categories: usize,
    seed: u64,
) -> SequenceDataset {
    let ex = MelExtractor::new(cfg);
    let mut rng = crate::util::seeded_rng(seed, "fake-seqs");
    let items = (0..n_videos)
        .map(|i| {
            let n_shots = rng.random_range(3..=4usize);
            let visual = Array2::from_shape_fn((n_shots, cfg.d_visual()), |_| {
                rng.random_range(-1.0f32..1.0)
            });
            let labels: Vec<usize> = (0..n_shots - 1)
                .map(|t| {
                    let a = visual.row(t).iter().map(|v| v.abs()).sum::<f32>();
                    let b = visual.row(t + 1).iter().map(|v| v.abs()).sum::<f32>();
                    (((a + b) * 10.0) as usize) % n_categories
                })
                .collect();
            let mels = (0..n_shots)
                .map(|s| {
                    let f0 = 200.0 + 150.0 * ((i + s) % 5) as f32;
                    let tone: Vec<f32> = (0..(cfg.audio_sample_rate as f64
                        * cfg.audio_window_s) as usize)
                        .map(|k| {
                            (2.0 * std::f32::consts::PI * f0 * k as f32
                                / cfg.audio_sample_rate as f32)
                                .sin()
                                * 0.4
                        })
                        .collect();
                    ex.mel(&tone)
                })
                .collect();
            SequenceItem {
                video_id: format!("fake{i:03}"),
                feats: VideoFeatures { visual, mels },
                labels,
            }
        })
        .collect();
    SequenceDataset {
        items,
        n_categories,
    }
}
