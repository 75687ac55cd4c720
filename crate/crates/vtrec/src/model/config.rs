//! Model hyperparameters shared by the classifier and the recommender.

use crate::util::sha256_hex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad model config: {0}")]
    BadConfig(String),
    #[error("table shape mismatch: {0}")]
    TableShape(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("table parse: {0}")]
    TableParse(String),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error("checkpoint is for a different config (stored digest {stored}, ours {ours})")]
    ConfigMismatch { stored: String, ours: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Frames sampled per clip (uniform over the clip's span).
    pub n_frames: usize,
    /// Spatial mean-pool factor applied to raw frames before the
    /// backbone (1 = none).
    pub input_pool: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    /// Channel widths of the three conv3d stages; the last is the
    /// visual feature dimension.
    pub visual_channels: [usize; 3],

    pub audio_sample_rate: u32,
    pub mel_bands: usize,
    pub n_fft: usize,
    pub hop: usize,
    /// Seconds of audio per shot token, anchored at the shot's end.
    pub audio_window_s: f64,
    /// Channel widths of the two conv2d stages over the mel image.
    pub audio_channels: [usize; 2],
    pub d_audio: usize,

    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    /// Matching-space dimension; also the clip-classifier embedding
    /// width, so table and query meet in the same space.
    pub d_matching: usize,
    /// Sequences are truncated to this many transition points.
    pub max_transitions: usize,

    /// Learnable square projections on query and table sides. Disabled
    /// (identity behavior, no parameters) for the random-table ablation.
    pub learnable_projections: bool,
    /// Include visual tokens. At least one modality must stay on.
    pub use_visual: bool,
    /// Include audio tokens.
    pub use_audio: bool,
    /// Feed the whole video's shots (true) or only the two shots
    /// adjacent to each transition point (false).
    pub use_context: bool,

    pub layer_norm_eps: f32,
}

impl ModelConfig {
    /// Companion to the desk corpus preset: trains in minutes on a core.
    pub fn desk() -> Self {
        ModelConfig {
            n_frames: 8,
            input_pool: 2,
            frame_height: 64,
            frame_width: 64,
            visual_channels: [12, 24, 48],
            audio_sample_rate: 8000,
            mel_bands: 32,
            n_fft: 256,
            hop: 80,
            audio_window_s: 1.0,
            audio_channels: [12, 24],
            d_audio: 100,
            d_model: 128,
            n_heads: 8,
            n_layers: 2,
            d_ff: 256,
            d_matching: 16,
            max_transitions: 5,
            learnable_projections: true,
            use_visual: true,
            use_audio: true,
            use_context: true,
            layer_norm_eps: 1e-5,
        }
    }

    /// Full-scale shape: 224x224, 16-frame clips, 2048-wide transformer.
    pub fn production() -> Self {
        ModelConfig {
            n_frames: 16,
            input_pool: 1,
            frame_height: 224,
            frame_width: 224,
            visual_channels: [64, 256, 2048],
            audio_sample_rate: 16_000,
            mel_bands: 64,
            n_fft: 512,
            hop: 160,
            audio_window_s: 1.0,
            audio_channels: [32, 64],
            d_audio: 100,
            d_model: 2048,
            n_heads: 8,
            n_layers: 2,
            d_ff: 4096,
            d_matching: 2048,
            max_transitions: 8,
            learnable_projections: true,
            use_visual: true,
            use_audio: true,
            use_context: true,
            layer_norm_eps: 1e-5,
        }
    }

    pub fn d_visual(&self) -> usize {
        self.visual_channels[2]
    }

    /// Shots a sequence may contain after truncation.
    pub fn max_shots(&self) -> usize {
        self.max_transitions + 1
    }

    /// Active modalities (1 or 2).
    pub fn n_modalities(&self) -> usize {
        self.use_visual as usize + self.use_audio as usize
    }

    /// Fixed token-buffer length: one token per shot per active modality.
    pub fn max_tokens(&self) -> usize {
        self.n_modalities() * self.max_shots()
    }

    /// Tokens concatenated into one query: both shots adjacent to the
    /// transition point, in every active modality.
    pub fn tokens_per_query(&self) -> usize {
        2 * self.n_modalities()
    }

    pub fn pooled_height(&self) -> usize {
        self.frame_height / self.input_pool
    }

    pub fn pooled_width(&self) -> usize {
        self.frame_width / self.input_pool
    }

    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::BadConfig(m));
        if self.n_frames < 2 {
            return bad(format!("n_frames {} too small", self.n_frames));
        }
        if self.input_pool == 0
            || self.frame_height % self.input_pool != 0
            || self.frame_width % self.input_pool != 0
        {
            return bad(format!(
                "input_pool {} must evenly divide {}x{}",
                self.input_pool, self.frame_height, self.frame_width
            ));
        }
        if self.pooled_height() < 8 || self.pooled_width() < 8 {
            return bad("pooled frames below the backbone's 8x8 minimum".into());
        }
        if self.visual_channels.iter().any(|&c| c == 0) {
            return bad("visual channel widths must be positive".into());
        }
        if self.d_model % self.n_heads != 0 {
            return bad(format!(
                "d_model {} not divisible by {} heads",
                self.d_model, self.n_heads
            ));
        }
        if self.n_layers == 0 {
            return bad("need at least one encoder layer".into());
        }
        if self.d_matching == 0 || self.d_ff == 0 || self.d_audio == 0 {
            return bad("zero-width layer".into());
        }
        if self.max_transitions == 0 {
            return bad("max_transitions must be positive".into());
        }
        if !self.use_visual && !self.use_audio {
            return bad("at least one modality must be enabled".into());
        }
        if self.n_fft == 0 || self.hop == 0 || self.mel_bands == 0 {
            return bad("mel parameters must be positive".into());
        }
        if self.n_fft > (self.audio_sample_rate as f64 * self.audio_window_s) as usize {
            return bad("n_fft longer than the audio window".into());
        }
        if !(self.audio_window_s > 0.0) {
            return bad("audio window must be positive".into());
        }
        Ok(())
    }
}
