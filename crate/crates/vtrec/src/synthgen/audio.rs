//! Procedural companion audio with a mood the label policy can key on.

use crate::util::seeded_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f32::consts::PI;

/// Peak amplitude cap for soft-mood tracks.
pub const SOFT_PEAK_CAP: f32 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mood {
    Soft,
    Energetic,
}

#[derive(Debug, Clone)]
pub struct AudioTrack {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub mood: Mood,
    pub tempo_bpm: f32,
}

impl AudioTrack {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Generates a deterministic track: sustained low-amplitude tones when
/// soft, beat impulses at `tempo_bpm` when energetic.
pub fn generate_audio(
    mood: Mood,
    tempo_bpm: f32,
    duration_s: f64,
    sample_rate: u32,
    seed: u64,
) -> AudioTrack {
    let n = (duration_s * sample_rate as f64).round() as usize;
    let sr = sample_rate as f32;
    let mut rng = seeded_rng(seed, "audio");
    let mut samples = vec![0.0f32; n];

    match mood {
        Mood::Soft => {
            // Three sustained tones under a slow amplitude swell.
            let freqs = [
                rng.random_range(150.0..240.0f32),
                rng.random_range(240.0..340.0f32),
                rng.random_range(340.0..460.0f32),
            ];
            let amps = [0.5f32, 0.3, 0.2];
            let phases = [
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.0..2.0 * PI),
            ];
            for (i, s) in samples.iter_mut().enumerate() {
                let t = i as f32 / sr;
                let lfo = 0.75 + 0.25 * (2.0 * PI * 0.2 * t).sin();
                let mut v = 0.0;
                for k in 0..3 {
                    v += amps[k] * (2.0 * PI * freqs[k] * t + phases[k]).sin();
                }
                *s = v * lfo;
            }
            let peak = samples.iter().fold(0.0f32, |m, v| m.max(v.abs()));
            if peak > 0.0 {
                let scale = (SOFT_PEAK_CAP - 0.02) / peak;
                for s in &mut samples {
                    *s *= scale;
                }
            }
        }
        Mood::Energetic => {
            // Low hum plus a kick (decaying downward sine sweep and a
            // short noise burst) on every beat.
            for (i, s) in samples.iter_mut().enumerate() {
                let t = i as f32 / sr;
                *s = 0.06 * (2.0 * PI * 55.0 * t).sin();
            }
            let period_s = 60.0 / tempo_bpm as f64;
            let n_beats = (duration_s / period_s).ceil() as usize;
            for k in 0..n_beats {
                let onset_s = k as f64 * period_s;
                if onset_s >= duration_s {
                    break;
                }
                let onset = (onset_s * sample_rate as f64).round() as usize;
                let kick_len = (0.09 * sr) as usize;
                for j in 0..kick_len {
                    let idx = onset + j;
                    if idx >= n {
                        break;
                    }
                    let tj = j as f32 / sr;
                    let freq = 150.0 - 1000.0 * tj; // sweeps down
                    let env = (-tj * 40.0).exp();
                    samples[idx] += 0.8 * env * (2.0 * PI * freq.max(45.0) * tj).sin();
                }
                let burst_len = (0.02 * sr) as usize;
                for j in 0..burst_len {
                    let idx = onset + j;
                    if idx >= n {
                        break;
                    }
                    let env = 1.0 - j as f32 / burst_len as f32;
                    samples[idx] += 0.3 * env * rng.random_range(-1.0..1.0f32);
                }
            }
            for s in &mut samples {
                *s = s.clamp(-1.0, 1.0);
            }
        }
    }

    AudioTrack {
        samples,
        sample_rate,
        mood,
        tempo_bpm,
    }
}

/// Counts beat onsets the way the energetic generator places them.
pub fn expected_onsets(tempo_bpm: f32, duration_s: f64) -> usize {
    let period_s = 60.0 / tempo_bpm as f64;
    (duration_s / period_s).ceil() as usize
}
