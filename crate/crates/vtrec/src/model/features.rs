//! Raw footage -> model inputs: pooled frame stacks for the visual
//! backbone and log-mel images for the audio path.

use super::config::ModelConfig;
use crate::fx::Frame;
use ndarray::{Array2, Array3, ArrayD, IxDyn};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// `n` indices spread uniformly over `0..len`, endpoints included.
pub fn sample_indices(len: usize, n: usize) -> Vec<usize> {
    assert!(len > 0 && n > 0);
    if n == 1 {
        return vec![0];
    }
    (0..n)
        .map(|i| ((i as f64) * (len - 1) as f64 / (n - 1) as f64).round() as usize)
        .collect()
}

/// Block-mean spatial pooling; `pool` must divide both frame dims.
pub fn pooled_frame(frame: &Frame, pool: usize) -> Array3<f32> {
    let (h, w) = (frame.height(), frame.width());
    assert!(pool > 0 && h % pool == 0 && w % pool == 0, "pool must divide dims");
    let (ph, pw) = (h / pool, w / pool);
    let mut out = Array3::<f32>::zeros((ph, pw, 3));
    let norm = (pool * pool) as f32;
    for y in 0..ph {
        for x in 0..pw {
            for c in 0..3 {
                let mut acc = 0.0;
                for dy in 0..pool {
                    for dx in 0..pool {
                        acc += frame.pixels[[y * pool + dy, x * pool + dx, c]];
                    }
                }
                out[[y, x, c]] = acc / norm;
            }
        }
    }
    out
}

/// Clip frames -> backbone input (3, n_frames, H/p, W/p): sample
/// `n_frames` uniformly, pool, move channels first.
pub fn clip_tensor(frames: &[&Frame], cfg: &ModelConfig) -> ArrayD<f32> {
    assert!(!frames.is_empty(), "empty clip");
    let idx = sample_indices(frames.len(), cfg.n_frames);
    let (ph, pw) = (cfg.pooled_height(), cfg.pooled_width());
    let mut out = ArrayD::<f32>::zeros(IxDyn(&[3, cfg.n_frames, ph, pw]));
    for (fi, &src) in idx.iter().enumerate() {
        let pooled = pooled_frame(frames[src], cfg.input_pool);
        for y in 0..ph {
            for x in 0..pw {
                for c in 0..3 {
                    out[[c, fi, y, x]] = pooled[[y, x, c]];
                }
            }
        }
    }
    out
}

/// Hann-windowed STFT power -> triangular mel filterbank -> log.
/// Output shape is fixed by the config: (mel_bands, n_mel_frames).
pub struct MelExtractor {
    fft: Arc<dyn Fft<f32>>,
    filterbank: Array2<f32>,
    window: Vec<f32>,
    n_fft: usize,
    hop: usize,
    window_samples: usize,
    bands: usize,
}

fn hz_to_mel(f: f32) -> f32 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f32) -> f32 {
    700.0 * (10f32.powf(m / 2595.0) - 1.0)
}

impl MelExtractor {
    pub fn new(cfg: &ModelConfig) -> Self {
        let n_fft = cfg.n_fft;
        let bands = cfg.mel_bands;
        let sr = cfg.audio_sample_rate as f32;
        let bins = n_fft / 2 + 1;

        let mut filterbank = Array2::<f32>::zeros((bands, bins));
        let mel_hi = hz_to_mel(sr / 2.0);
        // bands + 2 anchor points; filter b spans anchors b..b+2.
        let anchors: Vec<f32> = (0..bands + 2)
            .map(|i| mel_to_hz(mel_hi * i as f32 / (bands + 1) as f32))
            .collect();
        let hz_per_bin = sr / n_fft as f32;
        for b in 0..bands {
            let (lo, mid, hi) = (anchors[b], anchors[b + 1], anchors[b + 2]);
            for bin in 0..bins {
                let f = bin as f32 * hz_per_bin;
                let w = if f <= mid {
                    (f - lo) / (mid - lo).max(1e-6)
                } else {
                    (hi - f) / (hi - mid).max(1e-6)
                };
                filterbank[[b, bin]] = w.clamp(0.0, 1.0);
            }
        }

        let window: Vec<f32> = (0..n_fft)
            .map(|i| {
                let t = i as f32 / (n_fft - 1) as f32;
                0.5 - 0.5 * (2.0 * std::f32::consts::PI * t).cos()
            })
            .collect();

        MelExtractor {
            fft: FftPlanner::new().plan_fft_forward(n_fft),
            filterbank,
            window,
            n_fft,
            hop: cfg.hop,
            window_samples: (cfg.audio_sample_rate as f64 * cfg.audio_window_s).round() as usize,
            bands,
        }
    }

    pub fn n_mel_frames(&self) -> usize {
        (self.window_samples - self.n_fft) / self.hop + 1
    }

    /// Samples shorter than the window are zero-padded at the end;
    /// longer ones are truncated, so the output shape never varies.
    pub fn mel(&self, samples: &[f32]) -> Array2<f32> {
        let mut padded = vec![0.0f32; self.window_samples];
        let n = samples.len().min(self.window_samples);
        padded[..n].copy_from_slice(&samples[..n]);

        let frames = self.n_mel_frames();
        let bins = self.n_fft / 2 + 1;
        let mut out = Array2::<f32>::zeros((self.bands, frames));
        let mut buf = vec![Complex::new(0.0f32, 0.0f32); self.n_fft];
        let mut power = vec![0.0f32; bins];
        for t in 0..frames {
            let start = t * self.hop;
            for i in 0..self.n_fft {
                buf[i] = Complex::new(padded[start + i] * self.window[i], 0.0);
            }
            self.fft.process(&mut buf);
            for (bin, p) in power.iter_mut().enumerate() {
                *p = buf[bin].norm_sqr();
            }
            for b in 0..self.bands {
                let mut acc = 0.0f32;
                for bin in 0..bins {
                    acc += self.filterbank[[b, bin]] * power[bin];
                }
                out[[b, t]] = (acc + 1e-6).ln();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn uniform_sampling_hits_endpoints() {
        assert_eq!(sample_indices(10, 4), vec![0, 3, 6, 9]);
        assert_eq!(sample_indices(8, 8), (0..8).collect::<Vec<_>>());
        // i * 2/7 rounds: 0, .29, .57, .86, 1.14, 1.43, 1.71, 2
        assert_eq!(sample_indices(3, 8), vec![0, 0, 1, 1, 1, 1, 2, 2]);
        assert_eq!(sample_indices(5, 1), vec![0]);
    }

    #[test]
    fn pooling_is_block_mean() {
        let mut px = Array3::<f32>::zeros((4, 4, 3));
        px[[0, 0, 0]] = 1.0;
        px[[1, 1, 0]] = 1.0; // both in the top-left 2x2 block
        let f = Frame::new(px);
        let p = pooled_frame(&f, 2);
        assert_eq!(p.dim(), (2, 2, 3));
        assert!((p[[0, 0, 0]] - 0.5).abs() < 1e-6);
        assert_eq!(p[[0, 1, 0]], 0.0);
    }

    #[test]
    fn clip_tensor_shape_and_content() {
        let cfg = ModelConfig {
            frame_height: 8,
            frame_width: 8,
            input_pool: 1,
            n_frames: 4,
            ..ModelConfig::desk()
        };
        let frames: Vec<Frame> = (0..10)
            .map(|i| Frame::filled(8, 8, i as f32 / 10.0))
            .collect();
        let refs: Vec<&Frame> = frames.iter().collect();
        let t = clip_tensor(&refs, &cfg);
        assert_eq!(t.shape(), &[3, 4, 8, 8]);
        // Sampled frames are 0, 3, 6, 9.
        assert!((t[[0, 0, 0, 0]] - 0.0).abs() < 1e-6);
        assert!((t[[1, 1, 3, 3]] - 0.3).abs() < 1e-6);
        assert!((t[[2, 3, 7, 7]] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn mel_frame_count_matches_formula() {
        let cfg = ModelConfig::desk();
        let ex = MelExtractor::new(&cfg);
        // (8000 - 256) / 80 + 1
        assert_eq!(ex.n_mel_frames(), 97);
        let mel = ex.mel(&vec![0.0; 8000]);
        assert_eq!(mel.dim(), (32, 97));
    }

    #[test]
    fn pure_tone_lands_in_the_right_band() {
        let cfg = ModelConfig::desk();
        let ex = MelExtractor::new(&cfg);
        let sr = cfg.audio_sample_rate as f32;
        for freq in [500.0f32, 1000.0, 2500.0] {
            let samples: Vec<f32> = (0..8000)
                .map(|i| (2.0 * std::f32::consts::PI * freq * i as f32 / sr).sin() * 0.5)
                .collect();
            let mel = ex.mel(&samples);
            // Band with the most total energy.
            let mut best = 0;
            let mut best_e = f32::NEG_INFINITY;
            for b in 0..32 {
                let e: f32 = mel.row(b).sum();
                if e > best_e {
                    best_e = e;
                    best = b;
                }
            }
            // Expected: the band whose filter peaks nearest this frequency.
            let bin = (freq / (sr / cfg.n_fft as f32)).round() as usize;
            let mut expect = 0;
            let mut expect_w = f32::NEG_INFINITY;
            for b in 0..32 {
                let w = ex.filterbank[[b, bin]];
                if w > expect_w {
                    expect_w = w;
                    expect = b;
                }
            }
            assert!(
                (best as i64 - expect as i64).abs() <= 1,
                "{freq} Hz: band {best}, expected near {expect}"
            );
        }
    }

    #[test]
    fn silence_is_the_log_floor() {
        let cfg = ModelConfig::desk();
        let ex = MelExtractor::new(&cfg);
        let mel = ex.mel(&[]);
        let floor = (1e-6f32).ln();
        for v in mel.iter() {
            assert!((v - floor).abs() < 1e-4);
        }
    }

    #[test]
    fn short_input_equals_explicit_padding() {
        let cfg = ModelConfig::desk();
        let ex = MelExtractor::new(&cfg);
        let short: Vec<f32> = (0..3000).map(|i| ((i % 17) as f32 / 17.0) - 0.5).collect();
        let mut long = short.clone();
        long.resize(8000, 0.0);
        assert_eq!(ex.mel(&short), ex.mel(&long));
    }
}
