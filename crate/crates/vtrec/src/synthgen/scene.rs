//! Procedural shots: textured noise fields with controlled motion and
//! brightness, the visual half of the planted label correspondence.

use crate::fx::{Frame, Shot};
use crate::util::seeded_rng;
use ndarray::Array3;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Motion {
    PanLeft,
    PanRight,
    PanUp,
    PanDown,
    ZoomIn,
    ZoomOut,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Brightness {
    Bright,
    Dark,
    /// Periodic white surges on top of a mid-tone base.
    Flash,
}

/// Everything that determines a shot's pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub motion: Motion,
    pub brightness: Brightness,
    pub texture_seed: u64,
}

/// Pan speed in pixels per frame; integral so shifted frames are exact
/// copies of the base frame's columns/rows. Fast enough that a clip
/// window sweeps a large fraction of the frame, slow enough that
/// adjacent frames stay correlated for small conv kernels.
pub fn pan_velocity(extent: usize, fps: f32) -> usize {
    ((extent as f32 * 0.7 / fps).round() as usize).max(1)
}

fn value_noise(height: usize, width: usize, lo: f32, hi: f32, seed: u64) -> Frame {
    let mut rng = seeded_rng(seed, "texture");
    // Two octaves of bilinearly interpolated random grids.
    let coarse: Vec<f32> = (0..7 * 7 * 3).map(|_| rng.random_range(0.0..1.0)).collect();
    let fine: Vec<f32> = (0..19 * 19 * 3).map(|_| rng.random_range(0.0..1.0)).collect();
    let sample = |grid: &[f32], gsize: usize, u: f32, v: f32, c: usize| -> f32 {
        let gu = u * (gsize - 1) as f32;
        let gv = v * (gsize - 1) as f32;
        let u0 = gu.floor() as usize;
        let v0 = gv.floor() as usize;
        let u1 = (u0 + 1).min(gsize - 1);
        let v1 = (v0 + 1).min(gsize - 1);
        let fu = gu - u0 as f32;
        let fv = gv - v0 as f32;
        let at = |uu: usize, vv: usize| grid[(vv * gsize + uu) * 3 + c];
        let top = at(u0, v0) * (1.0 - fu) + at(u1, v0) * fu;
        let bot = at(u0, v1) * (1.0 - fu) + at(u1, v1) * fu;
        top * (1.0 - fv) + bot * fv
    };
    let mut pixels = Array3::zeros((height, width, 3));
    for y in 0..height {
        for x in 0..width {
            let u = (x as f32 + 0.5) / width as f32;
            let v = (y as f32 + 0.5) / height as f32;
            for c in 0..3 {
                let n = 0.7 * sample(&coarse, 7, u, v, c) + 0.3 * sample(&fine, 19, u, v, c);
                pixels[(y, x, c)] = lo + n * (hi - lo);
            }
        }
    }
    Frame::new(pixels)
}

/// Paints a soft disc into the texture so every scene carries one
/// large-scale feature whose trajectory the backbone can follow. Pure
/// value noise decorrelates after a shift of roughly a texel, which
/// leaves pan direction invisible to small conv kernels; the disc stays
/// coherent at any displacement. Distances are cyclic so the disc wraps
/// with the shifted frames instead of tearing at the border.
fn stamp_landmark(base: &mut Frame, hi: f32, seed: u64) {
    let (h, w) = (base.height(), base.width());
    let mut rng = seeded_rng(seed, "landmark");
    let cx = rng.random_range(0.0..1.0) * w as f32;
    let cy = rng.random_range(0.0..1.0) * h as f32;
    let r = 0.20 * w.min(h) as f32;
    for y in 0..h {
        let mut dy = (y as f32 - cy).abs();
        dy = dy.min(h as f32 - dy);
        for x in 0..w {
            let mut dx = (x as f32 - cx).abs();
            dx = dx.min(w as f32 - dx);
            let g = (-(dx * dx + dy * dy) / (2.0 * r * r)).exp();
            for c in 0..3 {
                let v = base.pixels[(y, x, c)];
                base.pixels[(y, x, c)] = v * (1.0 - g) + hi * g;
            }
        }
    }
}

fn shifted(base: &Frame, dx: isize, dy: isize) -> Frame {
    let (h, w) = (base.height(), base.width());
    let mut p = Array3::zeros((h, w, 3));
    for y in 0..h {
        let sy = (y as isize + dy).rem_euclid(h as isize) as usize;
        for x in 0..w {
            let sx = (x as isize + dx).rem_euclid(w as isize) as usize;
            for c in 0..3 {
                p[(y, x, c)] = base.pixels[(sy, sx, c)];
            }
        }
    }
    Frame::new(p)
}

fn flash_pulse(frame: &Frame, amount: f32) -> Frame {
    let mut p = frame.pixels.clone();
    p.mapv_inplace(|v| v * (1.0 - amount) + amount);
    Frame::new(p)
}

/// Renders a shot realizing `spec`; deterministic in every argument.
pub fn generate_shot(spec: &SceneSpec, duration_s: f64, fps: f32, height: usize, width: usize) -> Shot {
    let n = ((duration_s * fps as f64).round() as usize).max(2);
    let (lo, hi) = match spec.brightness {
        Brightness::Bright => (0.45, 0.95),
        Brightness::Dark => (0.03, 0.38),
        Brightness::Flash => (0.30, 0.70),
    };
    let mut base = value_noise(height, width, lo, hi, spec.texture_seed);
    stamp_landmark(&mut base, hi, spec.texture_seed);

    let mut frames: Vec<Frame> = match spec.motion {
        Motion::Static => vec![base.clone(); n],
        Motion::PanLeft | Motion::PanRight => {
            let v = pan_velocity(width, fps) as isize;
            let sign = if spec.motion == Motion::PanLeft { 1 } else { -1 };
            (0..n)
                .map(|i| shifted(&base, sign * v * i as isize, 0))
                .collect()
        }
        Motion::PanUp | Motion::PanDown => {
            let v = pan_velocity(height, fps) as isize;
            let sign = if spec.motion == Motion::PanUp { 1 } else { -1 };
            (0..n)
                .map(|i| shifted(&base, 0, sign * v * i as isize))
                .collect()
        }
        Motion::ZoomIn | Motion::ZoomOut => {
            let rate = 0.08f32;
            (0..n)
                .map(|i| {
                    let s = (1.0 + rate).powi(i as i32);
                    let scale = if spec.motion == Motion::ZoomIn { s } else { 1.0 / s };
                    crate::fx::kernel_zoom(&base, scale)
                })
                .collect()
        }
    };

    if spec.brightness == Brightness::Flash {
        let period = ((fps * 0.7).round() as usize).max(3);
        for (i, f) in frames.iter_mut().enumerate() {
            if i % period < 2 {
                *f = flash_pulse(f, 0.55);
            }
        }
    }

    Shot::new(frames, fps).expect("generated shots are well-formed")
}
