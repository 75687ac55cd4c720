//! Per-frame blend kernels, one per effect family.
//!
//! Every kernel is a pure function of `(frame_a, frame_b, params, t)`,
//! maps `[0,1]` inputs to `[0,1]` outputs, and passes through `frame_a`
//! at `t = 0` and `frame_b` at `t = 1` exactly (the endpoints are
//! special-cased so the guarantee is bit-exact for every family).
//!
//! Mask-style kernels (wipes, sweep, shapes, dissolve) are written as a
//! per-pixel scalar field compared against `t`; geometric kernels
//! (zoom, rotate) resample with edge-clamped bilinear lookups and
//! crossfade. Directional fields are expressed so that the left/right
//! and up/down pairs are structural mirrors of each other: flipping the
//! inputs and the output of one yields the other bit-for-bit.

use super::registry::{EffectParams, MaskKind, TransitionCategory, WipeKind};
use super::types::{Frame, FxError};
use ndarray::Array3;
use std::f32::consts::PI;

/// Blend two same-sized frames at progress `t` under `category`'s effect.
pub fn blend_frame(
    a: &Frame,
    b: &Frame,
    category: &TransitionCategory,
    t: f32,
) -> Result<Frame, FxError> {
    if !a.same_dims(b) {
        return Err(FxError::DimensionMismatch(
            a.height(),
            a.width(),
            b.height(),
            b.width(),
        ));
    }
    if !(0.0..=1.0).contains(&t) || t.is_nan() {
        return Err(FxError::ProgressOutOfRange(t));
    }
    if t == 0.0 {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    let out = match category.params {
        EffectParams::Wipe { kind } => select(a, b, |y, x| wipe_field(kind, y, x, a) <= t),
        EffectParams::Zoom { inward } => zoom_blend(a, b, t, inward),
        EffectParams::Fade { target } => fade_through(a, b, t, target),
        EffectParams::Mix { dithered: false } => lerp_frames(a, b, t),
        EffectParams::Mix { dithered: true } => select(a, b, |y, x| hash01(x, y) < t),
        EffectParams::Blur { mosaic } => blur_blend(a, b, t, mosaic),
        EffectParams::Flash { pulses } => flash_blend(a, b, t, pulses),
        EffectParams::Rotate { clockwise } => rotate_blend(a, b, t, clockwise),
        EffectParams::ClockSweep => select(a, b, |y, x| sweep_field(y, x, a) <= t),
        EffectParams::Shape { mask, inward } => shape_blend(a, b, t, mask, inward),
        EffectParams::Cut => {
            if t < 0.5 {
                a.clone()
            } else {
                b.clone()
            }
        }
    };
    Ok(out)
}

// ─── Scalar helpers ──────────────────────────────────────────────────────

fn smoothstep(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

/// Deterministic per-pixel noise in `[0, 1)`; the dissolve dither pattern.
fn hash01(x: usize, y: usize) -> f32 {
    let mut h = (x as u32).wrapping_mul(0x9E37_79B1) ^ (y as u32).wrapping_mul(0x85EB_CA77);
    h ^= h >> 16;
    h = h.wrapping_mul(0x7FEB_352D);
    h ^= h >> 15;
    h = h.wrapping_mul(0x846C_A68B);
    h ^= h >> 16;
    (h >> 8) as f32 / (1u32 << 24) as f32
}

// ─── Whole-frame helpers ─────────────────────────────────────────────────

fn lerp_frames(a: &Frame, b: &Frame, alpha: f32) -> Frame {
    let mut p = a.pixels.clone();
    p.zip_mut_with(&b.pixels, |pa, pb| *pa = *pa * (1.0 - alpha) + *pb * alpha);
    Frame::new(p)
}

/// Per-pixel choice: `from_b(y, x)` picks the incoming frame.
fn select(a: &Frame, b: &Frame, from_b: impl Fn(usize, usize) -> bool) -> Frame {
    let (h, w) = (a.height(), a.width());
    let mut p = a.pixels.clone();
    for y in 0..h {
        for x in 0..w {
            if from_b(y, x) {
                for c in 0..3 {
                    p[(y, x, c)] = b.pixels[(y, x, c)];
                }
            }
        }
    }
    Frame::new(p)
}

/// Edge-clamped bilinear sample.
fn bilinear(frame: &Frame, x: f32, y: f32) -> [f32; 3] {
    let (h, w) = (frame.height(), frame.width());
    let xc = x.clamp(0.0, (w - 1) as f32);
    let yc = y.clamp(0.0, (h - 1) as f32);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = xc - x0 as f32;
    let fy = yc - y0 as f32;
    let mut out = [0.0f32; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let p00 = frame.pixels[(y0, x0, c)];
        let p01 = frame.pixels[(y0, x1, c)];
        let p10 = frame.pixels[(y1, x0, c)];
        let p11 = frame.pixels[(y1, x1, c)];
        let top = p00 * (1.0 - fx) + p01 * fx;
        let bot = p10 * (1.0 - fx) + p11 * fx;
        *o = top * (1.0 - fy) + bot * fy;
    }
    out
}

fn resample(frame: &Frame, src: impl Fn(f32, f32) -> (f32, f32)) -> Frame {
    let (h, w) = (frame.height(), frame.width());
    let mut p = Array3::zeros((h, w, 3));
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = src(x as f32 + 0.5, y as f32 + 0.5);
            let px = bilinear(frame, sx - 0.5, sy - 0.5);
            for c in 0..3 {
                p[(y, x, c)] = px[c];
            }
        }
    }
    Frame::new(p)
}

pub(crate) fn zoomed(frame: &Frame, scale: f32) -> Frame {
    let cx = frame.width() as f32 / 2.0;
    let cy = frame.height() as f32 / 2.0;
    resample(frame, |x, y| (cx + (x - cx) / scale, cy + (y - cy) / scale))
}

fn rotated(frame: &Frame, theta: f32) -> Frame {
    let cx = frame.width() as f32 / 2.0;
    let cy = frame.height() as f32 / 2.0;
    let (sin, cos) = theta.sin_cos();
    resample(frame, |x, y| {
        let dx = x - cx;
        let dy = y - cy;
        (cx + cos * dx - sin * dy, cy + sin * dx + cos * dy)
    })
}

fn box_blur(frame: &Frame, radius: usize) -> Frame {
    if radius == 0 {
        return frame.clone();
    }
    let (h, w) = (frame.height(), frame.width());
    let r = radius as isize;
    // Horizontal pass then vertical pass; edges clamp.
    let mut mid = Array3::<f32>::zeros((h, w, 3));
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for dx in -r..=r {
                    let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    acc += frame.pixels[(y, sx, c)];
                }
                mid[(y, x, c)] = acc / (2 * r + 1) as f32;
            }
        }
    }
    let mut out = Array3::<f32>::zeros((h, w, 3));
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for dy in -r..=r {
                    let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    acc += mid[(sy, x, c)];
                }
                out[(y, x, c)] = acc / (2 * r + 1) as f32;
            }
        }
    }
    Frame::new(out)
}

fn pixelate(frame: &Frame, block: usize) -> Frame {
    if block <= 1 {
        return frame.clone();
    }
    let (h, w) = (frame.height(), frame.width());
    let mut out = Array3::<f32>::zeros((h, w, 3));
    let mut by = 0;
    while by < h {
        let bh = block.min(h - by);
        let mut bx = 0;
        while bx < w {
            let bw = block.min(w - bx);
            let mut mean = [0.0f32; 3];
            for y in by..by + bh {
                for x in bx..bx + bw {
                    for (c, m) in mean.iter_mut().enumerate() {
                        *m += frame.pixels[(y, x, c)];
                    }
                }
            }
            let n = (bh * bw) as f32;
            for m in &mut mean {
                *m /= n;
            }
            for y in by..by + bh {
                for x in bx..bx + bw {
                    for c in 0..3 {
                        out[(y, x, c)] = mean[c];
                    }
                }
            }
            bx += block;
        }
        by += block;
    }
    Frame::new(out)
}

// ─── Wipe / sweep fields ─────────────────────────────────────────────────

// Each field maps a pixel to a threshold in (0, 1); the pixel shows the
// incoming frame once `t` reaches it. Opposite directions are written
// with mirrored index expressions rather than `1 - field` so the mirror
// symmetry holds bit-exactly at any frame size.
fn wipe_field(kind: WipeKind, y: usize, x: usize, frame: &Frame) -> f32 {
    let w = frame.width() as f32;
    let h = frame.height() as f32;
    let from_left = (x as f32 + 0.5) / w;
    let from_right = (w - x as f32 - 0.5) / w;
    let from_top = (y as f32 + 0.5) / h;
    let from_bottom = (h - y as f32 - 0.5) / h;
    match kind {
        WipeKind::Left => from_left,
        WipeKind::Right => from_right,
        WipeKind::Up => from_top,
        WipeKind::Down => from_bottom,
        WipeKind::UpLeft => (from_left + from_top) / 2.0,
        WipeKind::UpRight => (from_right + from_top) / 2.0,
        WipeKind::DownLeft => (from_left + from_bottom) / 2.0,
        WipeKind::DownRight => (from_right + from_bottom) / 2.0,
        WipeKind::SplitHorizontal => (from_left - 0.5).abs() * 2.0,
        WipeKind::SplitVertical => (from_top - 0.5).abs() * 2.0,
    }
}

/// Angular position in turns, 0 at twelve o'clock, increasing clockwise.
fn sweep_field(y: usize, x: usize, frame: &Frame) -> f32 {
    let cx = frame.width() as f32 / 2.0;
    let cy = frame.height() as f32 / 2.0;
    let dx = x as f32 + 0.5 - cx;
    let dy = y as f32 + 0.5 - cy;
    let angle = dx.atan2(-dy); // (-pi, pi], 0 pointing up, cw positive
    let turns = angle / (2.0 * PI);
    if turns < 0.0 {
        turns + 1.0
    } else {
        turns
    }
}

// ─── Family kernels ──────────────────────────────────────────────────────

fn zoom_blend(a: &Frame, b: &Frame, t: f32, inward: bool) -> Frame {
    let scale = |u: f32| {
        if inward {
            1.0 + 1.5 * u
        } else {
            1.0 / (1.0 + 1.5 * u)
        }
    };
    let za = zoomed(a, scale(t));
    let zb = zoomed(b, scale(1.0 - t));
    lerp_frames(&za, &zb, smoothstep(t))
}

fn fade_through(a: &Frame, b: &Frame, t: f32, target: f32) -> Frame {
    let toward = |frame: &Frame, alpha: f32| {
        let mut p = frame.pixels.clone();
        p.mapv_inplace(|v| v * (1.0 - alpha) + target * alpha);
        Frame::new(p)
    };
    if t < 0.5 {
        toward(a, 2.0 * t)
    } else {
        toward(b, 2.0 * (1.0 - t))
    }
}

fn blur_blend(a: &Frame, b: &Frame, t: f32, mosaic: bool) -> Frame {
    let ramp = (PI * t).sin();
    let (fa, fb) = if mosaic {
        let block = 1 + (0.18 * a.height().min(a.width()) as f32 * ramp).round() as usize;
        (pixelate(a, block), pixelate(b, block))
    } else {
        let radius = (3.0 * ramp).round() as usize;
        (box_blur(a, radius), box_blur(b, radius))
    };
    lerp_frames(&fa, &fb, smoothstep(t))
}

fn flash_blend(a: &Frame, b: &Frame, t: f32, pulses: u32) -> Frame {
    let base = lerp_frames(a, b, smoothstep(t));
    let boost = 0.85 * (pulses as f32 * PI * t).sin().powi(2);
    let mut p = base.pixels;
    // Push toward white; stays in range without clamping.
    p.mapv_inplace(|v| v * (1.0 - boost) + boost);
    Frame::new(p)
}

fn rotate_blend(a: &Frame, b: &Frame, t: f32, clockwise: bool) -> Frame {
    let dir = if clockwise { 1.0 } else { -1.0 };
    let quarter = PI / 2.0;
    let ra = rotated(a, dir * quarter * t);
    let rb = rotated(b, -dir * quarter * (1.0 - t));
    lerp_frames(&ra, &rb, smoothstep(t))
}

fn shape_blend(a: &Frame, b: &Frame, t: f32, mask: MaskKind, inward: bool) -> Frame {
    let cx = a.width() as f32 / 2.0;
    let cy = a.height() as f32 / 2.0;
    let corner = cx.hypot(cy);
    match mask {
        MaskKind::Circle => {
            let field = |y: usize, x: usize| {
                let d = (x as f32 + 0.5 - cx).hypot(y as f32 + 0.5 - cy) / corner;
                if inward {
                    d
                } else {
                    1.0 - d
                }
            };
            select(a, b, |y, x| field(y, x) <= t)
        }
        MaskKind::Diamond => {
            let field = |y: usize, x: usize| {
                let d = ((x as f32 + 0.5 - cx).abs() / cx + (y as f32 + 0.5 - cy).abs() / cy) / 2.0;
                if inward {
                    d
                } else {
                    1.0 - d
                }
            };
            select(a, b, |y, x| field(y, x) <= t)
        }
        MaskKind::Star => {
            // Five-pointed radial profile; the threshold ratio t/(1-t)
            // sweeps (0, inf) so the spiky mask still covers the whole
            // frame as t approaches 1.
            let limit = 1.5 * t / (1.0 - t);
            select(a, b, |y, x| {
                let dx = x as f32 + 0.5 - cx;
                let dy = y as f32 + 0.5 - cy;
                let r = dx.hypot(dy) / corner;
                let phi = dy.atan2(dx);
                let profile = 0.55 + 0.45 * (5.0 * (phi + PI / 2.0)).cos();
                r <= limit * profile
            })
        }
        MaskKind::Heart => {
            // Classic implicit heart, grown quadratically so the farthest
            // corner is inside by t = 1 at any aspect ratio.
            let r0 = 0.3 * a.height().min(a.width()) as f32;
            let s_end = corner / (0.55 * r0) * 1.05;
            let s = 0.08 + s_end * t * t;
            select(a, b, |y, x| {
                let px = (x as f32 + 0.5 - cx) / (s * r0);
                let py = -(y as f32 + 0.5 - cy) / (s * r0);
                let q = px * px + py * py - 1.0;
                q * q * q - px * px * py * py * py <= 0.0
            })
        }
        MaskKind::Checker => {
            let cell = (a.height().min(a.width()) / 8).max(2);
            select(a, b, |y, x| {
                let parity = ((x / cell + y / cell) % 2) as f32;
                let local = ((x % cell) as f32 + 0.5) / cell as f32;
                (parity + local) / 2.0 <= t
            })
        }
    }
}
