//! Rendering transitions over shot boundaries and composing full videos.
//!
//! Overlap convention: a transition of duration `d` consumes `d/2` from
//! the tail of the outgoing shot and `d/2` from the head of the incoming
//! shot, so the surviving segments stay temporally continuous with the
//! rendered clip on both sides. "Direct cut" consumes nothing and gets a
//! zero-length annotation; its rendered clip is a window of abutting
//! boundary frames so downstream classifiers still see pixels.

use super::kernel::blend_frame;
use super::registry::{EffectParams, TransitionCategory};
use super::types::{Frame, FxError, Shot, TransitionClip};
use crate::synthgen::AudioTrack;

/// Frames taken from each side of the boundary for a "direct cut" clip.
pub const DEFAULT_CUT_WINDOW: usize = 4;

/// A surviving (uncontaminated) piece of an input shot on the timeline.
#[derive(Debug, Clone)]
pub struct ShotSegment {
    pub frames: Vec<Frame>,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone)]
pub enum Segment {
    Shot(ShotSegment),
    Transition(TransitionClip),
}

/// One transition annotation: which category joins the shots and when.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub label: usize,
    pub start_s: f64,
    pub end_s: f64,
}

/// A composed video: alternating shot segments and transition clips.
#[derive(Debug, Clone)]
pub struct EditedVideo {
    pub segments: Vec<Segment>,
    pub audio: AudioTrack,
    pub annotations: Vec<Annotation>,
    pub fps: f32,
}

impl EditedVideo {
    /// Every frame on the timeline, in order.
    pub fn all_frames(&self) -> Vec<&Frame> {
        let mut out = Vec::new();
        for seg in &self.segments {
            match seg {
                Segment::Shot(s) => out.extend(s.frames.iter()),
                Segment::Transition(t) => out.extend(t.frames.iter()),
            }
        }
        out
    }

    pub fn duration_s(&self) -> f64 {
        self.all_frames().len() as f64 / self.fps as f64
    }

    /// Frame index ranges `(start, end)` of each shot segment, in order.
    pub fn segment_frame_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut cursor = 0usize;
        for seg in &self.segments {
            match seg {
                Segment::Shot(s) => {
                    out.push((cursor, cursor + s.frames.len()));
                    cursor += s.frames.len();
                }
                Segment::Transition(t) => cursor += t.frames.len(),
            }
        }
        out
    }
}

/// A shot segment together with the transitions touching it.
#[derive(Debug)]
pub struct SegmentContext<'a> {
    pub segment: &'a ShotSegment,
    pub before: Option<&'a Annotation>,
    pub after: Option<&'a Annotation>,
}

fn overlap_half_frames(duration_s: f64, fps: f32) -> usize {
    ((duration_s * fps as f64 / 2.0).round() as usize).max(1)
}

/// Renders the transition joining `shot_a` to `shot_b`, stamped relative
/// to its own first frame. See [`compose_edited_video`] for timeline
/// stamping.
pub fn render_transition(
    shot_a: &Shot,
    shot_b: &Shot,
    category: &TransitionCategory,
    duration_s: f64,
) -> Result<TransitionClip, FxError> {
    render_transition_with_window(shot_a, shot_b, category, duration_s, DEFAULT_CUT_WINDOW)
}

/// As [`render_transition`] with an explicit direct-cut window size.
pub fn render_transition_with_window(
    shot_a: &Shot,
    shot_b: &Shot,
    category: &TransitionCategory,
    duration_s: f64,
    cut_window: usize,
) -> Result<TransitionClip, FxError> {
    if shot_a.fps != shot_b.fps {
        return Err(FxError::FpsMismatch(shot_a.fps, shot_b.fps));
    }
    if !shot_a.frames[0].same_dims(&shot_b.frames[0]) {
        return Err(FxError::DimensionMismatch(
            shot_a.height(),
            shot_a.width(),
            shot_b.height(),
            shot_b.width(),
        ));
    }

    if category.params == EffectParams::Cut {
        let w = cut_window.max(1);
        let tail = shot_a.frames.len().saturating_sub(w);
        let mut frames: Vec<Frame> = shot_a.frames[tail..].to_vec();
        frames.extend(shot_b.frames[..w.min(shot_b.frames.len())].iter().cloned());
        return Ok(TransitionClip {
            frames,
            label: category.id,
            start_s: 0.0,
            end_s: 0.0,
        });
    }

    if !(duration_s > 0.0) {
        return Err(FxError::BadDuration(duration_s));
    }
    let shortest = shot_a.duration_s().min(shot_b.duration_s());
    if duration_s > shortest {
        return Err(FxError::DurationTooLong {
            duration_s,
            shot_s: shortest,
        });
    }

    let half = overlap_half_frames(duration_s, shot_a.fps);
    let total = 2 * half;
    let len_a = shot_a.frames.len();
    let mut frames = Vec::with_capacity(total);
    for i in 0..total {
        // Past its own end each shot holds its boundary frame, so the
        // first rendered frame is pure outgoing content and the last is
        // pure incoming content.
        let ia = (len_a - half + i).min(len_a - 1);
        let ib = i.saturating_sub(half).min(shot_b.frames.len() - 1);
        let t = i as f32 / (total - 1) as f32;
        frames.push(blend_frame(
            &shot_a.frames[ia],
            &shot_b.frames[ib],
            category,
            t,
        )?);
    }
    Ok(TransitionClip {
        frames,
        label: category.id,
        start_s: 0.0,
        end_s: total as f64 / shot_a.fps as f64,
    })
}

/// Joins `shots` with `labels[k]` between shots `k` and `k+1`.
pub fn compose_edited_video(
    shots: &[Shot],
    labels: &[TransitionCategory],
    audio: AudioTrack,
    transition_duration_s: f64,
) -> Result<EditedVideo, FxError> {
    compose_with_window(
        shots,
        labels,
        audio,
        transition_duration_s,
        DEFAULT_CUT_WINDOW,
    )
}

/// As [`compose_edited_video`] with an explicit direct-cut window size.
pub fn compose_with_window(
    shots: &[Shot],
    labels: &[TransitionCategory],
    audio: AudioTrack,
    transition_duration_s: f64,
    cut_window: usize,
) -> Result<EditedVideo, FxError> {
    if shots.len() < 2 {
        return Err(FxError::TooFewShots(shots.len()));
    }
    if labels.len() != shots.len() - 1 {
        return Err(FxError::LabelCount {
            shots: shots.len(),
            labels: labels.len(),
        });
    }
    let fps = shots[0].fps;
    for s in shots {
        if s.fps != fps {
            return Err(FxError::FpsMismatch(fps, s.fps));
        }
        if !s.frames[0].same_dims(&shots[0].frames[0]) {
            return Err(FxError::DimensionMismatch(
                shots[0].height(),
                shots[0].width(),
                s.height(),
                s.width(),
            ));
        }
    }

    // Frames each transition consumes from its two neighbors.
    let half_of = |label: &TransitionCategory| -> usize {
        if label.params == EffectParams::Cut {
            0
        } else {
            overlap_half_frames(transition_duration_s, fps)
        }
    };

    let mut segments = Vec::with_capacity(2 * shots.len() - 1);
    let mut annotations = Vec::with_capacity(labels.len());
    let mut cursor = 0usize; // timeline position in frames

    for (k, shot) in shots.iter().enumerate() {
        let head = if k == 0 { 0 } else { half_of(&labels[k - 1]) };
        let tail = if k == shots.len() - 1 {
            0
        } else {
            half_of(&labels[k])
        };
        let len = shot.frames.len();
        if head + tail >= len {
            return Err(FxError::ShotTooShort {
                index: k,
                frames: len,
                consumed: head + tail,
            });
        }
        let seg_frames: Vec<Frame> = shot.frames[head..len - tail].to_vec();
        let n = seg_frames.len();
        segments.push(Segment::Shot(ShotSegment {
            frames: seg_frames,
            start_s: cursor as f64 / fps as f64,
            end_s: (cursor + n) as f64 / fps as f64,
        }));
        cursor += n;

        if k < shots.len() - 1 {
            let label = &labels[k];
            let mut clip = render_transition_with_window(
                shot,
                &shots[k + 1],
                label,
                transition_duration_s,
                cut_window,
            )?;
            let start_s = cursor as f64 / fps as f64;
            if label.params == EffectParams::Cut {
                // Nothing enters the timeline; the clip window is only
                // used when rendered standalone for classifier input.
                clip.frames.clear();
                clip.start_s = start_s;
                clip.end_s = start_s;
            } else {
                let n_t = clip.frames.len();
                clip.start_s = start_s;
                clip.end_s = (cursor + n_t) as f64 / fps as f64;
                cursor += n_t;
            }
            annotations.push(Annotation {
                label: label.id,
                start_s: clip.start_s,
                end_s: clip.end_s,
            });
            segments.push(Segment::Transition(clip));
        }
    }

    Ok(EditedVideo {
        segments,
        audio,
        annotations,
        fps,
    })
}

/// Returns the uncontaminated shot segments paired with their adjacent
/// transition annotations — the only visual input the recommender sees.
pub fn extract_uncontaminated_segments(
    video: &EditedVideo,
) -> Result<Vec<SegmentContext<'_>>, FxError> {
    for pair in video.annotations.windows(2) {
        if pair[1].start_s < pair[0].end_s {
            return Err(FxError::OverlappingAnnotations(pair[1].start_s));
        }
    }
    let mut out = Vec::new();
    let mut shot_index = 0usize;
    for seg in &video.segments {
        if let Segment::Shot(s) = seg {
            let before = shot_index.checked_sub(1).map(|i| &video.annotations[i]);
            let after = video.annotations.get(shot_index);
            out.push(SegmentContext {
                segment: s,
                before,
                after,
            });
            shot_index += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fx::registry::Registry;
    use crate::synthgen::{AudioTrack, Mood};
    use crate::util::seeded_rng;
    use rand::Rng;

    fn random_shot(n: usize, h: usize, w: usize, fps: f32, seed: u64) -> Shot {
        let mut rng = seeded_rng(seed, "compose-test-shot");
        let frames = (0..n)
            .map(|_| {
                let mut f = Frame::zeros(h, w);
                f.pixels.mapv_inplace(|_| rng.random_range(0.0..=1.0));
                f
            })
            .collect();
        Shot::new(frames, fps).unwrap()
    }

    fn silent_audio(duration_s: f64) -> AudioTrack {
        AudioTrack {
            samples: vec![0.0; (duration_s * 800.0).round() as usize],
            sample_rate: 800,
            mood: Mood::Soft,
            tempo_bpm: 120.0,
        }
    }

    #[test]
    fn render_produces_expected_frame_count_and_boundaries() {
        // 0.5 s at 16 fps: 8 frames, half consumed from each side.
        let a = random_shot(20, 8, 8, 16.0, 1);
        let b = random_shot(20, 8, 8, 16.0, 2);
        let reg = Registry::full(false);
        let mix = reg.by_name("mix").unwrap();
        let clip = render_transition(&a, &b, mix, 0.5).unwrap();
        assert_eq!(clip.frames.len(), 8);
        // First frame is pure outgoing content: blend at t=0 of the first
        // overlap frame.
        assert_eq!(clip.frames[0].pixels, a.frames[16].pixels);
        assert_eq!(clip.frames[7].pixels, b.frames[3].pixels);
        assert!((clip.duration_s() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn render_rejects_overlong_duration() {
        let a = random_shot(8, 8, 8, 16.0, 3);
        let b = random_shot(8, 8, 8, 16.0, 4);
        let reg = Registry::full(false);
        let mix = reg.by_name("mix").unwrap();
        assert!(matches!(
            render_transition(&a, &b, mix, 1.0),
            Err(FxError::DurationTooLong { .. })
        ));
    }

    #[test]
    fn direct_cut_renders_abutting_window_with_zero_duration() {
        let a = random_shot(20, 8, 8, 16.0, 5);
        let b = random_shot(20, 8, 8, 16.0, 6);
        let reg = Registry::full(true);
        let cut = reg.get(reg.direct_cut_id().unwrap()).unwrap();
        let clip = render_transition(&a, &b, cut, 0.5).unwrap();
        assert_eq!(clip.frames.len(), 8);
        for i in 0..4 {
            assert_eq!(clip.frames[i].pixels, a.frames[16 + i].pixels);
            assert_eq!(clip.frames[4 + i].pixels, b.frames[i].pixels);
        }
        assert_eq!(clip.duration_s(), 0.0);
    }

    #[test]
    fn wipes_mirror_as_whole_clips() {
        let a = random_shot(20, 8, 8, 16.0, 7);
        let b = random_shot(20, 8, 8, 16.0, 8);
        let reg = Registry::full(false);
        let left = reg.by_name("left").unwrap();
        let right = reg.by_name("right").unwrap();
        let flip_shot = |s: &Shot| {
            Shot::new(s.frames.iter().map(Frame::flip_horizontal).collect(), s.fps).unwrap()
        };
        let clip_l = render_transition(&a, &b, left, 0.5).unwrap();
        let clip_r = render_transition(&flip_shot(&a), &flip_shot(&b), right, 0.5).unwrap();
        assert_eq!(clip_l.frames.len(), clip_r.frames.len());
        for (fl, fr) in clip_l.frames.iter().zip(&clip_r.frames) {
            assert_eq!(fl.pixels, fr.flip_horizontal().pixels);
        }
    }

    #[test]
    fn compose_structure_and_durations() {
        let shots: Vec<Shot> = (0..3).map(|i| random_shot(24, 8, 8, 16.0, 10 + i)).collect();
        let reg = Registry::full(false);
        let labels = vec![
            reg.by_name("mix").unwrap().clone(),
            reg.by_name("left").unwrap().clone(),
        ];
        let total_in: f64 = shots.iter().map(|s| s.duration_s()).sum();
        let video = compose_edited_video(&shots, &labels, silent_audio(5.0), 0.5).unwrap();
        assert_eq!(video.segments.len(), 5);
        assert_eq!(video.annotations.len(), 2);
        // Each transition consumes duration/2 from both neighbors and
        // returns a clip of the full duration, so the total length is
        // sum(shots) minus a net overlap cost of zero.
        let net_overlap_cost = 2.0 * (0.5 / 2.0 + 0.5 / 2.0 - 0.5);
        assert!((video.duration_s() - (total_in - net_overlap_cost)).abs() < 1e-9);
        // Timestamps strictly increase and never overlap.
        let mut prev_end = 0.0;
        for ann in &video.annotations {
            assert!(ann.start_s >= prev_end);
            assert!(ann.end_s >= ann.start_s);
            prev_end = ann.end_s;
        }
    }

    #[test]
    fn compose_two_identical_shots_mix_matches_blend_oracle() {
        let a = random_shot(24, 8, 8, 16.0, 20);
        let shots = vec![a.clone(), a.clone()];
        let reg = Registry::full(false);
        let mix = reg.by_name("mix").unwrap();
        let video = compose_edited_video(&shots, &[mix.clone()], silent_audio(3.0), 0.5).unwrap();
        let Segment::Transition(clip) = &video.segments[1] else {
            panic!("middle segment is the transition");
        };
        for (i, frame) in clip.frames.iter().enumerate() {
            let t = i as f32 / (clip.frames.len() - 1) as f32;
            let ia = (24 - 4 + i).min(23);
            let ib = i.saturating_sub(4);
            let expect = blend_frame(&a.frames[ia], &a.frames[ib], mix, t).unwrap();
            assert_eq!(frame.pixels, expect.pixels);
        }
    }

    #[test]
    fn compose_rejects_mismatched_labels() {
        let shots: Vec<Shot> = (0..3).map(|i| random_shot(24, 8, 8, 16.0, 30 + i)).collect();
        let reg = Registry::full(false);
        let labels = vec![reg.by_name("mix").unwrap().clone()];
        assert!(matches!(
            compose_edited_video(&shots, &labels, silent_audio(1.0), 0.5),
            Err(FxError::LabelCount { .. })
        ));
    }

    #[test]
    fn extract_round_trips_frame_exact() {
        let shots: Vec<Shot> = (0..4).map(|i| random_shot(20, 8, 8, 16.0, 40 + i)).collect();
        let reg = Registry::full(true);
        let labels = vec![
            reg.by_name("mix").unwrap().clone(),
            reg.get(reg.direct_cut_id().unwrap()).unwrap().clone(),
            reg.by_name("down").unwrap().clone(),
        ];
        let video = compose_edited_video(&shots, &labels, silent_audio(4.0), 0.5).unwrap();
        let segs = extract_uncontaminated_segments(&video).unwrap();
        assert_eq!(segs.len(), 4); // n transitions => n+1 segments

        // No segment frame lies inside any annotated span.
        for ctx in &segs {
            for ann in &video.annotations {
                let disjoint =
                    ctx.segment.end_s <= ann.start_s || ctx.segment.start_s >= ann.end_s;
                assert!(disjoint || ann.start_s == ann.end_s);
            }
        }
        // Neighbor labels line up with the annotation list.
        assert!(segs[0].before.is_none());
        assert_eq!(segs[0].after.unwrap(), &video.annotations[0]);
        assert_eq!(segs[1].before.unwrap(), &video.annotations[0]);
        assert!(segs[3].after.is_none());

        // Re-composing segments + clips reproduces the edited video.
        let mut rebuilt: Vec<&Frame> = Vec::new();
        for (i, ctx) in segs.iter().enumerate() {
            rebuilt.extend(ctx.segment.frames.iter());
            if let Some(Segment::Transition(clip)) = video.segments.get(2 * i + 1) {
                rebuilt.extend(clip.frames.iter());
            }
        }
        let original = video.all_frames();
        assert_eq!(rebuilt.len(), original.len());
        for (ra, rb) in rebuilt.iter().zip(original.iter()) {
            assert_eq!(ra.pixels, rb.pixels);
        }
    }

    #[test]
    fn compose_rejects_too_short_shots() {
        let shots = vec![
            random_shot(4, 8, 8, 16.0, 50),
            random_shot(4, 8, 8, 16.0, 51),
            random_shot(4, 8, 8, 16.0, 52),
        ];
        let reg = Registry::full(false);
        let labels = vec![
            reg.by_name("mix").unwrap().clone(),
            reg.by_name("mix").unwrap().clone(),
        ];
        // 0.5 s at 16 fps eats 4 frames from the middle shot: too short.
        assert!(matches!(
            compose_edited_video(&shots, &labels, silent_audio(1.0), 0.5),
            Err(FxError::ShotTooShort { .. })
        ));
    }
}
