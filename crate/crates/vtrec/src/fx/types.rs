//! Frame, shot and clip types shared by the renderer and the dataset code.

use ndarray::Array3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FxError {
    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("progress t={0} outside [0,1]")]
    ProgressOutOfRange(f32),
    #[error("shots have different fps: {0} vs {1}")]
    FpsMismatch(f32, f32),
    #[error("transition duration {duration_s}s exceeds a shot of {shot_s}s")]
    DurationTooLong { duration_s: f64, shot_s: f64 },
    #[error("{labels} labels for {shots} shots; need exactly shots-1")]
    LabelCount { shots: usize, labels: usize },
    #[error("need at least 2 shots, got {0}")]
    TooFewShots(usize),
    #[error("shot {index} has {frames} frames but adjacent transitions consume {consumed}")]
    ShotTooShort {
        index: usize,
        frames: usize,
        consumed: usize,
    },
    #[error("annotations overlap near {0:.3}s")]
    OverlappingAnnotations(f64),
    #[error("a shot needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("fps must be positive, got {0}")]
    BadFps(f32),
    #[error("transition duration must be positive, got {0}")]
    BadDuration(f64),
}

/// A single RGB frame. Pixel values live in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// `(height, width, 3)`, channel-last.
    pub pixels: Array3<f32>,
}

impl Frame {
    /// Wraps a pixel array. Panics if the last axis is not 3 channels.
    pub fn new(pixels: Array3<f32>) -> Self {
        assert_eq!(pixels.shape()[2], 3, "frames are RGB (H, W, 3)");
        Frame { pixels }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Frame::new(Array3::zeros((height, width, 3)))
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Frame::new(Array3::from_elem((height, width, 3), value))
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.height() == other.height() && self.width() == other.width()
    }

    /// Mirror across the vertical axis (columns reversed).
    pub fn flip_horizontal(&self) -> Frame {
        let mut p = self.pixels.clone();
        p.invert_axis(ndarray::Axis(1));
        Frame::new(p)
    }

    /// Mirror across the horizontal axis (rows reversed).
    pub fn flip_vertical(&self) -> Frame {
        let mut p = self.pixels.clone();
        p.invert_axis(ndarray::Axis(0));
        Frame::new(p)
    }

    /// True when every pixel difference is at most `tol`.
    pub fn close_to(&self, other: &Frame, tol: f32) -> bool {
        self.same_dims(other)
            && self
                .pixels
                .iter()
                .zip(other.pixels.iter())
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// A raw input shot: at least two frames at a fixed rate.
#[derive(Debug, Clone)]
pub struct Shot {
    pub frames: Vec<Frame>,
    pub fps: f32,
}

impl Shot {
    pub fn new(frames: Vec<Frame>, fps: f32) -> Result<Self, FxError> {
        if frames.len() < 2 {
            return Err(FxError::TooFewFrames(frames.len()));
        }
        if !(fps > 0.0) {
            return Err(FxError::BadFps(fps));
        }
        let first = &frames[0];
        for f in &frames[1..] {
            if !f.same_dims(first) {
                return Err(FxError::DimensionMismatch(
                    first.height(),
                    first.width(),
                    f.height(),
                    f.width(),
                ));
            }
        }
        Ok(Shot { frames, fps })
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps as f64
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }
}

/// A rendered transition segment carrying its ground-truth label.
///
/// `start_s`/`end_s` are timestamps within the composed video (a
/// standalone render stamps them relative to its own first frame). For
/// "direct cut" the annotated span is empty (`start_s == end_s`) while
/// `frames` still holds the abutting boundary window used as classifier
/// input.
#[derive(Debug, Clone)]
pub struct TransitionClip {
    pub frames: Vec<Frame>,
    pub label: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl TransitionClip {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}
