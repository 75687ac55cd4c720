//! Transition-effect taxonomy and procedural renderer.
//!
//! This module owns everything about how two shots are joined: the
//! category registry (wipes, zooms, fades, ... plus the optional
//! "direct cut"), the per-frame blend kernels, and the composition of
//! whole edited videos from raw shots. Rendered videos interleave
//! *uncontaminated* shot segments with transition clips; the rest of the
//! pipeline only ever trains on the uncontaminated parts and treats the
//! clips as labeled ground truth.

mod compose;
mod kernel;
mod registry;
mod types;

pub use compose::{
    compose_edited_video, compose_with_window, extract_uncontaminated_segments, render_transition,
    render_transition_with_window, Annotation, EditedVideo, Segment, SegmentContext, ShotSegment,
    DEFAULT_CUT_WINDOW,
};
pub use kernel::blend_frame;
pub(crate) use kernel::zoomed as kernel_zoom;
pub use registry::{EffectParams, Family, MaskKind, Registry, TransitionCategory, WipeKind};
pub use types::{Frame, FxError, Shot, TransitionClip};
