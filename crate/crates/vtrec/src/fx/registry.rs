//! The transition category registry.
//!
//! Thirty effect categories across eight visual families, plus the
//! optional "direct cut" pseudo-category which, when enabled, always
//! takes the last id (30 in the full registry, 8 in the desk registry).

use serde::{Deserialize, Serialize};

/// Visual family a category belongs to. Families drive both the blend
/// kernel dispatch and the embedding-structure analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Wipe,
    Zoom,
    Fade,
    Mix,
    Blur,
    Flash,
    Rotate,
    Shape,
    Cut,
}

/// Direction of a wipe front, named by the edge (or axis) the incoming
/// shot appears from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WipeKind {
    Left,
    Right,
    Up,
    Down,
    UpLeft,
    UpRight,
    DownLeft,
    DownRight,
    SplitHorizontal,
    SplitVertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Circle,
    Diamond,
    Star,
    Heart,
    Checker,
}

/// Family-specific kernel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectParams {
    Wipe { kind: WipeKind },
    /// `inward` grows the incoming shot from a magnified start ("pull in");
    /// otherwise both shots shrink away ("pull out").
    Zoom { inward: bool },
    /// Luminance the image passes through at the midpoint (0 black, 1 white).
    Fade { target: f32 },
    /// Plain linear crossfade, or per-pixel dithered when `dithered`.
    Mix { dithered: bool },
    /// Softening crossfade; pixelating block average when `mosaic`.
    Blur { mosaic: bool },
    /// Additive white surge with `pulses` intensity peaks.
    Flash { pulses: u32 },
    Rotate { clockwise: bool },
    /// Angular wipe sweeping like a clock hand.
    ClockSweep,
    /// Growing (`inward`) or closing mask reveal.
    Shape { mask: MaskKind, inward: bool },
    Cut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCategory {
    pub id: usize,
    pub name: &'static str,
    pub family: Family,
    pub params: EffectParams,
}

/// Name of the cut pseudo-category; always registered last when enabled.
pub const DIRECT_CUT: &str = "direct cut";

// (name, family, params) for the 30 effect categories. Order is fixed:
// ids are dense indices into this table.
const FULL_TABLE: [(&str, Family, EffectParams); 30] = {
    use EffectParams as P;
    use Family as F;
    use MaskKind as M;
    use WipeKind as W;
    [
        ("left", F::Wipe, P::Wipe { kind: W::Left }),
        ("right", F::Wipe, P::Wipe { kind: W::Right }),
        ("up", F::Wipe, P::Wipe { kind: W::Up }),
        ("down", F::Wipe, P::Wipe { kind: W::Down }),
        ("up left", F::Wipe, P::Wipe { kind: W::UpLeft }),
        ("up right", F::Wipe, P::Wipe { kind: W::UpRight }),
        ("down left", F::Wipe, P::Wipe { kind: W::DownLeft }),
        ("down right", F::Wipe, P::Wipe { kind: W::DownRight }),
        (
            "split horizontal",
            F::Wipe,
            P::Wipe {
                kind: W::SplitHorizontal,
            },
        ),
        (
            "split vertical",
            F::Wipe,
            P::Wipe {
                kind: W::SplitVertical,
            },
        ),
        ("pull in", F::Zoom, P::Zoom { inward: true }),
        ("pull out", F::Zoom, P::Zoom { inward: false }),
        ("black fade", F::Fade, P::Fade { target: 0.0 }),
        ("white fade", F::Fade, P::Fade { target: 1.0 }),
        ("mix", F::Mix, P::Mix { dithered: false }),
        ("dissolve", F::Mix, P::Mix { dithered: true }),
        ("blur", F::Blur, P::Blur { mosaic: false }),
        ("mosaic", F::Blur, P::Blur { mosaic: true }),
        ("floodlight", F::Flash, P::Flash { pulses: 1 }),
        ("flashing", F::Flash, P::Flash { pulses: 3 }),
        ("rotate cw", F::Rotate, P::Rotate { clockwise: true }),
        ("rotate ccw", F::Rotate, P::Rotate { clockwise: false }),
        ("clock sweep", F::Rotate, P::ClockSweep),
        (
            "circle in",
            F::Shape,
            P::Shape {
                mask: M::Circle,
                inward: true,
            },
        ),
        (
            "circle out",
            F::Shape,
            P::Shape {
                mask: M::Circle,
                inward: false,
            },
        ),
        (
            "diamond in",
            F::Shape,
            P::Shape {
                mask: M::Diamond,
                inward: true,
            },
        ),
        (
            "diamond out",
            F::Shape,
            P::Shape {
                mask: M::Diamond,
                inward: false,
            },
        ),
        (
            "star",
            F::Shape,
            P::Shape {
                mask: M::Star,
                inward: true,
            },
        ),
        (
            "heart",
            F::Shape,
            P::Shape {
                mask: M::Heart,
                inward: true,
            },
        ),
        (
            "checker",
            F::Shape,
            P::Shape {
                mask: M::Checker,
                inward: true,
            },
        ),
    ]
};

/// The eight-category desk subset: four directional wipes, both zooms,
/// and two gentle categories. Small enough to train in minutes yet keeps
/// one family with internal structure (the wipes).
const DESK_NAMES: [&str; 8] = [
    "left",
    "right",
    "up",
    "down",
    "pull in",
    "pull out",
    "mix",
    "black fade",
];

/// An initialized taxonomy with dense, deterministic category ids.
#[derive(Debug, Clone)]
pub struct Registry {
    cats: Vec<TransitionCategory>,
    direct_cut_id: Option<usize>,
}

impl Registry {
    /// All 30 effect categories, optionally extended with "direct cut".
    pub fn full(direct_cut: bool) -> Self {
        Self::from_table(FULL_TABLE.iter().copied(), direct_cut)
    }

    /// The desk-scale 8-category subset, optionally with "direct cut".
    pub fn desk(direct_cut: bool) -> Self {
        let rows = DESK_NAMES.iter().map(|name| {
            *FULL_TABLE
                .iter()
                .find(|(n, _, _)| n == name)
                .expect("desk names come from the full table")
        });
        Self::from_table(rows, direct_cut)
    }

    fn from_table(
        rows: impl Iterator<Item = (&'static str, Family, EffectParams)>,
        direct_cut: bool,
    ) -> Self {
        let mut cats: Vec<TransitionCategory> = rows
            .enumerate()
            .map(|(id, (name, family, params))| TransitionCategory {
                id,
                name,
                family,
                params,
            })
            .collect();
        let direct_cut_id = direct_cut.then(|| {
            let id = cats.len();
            cats.push(TransitionCategory {
                id,
                name: DIRECT_CUT,
                family: Family::Cut,
                params: EffectParams::Cut,
            });
            id
        });
        Registry {
            cats,
            direct_cut_id,
        }
    }

    /// All categories in id order.
    pub fn list_categories(&self) -> &[TransitionCategory] {
        &self.cats
    }

    pub fn len(&self) -> usize {
        self.cats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cats.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&TransitionCategory> {
        self.cats.get(id)
    }

    pub fn by_name(&self, name: &str) -> Option<&TransitionCategory> {
        self.cats.iter().find(|c| c.name == name)
    }

    pub fn direct_cut_id(&self) -> Option<usize> {
        self.direct_cut_id
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.cats.iter().map(|c| c.name).collect()
    }
}
