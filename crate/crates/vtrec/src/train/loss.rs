//! Margin-based retrieval loss over category scores.
//!
//! The working form hinges `score(neg) - score(pos) + margin`, which
//! pushes the correct category's score above every other. The `Literal`
//! form keeps the opposite sign convention for comparison runs; it
//! rewards ranking the correct category *below* the rest, so a model
//! trained with it should sit near chance or worse — that contrast is
//! itself a regression check.

use crate::nn::{Graph, NodeId};
use serde::{Deserialize, Serialize};

pub const DEFAULT_MARGIN: f32 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletForm {
    Corrected,
    Literal,
}

impl Default for TripletForm {
    fn default() -> Self {
        TripletForm::Corrected
    }
}

impl std::str::FromStr for TripletForm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corrected" => Ok(TripletForm::Corrected),
            "literal" => Ok(TripletForm::Literal),
            other => Err(format!("unknown triplet form '{other}'")),
        }
    }
}

/// One hinge term for a (positive, negative) score pair.
pub fn triplet_term(pos: f32, neg: f32, margin: f32, form: TripletForm) -> f32 {
    match form {
        TripletForm::Corrected => (neg - pos + margin).max(0.0),
        TripletForm::Literal => (pos - neg + margin).max(0.0),
    }
}

/// Mean hinge over the N-1 negatives of one transition point.
pub fn sample_loss(scores: &[f32], correct: usize, margin: f32, form: TripletForm) -> f32 {
    assert!(scores.len() >= 2, "need at least one negative");
    assert!(correct < scores.len());
    let pos = scores[correct];
    let sum: f32 = scores
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != correct)
        .map(|(_, &neg)| triplet_term(pos, neg, margin, form))
        .sum();
    sum / (scores.len() - 1) as f32
}

/// Mean of `sample_loss` over every transition point in a batch.
pub fn batch_loss(
    score_rows: &[Vec<f32>],
    labels: &[usize],
    margin: f32,
    form: TripletForm,
) -> f32 {
    assert_eq!(score_rows.len(), labels.len());
    assert!(!score_rows.is_empty());
    let sum: f32 = score_rows
        .iter()
        .zip(labels)
        .map(|(row, &c)| sample_loss(row, c, margin, form))
        .sum();
    sum / score_rows.len() as f32
}

/// The same batch loss as a graph node, differentiable end to end.
///
/// With T(v,k) = relu(±(s_vk - s_vc) + margin), the k = c term is
/// exactly `margin`, so the target
///   (1/V) sum_v (1/(N-1)) sum_{k != c} T(v,k)
/// equals (N * mean_all(T) - margin) / (N - 1).
pub fn triplet_batch_loss(
    g: &mut Graph,
    scores: NodeId,
    labels: &[usize],
    margin: f32,
    form: TripletForm,
) -> NodeId {
    assert!(margin > 0.0, "zero margin breaks the k = c accounting");
    let shape = g.value(scores).shape().to_vec();
    assert_eq!(shape.len(), 2);
    let (v, n) = (shape[0], shape[1]);
    assert_eq!(v, labels.len());
    assert!(n >= 2, "need at least two categories");

    let pos = g.gather_per_row(scores, labels);
    let diff = g.sub_col_broadcast(scores, pos);
    let signed = match form {
        TripletForm::Corrected => diff,
        TripletForm::Literal => g.scale(diff, -1.0),
    };
    let shifted = g.add_scalar(signed, margin);
    let hinged = g.relu(shifted);
    let mean = g.mean_all(hinged);
    let scaled = g.scale(mean, n as f32);
    let without_diag = g.add_scalar(scaled, -margin);
    g.scale(without_diag, 1.0 / (n - 1) as f32)
}
