//! Retrieval metrics over per-query category rankings.

use crate::model::rank_scores;
use serde::{Deserialize, Serialize};

/// 1-based rank of the correct category under descending-score order
/// with ties broken toward the smaller id.
pub fn rank_of_correct(scores: &[f32], correct: usize) -> usize {
    rank_scores(scores).rank_of(correct)
}

/// Fraction of queries whose correct category ranks in the top k.
pub fn recall_at_k(ranks: &[usize], k: usize) -> f64 {
    assert!(!ranks.is_empty(), "no queries");
    let hits = ranks.iter().filter(|&&r| r <= k).count();
    hits as f64 / ranks.len() as f64
}

/// Average 1-based rank; chance level is (N + 1) / 2.
pub fn mean_rank(ranks: &[usize]) -> f64 {
    assert!(!ranks.is_empty(), "no queries");
    ranks.iter().sum::<usize>() as f64 / ranks.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_queries: usize,
    pub recall_at_1: f64,
    pub recall_at_5: f64,
    pub mean_rank: f64,
}

impl MetricsReport {
    pub fn from_ranks(ranks: &[usize]) -> Self {
        MetricsReport {
            n_queries: ranks.len(),
            recall_at_1: recall_at_k(ranks, 1),
            recall_at_5: recall_at_k(ranks, 5),
            mean_rank: mean_rank(ranks),
        }
    }
}

impl std::fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "R@1 {:.4}  R@5 {:.4}  MR {:.3}  ({} queries)",
            self.recall_at_1, self.recall_at_5, self.mean_rank, self.n_queries
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Brute-force rank: strictly better scores, plus equal scores with
    /// a smaller id, plus one.
    fn oracle_rank(scores: &[f32], c: usize) -> usize {
        1 + scores
            .iter()
            .enumerate()
            .filter(|(k, &s)| s > scores[c] || (s == scores[c] && *k < c))
            .count()
    }

    #[test]
    fn rank_agrees_with_the_brute_force_oracle() {
        let mut rng = crate::util::seeded_rng(5, "metrics-oracle");
        for _ in 0..200 {
            let n = rng.random_range(2..12);
            let scores: Vec<f32> = (0..n)
                // Coarse grid so ties actually happen.
                .map(|_| (rng.random_range(0..5) as f32) * 0.25)
                .collect();
            let c = rng.random_range(0..n);
            assert_eq!(
                rank_of_correct(&scores, c),
                oracle_rank(&scores, c),
                "scores {scores:?} c {c}"
            );
        }
    }

    #[test]
    fn recall_and_mean_rank_by_hand() {
        let ranks = [1usize, 3, 6, 1, 2];
        assert!((recall_at_k(&ranks, 1) - 0.4).abs() < 1e-12);
        assert!((recall_at_k(&ranks, 5) - 0.8).abs() < 1e-12);
        assert!((mean_rank(&ranks) - 2.6).abs() < 1e-12);
    }

    #[test]
    fn random_scores_sit_at_chance_mean_rank() {
        // 30 categories: chance mean rank is 15.5.
        let mut rng = crate::util::seeded_rng(7, "metrics-chance");
        let mut ranks = Vec::with_capacity(10_000);
        for _ in 0..10_000 {
            let scores: Vec<f32> = (0..30).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            let c = rng.random_range(0..30);
            ranks.push(rank_of_correct(&scores, c));
        }
        let mr = mean_rank(&ranks);
        assert!(
            (mr - 15.5).abs() < 0.3,
            "mean rank {mr} strayed from chance"
        );
        let r1 = recall_at_k(&ranks, 1);
        assert!((r1 - 1.0 / 30.0).abs() < 0.01, "R@1 {r1} off chance");
    }

    #[test]
    fn report_round_trips_through_json() {
        let rep = MetricsReport::from_ranks(&[1, 2, 9]);
        let s = serde_json::to_string(&rep).unwrap();
        let back: MetricsReport = serde_json::from_str(&s).unwrap();
        assert_eq!(rep, back);
    }
}
