//! Linear-warmup / step-decay learning-rate schedule.

use serde::{Deserialize, Serialize};

/// lr(e) climbs linearly from `warmup_init` to `initial` over
/// `warmup_epochs`, then steps down by `decay_factor` every
/// `decay_every` epochs. Epochs are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    pub warmup_epochs: usize,
    pub warmup_init: f64,
    pub decay_factor: f64,
    /// 0 disables decay.
    pub decay_every: usize,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        LrSchedule {
            initial: lr,
            warmup_epochs: 0,
            warmup_init: lr,
            decay_factor: 1.0,
            decay_every: 0,
        }
    }

    /// Clip-classifier schedule: 1e-6 -> 1e-3 over five epochs, then
    /// a tenfold drop every ten.
    pub fn classifier_default() -> Self {
        LrSchedule {
            initial: 1e-3,
            warmup_epochs: 5,
            warmup_init: 1e-6,
            decay_factor: 0.1,
            decay_every: 10,
        }
    }

    /// Recommender schedule: flat 1e-5 with the same tenfold decay.
    pub fn recommender_default() -> Self {
        LrSchedule {
            initial: 1e-5,
            warmup_epochs: 0,
            warmup_init: 1e-5,
            decay_factor: 0.1,
            decay_every: 10,
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch < self.warmup_epochs {
            let t = epoch as f64 / self.warmup_epochs as f64;
            return self.warmup_init + (self.initial - self.warmup_init) * t;
        }
        if self.decay_every == 0 {
            return self.initial;
        }
        let steps = (epoch - self.warmup_epochs) / self.decay_every;
        self.initial * self.decay_factor.powi(steps as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn classifier_schedule_hits_the_published_points() {
        let s = LrSchedule::classifier_default();
        assert!(close(s.lr_at(0), 1e-6));
        // epoch 2 of 5: 1e-6 + (1e-3 - 1e-6) * 0.4
        assert!(close(s.lr_at(2), 1e-6 + (1e-3 - 1e-6) * 0.4));
        assert!(close(s.lr_at(5), 1e-3));
        assert!(close(s.lr_at(14), 1e-3));
        assert!(close(s.lr_at(15), 1e-4));
        assert!(close(s.lr_at(25), 1e-5));
        assert!(close(s.lr_at(29), 1e-5));
    }

    #[test]
    fn recommender_schedule_is_flat_then_steps() {
        let s = LrSchedule::recommender_default();
        assert!(close(s.lr_at(0), 1e-5));
        assert!(close(s.lr_at(9), 1e-5));
        assert!(close(s.lr_at(10), 1e-6));
        assert!(close(s.lr_at(20), 1e-7));
    }

    #[test]
    fn constant_never_moves() {
        let s = LrSchedule::constant(3e-4);
        for e in [0usize, 1, 7, 100] {
            assert!(close(s.lr_at(e), 3e-4));
        }
    }

    #[test]
    fn warmup_is_monotone() {
        let s = LrSchedule::classifier_default();
        for e in 0..5 {
            assert!(s.lr_at(e) < s.lr_at(e + 1));
        }
    }
}
