//! Dense t-SNE over cosine distances, for eyeballing the learned
//! transition-embedding space. O(n^2) all the way; clip counts here are
//! a few hundred, so no tree approximations are needed.

use crate::util::seeded_rng;
use ndarray::{Array2, ArrayView2};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iters: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// P is inflated by this factor for the first quarter of the run.
    pub exaggeration: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 20.0,
            iters: 400,
            learning_rate: 100.0,
            seed: 0,
            exaggeration: 4.0,
        }
    }
}

/// Cosine distance matrix; zero rows are treated as distance 1 from
/// everything (max dissimilarity short of opposite).
fn cosine_distances(x: ArrayView2<f32>) -> Array2<f64> {
    let n = x.nrows();
    let norms: Vec<f64> = (0..n)
        .map(|i| {
            x.row(i)
                .iter()
                .map(|v| (*v as f64) * (*v as f64))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let dot: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j).iter())
                .map(|(a, b)| (*a as f64) * (*b as f64))
                .sum();
            let denom = norms[i] * norms[j];
            let cos = if denom > 1e-12 { dot / denom } else { 0.0 };
            let dist = (1.0 - cos).max(0.0);
            d[[i, j]] = dist;
            d[[j, i]] = dist;
        }
    }
    d
}

/// Binary-search the kernel width for one row so its conditional
/// distribution hits the target perplexity.
fn conditional_row(dists: &[f64], i: usize, target_perp: f64) -> Vec<f64> {
    let n = dists.len();
    let mut beta = 1.0f64;
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut p = vec![0.0f64; n];
    for _ in 0..60 {
        let mut sum = 0.0;
        for j in 0..n {
            p[j] = if j == i { 0.0 } else { (-beta * dists[j]).exp() };
            sum += p[j];
        }
        if sum <= 1e-300 {
            // Row collapsed; widen the kernel.
            hi = beta;
            beta = (lo + hi) / 2.0;
            continue;
        }
        let mut h = 0.0;
        for pj in p.iter_mut() {
            *pj /= sum;
            if *pj > 1e-300 {
                h -= *pj * pj.ln();
            }
        }
        let perp = h.exp();
        if (perp - target_perp).abs() < 1e-5 {
            break;
        }
        if perp > target_perp {
            lo = beta;
            beta = if hi.is_finite() { (lo + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (lo + hi) / 2.0;
        }
    }
    p
}

/// Project rows of `x` to 2-D. Deterministic for a fixed config.
pub fn tsne_embed(x: ArrayView2<f32>, cfg: &TsneConfig) -> Array2<f64> {
    let n = x.nrows();
    assert!(n >= 2, "nothing to embed");
    let perp = cfg.perplexity.min(((n - 1) as f64 / 3.0).max(1.0));
    let d = cosine_distances(x);

    // Symmetrized joint P.
    let mut p = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let row = conditional_row(d.row(i).as_slice().expect("c-order row"), i, perp);
        for j in 0..n {
            p[[i, j]] = row[j];
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (p[[i, j]] + p[[j, i]]) / (2.0 * n as f64);
            let v = v.max(1e-12);
            p[[i, j]] = v;
            p[[j, i]] = v;
        }
    }

    let mut rng = seeded_rng(cfg.seed, "tsne-init");
    let mut y = Array2::<f64>::zeros((n, 2));
    for v in y.iter_mut() {
        *v = rng.random_range(-1e-2f64..1e-2);
    }
    let mut vel = Array2::<f64>::zeros((n, 2));
    let exag_until = cfg.iters / 4;

    for iter in 0..cfg.iters {
        let exag = if iter < exag_until { cfg.exaggeration } else { 1.0 };
        let momentum = if iter < cfg.iters / 2 { 0.5 } else { 0.8 };

        // Student-t affinities in the plane.
        let mut w = Array2::<f64>::zeros((n, n));
        let mut wsum = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[[i, 0]] - y[[j, 0]];
                let dy = y[[i, 1]] - y[[j, 1]];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                w[[i, j]] = v;
                w[[j, i]] = v;
                wsum += 2.0 * v;
            }
        }
        let wsum = wsum.max(1e-300);

        let mut grad = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = w[[i, j]] / wsum;
                let coeff = 4.0 * (exag * p[[i, j]] - q) * w[[i, j]];
                grad[[i, 0]] += coeff * (y[[i, 0]] - y[[j, 0]]);
                grad[[i, 1]] += coeff * (y[[i, 1]] - y[[j, 1]]);
            }
        }
        for i in 0..n {
            for c in 0..2 {
                vel[[i, c]] = momentum * vel[[i, c]] - cfg.learning_rate * grad[[i, c]];
                y[[i, c]] += vel[[i, c]];
            }
        }
        // Re-center so the cloud doesn't drift.
        for c in 0..2 {
            let m: f64 = y.column(c).sum() / n as f64;
            for i in 0..n {
                y[[i, c]] -= m;
            }
        }
    }
    y
}
