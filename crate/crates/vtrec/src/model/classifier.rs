//! Clip classifier used to pretrain transition embeddings, plus the
//! aggregation that turns per-clip embeddings into the category table.

use super::config::{ModelConfig, ModelError};
use super::encoders::VisualEncoder;
use crate::nn::{init_rng, xavier_uniform, zeros, Graph, NodeId, ParamStore};
use ndarray::{Array2, ArrayView2, Axis};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Backbone -> linear embed -> unit normalize -> linear logits.
pub struct TransitionClassifier;

pub const EMBED_EPS: f32 = 1e-8;

impl TransitionClassifier {
    pub fn register(store: &mut ParamStore, cfg: &ModelConfig, n_classes: usize, seed: u64) {
        VisualEncoder::register(store, cfg, seed);
        let dv = cfg.d_visual();
        let dm = cfg.d_matching;
        let mut rng = init_rng(seed, "classifier.fc_embed.w");
        store.insert(
            "classifier.fc_embed.w",
            xavier_uniform(&[dv, dm], dv, dm, &mut rng),
        );
        store.insert("classifier.fc_embed.b", zeros(&[dm]));
        let mut rng = init_rng(seed, "classifier.fc_logits.w");
        store.insert(
            "classifier.fc_logits.w",
            xavier_uniform(&[dm, n_classes], dm, n_classes, &mut rng),
        );
        store.insert("classifier.fc_logits.b", zeros(&[n_classes]));
    }

    /// Returns (unit embeddings (B, d_matching), logits (B, n_classes)).
    pub fn forward(
        g: &mut Graph,
        store: &ParamStore,
        cfg: &ModelConfig,
        clips: NodeId,
    ) -> (NodeId, NodeId) {
        let feats = VisualEncoder::forward(g, store, cfg, clips);
        let we = g.param(store, "classifier.fc_embed.w");
        let be = g.param(store, "classifier.fc_embed.b");
        let lin = g.matmul(feats, we);
        let lin = g.add_bias(lin, be);
        let embed = g.l2_normalize_rows(lin, EMBED_EPS);
        let wl = g.param(store, "classifier.fc_logits.w");
        let bl = g.param(store, "classifier.fc_logits.b");
        let lo = g.matmul(embed, wl);
        let logits = g.add_bias(lo, bl);
        (embed, logits)
    }
}

/// Minimum samples in a category before the outlier pass runs; below
/// this a sigma estimate is too noisy to trust.
pub const OUTLIER_MIN_COUNT: usize = 10;

fn renormalize_rows(mut table: Array2<f32>) -> Array2<f32> {
    for mut row in table.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f32>().sqrt();
        if norm > EMBED_EPS {
            row.mapv_inplace(|v| v / norm);
        }
    }
    table
}

/// Per-category mean of clip embeddings with a three-sigma outlier
/// drop, renormalized to unit length. A sample is an outlier if any
/// coordinate is more than three standard deviations from that
/// category's mean; the pass is skipped for categories with fewer than
/// `OUTLIER_MIN_COUNT` samples. Categories with no samples get a zero
/// row.
pub fn aggregate_category_embeddings(
    embeds: ArrayView2<f32>,
    labels: &[usize],
    n_categories: usize,
) -> Array2<f32> {
    assert_eq!(embeds.nrows(), labels.len());
    let d = embeds.ncols();
    let mut table = Array2::<f32>::zeros((n_categories, d));
    for cat in 0..n_categories {
        let member_rows: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cat)
            .map(|(i, _)| i)
            .collect();
        if member_rows.is_empty() {
            continue;
        }
        let mut mean = vec![0.0f32; d];
        for &r in &member_rows {
            for (m, v) in mean.iter_mut().zip(embeds.row(r).iter()) {
                *m += v;
            }
        }
        let n = member_rows.len() as f32;
        mean.iter_mut().for_each(|m| *m /= n);

        let kept: Vec<usize> = if member_rows.len() >= OUTLIER_MIN_COUNT {
            let mut var = vec![0.0f32; d];
            for &r in &member_rows {
                for (s, (v, m)) in var.iter_mut().zip(embeds.row(r).iter().zip(&mean)) {
                    let dvi = v - m;
                    *s += dvi * dvi;
                }
            }
            let sigma: Vec<f32> = var.iter().map(|s| (s / n).sqrt()).collect();
            let survivors: Vec<usize> = member_rows
                .iter()
                .copied()
                .filter(|&r| {
                    embeds
                        .row(r)
                        .iter()
                        .zip(mean.iter().zip(&sigma))
                        .all(|(v, (m, s))| (v - m).abs() <= 3.0 * s + EMBED_EPS)
                })
                .collect();
            // Degenerate case: everything flagged; fall back to all.
            if survivors.is_empty() {
                member_rows
            } else {
                survivors
            }
        } else {
            member_rows
        };

        let mut acc = table.row_mut(cat);
        for &r in &kept {
            acc += &embeds.row(r);
        }
        acc.mapv_inplace(|v| v / kept.len() as f32);
    }
    renormalize_rows(table)
}

/// Unit-norm random rows; the no-pretraining ablation table.
pub fn random_table(n_categories: usize, d: usize, seed: u64) -> Array2<f32> {
    let mut rng = init_rng(seed, "random_table");
    let raw = crate::nn::gaussian(&[n_categories, d], 0.0, 1.0, &mut rng);
    let raw = raw.into_dimensionality::<ndarray::Ix2>().expect("2-D");
    renormalize_rows(raw)
}

/// The frozen category-embedding table the recommender matches against.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEmbeddingTable {
    /// (n_categories, d) with unit (or zero) rows.
    pub embeddings: Array2<f32>,
    pub names: Vec<String>,
}

impl TransitionEmbeddingTable {
    pub fn new(embeddings: Array2<f32>, names: Vec<String>) -> Result<Self, ModelError> {
        if embeddings.nrows() != names.len() {
            return Err(ModelError::TableShape(format!(
                "{} rows vs {} names",
                embeddings.nrows(),
                names.len()
            )));
        }
        Ok(TransitionEmbeddingTable { embeddings, names })
    }

    pub fn n_categories(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    /// CSV with one row per category: id,name,e0,...,e{d-1}.
    pub fn save_csv(&self, path: &Path) -> Result<(), ModelError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (0..self.dim()).map(|i| format!("e{i}")).collect();
        writeln!(f, "id,name,{}", header.join(","))?;
        for (i, row) in self.embeddings.axis_iter(Axis(0)).enumerate() {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:.8}")).collect();
            writeln!(f, "{},{},{}", i, self.names[i], vals.join(","))?;
        }
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self, ModelError> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let header = lines
            .next()
            .ok_or_else(|| ModelError::TableParse("empty file".into()))??;
        let d = header.split(',').count().checked_sub(2).ok_or_else(|| {
            ModelError::TableParse("header needs id,name,e0...".into())
        })?;
        if d == 0 {
            return Err(ModelError::TableParse("no embedding columns".into()));
        }
        let mut names = Vec::new();
        let mut data = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 2 {
                return Err(ModelError::TableParse(format!(
                    "row {}: {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    d + 2
                )));
            }
            let id: usize = fields[0]
                .parse()
                .map_err(|_| ModelError::TableParse(format!("row {}: bad id", lineno + 2)))?;
            if id != names.len() {
                return Err(ModelError::TableParse(format!(
                    "row {}: ids must be dense and ascending",
                    lineno + 2
                )));
            }
            names.push(fields[1].to_string());
            for v in &fields[2..] {
                data.push(v.parse::<f32>().map_err(|_| {
                    ModelError::TableParse(format!("row {}: bad float", lineno + 2))
                })?);
            }
        }
        let n = names.len();
        let embeddings = Array2::from_shape_vec((n, d), data)
            .map_err(|e| ModelError::TableParse(e.to_string()))?;
        TransitionEmbeddingTable::new(embeddings, names)
    }
}
