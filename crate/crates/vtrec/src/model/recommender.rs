//! Multi-modal transformer that turns a video's shot features into one
//! matching-space query per transition point, scored against the frozen
//! category table by dot product.

use super::config::ModelConfig;
use super::encoders::AudioEncoder;
use crate::nn::{gaussian, identity, init_rng, xavier_uniform, zeros, Graph, NodeId, ParamStore};
use ndarray::{Array2, ArrayD, Axis, IxDyn};

/// Per-shot inputs for one video: visual features come from the frozen
/// pretrained backbone, audio stays as raw mel images so the audio
/// encoder can keep learning.
#[derive(Debug, Clone)]
pub struct VideoFeatures {
    /// (n_shots, d_visual). Always carries the shot count, even for
    /// configs that ignore the visual modality.
    pub visual: Array2<f32>,
    /// One (mel_bands, mel_frames) image per shot; ignored when the
    /// config runs without audio.
    pub mels: Vec<Array2<f32>>,
}

impl VideoFeatures {
    pub fn n_shots(&self) -> usize {
        self.visual.nrows()
    }
}

pub const TABLE_PARAM: &str = "table.embed";

/// Register every trainable piece of the recommender. The category
/// table itself is registered separately so it can be swapped.
pub fn register_recommender(store: &mut ParamStore, cfg: &ModelConfig, seed: u64) {
    let dm = cfg.d_model;

    if cfg.use_visual {
        let dv = cfg.d_visual();
        let mut rng = init_rng(seed, "proj_visual.w");
        store.insert("proj_visual.w", xavier_uniform(&[dv, dm], dv, dm, &mut rng));
        store.insert("proj_visual.b", zeros(&[dm]));
    }

    if cfg.use_audio {
        AudioEncoder::register(store, cfg, seed);
        let da = cfg.d_audio;
        let mut rng = init_rng(seed, "proj_audio.w");
        store.insert("proj_audio.w", xavier_uniform(&[da, dm], da, dm, &mut rng));
        store.insert("proj_audio.b", zeros(&[dm]));
    }

    // A modality offset only disambiguates when two token streams share
    // the sequence.
    if cfg.n_modalities() == 2 {
        let mut rng = init_rng(seed, "modal.embed");
        store.insert("modal.embed", gaussian(&[2, dm], 0.0, 0.02, &mut rng));
    }

    // One positional row per shot index, shared by every modality.
    let mut rng = init_rng(seed, "pos.embed");
    store.insert(
        "pos.embed",
        gaussian(&[cfg.max_shots(), dm], 0.0, 0.02, &mut rng),
    );

    for l in 1..=cfg.n_layers {
        let p = |s: &str| format!("layer{l}.{s}");
        store.insert(&p("ln1.g"), ArrayD::ones(IxDyn(&[dm])));
        store.insert(&p("ln1.b"), zeros(&[dm]));
        for part in ["attn.wq", "attn.wk", "attn.wv", "attn.wo"] {
            let name = p(part);
            let mut rng = init_rng(seed, &name);
            store.insert(&name, xavier_uniform(&[dm, dm], dm, dm, &mut rng));
        }
        for part in ["attn.bq", "attn.bk", "attn.bv", "attn.bo"] {
            store.insert(&p(part), zeros(&[dm]));
        }
        store.insert(&p("ln2.g"), ArrayD::ones(IxDyn(&[dm])));
        store.insert(&p("ln2.b"), zeros(&[dm]));
        let mut rng = init_rng(seed, &p("ff.w1"));
        store.insert(&p("ff.w1"), xavier_uniform(&[dm, cfg.d_ff], dm, cfg.d_ff, &mut rng));
        store.insert(&p("ff.b1"), zeros(&[cfg.d_ff]));
        let mut rng = init_rng(seed, &p("ff.w2"));
        store.insert(&p("ff.w2"), xavier_uniform(&[cfg.d_ff, dm], cfg.d_ff, dm, &mut rng));
        store.insert(&p("ff.b2"), zeros(&[dm]));
    }
    store.insert("final.ln.g", ArrayD::ones(IxDyn(&[dm])));
    store.insert("final.ln.b", zeros(&[dm]));

    let dq = cfg.tokens_per_query() * dm;
    let mut rng = init_rng(seed, "head.w");
    store.insert(
        "head.w",
        xavier_uniform(&[dq, cfg.d_matching], dq, cfg.d_matching, &mut rng),
    );
    store.insert("head.b", zeros(&[cfg.d_matching]));

    // Identity start: scores begin as plain dot products and the
    // projections drift only where training asks them to.
    if cfg.learnable_projections {
        store.insert("proj_query.w", identity(cfg.d_matching));
        store.insert("proj_table.w", identity(cfg.d_matching));
    }
}

/// Install a frozen category table as `table.embed`.
pub fn register_table(store: &mut ParamStore, table: &Array2<f32>) {
    store.insert(TABLE_PARAM, table.to_owned().into_dyn());
    store.set_frozen(TABLE_PARAM, true);
}

fn linear(g: &mut Graph, store: &ParamStore, x: NodeId, w: &str, b: &str) -> NodeId {
    let wn = g.param(store, w);
    let bn = g.param(store, b);
    let y = g.matmul(x, wn);
    g.add_bias(y, bn)
}

/// Pre-LN encoder stack over a (T, d_model) sequence; `mask[t]` is
/// false for padding keys.
fn transformer_encode(
    g: &mut Graph,
    store: &ParamStore,
    cfg: &ModelConfig,
    x: NodeId,
    mask: &[bool],
) -> NodeId {
    let dh = cfg.d_model / cfg.n_heads;
    let scale = 1.0 / (dh as f32).sqrt();
    let mut h = x;
    for l in 1..=cfg.n_layers {
        let p = |s: &str| format!("layer{l}.{s}");
        let g1 = g.param(store, &p("ln1.g"));
        let b1 = g.param(store, &p("ln1.b"));
        let a_in = g.layer_norm(h, g1, b1, cfg.layer_norm_eps);
        let q = linear(g, store, a_in, &p("attn.wq"), &p("attn.bq"));
        let k = linear(g, store, a_in, &p("attn.wk"), &p("attn.bk"));
        let v = linear(g, store, a_in, &p("attn.wv"), &p("attn.bv"));
        let mut heads = Vec::with_capacity(cfg.n_heads);
        for i in 0..cfg.n_heads {
            let (lo, hi) = (i * dh, (i + 1) * dh);
            let qh = g.slice_cols(q, lo, hi);
            let kh = g.slice_cols(k, lo, hi);
            let vh = g.slice_cols(v, lo, hi);
            let kt = g.transpose(kh);
            let logits = g.matmul(qh, kt);
            let logits = g.scale(logits, scale);
            let probs = g.masked_softmax_rows(logits, mask);
            heads.push(g.matmul(probs, vh));
        }
        let cat = g.concat_cols(&heads);
        let o = linear(g, store, cat, &p("attn.wo"), &p("attn.bo"));
        h = g.add(h, o);

        let g2 = g.param(store, &p("ln2.g"));
        let b2 = g.param(store, &p("ln2.b"));
        let f_in = g.layer_norm(h, g2, b2, cfg.layer_norm_eps);
        let f = linear(g, store, f_in, &p("ff.w1"), &p("ff.b1"));
        let f = g.relu(f);
        let f = linear(g, store, f, &p("ff.w2"), &p("ff.b2"));
        h = g.add(h, f);
    }
    let gf = g.param(store, "final.ln.g");
    let bf = g.param(store, "final.ln.b");
    g.layer_norm(h, gf, bf, cfg.layer_norm_eps)
}

/// Project shot features into token space. Returns (visual tokens,
/// audio tokens) before positions/modal offsets, each (S, d_model),
/// present when its modality is enabled.
fn modality_tokens(
    g: &mut Graph,
    store: &ParamStore,
    cfg: &ModelConfig,
    feats: &VideoFeatures,
    n_shots: usize,
) -> (Option<NodeId>, Option<NodeId>) {
    let vis = cfg.use_visual.then(|| {
        let vis_in = g.input2(
            feats
                .visual
                .slice(ndarray::s![..n_shots, ..])
                .to_owned(),
        );
        linear(g, store, vis_in, "proj_visual.w", "proj_visual.b")
    });
    if !cfg.use_audio {
        return (vis, None);
    }
    assert!(
        feats.mels.len() >= n_shots,
        "need one mel image per shot ({} < {n_shots})",
        feats.mels.len()
    );
    let (mb, mf) = feats.mels[0].dim();
    let mut mel_batch = ArrayD::<f32>::zeros(IxDyn(&[n_shots, 1, mb, mf]));
    for (s, mel) in feats.mels.iter().take(n_shots).enumerate() {
        assert_eq!(mel.dim(), (mb, mf), "ragged mel batch");
        mel_batch
            .index_axis_mut(Axis(0), s)
            .index_axis_mut(Axis(0), 0)
            .assign(mel);
    }
    let mel_in = g.input(mel_batch);
    let aud_feats = AudioEncoder::forward(g, store, cfg, mel_in);
    let aud = linear(g, store, aud_feats, "proj_audio.w", "proj_audio.b");
    (vis, Some(aud))
}

/// Build queries for every transition point of one video. Videos longer
/// than the budget are truncated to the first `max_transitions` points.
/// Returns the (V, d_matching) query node.
pub fn recommender_forward(
    g: &mut Graph,
    store: &ParamStore,
    cfg: &ModelConfig,
    feats: &VideoFeatures,
) -> NodeId {
    forward_with_pad(g, store, cfg, feats, 0.0)
}

/// Same, with an explicit fill value for padding tokens. Padding is
/// masked out of attention and never selected into queries, so this
/// value must not matter; tests exercise exactly that.
pub fn forward_with_pad(
    g: &mut Graph,
    store: &ParamStore,
    cfg: &ModelConfig,
    feats: &VideoFeatures,
    pad_value: f32,
) -> NodeId {
    let n_shots = feats.n_shots();
    assert!(n_shots >= 2, "a video needs at least two shots");
    let s = n_shots.min(cfg.max_shots());
    let v = s - 1;
    let dm = cfg.d_model;

    let (vis_raw, aud_raw) = modality_tokens(g, store, cfg, feats, s);

    let both = cfg.n_modalities() == 2;

    if cfg.use_context {
        let pos_all = g.param(store, "pos.embed");
        let shot_idx: Vec<usize> = (0..s).collect();
        let pos = g.rows_select(pos_all, &shot_idx);
        let mut parts = Vec::with_capacity(2);
        for (which, raw) in [vis_raw, aud_raw].into_iter().enumerate() {
            let Some(raw) = raw else { continue };
            let mut tok = g.add(raw, pos);
            if both {
                let modal_all = g.param(store, "modal.embed");
                let m = g.rows_select(modal_all, &vec![which; s]);
                tok = g.add(tok, m);
            }
            parts.push(tok);
        }
        let real = g.concat_rows(&parts);
        let n_real = parts.len() * s;
        let n_pad = cfg.max_tokens() - n_real;
        let tokens = if n_pad > 0 {
            let pad = g.input2(Array2::from_elem((n_pad, dm), pad_value));
            g.concat_rows(&[real, pad])
        } else {
            real
        };
        let mut mask = vec![true; n_real];
        mask.extend(std::iter::repeat(false).take(cfg.max_tokens() - n_real));
        let enc = transformer_encode(g, store, cfg, tokens, &mask);

        let mut sel = Vec::with_capacity(v * cfg.tokens_per_query());
        for t in 0..v {
            for block in 0..parts.len() {
                sel.push(block * s + t);
                sel.push(block * s + t + 1);
            }
        }
        let picked = g.rows_select(enc, &sel);
        let stacked = g.reshape(picked, &[v, cfg.tokens_per_query() * dm]);
        linear(g, store, stacked, "head.w", "head.b")
    } else {
        // Context ablation: each transition point sees only its own two
        // shots, re-positioned at 0 and 1.
        let pos_all = g.param(store, "pos.embed");
        let pos = g.rows_select(pos_all, &[0, 1]);
        let mut queries = Vec::with_capacity(v);
        for t in 0..v {
            let mut parts = Vec::with_capacity(2);
            for (which, raw) in [vis_raw, aud_raw].into_iter().enumerate() {
                let Some(raw) = raw else { continue };
                let pair = g.rows_select(raw, &[t, t + 1]);
                let mut tok = g.add(pair, pos);
                if both {
                    let modal_all = g.param(store, "modal.embed");
                    let m = g.rows_select(modal_all, &[which, which]);
                    tok = g.add(tok, m);
                }
                parts.push(tok);
            }
            let seq = g.concat_rows(&parts);
            let mask = vec![true; parts.len() * 2];
            let enc = transformer_encode(g, store, cfg, seq, &mask);
            let n_tok = cfg.tokens_per_query();
            let all: Vec<usize> = (0..n_tok).collect();
            let picked = g.rows_select(enc, &all);
            queries.push(g.reshape(picked, &[1, n_tok * dm]));
        }
        let stacked = g.concat_rows(&queries);
        linear(g, store, stacked, "head.w", "head.b")
    }
}

/// Dot-product scores of queries against the registered table, through
/// the learned projections when the config has them. (V, n_categories).
pub fn score_against_table(
    g: &mut Graph,
    store: &ParamStore,
    cfg: &ModelConfig,
    queries: NodeId,
) -> NodeId {
    let table = g.param(store, TABLE_PARAM);
    if cfg.learnable_projections {
        let pq = g.param(store, "proj_query.w");
        let pt = g.param(store, "proj_table.w");
        let q = g.matmul(queries, pq);
        let t = g.matmul(table, pt);
        let tt = g.transpose(t);
        g.matmul(q, tt)
    } else {
        let tt = g.transpose(table);
        g.matmul(queries, tt)
    }
}

/// Categories ordered best-first; equal scores break toward the
/// smaller id so rankings are reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRecommendation {
    pub order: Vec<usize>,
    pub scores: Vec<f32>,
}

impl RankedRecommendation {
    /// 1-based rank of a category in this recommendation.
    pub fn rank_of(&self, category: usize) -> usize {
        self.order
            .iter()
            .position(|&c| c == category)
            .map(|p| p + 1)
            .expect("category present in ranking")
    }
}

pub fn rank_scores(scores: &[f32]) -> RankedRecommendation {
    assert!(scores.iter().all(|s| s.is_finite()), "non-finite score");
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores compare")
            .then(a.cmp(&b))
    });
    RankedRecommendation {
        order,
        scores: scores.to_vec(),
    }
}
