//! Visual (3-D conv) and audio (2-D conv over mel) feature encoders.
//! Both register named parameters into a `ParamStore` and build their
//! forward pass on a `Graph`, so the same code serves the clip
//! classifier and the recommender.

use super::config::ModelConfig;
use crate::nn::{init_rng, kaiming_normal, xavier_uniform, zeros, Graph, NodeId, ParamStore};

/// Three conv3d stages with fixed strides (1,2,2), (2,2,2), (2,2,2),
/// kernel 3, pad 1, relu after each, then global mean pooling.
/// (N, 3, F, H, W) -> (N, visual_channels[2]).
pub struct VisualEncoder;

impl VisualEncoder {
    pub fn register(store: &mut ParamStore, cfg: &ModelConfig, seed: u64) {
        let mut cin = 3usize;
        for (i, &cout) in cfg.visual_channels.iter().enumerate() {
            let name = format!("visual.conv{}.w", i + 1);
            let fan_in = cin * 27;
            let mut rng = init_rng(seed, &name);
            store.insert(&name, kaiming_normal(&[cout, cin, 3, 3, 3], fan_in, &mut rng));
            store.insert(&format!("visual.conv{}.b", i + 1), zeros(&[cout]));
            cin = cout;
        }
    }

    pub fn forward(g: &mut Graph, store: &ParamStore, cfg: &ModelConfig, x: NodeId) -> NodeId {
        let strides = [(1, 2, 2), (2, 2, 2), (2, 2, 2)];
        let mut h = x;
        for i in 0..cfg.visual_channels.len() {
            let w = g.param(store, &format!("visual.conv{}.w", i + 1));
            let b = g.param(store, &format!("visual.conv{}.b", i + 1));
            let c = g.conv3d(h, w, b, strides[i], (1, 1, 1));
            h = g.relu(c);
        }
        g.global_mean_pool(h)
    }
}

/// Two strided conv2d stages over the log-mel image, relu, global mean
/// pool, then a linear layer to `d_audio`.
/// (N, 1, bands, frames) -> (N, d_audio).
pub struct AudioEncoder;

impl AudioEncoder {
    pub fn register(store: &mut ParamStore, cfg: &ModelConfig, seed: u64) {
        let mut cin = 1usize;
        for (i, &cout) in cfg.audio_channels.iter().enumerate() {
            let name = format!("audio.conv{}.w", i + 1);
            let fan_in = cin * 9;
            let mut rng = init_rng(seed, &name);
            store.insert(&name, kaiming_normal(&[cout, cin, 3, 3], fan_in, &mut rng));
            store.insert(&format!("audio.conv{}.b", i + 1), zeros(&[cout]));
            cin = cout;
        }
        let mut rng = init_rng(seed, "audio.fc.w");
        store.insert(
            "audio.fc.w",
            xavier_uniform(&[cin, cfg.d_audio], cin, cfg.d_audio, &mut rng),
        );
        store.insert("audio.fc.b", zeros(&[cfg.d_audio]));
    }

    pub fn forward(g: &mut Graph, store: &ParamStore, cfg: &ModelConfig, x: NodeId) -> NodeId {
        let mut h = x;
        for i in 0..cfg.audio_channels.len() {
            let w = g.param(store, &format!("audio.conv{}.w", i + 1));
            let b = g.param(store, &format!("audio.conv{}.b", i + 1));
            let c = g.conv2d(h, w, b, (2, 2), (1, 1));
            h = g.relu(c);
        }
        let pooled = g.global_mean_pool(h);
        let w = g.param(store, "audio.fc.w");
        let b = g.param(store, "audio.fc.b");
        let lin = g.matmul(pooled, w);
        g.add_bias(lin, b)
    }
}
