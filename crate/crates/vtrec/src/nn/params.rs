//! Named parameter storage, gradient accumulation, seeded initializers,
//! Adam, and the binary checkpoint container.
//!
//! Parameters are owned by a [`ParamStore`] and referenced by name from
//! graphs. A frozen parameter still participates in forward passes but
//! backward never records a gradient for it — downstream code can assert
//! the entry is absent, which is a stronger statement than "is zero".

use crate::util::seeded_rng;
use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("no parameter named `{0}`")]
    UnknownParam(String),
    #[error("parameter `{0}` already exists")]
    DuplicateParam(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse: {0}")]
    BadCheckpoint(String),
}

#[derive(Debug, Clone)]
pub struct Param {
    pub value: ArrayD<f32>,
    pub frozen: bool,
}

/// Name-keyed parameter set. BTreeMap so iteration order (and therefore
/// every downstream reduction) is deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    map: BTreeMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: ArrayD<f32>) {
        assert!(
            self.map
                .insert(
                    name.to_string(),
                    Param {
                        value,
                        frozen: false
                    }
                )
                .is_none(),
            "duplicate parameter `{name}`"
        );
    }

    pub fn get(&self, name: &str) -> &Param {
        self.map
            .get(name)
            .unwrap_or_else(|| panic!("no parameter named `{name}`"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Param {
        self.map
            .get_mut(name)
            .unwrap_or_else(|| panic!("no parameter named `{name}`"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    /// Freezes (or thaws) every parameter whose name starts with `prefix`.
    /// Returns how many were touched.
    pub fn set_frozen(&mut self, prefix: &str, frozen: bool) -> usize {
        let mut n = 0;
        for (name, p) in self.map.iter_mut() {
            if name.starts_with(prefix) {
                p.frozen = frozen;
                n += 1;
            }
        }
        n
    }

    pub fn names(&self) -> Vec<&str> {
        self.map.keys().map(String::as_str).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn total_elements(&self) -> usize {
        self.map.values().map(|p| p.value.len()).sum()
    }
}

/// Gradient set produced by one backward pass, keyed like the store.
/// Frozen parameters never appear.
#[derive(Debug, Clone, Default)]
pub struct Grads {
    map: BTreeMap<String, ArrayD<f32>>,
}

impl Grads {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, name: &str, grad: &ArrayD<f32>) {
        match self.map.get_mut(name) {
            Some(g) => *g += grad,
            None => {
                self.map.insert(name.to_string(), grad.clone());
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&ArrayD<f32>> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArrayD<f32>)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Sum of squared entries across all gradients — the trace the
    /// training loop logs to show signal reaches every trainable layer.
    pub fn global_norm(&self) -> f32 {
        self.map
            .values()
            .map(|g| g.iter().map(|v| v * v).sum::<f32>())
            .sum::<f32>()
            .sqrt()
    }

    /// Merge another gradient set into this one (summing overlaps).
    pub fn merge(&mut self, other: &Grads) {
        for (name, g) in other.iter() {
            self.accumulate(name, g);
        }
    }

    /// Scale every gradient in place (used to average over micro-batches).
    pub fn scale(&mut self, s: f32) {
        for g in self.map.values_mut() {
            g.mapv_inplace(|v| v * s);
        }
    }
}

// ---- initializers ------------------------------------------------------

pub fn init_rng(seed: u64, name: &str) -> ChaCha8Rng {
    seeded_rng(seed, &format!("init/{name}"))
}

/// He initialization for relu stacks: N(0, sqrt(2/fan_in)).
pub fn kaiming_normal(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> ArrayD<f32> {
    let std = (2.0 / fan_in as f32).sqrt();
    gaussian(shape, 0.0, std, rng)
}

/// Xavier/Glorot uniform: U(-l, l) with l = sqrt(6/(fan_in+fan_out)).
pub fn xavier_uniform(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut ChaCha8Rng,
) -> ArrayD<f32> {
    let limit = (6.0 / (fan_in + fan_out) as f32).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<f32> = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
    ArrayD::from_shape_vec(IxDyn(shape), data).expect("shape matches")
}

pub fn gaussian(shape: &[usize], mean: f32, std: f32, rng: &mut ChaCha8Rng) -> ArrayD<f32> {
    let n: usize = shape.iter().product();
    // Box-Muller keeps us off the distribution crates for one function.
    let mut data = Vec::with_capacity(n);
    while data.len() < n {
        let u1: f32 = rng.random_range(f32::EPSILON..1.0);
        let u2: f32 = rng.random_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f32::consts::PI * u2).sin_cos();
        data.push(mean + std * r * c);
        if data.len() < n {
            data.push(mean + std * r * s);
        }
    }
    ArrayD::from_shape_vec(IxDyn(shape), data).expect("shape matches")
}

pub fn zeros(shape: &[usize]) -> ArrayD<f32> {
    ArrayD::zeros(IxDyn(shape))
}

/// Identity matrix as a flat dynamic array (square projections start as
/// a no-op and learn to deform).
pub fn identity(n: usize) -> ArrayD<f32> {
    let mut m = ArrayD::zeros(IxDyn(&[n, n]));
    for i in 0..n {
        m[[i, i]] = 1.0;
    }
    m
}

// ---- Adam --------------------------------------------------------------

/// Adam with bias correction; (0.9, 0.999, 1e-8) defaults.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    t: u64,
    m: BTreeMap<String, ArrayD<f32>>,
    v: BTreeMap<String, ArrayD<f32>>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }
}

impl Adam {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update over every non-frozen parameter with a gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads, lr: f32) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, grad) in grads.iter() {
            let param = store.get_mut(name);
            if param.frozen {
                continue;
            }
            let m = self
                .m
                .entry(name.to_string())
                .or_insert_with(|| ArrayD::zeros(grad.raw_dim()));
            let v = self
                .v
                .entry(name.to_string())
                .or_insert_with(|| ArrayD::zeros(grad.raw_dim()));
            azip_update(m, grad, self.beta1);
            azip_update_sq(v, grad, self.beta2);
            for ((pv, mv), vv) in param.value.iter_mut().zip(m.iter()).zip(v.iter()) {
                let mhat = mv / bc1;
                let vhat = vv / bc2;
                *pv -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

fn azip_update(m: &mut ArrayD<f32>, g: &ArrayD<f32>, beta: f32) {
    for (mv, gv) in m.iter_mut().zip(g.iter()) {
        *mv = beta * *mv + (1.0 - beta) * gv;
    }
}

fn azip_update_sq(v: &mut ArrayD<f32>, g: &ArrayD<f32>, beta: f32) {
    for (vv, gv) in v.iter_mut().zip(g.iter()) {
        *vv = beta * *vv + (1.0 - beta) * gv * gv;
    }
}

// ---- checkpoints ---------------------------------------------------------

const CKPT_MAGIC: &[u8; 8] = b"VTRCKPT1";

#[derive(serde::Serialize, serde::Deserialize)]
struct CkptEntry {
    name: String,
    shape: Vec<usize>,
    frozen: bool,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CkptHeader {
    params: Vec<CkptEntry>,
    /// Free-form metadata the caller wants to ride along (configs, epoch
    /// counters). Opaque here.
    meta: serde_json::Value,
}

pub fn save_checkpoint(
    store: &ParamStore,
    meta: &serde_json::Value,
    path: &Path,
) -> Result<(), NnError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(CKPT_MAGIC)?;
    let header = CkptHeader {
        params: store
            .iter()
            .map(|(name, p)| CkptEntry {
                name: name.to_string(),
                shape: p.value.shape().to_vec(),
                frozen: p.frozen,
            })
            .collect(),
        meta: meta.clone(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| NnError::BadCheckpoint(e.to_string()))?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for (_, p) in store.iter() {
        for v in p.value.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ParamStore, serde_json::Value), NnError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CKPT_MAGIC {
        return Err(NnError::BadCheckpoint(format!(
            "{}: wrong magic",
            path.display()
        )));
    }
    let mut len_buf = [0u8; 4];
    r.read_exact(&mut len_buf)?;
    let header_len = u32::from_le_bytes(len_buf) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: CkptHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| NnError::BadCheckpoint(e.to_string()))?;
    let mut store = ParamStore::new();
    for entry in &header.params {
        let n: usize = entry.shape.iter().product();
        let mut buf = vec![0u8; n * 4];
        r.read_exact(&mut buf).map_err(|_| {
            NnError::BadCheckpoint(format!("{}: truncated blob for {}", path.display(), entry.name))
        })?;
        let data: Vec<f32> = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let value = ArrayD::from_shape_vec(IxDyn(&entry.shape), data)
            .map_err(|e| NnError::BadCheckpoint(e.to_string()))?;
        store.insert(&entry.name, value);
        store.get_mut(&entry.name).frozen = entry.frozen;
    }
    Ok((store, header.meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::ArrayD;

    #[test]
    fn store_freeze_by_prefix() {
        let mut store = ParamStore::new();
        store.insert("visual.s1.w", zeros(&[2, 2]));
        store.insert("visual.s2.w", zeros(&[2]));
        store.insert("audio.fc.w", zeros(&[3]));
        assert_eq!(store.set_frozen("visual.", true), 2);
        assert!(store.get("visual.s1.w").frozen);
        assert!(store.get("visual.s2.w").frozen);
        assert!(!store.get("audio.fc.w").frozen);
        assert_eq!(store.set_frozen("visual.", false), 2);
        assert!(!store.get("visual.s1.w").frozen);
    }

    #[test]
    fn grads_accumulate_and_norm() {
        let mut g = Grads::new();
        let ones = ArrayD::from_elem(IxDyn(&[2, 2]), 1.0f32);
        g.accumulate("w", &ones);
        g.accumulate("w", &ones);
        assert_eq!(g.get("w").unwrap()[[0, 0]], 2.0);
        // norm = sqrt(4 * 2^2) = 4
        assert!((g.global_norm() - 4.0).abs() < 1e-6);
        let mut h = Grads::new();
        h.accumulate("w", &ones);
        h.accumulate("b", &ones);
        g.merge(&h);
        assert_eq!(g.get("w").unwrap()[[0, 0]], 3.0);
        assert_eq!(g.get("b").unwrap()[[1, 1]], 1.0);
        g.scale(0.5);
        assert_eq!(g.get("w").unwrap()[[0, 0]], 1.5);
    }

    #[test]
    fn initializers_are_seeded_and_sized() {
        let mut r1 = init_rng(7, "layer");
        let mut r2 = init_rng(7, "layer");
        let a = kaiming_normal(&[64, 32], 32, &mut r1);
        let b = kaiming_normal(&[64, 32], 32, &mut r2);
        assert_eq!(a, b);
        let mut r3 = init_rng(7, "other");
        let c = kaiming_normal(&[64, 32], 32, &mut r3);
        assert_ne!(a, c);
        // Std roughly sqrt(2/32) = 0.25.
        let std = (a.iter().map(|v| v * v).sum::<f32>() / a.len() as f32).sqrt();
        assert!((std - 0.25).abs() < 0.05, "std {std}");
        let i = identity(4);
        assert_eq!(i[[2, 2]], 1.0);
        assert_eq!(i[[2, 1]], 0.0);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        // Param x in R^4, loss = 0.5 * ||x - target||^2, grad = x - target.
        let mut store = ParamStore::new();
        let target = ArrayD::from_shape_vec(IxDyn(&[4]), vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        store.insert("x", zeros(&[4]));
        let mut adam = Adam::new();
        for _ in 0..800 {
            let x = &store.get("x").value;
            let grad = x - &target;
            let mut grads = Grads::new();
            grads.accumulate("x", &grad);
            adam.step(&mut store, &grads, 0.05);
        }
        let x = &store.get("x").value;
        for (a, b) in x.iter().zip(target.iter()) {
            assert!((a - b).abs() < 1e-2, "{a} vs {b}");
        }
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        // With bias correction the first update is lr * sign(grad) up to eps.
        let mut store = ParamStore::new();
        store.insert("x", zeros(&[2]));
        let mut grads = Grads::new();
        grads.accumulate(
            "x",
            &ArrayD::from_shape_vec(IxDyn(&[2]), vec![0.3f32, -4.0]).unwrap(),
        );
        let mut adam = Adam::new();
        adam.step(&mut store, &grads, 0.01);
        let x = &store.get("x").value;
        assert!((x[[0]] + 0.01).abs() < 1e-4, "{}", x[[0]]);
        assert!((x[[1]] - 0.01).abs() < 1e-4, "{}", x[[1]]);
    }

    #[test]
    fn adam_skips_frozen() {
        let mut store = ParamStore::new();
        store.insert("x", zeros(&[2]));
        store.set_frozen("x", true);
        let mut grads = Grads::new();
        grads.accumulate("x", &ArrayD::from_elem(IxDyn(&[2]), 1.0f32));
        let mut adam = Adam::new();
        adam.step(&mut store, &grads, 0.1);
        assert_eq!(store.get("x").value.iter().sum::<f32>(), 0.0);
    }

    #[test]
    fn checkpoint_round_trips() {
        let mut store = ParamStore::new();
        let mut rng = init_rng(3, "ckpt");
        store.insert("a.w", kaiming_normal(&[3, 5], 5, &mut rng));
        store.insert("b.w", gaussian(&[2, 2, 2], 0.0, 1.0, &mut rng));
        store.set_frozen("a.", true);
        let meta = serde_json::json!({"epoch": 7, "tag": "test"});
        let path = std::env::temp_dir().join("vtrec-ckpt-test.bin");
        save_checkpoint(&store, &meta, &path).unwrap();
        let (loaded, meta2) = load_checkpoint(&path).unwrap();
        assert_eq!(meta2["epoch"], 7);
        assert_eq!(loaded.len(), 2);
        assert!(loaded.get("a.w").frozen);
        assert!(!loaded.get("b.w").frozen);
        assert_eq!(loaded.get("a.w").value, store.get("a.w").value);
        assert_eq!(loaded.get("b.w").value, store.get("b.w").value);
        std::fs::remove_file(&path).unwrap();

        // Corrupt magic is rejected.
        let bad = std::env::temp_dir().join("vtrec-ckpt-bad.bin");
        std::fs::write(&bad, b"NOTCKPT_....").unwrap();
        assert!(load_checkpoint(&bad).is_err());
        std::fs::remove_file(&bad).unwrap();
    }
}
