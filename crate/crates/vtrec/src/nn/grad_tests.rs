//! Central finite-difference checks for every backward rule.
//!
//! Each test stores the tensors under test as parameters, rebuilds the
//! same graph from a perturbed store, and compares the analytic gradient
//! to (f(x+e) - f(x-e)) / 2e entry by entry. f32 arithmetic bounds how
//! tight this can be; eps and tolerances below are chosen so a correct
//! rule passes with an order of magnitude to spare and a wrong sign or
//! dropped term fails loudly.

use super::*;
use ndarray::{ArrayD, IxDyn};

const EPS: f32 = 1e-2;
const TOL: f32 = 2e-2;

fn rel_err(a: f32, n: f32) -> f32 {
    (a - n).abs() / (a.abs().max(n.abs()) + 1e-3)
}

/// Checks d(loss)/d(param `name`) against central differences, every
/// element (parameters in these tests are small).
fn fd_check(store: &ParamStore, name: &str, loss_fn: &dyn Fn(&ParamStore) -> f32, eps: f32) {
    let analytic = {
        let grads = grads_of(store, loss_fn);
        grads
            .get(name)
            .unwrap_or_else(|| panic!("no grad for {name}"))
            .clone()
    };
    // Index in logical order: backward may hand back non-standard
    // memory layouts (e.g. transposed views), so slices are off limits.
    let n = store.get(name).value.len();
    for flat_idx in 0..n {
        let mut plus = store.clone();
        let mut minus = store.clone();
        bump(&mut plus, name, flat_idx, eps);
        bump(&mut minus, name, flat_idx, -eps);
        let numeric = (loss_fn(&plus) - loss_fn(&minus)) / (2.0 * eps);
        let a = *analytic.iter().nth(flat_idx).unwrap();
        assert!(
            rel_err(a, numeric) < TOL,
            "{name}[{flat_idx}]: analytic {a} vs numeric {numeric}"
        );
    }
}

fn bump(store: &mut ParamStore, name: &str, flat_idx: usize, eps: f32) {
    let p = store.get_mut(name);
    *p.value.iter_mut().nth(flat_idx).unwrap() += eps;
}

/// One backward pass through the closure's graph. The closure must call
/// `tape.backward` itself — instead we rebuild here, so tests share a
/// single builder for value and grads.
fn grads_of(store: &ParamStore, _loss_fn: &dyn Fn(&ParamStore) -> f32) -> Grads {
    // Each test sets BUILDER to its graph constructor via thread local.
    BUILDER.with(|b| {
        let builder = b.borrow();
        let builder = builder.as_ref().expect("builder installed");
        let mut g = Graph::new();
        let loss = builder(&mut g, store);
        g.backward(loss)
    })
}

thread_local! {
    #[allow(clippy::type_complexity)]
    static BUILDER: std::cell::RefCell<Option<Box<dyn Fn(&mut Graph, &ParamStore) -> NodeId>>> =
        const { std::cell::RefCell::new(None) };
}

/// Installs a graph builder and runs FD checks for the named params.
fn check_op(
    store: ParamStore,
    names: &[&str],
    builder: impl Fn(&mut Graph, &ParamStore) -> NodeId + 'static,
) {
    check_op_eps(store, names, EPS, builder)
}

fn check_op_eps(
    store: ParamStore,
    names: &[&str],
    eps: f32,
    builder: impl Fn(&mut Graph, &ParamStore) -> NodeId + 'static,
) {
    BUILDER.with(|b| *b.borrow_mut() = Some(Box::new(builder)));
    let loss_fn = |s: &ParamStore| -> f32 {
        BUILDER.with(|b| {
            let builder = b.borrow();
            let builder = builder.as_ref().unwrap();
            let mut g = Graph::new();
            let loss = builder(&mut g, s);
            g.scalar(loss)
        })
    };
    for name in names {
        fd_check(&store, name, &loss_fn, eps);
    }
    BUILDER.with(|b| *b.borrow_mut() = None);
}

fn rng(label: &str) -> rand_chacha::ChaCha8Rng {
    init_rng(40, label)
}

/// Gaussian values nudged away from zero so relu kinks don't sit under
/// the FD probe.
fn off_zero(shape: &[usize], label: &str) -> ArrayD<f32> {
    let mut r = rng(label);
    gaussian(shape, 0.0, 1.0, &mut r).mapv(|v| if v.abs() < 0.15 { v + 0.3 } else { v })
}

#[test]
fn grad_matmul_bias_relu() {
    let mut store = ParamStore::new();
    store.insert("x", off_zero(&[3, 4], "x"));
    store.insert("w", off_zero(&[4, 5], "w"));
    store.insert("b", off_zero(&[5], "b"));
    check_op(store, &["x", "w", "b"], |g, s| {
        let x = g.param(s, "x");
        let w = g.param(s, "w");
        let b = g.param(s, "b");
        let h = g.matmul(x, w);
        let h = g.add_bias(h, b);
        let h = g.relu(h);
        g.mean_all(h)
    });
}

#[test]
fn grad_transpose_reshape_scale() {
    let mut store = ParamStore::new();
    store.insert("x", off_zero(&[3, 4], "x2"));
    check_op(store, &["x"], |g, s| {
        let x = g.param(s, "x");
        let t = g.transpose(x);
        let r = g.reshape(t, &[2, 6]);
        let sc = g.scale(r, 1.7);
        let sh = g.add_scalar(sc, 0.3);
        let m = g.mul(sh, sh);
        g.mean_all(m)
    });
}

#[test]
fn grad_sub_and_mul() {
    let mut store = ParamStore::new();
    store.insert("a", off_zero(&[2, 3], "a"));
    store.insert("b", off_zero(&[2, 3], "b"));
    check_op(store, &["a", "b"], |g, s| {
        let a = g.param(s, "a");
        let b = g.param(s, "b");
        let d = g.sub(a, b);
        let m = g.mul(d, a);
        g.mean_all(m)
    });
}

#[test]
fn grad_global_mean_pool() {
    let mut store = ParamStore::new();
    store.insert("x", off_zero(&[2, 3, 2, 4, 4], "pool"));
    check_op(store, &["x"], |g, s| {
        let x = g.param(s, "x");
        let p = g.global_mean_pool(x);
        let sq = g.mul(p, p);
        g.mean_all(sq)
    });
}

#[test]
fn grad_conv3d() {
    let mut store = ParamStore::new();
    store.insert("x", off_zero(&[2, 2, 3, 5, 5], "cx"));
    store.insert("w", off_zero(&[3, 2, 3, 3, 3], "cw").mapv(|v| v * 0.3));
    store.insert("b", off_zero(&[3], "cb"));
    check_op(store, &["x", "w", "b"], |g, s| {
        let x = g.param(s, "x");
        let w = g.param(s, "w");
        let b = g.param(s, "b");
        let y = g.conv3d(x, w, b, (1, 2, 2), (1, 1, 1));
        let p = g.global_mean_pool(y);
        let sq = g.mul(p, p);
        g.mean_all(sq)
    });
}

#[test]
fn grad_conv2d() {
    let mut store = ParamStore::new();
    store.insert("x", off_zero(&[2, 1, 6, 7], "c2x"));
    store.insert("w", off_zero(&[3, 1, 3, 3], "c2w").mapv(|v| v * 0.3));
    store.insert("b", off_zero(&[3], "c2b"));
    check_op(store, &["x", "w", "b"], |g, s| {
        let x = g.param(s, "x");
        let w = g.param(s, "w");
        let b = g.param(s, "b");
        let y = g.conv2d(x, w, b, (2, 2), (1, 1));
        let p = g.global_mean_pool(y);
        let sq = g.mul(p, p);
        g.mean_all(sq)
    });
}

#[test]
fn grad_layer_norm() {
    let mut store = ParamStore::new();
    store.insert("x", off_zero(&[3, 6], "lnx"));
    store.insert("gamma", off_zero(&[6], "lng"));
    store.insert("beta", off_zero(&[6], "lnb"));
    check_op_eps(store, &["x", "gamma", "beta"], 5e-3, |g, s| {
        let x = g.param(s, "x");
        let gamma = g.param(s, "gamma");
        let beta = g.param(s, "beta");
        let y = g.layer_norm(x, gamma, beta, 1e-5);
        let sq = g.mul(y, y);
        g.mean_all(sq)
    });
}

#[test]
fn grad_masked_softmax() {
    let mut store = ParamStore::new();
    store.insert("x", off_zero(&[3, 5], "smx"));
    let mask = [true, true, false, true, false];
    check_op(store.clone(), &["x"], move |g, s| {
        let x = g.param(s, "x");
        let sm = g.masked_softmax_rows(x, &mask);
        let sq = g.mul(sm, sm);
        g.mean_all(sq)
    });
    // Masked columns must receive exactly zero gradient.
    let mut g = Graph::new();
    let x = g.param(&store, "x");
    let sm = g.masked_softmax_rows(x, &mask);
    let sq = g.mul(sm, sm);
    let loss = g.mean_all(sq);
    let grads = g.backward(loss);
    let dx = grads.get("x").unwrap();
    for i in 0..3 {
        assert_eq!(dx[[i, 2]], 0.0);
        assert_eq!(dx[[i, 4]], 0.0);
        assert_ne!(dx[[i, 0]], 0.0);
    }
}

#[test]
fn grad_l2_normalize() {
    let mut store = ParamStore::new();
    store.insert("x", off_zero(&[4, 5], "l2x"));
    store.insert("w", off_zero(&[5, 3], "l2w"));
    check_op(store, &["x", "w"], |g, s| {
        let x = g.param(s, "x");
        let w = g.param(s, "w");
        let n = g.l2_normalize_rows(x, 1e-6);
        let y = g.matmul(n, w);
        let sq = g.mul(y, y);
        g.mean_all(sq)
    });
}

#[test]
fn grad_cross_entropy() {
    let mut store = ParamStore::new();
    store.insert("logits", off_zero(&[4, 6], "cel"));
    let targets = [2usize, 0, 5, 3];
    check_op(store.clone(), &["logits"], move |g, s| {
        let l = g.param(s, "logits");
        g.cross_entropy_mean(l, &targets)
    });
    // Closed form: d = (softmax - onehot) / N.
    let mut g = Graph::new();
    let l = g.param(&store, "logits");
    let loss = g.cross_entropy_mean(l, &targets);
    let grads = g.backward(loss);
    let dl = grads.get("logits").unwrap();
    let lv = store.get("logits").value.clone();
    let lv2 = lv.into_dimensionality::<ndarray::Ix2>().unwrap();
    for i in 0..4 {
        let row = lv2.row(i);
        let mx = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let exps: Vec<f32> = row.iter().map(|v| (v - mx).exp()).collect();
        let denom: f32 = exps.iter().sum();
        for j in 0..6 {
            let p = exps[j] / denom;
            let expect = (p - if targets[i] == j { 1.0 } else { 0.0 }) / 4.0;
            assert!(
                (dl[[i, j]] - expect).abs() < 1e-5,
                "({i},{j}): {} vs {expect}",
                dl[[i, j]]
            );
        }
    }
}

#[test]
fn grad_triplet_shaped_loss() {
    // The retrieval loss skeleton: scores (V, N), hinge against the
    // per-row correct column, averaged over the off-target columns.
    let mut store = ParamStore::new();
    store.insert("q", off_zero(&[3, 4], "tq"));
    store.insert("e", off_zero(&[5, 4], "te"));
    let labels = [1usize, 4, 0];
    check_op(store, &["q", "e"], move |g, s| {
        let q = g.param(s, "q");
        let e = g.param(s, "e");
        let et = g.transpose(e);
        let scores = g.matmul(q, et);
        let pos = g.gather_per_row(scores, &labels);
        let diff = g.sub_col_broadcast(scores, pos);
        let marged = g.add_scalar(diff, 0.3);
        let hinged = g.relu(marged);
        let m = g.mean_all(hinged);
        // mean over all N columns -> rescale to the (N-1) convention:
        // (N * mean - margin) / (N - 1).
        let num = g.scale(m, 5.0);
        let shifted = g.add_scalar(num, -0.3);
        g.scale(shifted, 1.0 / 4.0)
    });
}

#[test]
fn grad_concat_select_slice() {
    let mut store = ParamStore::new();
    store.insert("a", off_zero(&[2, 3], "ka"));
    store.insert("b", off_zero(&[1, 3], "kb"));
    store.insert("c", off_zero(&[3, 2], "kc"));
    check_op(store, &["a", "b", "c"], |g, s| {
        let a = g.param(s, "a");
        let b = g.param(s, "b");
        let c = g.param(s, "c");
        let rows = g.concat_rows(&[a, b]); // (3, 3)
        let wide = g.concat_cols(&[rows, c]); // (3, 5)
        // Select with a repeated row: backward must accumulate.
        let sel = g.rows_select(wide, &[0, 2, 2, 1]);
        let sl = g.slice_cols(sel, 1, 4);
        let sq = g.mul(sl, sl);
        g.mean_all(sq)
    });
}

#[test]
fn grad_attention_block_end_to_end() {
    // One full pre-LN attention block with padding: composition check
    // over every parameter kind at once.
    let t = 5usize; // tokens, last one padding
    let d = 8usize;
    let dk = 4usize;
    let mask = [true, true, true, true, false];
    let mut store = ParamStore::new();
    let mut r = rng("attn");
    store.insert("x", gaussian(&[t, d], 0.0, 1.0, &mut r));
    store.insert("wq", gaussian(&[d, dk], 0.0, 0.5, &mut r));
    store.insert("wk", gaussian(&[d, dk], 0.0, 0.5, &mut r));
    store.insert("wv", gaussian(&[d, dk], 0.0, 0.5, &mut r));
    store.insert("wo", gaussian(&[dk, d], 0.0, 0.5, &mut r));
    store.insert("g1", ArrayD::from_elem(IxDyn(&[d]), 1.0f32));
    store.insert("b1", zeros(&[d]));
    check_op_eps(
        store,
        &["x", "wq", "wk", "wv", "wo", "g1", "b1"],
        5e-3,
        move |g, s| {
            let x = g.param(s, "x");
            let g1 = g.param(s, "g1");
            let b1 = g.param(s, "b1");
            let xn = g.layer_norm(x, g1, b1, 1e-5);
            let wq = g.param(s, "wq");
            let wk = g.param(s, "wk");
            let wv = g.param(s, "wv");
            let wo = g.param(s, "wo");
            let q = g.matmul(xn, wq);
            let k = g.matmul(xn, wk);
            let v = g.matmul(xn, wv);
            let kt = g.transpose(k);
            let scores = g.matmul(q, kt);
            let scaled = g.scale(scores, 1.0 / (dk as f32).sqrt());
            let attn = g.masked_softmax_rows(scaled, &mask);
            let ctx = g.matmul(attn, v);
            let out = g.matmul(ctx, wo);
            let res = g.add(x, out);
            let sq = g.mul(res, res);
            g.mean_all(sq)
        },
    );
}

#[test]
fn zero_variance_row_does_not_nan() {
    // Layer norm on a constant row: eps keeps it finite, grads finite.
    let mut store = ParamStore::new();
    store.insert("x", ArrayD::from_elem(IxDyn(&[2, 4]), 0.7f32));
    store.insert("gamma", ArrayD::from_elem(IxDyn(&[4]), 1.0f32));
    store.insert("beta", zeros(&[4]));
    let mut g = Graph::new();
    let x = g.param(&store, "x");
    let gamma = g.param(&store, "gamma");
    let beta = g.param(&store, "beta");
    let y = g.layer_norm(x, gamma, beta, 1e-5);
    assert!(g.value(y).iter().all(|v| v.is_finite()));
    let sq = g.mul(y, y);
    let loss = g.mean_all(sq);
    let grads = g.backward(loss);
    assert!(grads.get("x").unwrap().iter().all(|v| v.is_finite()));
}
