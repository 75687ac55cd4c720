//! Tape-based reverse-mode automatic differentiation over `ndarray`.
//!
//! A [`Graph`] is a grow-only tape: every op computes its value eagerly
//! and records what it needs for the reverse sweep (parents plus any
//! cached intermediates like im2col matrices or softmax outputs).
//! [`Graph::backward`] walks the tape once in reverse and accumulates
//! gradients into a [`Grads`] keyed by parameter name.
//!
//! Shape conventions: activations are logically 2-D `(rows, cols)`
//! except the convolution path (batched 5-D/4-D) and scalar losses
//! (0-d). Everything is stored as `ArrayD<f32>`; ops check ranks at
//! call time and panic on misuse — wrong shapes are programmer errors,
//! not runtime conditions.

use super::conv::{col2im2, col2im3, im2col2, im2col3, out_dim};
use super::params::{Grads, ParamStore};
use ndarray::{Array1, Array2, ArrayD, ArrayView2, Axis, Ix2, Ix4, Ix5, IxDyn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

struct Node {
    value: ArrayD<f32>,
    op: Op,
    needs_grad: bool,
}

enum Op {
    Input,
    Param {
        name: String,
    },
    MatMul {
        a: NodeId,
        b: NodeId,
    },
    Transpose {
        a: NodeId,
    },
    Reshape {
        a: NodeId,
        orig: Vec<usize>,
    },
    Relu {
        a: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    AddBias {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Scale {
        a: NodeId,
        c: f32,
    },
    AddScalar {
        a: NodeId,
    },
    MeanAll {
        a: NodeId,
    },
    GlobalMeanPool {
        a: NodeId,
    },
    Conv3d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        k: (usize, usize, usize),
        stride: (usize, usize, usize),
        pad: (usize, usize, usize),
        cols: Vec<Array2<f32>>,
    },
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        k: (usize, usize),
        stride: (usize, usize),
        pad: (usize, usize),
        cols: Vec<Array2<f32>>,
    },
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Array2<f32>,
        inv_std: Vec<f32>,
    },
    MaskedSoftmaxRows {
        x: NodeId,
        mask: Vec<bool>,
    },
    L2NormalizeRows {
        x: NodeId,
        inv_norms: Vec<f32>,
    },
    CrossEntropyMean {
        logits: NodeId,
        probs: Array2<f32>,
        targets: Vec<usize>,
    },
    GatherPerRow {
        x: NodeId,
        idx: Vec<usize>,
    },
    SubColBroadcast {
        x: NodeId,
        v: NodeId,
    },
    ConcatRows {
        parts: Vec<NodeId>,
    },
    ConcatCols {
        parts: Vec<NodeId>,
    },
    RowsSelect {
        x: NodeId,
        idx: Vec<usize>,
    },
    SliceCols {
        x: NodeId,
        start: usize,
        end: usize,
    },
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: ArrayD<f32>, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn value(&self, id: NodeId) -> &ArrayD<f32> {
        &self.nodes[id.0].value
    }

    pub fn value2(&self, id: NodeId) -> ArrayView2<'_, f32> {
        self.nodes[id.0]
            .value
            .view()
            .into_dimensionality::<Ix2>()
            .expect("node value is 2-D")
    }

    pub fn scalar(&self, id: NodeId) -> f32 {
        let v = &self.nodes[id.0].value;
        assert_eq!(v.len(), 1, "scalar() on non-scalar node");
        *v.iter().next().unwrap()
    }

    // ---- leaves ---------------------------------------------------------

    pub fn input(&mut self, value: ArrayD<f32>) -> NodeId {
        self.push(value, Op::Input, false)
    }

    pub fn input2(&mut self, value: Array2<f32>) -> NodeId {
        self.input(value.into_dyn())
    }

    /// Fetch a parameter by name. Frozen parameters enter the graph as
    /// plain constants: no gradient is ever recorded for them.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> NodeId {
        let p = store.get(name);
        let needs = !p.frozen;
        self.push(
            p.value.clone(),
            Op::Param {
                name: name.to_string(),
            },
            needs,
        )
    }

    // ---- elementwise / linear ops ----------------------------------------

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.value2(a).to_owned();
        let bv = self.value2(b);
        assert_eq!(av.dim().1, bv.dim().0, "matmul inner dims");
        let y = av.dot(&bv);
        let needs = self.needs(a) || self.needs(b);
        self.push(y.into_dyn(), Op::MatMul { a, b }, needs)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let y = self.value2(a).t().to_owned();
        let needs = self.needs(a);
        self.push(y.into_dyn(), Op::Transpose { a }, needs)
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> NodeId {
        let v = &self.nodes[a.0].value;
        let orig = v.shape().to_vec();
        // Values may live in non-standard layouts (e.g. fresh from a
        // transpose); reshape is defined on logical order.
        let y = v
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape size mismatch");
        let needs = self.needs(a);
        self.push(y, Op::Reshape { a, orig }, needs)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let y = self.nodes[a.0].value.mapv(|v| v.max(0.0));
        let needs = self.needs(a);
        self.push(y, Op::Relu { a }, needs)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            self.nodes[b.0].value.shape(),
            "add shape mismatch"
        );
        let y = &self.nodes[a.0].value + &self.nodes[b.0].value;
        let needs = self.needs(a) || self.needs(b);
        self.push(y, Op::Add { a, b }, needs)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let nb = self.scale(b, -1.0);
        self.add(a, nb)
    }

    /// `a` is (R, C); `b` is a (C,) bias added to every row.
    pub fn add_bias(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.value2(a).to_owned();
        let bv = &self.nodes[b.0].value;
        assert_eq!(bv.ndim(), 1, "bias must be 1-D");
        assert_eq!(av.dim().1, bv.len(), "bias length");
        let b1 = bv.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let y = av + &b1;
        let needs = self.needs(a) || self.needs(b);
        self.push(y.into_dyn(), Op::AddBias { a, b }, needs)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            self.nodes[b.0].value.shape(),
            "mul shape mismatch"
        );
        let y = &self.nodes[a.0].value * &self.nodes[b.0].value;
        let needs = self.needs(a) || self.needs(b);
        self.push(y, Op::Mul { a, b }, needs)
    }

    pub fn scale(&mut self, a: NodeId, c: f32) -> NodeId {
        let y = self.nodes[a.0].value.mapv(|v| v * c);
        let needs = self.needs(a);
        self.push(y, Op::Scale { a, c }, needs)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f32) -> NodeId {
        let y = self.nodes[a.0].value.mapv(|v| v + c);
        let needs = self.needs(a);
        self.push(y, Op::AddScalar { a }, needs)
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value;
        let mean = v.iter().sum::<f32>() / v.len() as f32;
        let needs = self.needs(a);
        self.push(
            ArrayD::from_elem(IxDyn(&[]), mean),
            Op::MeanAll { a },
            needs,
        )
    }

    /// (N, C, *spatial) -> (N, C), averaging over all trailing axes.
    pub fn global_mean_pool(&mut self, a: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value;
        assert!(v.ndim() >= 3, "pool expects (N, C, ...)");
        let (n, c) = (v.shape()[0], v.shape()[1]);
        let spatial: usize = v.shape()[2..].iter().product();
        let flat = v
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order(IxDyn(&[n, c, spatial]))
            .unwrap();
        let mut y = Array2::<f32>::zeros((n, c));
        for i in 0..n {
            for j in 0..c {
                let mut acc = 0.0;
                for s in 0..spatial {
                    acc += flat[[i, j, s]];
                }
                y[[i, j]] = acc / spatial as f32;
            }
        }
        let needs = self.needs(a);
        self.push(y.into_dyn(), Op::GlobalMeanPool { a }, needs)
    }

    // ---- convolutions ----------------------------------------------------

    /// x (N, Cin, D, H, W) * w (Cout, Cin, kD, kH, kW) + b (Cout,)
    /// -> (N, Cout, D', H', W').
    pub fn conv3d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: (usize, usize, usize),
        pad: (usize, usize, usize),
    ) -> NodeId {
        let xv = self.nodes[x.0]
            .value
            .view()
            .into_dimensionality::<Ix5>()
            .expect("conv3d input is 5-D");
        let wv = self.nodes[w.0]
            .value
            .view()
            .into_dimensionality::<Ix5>()
            .expect("conv3d weight is 5-D");
        let bv = &self.nodes[b.0].value;
        let (n, cin, d, h, wd) = xv.dim();
        let (cout, cin2, kd, kh, kw) = wv.dim();
        assert_eq!(cin, cin2, "conv3d channel mismatch");
        assert_eq!(bv.len(), cout, "conv3d bias length");
        let k = (kd, kh, kw);
        let (od, oh, ow) = (
            out_dim(d, kd, stride.0, pad.0),
            out_dim(h, kh, stride.1, pad.1),
            out_dim(wd, kw, stride.2, pad.2),
        );
        let wmat = wv
            .to_owned()
            .into_shape_with_order((cout, cin * kd * kh * kw))
            .unwrap();
        let mut y = ndarray::Array5::<f32>::zeros((n, cout, od, oh, ow));
        let mut cols_cache = Vec::with_capacity(n);
        for i in 0..n {
            let cols = im2col3(xv.index_axis(Axis(0), i), k, stride, pad);
            let mut yi = wmat.dot(&cols);
            for (mut row, bias) in yi.rows_mut().into_iter().zip(bv.iter()) {
                row += *bias;
            }
            y.index_axis_mut(Axis(0), i)
                .assign(&yi.into_shape_with_order((cout, od, oh, ow)).unwrap());
            cols_cache.push(cols);
        }
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(
            y.into_dyn(),
            Op::Conv3d {
                x,
                w,
                b,
                k,
                stride,
                pad,
                cols: cols_cache,
            },
            needs,
        )
    }

    /// x (N, Cin, H, W) * w (Cout, Cin, kH, kW) + b -> (N, Cout, H', W').
    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> NodeId {
        let xv = self.nodes[x.0]
            .value
            .view()
            .into_dimensionality::<Ix4>()
            .expect("conv2d input is 4-D");
        let wv = self.nodes[w.0]
            .value
            .view()
            .into_dimensionality::<Ix4>()
            .expect("conv2d weight is 4-D");
        let bv = &self.nodes[b.0].value;
        let (n, cin, h, wd) = xv.dim();
        let (cout, cin2, kh, kw) = wv.dim();
        assert_eq!(cin, cin2, "conv2d channel mismatch");
        assert_eq!(bv.len(), cout, "conv2d bias length");
        let k = (kh, kw);
        let (oh, ow) = (
            out_dim(h, kh, stride.0, pad.0),
            out_dim(wd, kw, stride.1, pad.1),
        );
        let wmat = wv
            .to_owned()
            .into_shape_with_order((cout, cin * kh * kw))
            .unwrap();
        let mut y = ndarray::Array4::<f32>::zeros((n, cout, oh, ow));
        let mut cols_cache = Vec::with_capacity(n);
        for i in 0..n {
            let cols = im2col2(xv.index_axis(Axis(0), i), k, stride, pad);
            let mut yi = wmat.dot(&cols);
            for (mut row, bias) in yi.rows_mut().into_iter().zip(bv.iter()) {
                row += *bias;
            }
            y.index_axis_mut(Axis(0), i)
                .assign(&yi.into_shape_with_order((cout, oh, ow)).unwrap());
            cols_cache.push(cols);
        }
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(
            y.into_dyn(),
            Op::Conv2d {
                x,
                w,
                b,
                k,
                stride,
                pad,
                cols: cols_cache,
            },
            needs,
        )
    }

    // ---- normalization / attention pieces ---------------------------------

    /// Row-wise layer norm with learnable gain/shift; x (R, C),
    /// gamma/beta (C,).
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f32) -> NodeId {
        let xv = self.value2(x).to_owned();
        let gv = &self.nodes[gamma.0].value;
        let bv = &self.nodes[beta.0].value;
        let (r, c) = xv.dim();
        assert_eq!(gv.len(), c, "layer_norm gamma length");
        assert_eq!(bv.len(), c, "layer_norm beta length");
        let mut xhat = Array2::<f32>::zeros((r, c));
        let mut inv_std = Vec::with_capacity(r);
        let mut y = Array2::<f32>::zeros((r, c));
        for i in 0..r {
            let row = xv.row(i);
            let mean = row.sum() / c as f32;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / c as f32;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for j in 0..c {
                let xh = (row[j] - mean) * is;
                xhat[[i, j]] = xh;
                y[[i, j]] = xh * gv[[j]] + bv[[j]];
            }
        }
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        self.push(
            y.into_dyn(),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            needs,
        )
    }

    /// Row-wise softmax over the columns where `mask` is true; masked
    /// columns get probability exactly 0. All rows share the mask (the
    /// key-padding case). A fully-masked mask is a programmer error.
    pub fn masked_softmax_rows(&mut self, x: NodeId, mask: &[bool]) -> NodeId {
        let xv = self.value2(x).to_owned();
        let (r, c) = xv.dim();
        assert_eq!(mask.len(), c, "mask length");
        assert!(mask.iter().any(|&m| m), "softmax over fully masked row");
        let mut y = Array2::<f32>::zeros((r, c));
        for i in 0..r {
            let row = xv.row(i);
            let mx = row
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(v, _)| *v)
                .fold(f32::NEG_INFINITY, f32::max);
            let mut denom = 0.0;
            for j in 0..c {
                if mask[j] {
                    let e = (row[j] - mx).exp();
                    y[[i, j]] = e;
                    denom += e;
                }
            }
            for j in 0..c {
                y[[i, j]] /= denom;
            }
        }
        let needs = self.needs(x);
        self.push(
            y.into_dyn(),
            Op::MaskedSoftmaxRows {
                x,
                mask: mask.to_vec(),
            },
            needs,
        )
    }

    /// Scales each row of x (R, C) to unit L2 norm.
    pub fn l2_normalize_rows(&mut self, x: NodeId, eps: f32) -> NodeId {
        let xv = self.value2(x).to_owned();
        let (r, c) = xv.dim();
        let mut inv_norms = Vec::with_capacity(r);
        let mut y = Array2::<f32>::zeros((r, c));
        for i in 0..r {
            let row = xv.row(i);
            let norm = row.iter().map(|v| v * v).sum::<f32>().sqrt().max(eps);
            let inv = 1.0 / norm;
            inv_norms.push(inv);
            for j in 0..c {
                y[[i, j]] = row[j] * inv;
            }
        }
        let needs = self.needs(x);
        self.push(y.into_dyn(), Op::L2NormalizeRows { x, inv_norms }, needs)
    }

    /// Mean cross-entropy of logits (N, C) against integer targets.
    pub fn cross_entropy_mean(&mut self, logits: NodeId, targets: &[usize]) -> NodeId {
        let lv = self.value2(logits).to_owned();
        let (n, c) = lv.dim();
        assert_eq!(targets.len(), n, "target count");
        assert!(targets.iter().all(|&t| t < c), "target out of range");
        let mut probs = Array2::<f32>::zeros((n, c));
        let mut loss = 0.0f64;
        for i in 0..n {
            let row = lv.row(i);
            let mx = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let mut denom = 0.0f32;
            for j in 0..c {
                let e = (row[j] - mx).exp();
                probs[[i, j]] = e;
                denom += e;
            }
            for j in 0..c {
                probs[[i, j]] /= denom;
            }
            loss -= (probs[[i, targets[i]]].max(1e-30) as f64).ln();
        }
        let needs = self.needs(logits);
        self.push(
            ArrayD::from_elem(IxDyn(&[]), (loss / n as f64) as f32),
            Op::CrossEntropyMean {
                logits,
                probs,
                targets: targets.to_vec(),
            },
            needs,
        )
    }

    /// y[i, 0] = x[i, idx[i]] — picks one column per row, keeping 2-D.
    pub fn gather_per_row(&mut self, x: NodeId, idx: &[usize]) -> NodeId {
        let xv = self.value2(x);
        let (n, c) = xv.dim();
        assert_eq!(idx.len(), n, "gather index count");
        assert!(idx.iter().all(|&j| j < c), "gather index out of range");
        let mut y = Array2::<f32>::zeros((n, 1));
        for i in 0..n {
            y[[i, 0]] = xv[[i, idx[i]]];
        }
        let needs = self.needs(x);
        self.push(
            y.into_dyn(),
            Op::GatherPerRow {
                x,
                idx: idx.to_vec(),
            },
            needs,
        )
    }

    /// y[i, j] = x[i, j] - v[i, 0]; x (N, C), v (N, 1).
    pub fn sub_col_broadcast(&mut self, x: NodeId, v: NodeId) -> NodeId {
        let xv = self.value2(x).to_owned();
        let vv = self.value2(v);
        let (n, _c) = xv.dim();
        assert_eq!(vv.dim(), (n, 1), "broadcast column shape");
        let mut y = xv;
        for i in 0..n {
            let s = vv[[i, 0]];
            for val in y.row_mut(i) {
                *val -= s;
            }
        }
        let needs = self.needs(x) || self.needs(v);
        self.push(y.into_dyn(), Op::SubColBroadcast { x, v }, needs)
    }

    /// Vertical stack of 2-D pieces sharing a column count.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat_rows of nothing");
        let c = self.value2(parts[0]).dim().1;
        let total: usize = parts.iter().map(|&p| self.value2(p).dim().0).sum();
        let mut y = Array2::<f32>::zeros((total, c));
        let mut cursor = 0;
        for &p in parts {
            let pv = self.value2(p);
            assert_eq!(pv.dim().1, c, "concat_rows column mismatch");
            let r = pv.dim().0;
            y.slice_mut(ndarray::s![cursor..cursor + r, ..]).assign(&pv);
            cursor += r;
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push(
            y.into_dyn(),
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
            needs,
        )
    }

    /// Horizontal concat of 2-D pieces sharing a row count.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let r = self.value2(parts[0]).dim().0;
        let total: usize = parts.iter().map(|&p| self.value2(p).dim().1).sum();
        let mut y = Array2::<f32>::zeros((r, total));
        let mut cursor = 0;
        for &p in parts {
            let pv = self.value2(p);
            assert_eq!(pv.dim().0, r, "concat_cols row mismatch");
            let c = pv.dim().1;
            y.slice_mut(ndarray::s![.., cursor..cursor + c]).assign(&pv);
            cursor += c;
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push(
            y.into_dyn(),
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
            needs,
        )
    }

    /// Gather rows by index (repeats allowed; backward accumulates).
    pub fn rows_select(&mut self, x: NodeId, idx: &[usize]) -> NodeId {
        let xv = self.value2(x);
        let (r, c) = xv.dim();
        assert!(idx.iter().all(|&i| i < r), "row index out of range");
        let mut y = Array2::<f32>::zeros((idx.len(), c));
        for (out_i, &src_i) in idx.iter().enumerate() {
            y.row_mut(out_i).assign(&xv.row(src_i));
        }
        let needs = self.needs(x);
        self.push(
            y.into_dyn(),
            Op::RowsSelect {
                x,
                idx: idx.to_vec(),
            },
            needs,
        )
    }

    /// Columns [start, end) of a 2-D node.
    pub fn slice_cols(&mut self, x: NodeId, start: usize, end: usize) -> NodeId {
        let xv = self.value2(x);
        let (_r, c) = xv.dim();
        assert!(start < end && end <= c, "column slice out of range");
        let y = xv.slice(ndarray::s![.., start..end]).to_owned();
        let needs = self.needs(x);
        self.push(y.into_dyn(), Op::SliceCols { x, start, end }, needs)
    }

    // ---- backward ----------------------------------------------------------

    /// Reverse sweep from a scalar loss node. Returns gradients for every
    /// reachable non-frozen parameter.
    pub fn backward(&self, loss: NodeId) -> Grads {
        assert_eq!(
            self.nodes[loss.0].value.len(),
            1,
            "backward from non-scalar"
        );
        let mut buf: Vec<Option<ArrayD<f32>>> = Vec::with_capacity(loss.0 + 1);
        buf.resize_with(loss.0 + 1, || None);
        buf[loss.0] = Some(ArrayD::from_elem(
            self.nodes[loss.0].value.raw_dim(),
            1.0f32,
        ));
        let mut grads = Grads::new();

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let dy = match buf[i].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param { name } => {
                    grads.accumulate(name, &dy);
                }
                Op::MatMul { a, b } => {
                    let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                    if self.needs(*a) {
                        let bv = self.value2(*b);
                        let da = dy2.dot(&bv.t());
                        self.add_to(&mut buf, *a, da.into_dyn());
                    }
                    if self.needs(*b) {
                        let av = self.value2(*a);
                        let db = av.t().dot(&dy2);
                        self.add_to(&mut buf, *b, db.into_dyn());
                    }
                }
                Op::Transpose { a } => {
                    let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                    self.add_to(&mut buf, *a, dy2.t().to_owned().into_dyn());
                }
                Op::Reshape { a, orig } => {
                    let da = dy
                        .as_standard_layout()
                        .into_owned()
                        .into_shape_with_order(IxDyn(orig))
                        .unwrap();
                    self.add_to(&mut buf, *a, da);
                }
                Op::Relu { a } => {
                    let mask = self.nodes[a.0].value.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    self.add_to(&mut buf, *a, dy * mask);
                }
                Op::Add { a, b } => {
                    if self.needs(*a) {
                        self.add_to(&mut buf, *a, dy.clone());
                    }
                    if self.needs(*b) {
                        self.add_to(&mut buf, *b, dy);
                    }
                }
                Op::AddBias { a, b } => {
                    if self.needs(*b) {
                        let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                        let db = dy2.sum_axis(Axis(0));
                        self.add_to(&mut buf, *b, db.into_dyn());
                    }
                    if self.needs(*a) {
                        self.add_to(&mut buf, *a, dy);
                    }
                }
                Op::Mul { a, b } => {
                    if self.needs(*a) {
                        self.add_to(&mut buf, *a, &dy * &self.nodes[b.0].value);
                    }
                    if self.needs(*b) {
                        self.add_to(&mut buf, *b, &dy * &self.nodes[a.0].value);
                    }
                }
                Op::Scale { a, c } => {
                    self.add_to(&mut buf, *a, dy.mapv(|v| v * c));
                }
                Op::AddScalar { a } => {
                    self.add_to(&mut buf, *a, dy);
                }
                Op::MeanAll { a } => {
                    let n = self.nodes[a.0].value.len() as f32;
                    let g = *dy.iter().next().unwrap() / n;
                    let da = ArrayD::from_elem(self.nodes[a.0].value.raw_dim(), g);
                    self.add_to(&mut buf, *a, da);
                }
                Op::GlobalMeanPool { a } => {
                    let av = &self.nodes[a.0].value;
                    let spatial: usize = av.shape()[2..].iter().product();
                    let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                    let mut da = ArrayD::<f32>::zeros(av.raw_dim());
                    {
                        let (n, c) = dy2.dim();
                        let mut flat = da
                            .view_mut()
                            .into_shape_with_order(IxDyn(&[n, c, spatial]))
                            .unwrap();
                        for i in 0..n {
                            for j in 0..c {
                                let g = dy2[[i, j]] / spatial as f32;
                                for s in 0..spatial {
                                    flat[[i, j, s]] = g;
                                }
                            }
                        }
                    }
                    self.add_to(&mut buf, *a, da);
                }
                Op::Conv3d {
                    x,
                    w,
                    b,
                    k,
                    stride,
                    pad,
                    cols,
                } => {
                    let dyv = dy.view().into_dimensionality::<Ix5>().unwrap();
                    let (n, cout, od, oh, ow) = dyv.dim();
                    let xv = self.nodes[x.0]
                        .value
                        .view()
                        .into_dimensionality::<Ix5>()
                        .unwrap();
                    let (_, cin, d, h, wd) = xv.dim();
                    let wmat = self.nodes[w.0]
                        .value
                        .to_owned()
                        .into_shape_with_order((cout, cin * k.0 * k.1 * k.2))
                        .unwrap();
                    let mut dwmat = Array2::<f32>::zeros(wmat.raw_dim());
                    let mut db = Array1::<f32>::zeros(cout);
                    let mut dx = ndarray::Array5::<f32>::zeros(xv.raw_dim());
                    for i in 0..n {
                        let dyi = dyv
                            .index_axis(Axis(0), i)
                            .to_owned()
                            .into_shape_with_order((cout, od * oh * ow))
                            .unwrap();
                        if self.needs(*w) {
                            dwmat += &dyi.dot(&cols[i].t());
                        }
                        if self.needs(*b) {
                            db += &dyi.sum_axis(Axis(1));
                        }
                        if self.needs(*x) {
                            let dcols = wmat.t().dot(&dyi);
                            let dxi = col2im3(&dcols, (cin, d, h, wd), *k, *stride, *pad);
                            dx.index_axis_mut(Axis(0), i).assign(&dxi);
                        }
                    }
                    if self.needs(*w) {
                        let dw = dwmat
                            .into_shape_with_order((cout, cin, k.0, k.1, k.2))
                            .unwrap();
                        self.add_to(&mut buf, *w, dw.into_dyn());
                    }
                    if self.needs(*b) {
                        self.add_to(&mut buf, *b, db.into_dyn());
                    }
                    if self.needs(*x) {
                        self.add_to(&mut buf, *x, dx.into_dyn());
                    }
                }
                Op::Conv2d {
                    x,
                    w,
                    b,
                    k,
                    stride,
                    pad,
                    cols,
                } => {
                    let dyv = dy.view().into_dimensionality::<Ix4>().unwrap();
                    let (n, cout, oh, ow) = dyv.dim();
                    let xv = self.nodes[x.0]
                        .value
                        .view()
                        .into_dimensionality::<Ix4>()
                        .unwrap();
                    let (_, cin, h, wd) = xv.dim();
                    let wmat = self.nodes[w.0]
                        .value
                        .to_owned()
                        .into_shape_with_order((cout, cin * k.0 * k.1))
                        .unwrap();
                    let mut dwmat = Array2::<f32>::zeros(wmat.raw_dim());
                    let mut db = Array1::<f32>::zeros(cout);
                    let mut dx = ndarray::Array4::<f32>::zeros(xv.raw_dim());
                    for i in 0..n {
                        let dyi = dyv
                            .index_axis(Axis(0), i)
                            .to_owned()
                            .into_shape_with_order((cout, oh * ow))
                            .unwrap();
                        if self.needs(*w) {
                            dwmat += &dyi.dot(&cols[i].t());
                        }
                        if self.needs(*b) {
                            db += &dyi.sum_axis(Axis(1));
                        }
                        if self.needs(*x) {
                            let dcols = wmat.t().dot(&dyi);
                            let dxi = col2im2(&dcols, (cin, h, wd), *k, *stride, *pad);
                            dx.index_axis_mut(Axis(0), i).assign(&dxi);
                        }
                    }
                    if self.needs(*w) {
                        let dw = dwmat
                            .into_shape_with_order((cout, cin, k.0, k.1))
                            .unwrap();
                        self.add_to(&mut buf, *w, dw.into_dyn());
                    }
                    if self.needs(*b) {
                        self.add_to(&mut buf, *b, db.into_dyn());
                    }
                    if self.needs(*x) {
                        self.add_to(&mut buf, *x, dx.into_dyn());
                    }
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                    let (r, c) = dy2.dim();
                    let gv = &self.nodes[gamma.0].value;
                    if self.needs(*gamma) {
                        let mut dg = Array1::<f32>::zeros(c);
                        for i in 0..r {
                            for j in 0..c {
                                dg[j] += dy2[[i, j]] * xhat[[i, j]];
                            }
                        }
                        self.add_to(&mut buf, *gamma, dg.into_dyn());
                    }
                    if self.needs(*beta) {
                        let db = dy2.sum_axis(Axis(0));
                        self.add_to(&mut buf, *beta, db.into_dyn());
                    }
                    if self.needs(*x) {
                        let mut dx = Array2::<f32>::zeros((r, c));
                        for i in 0..r {
                            let mut mean_dxhat = 0.0f32;
                            let mut mean_dxhat_xhat = 0.0f32;
                            for j in 0..c {
                                let dxh = dy2[[i, j]] * gv[[j]];
                                mean_dxhat += dxh;
                                mean_dxhat_xhat += dxh * xhat[[i, j]];
                            }
                            mean_dxhat /= c as f32;
                            mean_dxhat_xhat /= c as f32;
                            for j in 0..c {
                                let dxh = dy2[[i, j]] * gv[[j]];
                                dx[[i, j]] = inv_std[i]
                                    * (dxh - mean_dxhat - xhat[[i, j]] * mean_dxhat_xhat);
                            }
                        }
                        self.add_to(&mut buf, *x, dx.into_dyn());
                    }
                }
                Op::MaskedSoftmaxRows { x, mask } => {
                    let s = self.value2(NodeId(i)).to_owned();
                    let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                    let (r, c) = s.dim();
                    let mut dx = Array2::<f32>::zeros((r, c));
                    for row in 0..r {
                        let mut dot = 0.0f32;
                        for j in 0..c {
                            if mask[j] {
                                dot += dy2[[row, j]] * s[[row, j]];
                            }
                        }
                        for j in 0..c {
                            if mask[j] {
                                dx[[row, j]] = s[[row, j]] * (dy2[[row, j]] - dot);
                            }
                        }
                    }
                    self.add_to(&mut buf, *x, dx.into_dyn());
                }
                Op::L2NormalizeRows { x, inv_norms } => {
                    let y = self.value2(NodeId(i)).to_owned();
                    let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                    let (r, c) = y.dim();
                    let mut dx = Array2::<f32>::zeros((r, c));
                    for row in 0..r {
                        let mut ydy = 0.0f32;
                        for j in 0..c {
                            ydy += y[[row, j]] * dy2[[row, j]];
                        }
                        for j in 0..c {
                            dx[[row, j]] = inv_norms[row] * (dy2[[row, j]] - y[[row, j]] * ydy);
                        }
                    }
                    self.add_to(&mut buf, *x, dx.into_dyn());
                }
                Op::CrossEntropyMean {
                    logits,
                    probs,
                    targets,
                } => {
                    let g = *dy.iter().next().unwrap();
                    let (n, c) = probs.dim();
                    let mut dl = probs.clone();
                    for i in 0..n {
                        dl[[i, targets[i]]] -= 1.0;
                    }
                    dl.mapv_inplace(|v| v * g / n as f32);
                    let _ = c;
                    self.add_to(&mut buf, *logits, dl.into_dyn());
                }
                Op::GatherPerRow { x, idx } => {
                    let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                    let xv = self.value2(*x);
                    let mut dx = Array2::<f32>::zeros(xv.raw_dim());
                    for (i, &j) in idx.iter().enumerate() {
                        dx[[i, j]] += dy2[[i, 0]];
                    }
                    self.add_to(&mut buf, *x, dx.into_dyn());
                }
                Op::SubColBroadcast { x, v } => {
                    let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                    if self.needs(*x) {
                        self.add_to(&mut buf, *x, dy.clone());
                    }
                    if self.needs(*v) {
                        let (n, _c) = dy2.dim();
                        let mut dv = Array2::<f32>::zeros((n, 1));
                        for i in 0..n {
                            dv[[i, 0]] = -dy2.row(i).sum();
                        }
                        self.add_to(&mut buf, *v, dv.into_dyn());
                    }
                }
                Op::ConcatRows { parts } => {
                    let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                    let mut cursor = 0;
                    for &p in parts {
                        let r = self.value2(p).dim().0;
                        if self.needs(p) {
                            let dp = dy2.slice(ndarray::s![cursor..cursor + r, ..]).to_owned();
                            self.add_to(&mut buf, p, dp.into_dyn());
                        }
                        cursor += r;
                    }
                }
                Op::ConcatCols { parts } => {
                    let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                    let mut cursor = 0;
                    for &p in parts {
                        let c = self.value2(p).dim().1;
                        if self.needs(p) {
                            let dp = dy2.slice(ndarray::s![.., cursor..cursor + c]).to_owned();
                            self.add_to(&mut buf, p, dp.into_dyn());
                        }
                        cursor += c;
                    }
                }
                Op::RowsSelect { x, idx } => {
                    let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                    let xv = self.value2(*x);
                    let mut dx = Array2::<f32>::zeros(xv.raw_dim());
                    for (out_i, &src_i) in idx.iter().enumerate() {
                        let mut row = dx.row_mut(src_i);
                        row += &dy2.row(out_i);
                    }
                    self.add_to(&mut buf, *x, dx.into_dyn());
                }
                Op::SliceCols { x, start, end } => {
                    let dy2 = dy.view().into_dimensionality::<Ix2>().unwrap();
                    let xv = self.value2(*x);
                    let mut dx = Array2::<f32>::zeros(xv.raw_dim());
                    dx.slice_mut(ndarray::s![.., *start..*end]).assign(&dy2);
                    self.add_to(&mut buf, *x, dx.into_dyn());
                }
            }
        }
        grads
    }

    fn add_to(&self, buf: &mut [Option<ArrayD<f32>>], id: NodeId, g: ArrayD<f32>) {
        if !self.nodes[id.0].needs_grad {
            return;
        }
        match &mut buf[id.0] {
            Some(existing) => *existing += &g,
            slot @ None => *slot = Some(g),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::{gaussian, init_rng, ParamStore};

    #[test]
    fn forward_values_are_what_they_say() {
        let mut g = Graph::new();
        let a = g.input2(ndarray::array![[1.0, 2.0], [3.0, 4.0]]);
        let b = g.input2(ndarray::array![[1.0, 0.0], [0.0, 1.0]]);
        let y = g.matmul(a, b);
        assert_eq!(g.value2(y), g.value2(a));
        let t = g.transpose(a);
        assert_eq!(g.value2(t)[[0, 1]], 3.0);
        let neg = g.input2(ndarray::array![[-1.0, 2.0]]);
        let r = g.relu(neg);
        assert_eq!(g.value2(r), ndarray::array![[0.0, 2.0]]);
        let m = g.mean_all(a);
        assert_eq!(g.scalar(m), 2.5);
        let sm = g.masked_softmax_rows(a, &[true, true]);
        let s = g.value2(sm);
        assert!((s.row(0).sum() - 1.0).abs() < 1e-6);
        let masked = g.masked_softmax_rows(a, &[true, false]);
        assert_eq!(g.value2(masked)[[0, 1]], 0.0);
        assert_eq!(g.value2(masked)[[0, 0]], 1.0);
    }

    #[test]
    fn frozen_params_get_no_grads_at_all() {
        let mut store = ParamStore::new();
        let mut rng = init_rng(1, "frozen");
        store.insert("w1", gaussian(&[3, 3], 0.0, 1.0, &mut rng));
        store.insert("w2", gaussian(&[3, 3], 0.0, 1.0, &mut rng));
        store.set_frozen("w1", true);
        let mut g = Graph::new();
        let x = g.input2(Array2::from_elem((2, 3), 1.0));
        let w1 = g.param(&store, "w1");
        let w2 = g.param(&store, "w2");
        let h = g.matmul(x, w1);
        let y = g.matmul(h, w2);
        let loss = g.mean_all(y);
        let grads = g.backward(loss);
        assert!(grads.get("w1").is_none(), "frozen param must be absent");
        assert!(grads.get("w2").is_some());
        assert_eq!(grads.len(), 1);
    }

    #[test]
    fn repeated_param_use_accumulates() {
        // y = w @ w with w 1x1 reduces to w^2; dy/dw = 2w.
        let mut store = ParamStore::new();
        store.insert("w", ArrayD::from_elem(IxDyn(&[1, 1]), 3.0f32));
        let mut g = Graph::new();
        let w = g.param(&store, "w");
        let y = g.matmul(w, w);
        let loss = g.mean_all(y);
        let grads = g.backward(loss);
        let dw = grads.get("w").unwrap();
        assert!((dw[[0, 0]] - 6.0).abs() < 1e-5, "{}", dw[[0, 0]]);
    }

    #[test]
    fn backward_is_deterministic() {
        let mut store = ParamStore::new();
        let mut rng = init_rng(2, "det");
        store.insert("w", gaussian(&[4, 4], 0.0, 1.0, &mut rng));
        let make = |store: &ParamStore| {
            let mut g = Graph::new();
            let x = g.input2(Array2::from_shape_fn((3, 4), |(i, j)| (i + j) as f32));
            let w = g.param(store, "w");
            let h = g.matmul(x, w);
            let r = g.relu(h);
            let n = g.l2_normalize_rows(r, 1e-6);
            let loss = g.mean_all(n);
            g.backward(loss)
        };
        let a = make(&store);
        let b = make(&store);
        assert_eq!(a.get("w").unwrap(), b.get("w").unwrap());
    }
}
