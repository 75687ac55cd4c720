//! im2col lowering for 2-D and 3-D convolutions. The graph ops express
//! conv as one matrix product per sample; these helpers build (and in
//! backward, scatter back from) the column matrices.
//!
//! Column layout: row = ((c*kD + kd)*kH + kh)*kW + kw, which is exactly
//! the row-major flattening of a (Cout, Cin, kD, kH, kW) weight tensor —
//! so `w.reshape(Cout, -1) @ cols` is the convolution.

use ndarray::{Array2, Array3, Array4, ArrayView3, ArrayView4};

pub fn out_dim(n: usize, k: usize, stride: usize, pad: usize) -> usize {
    assert!(
        n + 2 * pad >= k,
        "kernel {k} larger than padded input {}",
        n + 2 * pad
    );
    (n + 2 * pad - k) / stride + 1
}

/// (C, D, H, W) -> (C*kD*kH*kW, P) with P = D'*H'*W'.
pub fn im2col3(
    x: ArrayView4<f32>,
    k: (usize, usize, usize),
    stride: (usize, usize, usize),
    pad: (usize, usize, usize),
) -> Array2<f32> {
    let (c, d, h, w) = x.dim();
    let (od, oh, ow) = (
        out_dim(d, k.0, stride.0, pad.0),
        out_dim(h, k.1, stride.1, pad.1),
        out_dim(w, k.2, stride.2, pad.2),
    );
    let mut cols = Array2::<f32>::zeros((c * k.0 * k.1 * k.2, od * oh * ow));
    for ci in 0..c {
        for kd in 0..k.0 {
            for kh in 0..k.1 {
                for kw in 0..k.2 {
                    let row = ((ci * k.0 + kd) * k.1 + kh) * k.2 + kw;
                    for pd in 0..od {
                        let id = (pd * stride.0 + kd) as isize - pad.0 as isize;
                        if id < 0 || id >= d as isize {
                            continue;
                        }
                        for ph in 0..oh {
                            let ih = (ph * stride.1 + kh) as isize - pad.1 as isize;
                            if ih < 0 || ih >= h as isize {
                                continue;
                            }
                            for pw in 0..ow {
                                let iw = (pw * stride.2 + kw) as isize - pad.2 as isize;
                                if iw < 0 || iw >= w as isize {
                                    continue;
                                }
                                let col = (pd * oh + ph) * ow + pw;
                                cols[[row, col]] = x[[ci, id as usize, ih as usize, iw as usize]];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Transpose of [`im2col3`]: scatter-add column gradients back onto the
/// input gradient.
pub fn col2im3(
    cols: &Array2<f32>,
    x_shape: (usize, usize, usize, usize),
    k: (usize, usize, usize),
    stride: (usize, usize, usize),
    pad: (usize, usize, usize),
) -> Array4<f32> {
    let (c, d, h, w) = x_shape;
    let (od, oh, ow) = (
        out_dim(d, k.0, stride.0, pad.0),
        out_dim(h, k.1, stride.1, pad.1),
        out_dim(w, k.2, stride.2, pad.2),
    );
    let mut dx = Array4::<f32>::zeros(x_shape);
    for ci in 0..c {
        for kd in 0..k.0 {
            for kh in 0..k.1 {
                for kw in 0..k.2 {
                    let row = ((ci * k.0 + kd) * k.1 + kh) * k.2 + kw;
                    for pd in 0..od {
                        let id = (pd * stride.0 + kd) as isize - pad.0 as isize;
                        if id < 0 || id >= d as isize {
                            continue;
                        }
                        for ph in 0..oh {
                            let ih = (ph * stride.1 + kh) as isize - pad.1 as isize;
                            if ih < 0 || ih >= h as isize {
                                continue;
                            }
                            for pw in 0..ow {
                                let iw = (pw * stride.2 + kw) as isize - pad.2 as isize;
                                if iw < 0 || iw >= w as isize {
                                    continue;
                                }
                                let col = (pd * oh + ph) * ow + pw;
                                dx[[ci, id as usize, ih as usize, iw as usize]] +=
                                    cols[[row, col]];
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}

/// (C, H, W) -> (C*kH*kW, P) with P = H'*W'.
pub fn im2col2(
    x: ArrayView3<f32>,
    k: (usize, usize),
    stride: (usize, usize),
    pad: (usize, usize),
) -> Array2<f32> {
    let (c, h, w) = x.dim();
    let x4 = x.insert_axis(ndarray::Axis(1));
    let cols = im2col3(x4.view(), (1, k.0, k.1), (1, stride.0, stride.1), (0, pad.0, pad.1));
    debug_assert_eq!(
        cols.dim().0,
        c * k.0 * k.1,
        "2-D lowering must match 3-D with unit depth"
    );
    let _ = (h, w);
    cols
}

pub fn col2im2(
    cols: &Array2<f32>,
    x_shape: (usize, usize, usize),
    k: (usize, usize),
    stride: (usize, usize),
    pad: (usize, usize),
) -> Array3<f32> {
    let (c, h, w) = x_shape;
    let dx = col2im3(
        cols,
        (c, 1, h, w),
        (1, k.0, k.1),
        (1, stride.0, stride.1),
        (0, pad.0, pad.1),
    );
    dx.into_shape_with_order((c, h, w)).expect("unit depth")
}
