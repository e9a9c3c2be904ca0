//! Reverse-mode automatic differentiation over whole matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Parameter leaves
//! borrow the parameter arrays, constants own their values, and
//! [`Tape::backward`] accumulates gradients for each parameter array.

use crate::mat::{matmul, matmul_at, matmul_bt, Mat};
use hybridcast_core::stats::{sigmoid, softplus, student_t_nll, student_t_nll_grad};

pub(crate) const LN_EPS: f64 = 1e-5;
pub(crate) const SIGMA_FLOOR: f64 = 1e-6;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct V(usize);

enum Op {
    Param(usize),
    Const,
    MatMul(V, V),
    MatMulBt(V, V),
    Add(V, V),
    AddRow(V, V),
    Scale(V, f64),
    LayerNorm {
        x: V,
        gain: V,
        bias: V,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    Gelu(V),
    SliceCols(V, usize),
    ConcatCols(Vec<V>),
    MaskedSoftmax(V),
    ScaleRowsByCol(V, V, usize),
    StudentNll {
        raw: V,
        target: Vec<f64>,
        mask: Vec<bool>,
        weight: f64,
    },
}

struct Node {
    value: Mat,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p [Mat],
    nodes: Vec<Node>,
}

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Student-T parameters from a raw head triple.
pub(crate) fn constrain(raw_nu: f64, raw_mu: f64, raw_sigma: f64) -> (f64, f64, f64) {
    (
        2.0 + softplus(raw_nu),
        raw_mu,
        softplus(raw_sigma) + SIGMA_FLOOR,
    )
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Mat]) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn value(&self, v: V) -> &Mat {
        match self.nodes[v.0].op {
            Op::Param(i) => &self.params[i],
            _ => &self.nodes[v.0].value,
        }
    }

    fn push(&mut self, value: Mat, op: Op) -> V {
        self.nodes.push(Node { value, op });
        V(self.nodes.len() - 1)
    }

    pub fn param(&mut self, index: usize) -> V {
        self.push(Mat::empty(), Op::Param(index))
    }

    pub fn constant(&mut self, value: Mat) -> V {
        self.push(value, Op::Const)
    }

    pub fn matmul(&mut self, a: V, b: V) -> V {
        let out = matmul(self.value(a), self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    /// `a·bᵀ`.
    pub fn matmul_bt(&mut self, a: V, b: V) -> V {
        let out = matmul_bt(self.value(a), self.value(b));
        self.push(out, Op::MatMulBt(a, b))
    }

    pub fn add(&mut self, a: V, b: V) -> V {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b))
    }

    /// Adds the `1×n` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: V, bias: V) -> V {
        let mut out = self.value(a).clone();
        let b = self.value(bias);
        assert_eq!((b.rows, b.cols), (1, out.cols), "bias shape");
        for i in 0..out.rows {
            for (x, y) in out.row_mut(i).iter_mut().zip(&b.data) {
                *x += y;
            }
        }
        self.push(out, Op::AddRow(a, bias))
    }

    pub fn scale(&mut self, a: V, s: f64) -> V {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|x| *x *= s);
        self.push(out, Op::Scale(a, s))
    }

    /// Row-wise layer normalization with `1×n` gain and bias.
    pub fn layer_norm(&mut self, x: V, gain: V, bias: V) -> V {
        let xv = self.value(x);
        let (g, b) = (self.value(gain), self.value(bias));
        let n = xv.cols as f64;
        let mut xhat = Mat::zeros(xv.rows, xv.cols);
        let mut out = Mat::zeros(xv.rows, xv.cols);
        let mut inv_std = Vec::with_capacity(xv.rows);
        for i in 0..xv.rows {
            let row = xv.row(i);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(inv);
            for (j, x) in row.iter().enumerate() {
                let h = (x - mean) * inv;
                *xhat.at_mut(i, j) = h;
                *out.at_mut(i, j) = h * g.data[j] + b.data[j];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    pub fn gelu(&mut self, a: V) -> V {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|x| *x = gelu(*x));
        self.push(out, Op::Gelu(a))
    }

    pub fn slice_cols(&mut self, a: V, start: usize, len: usize) -> V {
        let av = self.value(a);
        let mut out = Mat::zeros(av.rows, len);
        for i in 0..av.rows {
            out.row_mut(i)
                .copy_from_slice(&av.row(i)[start..start + len]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[V]) -> V {
        let rows = self.value(parts[0]).rows;
        let cols = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let pv = self.value(p);
            for i in 0..rows {
                out.row_mut(i)[off..off + pv.cols].copy_from_slice(pv.row(i));
            }
            off += pv.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Row-wise softmax over the entries where `allowed` is true; the rest
    /// are exactly zero. Every row must allow at least one entry.
    pub fn masked_softmax(&mut self, a: V, allowed: Vec<bool>) -> V {
        let av = self.value(a);
        assert_eq!(allowed.len(), av.data.len());
        let mut out = Mat::zeros(av.rows, av.cols);
        for i in 0..av.rows {
            let row = av.row(i);
            let ok = &allowed[i * av.cols..(i + 1) * av.cols];
            let max = row
                .iter()
                .zip(ok)
                .filter(|(_, &k)| k)
                .map(|(v, _)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                ok.iter().any(|&k| k),
                "softmax row {i} has no allowed entry"
            );
            let o = out.row_mut(i);
            if !max.is_finite() {
                // Left for the caller's finiteness check to report.
                o.iter_mut().for_each(|x| *x = f64::NAN);
                continue;
            }
            let mut total = 0.0;
            for j in 0..row.len() {
                if ok[j] {
                    o[j] = (row[j] - max).exp();
                    total += o[j];
                }
            }
            o.iter_mut().for_each(|x| *x /= total);
        }
        self.push(out, Op::MaskedSoftmax(a))
    }

    /// `out[i, :] = a[i, :] · g[i, col]`.
    pub fn scale_rows_by_col(&mut self, a: V, g: V, col: usize) -> V {
        let mut out = self.value(a).clone();
        let gv = self.value(g);
        for i in 0..out.rows {
            let s = gv.at(i, col);
            out.row_mut(i).iter_mut().for_each(|x| *x *= s);
        }
        self.push(out, Op::ScaleRowsByCol(a, g, col))
    }

    /// `weight · Σ` Student-T NLL over unmasked entries. `raw` holds
    /// `[ν | μ | σ]` column blocks of width `target.cols`; result is `1×1`.
    pub fn student_nll(&mut self, raw: V, target: &Mat, mask: Vec<bool>, weight: f64) -> V {
        let rv = self.value(raw);
        let p = target.cols;
        assert_eq!(
            (rv.rows, rv.cols),
            (target.rows, 3 * p),
            "head/target shape"
        );
        assert_eq!(mask.len(), target.data.len());
        let mut total = 0.0;
        for i in 0..target.rows {
            let r = rv.row(i);
            for j in 0..p {
                if mask[i * p + j] {
                    let (nu, mu, sigma) = constrain(r[j], r[p + j], r[2 * p + j]);
                    total += student_t_nll(target.at(i, j), nu, mu, sigma);
                }
            }
        }
        self.push(
            Mat::from_vec(1, 1, vec![weight * total]),
            Op::StudentNll {
                raw,
                target: target.data.clone(),
                mask,
                weight,
            },
        )
    }

    /// Gradients of the scalar node `loss` with respect to every parameter
    /// array, shaped like the parameters.
    pub fn backward(&self, loss: V) -> Vec<Mat> {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut pgrads: Vec<Mat> = self
            .params
            .iter()
            .map(|p| Mat::zeros(p.rows, p.cols))
            .collect();
        grads[loss.0] = Some(Mat::from_vec(1, 1, vec![1.0]));

        fn acc(grads: &mut [Option<Mat>], v: V, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Param(i) => pgrads[*i].add_assign(&g),
                Op::Const => {}
                Op::MatMul(a, b) => {
                    let da = matmul_bt(&g, self.value(*b));
                    let db = matmul_at(self.value(*a), &g);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::MatMulBt(a, b) => {
                    let da = matmul(&g, self.value(*b));
                    let db = matmul_at(&g, self.value(*a));
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, bias) => {
                    let mut db = Mat::zeros(1, g.cols);
                    for i in 0..g.rows {
                        for (x, y) in db.data.iter_mut().zip(g.row(i)) {
                            *x += y;
                        }
                    }
                    acc(&mut grads, *bias, db);
                    acc(&mut grads, *a, g);
                }
                Op::Scale(a, s) => {
                    let mut da = g;
                    da.data.iter_mut().for_each(|x| *x *= s);
                    acc(&mut grads, *a, da);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(*gain);
                    let n = g.cols as f64;
                    let mut dgain = Mat::zeros(1, g.cols);
                    let mut dbias = Mat::zeros(1, g.cols);
                    let mut dx = Mat::zeros(g.rows, g.cols);
                    let mut dxhat = vec![0.0; g.cols];
                    for (i, inv) in inv_std.iter().enumerate() {
                        let (gr, hr) = (g.row(i), xhat.row(i));
                        for j in 0..g.cols {
                            dgain.data[j] += gr[j] * hr[j];
                            dbias.data[j] += gr[j];
                            dxhat[j] = gr[j] * gv.data[j];
                        }
                        let s1: f64 = dxhat.iter().sum();
                        let s2: f64 = dxhat.iter().zip(hr).map(|(a, b)| a * b).sum();
                        let o = dx.row_mut(i);
                        for j in 0..o.len() {
                            o[j] = inv / n * (n * dxhat[j] - s1 - hr[j] * s2);
                        }
                    }
                    acc(&mut grads, *gain, dgain);
                    acc(&mut grads, *bias, dbias);
                    acc(&mut grads, *x, dx);
                }
                Op::Gelu(a) => {
                    let mut da = g;
                    for (d, x) in da.data.iter_mut().zip(&self.value(*a).data) {
                        *d *= gelu_grad(*x);
                    }
                    acc(&mut grads, *a, da);
                }
                Op::SliceCols(a, start) => {
                    let av = self.value(*a);
                    let mut da = Mat::zeros(av.rows, av.cols);
                    for i in 0..g.rows {
                        da.row_mut(i)[*start..*start + g.cols].copy_from_slice(g.row(i));
                    }
                    acc(&mut grads, *a, da);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let cols = self.value(p).cols;
                        let mut dp = Mat::zeros(g.rows, cols);
                        for i in 0..g.rows {
                            dp.row_mut(i).copy_from_slice(&g.row(i)[off..off + cols]);
                        }
                        off += cols;
                        acc(&mut grads, p, dp);
                    }
                }
                Op::MaskedSoftmax(a) => {
                    let y = &self.nodes[idx].value;
                    let mut da = Mat::zeros(y.rows, y.cols);
                    for i in 0..y.rows {
                        let (yr, gr) = (y.row(i), g.row(i));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for (j, d) in da.row_mut(i).iter_mut().enumerate() {
                            *d = yr[j] * (gr[j] - dot);
                        }
                    }
                    acc(&mut grads, *a, da);
                }
                Op::ScaleRowsByCol(a, gate, col) => {
                    let (av, gv) = (self.value(*a), self.value(*gate));
                    let mut da = Mat::zeros(av.rows, av.cols);
                    let mut dg = Mat::zeros(gv.rows, gv.cols);
                    for i in 0..av.rows {
                        let s = gv.at(i, *col);
                        let (ar, gr) = (av.row(i), g.row(i));
                        *dg.at_mut(i, *col) = ar.iter().zip(gr).map(|(x, y)| x * y).sum();
                        for (j, d) in da.row_mut(i).iter_mut().enumerate() {
                            *d = gr[j] * s;
                        }
                    }
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *gate, dg);
                }
                Op::StudentNll {
                    raw,
                    target,
                    mask,
                    weight,
                } => {
                    let rv = self.value(*raw);
                    let p = rv.cols / 3;
                    let upstream = g.data[0] * weight;
                    let mut dr = Mat::zeros(rv.rows, rv.cols);
                    for i in 0..rv.rows {
                        let r = rv.row(i);
                        let (rn, rm, rs) =
                            (r[..p].to_vec(), r[p..2 * p].to_vec(), r[2 * p..].to_vec());
                        let o = dr.row_mut(i);
                        for j in 0..p {
                            if !mask[i * p + j] {
                                continue;
                            }
                            let (nu, mu, sigma) = constrain(rn[j], rm[j], rs[j]);
                            let (dnu, dmu, dsigma) =
                                student_t_nll_grad(target[i * p + j], nu, mu, sigma);
                            o[j] = upstream * dnu * sigmoid(rn[j]);
                            o[p + j] = upstream * dmu;
                            o[2 * p + j] = upstream * dsigma * sigmoid(rs[j]);
                        }
                    }
                    acc(&mut grads, *raw, dr);
                }
            }
        }
        pgrads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences of a scalar-valued tape program.
    fn check(params: Vec<Mat>, build: impl Fn(&mut Tape) -> V) {
        let tape = {
            let mut t = Tape::new(&params);
            let l = build(&mut t);
            (t.backward(l), l)
        };
        let (grads, _) = tape;
        let h = 1e-5;
        for (k, p) in params.iter().enumerate() {
            for c in 0..p.data.len() {
                let eval = |delta: f64| {
                    let mut ps = params.clone();
                    ps[k].data[c] += delta;
                    let mut t = Tape::new(&ps);
                    let l = build(&mut t);
                    t.value(l).data[0]
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let g = grads[k].data[c];
                assert!(
                    (fd - g).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "param {k}[{c}]: analytic {g}, numeric {fd}"
                );
            }
        }
    }

    fn seq(rows: usize, cols: usize, seed: f64) -> Mat {
        let data = (0..rows * cols)
            .map(|i| ((i as f64 + 1.0) * seed).sin())
            .collect();
        Mat::from_vec(rows, cols, data)
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let params = vec![
            seq(3, 4, 0.7),
            seq(4, 6, 1.3),
            seq(1, 6, 2.1),
            seq(1, 6, 0.4),
            seq(3, 6, 0.9),
        ];
        check(params, |t| {
            let x = t.param(0);
            let w = t.param(1);
            let h = t.matmul(x, w);
            let (g, b) = (t.param(2), t.param(3));
            let h = t.layer_norm(h, g, b);
            let h = t.gelu(h);
            let skip = t.param(4);
            let h = t.add(h, skip);
            let s = t.matmul_bt(h, skip);
            let mask = vec![true, false, true, true, true, false, false, true, true];
            let a = t.masked_softmax(s, mask);
            let mixed = t.matmul(a, h);
            let left = t.slice_cols(mixed, 0, 2);
            let right = t.slice_cols(mixed, 2, 4);
            let scaled = t.scale_rows_by_col(right, a, 1);
            let joined = t.concat_cols(&[scaled, left]);
            let bias = t.param(3);
            let joined = t.add_row(joined, bias);
            let joined = t.scale(joined, 0.7);
            let target = seq(3, 2, 3.3);
            t.student_nll(
                joined,
                &target,
                vec![true, true, false, true, true, true],
                0.5,
            )
        });
    }
}
