//! Forward graph, Student-T loss and gradients.

use hybridcast_core::data::CALENDAR_DIM;
use hybridcast_core::stats::{student_t_nll, StudentT};
use hybridcast_core::{Error, FreqClass, Frequency};

use crate::error::{Result, TsfmError};
use crate::mat::Mat;
use crate::params::{LayerIdx, Params};
use crate::tape::{constrain, Tape, V};
use crate::tokenize::PatchToken;

/// Outputs of one forward pass over a token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Per token: distributions of the next `patch_len` positions
    /// (normalized space).
    pub dists: Vec<Vec<StudentT>>,
    /// Final hidden states after the closing layer norm, `tokens × d_model`.
    pub hidden: Mat,
    /// Per layer: full gate softmax before top-k, `tokens × n_experts`.
    pub gate_probs: Vec<Mat>,
    /// Per layer: renormalized top-k gate weights.
    pub gate_weights: Vec<Mat>,
}

pub(crate) struct Graph {
    pub head: V,
    pub hidden: V,
    pub gate_probs: Vec<V>,
    pub gate_weights: Vec<V>,
    pub aux: Option<V>,
}

fn ensure_finite(tape: &Tape, v: V, location: impl FnOnce() -> String) -> Result<()> {
    if tape.value(v).is_finite() {
        Ok(())
    } else {
        Err(TsfmError::NonFinite {
            what: "activation",
            location: location(),
        })
    }
}

/// Indices of the `k` largest entries of `row`; ties go to the lower index.
fn top_k(row: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Attention mask: key `j` is visible to query `i` when `j ≤ i` and token
/// `j` holds at least one observation. A fully padded query still sees
/// itself so every softmax row is defined.
fn attention_mask(tokens: &[PatchToken]) -> Vec<bool> {
    let n = tokens.len();
    let observed: Vec<bool> = tokens.iter().map(|t| !t.is_fully_padded()).collect();
    let mut mask = vec![false; n * n];
    for i in 0..n {
        for j in 0..=i {
            mask[i * n + j] = observed[j] || i == j;
        }
    }
    mask
}

/// `[values⊙observed, observed]` rows, `tokens × 2P`.
fn patch_inputs(tokens: &[PatchToken], p: usize) -> Mat {
    let mut x = Mat::zeros(tokens.len(), 2 * p);
    for (i, t) in tokens.iter().enumerate() {
        let row = x.row_mut(i);
        for j in 0..p {
            if !t.pad_mask[j] {
                row[j] = t.values[j];
                row[p + j] = 1.0;
            }
        }
    }
    x
}

fn validate_tokens(params: &Params, tokens: &[PatchToken]) -> Result<usize> {
    let cfg = params.config();
    let Some(first) = tokens.first() else {
        return Err(Error::EmptyInput("token stream".into()).into());
    };
    let p = first.scale;
    if params.layout.scale(p).is_none() {
        return Err(Error::arg(format!("patch length {p} is not configured")).into());
    }
    if let Some(bad) = tokens
        .iter()
        .find(|t| t.scale != p || t.values.len() != p || t.pad_mask.len() != p)
    {
        return Err(Error::arg(format!(
            "token of scale {} and length {} in a stream of scale {p}",
            bad.scale,
            bad.values.len()
        ))
        .into());
    }
    if cfg.positional_embedding && tokens.len() > cfg.context_patches {
        return Err(Error::arg(format!(
            "{} tokens exceed the position table of {}",
            tokens.len(),
            cfg.context_patches
        ))
        .into());
    }
    Ok(p)
}

fn attention(tape: &mut Tape, params: &Params, l: &LayerIdx, x: V, mask: &[bool]) -> V {
    let cfg = params.config();
    let dh = cfg.head_dim();
    let (g, b) = (tape.param(l.ln1_g), tape.param(l.ln1_b));
    let xn = tape.layer_norm(x, g, b);
    let (wq, wk, wv, wo) = (
        tape.param(l.wq),
        tape.param(l.wk),
        tape.param(l.wv),
        tape.param(l.wo),
    );
    let q = tape.matmul(xn, wq);
    let k = tape.matmul(xn, wk);
    let v = tape.matmul(xn, wv);
    let heads: Vec<V> = (0..cfg.n_heads)
        .map(|h| {
            let qh = tape.slice_cols(q, h * dh, dh);
            let kh = tape.slice_cols(k, h * dh, dh);
            let vh = tape.slice_cols(v, h * dh, dh);
            let s = tape.matmul_bt(qh, kh);
            let s = tape.scale(s, 1.0 / (dh as f64).sqrt());
            let a = tape.masked_softmax(s, mask.to_vec());
            tape.matmul(a, vh)
        })
        .collect();
    let o = if heads.len() == 1 {
        heads[0]
    } else {
        tape.concat_cols(&heads)
    };
    tape.matmul(o, wo)
}

pub(crate) struct MoeNodes {
    pub out: V,
    pub probs: V,
    pub weights: V,
    pub aux: Option<V>,
}

/// Gated mixture of expert feed-forward blocks applied to `xn`.
pub(crate) fn moe(tape: &mut Tape, params: &Params, l: &LayerIdx, xn: V) -> MoeNodes {
    let cfg = params.config();
    let n = tape.value(xn).rows;
    let e_count = cfg.n_experts;
    let wg = tape.param(l.gate);
    let logits = tape.matmul(xn, wg);
    let probs = tape.masked_softmax(logits, vec![true; n * e_count]);
    let mut selected = vec![false; n * e_count];
    {
        let lv = tape.value(logits);
        for i in 0..n {
            for e in top_k(lv.row(i), cfg.top_k_experts) {
                selected[i * e_count + e] = true;
            }
        }
    }
    let weights = tape.masked_softmax(logits, selected.clone());
    let mut out: Option<V> = None;
    for (e, ex) in l.experts.iter().enumerate() {
        if (0..n).all(|i| !selected[i * e_count + e]) {
            continue;
        }
        let (w1, b1, w2, b2) = (
            tape.param(ex.w1),
            tape.param(ex.b1),
            tape.param(ex.w2),
            tape.param(ex.b2),
        );
        let h = tape.matmul(xn, w1);
        let h = tape.add_row(h, b1);
        let h = tape.gelu(h);
        let h = tape.matmul(h, w2);
        let h = tape.add_row(h, b2);
        let y = tape.scale_rows_by_col(h, weights, e);
        out = Some(match out {
            Some(acc) => tape.add(acc, y),
            None => y,
        });
    }
    let aux = (cfg.aux_loss_coef > 0.0).then(|| {
        // E · Σ_e f_e · P_e with f the routed fraction (constant) and P the
        // mean gate probability.
        let mut frac = Mat::zeros(e_count, 1);
        for i in 0..n {
            for e in 0..e_count {
                if selected[i * e_count + e] {
                    frac.data[e] += 1.0 / (n * cfg.top_k_experts) as f64;
                }
            }
        }
        let avg = tape.constant(Mat::from_vec(1, n, vec![1.0 / n as f64; n]));
        let mean_p = tape.matmul(avg, probs);
        let f = tape.constant(frac);
        let dot = tape.matmul(mean_p, f);
        tape.scale(dot, e_count as f64)
    });
    MoeNodes {
        out: out.expect("top-k selects at least one expert"),
        probs,
        weights,
        aux,
    }
}

pub(crate) fn build(
    tape: &mut Tape,
    params: &Params,
    tokens: &[PatchToken],
    freq: Frequency,
) -> Result<Graph> {
    let p = validate_tokens(params, tokens)?;
    let cfg = params.config();
    let lay = &params.layout;
    let scale = lay.scale(p).expect("validated");
    let n = tokens.len();

    let xp = tape.constant(patch_inputs(tokens, p));
    let (pw, pb) = (tape.param(scale.patch_w), tape.param(scale.patch_b));
    let emb = tape.matmul(xp, pw);
    let mut x = tape.add_row(emb, pb);

    let mut cal = Mat::zeros(n, CALENDAR_DIM);
    for (i, t) in tokens.iter().enumerate() {
        cal.row_mut(i).copy_from_slice(&t.calendar.encode());
    }
    let cal = tape.constant(cal);
    let (cw, cb) = (tape.param(lay.cal_w), tape.param(lay.cal_b));
    let ce = tape.matmul(cal, cw);
    x = tape.add(x, ce);
    x = tape.add_row(x, cb);

    let mut onehot = Mat::zeros(1, FreqClass::ALL.len());
    onehot.data[freq.class.index()] = 1.0;
    let onehot = tape.constant(onehot);
    let table = tape.param(lay.freq_table);
    let fe = tape.matmul(onehot, table);
    x = tape.add_row(x, fe);

    if let Some(pos) = lay.pos_table {
        let mut sel = Mat::zeros(n, cfg.context_patches);
        for i in 0..n {
            *sel.at_mut(i, i) = 1.0;
        }
        let sel = tape.constant(sel);
        let table = tape.param(pos);
        let pe = tape.matmul(sel, table);
        x = tape.add(x, pe);
    }
    ensure_finite(tape, x, || "embedding".into())?;

    let mask = attention_mask(tokens);
    let mut gate_probs = Vec::with_capacity(cfg.n_layers);
    let mut gate_weights = Vec::with_capacity(cfg.n_layers);
    let mut aux: Option<V> = None;
    for (li, l) in lay.layers.iter().enumerate() {
        let a = attention(tape, params, l, x, &mask);
        x = tape.add(x, a);
        let (g, b) = (tape.param(l.ln2_g), tape.param(l.ln2_b));
        let xn = tape.layer_norm(x, g, b);
        let m = moe(tape, params, l, xn);
        x = tape.add(x, m.out);
        gate_probs.push(m.probs);
        gate_weights.push(m.weights);
        if let Some(a) = m.aux {
            aux = Some(match aux {
                Some(acc) => tape.add(acc, a),
                None => a,
            });
        }
        ensure_finite(tape, x, || format!("layer {li}"))?;
    }
    let (g, b) = (tape.param(lay.lnf_g), tape.param(lay.lnf_b));
    let hidden = tape.layer_norm(x, g, b);
    let (hw, hb) = (tape.param(scale.head_w), tape.param(scale.head_b));
    let head = tape.matmul(hidden, hw);
    let head = tape.add_row(head, hb);
    ensure_finite(tape, head, || "output head".into())?;
    Ok(Graph {
        head,
        hidden,
        gate_probs,
        gate_weights,
        aux,
    })
}

fn head_dists(raw: &Mat) -> Vec<Vec<StudentT>> {
    let p = raw.cols / 3;
    (0..raw.rows)
        .map(|i| {
            let r = raw.row(i);
            (0..p)
                .map(|j| {
                    let (nu, mu, sigma) = constrain(r[j], r[p + j], r[2 * p + j]);
                    StudentT { nu, mu, sigma }
                })
                .collect()
        })
        .collect()
}

/// Runs the model over one token stream (all tokens of one scale).
pub fn forward(params: &Params, tokens: &[PatchToken], freq: Frequency) -> Result<ForwardOutput> {
    let mut tape = Tape::new(params.arrays());
    let g = build(&mut tape, params, tokens, freq)?;
    Ok(ForwardOutput {
        dists: head_dists(tape.value(g.head)),
        hidden: tape.value(g.hidden).clone(),
        gate_probs: g
            .gate_probs
            .iter()
            .map(|&v| tape.value(v).clone())
            .collect(),
        gate_weights: g
            .gate_weights
            .iter()
            .map(|&v| tape.value(v).clone())
            .collect(),
    })
}

/// Output of the mixture-of-experts block of layer `layer` for inputs `x`
/// (already normalized), with the renormalized gate weights.
pub fn moe_block(params: &Params, layer: usize, x: &Mat) -> Result<(Mat, Mat)> {
    let l = params
        .layout
        .layers
        .get(layer)
        .ok_or(Error::IndexOutOfRange {
            index: layer,
            len: params.layout.layers.len(),
        })?;
    let mut tape = Tape::new(params.arrays());
    let xn = tape.constant(x.clone());
    let m = moe(&mut tape, params, l, xn);
    Ok((tape.value(m.out).clone(), tape.value(m.weights).clone()))
}

/// One expert's feed-forward block: `GELU(x·W1 + b1)·W2 + b2`.
pub fn expert_ffn(params: &Params, layer: usize, expert: usize, x: &Mat) -> Result<Mat> {
    let l = params
        .layout
        .layers
        .get(layer)
        .ok_or(Error::IndexOutOfRange {
            index: layer,
            len: params.layout.layers.len(),
        })?;
    let ex = l.experts.get(expert).ok_or(Error::IndexOutOfRange {
        index: expert,
        len: l.experts.len(),
    })?;
    let a = params.arrays();
    let mut h = crate::mat::matmul(x, &a[ex.w1]);
    for i in 0..h.rows {
        for (v, b) in h.row_mut(i).iter_mut().zip(&a[ex.b1].data) {
            *v = crate::tape::gelu(*v + b);
        }
    }
    let mut out = crate::mat::matmul(&h, &a[ex.w2]);
    for i in 0..out.rows {
        for (v, b) in out.row_mut(i).iter_mut().zip(&a[ex.b2].data) {
            *v += b;
        }
    }
    Ok(out)
}

/// Mean Student-T NLL over unmasked positions (`mask[i] == true` counts).
pub fn nll_loss(pred: &[StudentT], target: &[f64], mask: &[bool]) -> Result<f64> {
    if pred.len() != target.len() || mask.len() != target.len() {
        return Err(Error::arg(format!(
            "lengths differ: {} predictions, {} targets, {} mask entries",
            pred.len(),
            target.len(),
            mask.len()
        ))
        .into());
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for ((d, y), &m) in pred.iter().zip(target).zip(mask) {
        if !m {
            continue;
        }
        if d.sigma.is_nan() || d.sigma <= 0.0 {
            return Err(Error::arg(format!("sigma must be positive, got {}", d.sigma)).into());
        }
        total += student_t_nll(*y, d.nu, d.mu, d.sigma);
        count += 1;
    }
    if count == 0 {
        return Err(Error::arg("no unmasked positions").into());
    }
    Ok(total / count as f64)
}

/// One teacher-forced training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tokens: Vec<PatchToken>,
    pub freq: Frequency,
    /// Row `i` holds the normalized values of the patch after token `i`.
    pub target: Mat,
    /// `true` where the target position counts.
    pub target_mask: Vec<bool>,
    /// Loss multiplier (1 outside DRO loss-multiplier mode).
    pub weight: f64,
}

impl Sample {
    fn observed(&self) -> usize {
        self.target_mask.iter().filter(|&&m| m).count()
    }
}

fn sample_tape<'p>(
    params: &'p Params,
    s: &Sample,
    denom: f64,
    n_samples: f64,
) -> Result<(Tape<'p>, V)> {
    let mut tape = Tape::new(params.arrays());
    let g = build(&mut tape, params, &s.tokens, s.freq)?;
    let nll = tape.student_nll(g.head, &s.target, s.target_mask.clone(), s.weight / denom);
    let loss = match g.aux {
        Some(aux) => {
            let aux = tape.scale(aux, params.config().aux_loss_coef * s.weight / n_samples);
            tape.add(nll, aux)
        }
        None => nll,
    };
    Ok((tape, loss))
}

fn batch_denominator(batch: &[Sample]) -> Result<f64> {
    let n: usize = batch.iter().map(Sample::observed).sum();
    if n == 0 {
        return Err(Error::arg("batch has no unmasked target positions").into());
    }
    Ok(n as f64)
}

/// Weighted mean NLL of a batch (plus the auxiliary term when enabled).
pub fn batch_loss(params: &Params, batch: &[Sample]) -> Result<f64> {
    let denom = batch_denominator(batch)?;
    let mut total = 0.0;
    for s in batch {
        let (tape, loss) = sample_tape(params, s, denom, batch.len() as f64)?;
        total += tape.value(loss).data[0];
    }
    Ok(total)
}

/// Batch loss and its gradient with respect to every parameter array.
pub fn loss_and_grad(params: &Params, batch: &[Sample]) -> Result<(f64, Vec<Mat>)> {
    let denom = batch_denominator(batch)?;
    let mut total = 0.0;
    let mut grads: Option<Vec<Mat>> = None;
    for s in batch {
        let (tape, loss) = sample_tape(params, s, denom, batch.len() as f64)?;
        total += tape.value(loss).data[0];
        let g = tape.backward(loss);
        match &mut grads {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| a.add_assign(b)),
            None => grads = Some(g),
        }
    }
    let grads = grads.expect("non-empty batch");
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(TsfmError::NonFinite {
            what: "gradient",
            location: params.names()[i].clone(),
        });
    }
    Ok((total, grads))
}
