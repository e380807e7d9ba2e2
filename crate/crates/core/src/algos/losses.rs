//! Loss terms on per-head network outputs. Outputs are `rows × Σ head_sizes`
//! with heads concatenated in spec order; every function returns the loss and
//! its gradient wrt those outputs.

use ndarray::Array2;
use rand::Rng;

use super::AlgoError;
use crate::dataset::Batch;
use crate::env::ActionSpec;
use crate::nn::{masked_argmax, masked_cross_entropy, masked_logsumexp};

fn row(out: &Array2<f32>, r: usize) -> &[f32] {
    let w = out.ncols();
    &out.as_slice().expect("standard layout")[r * w..(r + 1) * w]
}

fn legal_row<'a>(flat: &'a [bool], spec: &ActionSpec, r: usize, h: usize, offsets: &[usize]) -> &'a [bool] {
    let base = r * spec.total_size() + offsets[h];
    &flat[base..base + spec.head_sizes[h]]
}

/// `Σ_r w_r Σ_{h active} CE(logits_h, target_h) / rows`, with legal masks
/// taken from the batch's current state. Inactive heads get exactly zero
/// gradient.
pub fn weighted_ce(
    logits: &Array2<f32>,
    batch: &Batch,
    targets: &[usize],
    active: &[bool],
    weights: Option<&[f32]>,
) -> Result<(f64, Array2<f32>), AlgoError> {
    let spec = &batch.spec;
    let (rows, nh) = (batch.rows(), spec.n_heads());
    let offsets = spec.offsets();
    let mut grad = Array2::<f32>::zeros(logits.dim());
    let mut total = 0.0f64;
    for r in 0..rows {
        let w = weights.map_or(1.0, |w| w[r]);
        let lr = row(logits, r);
        for h in 0..nh {
            if !active[r * nh + h] {
                continue;
            }
            let (o, n) = (offsets[h], spec.head_sizes[h]);
            let (ce, g) = masked_cross_entropy(&lr[o..o + n], batch.legal(r, h), targets[r * nh + h])?;
            total += (w * ce) as f64;
            for (k, gk) in g.into_iter().enumerate() {
                grad[[r, o + k]] = w * gk / rows as f32;
            }
        }
    }
    Ok((total / rows as f64, grad))
}

/// Plain behaviour cloning on the batch's own actions.
pub fn bc_loss(logits: &Array2<f32>, batch: &Batch) -> Result<(f64, Array2<f32>), AlgoError> {
    weighted_ce(logits, batch, &batch.actions, &batch.active, None)
}

/// `min(exp(scale · A), clip)` per row.
pub fn advantage_weights(adv: &[f32], scale: f32, clip: f32) -> Vec<f32> {
    adv.iter().map(|&a| ((scale * a) as f64).exp().min(clip as f64) as f32).collect()
}

/// Softmax over the batch of `x / beta`.
pub fn batch_softmax(x: &[f32], beta: f32) -> Vec<f32> {
    let z: Vec<f64> = x.iter().map(|&v| v as f64 / beta as f64).collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|&v| (v / s) as f32).collect()
}

pub fn mean(x: &[f32]) -> f32 {
    (x.iter().map(|&v| v as f64).sum::<f64>() / x.len().max(1) as f64) as f32
}

/// Joint value of a structured action: the mean of `Q_h(a_h)` over the heads
/// the action executes.
pub fn chosen_mean(q: &Array2<f32>, spec: &ActionSpec, actions: &[usize], active: &[bool]) -> Vec<f32> {
    let (nh, offsets) = (spec.n_heads(), spec.offsets());
    (0..q.nrows())
        .map(|r| {
            let qr = row(q, r);
            let (mut s, mut n) = (0.0f64, 0usize);
            for h in 0..nh {
                if active[r * nh + h] {
                    s += qr[offsets[h] + actions[r * nh + h]] as f64;
                    n += 1;
                }
            }
            (s / n.max(1) as f64) as f32
        })
        .collect()
}

/// Gradient of `Σ_r d_r · chosen_mean_r` wrt `q`.
pub fn chosen_mean_backward(d: &[f32], spec: &ActionSpec, actions: &[usize], active: &[bool]) -> Array2<f32> {
    let (nh, offsets) = (spec.n_heads(), spec.offsets());
    let mut g = Array2::<f32>::zeros((d.len(), spec.total_size()));
    for (r, &dr) in d.iter().enumerate() {
        let n = (0..nh).filter(|&h| active[r * nh + h]).count().max(1) as f32;
        for h in 0..nh {
            if active[r * nh + h] {
                g[[r, offsets[h] + actions[r * nh + h]]] += dr / n;
            }
        }
    }
    g
}

/// Per-head greedy indices under the flat legal masks.
pub fn greedy_actions(q: &Array2<f32>, spec: &ActionSpec, legal: &[bool]) -> Result<Vec<usize>, AlgoError> {
    let offsets = spec.offsets();
    let mut out = Vec::with_capacity(q.nrows() * spec.n_heads());
    for r in 0..q.nrows() {
        let qr = row(q, r);
        for h in 0..spec.n_heads() {
            let o = offsets[h];
            out.push(masked_argmax(&qr[o..o + spec.head_sizes[h]], legal_row(legal, spec, r, h, &offsets))?);
        }
    }
    Ok(out)
}

/// `Q_h(s, a_h)` for every row and head, as `rows × n_heads`.
pub fn per_head_values(q: &Array2<f32>, spec: &ActionSpec, actions: &[usize]) -> Array2<f32> {
    let (nh, offsets) = (spec.n_heads(), spec.offsets());
    Array2::from_shape_fn((q.nrows(), nh), |(r, h)| q[[r, offsets[h] + actions[r * nh + h]]])
}

#[derive(Clone, Debug)]
pub struct CqlTerms {
    /// Mean over rows of the per-row mean squared TD error over active heads.
    pub td: f64,
    /// Mean over rows of the per-row mean of `logsumexp_legal Q_h − Q_h(a_h)`.
    pub penalty: f64,
    pub loss: f64,
    pub grad: Array2<f32>,
}

/// Factored CQL: per active head, `(Q_h(a_h) − y_h)² + α (lse_legal Q_h − Q_h(a_h))`,
/// averaged over active heads and rows. `y` is `rows × n_heads`.
pub fn factored_cql(q: &Array2<f32>, batch: &Batch, y: &Array2<f32>, alpha: f32) -> Result<CqlTerms, AlgoError> {
    let spec = &batch.spec;
    let (rows, nh, offsets) = (batch.rows(), spec.n_heads(), spec.offsets());
    let mut grad = Array2::<f32>::zeros(q.dim());
    let (mut td, mut pen) = (0.0f64, 0.0f64);
    for r in 0..rows {
        let qr = row(q, r);
        let n_act = (0..nh).filter(|&h| batch.is_active(r, h)).count().max(1) as f32;
        let scale = 1.0 / (n_act * rows as f32);
        for h in 0..nh {
            if !batch.is_active(r, h) {
                continue;
            }
            let (o, n, a) = (offsets[h], spec.head_sizes[h], batch.action(r, h));
            let qa = qr[o + a];
            let diff = qa - y[[r, h]];
            td += (diff * diff / n_act) as f64;
            grad[[r, o + a]] += 2.0 * diff * scale;
            let (lse, p) = masked_logsumexp(&qr[o..o + n], batch.legal(r, h))?;
            pen += ((lse - qa) / n_act) as f64;
            if alpha != 0.0 {
                for (k, pk) in p.into_iter().enumerate() {
                    grad[[r, o + k]] += alpha * pk * scale;
                }
                grad[[r, o + a]] -= alpha * scale;
            }
        }
    }
    let (td, penalty) = (td / rows as f64, pen / rows as f64);
    Ok(CqlTerms { td, penalty, loss: td + alpha as f64 * penalty, grad })
}

/// CQL regularizer summed over active heads, averaged over rows.
pub fn summed_cql_penalty(q: &Array2<f32>, batch: &Batch, alpha: f32) -> Result<(f64, Array2<f32>), AlgoError> {
    let spec = &batch.spec;
    let (rows, nh, offsets) = (batch.rows(), spec.n_heads(), spec.offsets());
    let mut grad = Array2::<f32>::zeros(q.dim());
    let mut pen = 0.0f64;
    for r in 0..rows {
        let qr = row(q, r);
        for h in 0..nh {
            if !batch.is_active(r, h) {
                continue;
            }
            let (o, n, a) = (offsets[h], spec.head_sizes[h], batch.action(r, h));
            let (lse, p) = masked_logsumexp(&qr[o..o + n], batch.legal(r, h))?;
            pen += (lse - qr[o + a]) as f64;
            for (k, pk) in p.into_iter().enumerate() {
                grad[[r, o + k]] += alpha * pk / rows as f32;
            }
            grad[[r, o + a]] -= alpha / rows as f32;
        }
    }
    Ok((pen / rows as f64, grad))
}

/// Per-head TD targets `r + γ(1 − done) max_legal Q_target(s', ·)`.
pub fn max_next_targets(q_next: &Array2<f32>, batch: &Batch, gamma: f32) -> Result<Array2<f32>, AlgoError> {
    let spec = &batch.spec;
    let offsets = spec.offsets();
    let mut y = Array2::<f32>::zeros((batch.rows(), spec.n_heads()));
    for r in 0..batch.rows() {
        let qr = row(q_next, r);
        for h in 0..spec.n_heads() {
            let o = offsets[h];
            let head = &qr[o..o + spec.head_sizes[h]];
            let best = masked_argmax(head, batch.next_legal(r, h))?;
            y[[r, h]] = batch.reward[r] + gamma * (1.0 - batch.done[r]) * head[best];
        }
    }
    Ok(y)
}

/// TD3+BC actor scale `α / mean|Q|`.
pub fn td3bc_lambda(q: &[f32], alpha: f32) -> f32 {
    let m = q.iter().map(|v| v.abs() as f64).sum::<f64>() / q.len().max(1) as f64;
    (alpha as f64 / m.max(1e-6)) as f32
}

/// Zeroth-order targets: per row, `m` structured actions drawn uniformly over
/// legal entries of each head; the one with the highest `chosen_mean` value
/// wins, ties to the earliest draw.
pub fn omar_targets(q: &Array2<f32>, batch: &Batch, m: usize, rng: &mut impl Rng) -> (Vec<usize>, Vec<bool>) {
    let spec = &batch.spec;
    let (nh, offsets) = (spec.n_heads(), spec.offsets());
    let mut actions = Vec::with_capacity(batch.rows() * nh);
    let mut active = Vec::with_capacity(batch.rows() * nh);
    for r in 0..batch.rows() {
        let qr = row(q, r);
        let mut best: Option<(f32, Vec<usize>, Vec<bool>)> = None;
        for _ in 0..m {
            let cand: Vec<usize> = (0..nh)
                .map(|h| {
                    let legal: Vec<usize> = (0..spec.head_sizes[h]).filter(|&k| batch.legal(r, h)[k]).collect();
                    legal[rng.random_range(0..legal.len())]
                })
                .collect();
            let act = spec.active_heads(&cand);
            let (s, n) = (0..nh)
                .filter(|&h| act[h])
                .fold((0.0f64, 0usize), |(s, n), h| (s + qr[offsets[h] + cand[h]] as f64, n + 1));
            let v = (s / n.max(1) as f64) as f32;
            if best.as_ref().is_none_or(|(bv, _, _)| v > *bv) {
                best = Some((v, cand, act));
            }
        }
        let (_, a, act) = best.expect("m >= 1");
        actions.extend(a);
        active.extend(act);
    }
    (actions, active)
}
