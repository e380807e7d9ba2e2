//! BC, factored CQL (also IND+CQL and COMM+CQL), QMIX+CQL over heads, IQL
//! and TD3+BC.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;

use super::learner::{Learner, Overrides};
use super::losses::{
    self, advantage_weights, bc_loss, chosen_mean, chosen_mean_backward, factored_cql, greedy_actions,
    max_next_targets, per_head_values, summed_cql_penalty, td3bc_lambda, weighted_ce,
};
use super::{AlgoError, LossMap, Nets};
use crate::dataset::Batch;
use crate::env::ActionSpec;
use crate::nn::{expectile_loss, gumbel_softmax, softmax_backward, zeros_like, Mlp};

pub(crate) fn loss_map(items: &[(&str, f64)]) -> LossMap {
    items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub(crate) fn column(v: &[f32]) -> Array2<f32> {
    Array2::from_shape_vec((v.len(), 1), v.to_vec()).expect("column")
}

fn hcat(a: &Array2<f32>, b: &Array2<f32>) -> Array2<f32> {
    concatenate![Axis(1), *a, *b]
}

/// One-hot encoding of structured actions with inactive heads left at zero.
fn one_hot(spec: &ActionSpec, actions: &[usize], active: &[bool]) -> Array2<f32> {
    let (nh, offsets) = (spec.n_heads(), spec.offsets());
    let rows = actions.len() / nh;
    let mut out = Array2::<f32>::zeros((rows, spec.total_size()));
    for r in 0..rows {
        for h in 0..nh {
            if active[r * nh + h] {
                out[[r, offsets[h] + actions[r * nh + h]]] = 1.0;
            }
        }
    }
    out
}

/// Gumbel-softmax relaxation of a structured action.
struct Relaxed {
    /// Per-head relaxed samples, heads concatenated.
    soft: Array2<f32>,
    /// `soft` with heads inactive under the sampled button zeroed.
    masked: Array2<f32>,
    active: Vec<bool>,
}

fn relax(
    spec: &ActionSpec,
    logits: &Array2<f32>,
    legal: &[bool],
    t: f32,
    rng: &mut impl Rng,
) -> Result<Relaxed, AlgoError> {
    let (nh, offsets, s) = (spec.n_heads(), spec.offsets(), spec.total_size());
    let rows = logits.nrows();
    let mut soft = Array2::<f32>::zeros((rows, s));
    let mut active = Vec::with_capacity(rows * nh);
    for r in 0..rows {
        let mut hard = Vec::with_capacity(nh);
        for h in 0..nh {
            let (o, n) = (offsets[h], spec.head_sizes[h]);
            let l: Vec<f32> = (o..o + n).map(|k| logits[[r, k]]).collect();
            let g = gumbel_softmax(&l, &legal[r * s + o..r * s + o + n], t, rng)?;
            for (k, v) in g.soft.into_iter().enumerate() {
                soft[[r, o + k]] = v;
            }
            hard.push(g.hard);
        }
        active.extend(spec.active_heads(&hard));
    }
    let mut masked = soft.clone();
    for r in 0..rows {
        for h in 0..nh {
            if !active[r * nh + h] {
                masked.slice_mut(s![r, offsets[h]..offsets[h] + spec.head_sizes[h]]).fill(0.0);
            }
        }
    }
    Ok(Relaxed { soft, masked, active })
}

fn head(m: &Option<Mlp>) -> &Mlp {
    m.as_ref().expect("network present for this algorithm")
}

fn grad_head(m: &mut Option<Mlp>) -> &mut Mlp {
    m.as_mut().expect("network present for this algorithm")
}

impl Learner {
    pub(crate) fn bc(&mut self, batch: &Batch) -> Result<(LossMap, Nets), AlgoError> {
        let online = &self.nets.online;
        let enc = self.encode(online, &self.obs(batch));
        let pi = head(&online.pi);
        let pc = pi.forward_cached(&enc.feat);
        let (loss, dl) = bc_loss(pc.output(), batch)?;
        let mut g = self.zero_grads();
        let df = pi.backward(&pc, &dl, grad_head(&mut g.pi));
        self.encode_backward(&enc, &df, &mut g);
        Ok((loss_map(&[("bc_loss", loss)]), g))
    }

    pub(crate) fn cql(&mut self, batch: &Batch, ov: &Overrides) -> Result<(LossMap, Nets), AlgoError> {
        let alpha = ov.cql_alpha.unwrap_or(self.config.cql_alpha);
        let (online, target) = (&self.nets.online, &self.nets.target);
        let enc = self.encode(online, &self.obs(batch));
        let q = head(&online.q);
        let qc = q.forward_cached(&enc.feat);
        let qn = head(&target.q).forward(&self.features(target, &self.next_obs(batch)));
        let y = max_next_targets(&qn, batch, self.config.gamma)?;
        let terms = factored_cql(qc.output(), batch, &y, alpha)?;
        let mut g = self.zero_grads();
        let df = q.backward(&qc, &terms.grad, grad_head(&mut g.q));
        self.encode_backward(&enc, &df, &mut g);
        let q_data = losses::mean(&chosen_mean(qc.output(), &self.spec, &batch.actions, &batch.active));
        let map = loss_map(&[
            ("td_loss", terms.td),
            ("cql_penalty", terms.penalty),
            ("total_loss", terms.loss),
            ("q_data", q_data as f64),
        ]);
        self.ood_target_evals += batch.rows() as u64;
        Ok((map, g))
    }

    /// Heads play the role of agents: chosen per-head values of the executed
    /// heads are mixed into one joint value conditioned on the observation.
    pub(crate) fn qmix_cql(&mut self, batch: &Batch, ov: &Overrides) -> Result<(LossMap, Nets), AlgoError> {
        let alpha = ov.cql_alpha.unwrap_or(self.config.cql_alpha);
        let spec = &self.spec;
        let nh = spec.n_heads();
        let (online, target) = (&self.nets.online, &self.nets.target);
        let (obs, next_obs) = (self.obs(batch), self.next_obs(batch));
        let enc = self.encode(online, &obs);
        let q = head(&online.q);
        let qc = q.forward_cached(&enc.feat);
        let mask = |v: Array2<f32>, act: &[bool]| {
            Array2::from_shape_fn(v.dim(), |(r, h)| if act[r * nh + h] { v[[r, h]] } else { 0.0 })
        };
        let local = mask(per_head_values(qc.output(), spec, &batch.actions), &batch.active);
        let mixer = online.mixer.as_ref().expect("QMIX mixer");
        let (qtot, mc) = mixer.forward_cached(&obs, &local);

        let qn = head(&target.q).forward(&self.features(target, &next_obs));
        let greedy = greedy_actions(&qn, spec, &batch.next_legal)?;
        let next_active: Vec<bool> = greedy.chunks(nh).flat_map(|a| spec.active_heads(a)).collect();
        let next_local = mask(per_head_values(&qn, spec, &greedy), &next_active);
        let qtot_next = target.mixer.as_ref().expect("QMIX mixer").forward(&next_obs, &next_local);

        let rows = batch.rows();
        let mut td = 0.0f64;
        let mut dqtot = vec![0.0f32; rows];
        for r in 0..rows {
            let y = batch.reward[r] + self.config.gamma * (1.0 - batch.done[r]) * qtot_next[r];
            let diff = qtot[r] - y;
            td += (diff * diff) as f64;
            dqtot[r] = 2.0 * diff / rows as f32;
        }
        let td = td / rows as f64;
        let mut g = self.zero_grads();
        let dlocal = mixer.backward(&mc, &dqtot, g.mixer.as_mut().expect("QMIX mixer"));
        let (pen, mut dq) = summed_cql_penalty(qc.output(), batch, alpha)?;
        let offsets = spec.offsets();
        for r in 0..rows {
            for h in 0..nh {
                if batch.is_active(r, h) {
                    dq[[r, offsets[h] + batch.action(r, h)]] += dlocal[[r, h]];
                }
            }
        }
        let df = q.backward(&qc, &dq, grad_head(&mut g.q));
        self.encode_backward(&enc, &df, &mut g);
        let map = loss_map(&[
            ("td_loss", td),
            ("cql_penalty", pen),
            ("total_loss", td + alpha as f64 * pen),
            ("q_tot", qtot.mean().unwrap_or(0.0) as f64),
        ]);
        self.ood_target_evals += rows as u64;
        Ok((map, g))
    }

    pub(crate) fn iql(&mut self, batch: &Batch, ov: &Overrides) -> Result<(LossMap, Nets), AlgoError> {
        let cfg = &self.config;
        let spec = &self.spec;
        let (online, target) = (&self.nets.online, &self.nets.target);
        let (obs, next_obs) = (self.obs(batch), self.next_obs(batch));
        let enc = self.encode(online, &obs);
        let (q, v, pi) = (head(&online.q), head(&online.v), head(&online.pi));
        let (qc, vc, pc) = (q.forward_cached(&enc.feat), v.forward_cached(&enc.feat), pi.forward_cached(&enc.feat));

        let qt = head(&target.q).forward(&self.features(target, &obs));
        let q_tgt = chosen_mean(&qt, spec, &batch.actions, &batch.active);
        let v_next = v.forward(&self.features(online, &next_obs));
        let q_on = chosen_mean(qc.output(), spec, &batch.actions, &batch.active);
        let v_on: Vec<f32> = vc.output().column(0).to_vec();

        let u: Vec<f32> = q_tgt.iter().zip(&v_on).map(|(a, b)| a - b).collect();
        let (v_loss, gu) = expectile_loss(&u, cfg.iql_tau);
        let dv: Vec<f32> = gu.iter().map(|g| -g).collect();

        let rows = batch.rows();
        let mut q_loss = 0.0f64;
        let mut dq = vec![0.0f32; rows];
        for r in 0..rows {
            let y = batch.reward[r] + cfg.gamma * (1.0 - batch.done[r]) * v_next[[r, 0]];
            let diff = q_on[r] - y;
            q_loss += (diff * diff) as f64;
            dq[r] = 2.0 * diff / rows as f32;
        }
        let q_loss = q_loss / rows as f64;

        let adv: Vec<f32> = if ov.zero_advantage { vec![0.0; rows] } else { u.clone() };
        let w = advantage_weights(&adv, cfg.iql_beta, cfg.weight_clip);
        let (p_loss, dl) = weighted_ce(pc.output(), batch, &batch.actions, &batch.active, Some(&w))?;

        let mut g = self.zero_grads();
        let dqo = chosen_mean_backward(&dq, spec, &batch.actions, &batch.active);
        let mut df = q.backward(&qc, &dqo, grad_head(&mut g.q));
        df += &v.backward(&vc, &column(&dv), grad_head(&mut g.v));
        df += &pi.backward(&pc, &dl, grad_head(&mut g.pi));
        self.encode_backward(&enc, &df, &mut g);
        let map = loss_map(&[
            ("q_loss", q_loss),
            ("v_loss", v_loss as f64),
            ("policy_loss", p_loss),
            ("mean_weight", losses::mean(&w) as f64),
        ]);
        Ok((map, g))
    }

    /// Twin critics on `[features, action one-hot]`; the actor is trained
    /// through Gumbel-softmax samples when `actor` is set.
    pub(crate) fn td3bc(&mut self, batch: &Batch, ov: &Overrides, actor: bool) -> Result<(LossMap, Nets), AlgoError> {
        let mut rng = self.rng.clone();
        let cfg = &self.config;
        let (t, spec) = (cfg.gumbel_temperature, &self.spec);
        let (online, target) = (&self.nets.online, &self.nets.target);
        let (obs, next_obs) = (self.obs(batch), self.next_obs(batch));
        let rows = batch.rows();
        let fdim = online.arch.feat_dim();
        let enc = self.encode(online, &obs);
        let data_oh = one_hot(spec, &batch.actions, &batch.active);
        let x = hcat(&enc.feat, &data_oh);

        let ft = self.features(target, &next_obs);
        let lt = head(&target.pi).forward(&ft);
        let next = relax(spec, &lt, &batch.next_legal, t, &mut rng)?;
        let xt = hcat(&ft, &next.masked);
        let qt: Vec<Array1<f32>> = target.critics.iter().map(|c| c.forward(&xt).column(0).to_owned()).collect();
        let y: Vec<f32> =
            (0..rows).map(|r| batch.reward[r] + cfg.gamma * (1.0 - batch.done[r]) * qt[0][r].min(qt[1][r])).collect();

        let mut g = self.zero_grads();
        let mut dfeat = Array2::<f32>::zeros((rows, fdim));
        let mut critic_loss = 0.0f64;
        for (i, c) in online.critics.iter().enumerate() {
            let cc = c.forward_cached(&x);
            let mut dq = Array2::<f32>::zeros((rows, 1));
            for r in 0..rows {
                let diff = cc.output()[[r, 0]] - y[r];
                critic_loss += (diff * diff) as f64 / rows as f64;
                dq[[r, 0]] = 2.0 * diff / rows as f32;
            }
            let dx = c.backward(&cc, &dq, &mut g.critics[i]);
            dfeat += &dx.slice(s![.., ..fdim]);
        }

        let mut map = loss_map(&[("critic_loss", critic_loss)]);
        if actor {
            let pi = head(&online.pi);
            let pc = pi.forward_cached(&enc.feat);
            let sample = relax(spec, pc.output(), &batch.legal, t, &mut rng)?;
            let xa = hcat(&enc.feat, &sample.masked);
            let c1 = &online.critics[0];
            let ca = c1.forward_cached(&xa);
            let q1: Vec<f32> = ca.output().column(0).to_vec();
            let lambda = ov.lambda.unwrap_or_else(|| td3bc_lambda(&q1, cfg.td3bc_alpha));
            let actor_q = -(lambda as f64) * losses::mean(&q1) as f64;
            let mut scratch = zeros_like(c1);
            let dxa = c1.backward(&ca, &Array2::from_elem((rows, 1), -lambda / rows as f32), &mut scratch);
            let mut dy = dxa.slice(s![.., fdim..]).to_owned();

            let (bc, mut dl) = if cfg.td3bc_mse_bc {
                let mut mse = 0.0f64;
                for r in 0..rows {
                    for k in 0..spec.total_size() {
                        let d = sample.masked[[r, k]] - data_oh[[r, k]];
                        mse += (d * d) as f64 / rows as f64;
                        dy[[r, k]] += 2.0 * d / rows as f32;
                    }
                }
                (mse, Array2::<f32>::zeros((rows, spec.total_size())))
            } else {
                bc_loss(pc.output(), batch)?
            };
            let (nh, offsets) = (spec.n_heads(), spec.offsets());
            for r in 0..rows {
                for h in 0..nh {
                    if !sample.active[r * nh + h] {
                        continue;
                    }
                    let (o, n) = (offsets[h], spec.head_sizes[h]);
                    let yv: Vec<f32> = (o..o + n).map(|k| sample.soft[[r, k]]).collect();
                    let dyv: Vec<f32> = (o..o + n).map(|k| dy[[r, k]]).collect();
                    for (k, d) in softmax_backward(&yv, &dyv, t).into_iter().enumerate() {
                        dl[[r, o + k]] += d;
                    }
                }
            }
            dfeat += &pi.backward(&pc, &dl, grad_head(&mut g.pi));
            map.insert("actor_loss".into(), actor_q + bc);
            map.insert("actor_q".into(), actor_q);
            map.insert("bc_loss".into(), bc);
            map.insert("lambda".into(), lambda as f64);
        }
        self.encode_backward(&enc, &dfeat, &mut g);
        self.rng = rng;
        self.ood_target_evals += rows as u64;
        Ok((map, g))
    }
}
