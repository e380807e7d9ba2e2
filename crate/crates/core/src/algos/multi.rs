//! In-sample ICQ (independent and mixed) and discrete OMAR. The IND and COMM
//! wrappers reuse the single-controller losses in `single.rs`.

use ndarray::Array2;

use super::learner::{Learner, Overrides};
use super::losses::{
    self, advantage_weights, batch_softmax, chosen_mean, chosen_mean_backward, factored_cql, max_next_targets,
    omar_targets, weighted_ce,
};
use super::single::loss_map;
use super::{AlgoError, AlgoId, LossMap, Nets};
use crate::dataset::Batch;

fn centered(x: &[f32]) -> Vec<f32> {
    let m = losses::mean(x);
    x.iter().map(|v| v - m).collect()
}

impl Learner {
    /// Critic targets use only the stored next actions, so no value is ever
    /// queried outside the data. Critic rows are weighted by a batch softmax
    /// of the next-step advantage; the policy by `exp(A / β_policy)`.
    pub(crate) fn icq(&mut self, batch: &Batch, ov: &Overrides) -> Result<(LossMap, Nets), AlgoError> {
        let cfg = &self.config;
        let spec = &self.spec;
        let beta_c = ov.icq_beta_critic.unwrap_or(cfg.icq_beta_critic);
        let (online, target) = (&self.nets.online, &self.nets.target);
        let (obs, next_obs) = (self.obs(batch), self.next_obs(batch));
        let enc = self.encode(online, &obs);
        let (q, pi) = (online.q.as_ref().expect("ICQ critic"), online.pi.as_ref().expect("ICQ actor"));
        let (qc, pc) = (q.forward_cached(&enc.feat), pi.forward_cached(&enc.feat));
        let q_on = chosen_mean(qc.output(), spec, &batch.actions, &batch.active);

        let nh = spec.n_heads();
        let next_active: Vec<bool> = batch.next_actions.chunks(nh).flat_map(|a| spec.active_heads(a)).collect();
        let qn = target.q.as_ref().expect("ICQ critic").forward(&self.features(target, &next_obs));
        let q_next = chosen_mean(&qn, spec, &batch.next_actions, &next_active);

        let rows = batch.rows();
        let mut g = self.zero_grads();
        let (critic_loss, dq_rows, adv_rows, w_c) = if cfg.algo == AlgoId::Maicq {
            let m = self.n_agents;
            let n_t = rows / m;
            let d = self.obs_dim;
            let state = obs.clone().into_shape_with_order((n_t, m * d)).expect("joint state");
            let next_state = next_obs.clone().into_shape_with_order((n_t, m * d)).expect("joint state");
            let agents = |v: &[f32]| Array2::from_shape_vec((n_t, m), v.to_vec()).expect("agent values");
            let mixer = online.mixer.as_ref().expect("MAICQ mixer");
            let (qtot, mc) = mixer.forward_cached(&state, &agents(&q_on));
            let qtot_next = target.mixer.as_ref().expect("MAICQ mixer").forward(&next_state, &agents(&q_next));
            let w_c = batch_softmax(&centered(qtot_next.as_slice().expect("contiguous")), beta_c);
            let mut loss = 0.0f64;
            let mut dtot = vec![0.0f32; n_t];
            for k in 0..n_t {
                let r_team = losses::mean(&batch.reward[k * m..(k + 1) * m]);
                let y = r_team + cfg.gamma * (1.0 - batch.done[k * m]) * qtot_next[k];
                let diff = qtot[k] - y;
                loss += (w_c[k] * diff * diff) as f64;
                dtot[k] = 2.0 * w_c[k] * diff;
            }
            let dq = mixer.backward(&mc, &dtot, g.mixer.as_mut().expect("MAICQ mixer"));
            let adv_t = centered(qtot.as_slice().expect("contiguous"));
            let adv: Vec<f32> = (0..rows).map(|r| adv_t[r / m]).collect();
            (loss, dq.into_raw_vec_and_offset().0, adv, w_c)
        } else {
            let w_c = batch_softmax(&centered(&q_next), beta_c);
            let mut loss = 0.0f64;
            let mut dq = vec![0.0f32; rows];
            for r in 0..rows {
                let y = batch.reward[r] + cfg.gamma * (1.0 - batch.done[r]) * q_next[r];
                let diff = q_on[r] - y;
                loss += (w_c[r] * diff * diff) as f64;
                dq[r] = 2.0 * w_c[r] * diff;
            }
            (loss, dq, centered(&q_on), w_c)
        };

        let adv = if ov.zero_advantage { vec![0.0; rows] } else { adv_rows };
        let w_p = advantage_weights(&adv, 1.0 / cfg.icq_beta_policy, cfg.weight_clip);
        let (p_loss, dl) = weighted_ce(pc.output(), batch, &batch.actions, &batch.active, Some(&w_p))?;
        let dqo = chosen_mean_backward(&dq_rows, spec, &batch.actions, &batch.active);
        let mut df = q.backward(&qc, &dqo, g.q.as_mut().expect("ICQ critic"));
        df += &pi.backward(&pc, &dl, g.pi.as_mut().expect("ICQ actor"));
        self.encode_backward(&enc, &df, &mut g);
        let w_max = w_c.iter().copied().fold(0.0f32, f32::max);
        let map = loss_map(&[
            ("critic_loss", critic_loss),
            ("policy_loss", p_loss),
            ("critic_weight_max", w_max as f64),
            ("policy_weight_mean", losses::mean(&w_p) as f64),
        ]);
        Ok((map, g))
    }

    /// CQL critic per agent; the policy mixes advantage-weighted cloning
    /// with cloning of the best of `m` random legal actions under the critic.
    pub(crate) fn omar(&mut self, batch: &Batch, ov: &Overrides) -> Result<(LossMap, Nets), AlgoError> {
        let mut rng = self.rng.clone();
        let cfg = &self.config;
        let spec = &self.spec;
        let alpha = ov.cql_alpha.unwrap_or(cfg.cql_alpha);
        let coe = ov.omar_coe.unwrap_or(cfg.omar_coe);
        let (online, target) = (&self.nets.online, &self.nets.target);
        let enc = self.encode(online, &self.obs(batch));
        let (q, pi) = (online.q.as_ref().expect("OMAR critic"), online.pi.as_ref().expect("OMAR actor"));
        let (qc, pc) = (q.forward_cached(&enc.feat), pi.forward_cached(&enc.feat));
        let qn = target.q.as_ref().expect("OMAR critic").forward(&self.features(target, &self.next_obs(batch)));
        let y = max_next_targets(&qn, batch, cfg.gamma)?;
        let terms = factored_cql(qc.output(), batch, &y, alpha)?;

        let rows = batch.rows();
        let q_on = chosen_mean(qc.output(), spec, &batch.actions, &batch.active);
        let adv = if ov.zero_advantage { vec![0.0; rows] } else { centered(&q_on) };
        let w = advantage_weights(&adv, cfg.omar_beta, cfg.weight_clip);
        let (aw, dl_aw) = weighted_ce(pc.output(), batch, &batch.actions, &batch.active, Some(&w))?;
        let (best, best_active) = omar_targets(qc.output(), batch, cfg.omar_candidates, &mut rng);
        let (zo, dl_zo) = weighted_ce(pc.output(), batch, &best, &best_active, None)?;
        let p_loss = (1.0 - coe as f64) * aw + coe as f64 * zo;
        let dl = dl_aw * (1.0 - coe) + dl_zo * coe;

        let mut g = self.zero_grads();
        let mut df = q.backward(&qc, &terms.grad, g.q.as_mut().expect("OMAR critic"));
        df += &pi.backward(&pc, &dl, g.pi.as_mut().expect("OMAR actor"));
        self.encode_backward(&enc, &df, &mut g);
        self.rng = rng;
        self.ood_target_evals += rows as u64;
        let map = loss_map(&[
            ("td_loss", terms.td),
            ("cql_penalty", terms.penalty),
            ("critic_loss", terms.loss),
            ("awbc_loss", aw),
            ("zo_loss", zo),
            ("policy_loss", p_loss),
        ]);
        Ok((map, g))
    }
}
