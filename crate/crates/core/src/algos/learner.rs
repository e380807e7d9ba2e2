use std::io::Write;

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use super::nets::{message_backward, with_message, Nets, NetsArch, PolicyNet};
use super::{AlgoConfig, AlgoError, AlgoId, LossMap};
use crate::dataset::{Batch, TransitionBuffer};
use crate::env::ActionSpec;
use crate::nn::{zeros_like, Adam, MlpCache, Params, TargetPair};
use crate::seed::rng_for;

/// Test hooks that replace a computed quantity with a fixed one.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    /// Treat every advantage as zero in advantage-weighted policy losses.
    pub zero_advantage: bool,
    /// Fixed TD3+BC actor scale instead of `α / mean|Q|`.
    pub lambda: Option<f32>,
    pub cql_alpha: Option<f32>,
    pub omar_coe: Option<f32>,
    pub icq_beta_critic: Option<f32>,
}

pub(crate) struct Encoded {
    cache: MlpCache,
    pub feat: Array2<f32>,
    src: Option<Vec<usize>>,
}

/// Training state of one algorithm run.
#[derive(Clone, Debug)]
pub struct Learner {
    pub config: AlgoConfig,
    pub spec: ActionSpec,
    pub obs_dim: usize,
    pub n_agents: usize,
    pub nets: TargetPair<Nets>,
    pub adam: Adam,
    /// Separate optimizer for the delayed TD3+BC actor.
    pub actor_adam: Adam,
    pub step: u64,
    /// Number of target evaluations at actions not taken from the data.
    /// Stays zero for the in-sample ICQ family.
    pub ood_target_evals: u64,
    pub(crate) rng: ChaCha8Rng,
}

impl Learner {
    pub fn new(config: AlgoConfig, spec: ActionSpec, obs_dim: usize, n_agents: usize) -> Result<Self, AlgoError> {
        config.validate()?;
        let algo = config.algo;
        if algo.is_multi_agent() && n_agents < 2 {
            return Err(AlgoError::Incompatible { algo, reason: "needs multi-agent (Trio) data".into() });
        }
        if !algo.is_multi_agent() && n_agents != 1 {
            return Err(AlgoError::Incompatible {
                algo,
                reason: format!("single-controller algorithm, data has {n_agents} agents per step"),
            });
        }
        let arch = NetsArch::for_algo(&config, &spec, obs_dim, n_agents);
        let online = Nets::new(&arch, &mut rng_for(config.seed, &[0x1417]));
        Ok(Learner {
            nets: TargetPair::new(online, config.target_update),
            adam: Adam::new(config.lr),
            actor_adam: Adam::new(config.lr),
            rng: rng_for(config.seed, &[0x7A1]),
            step: 0,
            ood_target_evals: 0,
            spec,
            obs_dim,
            n_agents,
            config,
        })
    }

    pub fn for_buffer(config: AlgoConfig, buffer: &TransitionBuffer) -> Result<Self, AlgoError> {
        Learner::new(config, buffer.spec.clone(), buffer.obs_dim, buffer.n_agents)
    }

    pub fn algo(&self) -> AlgoId {
        self.config.algo
    }

    /// Losses and gradients on `batch` without touching the parameters.
    pub fn compute(&mut self, batch: &Batch, ov: &Overrides) -> Result<(LossMap, Nets), AlgoError> {
        self.check_batch(batch)?;
        match self.config.algo.base() {
            AlgoId::Bc => self.bc(batch),
            AlgoId::Cql | AlgoId::CommCql => self.cql(batch, ov),
            AlgoId::QmixCql => self.qmix_cql(batch, ov),
            AlgoId::Iql => self.iql(batch, ov),
            AlgoId::Td3Bc => self.td3bc(batch, ov, true),
            AlgoId::IndIcq | AlgoId::Maicq => self.icq(batch, ov),
            AlgoId::Omar => self.omar(batch, ov),
            other => unreachable!("{other} has a base algorithm"),
        }
    }

    /// Losses on `batch`; consumes loss randomness like a real step would.
    pub fn losses(&mut self, batch: &Batch, ov: &Overrides) -> Result<LossMap, AlgoError> {
        Ok(self.compute(batch, ov)?.0)
    }

    pub fn train_step(&mut self, batch: &Batch) -> Result<LossMap, AlgoError> {
        self.check_batch(batch)?;
        let ov = Overrides::default();
        let (losses, mut grads) = if self.config.algo == AlgoId::Td3Bc {
            let actor = self.step.is_multiple_of(self.config.policy_delay);
            self.td3bc(batch, &ov, actor)?
        } else {
            self.compute(batch, &ov)?
        };
        if let Some((k, _)) = losses.iter().find(|(_, v)| !v.is_finite()) {
            return Err(AlgoError::NonFinite(format!("loss '{k}' at step {}", self.step)));
        }
        if !grads.all_finite() {
            return Err(AlgoError::NonFinite(format!("gradients at step {}", self.step)));
        }
        if self.config.algo == AlgoId::Td3Bc {
            let actor_step = self.step.is_multiple_of(self.config.policy_delay);
            let mut pi = self.nets.online.pi.take().expect("TD3+BC actor");
            let gpi = grads.pi.take().expect("TD3+BC actor gradient");
            self.adam.step(&mut self.nets.online, &grads);
            if actor_step {
                self.actor_adam.step(&mut pi, &gpi);
            }
            self.nets.online.pi = Some(pi);
        } else {
            self.adam.step(&mut self.nets.online, &grads);
        }
        self.nets.update();
        self.step += 1;
        if !self.nets.online.all_finite() {
            return Err(AlgoError::NonFinite(format!("parameters after step {}", self.step)));
        }
        Ok(losses)
    }

    /// Execution-time network built from the online parameters.
    pub fn policy(&self) -> PolicyNet {
        self.nets.online.policy(&self.spec, self.config.algo.is_value_based())
    }

    /// Online per-head Q values for `obs` (`rows × obs_dim`), without communication.
    pub fn q_values(&self, obs: &Array2<f32>) -> Option<Array2<f32>> {
        let n = &self.nets.online;
        n.q.as_ref().map(|q| q.forward(&n.encoder.forward(obs)))
    }

    fn check_batch(&self, batch: &Batch) -> Result<(), AlgoError> {
        if batch.obs_dim != self.obs_dim || batch.spec != self.spec || batch.n_agents != self.n_agents {
            return Err(AlgoError::Incompatible {
                algo: self.config.algo,
                reason: "batch layout differs from the learner's".into(),
            });
        }
        Ok(())
    }

    pub(crate) fn obs(&self, batch: &Batch) -> Array2<f32> {
        Array2::from_shape_vec((batch.rows(), self.obs_dim), batch.obs.clone()).expect("obs shape")
    }

    pub(crate) fn next_obs(&self, batch: &Batch) -> Array2<f32> {
        Array2::from_shape_vec((batch.rows(), self.obs_dim), batch.next_obs.clone()).expect("obs shape")
    }

    pub(crate) fn encode(&self, nets: &Nets, obs: &Array2<f32>) -> Encoded {
        let cache = nets.encoder.forward_cached(obs);
        if nets.arch.comm {
            let (feat, src) = with_message(cache.output(), self.n_agents);
            Encoded { cache, feat, src: Some(src) }
        } else {
            let feat = cache.output().clone();
            Encoded { cache, feat, src: None }
        }
    }

    pub(crate) fn features(&self, nets: &Nets, obs: &Array2<f32>) -> Array2<f32> {
        let f = nets.encoder.forward(obs);
        if nets.arch.comm {
            with_message(&f, self.n_agents).0
        } else {
            f
        }
    }

    pub(crate) fn encode_backward(&self, enc: &Encoded, dfeat: &Array2<f32>, grads: &mut Nets) {
        let online = &self.nets.online;
        let df = match &enc.src {
            Some(src) => message_backward(dfeat, src, self.n_agents),
            None => dfeat.clone(),
        };
        online.encoder.backward(&enc.cache, &df, &mut grads.encoder);
    }

    pub(crate) fn zero_grads(&self) -> Nets {
        zeros_like(&self.nets.online)
    }
}

/// Loss values recorded during training, in step order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossLog {
    pub rows: Vec<(u64, String, f64)>,
}

impl LossLog {
    pub fn push(&mut self, step: u64, losses: &LossMap) {
        self.rows.extend(losses.iter().map(|(k, v)| (step, k.clone(), *v)));
    }

    /// Values of one loss in step order.
    pub fn series(&self, name: &str) -> Vec<f64> {
        self.rows.iter().filter(|(_, k, _)| k == name).map(|(_, _, v)| *v).collect()
    }
}

/// CSV with header `step,loss_name,value`.
pub fn write_loss_csv(log: &LossLog, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "step,loss_name,value")?;
    for (s, k, v) in &log.rows {
        writeln!(out, "{s},{k},{v}")?;
    }
    Ok(())
}

/// Train `config.max_steps` updates on uniformly sampled batches. Calls
/// `on_step` after every update with the step number and its losses.
pub fn train(
    buffer: &TransitionBuffer,
    config: &AlgoConfig,
    mut on_step: impl FnMut(u64, &LossMap),
) -> Result<(Learner, LossLog), AlgoError> {
    if buffer.is_empty() {
        return Err(AlgoError::Config("training buffer is empty".into()));
    }
    let mut learner = Learner::for_buffer(config.clone(), buffer)?;
    let mut batch_rng = rng_for(config.seed, &[0xBA7C]);
    let mut log = LossLog::default();
    for _ in 0..config.max_steps {
        let batch = buffer.sample(&mut batch_rng, config.batch_size);
        let losses = learner.train_step(&batch)?;
        let step = learner.step;
        if config.log_every > 0 && (step % config.log_every == 0 || step == config.max_steps) {
            log.push(step, &losses);
        }
        on_step(step, &losses);
    }
    Ok((learner, log))
}
