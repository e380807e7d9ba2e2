//! Offline RL and MARL baselines over structured action spaces.
//!
//! Single-controller: BC, CQL (factored per head), QMIX+CQL (heads as
//! agents under a monotonic mixer), IQL, TD3+BC. Multi-agent (Trio, shared
//! parameters): IND+BC, IND+CQL, IND+QMIX+CQL, COMM+CQL, IND+ICQ, MAICQ and a
//! discrete OMAR.

mod checkpoint;
mod learner;
pub mod losses;
mod multi;
mod nets;
mod policy;
mod single;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use learner::{train, write_loss_csv, Learner, LossLog, Overrides};
pub use nets::{message_backward, with_message, MixerArch, Nets, NetsArch, PolicyNet};
pub use policy::TrainedPolicy;

use crate::env::Mode;
use crate::nn::{NnError, TargetUpdate};

pub type LossMap = BTreeMap<String, f64>;

#[derive(Debug, Error)]
pub enum AlgoError {
    #[error("invalid algorithm config: {0}")]
    Config(String),
    #[error("unknown algorithm '{0}'")]
    Unknown(String),
    #[error("{algo} cannot train on this data: {reason}")]
    Incompatible { algo: AlgoId, reason: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoId {
    Bc,
    Cql,
    QmixCql,
    Iql,
    Td3Bc,
    IndBc,
    IndCql,
    IndQmixCql,
    CommCql,
    IndIcq,
    Maicq,
    Omar,
}

/// How the per-agent rows of a batch are used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Paradigm {
    /// Every agent row is an independent sample (also the single-controller case).
    Independent,
    /// Agents exchange a max-pooled message.
    Comm,
    /// Joint information in the training loss only.
    Ctde,
}

impl AlgoId {
    pub const ALL: [AlgoId; 12] = [
        AlgoId::Bc,
        AlgoId::Cql,
        AlgoId::QmixCql,
        AlgoId::Iql,
        AlgoId::Td3Bc,
        AlgoId::IndBc,
        AlgoId::IndCql,
        AlgoId::IndQmixCql,
        AlgoId::CommCql,
        AlgoId::IndIcq,
        AlgoId::Maicq,
        AlgoId::Omar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgoId::Bc => "bc",
            AlgoId::Cql => "cql",
            AlgoId::QmixCql => "qmix_cql",
            AlgoId::Iql => "iql",
            AlgoId::Td3Bc => "td3_bc",
            AlgoId::IndBc => "ind_bc",
            AlgoId::IndCql => "ind_cql",
            AlgoId::IndQmixCql => "ind_qmix_cql",
            AlgoId::CommCql => "comm_cql",
            AlgoId::IndIcq => "ind_icq",
            AlgoId::Maicq => "maicq",
            AlgoId::Omar => "omar",
        }
    }

    /// Multi-agent algorithms; they need the Trio data layout.
    pub fn is_multi_agent(self) -> bool {
        matches!(
            self,
            AlgoId::IndBc
                | AlgoId::IndCql
                | AlgoId::IndQmixCql
                | AlgoId::CommCql
                | AlgoId::IndIcq
                | AlgoId::Maicq
                | AlgoId::Omar
        )
    }

    pub fn paradigm(self) -> Paradigm {
        match self {
            AlgoId::CommCql => Paradigm::Comm,
            AlgoId::Maicq => Paradigm::Ctde,
            _ => Paradigm::Independent,
        }
    }

    /// Algorithms that act from Q heads rather than policy logits.
    pub fn is_value_based(self) -> bool {
        matches!(self, AlgoId::Cql | AlgoId::QmixCql | AlgoId::IndCql | AlgoId::IndQmixCql | AlgoId::CommCql)
    }

    /// The independent wrappers share the loss of their single-controller base.
    pub(crate) fn base(self) -> AlgoId {
        match self {
            AlgoId::IndBc => AlgoId::Bc,
            AlgoId::IndCql => AlgoId::Cql,
            AlgoId::IndQmixCql => AlgoId::QmixCql,
            other => other,
        }
    }
}

impl fmt::Display for AlgoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgoId {
    type Err = AlgoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['-', '+'], "_");
        AlgoId::ALL.into_iter().find(|a| a.name() == norm).ok_or_else(|| AlgoError::Unknown(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgoConfig {
    pub algo: AlgoId,
    /// Transitions per batch; multi-agent batches hold `n_agents` rows per transition.
    pub batch_size: usize,
    pub gamma: f32,
    pub max_steps: u64,
    pub lr: f32,
    pub seed: u64,
    pub hidden: usize,
    pub target_update: TargetUpdate,
    pub cql_alpha: f32,
    pub td3bc_alpha: f32,
    /// Update the TD3+BC actor every `policy_delay` critic steps.
    pub policy_delay: u64,
    pub gumbel_temperature: f32,
    /// TD3+BC BC term as MSE between the relaxed sample and the data one-hot instead of CE.
    pub td3bc_mse_bc: bool,
    pub iql_tau: f32,
    pub iql_beta: f32,
    pub icq_beta_critic: f32,
    pub icq_beta_policy: f32,
    pub omar_coe: f32,
    pub omar_candidates: usize,
    /// Advantage multiplier of OMAR's weighted-BC term.
    pub omar_beta: f32,
    /// Cap on every exponentiated advantage weight.
    pub weight_clip: f32,
    pub mixer_embed: usize,
    pub hyper_hidden: usize,
    /// Write losses to the log every this many steps.
    pub log_every: u64,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            algo: AlgoId::Bc,
            batch_size: 128,
            gamma: 0.99,
            max_steps: 50_000,
            lr: 3e-4,
            seed: 0,
            hidden: 128,
            target_update: TargetUpdate::Soft { tau: 0.005 },
            cql_alpha: 10.0,
            td3bc_alpha: 2.5,
            policy_delay: 2,
            gumbel_temperature: 1.0,
            td3bc_mse_bc: false,
            iql_tau: 0.7,
            iql_beta: 3.0,
            icq_beta_critic: 1000.0,
            icq_beta_policy: 0.1,
            omar_coe: 0.5,
            omar_candidates: 10,
            omar_beta: 3.0,
            weight_clip: 100.0,
            mixer_embed: 32,
            hyper_hidden: 64,
            log_every: 1,
        }
    }
}

impl AlgoConfig {
    /// Defaults for `mode`: Solo uses lr 3e-4 with soft targets, the team
    /// modes lr 1e-4 with hard target copies every 2000 updates.
    pub fn for_mode(algo: AlgoId, mode: Mode) -> Self {
        let mut c = AlgoConfig { algo, ..Default::default() };
        if mode.is_trio_map() {
            c.lr = 1e-4;
            c.target_update = TargetUpdate::Hard { period: 2000 };
            c.batch_size = 64;
        }
        c
    }

    pub fn validate(&self) -> Result<(), AlgoError> {
        let bad = |m: &str| Err(AlgoError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.hidden == 0 || self.mixer_embed == 0 || self.hyper_hidden == 0 {
            return bad("network widths must be positive");
        }
        if !(self.iql_tau > 0.0 && self.iql_tau < 1.0) {
            return bad("iql_tau must be in (0, 1)");
        }
        if !(self.gumbel_temperature > 0.0) {
            return bad("gumbel_temperature must be positive");
        }
        if !(0.0..=1.0).contains(&self.omar_coe) {
            return bad("omar_coe must be in [0, 1]");
        }
        if self.omar_candidates == 0 || self.policy_delay == 0 {
            return bad("omar_candidates and policy_delay must be at least 1");
        }
        if !(self.icq_beta_critic > 0.0 && self.icq_beta_policy > 0.0) {
            return bad("ICQ temperatures must be positive");
        }
        if self.cql_alpha < 0.0 || self.td3bc_alpha < 0.0 {
            return bad("regularizer weights must be non-negative");
        }
        if let TargetUpdate::Soft { tau } = self.target_update {
            if !(0.0..=1.0).contains(&tau) {
                return bad("soft target tau must be in [0, 1]");
            }
        }
        Ok(())
    }
}
