use ndarray::{s, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AlgoConfig, AlgoId, Paradigm};
use crate::env::ActionSpec;
use crate::nn::{Mixer, Mlp, Params};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixerArch {
    pub state_dim: usize,
    pub n_inputs: usize,
    pub embed: usize,
    pub hyper_hidden: usize,
}

/// Everything needed to rebuild a `Nets` value from a flat parameter blob.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetsArch {
    pub obs_dim: usize,
    pub total_size: usize,
    pub hidden: usize,
    pub comm: bool,
    pub q: bool,
    pub pi: bool,
    pub v: bool,
    pub critics: usize,
    pub mixer: Option<MixerArch>,
}

impl NetsArch {
    pub fn for_algo(cfg: &AlgoConfig, spec: &ActionSpec, obs_dim: usize, n_agents: usize) -> Self {
        let a = cfg.algo;
        let mixer = |state_dim, n_inputs| {
            Some(MixerArch { state_dim, n_inputs, embed: cfg.mixer_embed, hyper_hidden: cfg.hyper_hidden })
        };
        NetsArch {
            obs_dim,
            total_size: spec.total_size(),
            hidden: cfg.hidden,
            comm: a.paradigm() == Paradigm::Comm,
            q: !matches!(a.base(), AlgoId::Bc | AlgoId::Td3Bc),
            pi: !a.is_value_based(),
            v: a == AlgoId::Iql,
            critics: if a == AlgoId::Td3Bc { 2 } else { 0 },
            mixer: match a.base() {
                AlgoId::QmixCql => mixer(obs_dim, spec.n_heads()),
                AlgoId::Maicq => mixer(obs_dim * n_agents, n_agents),
                _ => None,
            },
        }
    }

    /// Width of the per-agent features fed to the heads.
    pub fn feat_dim(&self) -> usize {
        if self.comm {
            2 * self.hidden
        } else {
            self.hidden
        }
    }

    fn encoder_sizes(&self) -> [usize; 3] {
        [self.obs_dim, self.hidden, self.hidden]
    }

    fn critic_sizes(&self) -> [usize; 4] {
        [self.feat_dim() + self.total_size, self.hidden, self.hidden, 1]
    }
}

/// All trainable networks of one algorithm. The encoder is shared by every
/// head, critic and value network.
#[derive(Clone, Debug, PartialEq)]
pub struct Nets {
    pub arch: NetsArch,
    pub encoder: Mlp,
    /// Per-head Q values, heads concatenated.
    pub q: Option<Mlp>,
    /// Per-head policy logits, heads concatenated.
    pub pi: Option<Mlp>,
    pub v: Option<Mlp>,
    pub critics: Vec<Mlp>,
    pub mixer: Option<Mixer>,
}

impl Nets {
    pub fn new(arch: &NetsArch, rng: &mut impl Rng) -> Self {
        let f = arch.feat_dim();
        let encoder = Mlp::new(&arch.encoder_sizes(), true, rng);
        let q = arch.q.then(|| Mlp::new(&[f, arch.total_size], false, rng));
        let pi = arch.pi.then(|| Mlp::new(&[f, arch.total_size], false, rng));
        let v = arch.v.then(|| Mlp::new(&[f, 1], false, rng));
        let critics = (0..arch.critics).map(|_| Mlp::new(&arch.critic_sizes(), false, rng)).collect();
        let mixer = arch.mixer.map(|m| Mixer::new(m.state_dim, m.n_inputs, m.embed, m.hyper_hidden, rng));
        Nets { arch: arch.clone(), encoder, q, pi, v, critics, mixer }
    }

    pub fn zeros(arch: &NetsArch) -> Self {
        let f = arch.feat_dim();
        let mixer = arch.mixer.map(|m| Mixer::zeros(m.state_dim, m.n_inputs, m.embed, m.hyper_hidden));
        Nets {
            arch: arch.clone(),
            encoder: Mlp::zeros(&arch.encoder_sizes(), true),
            q: arch.q.then(|| Mlp::zeros(&[f, arch.total_size], false)),
            pi: arch.pi.then(|| Mlp::zeros(&[f, arch.total_size], false)),
            v: arch.v.then(|| Mlp::zeros(&[f, 1], false)),
            critics: (0..arch.critics).map(|_| Mlp::zeros(&arch.critic_sizes(), false)).collect(),
            mixer,
        }
    }

    /// The networks used at execution time: encoder plus the acting head.
    /// Mixers, critics and value networks are left behind.
    pub fn policy(&self, spec: &ActionSpec, value_based: bool) -> PolicyNet {
        let head = if value_based { self.q.clone() } else { self.pi.clone() };
        PolicyNet {
            spec: spec.clone(),
            encoder: self.encoder.clone(),
            head: head.expect("acting head exists for this algorithm"),
            comm: self.arch.comm,
        }
    }
}

impl Params for Nets {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a [f32])) {
        self.encoder.visit(f);
        self.q.visit(f);
        self.pi.visit(f);
        self.v.visit(f);
        self.critics.visit(f);
        self.mixer.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        self.encoder.visit_mut(f);
        self.q.visit_mut(f);
        self.pi.visit_mut(f);
        self.v.visit_mut(f);
        self.critics.visit_mut(f);
        self.mixer.visit_mut(f);
    }
}

/// Max-pooled message: for every group of `m` consecutive rows, the
/// elementwise maximum of their features, appended to each row. Also
/// returns, per group and feature, the row that supplied the maximum (lowest
/// index on ties) for the backward pass.
pub fn with_message(f: &Array2<f32>, m: usize) -> (Array2<f32>, Vec<usize>) {
    let (rows, h) = f.dim();
    assert_eq!(rows % m, 0, "rows must come in groups of {m}");
    let mut g = Array2::<f32>::zeros((rows, 2 * h));
    g.slice_mut(s![.., ..h]).assign(f);
    let mut src = vec![0usize; rows / m * h];
    for k in 0..rows / m {
        for c in 0..h {
            let mut best = k * m;
            for r in k * m + 1..(k + 1) * m {
                if f[[r, c]] > f[[best, c]] {
                    best = r;
                }
            }
            src[k * h + c] = best;
            let v = f[[best, c]];
            for r in k * m..(k + 1) * m {
                g[[r, h + c]] = v;
            }
        }
    }
    (g, src)
}

/// Gradient of `with_message` wrt the features.
pub fn message_backward(dg: &Array2<f32>, src: &[usize], m: usize) -> Array2<f32> {
    let rows = dg.nrows();
    let h = dg.ncols() / 2;
    let mut df = dg.slice(s![.., ..h]).to_owned();
    for k in 0..rows / m {
        for c in 0..h {
            let total: f32 = (k * m..(k + 1) * m).map(|r| dg[[r, h + c]]).sum();
            df[[src[k * h + c], c]] += total;
        }
    }
    df
}

/// Execution-time network: own observation (plus the team message for
/// communicating algorithms) to per-head scores.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNet {
    pub spec: ActionSpec,
    pub encoder: Mlp,
    pub head: Mlp,
    pub comm: bool,
}

impl PolicyNet {
    /// Scores for every row of `obs`; with `comm`, all rows are one team.
    pub fn scores(&self, obs: &Array2<f32>) -> Array2<f32> {
        let f = self.encoder.forward(obs);
        let f = if self.comm { with_message(&f, obs.nrows()).0 } else { f };
        self.head.forward(&f)
    }
}

impl Params for PolicyNet {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a [f32])) {
        self.encoder.visit(f);
        self.head.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        self.encoder.visit_mut(f);
        self.head.visit_mut(f);
    }
}
