use rand::Rng;

use super::format::DatasetHeader;
use super::record::EpisodeRecord;
use crate::env::ActionSpec;

/// One agent's part of a transition, for [`TransitionBuffer::push_frame`].
pub struct AgentStep<'a> {
    pub obs: &'a [f32],
    /// Legal masks of all heads, concatenated.
    pub legal: &'a [bool],
    pub action: &'a [u16],
    pub reward: f32,
}

/// Flat in-memory transitions for training. Row `t * n_agents + j` is agent
/// `j` at transition `t`; agents of one transition are stored adjacently.
#[derive(Clone, Debug)]
pub struct TransitionBuffer {
    pub spec: ActionSpec,
    pub obs_dim: usize,
    pub n_agents: usize,
    obs: Vec<f32>,
    legal: Vec<bool>,
    actions: Vec<u16>,
    rewards: Vec<f32>,
    done: Vec<bool>,
    next: Vec<u32>,
}

impl TransitionBuffer {
    pub fn new(spec: ActionSpec, obs_dim: usize, n_agents: usize) -> Self {
        TransitionBuffer {
            spec,
            obs_dim,
            n_agents,
            obs: Vec::new(),
            legal: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            done: Vec::new(),
            next: Vec::new(),
        }
    }

    pub fn from_episodes<'a>(header: &DatasetHeader, episodes: impl IntoIterator<Item = &'a EpisodeRecord>) -> Self {
        let mut b = TransitionBuffer::new(header.action_spec.clone(), header.obs_dim, header.n_heroes_controlled);
        for ep in episodes {
            b.push_episode(ep);
        }
        b
    }

    pub fn push_episode(&mut self, ep: &EpisodeRecord) {
        let n = ep.frames.len();
        for (t, f) in ep.frames.iter().enumerate() {
            let flat: Vec<Vec<bool>> = f.heroes.iter().map(|h| h.legal.iter().flatten().copied().collect()).collect();
            let agents: Vec<AgentStep> = f
                .heroes
                .iter()
                .zip(&flat)
                .map(|(h, l)| AgentStep { obs: &h.obs, legal: l, action: &h.action, reward: h.reward.zero_sum as f32 })
                .collect();
            self.push_frame(&agents, f.done || t + 1 == n);
        }
    }

    /// Append one transition. A frame that is not `done` links to the next
    /// pushed frame, so episodes must end with a `done` frame.
    pub fn push_frame(&mut self, agents: &[AgentStep<'_>], done: bool) {
        assert_eq!(agents.len(), self.n_agents, "frame agent count must match the buffer");
        for a in agents {
            assert_eq!(a.obs.len(), self.obs_dim);
            assert_eq!(a.legal.len(), self.spec.total_size());
            assert_eq!(a.action.len(), self.spec.n_heads());
            self.obs.extend_from_slice(a.obs);
            self.legal.extend_from_slice(a.legal);
            self.actions.extend_from_slice(a.action);
            self.rewards.push(a.reward);
        }
        let idx = self.done.len();
        self.done.push(done);
        self.next.push(if done { idx } else { idx + 1 } as u32);
    }

    /// Number of transitions (not agent rows).
    pub fn len(&self) -> usize {
        self.done.len()
    }

    pub fn is_empty(&self) -> bool {
        self.done.is_empty()
    }

    /// Gather transitions `idx` into a batch, all agents of each transition included.
    pub fn batch(&self, idx: &[usize]) -> Batch {
        let m = self.n_agents;
        let (d, s, h) = (self.obs_dim, self.spec.total_size(), self.spec.n_heads());
        let rows = idx.len() * m;
        let mut b = Batch {
            n_agents: m,
            obs_dim: d,
            spec: self.spec.clone(),
            obs: Vec::with_capacity(rows * d),
            next_obs: Vec::with_capacity(rows * d),
            legal: Vec::with_capacity(rows * s),
            next_legal: Vec::with_capacity(rows * s),
            actions: Vec::with_capacity(rows * h),
            next_actions: Vec::with_capacity(rows * h),
            active: Vec::with_capacity(rows * h),
            reward: Vec::with_capacity(rows),
            done: Vec::with_capacity(rows),
        };
        for &t in idx {
            let nt = self.next[t] as usize;
            for j in 0..m {
                let r = t * m + j;
                let nr = nt * m + j;
                b.obs.extend_from_slice(&self.obs[r * d..(r + 1) * d]);
                b.next_obs.extend_from_slice(&self.obs[nr * d..(nr + 1) * d]);
                b.legal.extend_from_slice(&self.legal[r * s..(r + 1) * s]);
                b.next_legal.extend_from_slice(&self.legal[nr * s..(nr + 1) * s]);
                let act: Vec<usize> = self.actions[r * h..(r + 1) * h].iter().map(|&a| a as usize).collect();
                b.active.extend(self.spec.active_heads(&act));
                b.actions.extend(act);
                b.next_actions.extend(self.actions[nr * h..(nr + 1) * h].iter().map(|&a| a as usize));
                b.reward.push(self.rewards[r]);
                b.done.push(if self.done[t] { 1.0 } else { 0.0 });
            }
        }
        b
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, rng: &mut impl Rng, batch_size: usize) -> Batch {
        assert!(!self.is_empty(), "cannot sample from an empty buffer");
        let idx: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..self.len())).collect();
        self.batch(&idx)
    }
}

/// A batch of agent rows; for multi-agent data, rows `k*n_agents..(k+1)*n_agents`
/// belong to the same transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub n_agents: usize,
    pub obs_dim: usize,
    pub spec: ActionSpec,
    pub obs: Vec<f32>,
    pub next_obs: Vec<f32>,
    /// Flat legal masks, `spec.total_size()` per row.
    pub legal: Vec<bool>,
    pub next_legal: Vec<bool>,
    /// `spec.n_heads()` per row.
    pub actions: Vec<usize>,
    /// Data actions of the stored next transition.
    pub next_actions: Vec<usize>,
    /// Sub-action row of the data button.
    pub active: Vec<bool>,
    pub reward: Vec<f32>,
    pub done: Vec<f32>,
}

impl Batch {
    pub fn rows(&self) -> usize {
        self.reward.len()
    }

    pub fn obs_row(&self, r: usize) -> &[f32] {
        &self.obs[r * self.obs_dim..(r + 1) * self.obs_dim]
    }

    pub fn action(&self, r: usize, head: usize) -> usize {
        self.actions[r * self.spec.n_heads() + head]
    }

    pub fn next_action(&self, r: usize, head: usize) -> usize {
        self.next_actions[r * self.spec.n_heads() + head]
    }

    pub fn is_active(&self, r: usize, head: usize) -> bool {
        self.active[r * self.spec.n_heads() + head]
    }

    fn head_slice<'a>(&self, flat: &'a [bool], r: usize, head: usize) -> &'a [bool] {
        let off = self.spec.offsets()[head];
        let base = r * self.spec.total_size() + off;
        &flat[base..base + self.spec.head_sizes[head]]
    }

    pub fn legal(&self, r: usize, head: usize) -> &[bool] {
        self.head_slice(&self.legal, r, head)
    }

    pub fn next_legal(&self, r: usize, head: usize) -> &[bool] {
        self.head_slice(&self.next_legal, r, head)
    }

    /// Reorder the agents inside every transition: new agent `j` is old agent `perm[j]`.
    pub fn permute_agents(&self, perm: &[usize]) -> Batch {
        assert_eq!(perm.len(), self.n_agents);
        let m = self.n_agents;
        let mut out = self.clone();
        let widths = [self.obs_dim, self.spec.total_size(), self.spec.n_heads(), 1];
        for k in 0..self.rows() / m {
            for (j, &p) in perm.iter().enumerate() {
                let (dst, src) = (k * m + j, k * m + p);
                let copy_f = |to: &mut Vec<f32>, from: &Vec<f32>, w: usize| {
                    to[dst * w..(dst + 1) * w].copy_from_slice(&from[src * w..(src + 1) * w])
                };
                copy_f(&mut out.obs, &self.obs, widths[0]);
                copy_f(&mut out.next_obs, &self.next_obs, widths[0]);
                copy_f(&mut out.reward, &self.reward, 1);
                copy_f(&mut out.done, &self.done, 1);
                let copy_b = |to: &mut Vec<bool>, from: &Vec<bool>, w: usize| {
                    to[dst * w..(dst + 1) * w].copy_from_slice(&from[src * w..(src + 1) * w])
                };
                copy_b(&mut out.legal, &self.legal, widths[1]);
                copy_b(&mut out.next_legal, &self.next_legal, widths[1]);
                copy_b(&mut out.active, &self.active, widths[2]);
                let copy_u = |to: &mut Vec<usize>, from: &Vec<usize>, w: usize| {
                    to[dst * w..(dst + 1) * w].copy_from_slice(&from[src * w..(src + 1) * w])
                };
                copy_u(&mut out.actions, &self.actions, widths[2]);
                copy_u(&mut out.next_actions, &self.next_actions, widths[2]);
            }
        }
        out
    }
}
