use std::path::Path;

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use super::{load_checkpoint, AlgoError, CheckpointMeta, Learner, PolicyNet};
use crate::env::{ActionMasks, StructuredAction};
use crate::nn::{masked_argmax, masked_sample};
use crate::rollout::{HeroCtx, TeamPolicy};

/// A trained network acting from its own observations and legal masks only.
#[derive(Clone, Debug)]
pub struct TrainedPolicy {
    pub net: PolicyNet,
    pub label: String,
    pub greedy: bool,
}

impl TrainedPolicy {
    pub fn new(net: PolicyNet, label: impl Into<String>) -> Self {
        TrainedPolicy { net, label: label.into(), greedy: true }
    }

    pub fn from_learner(learner: &Learner) -> Self {
        TrainedPolicy::new(learner.policy(), learner.algo().name())
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointMeta), AlgoError> {
        let (meta, nets) = load_checkpoint(path)?;
        let net = nets.policy(&meta.action_spec, meta.algo.is_value_based());
        Ok((TrainedPolicy::new(net, meta.algo.name()), meta))
    }

    /// Sample from the masked softmax of the scores instead of taking the argmax.
    pub fn stochastic(mut self) -> Self {
        self.greedy = false;
        self
    }

    /// One action per row of `obs`; rows form one team for communicating nets.
    pub fn act_rows(&self, obs: &[&[f32]], masks: &[&ActionMasks], rngs: &mut [ChaCha8Rng]) -> Vec<StructuredAction> {
        let spec = &self.net.spec;
        let d = obs.first().map_or(0, |o| o.len());
        let flat: Vec<f32> = obs.iter().flat_map(|o| o.iter().copied()).collect();
        let x = Array2::from_shape_vec((obs.len(), d), flat).expect("equal observation widths");
        let scores = self.net.scores(&x);
        let offsets = spec.offsets();
        (0..obs.len())
            .map(|r| {
                let row = scores.row(r);
                let head_indices = (0..spec.n_heads())
                    .map(|h| {
                        let (o, n) = (offsets[h], spec.head_sizes[h]);
                        let s: Vec<f32> = row.iter().skip(o).take(n).copied().collect();
                        let legal = &masks[r].legal[h];
                        let pick =
                            if self.greedy { masked_argmax(&s, legal) } else { masked_sample(&s, legal, &mut rngs[r]) };
                        pick.unwrap_or_else(|_| masks[r].first_legal(h))
                    })
                    .collect();
                StructuredAction { head_indices }
            })
            .collect()
    }
}

impl TeamPolicy for TrainedPolicy {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn act_team(&self, ctx: &[HeroCtx<'_>], rngs: &mut [ChaCha8Rng]) -> Vec<StructuredAction> {
        let obs: Vec<&[f32]> = ctx.iter().map(|c| c.obs).collect();
        let masks: Vec<&ActionMasks> = ctx.iter().map(|c| c.masks).collect();
        self.act_rows(&obs, &masks, rngs)
    }
}
