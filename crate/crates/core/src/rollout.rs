//! Running policies in the environment.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::dataset::{EpisodeMeta, EpisodeRecord, HeroStep, StepFrame};
use crate::env::{ActionMasks, EnvConfig, EnvError, Environment, StructuredAction, Team};
use crate::seed::rng_for;

/// What a policy may look at when acting for one hero.
pub struct HeroCtx<'a> {
    pub env: &'a Environment,
    pub hero: usize,
    pub obs: &'a [f32],
    pub masks: &'a ActionMasks,
}

/// A policy controlling every hero of one team. `ctx` and `rngs` are aligned
/// with the team's heroes in index order.
pub trait TeamPolicy: Send + Sync {
    fn label(&self) -> String;
    fn act_team(&self, ctx: &[HeroCtx<'_>], rngs: &mut [ChaCha8Rng]) -> Vec<StructuredAction>;
}

/// A team whose heroes are driven by different policies, one per slot.
pub struct MixedTeam {
    pub members: Vec<Arc<dyn TeamPolicy>>,
}

impl TeamPolicy for MixedTeam {
    fn label(&self) -> String {
        self.members.iter().map(|m| m.label()).collect::<Vec<_>>().join("+")
    }

    fn act_team(&self, ctx: &[HeroCtx<'_>], rngs: &mut [ChaCha8Rng]) -> Vec<StructuredAction> {
        ctx.iter()
            .zip(rngs.iter_mut())
            .enumerate()
            .map(|(i, (c, rng))| {
                let m = &self.members[i % self.members.len()];
                m.act_team(std::slice::from_ref(c), std::slice::from_mut(rng)).remove(0)
            })
            .collect()
    }
}

impl<T: TeamPolicy + ?Sized> TeamPolicy for Arc<T> {
    fn label(&self) -> String {
        (**self).label()
    }

    fn act_team(&self, ctx: &[HeroCtx<'_>], rngs: &mut [ChaCha8Rng]) -> Vec<StructuredAction> {
        (**self).act_team(ctx, rngs)
    }
}

pub struct EpisodeSpec<'a> {
    pub config: &'a EnvConfig,
    pub seed: u64,
    /// Policy of the team whose heroes are recorded.
    pub controlled: &'a dyn TeamPolicy,
    /// Opponent; `None` only for sub-task modes.
    pub opponent: Option<&'a dyn TeamPolicy>,
    pub controlled_team: Team,
    pub record: bool,
}

/// Play one episode. Hero random streams depend only on the episode seed,
/// the hero index and the side, never on other episodes.
pub fn run_episode(spec: &EpisodeSpec<'_>) -> Result<EpisodeRecord, EnvError> {
    let mut env = Environment::new(spec.config.clone())?;
    let mut res = env.reset(spec.seed);
    let n = env.n_heroes();
    let team_of: Vec<Team> = (0..n).map(|h| env.hero_team(h)).collect();
    let ours: Vec<usize> = (0..n).filter(|&h| team_of[h] == spec.controlled_team).collect();
    let theirs: Vec<usize> = (0..n).filter(|&h| team_of[h] != spec.controlled_team).collect();
    if ours.is_empty() {
        return Err(EnvError::Config { field: "mode", reason: "sub-task modes only have team A heroes".into() });
    }
    if !theirs.is_empty() && spec.opponent.is_none() {
        return Err(EnvError::Config {
            field: "mode",
            reason: "mode has enemy heroes but no opponent was given".into(),
        });
    }
    let mut rngs: Vec<ChaCha8Rng> = (0..n as u64).map(|h| rng_for(spec.seed, &[0x5EED, h])).collect();
    let mut frames = Vec::new();
    loop {
        let mut actions = vec![StructuredAction::noop(env.action_spec()); n];
        for (heroes, policy) in [(&ours, Some(spec.controlled)), (&theirs, spec.opponent)] {
            let Some(policy) = policy else { continue };
            if heroes.is_empty() {
                continue;
            }
            let ctx: Vec<HeroCtx> = heroes
                .iter()
                .map(|&h| HeroCtx { env: &env, hero: h, obs: &res.observations[h].vector, masks: &res.masks[h] })
                .collect();
            let mut team_rngs: Vec<ChaCha8Rng> = heroes.iter().map(|&h| rngs[h].clone()).collect();
            let acts = policy.act_team(&ctx, &mut team_rngs);
            for ((&h, a), r) in heroes.iter().zip(acts).zip(team_rngs) {
                actions[h] = a;
                rngs[h] = r;
            }
        }
        let next = env.step(&actions)?;
        if spec.record {
            let heroes = ours
                .iter()
                .map(|&h| {
                    let a = &actions[h];
                    HeroStep {
                        obs: res.observations[h].vector.clone(),
                        legal: res.masks[h].legal.clone(),
                        action: a.head_indices.iter().map(|&i| i as u16).collect(),
                        active: res.masks[h].active_row(a.head_indices[0]).to_vec(),
                        reward: next.rewards[h].clone(),
                    }
                })
                .collect();
            frames.push(StepFrame { heroes, done: next.done });
        }
        res = next;
        if res.done {
            break;
        }
    }
    let state = env.state().expect("episode was reset");
    let cfg = env.config();
    let meta = EpisodeMeta {
        seed: spec.seed,
        controlled_label: spec.controlled.label(),
        opponent_label: spec.opponent.map(|p| p.label()).unwrap_or_else(|| "none".into()),
        archetypes: cfg.hero_archetypes_per_team.clone(),
        controlled_team: spec.controlled_team,
        winner: state.winner,
        length: state.step,
        subtask: env.subtask_outcome(),
    };
    Ok(EpisodeRecord { meta, frames })
}
