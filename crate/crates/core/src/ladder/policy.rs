//! Scripted behavior policies of increasing strength.
//!
//! | level | adds                                                              |
//! |-------|-------------------------------------------------------------------|
//! | 0     | uniform random over legal entries of every head                   |
//! | 1     | walk the lane, attack the nearest legal target                    |
//! | 2     | retreat to the fountain on low hp, heal, focus the lowest-hp target |
//! | 3     | cast the skill whenever it is ready, aimed to hit the most enemies |
//! | 4     | last-hit creeps, farm jungle monsters when the lane is empty, never stand under the enemy turret without creep cover |
//!
//! Levels 1 to 4 also take a uniformly random legal action with probability
//! `epsilon`, which keeps datasets diverse and self-play outcomes balanced.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::action::joint_index;
use crate::env::constants::*;
use crate::env::{
    ActionMasks, ActionSpec, Button, Environment, GameState, HeadKind, Pos, StructuredAction, Team, UnitKind, UnitRef,
};
use crate::rollout::{HeroCtx, TeamPolicy};

use super::LadderError;

pub const MAX_LEVEL: u8 = 4;

/// Hp fraction under which level ≥2 heroes walk home.
const RETREAT_HP: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelPolicy {
    level: u8,
    epsilon: f64,
}

impl LevelPolicy {
    pub fn new(level: u8) -> Result<Self, LadderError> {
        if level > MAX_LEVEL {
            return Err(LadderError::Level(level));
        }
        Ok(LevelPolicy { level, epsilon: default_epsilon(level) })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon.clamp(0.0, 1.0);
        self
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Decide for one hero. The result always satisfies `masks`.
    pub fn act_hero(
        &self,
        env: &Environment,
        hero: usize,
        masks: &ActionMasks,
        rng: &mut ChaCha8Rng,
    ) -> StructuredAction {
        let spec = env.action_spec();
        let explore = rng.random::<f64>() < self.epsilon;
        if self.level == 0 || explore {
            return random_legal(spec, masks, rng);
        }
        let Some(state) = env.state() else { return random_legal(spec, masks, rng) };
        let intent = if state.heroes[hero].alive() { self.decide(env, state, hero, masks) } else { Intent::Idle };
        legalize(build(env, state, hero, intent), spec, masks)
    }

    fn decide(&self, env: &Environment, state: &GameState, hero: usize, masks: &ActionMasks) -> Intent {
        let me = &state.heroes[hero];
        let team = me.team();
        let enemy = team.enemy();
        let pos = me.pos();
        let hp = me.base.hp_rate();
        let fountain = state.crystal(team).pos;
        let lvl = self.level;
        let can = |b: Button| masks.is_legal(0, b as usize);

        let turret = state.turret(enemy);
        if lvl >= 2 && hp < RETREAT_HP {
            if can(Button::Heal) {
                return Intent::Heal;
            }
            let threatened = turret.alive && pos.dist(turret.pos) <= TURRET_RANGE;
            if threatened {
                return Intent::MoveTo(fountain);
            }
        }

        let covered = |p: Pos| {
            !turret.alive
                || p.dist(turret.pos) > TURRET_RANGE
                || state.units.iter().any(|u| {
                    u.state.alive
                        && u.state.kind == UnitKind::Creep
                        && u.state.team == team
                        && u.state.pos.dist(turret.pos) <= TURRET_RANGE
                })
        };
        let th = env.action_spec().head_index(HeadKind::Target).expect("target head");
        let slots = env.target_slots(hero);
        let targets: Vec<(usize, UnitRef)> =
            (1..slots.len()).filter(|&s| masks.is_legal(th, s)).filter_map(|s| slots[s].map(|r| (s, r))).collect();
        let usable: Vec<(usize, UnitRef)> = targets
            .iter()
            .copied()
            .filter(|&(_, r)| {
                if lvl < 4 {
                    return true;
                }
                // approaching must not leave creep cover
                let tp = state.unit(r).pos;
                pos.dist(tp) <= me.attack_range || covered(pos.step_toward(tp))
            })
            .collect();

        if lvl >= 3 && can(Button::Skill) {
            if let Some(cast) = best_skill(state, team, &usable) {
                return cast;
            }
        }

        let in_range = |r: UnitRef| pos.dist(state.unit(r).pos) <= me.attack_range;
        let pick = if lvl >= 4 {
            let dmg = me.base.attack;
            usable
                .iter()
                .filter(|&&(_, r)| {
                    let u = state.unit(r);
                    in_range(r) && u.kind == UnitKind::Creep && u.hp <= dmg
                })
                .min_by_key(|&&(s, r)| (state.unit(r).hp, s))
                .or_else(|| {
                    usable
                        .iter()
                        .filter(|&&(_, r)| in_range(r) && state.unit(r).kind == UnitKind::Hero)
                        .min_by_key(|&&(s, r)| (state.unit(r).hp, s))
                })
                .or_else(|| lowest_hp(state, &usable, in_range))
                .copied()
        } else if lvl >= 2 {
            lowest_hp(state, &usable, in_range).copied()
        } else {
            usable.iter().min_by_key(|&&(s, r)| (pos.dist(state.unit(r).pos), s)).copied()
        };
        if let Some((slot, _)) = pick {
            if can(Button::Attack) {
                return Intent::Attack(slot);
            }
        }

        // nothing to hit: farm the jungle, or push down the lane
        if lvl >= 4 {
            let camp = state
                .units
                .iter()
                .filter(|u| u.state.alive && u.state.kind == UnitKind::Monster && covered(u.state.pos))
                .min_by_key(|u| (pos.dist(u.state.pos), u.state.unit_id));
            if let Some(m) = camp {
                return Intent::MoveTo(m.state.pos);
            }
        }
        let goal = state.crystal(enemy).pos;
        Intent::MoveTo(Pos::new(goal.x, env_mid(env)))
    }
}

fn default_epsilon(level: u8) -> f64 {
    match level {
        0 => 1.0,
        1 => 0.4,
        2 => 0.2,
        3 => 0.15,
        _ => 0.05,
    }
}

fn env_mid(env: &Environment) -> i32 {
    env.config().grid_height as i32 / 2
}

/// Lowest-hp target, preferring ones already in attack range.
fn lowest_hp<'a>(
    state: &GameState,
    targets: &'a [(usize, UnitRef)],
    in_range: impl Fn(UnitRef) -> bool,
) -> Option<&'a (usize, UnitRef)> {
    targets.iter().min_by_key(|&&(s, r)| (!in_range(r), state.unit(r).hp, s))
}

/// Skill target and offset hitting the most enemies, heroes weighted double.
fn best_skill(state: &GameState, team: Team, targets: &[(usize, UnitRef)]) -> Option<Intent> {
    let mut best: Option<(u32, Intent)> = None;
    for &(slot, r) in targets {
        let tp = state.unit(r).pos;
        for (ox, oy) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let center = Pos::new(tp.x + ox * team.dir(), tp.y + oy);
            let score: u32 = state
                .all_refs()
                .map(|u| state.unit(u))
                .filter(|u| u.alive && u.team == team.enemy() && u.pos.dist(center) <= SKILL_BLAST_RADIUS)
                .filter(|u| !state.invulnerable(u))
                .map(|u| if u.kind == UnitKind::Hero { 2 } else { 1 })
                .sum();
            if score >= 2 && best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, Intent::Skill(slot, ox, oy)));
            }
        }
    }
    best.map(|(_, i)| i)
}

#[derive(Clone, Copy, Debug)]
enum Intent {
    Idle,
    Heal,
    MoveTo(Pos),
    Attack(usize),
    /// Target slot and own-frame blast offset.
    Skill(usize, i32, i32),
}

fn build(env: &Environment, state: &GameState, hero: usize, intent: Intent) -> StructuredAction {
    let spec = env.action_spec();
    let mut a = StructuredAction::noop(spec);
    let me = &state.heroes[hero];
    let set = |a: &mut StructuredAction, kind: HeadKind, v: usize| {
        if let Some(h) = spec.head_index(kind) {
            a.head_indices[h] = v;
        }
    };
    match intent {
        Intent::Idle => {}
        Intent::Heal => a.head_indices[0] = Button::Heal as usize,
        Intent::MoveTo(goal) => {
            let step = me.pos().step_toward(goal);
            let dx = (step.x - me.pos().x) * me.team().dir();
            let dy = step.y - me.pos().y;
            if dx == 0 && dy == 0 {
                return a;
            }
            a.head_indices[0] = Button::Move as usize;
            set(&mut a, HeadKind::MoveX, (dx + 1) as usize);
            set(&mut a, HeadKind::MoveY, (dy + 1) as usize);
            set(&mut a, HeadKind::Move, joint_index(dx, dy));
        }
        Intent::Attack(slot) => {
            a.head_indices[0] = Button::Attack as usize;
            set(&mut a, HeadKind::Target, slot);
        }
        Intent::Skill(slot, ox, oy) => {
            a.head_indices[0] = Button::Skill as usize;
            set(&mut a, HeadKind::Target, slot);
            set(&mut a, HeadKind::SkillX, (ox + 1) as usize);
            set(&mut a, HeadKind::SkillY, (oy + 1) as usize);
        }
    }
    a
}

/// Replace every illegal head entry by the first legal one. An illegal button
/// falls back to no-op, whose dependent heads are then reset as well.
pub fn legalize(mut a: StructuredAction, spec: &ActionSpec, masks: &ActionMasks) -> StructuredAction {
    if !masks.is_legal(0, a.head_indices[0]) {
        a = StructuredAction::noop(spec);
    }
    for h in 0..spec.n_heads() {
        if !masks.is_legal(h, a.head_indices[h]) {
            a.head_indices[h] = masks.first_legal(h);
        }
    }
    a
}

/// Each head independently uniform over its legal entries.
pub fn random_legal(spec: &ActionSpec, masks: &ActionMasks, rng: &mut ChaCha8Rng) -> StructuredAction {
    let head_indices = (0..spec.n_heads())
        .map(|h| {
            let legal: Vec<usize> = masks.legal_indices(h).collect();
            if legal.is_empty() {
                0
            } else {
                legal[rng.random_range(0..legal.len())]
            }
        })
        .collect();
    StructuredAction { head_indices }
}

impl TeamPolicy for LevelPolicy {
    fn label(&self) -> String {
        format!("L{}", self.level)
    }

    fn act_team(&self, ctx: &[HeroCtx<'_>], rngs: &mut [ChaCha8Rng]) -> Vec<StructuredAction> {
        ctx.iter().zip(rngs.iter_mut()).map(|(c, rng)| self.act_hero(c.env, c.hero, c.masks, rng)).collect()
    }
}
