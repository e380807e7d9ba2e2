//! Deterministic MOBA micro-environment.
//!
//! A single lane between two bases on a small grid. Each team owns a turret
//! and a crystal; creep waves march down the middle row; the Trio map adds
//! neutral monsters in the corners. Heroes act through a structured action
//! (button, movement, skill offset, target) constrained by legal masks and a
//! button-conditioned sub-action table.

pub mod action;
pub mod config;
pub mod constants;
mod dynamics;
pub mod observe;
pub mod reward;
pub mod state;
pub mod subtask;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use action::{ActionMasks, ActionSpec, Button, HeadKind, StructuredAction};
pub use config::{Archetype, EnvConfig, Mode, RewardWeights, SubtaskCalibration};
pub use reward::{reward_item_names, weighted_reward, zero_sum_rewards, RewardVector};
pub use state::{GameState, HeroState, Pos, Team, UnitKind, UnitRef, UnitState};
pub use subtask::{subtask_score, SubtaskOutcome};

use constants::*;
use reward::HeroSnapshot;
use state::Unit;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("environment has not been reset")]
    NotReset,
    #[error("episode is over; call reset")]
    EpisodeDone,
    #[error("expected {expected} actions (one per hero), got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("hero {hero}: illegal action index {index} on head `{head_name}` (head {head})")]
    IllegalAction { hero: usize, head: usize, head_name: String, index: usize },
}

/// Per-tick observation for one hero.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub vector: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub winner: Option<Team>,
    pub step: u32,
    pub hero_gold: Vec<u32>,
    /// Hp of A turret, A crystal, B turret, B crystal.
    pub structure_hp: [u32; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observations: Vec<Observation>,
    pub masks: Vec<ActionMasks>,
    pub rewards: Vec<RewardVector>,
    pub done: bool,
    pub info: StepInfo,
}

/// Heroes are indexed team A first, then team B.
#[derive(Clone)]
pub struct Environment {
    config: EnvConfig,
    spec: ActionSpec,
    sub_table: Vec<Vec<bool>>,
    episode_key: u64,
    state: Option<GameState>,
    snapshots: Vec<HeroSnapshot>,
    masks: Vec<ActionMasks>,
    slot_refs: Vec<Vec<Option<UnitRef>>>,
    layout: MapLayout,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct MapLayout {
    pub width: i32,
    pub height: i32,
    pub mid: i32,
    pub turret_offset: i32,
}

impl MapLayout {
    fn new(config: &EnvConfig) -> Self {
        let width = config.grid_width as i32;
        let height = config.grid_height as i32;
        MapLayout { width, height, mid: height / 2, turret_offset: ((width - 1) / 4).clamp(1, 3) }
    }

    /// Mirror an own-frame x coordinate into world coordinates.
    pub fn world_x(&self, team: Team, x: i32) -> i32 {
        if team == Team::B {
            self.width - 1 - x
        } else {
            x
        }
    }

    pub fn in_bounds(&self, p: Pos) -> bool {
        p.x >= 0 && p.y >= 0 && p.x < self.width && p.y < self.height
    }

    pub fn clamp(&self, p: Pos) -> Pos {
        Pos::new(p.x.clamp(0, self.width - 1), p.y.clamp(0, self.height - 1))
    }

    pub fn crystal_pos(&self, team: Team) -> Pos {
        Pos::new(self.world_x(team, 0), self.mid)
    }

    pub fn turret_pos(&self, team: Team) -> Pos {
        Pos::new(self.world_x(team, self.turret_offset), self.mid)
    }

    pub fn creep_spawn(&self, team: Team) -> Pos {
        Pos::new(self.world_x(team, 1), self.mid)
    }

    pub fn hero_spawn(&self, team: Team, slot: usize, per_team: usize) -> Pos {
        let dy = if per_team == 1 { 0 } else { slot as i32 - 1 };
        Pos::new(self.world_x(team, 1), (self.mid + dy).clamp(0, self.height - 1))
    }

    pub fn monster_camps(&self) -> [Pos; 4] {
        let c = self.width / 2;
        let l = (c - 2).max(0);
        let r = self.width - 1 - l;
        [Pos::new(l, 0), Pos::new(r, 0), Pos::new(l, self.height - 1), Pos::new(r, self.height - 1)]
    }
}

/// SplitMix64 finalizer, used for all seed derivation.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Environment {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let spec = config.mode.action_spec();
        let sub_table = spec.sub_action_table();
        let layout = MapLayout::new(&config);
        Ok(Environment {
            config,
            spec,
            sub_table,
            episode_key: 0,
            state: None,
            snapshots: Vec::new(),
            masks: Vec::new(),
            slot_refs: Vec::new(),
            layout,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn action_spec(&self) -> &ActionSpec {
        &self.spec
    }

    pub fn n_heroes(&self) -> usize {
        self.config.n_heroes()
    }

    /// Current game state; `None` before the first reset.
    pub fn state(&self) -> Option<&GameState> {
        self.state.as_ref()
    }

    pub fn hero_team(&self, hero: usize) -> Team {
        if hero < self.config.mode.heroes_per_team() {
            Team::A
        } else {
            Team::B
        }
    }

    pub fn reset(&mut self, episode_seed: u64) -> StepResult {
        self.episode_key = mix64(self.config.seed ^ mix64(episode_seed));
        let lay = self.layout;
        let per_team = self.config.mode.heroes_per_team();
        let mut next_id = 0u32;
        let mut heroes = Vec::new();
        let teams: &[Team] = if self.config.mode.has_enemy_heroes() { &[Team::A, Team::B] } else { &[Team::A] };
        for &team in teams {
            for (slot, &arch) in self.config.hero_archetypes_per_team[team.index()].iter().enumerate() {
                let stats = arch.stats();
                let spawn = lay.hero_spawn(team, slot, per_team);
                heroes.push(HeroState {
                    base: UnitState {
                        unit_id: next_id,
                        kind: UnitKind::Hero,
                        team,
                        pos: spawn,
                        hp: stats.max_hp,
                        max_hp: stats.max_hp,
                        attack: stats.attack,
                        alive: true,
                    },
                    mana: MAX_MANA,
                    gold: 0,
                    experience: 0,
                    skill_cooldown: 0,
                    heal_cooldown: 0,
                    archetype: arch,
                    vision_radius: VISION_RADIUS,
                    attack_range: stats.attack_range,
                    skill_damage: stats.skill_damage,
                    respawn_timer: 0,
                    spawn,
                    last_button: 0,
                    level: 1,
                    kills: 0,
                    deaths: 0,
                    attacks_rolled: 0,
                });
                next_id += 1;
            }
        }
        let mut units = Vec::new();
        let structure = |kind: UnitKind, team: Team, pos: Pos, hp: u32, attack: u32, id: &mut u32| {
            let u = Unit {
                state: UnitState { unit_id: *id, kind, team, pos, hp, max_hp: hp, attack, alive: true },
                respawn_timer: 0,
                home: pos,
                attacks_rolled: 0,
            };
            *id += 1;
            u
        };
        for team in [Team::A, Team::B] {
            units.push(structure(UnitKind::Turret, team, lay.turret_pos(team), TURRET_HP, TURRET_ATTACK, &mut next_id));
            units.push(structure(UnitKind::Crystal, team, lay.crystal_pos(team), CRYSTAL_HP, 0, &mut next_id));
        }
        if self.config.mode.is_trio_map() {
            for camp in lay.monster_camps() {
                units.push(structure(UnitKind::Monster, Team::Neutral, camp, MONSTER_HP, MONSTER_ATTACK, &mut next_id));
            }
        }
        let state = GameState {
            step: 0,
            heroes,
            units,
            team_kills: [0, 0],
            winner: None,
            done: false,
            structures_shielded: self.config.mode == Mode::SubGainGold,
            next_unit_id: next_id,
        };
        self.snapshots = (0..state.heroes.len()).map(|i| snapshot(&state, i)).collect();
        self.state = Some(state);
        self.refresh_masks();
        let rewards = vec![RewardVector::zeros(self.config.mode); self.n_heroes()];
        self.result(rewards)
    }

    /// Legal masks of `hero` in the current state.
    pub fn legal_masks(&self, hero: usize) -> ActionMasks {
        match self.masks.get(hero) {
            Some(m) => m.clone(),
            None => ActionMasks::all_legal(&self.spec),
        }
    }

    /// What each target slot of `hero` currently refers to.
    pub fn target_slots(&self, hero: usize) -> &[Option<UnitRef>] {
        self.slot_refs.get(hero).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn observe(&self, hero: usize) -> Option<Observation> {
        self.state.as_ref().map(|s| Observation { vector: observe::observe(&self.config, s, hero) })
    }

    /// Sub-task outcome of the current episode; `None` outside sub-task modes.
    pub fn subtask_outcome(&self) -> Option<SubtaskOutcome> {
        let s = self.state.as_ref()?;
        match self.config.mode {
            Mode::SubDestroyTurret => Some(SubtaskOutcome::FrameLength(if s.winner == Some(Team::A) {
                s.step
            } else {
                self.config.max_steps
            })),
            Mode::SubGainGold => Some(SubtaskOutcome::Gold(s.team_heroes(Team::A).map(|i| s.heroes[i].gold).sum())),
            _ => None,
        }
    }

    /// Mutable state access for tests that need to stage situations.
    #[doc(hidden)]
    pub fn state_mut_for_test(&mut self) -> Option<&mut GameState> {
        self.state.as_mut()
    }

    /// Recompute masks and target slots after external state edits.
    #[doc(hidden)]
    pub fn refresh_for_test(&mut self) {
        self.refresh_masks();
    }

    fn refresh_masks(&mut self) {
        let Some(state) = self.state.as_ref() else { return };
        let n = state.heroes.len();
        let mut masks = Vec::with_capacity(n);
        let mut refs = Vec::with_capacity(n);
        for h in 0..n {
            let slots = self.compute_slots(state, h);
            masks.push(self.compute_masks(state, h, &slots));
            refs.push(slots);
        }
        self.masks = masks;
        self.slot_refs = refs;
    }

    fn compute_slots(&self, state: &GameState, hero: usize) -> Vec<Option<UnitRef>> {
        let me = &state.heroes[hero];
        let team = me.team();
        let enemy = team.enemy();
        let per_team = self.config.mode.heroes_per_team();
        let mut slots = vec![None];
        let enemies: Vec<usize> = state.team_heroes(enemy).collect();
        for i in 0..per_team {
            slots.push(enemies.get(i).map(|&h| UnitRef::Hero(h)));
        }
        let creeps = observe::nearest_visible(state, me, |k, t| k == UnitKind::Creep && t == enemy);
        for i in 0..2 {
            slots.push(creeps.get(i).map(|&u| UnitRef::Unit(u)));
        }
        slots.push(Some(state.frontline_structure(enemy)));
        if self.config.mode.is_trio_map() {
            let monsters = observe::nearest_visible(state, me, |k, _| k == UnitKind::Monster);
            slots.push(monsters.first().map(|&u| UnitRef::Unit(u)));
        }
        debug_assert_eq!(slots.len(), self.spec.n_targets());
        slots
    }

    fn slot_legal(&self, state: &GameState, hero: usize, slot: Option<UnitRef>) -> bool {
        let Some(r) = slot else { return false };
        let me = &state.heroes[hero];
        let u = state.unit(r);
        if !(me.alive() && u.alive && me.sees(u.pos) && me.pos().dist(u.pos) <= TARGET_RANGE) {
            return false;
        }
        !state.invulnerable(u)
    }

    fn compute_masks(&self, state: &GameState, hero: usize, slots: &[Option<UnitRef>]) -> ActionMasks {
        let me = &state.heroes[hero];
        let spec = &self.spec;
        let mut legal: Vec<Vec<bool>> = spec.head_sizes.iter().map(|&s| vec![false; s]).collect();
        if !me.alive() {
            let neutral = StructuredAction::noop(spec);
            for (h, &i) in neutral.head_indices.iter().enumerate() {
                legal[h][i] = true;
            }
            return ActionMasks { legal, sub_action_active: self.sub_table.clone() };
        }
        let team = me.team();
        let pos = me.pos();
        let mut any_target = false;
        for h in 0..spec.n_heads() {
            match spec.head_kind(h) {
                HeadKind::Target => {
                    legal[h][0] = true;
                    for (s, slot) in slots.iter().enumerate().skip(1) {
                        let ok = self.slot_legal(state, hero, *slot);
                        legal[h][s] = ok;
                        any_target |= ok;
                    }
                }
                HeadKind::MoveX => {
                    for i in 0..3 {
                        let dx = action::axis_offset(i) * team.dir();
                        legal[h][i] = self.layout.in_bounds(Pos::new(pos.x + dx, pos.y));
                    }
                }
                HeadKind::MoveY => {
                    for i in 0..3 {
                        legal[h][i] = self.layout.in_bounds(Pos::new(pos.x, pos.y + action::axis_offset(i)));
                    }
                }
                HeadKind::Move => {
                    for i in 0..9 {
                        let (dx, dy) = action::joint_offset(i);
                        legal[h][i] = self.layout.in_bounds(Pos::new(pos.x + dx * team.dir(), pos.y + dy));
                    }
                }
                HeadKind::SkillX | HeadKind::SkillY => legal[h].iter_mut().for_each(|l| *l = true),
                HeadKind::Button => {}
            }
        }
        let b = &mut legal[0];
        b[Button::NoOp as usize] = true;
        b[Button::Move as usize] = true;
        b[Button::Attack as usize] = any_target;
        b[Button::Skill as usize] = any_target && me.skill_cooldown == 0 && me.mana >= SKILL_MANA_COST;
        b[Button::Heal as usize] = me.heal_cooldown == 0 && me.base.hp < me.base.max_hp;
        ActionMasks { legal, sub_action_active: self.sub_table.clone() }
    }

    fn result(&self, rewards: Vec<RewardVector>) -> StepResult {
        let state = self.state.as_ref().expect("reset before result");
        let observations =
            (0..state.heroes.len()).map(|h| Observation { vector: observe::observe(&self.config, state, h) }).collect();
        let structure_hp =
            [state.turret(Team::A).hp, state.crystal(Team::A).hp, state.turret(Team::B).hp, state.crystal(Team::B).hp];
        StepResult {
            observations,
            masks: self.masks.clone(),
            rewards,
            done: state.done,
            info: StepInfo {
                winner: state.winner,
                step: state.step,
                hero_gold: state.heroes.iter().map(|h| h.gold).collect(),
                structure_hp,
            },
        }
    }
}

fn snapshot(state: &GameState, hero: usize) -> HeroSnapshot {
    let h = &state.heroes[hero];
    HeroSnapshot {
        hp_rate: h.base.hp_rate(),
        mana_rate: h.mana as f64 / MAX_MANA as f64,
        gold: h.gold,
        exp: h.experience,
        structure_rate: state.structure_rate(h.team()),
        alive: h.alive(),
    }
}

/// Simple key/value view of the info map, e.g. for logging.
pub fn info_map(info: &StepInfo) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("winner".into(), format!("{:?}", info.winner));
    m.insert("step".into(), info.step.to_string());
    m.insert("hero_gold".into(), format!("{:?}", info.hero_gold));
    m.insert("structure_hp".into(), format!("{:?}", info.structure_hp));
    m
}
