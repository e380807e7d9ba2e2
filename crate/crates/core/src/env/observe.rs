//! Per-hero partial observations.
//!
//! Layout (own frame, `dx` positive toward the enemy crystal, distances
//! normalized by the grid extent):
//!
//! | block            | Solo  | Trio  | per-entry features                                   |
//! |------------------|-------|-------|------------------------------------------------------|
//! | own hero         | 0..14 | 0..14 | alive, x, y, hp, mana, skill cd, heal cd, gold, exp, respawn, level, archetype one-hot(3) |
//! | last button      | 14..19| 14..19| one-hot over buttons                                 |
//! | ally heroes      |       | 19..29| 2 × (visible∧alive, dx, dy, hp, mana)               |
//! | enemy heroes     | 19..25| 29..47| n × (visible, dx, dy, hp, skill ready, in my range)  |
//! | enemy creeps     | 25..33| 47..55| 2 × (visible, dx, dy, hp), target-slot order         |
//! | ally creeps      | 33..41| 55..63| 2 × (visible, dx, dy, hp)                           |
//! | structures       | 41..57| 63..79| own turret, own crystal, enemy turret, enemy crystal × (alive, hp, dx, dy) |
//! | monsters         |       | 79..87| 2 × (visible, dx, dy, hp)                           |
//! | global           | 57..64| 87..96| see [`global_block`]                                 |
//!
//! Units outside the observer's vision contribute zeros. Structures are always
//! visible.

use super::config::{Archetype, EnvConfig};
use super::constants::*;
use super::state::{GameState, HeroState, Pos, Team, UnitKind};

pub const SOLO_OBS_DIM: usize = 64;
pub const TRIO_OBS_DIM: usize = 96;

const OWN_LEN: usize = 14;
const ALLY_LEN: usize = 5;
const ENEMY_LEN: usize = 6;
const UNIT_LEN: usize = 4;

struct Writer {
    buf: Vec<f32>,
}

impl Writer {
    fn push(&mut self, v: f64) {
        self.buf.push(v.clamp(-1.0, 1.0) as f32);
    }

    fn flag(&mut self, b: bool) {
        self.push(if b { 1.0 } else { 0.0 });
    }

    fn zeros(&mut self, n: usize) {
        self.buf.extend(std::iter::repeat_n(0.0, n));
    }
}

struct Frame {
    origin: Pos,
    dir: i32,
    sx: f64,
    sy: f64,
}

impl Frame {
    fn rel(&self, p: Pos) -> (f64, f64) {
        (((p.x - self.origin.x) * self.dir) as f64 / self.sx, (p.y - self.origin.y) as f64 / self.sy)
    }
}

/// Indices into `state.units` of visible alive units matching `pred`, nearest
/// first, ties by unit id.
pub(crate) fn nearest_visible(
    state: &GameState,
    observer: &HeroState,
    pred: impl Fn(UnitKind, Team) -> bool,
) -> Vec<usize> {
    let mut v: Vec<(u32, u32, usize)> = state
        .units
        .iter()
        .enumerate()
        .filter(|(_, u)| u.state.alive && pred(u.state.kind, u.state.team) && observer.sees(u.state.pos))
        .map(|(i, u)| (observer.pos().dist(u.state.pos), u.state.unit_id, i))
        .collect();
    v.sort_unstable();
    v.into_iter().map(|(_, _, i)| i).collect()
}

pub(crate) fn observe(config: &EnvConfig, state: &GameState, hero_idx: usize) -> Vec<f32> {
    let me = &state.heroes[hero_idx];
    let team = me.team();
    let enemy = team.enemy();
    let trio = config.mode.is_trio_map();
    let w = config.grid_width as i32;
    let frame = Frame {
        origin: me.pos(),
        dir: team.dir(),
        sx: (config.grid_width - 1) as f64,
        sy: (config.grid_height - 1) as f64,
    };
    let mut out = Writer { buf: Vec::with_capacity(config.mode.obs_dim()) };

    // own hero
    let own_x = if team == Team::A { me.pos().x } else { w - 1 - me.pos().x };
    out.flag(me.alive());
    out.push(own_x as f64 / frame.sx);
    out.push(me.pos().y as f64 / frame.sy);
    out.push(me.base.hp_rate());
    out.push(me.mana as f64 / MAX_MANA as f64);
    out.push(me.skill_cooldown as f64 / SKILL_COOLDOWN as f64);
    out.push(me.heal_cooldown as f64 / HEAL_COOLDOWN as f64);
    out.push(me.gold as f64 / GOLD_NORM);
    out.push(me.experience as f64 / EXP_NORM);
    out.push(me.respawn_timer as f64 / RESPAWN_DELAY as f64);
    out.push(me.level as f64 / MAX_HERO_LEVEL as f64);
    for a in Archetype::ALL {
        out.flag(me.archetype == a);
    }
    debug_assert_eq!(out.buf.len(), OWN_LEN);

    for b in 0..5 {
        out.flag(me.last_button == b);
    }

    let per_team = config.mode.heroes_per_team();
    if trio {
        let allies: Vec<usize> = state.team_heroes(team).filter(|&i| i != hero_idx).collect();
        for slot in 0..per_team - 1 {
            match allies.get(slot).map(|&i| &state.heroes[i]) {
                Some(h) if h.alive() && me.sees(h.pos()) => {
                    let (dx, dy) = frame.rel(h.pos());
                    out.flag(true);
                    out.push(dx);
                    out.push(dy);
                    out.push(h.base.hp_rate());
                    out.push(h.mana as f64 / MAX_MANA as f64);
                }
                _ => out.zeros(ALLY_LEN),
            }
        }
    }

    let enemies: Vec<usize> = state.team_heroes(enemy).collect();
    for slot in 0..per_team {
        match enemies.get(slot).map(|&i| &state.heroes[i]) {
            Some(h) if h.alive() && me.sees(h.pos()) => {
                let (dx, dy) = frame.rel(h.pos());
                out.flag(true);
                out.push(dx);
                out.push(dy);
                out.push(h.base.hp_rate());
                out.flag(h.skill_cooldown == 0 && h.mana >= SKILL_MANA_COST);
                out.flag(me.pos().dist(h.pos()) <= me.attack_range);
            }
            _ => out.zeros(ENEMY_LEN),
        }
    }

    let enemy_creeps = nearest_visible(state, me, |k, t| k == UnitKind::Creep && t == enemy);
    let ally_creeps = nearest_visible(state, me, |k, t| k == UnitKind::Creep && t == team);
    for list in [&enemy_creeps, &ally_creeps] {
        for slot in 0..2 {
            unit_block(
                &mut out,
                &frame,
                list.get(slot).map(|&i| (state.units[i].state.pos, state.units[i].state.hp_rate())),
            );
        }
    }

    for s in [state.turret(team), state.crystal(team), state.turret(enemy), state.crystal(enemy)] {
        let (dx, dy) = frame.rel(s.pos);
        out.flag(s.alive);
        out.push(s.hp_rate());
        out.push(dx);
        out.push(dy);
    }

    if trio {
        let monsters = nearest_visible(state, me, |k, _| k == UnitKind::Monster);
        for slot in 0..2 {
            unit_block(
                &mut out,
                &frame,
                monsters.get(slot).map(|&i| (state.units[i].state.pos, state.units[i].state.hp_rate())),
            );
        }
    }

    global_block(&mut out, config, state, me, enemy_creeps.len(), ally_creeps.len());
    debug_assert_eq!(out.buf.len(), config.mode.obs_dim());
    out.buf
}

fn unit_block(out: &mut Writer, frame: &Frame, unit: Option<(Pos, f64)>) {
    match unit {
        Some((pos, hp)) => {
            let (dx, dy) = frame.rel(pos);
            out.flag(true);
            out.push(dx);
            out.push(dy);
            out.push(hp);
        }
        None => out.zeros(UNIT_LEN),
    }
}

/// Solo: step fraction, wave timer, visible enemy creeps, visible ally creeps,
/// inside enemy turret range, ally creeps inside enemy turret range, kill
/// score difference. Trio appends team gold and a sub-task flag.
fn global_block(
    out: &mut Writer,
    config: &EnvConfig,
    state: &GameState,
    me: &HeroState,
    n_enemy_creeps: usize,
    n_ally_creeps: usize,
) {
    let team = me.team();
    let enemy = team.enemy();
    let et = state.turret(enemy);
    out.push(state.step as f64 / config.max_steps as f64);
    out.push((state.step % WAVE_PERIOD) as f64 / WAVE_PERIOD as f64);
    out.push(n_enemy_creeps as f64 / MAX_CREEPS_PER_TEAM as f64);
    out.push(n_ally_creeps as f64 / MAX_CREEPS_PER_TEAM as f64);
    out.flag(me.alive() && et.alive && me.pos().dist(et.pos) <= TURRET_RANGE);
    let tanking = if et.alive {
        state
            .units
            .iter()
            .filter(|u| {
                u.state.alive
                    && u.state.kind == UnitKind::Creep
                    && u.state.team == team
                    && u.state.pos.dist(et.pos) <= TURRET_RANGE
                    && me.sees(u.state.pos)
            })
            .count()
    } else {
        0
    };
    out.push(tanking as f64 / 4.0);
    let diff = state.team_kills[team.index()] as f64 - state.team_kills[enemy.index()] as f64;
    out.push(diff / SCORE_NORM);
    if config.mode.is_trio_map() {
        let gold: u32 = state.team_heroes(team).map(|i| state.heroes[i].gold).sum();
        out.push(gold as f64 / (3.0 * GOLD_NORM));
        out.flag(config.mode.is_subtask());
    }
}
