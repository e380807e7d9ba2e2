//! Every tunable number of the micro-environment lives here.
//!
//! `docs/env.md` mirrors this table; keep them in sync.

/// Ticks between creep waves. A wave spawns on the first tick of each period.
pub const WAVE_PERIOD: u32 = 20;
/// Creeps per wave per team.
pub const CREEPS_PER_WAVE: usize = 2;
/// Upper bound on simultaneously alive creeps per team.
pub const MAX_CREEPS_PER_TEAM: usize = 8;

/// Hero respawn delay in ticks.
pub const RESPAWN_DELAY: u32 = 15;
/// Monster respawn delay in ticks.
pub const MONSTER_RESPAWN_DELAY: u32 = 30;

pub const VISION_RADIUS: u32 = 4;
/// Maximum Chebyshev distance at which a unit can be selected as a target.
pub const TARGET_RANGE: u32 = 3;
/// Chebyshev radius of a skill blast around its center cell.
pub const SKILL_BLAST_RADIUS: u32 = 1;

pub const MAX_MANA: u32 = 100;
pub const MANA_REGEN: u32 = 2;
pub const SKILL_MANA_COST: u32 = 30;
pub const SKILL_COOLDOWN: u32 = 6;
pub const HEAL_AMOUNT: u32 = 25;
pub const HEAL_COOLDOWN: u32 = 20;
/// Per-tick hp and mana regeneration within `FOUNTAIN_RADIUS` of the own crystal.
pub const FOUNTAIN_REGEN: u32 = 8;
pub const FOUNTAIN_RADIUS: u32 = 1;

pub const CRIT_MULTIPLIER: u32 = 2;
pub const DEFAULT_CRIT_CHANCE: f64 = 0.1;

pub const CREEP_HP: u32 = 60;
pub const CREEP_ATTACK: u32 = 5;
pub const CREEP_RANGE: u32 = 1;
/// Creeps divert from the lane toward enemies within this distance.
pub const CREEP_AGGRO: u32 = 2;

pub const TURRET_HP: u32 = 200;
pub const TURRET_ATTACK: u32 = 20;
pub const TURRET_RANGE: u32 = 2;
pub const CRYSTAL_HP: u32 = 300;

pub const MONSTER_HP: u32 = 80;
pub const MONSTER_ATTACK: u32 = 4;
pub const MONSTER_RANGE: u32 = 1;

pub const GOLD_CREEP: u32 = 15;
pub const GOLD_HERO: u32 = 50;
pub const GOLD_TURRET: u32 = 80;
pub const GOLD_MONSTER: u32 = 25;
pub const EXP_CREEP: u32 = 10;
pub const EXP_HERO: u32 = 30;
pub const EXP_MONSTER: u32 = 10;
/// Experience needed per hero level; levels start at 1.
pub const EXP_PER_LEVEL: u32 = 60;
pub const MAX_HERO_LEVEL: u32 = 8;
/// Stat growth per level gained.
pub const ATTACK_PER_LEVEL: u32 = 2;
pub const HP_PER_LEVEL: u32 = 15;
/// Experience every living hero gains per tick.
pub const EXP_AMBIENT: u32 = 1;

/// Allies within this distance of a killed enemy hero are credited an assist.
pub const ASSIST_RADIUS: u32 = 3;

/// Divisors for dense reward items; dense items are then clamped to `DENSE_CAP`.
pub const MONEY_SCALE: f64 = 100.0;
pub const EXP_SCALE: f64 = 100.0;
pub const DAMAGE_SCALE: f64 = 100.0;
pub const DENSE_CAP: f64 = 1.0;

/// Magnitudes of sparse reward items. Each sparse item is `{0, ±1} × magnitude`.
pub const KILL_REWARD: f64 = 1.0;
pub const DEATH_REWARD: f64 = 1.0;
pub const ASSIST_REWARD: f64 = 0.5;
pub const LAST_HIT_REWARD: f64 = 0.5;
pub const WIN_REWARD: f64 = 2.0;

/// Normalizers for observation features.
pub const GOLD_NORM: f64 = 1000.0;
pub const EXP_NORM: f64 = 1000.0;
pub const SCORE_NORM: f64 = 10.0;

/// Minimum grid dimensions accepted by the configuration.
pub const MIN_GRID_WIDTH: u32 = 5;
pub const MIN_GRID_HEIGHT: u32 = 3;
pub const DEFAULT_GRID_WIDTH: u32 = 15;
pub const DEFAULT_GRID_HEIGHT: u32 = 7;
pub const DEFAULT_MAX_STEPS: u32 = 400;
pub const GAIN_GOLD_MAX_STEPS: u32 = 200;

/// Default calibration endpoints for the sub-task scores on the default map,
/// measured as the mean outcome of ladder level 0 (random) and level 4 (expert)
/// over 256 episodes.
pub const DESTROY_TURRET_RANDOM_FRAMES: f64 = 399.3;
pub const DESTROY_TURRET_EXPERT_FRAMES: f64 = 115.2;
pub const GAIN_GOLD_RANDOM: f64 = 264.6;
pub const GAIN_GOLD_EXPERT: f64 = 799.6;
