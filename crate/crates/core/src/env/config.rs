use serde::{Deserialize, Serialize};

use super::constants::*;
use super::EnvError;
use crate::env::action::ActionSpec;

/// Game mode. The two sub-task modes reuse the Solo and Trio maps with the
/// enemy heroes removed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solo,
    Trio,
    SubDestroyTurret,
    SubGainGold,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Solo, Mode::Trio, Mode::SubDestroyTurret, Mode::SubGainGold];

    /// True for modes played on the Trio map (three heroes, monsters).
    pub fn is_trio_map(self) -> bool {
        matches!(self, Mode::Trio | Mode::SubGainGold)
    }

    pub fn has_enemy_heroes(self) -> bool {
        matches!(self, Mode::Solo | Mode::Trio)
    }

    pub fn is_subtask(self) -> bool {
        !self.has_enemy_heroes()
    }

    pub fn heroes_per_team(self) -> usize {
        if self.is_trio_map() {
            3
        } else {
            1
        }
    }

    pub fn obs_dim(self) -> usize {
        if self.is_trio_map() {
            super::observe::TRIO_OBS_DIM
        } else {
            super::observe::SOLO_OBS_DIM
        }
    }

    pub fn action_spec(self) -> ActionSpec {
        if self.is_trio_map() {
            ActionSpec::trio()
        } else {
            ActionSpec::solo()
        }
    }

    pub fn default_max_steps(self) -> u32 {
        match self {
            Mode::SubGainGold => GAIN_GOLD_MAX_STEPS,
            _ => DEFAULT_MAX_STEPS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Solo => "solo",
            Mode::Trio => "trio",
            Mode::SubDestroyTurret => "sub_destroy_turret",
            Mode::SubGainGold => "sub_gain_gold",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| EnvError::Config { field: "mode", reason: format!("unknown mode `{s}`") })
    }
}

/// Hero archetype. Archetypes differ in durability, reach and skill power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Marksman,
    Fighter,
    Mage,
}

pub struct ArchetypeStats {
    pub max_hp: u32,
    pub attack: u32,
    pub attack_range: u32,
    pub skill_damage: u32,
}

impl Archetype {
    pub const ALL: [Archetype; 3] = [Archetype::Marksman, Archetype::Fighter, Archetype::Mage];

    pub fn stats(self) -> ArchetypeStats {
        match self {
            Archetype::Marksman => ArchetypeStats { max_hp: 100, attack: 10, attack_range: 2, skill_damage: 25 },
            Archetype::Fighter => ArchetypeStats { max_hp: 140, attack: 9, attack_range: 1, skill_damage: 20 },
            Archetype::Mage => ArchetypeStats { max_hp: 90, attack: 7, attack_range: 2, skill_damage: 35 },
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Weights `w1..w5` of the five reward groups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub farming: f64,
    pub kda: f64,
    pub damage: f64,
    pub pushing: f64,
    pub win_lose: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { farming: 1.0, kda: 1.0, damage: 1.0, pushing: 1.0, win_lose: 1.0 }
    }
}

impl RewardWeights {
    pub fn as_array(&self) -> [f64; 5] {
        [self.farming, self.kda, self.damage, self.pushing, self.win_lose]
    }
}

/// Endpoints of the normalized sub-task score: an outcome equal to `random`
/// scores 0 and one equal to `expert` scores 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtaskCalibration {
    pub random: f64,
    pub expert: f64,
}

impl SubtaskCalibration {
    /// Frame-length endpoints of the original Destroy Turret benchmark.
    pub const REFERENCE_DESTROY_TURRET: SubtaskCalibration = SubtaskCalibration { random: 2880.0, expert: 1812.0 };
    /// Gold endpoints of the original Gain Gold benchmark.
    pub const REFERENCE_GAIN_GOLD: SubtaskCalibration = SubtaskCalibration { random: 5000.0, expert: 12000.0 };

    /// Endpoints measured on this environment's default map.
    pub fn default_for(mode: Mode) -> Option<SubtaskCalibration> {
        match mode {
            Mode::SubDestroyTurret => {
                Some(SubtaskCalibration { random: DESTROY_TURRET_RANDOM_FRAMES, expert: DESTROY_TURRET_EXPERT_FRAMES })
            }
            Mode::SubGainGold => Some(SubtaskCalibration { random: GAIN_GOLD_RANDOM, expert: GAIN_GOLD_EXPERT }),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub mode: Mode,
    pub grid_width: u32,
    pub grid_height: u32,
    pub max_steps: u32,
    pub reward_weights: RewardWeights,
    pub crit_chance: f64,
    /// Archetypes of team A then team B. Sub-task modes ignore team B.
    pub hero_archetypes_per_team: [Vec<Archetype>; 2],
    pub seed: u64,
    #[serde(default)]
    pub subtask_calibration: Option<SubtaskCalibration>,
}

impl EnvConfig {
    pub fn new(mode: Mode) -> Self {
        let team = if mode.is_trio_map() {
            vec![Archetype::Marksman, Archetype::Fighter, Archetype::Mage]
        } else {
            vec![Archetype::Marksman]
        };
        let enemy = if mode.has_enemy_heroes() { team.clone() } else { Vec::new() };
        EnvConfig {
            mode,
            grid_width: DEFAULT_GRID_WIDTH,
            grid_height: DEFAULT_GRID_HEIGHT,
            max_steps: mode.default_max_steps(),
            reward_weights: RewardWeights::default(),
            crit_chance: DEFAULT_CRIT_CHANCE,
            hero_archetypes_per_team: [team, enemy],
            seed: 0,
            subtask_calibration: SubtaskCalibration::default_for(mode),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |field: &'static str, reason: String| Err(EnvError::Config { field, reason });
        if self.grid_width < MIN_GRID_WIDTH {
            return bad("grid_width", format!("{} < minimum {MIN_GRID_WIDTH}", self.grid_width));
        }
        if self.grid_height < MIN_GRID_HEIGHT {
            return bad("grid_height", format!("{} < minimum {MIN_GRID_HEIGHT}", self.grid_height));
        }
        if self.grid_width > 255 || self.grid_height > 255 {
            return bad("grid_width", "grid dimensions above 255 are not supported".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps", "must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.crit_chance) || self.crit_chance.is_nan() {
            return bad("crit_chance", format!("{} is not a probability", self.crit_chance));
        }
        for (name, w) in ["farming", "kda", "damage", "pushing", "win_lose"].iter().zip(self.reward_weights.as_array())
        {
            if !(w >= 0.0) || !w.is_finite() {
                return bad("reward_weights", format!("{name} weight {w} must be a non-negative real"));
            }
        }
        let per_team = self.mode.heroes_per_team();
        let [a, b] = &self.hero_archetypes_per_team;
        if a.len() != per_team {
            return bad(
                "hero_archetypes_per_team",
                format!("{} mode needs {per_team} archetypes for team A, got {}", self.mode.name(), a.len()),
            );
        }
        if self.mode.has_enemy_heroes() && b.len() != per_team {
            return bad(
                "hero_archetypes_per_team",
                format!("{} mode needs {per_team} archetypes for team B, got {}", self.mode.name(), b.len()),
            );
        }
        if let Some(cal) = self.subtask_calibration {
            if !(cal.random.is_finite() && cal.expert.is_finite()) {
                return bad("subtask_calibration", "endpoints must be finite".into());
            }
        }
        Ok(())
    }

    /// Number of heroes actually spawned.
    pub fn n_heroes(&self) -> usize {
        let per_team = self.mode.heroes_per_team();
        if self.mode.has_enemy_heroes() {
            2 * per_team
        } else {
            per_team
        }
    }
}
