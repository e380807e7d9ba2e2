//! Scripted multi-level policies and head-to-head evaluation.

mod policy;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use policy::{legalize, random_legal, LevelPolicy, MAX_LEVEL};

use crate::env::{EnvConfig, EnvError, Team};
use crate::rollout::{run_episode, EpisodeSpec, TeamPolicy};

#[derive(Debug, Error)]
pub enum LadderError {
    #[error("level {0} is out of range 0..=4")]
    Level(u8),
    #[error("a duel needs at least one episode")]
    NoEpisodes,
    #[error("duels need a mode with enemy heroes")]
    NoOpponent,
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Base seed under which the ladder calibration is frozen.
pub const GOLDEN_SEED: u64 = 20_240_601;

pub fn make_level(k: u8) -> Result<LevelPolicy, LadderError> {
    LevelPolicy::new(k)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DuelResult {
    pub wins: u32,
    pub losses: u32,
    pub draws: u32,
}

impl DuelResult {
    pub fn episodes(&self) -> u32 {
        self.wins + self.losses + self.draws
    }

    /// Wins plus half the draws, over all episodes.
    pub fn win_rate(&self) -> f64 {
        (self.wins as f64 + 0.5 * self.draws as f64) / self.episodes().max(1) as f64
    }
}

/// Play `episodes` games of `a` against `b` with seeds `base_seed..base_seed+n`.
/// `a` takes side A on even episodes and side B on odd ones.
pub fn duel(
    config: &EnvConfig,
    a: &dyn TeamPolicy,
    b: &dyn TeamPolicy,
    episodes: u32,
    base_seed: u64,
) -> Result<DuelResult, LadderError> {
    if episodes == 0 {
        return Err(LadderError::NoEpisodes);
    }
    if !config.mode.has_enemy_heroes() {
        return Err(LadderError::NoOpponent);
    }
    let outcomes: Vec<Result<f64, EnvError>> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let side = if i % 2 == 0 { Team::A } else { Team::B };
            let rec = run_episode(&EpisodeSpec {
                config,
                seed: base_seed.wrapping_add(i as u64),
                controlled: a,
                opponent: Some(b),
                controlled_team: side,
                record: false,
            })?;
            Ok(rec.meta.outcome_score())
        })
        .collect();
    let mut r = DuelResult::default();
    for o in outcomes {
        let s = o?;
        if s == 1.0 {
            r.wins += 1;
        } else if s == 0.0 {
            r.losses += 1;
        } else {
            r.draws += 1;
        }
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub levels: Vec<u8>,
    /// `win_rate[i][j]`: win rate of level `levels[i]` against `levels[j]`.
    pub win_rate: Vec<Vec<f64>>,
    pub episodes_per_pair: u32,
    pub seed: u64,
}

impl LadderReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level_a,level_b,win_rate,episodes\n");
        for (i, a) in self.levels.iter().enumerate() {
            for (j, b) in self.levels.iter().enumerate() {
                s.push_str(&format!("{a},{b},{},{}\n", self.win_rate[i][j], self.episodes_per_pair));
            }
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Full pairwise matrix over all levels. Pair `(i, j)` uses seeds derived from
/// `seed` and the pair so that matrix entries are independent.
pub fn ladder_report(config: &EnvConfig, episodes_per_pair: u32, seed: u64) -> Result<LadderReport, LadderError> {
    let levels: Vec<u8> = (0..=MAX_LEVEL).collect();
    let mut win_rate = vec![vec![0.0; levels.len()]; levels.len()];
    for &i in &levels {
        for &j in &levels {
            let a = make_level(i)?;
            let b = make_level(j)?;
            let pair_seed = crate::seed::derive_seed(seed, &[i as u64, j as u64]);
            win_rate[i as usize][j as usize] = duel(config, &a, &b, episodes_per_pair, pair_seed)?.win_rate();
        }
    }
    Ok(LadderReport { levels, win_rate, episodes_per_pair, seed })
}
