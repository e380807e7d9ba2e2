use serde::{Deserialize, Serialize};

use crate::env::{Archetype, RewardVector, SubtaskOutcome, Team};

/// One controlled hero at one tick.
#[derive(Clone, Debug, PartialEq)]
pub struct HeroStep {
    pub obs: Vec<f32>,
    pub legal: Vec<Vec<bool>>,
    pub action: Vec<u16>,
    /// Sub-action row of the chosen button: which heads were executed.
    pub active: Vec<bool>,
    pub reward: RewardVector,
}

impl HeroStep {
    pub fn admits_action(&self) -> bool {
        self.action.len() == self.legal.len()
            && self.action.iter().zip(&self.legal).all(|(&a, l)| l.get(a as usize).copied().unwrap_or(false))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepFrame {
    pub heroes: Vec<HeroStep>,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub seed: u64,
    pub controlled_label: String,
    pub opponent_label: String,
    pub archetypes: [Vec<Archetype>; 2],
    pub controlled_team: Team,
    pub winner: Option<Team>,
    pub length: u32,
    pub subtask: Option<SubtaskOutcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub meta: EpisodeMeta,
    pub frames: Vec<StepFrame>,
}

impl EpisodeMeta {
    /// 1 for a win of the controlled team, 0 for a loss, 0.5 otherwise.
    pub fn outcome_score(&self) -> f64 {
        match self.winner {
            Some(w) if w == self.controlled_team => 1.0,
            Some(_) => 0.0,
            None => 0.5,
        }
    }
}

impl EpisodeRecord {
    /// Undiscounted return: zero-sum rewards summed over controlled heroes and ticks.
    pub fn episode_return(&self) -> f64 {
        self.frames.iter().flat_map(|f| f.heroes.iter()).map(|h| h.reward.zero_sum).sum()
    }
}
