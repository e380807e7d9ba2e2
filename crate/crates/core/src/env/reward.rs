//! Multi-head rewards: per-item values, the group-weighted hero reward and its
//! zero-sum transform.

use serde::{Deserialize, Serialize};

use super::config::{Mode, RewardWeights};
use super::constants::*;
use super::state::Team;

/// Reward group an item contributes to, in weight order `w1..w5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardGroup {
    Farming = 0,
    Kda = 1,
    Damage = 2,
    Pushing = 3,
    WinLose = 4,
}

use RewardGroup::*;

pub const SOLO_ITEMS: [(&str, RewardGroup); 9] = [
    ("hp_point", Damage),
    ("tower_hp_point", Pushing),
    ("money", Farming),
    ("ep_rate", Damage),
    ("death", Kda),
    ("kill", Kda),
    ("exp", Farming),
    ("last_hit", Farming),
    ("win", WinLose),
];

pub const TRIO_ITEMS: [(&str, RewardGroup); 11] = [
    ("hp_rate_sqrt_sqrt", Damage),
    ("money", Farming),
    ("exp", Farming),
    ("tower", Pushing),
    ("kill_cnt", Kda),
    ("assist_cnt", Kda),
    ("dead_cnt", Kda),
    ("total_hurt_to_hero", Damage),
    ("atk_monster", Farming),
    ("atk_crystal", Pushing),
    ("win_crystal", WinLose),
];

pub fn reward_items(mode: Mode) -> &'static [(&'static str, RewardGroup)] {
    if mode.is_trio_map() {
        &TRIO_ITEMS
    } else {
        &SOLO_ITEMS
    }
}

pub fn reward_item_names(mode: Mode) -> Vec<&'static str> {
    reward_items(mode).iter().map(|(n, _)| *n).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    /// Item values in the order of [`reward_items`] for the mode.
    pub items: Vec<f64>,
    pub weighted: f64,
    pub zero_sum: f64,
}

impl RewardVector {
    pub fn zeros(mode: Mode) -> Self {
        RewardVector { items: vec![0.0; reward_items(mode).len()], weighted: 0.0, zero_sum: 0.0 }
    }

    pub fn item(&self, mode: Mode, name: &str) -> Option<f64> {
        reward_items(mode).iter().position(|(n, _)| *n == name).map(|i| self.items[i])
    }
}

/// Σ_g w_g · Σ_{items in g} item.
pub fn weighted_reward(mode: Mode, items: &[f64], weights: &RewardWeights) -> f64 {
    let w = weights.as_array();
    reward_items(mode).iter().zip(items).map(|((_, g), v)| w[*g as usize] * v).sum()
}

/// `weighted[i] − mean(weighted over heroes of the enemy team)`. A team with no
/// enemy heroes subtracts nothing.
pub fn zero_sum_rewards(weighted: &[f64], teams: &[Team]) -> Vec<f64> {
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for (w, t) in weighted.iter().zip(teams) {
        if *t != Team::Neutral {
            sums[t.index()] += w;
            counts[t.index()] += 1;
        }
    }
    weighted
        .iter()
        .zip(teams)
        .map(|(w, t)| {
            let e = t.enemy();
            if e == Team::Neutral || counts[e.index()] == 0 {
                *w
            } else {
                w - sums[e.index()] / counts[e.index()] as f64
            }
        })
        .collect()
}

/// Hero quantities sampled at the end of a tick; dense items are deltas of these.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct HeroSnapshot {
    pub hp_rate: f64,
    pub mana_rate: f64,
    pub gold: u32,
    pub exp: u32,
    pub structure_rate: f64,
    pub alive: bool,
}

/// Events a hero took part in during one tick.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct HeroTick {
    pub kills: u32,
    pub died: bool,
    pub respawned: bool,
    pub last_hits: u32,
    pub assists: u32,
    pub hero_damage: u32,
    pub monster_damage: u32,
    pub crystal_damage: u32,
}

fn dense(v: f64) -> f64 {
    v.clamp(-DENSE_CAP, DENSE_CAP)
}

fn sparse(count: u32, magnitude: f64) -> f64 {
    if count > 0 {
        magnitude
    } else {
        0.0
    }
}

/// Item values of one hero for one tick. `outcome` is +1 when the hero's team
/// won this tick, −1 when it lost and 0 otherwise.
pub(crate) fn hero_items(
    mode: Mode,
    prev: &HeroSnapshot,
    now: &HeroSnapshot,
    tick: &HeroTick,
    outcome: i32,
) -> Vec<f64> {
    // A respawn restores hp without any deed; do not pay for it.
    let hp_prev = if tick.respawned { now.hp_rate } else { prev.hp_rate };
    let mana_prev = if tick.respawned { now.mana_rate } else { prev.mana_rate };
    let money = dense((now.gold - prev.gold) as f64 / MONEY_SCALE);
    let exp = dense((now.exp - prev.exp) as f64 / EXP_SCALE);
    let tower = dense(now.structure_rate - prev.structure_rate);
    let win = outcome as f64 * WIN_REWARD;
    if mode.is_trio_map() {
        vec![
            dense(now.hp_rate.powf(0.25) - hp_prev.powf(0.25)),
            money,
            exp,
            tower,
            sparse(tick.kills, KILL_REWARD),
            sparse(tick.assists, ASSIST_REWARD),
            -sparse(tick.died as u32, DEATH_REWARD),
            dense(tick.hero_damage as f64 / DAMAGE_SCALE),
            dense(tick.monster_damage as f64 / DAMAGE_SCALE),
            dense(tick.crystal_damage as f64 / DAMAGE_SCALE),
            win,
        ]
    } else {
        vec![
            dense(now.hp_rate - hp_prev),
            tower,
            money,
            dense(now.mana_rate - mana_prev),
            -sparse(tick.died as u32, DEATH_REWARD),
            sparse(tick.kills, KILL_REWARD),
            exp,
            sparse(tick.last_hits, LAST_HIT_REWARD),
            win,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solo_kill_trade_is_plus_minus_two() {
        let mode = Mode::Solo;
        let names = reward_item_names(mode);
        let mut a = vec![0.0; names.len()];
        let mut b = vec![0.0; names.len()];
        a[names.iter().position(|n| *n == "kill").unwrap()] = 1.0;
        b[names.iter().position(|n| *n == "death").unwrap()] = -1.0;
        let w = RewardWeights::default();
        let weighted = [weighted_reward(mode, &a, &w), weighted_reward(mode, &b, &w)];
        let zs = zero_sum_rewards(&weighted, &[Team::A, Team::B]);
        assert_eq!(zs, vec![2.0, -2.0]);
    }

    #[test]
    fn symmetric_tick_is_zero() {
        let zs = zero_sum_rewards(&[0.3, 0.3], &[Team::A, Team::B]);
        assert_eq!(zs, vec![0.0, 0.0]);
    }

    #[test]
    fn trio_zero_sum_sums_to_zero() {
        let weighted = [0.1, -0.7, 2.25, 0.003, 1.5, -0.25];
        let teams = [Team::A, Team::A, Team::A, Team::B, Team::B, Team::B];
        let s: f64 = zero_sum_rewards(&weighted, &teams).iter().sum();
        assert!(s.abs() < 1e-12, "{s}");
    }

    #[test]
    fn weights_scale_groups() {
        let mode = Mode::Solo;
        let items = vec![1.0; SOLO_ITEMS.len()];
        let w = RewardWeights { farming: 2.0, kda: 0.0, damage: 0.0, pushing: 0.0, win_lose: 0.0 };
        // money, exp, last_hit
        assert_eq!(weighted_reward(mode, &items, &w), 6.0);
    }

    #[test]
    fn subtask_without_enemies_keeps_weighted() {
        assert_eq!(zero_sum_rewards(&[0.5, 0.25], &[Team::A, Team::A]), vec![0.5, 0.25]);
    }
}
