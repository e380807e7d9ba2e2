//! Parallel dataset generation from recipes, and the standard dataset suite.
//!
//! Episode `i` of a recipe uses seed `recipe.seed + i`; the controlled team
//! alternates sides (A on even episodes) except in sub-tasks, which only have
//! team A. Episodes run on a worker pool and are written in index order, so
//! the output does not depend on scheduling or worker count.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algos::{AlgoError, TrainedPolicy};
use crate::dataset::{
    mix_datasets, read_all, write_dataset, DatasetError, DatasetHeader, DatasetWriter, EpisodeRecord,
};
use crate::env::{EnvConfig, EnvError, Mode, Team};
use crate::ladder::{make_level, MAX_LEVEL};
use crate::rollout::{run_episode, EpisodeSpec, MixedTeam, TeamPolicy};
use crate::seed::rng_for;

/// Episodes simulated per parallel chunk before writing.
const CHUNK: usize = 64;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid recipe: {0}")]
    Recipe(String),
    #[error("cannot load policy checkpoint {path}: {source}")]
    Checkpoint { path: PathBuf, source: AlgoError },
    #[error("environment mismatch: {0}")]
    EnvMismatch(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicySource {
    Level { level: u8 },
    Checkpoint { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OpponentSource {
    /// Sub-tasks have no enemy heroes.
    None,
    Level {
        level: u8,
    },
    /// A level drawn uniformly per episode.
    LevelSet {
        levels: Vec<u8>,
    },
    Checkpoint {
        path: PathBuf,
    },
}

/// Heterogeneous teams: one hero slot, drawn per episode, plays `level`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeammateOverride {
    pub level: u8,
    /// Also replace one hero of the opposing team.
    #[serde(default = "yes")]
    pub both_teams: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub name: String,
    pub mode: Mode,
    pub controlled: PolicySource,
    pub opponent: OpponentSource,
    #[serde(default)]
    pub teammate: Option<TeammateOverride>,
    pub episodes: u32,
    #[serde(default)]
    pub seed: u64,
    /// Environment settings; defaults to the mode's standard config.
    #[serde(default)]
    pub env: Option<EnvConfig>,
}

impl Recipe {
    pub fn levels(name: &str, mode: Mode, controlled: u8, opponent: Option<u8>, episodes: u32, seed: u64) -> Self {
        Recipe {
            name: name.to_string(),
            mode,
            controlled: PolicySource::Level { level: controlled },
            opponent: opponent.map_or(OpponentSource::None, |level| OpponentSource::Level { level }),
            teammate: None,
            episodes,
            seed,
            env: None,
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        self.env.clone().unwrap_or_else(|| EnvConfig::new(self.mode))
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: String| Err(SamplerError::Recipe(m));
        if self.name.is_empty() {
            return bad("name must not be empty".into());
        }
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        let level_ok = |l: u8| l <= MAX_LEVEL;
        if let PolicySource::Level { level } = self.controlled {
            if !level_ok(level) {
                return bad(format!("controlled level {level} is out of range 0..={MAX_LEVEL}"));
            }
        }
        match (&self.opponent, self.mode.has_enemy_heroes()) {
            (OpponentSource::None, true) => return bad(format!("{} mode needs an opponent", self.mode.name())),
            (OpponentSource::None, false) => {}
            (_, false) => return bad(format!("{} mode has no enemy heroes", self.mode.name())),
            (OpponentSource::Level { level }, true) if !level_ok(*level) => {
                return bad(format!("opponent level {level} is out of range"))
            }
            (OpponentSource::LevelSet { levels }, true)
                if levels.is_empty() || !levels.iter().all(|&l| level_ok(l)) =>
            {
                return bad("opponent level set must be non-empty levels in 0..=4".into())
            }
            _ => {}
        }
        if let Some(t) = &self.teammate {
            if self.mode != Mode::Trio {
                return bad("teammate overrides need Trio mode".into());
            }
            if !level_ok(t.level) {
                return bad(format!("teammate level {} is out of range", t.level));
            }
        }
        if let Some(env) = &self.env {
            if env.mode != self.mode {
                return Err(SamplerError::EnvMismatch(format!(
                    "recipe mode {} but env config mode {}",
                    self.mode.name(),
                    env.mode.name()
                )));
            }
            env.validate()?;
        }
        Ok(())
    }
}

type Policy = Arc<dyn TeamPolicy>;

impl PolicySource {
    /// Build the policy, checking that a checkpoint matches `mode`'s action
    /// and observation layout.
    pub fn load(&self, mode: Mode) -> Result<Policy, SamplerError> {
        match self {
            PolicySource::Level { level } => {
                Ok(Arc::new(make_level(*level).map_err(|e| SamplerError::Recipe(e.to_string()))?))
            }
            PolicySource::Checkpoint { path } => {
                let (pol, meta) = TrainedPolicy::load(path)
                    .map_err(|source| SamplerError::Checkpoint { path: path.clone(), source })?;
                if meta.action_spec != mode.action_spec() || meta.obs_dim != mode.obs_dim() {
                    return Err(SamplerError::EnvMismatch(format!(
                        "checkpoint {} was trained for a different action/observation layout than {}",
                        path.display(),
                        mode.name()
                    )));
                }
                Ok(Arc::new(pol))
            }
        }
    }
}

/// Policies resolved once per recipe and shared read-only by workers.
struct Resolved {
    controlled: Policy,
    opponents: Vec<Policy>,
    teammate: Option<(Policy, bool)>,
}

impl Resolved {
    fn new(r: &Recipe) -> Result<Self, SamplerError> {
        let level = |l: u8| -> Policy { Arc::new(make_level(l).expect("validated level")) };
        let opponents = match &r.opponent {
            OpponentSource::None => Vec::new(),
            OpponentSource::Level { level: l } => vec![level(*l)],
            OpponentSource::LevelSet { levels } => levels.iter().map(|&l| level(l)).collect(),
            OpponentSource::Checkpoint { path } => {
                vec![PolicySource::Checkpoint { path: path.clone() }.load(r.mode)?]
            }
        };
        Ok(Resolved {
            controlled: r.controlled.load(r.mode)?,
            opponents,
            teammate: r.teammate.as_ref().map(|t| (level(t.level), t.both_teams)),
        })
    }

    fn episode(&self, r: &Recipe, cfg: &EnvConfig, i: u64) -> Result<EpisodeRecord, SamplerError> {
        let seed = r.seed.wrapping_add(i);
        let mut pick = rng_for(seed, &[0x5A3C]);
        let opponent = self.opponents.choose(&mut pick).cloned();
        let (controlled, opponent): (Policy, Option<Policy>) = match &self.teammate {
            Some((mate, both)) => {
                let n = r.mode.heroes_per_team();
                let swap = |base: &Policy, slot: usize| -> Policy {
                    let mut members = vec![base.clone(); n];
                    members[slot] = mate.clone();
                    Arc::new(MixedTeam { members })
                };
                let ours = swap(&self.controlled, pick.random_range(0..n));
                let theirs = opponent.map(|o| if *both { swap(&o, pick.random_range(0..n)) } else { o });
                (ours, theirs)
            }
            None => (self.controlled.clone(), opponent),
        };
        let side = if r.mode.has_enemy_heroes() && i % 2 == 1 { Team::B } else { Team::A };
        Ok(run_episode(&EpisodeSpec {
            config: cfg,
            seed,
            controlled: &*controlled,
            opponent: opponent.as_deref(),
            controlled_team: side,
            record: true,
        })?)
    }
}

/// Generate `recipe` into `out`. `workers` bounds the thread pool; `None`
/// uses the global pool.
pub fn run_recipe(recipe: &Recipe, out: &Path, workers: Option<usize>) -> Result<DatasetHeader, SamplerError> {
    recipe.validate()?;
    let cfg = recipe.env_config();
    cfg.validate()?;
    let resolved = Resolved::new(recipe)?;
    let mut writer = DatasetWriter::create(out, DatasetHeader::new(&cfg, &recipe.name))?;
    let run = |writer: &mut DatasetWriter| -> Result<(), SamplerError> {
        let n = recipe.episodes as u64;
        for start in (0..n).step_by(CHUNK) {
            let end = (start + CHUNK as u64).min(n);
            let eps: Vec<Result<EpisodeRecord, SamplerError>> =
                (start..end).into_par_iter().map(|i| resolved.episode(recipe, &cfg, i)).collect();
            for ep in eps {
                writer.write_episode(&ep?)?;
            }
        }
        Ok(())
    };
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| SamplerError::Pool(e.to_string()))?
            .install(|| run(&mut writer))?,
        None => run(&mut writer)?,
    }
    Ok(writer.finish()?)
}

/// Episode counts of the standard suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteScale {
    pub main_episodes: u32,
    pub subtask_episodes: u32,
}

impl Default for SuiteScale {
    fn default() -> Self {
        SuiteScale { main_episodes: 512, subtask_episodes: 64 }
    }
}

/// Opponent level of each difficulty tier; poor, medium and expert play one
/// level below, at, and above it.
pub const DIFFICULTIES: [(&str, u8); 2] = [("norm", 2), ("hard", 3)];

/// One dataset of the suite: sampled from a recipe, or mixed from earlier entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SuiteItem {
    Sample { recipe: Recipe },
    Mix { name: String, inputs: Vec<String> },
}

impl SuiteItem {
    pub fn name(&self) -> &str {
        match self {
            SuiteItem::Sample { recipe } => &recipe.name,
            SuiteItem::Mix { name, .. } => name,
        }
    }
}

/// The standard dataset taxonomy, in generation order. Names are
/// `<map>_<difficulty>_<kind>` for the Solo and Trio maps and
/// `<subtask>_<kind>` for the sub-tasks.
pub fn suite_plan(seed: u64, scale: SuiteScale) -> Vec<SuiteItem> {
    let mut items = Vec::new();
    let mut k = 0u64;
    let mut next_seed = || {
        k += 1;
        seed.wrapping_add(k * 1_000_003)
    };
    let sample = |r: Recipe| SuiteItem::Sample { recipe: r };
    for (map, mode) in [("solo", Mode::Solo), ("trio", Mode::Trio)] {
        let n = scale.main_episodes;
        for (tier, opp) in DIFFICULTIES {
            let names: Vec<String> = ["poor", "medium", "expert"].iter().map(|q| format!("{map}_{tier}_{q}")).collect();
            for (name, lvl) in names.iter().zip([opp - 1, opp, opp + 1]) {
                items.push(sample(Recipe::levels(name, mode, lvl, Some(opp), n, next_seed())));
            }
            items.push(SuiteItem::Mix { name: format!("{map}_{tier}_mixed"), inputs: names });
            let mut multi = Recipe::levels(&format!("{map}_{tier}_multi_level"), mode, opp, None, n, next_seed());
            multi.opponent = OpponentSource::LevelSet { levels: (0..=MAX_LEVEL).collect() };
            items.push(sample(multi));
            if mode == Mode::Trio {
                let partners = [("stupid", opp - 1), ("expert", opp + 1)];
                let mut names = Vec::new();
                for (kind, lvl) in partners {
                    let name = format!("{map}_{tier}_{kind}_partner");
                    let mut r = Recipe::levels(&name, mode, opp, Some(opp), n, next_seed());
                    r.teammate = Some(TeammateOverride { level: lvl, both_teams: true });
                    items.push(sample(r));
                    names.push(name);
                }
                items.push(SuiteItem::Mix { name: format!("{map}_{tier}_mixed_partner"), inputs: names });
            }
        }
        let mut general = Recipe::levels(&format!("{map}_general"), mode, 1, None, n, next_seed());
        general.opponent = OpponentSource::LevelSet { levels: vec![0, 2, 4] };
        items.push(sample(general));
    }
    for (task, mode) in [("destroy_turret", Mode::SubDestroyTurret), ("gain_gold", Mode::SubGainGold)] {
        let n = scale.subtask_episodes;
        let names = [format!("{task}_medium"), format!("{task}_expert")];
        for (name, lvl) in names.iter().zip([2, 4]) {
            items.push(sample(Recipe::levels(name, mode, lvl, None, n, next_seed())));
        }
        items.push(SuiteItem::Mix { name: format!("{task}_mixed"), inputs: names.to_vec() });
    }
    items
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub path: PathBuf,
    pub header: DatasetHeader,
}

/// Generate every dataset of `suite_plan` into `dir` as `<name>.mmof`.
/// `on_done` is called after each dataset.
pub fn standard_suite(
    dir: &Path,
    seed: u64,
    scale: SuiteScale,
    workers: Option<usize>,
    mut on_done: impl FnMut(&SuiteEntry),
) -> Result<Vec<SuiteEntry>, SamplerError> {
    std::fs::create_dir_all(dir).map_err(|source| DatasetError::Io { path: dir.to_path_buf(), source })?;
    let path_of = |name: &str| dir.join(format!("{name}.mmof"));
    let mut out = Vec::new();
    for item in suite_plan(seed, scale) {
        let path = path_of(item.name());
        let header = match &item {
            SuiteItem::Sample { recipe } => run_recipe(recipe, &path, workers)?,
            SuiteItem::Mix { inputs, .. } => {
                let paths: Vec<PathBuf> = inputs.iter().map(|n| path_of(n)).collect();
                let refs: Vec<&Path> = paths.iter().map(|p| p.as_path()).collect();
                mix_datasets(&refs, &path, seed)?;
                rename_recipe(&path, item.name())?
            }
        };
        let entry = SuiteEntry { name: item.name().to_string(), path, header };
        on_done(&entry);
        out.push(entry);
    }
    Ok(out)
}

/// Rewrite a mixed dataset so that its header names the suite entry.
fn rename_recipe(path: &Path, name: &str) -> Result<DatasetHeader, SamplerError> {
    let (mut header, eps) = read_all(path)?;
    header.recipe = name.to_string();
    header.episode_count = 0;
    Ok(write_dataset(path, header, &eps)?)
}
