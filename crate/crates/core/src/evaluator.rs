//! Win-rate and sub-task evaluation against the scripted ladder, and
//! aggregation of multi-seed results into benchmark tables.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{subtask_score, EnvConfig, EnvError, Mode, SubtaskCalibration, Team};
use crate::ladder::make_level;
use crate::rollout::{run_episode, EpisodeSpec, TeamPolicy};
use crate::sampler::{PolicySource, SamplerError};

/// Evaluation episodes per checkpoint.
pub const DEFAULT_EVAL_EPISODES: u32 = 150;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation request: {0}")]
    Config(String),
    #[error(transparent)]
    Policy(#[from] SamplerError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinRateReport {
    pub policy: String,
    pub opponent_level: u8,
    pub episodes: u32,
    pub seed: u64,
    pub wins: u32,
    pub losses: u32,
    pub draws: u32,
    /// Wins plus half the draws, over all episodes.
    pub win_rate: f64,
    pub win_fraction: f64,
    pub loss_fraction: f64,
    pub draw_fraction: f64,
    /// Zero-sum return of the evaluated team.
    pub mean_return: f64,
    pub std_return: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtaskReport {
    pub policy: String,
    pub mode: Mode,
    pub episodes: u32,
    pub seed: u64,
    pub calibration: SubtaskCalibration,
    /// Raw outcome: frames for Destroy Turret, gold for Gain Gold.
    pub mean_outcome: f64,
    pub mean_score: f64,
    pub std_score: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Play `policy` against ladder level `opponent_level` for `episodes` games
/// with seeds `seed..seed+episodes`, alternating sides as in duels.
pub fn evaluate_winrate(
    config: &EnvConfig,
    policy: &dyn TeamPolicy,
    opponent_level: u8,
    episodes: u32,
    seed: u64,
) -> Result<WinRateReport, EvalError> {
    if episodes == 0 {
        return Err(EvalError::Config("episodes must be at least 1".into()));
    }
    if !config.mode.has_enemy_heroes() {
        return Err(EvalError::Config(format!("{} has no opponent; use a sub-task evaluation", config.mode.name())));
    }
    let opponent = make_level(opponent_level).map_err(|e| EvalError::Config(e.to_string()))?;
    let runs: Vec<Result<(f64, f64), EnvError>> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let rec = run_episode(&EpisodeSpec {
                config,
                seed: seed.wrapping_add(i as u64),
                controlled: policy,
                opponent: Some(&opponent),
                controlled_team: if i % 2 == 0 { Team::A } else { Team::B },
                record: true,
            })?;
            Ok((rec.meta.outcome_score(), rec.episode_return()))
        })
        .collect();
    let (mut wins, mut losses, mut draws) = (0u32, 0u32, 0u32);
    let mut returns = Vec::with_capacity(episodes as usize);
    for r in runs {
        let (outcome, ret) = r?;
        if outcome == 1.0 {
            wins += 1;
        } else if outcome == 0.0 {
            losses += 1;
        } else {
            draws += 1;
        }
        returns.push(ret);
    }
    let n = episodes as f64;
    let (mean_return, std_return) = mean_std(&returns);
    Ok(WinRateReport {
        policy: policy.label(),
        opponent_level,
        episodes,
        seed,
        wins,
        losses,
        draws,
        win_rate: (wins as f64 + 0.5 * draws as f64) / n,
        win_fraction: wins as f64 / n,
        loss_fraction: losses as f64 / n,
        draw_fraction: draws as f64 / n,
        mean_return,
        std_return,
    })
}

/// Normalized sub-task score of `policy`. `calibration` defaults to the
/// config's endpoints.
pub fn evaluate_subtask(
    config: &EnvConfig,
    policy: &dyn TeamPolicy,
    episodes: u32,
    seed: u64,
    calibration: Option<SubtaskCalibration>,
) -> Result<SubtaskReport, EvalError> {
    if episodes == 0 {
        return Err(EvalError::Config("episodes must be at least 1".into()));
    }
    let mode = config.mode;
    if !mode.is_subtask() {
        return Err(EvalError::Config(format!("{} is not a sub-task mode", mode.name())));
    }
    let cal = calibration
        .or(config.subtask_calibration)
        .ok_or_else(|| EvalError::Config("no sub-task calibration configured".into()))?;
    let outcomes: Vec<Result<f64, EnvError>> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let rec = run_episode(&EpisodeSpec {
                config,
                seed: seed.wrapping_add(i as u64),
                controlled: policy,
                opponent: None,
                controlled_team: Team::A,
                record: false,
            })?;
            Ok(rec.meta.subtask.expect("sub-task episodes report an outcome").value())
        })
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<f64>, _>>()?;
    let scores = outcomes.iter().map(|&o| subtask_score(mode, o, cal)).collect::<Result<Vec<f64>, _>>()?;
    let (mean_score, std_score) = mean_std(&scores);
    Ok(SubtaskReport {
        policy: policy.label(),
        mode,
        episodes,
        seed,
        calibration: cal,
        mean_outcome: mean_std(&outcomes).0,
        mean_score,
        std_score,
    })
}

/// What an evaluation run measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EvalTarget {
    WinRate { opponent_level: u8 },
    Subtask,
}

/// One trained run to evaluate: a cell of the benchmark table plus its seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub factor: String,
    pub dataset: String,
    pub algorithm: String,
    pub seed: u64,
    pub policy: PolicySource,
    pub target: EvalTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub mode: Mode,
    #[serde(default)]
    pub env: Option<EnvConfig>,
    #[serde(default = "default_episodes")]
    pub episodes: u32,
    #[serde(default)]
    pub eval_seed: u64,
    pub runs: Vec<BenchmarkRun>,
}

fn default_episodes() -> u32 {
    DEFAULT_EVAL_EPISODES
}

/// A single evaluated value of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub factor: String,
    pub dataset: String,
    pub algorithm: String,
    pub seed: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub factor: String,
    pub dataset: String,
    pub algorithm: String,
    pub seed_count: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub runs: Vec<RunResult>,
}

impl BenchmarkReport {
    /// Group runs by (factor, dataset, algorithm), sorted by key.
    pub fn aggregate(runs: Vec<RunResult>) -> Self {
        let mut cells: BTreeMap<(&str, &str, &str), Vec<f64>> = BTreeMap::new();
        for r in &runs {
            cells.entry((&r.factor, &r.dataset, &r.algorithm)).or_default().push(r.value);
        }
        let rows = cells
            .into_iter()
            .map(|((factor, dataset, algorithm), vals)| {
                let (mean, std) = mean_std(&vals);
                BenchmarkRow {
                    factor: factor.into(),
                    dataset: dataset.into(),
                    algorithm: algorithm.into(),
                    seed_count: vals.len(),
                    mean,
                    std,
                }
            })
            .collect();
        BenchmarkReport { rows, runs }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("factor,dataset,algorithm,seed_count,mean,std\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{},{}\n", r.factor, r.dataset, r.algorithm, r.seed_count, r.mean, r.std));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Evaluate every run of `manifest` (win rate or normalized score) and
/// aggregate over seeds. Checkpoints are only read.
pub fn benchmark_report(manifest: &BenchmarkManifest) -> Result<BenchmarkReport, EvalError> {
    let config = manifest.env.clone().unwrap_or_else(|| EnvConfig::new(manifest.mode));
    if config.mode != manifest.mode {
        return Err(EvalError::Config("manifest mode and env config mode differ".into()));
    }
    config.validate()?;
    let mut results = Vec::with_capacity(manifest.runs.len());
    for run in &manifest.runs {
        let policy = run.policy.load(manifest.mode)?;
        let value = match run.target {
            EvalTarget::WinRate { opponent_level } => {
                evaluate_winrate(&config, &*policy, opponent_level, manifest.episodes, manifest.eval_seed)?.win_rate
            }
            EvalTarget::Subtask => {
                evaluate_subtask(&config, &*policy, manifest.episodes, manifest.eval_seed, None)?.mean_score
            }
        };
        results.push(RunResult {
            factor: run.factor.clone(),
            dataset: run.dataset.clone(),
            algorithm: run.algorithm.clone(),
            seed: run.seed,
            value,
        });
    }
    Ok(BenchmarkReport::aggregate(results))
}

/// Load a checkpoint for evaluation in `mode`.
pub fn load_policy(path: impl Into<PathBuf>, mode: Mode) -> Result<std::sync::Arc<dyn TeamPolicy>, EvalError> {
    Ok(PolicySource::Checkpoint { path: path.into() }.load(mode)?)
}
