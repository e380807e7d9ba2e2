use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::format::{decode_episode, DatasetError, DatasetReader};
use super::record::EpisodeRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub recipe: String,
    pub count: u64,
    /// Undiscounted return of each episode, in file order.
    pub returns: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub win_rate: Option<f64>,
}

/// Linear-interpolation quantile of sorted data (the "type 7" rule).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl DatasetStats {
    pub fn from_returns(recipe: &str, returns: Vec<f64>, win_rate: Option<f64>) -> Self {
        let n = returns.len();
        let mean = returns.iter().sum::<f64>() / n.max(1) as f64;
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n.max(1) as f64;
        let mut sorted = returns.clone();
        sorted.sort_by(f64::total_cmp);
        DatasetStats {
            recipe: recipe.to_string(),
            count: n as u64,
            mean,
            std: var.sqrt(),
            min: sorted.first().copied().unwrap_or(f64::NAN),
            q1: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
            max: sorted.last().copied().unwrap_or(f64::NAN),
            returns,
            win_rate,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    /// One summary row; per-episode returns are only in the JSON form.
    pub fn to_csv(&self) -> String {
        let wr = self.win_rate.map(|w| w.to_string()).unwrap_or_default();
        format!(
            "recipe,count,mean,std,min,q1,median,q3,max,win_rate\n{},{},{},{},{},{},{},{},{},{}\n",
            self.recipe, self.count, self.mean, self.std, self.min, self.q1, self.median, self.q3, self.max, wr
        )
    }
}

/// Streaming statistics: one pass, one episode in memory at a time.
pub fn dataset_stats(path: &Path) -> Result<DatasetStats, DatasetError> {
    let mut r = DatasetReader::open(path)?;
    let header = r.header().clone();
    let mut returns = Vec::with_capacity(header.episode_count as usize);
    let mut outcome = 0.0;
    while let Some(ep) = r.next_episode()? {
        returns.push(ep.episode_return());
        outcome += ep.meta.outcome_score();
    }
    let win_rate = (header.mode.has_enemy_heroes() && !returns.is_empty()).then(|| outcome / returns.len() as f64);
    Ok(DatasetStats::from_returns(&header.recipe, returns, win_rate))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub episode: u64,
    pub frame: usize,
    pub hero: usize,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub episodes: u64,
    pub frames: u64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_episode(ep: &EpisodeRecord, episode: u64, max_steps: u32, table: &[Vec<bool>]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |frame: usize, hero: usize, detail: String| out.push(Violation { episode, frame, hero, detail });
    if ep.meta.length as usize != ep.frames.len() {
        flag(0, 0, format!("length {} but {} frames", ep.meta.length, ep.frames.len()));
    }
    if ep.frames.len() > max_steps as usize {
        flag(0, 0, format!("{} frames exceed max_steps {max_steps}", ep.frames.len()));
    }
    if !ep.frames.last().is_some_and(|f| f.done) {
        flag(ep.frames.len().saturating_sub(1), 0, "last frame is not done".into());
    }
    for (t, f) in ep.frames.iter().enumerate() {
        if f.done && t + 1 != ep.frames.len() {
            flag(t, 0, "done before the last frame".into());
        }
        for (h, s) in f.heroes.iter().enumerate() {
            if !s.admits_action() {
                flag(t, h, format!("action {:?} violates its mask", s.action));
            }
            let button = s.action.first().copied().unwrap_or(0) as usize;
            if table.get(button).is_some_and(|row| row != &s.active) {
                flag(t, h, "active row does not match the sub-action table".into());
            }
        }
    }
    out
}

/// Full scan: every stored action against its stored mask, plus structural
/// episode invariants. Episodes are decoded and checked in parallel chunks.
pub fn validate_dataset(path: &Path) -> Result<ValidationReport, DatasetError> {
    const CHUNK: usize = 64;
    let mut r = DatasetReader::open(path)?;
    let header = r.header().clone();
    let table = header.action_spec.sub_action_table();
    let max_steps = header.env_config.max_steps;
    let mut report = ValidationReport::default();
    loop {
        let first = report.episodes;
        let mut blocks = Vec::with_capacity(CHUNK);
        for _ in 0..CHUNK {
            match r.next_raw()? {
                Some(b) => blocks.push(b),
                None => break,
            }
        }
        if blocks.is_empty() {
            break;
        }
        let results: Vec<Result<(usize, Vec<Violation>), DatasetError>> = blocks
            .par_iter()
            .enumerate()
            .map(|(i, b)| {
                let idx = first + i as u64;
                let ep = decode_episode(&header, b, idx)?;
                Ok((ep.frames.len(), check_episode(&ep, idx, max_steps, &table)))
            })
            .collect();
        for res in results {
            let (frames, v) = res?;
            report.episodes += 1;
            report.frames += frames as u64;
            report.violations.extend(v);
        }
    }
    Ok(report)
}
