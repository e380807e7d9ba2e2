use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::Value;

use mmof::algos::{
    save_checkpoint, train as train_algo, write_loss_csv, AlgoConfig, AlgoId, CheckpointMeta, TrainedPolicy,
};
use mmof::dataset::{dataset_stats, file_hash, mix_datasets, read_all, validate_dataset, TransitionBuffer};
use mmof::env::{EnvConfig, Mode};
use mmof::evaluator::{benchmark_report, evaluate_subtask, evaluate_winrate, BenchmarkManifest, DEFAULT_EVAL_EPISODES};
use mmof::ladder::{ladder_report, GOLDEN_SEED};
use mmof::rollout::TeamPolicy;
use mmof::sampler::{run_recipe, standard_suite, PolicySource, Recipe, SuiteScale};

use crate::config::{layered, overlay, parse_sets, read_as};
use crate::error::{Category, CliError};
use crate::manifest::{beside, ensure_parent, write_file, Manifest};
use crate::{progress, EvalArgs, LadderArgs, MixArgs, SampleArgs, StatsArgs, TrainArgs, ValidateArgs};

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::new(Category::Usage, format!("missing required option --{flag}")))
}

fn parse_mode(s: &str) -> Result<Mode, CliError> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| {
        CliError::config(format!("unknown mode `{s}` (expected solo, trio, sub_destroy_turret or sub_gain_gold)"))
    })
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::new(Category::MissingFile, format!("{}: no such file", path.display())))
    }
}

pub fn sample(flags: SampleArgs) -> Result<(), CliError> {
    let a = layered(&flags, flags.config.as_deref())?;
    let out = required(a.out.clone(), "out")?;
    if a.suite {
        let default = SuiteScale::default();
        let scale = SuiteScale {
            main_episodes: a.main_episodes.unwrap_or(default.main_episodes),
            subtask_episodes: a.subtask_episodes.unwrap_or(default.subtask_episodes),
        };
        let seed = a.seed.unwrap_or(0);
        let entries = standard_suite(&out, seed, scale, None, |e| {
            progress(format!("{}: {} episodes", e.name, e.header.episode_count));
        })?;
        let index = serde_json::to_string_pretty(&entries).expect("suite serializes") + "\n";
        let index_path = out.join("suite.json");
        write_file(&index_path, index.as_bytes())?;
        let mut m = Manifest::new("sample", &a, Some(seed));
        for e in &entries {
            m.output(&e.path)?;
        }
        m.output(&index_path)?;
        return m.write(&out.join("manifest.json"));
    }
    let recipe_path = required(a.recipe.clone(), "recipe")?;
    let mut recipe: Recipe = read_as(&recipe_path)?;
    if let Some(n) = &a.name {
        recipe.name = n.clone();
    }
    if let Some(n) = a.episodes {
        recipe.episodes = n;
    }
    if let Some(s) = a.seed {
        recipe.seed = s;
    }
    progress(format!("sampling {} ({} episodes, {})", recipe.name, recipe.episodes, recipe.mode.name()));
    ensure_parent(&out)?;
    let header = run_recipe(&recipe, &out, None)?;
    if let Some(wr) = header.behavior_win_rate {
        progress(format!("behavior win rate {wr:.4}"));
    }
    let mut m = Manifest::new("sample", &serde_json::json!({ "args": a, "recipe": recipe }), Some(recipe.seed));
    m.input(&recipe_path)?;
    m.output(&out)?;
    m.write(&beside(&out))
}

/// Algorithm config: mode defaults, then the config file's hyperparameters,
/// then `--set`, then the dedicated flags.
fn algo_config(a: &TrainArgs, algo: AlgoId, mode: Mode) -> Result<AlgoConfig, CliError> {
    let mut v = serde_json::to_value(AlgoConfig::for_mode(algo, mode)).expect("config serializes");
    overlay(&mut v, &a.hyperparameters, "hyperparameter")?;
    overlay(&mut v, &parse_sets(&a.set)?, "hyperparameter")?;
    let mut flags = serde_json::Map::new();
    let mut put = |k: &str, x: Option<Value>| {
        if let Some(x) = x {
            flags.insert(k.to_string(), x);
        }
    };
    put("seed", a.seed.map(Value::from));
    put("max_steps", a.steps.map(Value::from));
    put("batch_size", a.batch_size.map(Value::from));
    put("lr", a.lr.map(|x| Value::from(x as f64)));
    put("hidden", a.hidden.map(Value::from));
    put("log_every", a.log_every.map(Value::from));
    put("algo", Some(Value::String(algo.name().into())));
    overlay(&mut v, &flags, "hyperparameter")?;
    let cfg: AlgoConfig = serde_json::from_value(v).map_err(|e| CliError::config(format!("hyperparameters: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(flags: TrainArgs) -> Result<(), CliError> {
    let a = layered(&flags, flags.config.as_deref())?;
    let algo = AlgoId::from_str(&required(a.algo.clone(), "algo")?)?;
    let dataset = required(a.dataset.clone(), "dataset")?;
    let out = required(a.out.clone(), "out")?;
    require_file(&dataset)?;
    let (header, episodes) = read_all(&dataset)?;
    let cfg = algo_config(&a, algo, header.mode)?;
    let buffer = TransitionBuffer::from_episodes(&header, &episodes);
    drop(episodes);
    progress(format!(
        "training {} on {} ({} transitions, {} steps)",
        algo.name(),
        dataset.display(),
        buffer.len(),
        cfg.max_steps
    ));
    let every = (cfg.max_steps / 20).max(1);
    let (learner, log) = train_algo(&buffer, &cfg, |step, losses| {
        if step % every == 0 {
            let parts: Vec<String> = losses.iter().map(|(k, v)| format!("{k}={v:.5}")).collect();
            progress(format!("step {step}/{}: {}", cfg.max_steps, parts.join(" ")));
        }
    })?;

    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let ckpt = out.join("model.ckpt");
    let meta = CheckpointMeta::for_learner(&learner, Some(header.mode), Some(file_hash(&dataset)?));
    let tmp = out.join("model.ckpt.tmp");
    save_checkpoint(&tmp, &meta, &learner.nets.online)?;
    std::fs::rename(&tmp, &ckpt).map_err(|e| CliError::io(&ckpt, e))?;
    let mut csv = Vec::new();
    write_loss_csv(&log, &mut csv).expect("in-memory write");
    let losses = out.join("losses.csv");
    write_file(&losses, &csv)?;

    let mut m = Manifest::new("train", &serde_json::json!({ "args": a, "algo_config": cfg }), Some(cfg.seed));
    m.input(&dataset)?;
    m.output(&ckpt)?;
    m.output(&losses)?;
    m.write(&out.join("manifest.json"))?;
    progress(format!("wrote {}", ckpt.display()));
    Ok(())
}

pub fn eval(flags: EvalArgs) -> Result<(), CliError> {
    let a = layered(&flags, flags.config.as_deref())?;
    let out = required(a.out.clone(), "out")?;
    if let Some(bench) = &a.benchmark {
        let manifest: BenchmarkManifest = read_as(bench)?;
        progress(format!("benchmark: {} runs", manifest.runs.len()));
        let report = benchmark_report(&manifest)?;
        let (csv, json) = (out.join("benchmark.csv"), out.join("benchmark.json"));
        write_file(&csv, report.to_csv().as_bytes())?;
        write_file(&json, (report.to_json() + "\n").as_bytes())?;
        let mut m = Manifest::new("eval", &a, Some(manifest.eval_seed));
        m.input(bench)?;
        m.output(&csv)?;
        m.output(&json)?;
        return m.write(&out.join("manifest.json"));
    }

    let mode_flag = a.mode.as_deref().map(parse_mode).transpose()?;
    let (policy, mode): (Box<dyn TeamPolicy>, Mode) = match (&a.ckpt, a.level) {
        (Some(_), Some(_)) => return Err(CliError::new(Category::Usage, "give either --ckpt or --level, not both")),
        (None, None) => return Err(CliError::new(Category::Usage, "missing required option --ckpt (or --level)")),
        (Some(path), None) => {
            require_file(path)?;
            let (mut pol, meta) = TrainedPolicy::load(path)?;
            let mode =
                mode_flag.or(meta.mode).ok_or_else(|| CliError::config("checkpoint records no mode; pass --mode"))?;
            // Shape check shared with sampling and benchmarks.
            PolicySource::Checkpoint { path: path.clone() }.load(mode)?;
            if a.stochastic {
                pol = pol.stochastic();
            }
            (Box::new(pol), mode)
        }
        (None, Some(level)) => {
            let mode = required(mode_flag, "mode")?;
            (Box::new(mmof::ladder::make_level(level)?), mode)
        }
    };
    let config = EnvConfig::new(mode);
    let episodes = a.episodes.unwrap_or(DEFAULT_EVAL_EPISODES);
    let seed = a.seed.unwrap_or(0);
    let report = if mode.is_subtask() {
        if a.opponent.is_some() {
            return Err(CliError::config(format!("{} has no opponent; drop --opponent", mode.name())));
        }
        let r = evaluate_subtask(&config, &*policy, episodes, seed, None)?;
        progress(format!("{}: score {:.4} ± {:.4}", r.policy, r.mean_score, r.std_score));
        serde_json::to_value(r).expect("report serializes")
    } else {
        let opponent = required(a.opponent, "opponent")?;
        let r = evaluate_winrate(&config, &*policy, opponent, episodes, seed)?;
        progress(format!("{} vs L{opponent}: win rate {:.4}", r.policy, r.win_rate));
        serde_json::to_value(r).expect("report serializes")
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_file(&out, json.as_bytes())?;
    let mut m = Manifest::new("eval", &a, Some(seed));
    if let Some(ck) = &a.ckpt {
        m.input(ck)?;
    }
    m.output(&out)?;
    m.write(&beside(&out))
}

pub fn ladder(flags: LadderArgs) -> Result<(), CliError> {
    let a = layered(&flags, flags.config.as_deref())?;
    let out = required(a.out.clone(), "out")?;
    let mode = parse_mode(a.mode.as_deref().unwrap_or("solo"))?;
    let episodes = a.episodes.unwrap_or(300);
    let seed = a.seed.unwrap_or(GOLDEN_SEED);
    progress(format!("ladder on {} ({episodes} episodes per pair)", mode.name()));
    let report = ladder_report(&EnvConfig::new(mode), episodes, seed)?;
    for (i, row) in report.win_rate.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|w| format!("{w:.3}")).collect();
        progress(format!("L{i}: {}", cells.join(" ")));
    }
    let (csv, json) = (out.join("ladder.csv"), out.join("ladder.json"));
    write_file(&csv, report.to_csv().as_bytes())?;
    write_file(&json, (report.to_json() + "\n").as_bytes())?;
    let mut m = Manifest::new("ladder", &a, Some(seed));
    m.output(&csv)?;
    m.output(&json)?;
    m.write(&out.join("manifest.json"))
}

pub fn stats(flags: StatsArgs) -> Result<(), CliError> {
    let a = layered(&flags, flags.config.as_deref())?;
    let path = required(a.path.clone(), "path")?;
    let s = dataset_stats(&path)?;
    let wr = s.win_rate.map_or("n/a".to_string(), |w| format!("{w:.4}"));
    progress(format!(
        "{}: {} episodes, return mean {:.4} std {:.4} median {:.4}, win rate {wr}",
        s.recipe, s.count, s.mean, s.std, s.median
    ));
    if let Some(out) = &a.out {
        let body = if out.extension().is_some_and(|e| e == "csv") { s.to_csv() } else { s.to_json() + "\n" };
        write_file(out, body.as_bytes())?;
        let mut m = Manifest::new("dataset stats", &a, None);
        m.input(&path)?;
        m.output(out)?;
        m.write(&beside(out))?;
    }
    Ok(())
}

pub fn validate(flags: ValidateArgs) -> Result<(), CliError> {
    let a = layered(&flags, flags.config.as_deref())?;
    let path = required(a.path.clone(), "path")?;
    let r = validate_dataset(&path)?;
    progress(format!(
        "{}: {} episodes, {} frames, {} violations",
        path.display(),
        r.episodes,
        r.frames,
        r.violations.len()
    ));
    for v in r.violations.iter().take(10) {
        progress(format!("  episode {} frame {} hero {}: {}", v.episode, v.frame, v.hero, v.detail));
    }
    if let Some(out) = &a.out {
        write_file(out, (serde_json::to_string_pretty(&r).expect("report serializes") + "\n").as_bytes())?;
    }
    if r.is_clean() {
        Ok(())
    } else {
        Err(CliError::new(Category::ValidationFailed, format!("{}: {} violations", path.display(), r.violations.len())))
    }
}

pub fn mix(flags: MixArgs) -> Result<(), CliError> {
    let a = layered(&flags, flags.config.as_deref())?;
    let out = required(a.out.clone(), "out")?;
    if a.inputs.len() < 2 {
        return Err(CliError::new(Category::Usage, "mix needs at least two input datasets"));
    }
    for p in &a.inputs {
        require_file(p)?;
    }
    let seed = a.seed.unwrap_or(0);
    let refs: Vec<&Path> = a.inputs.iter().map(PathBuf::as_path).collect();
    ensure_parent(&out)?;
    let h = mix_datasets(&refs, &out, seed)?;
    progress(format!("{}: {} episodes from {} inputs", out.display(), h.episode_count, refs.len()));
    let mut m = Manifest::new("dataset mix", &a, Some(seed));
    for p in &a.inputs {
        m.input(p)?;
    }
    m.output(&out)?;
    m.write(&beside(&out))
}
