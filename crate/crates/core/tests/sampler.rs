use std::collections::BTreeSet;
use std::path::PathBuf;

use mmof::dataset::{file_hash, read_all, validate_dataset};
use mmof::env::Mode;
use mmof::sampler::*;

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn win_rate(r: &Recipe, dir: &tempfile::TempDir) -> f64 {
    let p = dir.path().join(format!("{}.mmof", r.name));
    run_recipe(r, &p, None).unwrap().behavior_win_rate.unwrap()
}

#[test]
fn medium_self_play_is_near_even() {
    let d = tmp();
    let wr = win_rate(&Recipe::levels("medium", Mode::Solo, 2, Some(2), 512, 77), &d);
    assert!((0.45..=0.55).contains(&wr), "{wr}");
}

#[test]
fn stronger_behavior_wins_more() {
    let d = tmp();
    let hi = win_rate(&Recipe::levels("hi", Mode::Solo, 3, Some(1), 128, 5), &d);
    let lo = win_rate(&Recipe::levels("lo", Mode::Solo, 1, Some(3), 128, 5), &d);
    assert!(hi > lo, "{hi} vs {lo}");
}

#[test]
fn output_is_reproducible_and_independent_of_workers() {
    let d = tmp();
    let mut r = Recipe::levels("rep", Mode::Trio, 2, Some(1), 70, 3);
    r.teammate = Some(TeammateOverride { level: 4, both_teams: true });
    let (a, b, c) = (d.path().join("a.mmof"), d.path().join("b.mmof"), d.path().join("c.mmof"));
    run_recipe(&r, &a, Some(1)).unwrap();
    run_recipe(&r, &b, Some(4)).unwrap();
    run_recipe(&r, &c, None).unwrap();
    let h = file_hash(&a).unwrap();
    assert_eq!(h, file_hash(&b).unwrap());
    assert_eq!(h, file_hash(&c).unwrap());
    assert!(validate_dataset(&a).unwrap().is_clean());
}

#[test]
fn episodes_do_not_depend_on_each_other() {
    let d = tmp();
    let full = Recipe::levels("full", Mode::Solo, 1, Some(2), 12, 100);
    let mut tail = full.clone();
    tail.name = "tail".into();
    tail.seed = 104;
    tail.episodes = 8;
    let (pf, pt) = (d.path().join("f.mmof"), d.path().join("t.mmof"));
    run_recipe(&full, &pf, None).unwrap();
    run_recipe(&tail, &pt, None).unwrap();
    let (_, ef) = read_all(&pf).unwrap();
    let (_, et) = read_all(&pt).unwrap();
    // Same seeds and sides as episodes 4.. of `full`.
    assert_eq!(&et[..], &ef[4..]);
    let mut lvl = full.clone();
    lvl.opponent = OpponentSource::LevelSet { levels: vec![0, 4] };
    let pl = d.path().join("l.mmof");
    let pl2 = d.path().join("l2.mmof");
    run_recipe(&lvl, &pl, None).unwrap();
    lvl.episodes = 6;
    run_recipe(&lvl, &pl2, None).unwrap();
    let (_, a) = read_all(&pl).unwrap();
    let (_, b) = read_all(&pl2).unwrap();
    assert_eq!(&a[..6], &b[..]);
}

#[test]
fn header_win_rate_matches_stored_outcomes() {
    let d = tmp();
    let p = d.path().join("w.mmof");
    let h = run_recipe(&Recipe::levels("w", Mode::Trio, 3, Some(2), 40, 8), &p, None).unwrap();
    let (h2, eps) = read_all(&p).unwrap();
    assert_eq!(h, h2);
    assert_eq!(h.recipe, "w");
    assert_eq!(h.episode_count, 40);
    let wr = eps.iter().map(|e| e.meta.outcome_score()).sum::<f64>() / eps.len() as f64;
    assert_eq!(h.behavior_win_rate, Some(wr));
}

#[test]
fn invalid_recipes_are_rejected() {
    let d = tmp();
    let out = d.path().join("x.mmof");
    let bad = [
        Recipe::levels("zero", Mode::Solo, 1, Some(1), 0, 0),
        Recipe::levels("high", Mode::Solo, 5, Some(1), 1, 0),
        Recipe::levels("noopp", Mode::Solo, 1, None, 1, 0),
        Recipe::levels("subopp", Mode::SubGainGold, 1, Some(1), 1, 0),
        Recipe {
            teammate: Some(TeammateOverride { level: 1, both_teams: true }),
            ..Recipe::levels("mate", Mode::Solo, 1, Some(1), 1, 0)
        },
        Recipe {
            opponent: OpponentSource::LevelSet { levels: vec![] },
            ..Recipe::levels("set", Mode::Solo, 1, Some(1), 1, 0)
        },
    ];
    for r in bad {
        assert!(matches!(run_recipe(&r, &out, None), Err(SamplerError::Recipe(_))), "{}", r.name);
    }
    let mut env = mmof::env::EnvConfig::new(Mode::Trio);
    env.max_steps = 50;
    let r = Recipe { env: Some(env), ..Recipe::levels("env", Mode::Solo, 1, Some(1), 1, 0) };
    assert!(matches!(run_recipe(&r, &out, None), Err(SamplerError::EnvMismatch(_))));
    let r = Recipe {
        controlled: PolicySource::Checkpoint { path: PathBuf::from("/nonexistent/ckpt.bin") },
        ..Recipe::levels("ck", Mode::Solo, 1, Some(1), 1, 0)
    };
    assert!(matches!(run_recipe(&r, &out, None), Err(SamplerError::Checkpoint { .. })));
    assert!(!out.exists());
}

#[test]
fn recipes_round_trip_through_json() {
    let mut r = Recipe::levels("j", Mode::Trio, 2, Some(3), 9, 4);
    r.teammate = Some(TeammateOverride { level: 1, both_teams: false });
    let s = serde_json::to_string(&r).unwrap();
    assert_eq!(serde_json::from_str::<Recipe>(&s).unwrap(), r);
    let minimal = r#"{"name":"m","mode":"solo","controlled":{"type":"level","level":2},
        "opponent":{"type":"level_set","levels":[0,2,4]},"episodes":3}"#;
    let m: Recipe = serde_json::from_str(minimal).unwrap();
    assert_eq!(m.seed, 0);
    assert!(m.validate().is_ok());
}

fn expected_names() -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    for map in ["solo", "trio"] {
        for tier in ["norm", "hard"] {
            for kind in ["poor", "medium", "expert", "mixed", "multi_level"] {
                names.insert(format!("{map}_{tier}_{kind}"));
            }
            if map == "trio" {
                for kind in ["stupid", "expert", "mixed"] {
                    names.insert(format!("{map}_{tier}_{kind}_partner"));
                }
            }
        }
        names.insert(format!("{map}_general"));
    }
    for task in ["destroy_turret", "gain_gold"] {
        for kind in ["medium", "expert", "mixed"] {
            names.insert(format!("{task}_{kind}"));
        }
    }
    names
}

#[test]
fn suite_plan_has_documented_names_and_levels() {
    let plan = suite_plan(1, SuiteScale::default());
    let names: Vec<&str> = plan.iter().map(|i| i.name()).collect();
    let set: BTreeSet<String> = names.iter().map(|s| s.to_string()).collect();
    assert_eq!(set.len(), names.len(), "duplicate names");
    assert_eq!(set, expected_names());
    for item in &plan {
        match item {
            SuiteItem::Sample { recipe } => {
                recipe.validate().unwrap();
                let PolicySource::Level { level } = recipe.controlled else { panic!() };
                if recipe.mode.is_subtask() {
                    assert_eq!(recipe.episodes, 64);
                    assert_eq!(level, if recipe.name.ends_with("medium") { 2 } else { 4 });
                    continue;
                }
                assert_eq!(recipe.episodes, 512);
                if let OpponentSource::Level { level: opp } = recipe.opponent {
                    let offset = match recipe.name.rsplit('_').next().unwrap() {
                        "poor" => -1,
                        "medium" | "partner" => 0,
                        "expert" => 1,
                        other => panic!("{other}"),
                    };
                    assert_eq!(level as i32, opp as i32 + offset, "{}", recipe.name);
                    let tier = if recipe.name.contains("_norm_") { 2 } else { 3 };
                    assert_eq!(opp, tier);
                }
            }
            SuiteItem::Mix { name, inputs } => {
                assert!(inputs.len() >= 2);
                let pos = names.iter().position(|n| n == name).unwrap();
                for i in inputs {
                    assert!(names[..pos].contains(&i.as_str()), "{name} mixes {i} before it exists");
                }
            }
        }
    }
}

#[test]
fn small_suite_is_generated_with_mixed_sets() {
    let d = tmp();
    let scale = SuiteScale { main_episodes: 4, subtask_episodes: 3 };
    let mut seen = 0;
    let entries = standard_suite(d.path(), 2, scale, None, |_| seen += 1).unwrap();
    assert_eq!(seen, entries.len());
    let got: BTreeSet<String> = entries.iter().map(|e| e.name.clone()).collect();
    assert_eq!(got, expected_names());
    for e in &entries {
        assert!(e.path.exists());
        assert_eq!(e.header.recipe, e.name);
        let want = if e.name.ends_with("mixed") || e.name.ends_with("mixed_partner") {
            if e.header.mode.is_subtask() {
                6
            } else if e.name.ends_with("partner") {
                8
            } else {
                12
            }
        } else if e.header.mode.is_subtask() {
            3
        } else {
            4
        };
        assert_eq!(e.header.episode_count, want, "{}", e.name);
    }
}
