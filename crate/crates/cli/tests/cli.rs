use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mmof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmof")).args(args).env_remove("MMOF_WORKERS").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let o = mmof(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sha(p: &Path) -> String {
    mmof::dataset::file_hash(p).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn recipe(dir: &Path, name: &str, level: u8, seed: u64) -> PathBuf {
    let p = dir.join(format!("{name}.json"));
    let json = format!(
        r#"{{"name":"{name}","mode":"solo","controlled":{{"type":"level","level":{level}}},
            "opponent":{{"type":"level","level":2}},"episodes":12,"seed":{seed}}}"#
    );
    std::fs::write(&p, json).unwrap();
    p
}

fn sampled(dir: &Path, name: &str, level: u8, seed: u64) -> PathBuf {
    let out = dir.join(format!("{name}.mmof"));
    ok(&["sample", "--recipe", s(&recipe(dir, name, level, seed)), "--out", s(&out), "-q"]);
    out
}

#[test]
fn help_lists_every_flag_and_exits_zero() {
    let o = ok(&["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in ["sample", "train", "eval", "ladder", "dataset"] {
        assert!(text.contains(cmd), "{cmd}");
    }
    let o = ok(&["train", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in ["--algo", "--dataset", "--seed", "--out", "--steps", "--config", "--set", "--workers"] {
        assert!(text.contains(flag), "{flag}");
    }
    for sub in [&["eval", "--help"][..], &["dataset", "mix", "--help"], &["sample", "--help"], &["ladder", "--help"]] {
        ok(sub);
    }
}

#[test]
fn usage_errors_are_single_line_with_exit_two() {
    let o = mmof(&["eval", "--bogus"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[usage]: "));
    let o = mmof(&["train", "--dataset", "x.mmof"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--algo"));
}

#[test]
fn missing_checkpoint_leaves_no_output() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("eval.json");
    let o = mmof(&["eval", "--ckpt", "missing.bin", "--opponent", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).starts_with("error[missing_file]: "));
    assert_eq!(std::fs::read_dir(d.path()).unwrap().count(), 0);
}

#[test]
fn error_categories_have_distinct_codes() {
    let d = tempfile::tempdir().unwrap();
    let junk = d.path().join("junk.mmof");
    std::fs::write(&junk, b"not a dataset at all").unwrap();
    let o = mmof(&["dataset", "stats", s(&junk)]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[schema_mismatch]"));

    let ds = sampled(d.path(), "a", 2, 1);
    let o = mmof(&["train", "--algo", "maicq", "--dataset", s(&ds), "--out", s(&d.path().join("ck")), "--steps", "5"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(!d.path().join("ck").exists());

    let o = mmof(&["train", "--algo", "nope", "--dataset", s(&ds), "--out", s(&d.path().join("ck"))]);
    assert_eq!(code(&o), 5);
    let o =
        mmof(&["train", "--algo", "bc", "--dataset", s(&ds), "--out", s(&d.path().join("ck")), "--set", "not_a_key=1"]);
    assert_eq!(code(&o), 5);
    let o = mmof(&["eval", "--level", "2", "--mode", "solo", "--opponent", "9", "--out", s(&d.path().join("e.json"))]);
    assert_eq!(code(&o), 5);
}

#[test]
fn train_eval_pipeline_is_idempotent() {
    let d = tempfile::tempdir().unwrap();
    let ds = sampled(d.path(), "norm_expert", 3, 4);
    let again = d.path().join("again.mmof");
    ok(&["sample", "--recipe", s(&d.path().join("norm_expert.json")), "--out", s(&again), "-q"]);
    assert_eq!(sha(&ds), sha(&again));
    assert!(Path::new(&format!("{}.manifest.json", ds.display())).exists());

    let run = |tag: &str| {
        let ck = d.path().join(format!("ck_{tag}"));
        ok(&[
            "train",
            "--algo",
            "qmix_cql",
            "--dataset",
            s(&ds),
            "--seed",
            "1",
            "--steps",
            "40",
            "--out",
            s(&ck),
            "-q",
        ]);
        let ev = d.path().join(format!("eval_{tag}.json"));
        ok(&[
            "eval",
            "--ckpt",
            s(&ck.join("model.ckpt")),
            "--opponent",
            "2",
            "--episodes",
            "10",
            "--seed",
            "3",
            "--out",
            s(&ev),
            "-q",
        ]);
        (ck, ev)
    };
    let (c1, e1) = run("a");
    let (c2, e2) = run("b");
    for f in ["model.ckpt", "losses.csv"] {
        assert!(c1.join(f).exists());
        assert_eq!(sha(&c1.join(f)), sha(&c2.join(f)), "{f}");
    }
    assert!(c1.join("manifest.json").exists());
    assert_eq!(std::fs::read_to_string(&e1).unwrap(), std::fs::read_to_string(&e2).unwrap());
    let csv = std::fs::read_to_string(c1.join("losses.csv")).unwrap();
    assert!(csv.starts_with("step,loss_name,value\n"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&e1).unwrap()).unwrap();
    assert_eq!(report["episodes"], 10);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let d = tempfile::tempdir().unwrap();
    let ds = sampled(d.path(), "cfg", 2, 2);
    let cfg = d.path().join("train.json");
    let text = format!(
        r#"{{"algo":"bc","dataset":"{}","steps":7,"seed":3,"hyperparameters":{{"batch_size":16,"log_every":1}}}}"#,
        s(&ds)
    );
    std::fs::write(&cfg, text).unwrap();
    let out = d.path().join("ck");
    ok(&["train", "--config", s(&cfg), "--steps", "5", "--out", s(&out), "-q"]);
    let csv = std::fs::read_to_string(out.join("losses.csv")).unwrap();
    assert_eq!(csv.lines().last().unwrap().split(',').next().unwrap(), "5");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["algo_config"]["batch_size"], 16);
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);

    std::fs::write(&cfg, r#"{"algo":"bc","unknown_option":1}"#).unwrap();
    let o = mmof(&["train", "--config", s(&cfg), "--dataset", s(&ds), "--out", s(&out)]);
    assert_eq!(code(&o), 5);
}

#[test]
fn dataset_mix_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let a = sampled(d.path(), "a", 1, 10);
    let b = sampled(d.path(), "b", 2, 20);
    let c = sampled(d.path(), "c", 3, 30);
    let (m1, m2) = (d.path().join("m1.mmof"), d.path().join("m2.mmof"));
    ok(&["dataset", "mix", s(&a), s(&b), s(&c), "--out", s(&m1), "--seed", "9", "-q"]);
    ok(&["dataset", "mix", s(&a), s(&b), s(&c), "--out", s(&m2), "--seed", "9", "-q"]);
    assert_eq!(sha(&m1), sha(&m2));
    ok(&["dataset", "validate", s(&m1), "-q"]);
    let stats = d.path().join("stats.json");
    ok(&["dataset", "stats", s(&m1), "--out", s(&stats), "-q"]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(v["count"], 36);
}

#[test]
fn workers_do_not_change_outputs() {
    let d = tempfile::tempdir().unwrap();
    let r = recipe(d.path(), "w", 2, 6);
    let (a, b) = (d.path().join("a.mmof"), d.path().join("b.mmof"));
    ok(&["sample", "--recipe", s(&r), "--out", s(&a), "--workers", "1", "-q"]);
    let o = Command::new(env!("CARGO_BIN_EXE_mmof"))
        .args(["sample", "--recipe", s(&r), "--out", s(&b), "-q"])
        .env("MMOF_WORKERS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(sha(&a), sha(&b));
}

#[test]
fn ladder_and_level_eval_write_reports() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("ladder");
    ok(&["ladder", "--episodes", "4", "--seed", "1", "--out", s(&out), "-q"]);
    let csv = std::fs::read_to_string(out.join("ladder.csv")).unwrap();
    assert_eq!(csv.lines().count(), 26);
    assert!(out.join("ladder.json").exists() && out.join("manifest.json").exists());

    let nested = d.path().join("deep/er/m.mmof");
    let r = recipe(d.path(), "n", 1, 3);
    ok(&["sample", "--recipe", s(&r), "--out", s(&nested), "-q"]);
    assert!(nested.exists());

    let ev = d.path().join("sub.json");
    ok(&["eval", "--level", "4", "--mode", "sub_gain_gold", "--episodes", "8", "--out", s(&ev), "-q"]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ev).unwrap()).unwrap();
    assert!(v["mean_score"].as_f64().unwrap() > 0.5);
}
