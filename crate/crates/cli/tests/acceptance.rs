//! Acceptance run: every criterion at its stated scale and tolerance, one
//! PASS/FAIL line each. Exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use mmof::algos::losses::{advantage_weights, bc_loss, chosen_mean, mean, weighted_ce};
use mmof::algos::{train, AlgoConfig, AlgoId, Learner, Overrides, TrainedPolicy};
use mmof::dataset::{file_hash, mix_datasets, read_all, validate_dataset, AgentStep, Batch, TransitionBuffer};
use mmof::env::{subtask_score, ActionSpec, EnvConfig, Environment, Mode, StructuredAction, SubtaskCalibration, Team};
use mmof::evaluator::{evaluate_winrate, mean_std};
use mmof::ladder::{duel, make_level, random_legal, GOLDEN_SEED, MAX_LEVEL};
use mmof::nn::{expectile_loss, masked_cross_entropy, zeros_like, Mixer, Mlp, Params};
use mmof::rollout::{run_episode, EpisodeSpec, HeroCtx, TeamPolicy};
use mmof::sampler::{run_recipe, standard_suite, suite_plan, Recipe, SuiteItem, SuiteScale};
use mmof::seed::rng_for;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("sub-task score formulas", formulas),
        ("zero-sum invariant", zero_sum),
        ("ladder monotonicity", ladder),
        ("mask soundness", masks),
        ("conservatism oracle", conservatism),
        ("mixer monotonicity", mixers),
        ("expectile and gradient oracles", oracles),
        ("reduction identities", reductions),
        ("trend reproduction", trend),
        ("mixed composition", composition),
        ("end-to-end determinism", determinism),
    ];
    // failures are reported on the criterion's line
    std::panic::set_hook(Box::new(|_| {}));
    let only: Option<usize> = std::env::var("MMOF_ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS {:>2} {name} [{secs:.1}s]: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{secs:.1}s]: {d}", i + 1)
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn formulas() -> Outcome {
    let dt = SubtaskCalibration::REFERENCE_DESTROY_TURRET;
    let gg = SubtaskCalibration::REFERENCE_GAIN_GOLD;
    let score = |m, x, c| subtask_score(m, x, c).unwrap();
    let cases = [
        (score(Mode::SubDestroyTurret, 2880.0, dt), 0.0),
        (score(Mode::SubDestroyTurret, 1812.0, dt), 1.0),
        (score(Mode::SubGainGold, 5000.0, gg), 0.0),
        (score(Mode::SubGainGold, 12000.0, gg), 1.0),
        (score(Mode::SubGainGold, 12271.0, gg), 7271.0 / 7000.0),
    ];
    let worst = cases.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let over = cases[4].0;
    let rounded = (over * 1e4).round() / 1e4;
    check(
        worst <= 1e-9 && rounded == 1.0387,
        format!("max |err| {worst:.1e}, 12271 gold -> {over:.6} (4 dp {rounded})"),
    )
}

fn zero_sum() -> Outcome {
    let cfg = EnvConfig::new(Mode::Trio);
    let worst = (0..100u64)
        .into_par_iter()
        .map(|ep| {
            let mut env = Environment::new(cfg.clone()).unwrap();
            let mut res = env.reset(ep);
            let mut rng = rng_for(ep, &[0xACCE]);
            let mut worst = 0.0f64;
            while !res.done {
                let acts: Vec<StructuredAction> =
                    res.masks.iter().map(|m| random_legal(env.action_spec(), m, &mut rng)).collect();
                res = env.step(&acts).unwrap();
                worst = worst.max(res.rewards.iter().map(|r| r.zero_sum).sum::<f64>().abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    check(worst <= 1e-9, format!("100 episodes, max |sum| {worst:.1e}"))
}

fn ladder() -> Outcome {
    let cfg = EnvConfig::new(Mode::Solo);
    let lv = |k| make_level(k).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for k in 0..MAX_LEVEL {
        let wr = duel(&cfg, &lv(k + 1), &lv(k), 300, GOLDEN_SEED).unwrap().win_rate();
        ok &= wr >= 0.65;
        parts.push(format!("L{}>L{k} {wr:.3}", k + 1));
    }
    let wr = duel(&cfg, &lv(4), &lv(0), 300, GOLDEN_SEED).unwrap().win_rate();
    ok &= wr >= 0.90;
    parts.push(format!("L4>L0 {wr:.3}"));
    check(ok, parts.join(", "))
}

struct Audited {
    inner: Arc<dyn TeamPolicy>,
    decisions: AtomicU64,
    illegal: AtomicU64,
}

impl TeamPolicy for Audited {
    fn label(&self) -> String {
        self.inner.label()
    }

    fn act_team(&self, ctx: &[HeroCtx<'_>], rngs: &mut [ChaCha8Rng]) -> Vec<StructuredAction> {
        let acts = self.inner.act_team(ctx, rngs);
        for (c, a) in ctx.iter().zip(&acts) {
            self.decisions.fetch_add(1, Ordering::Relaxed);
            if !c.masks.admits(a) {
                self.illegal.fetch_add(1, Ordering::Relaxed);
            }
        }
        acts
    }
}

/// Decisions and illegal actions of `policy` over at least 1e5 decisions.
fn audit(mode: Mode, policy: Arc<dyn TeamPolicy>) -> (u64, u64) {
    let cfg = EnvConfig::new(mode);
    let pol = Audited { inner: policy, decisions: AtomicU64::new(0), illegal: AtomicU64::new(0) };
    let opp = make_level(2).unwrap();
    let mut seed = 0u64;
    while pol.decisions.load(Ordering::Relaxed) < 100_000 {
        (seed..seed + 32).into_par_iter().for_each(|s| {
            run_episode(&EpisodeSpec {
                config: &cfg,
                seed: s,
                controlled: &pol,
                opponent: Some(&opp),
                controlled_team: if s % 2 == 0 { Team::A } else { Team::B },
                record: false,
            })
            .unwrap();
        });
        seed += 32;
    }
    (pol.decisions.into_inner(), pol.illegal.into_inner())
}

fn masks() -> Outcome {
    let mut policies: Vec<(String, Mode, Arc<dyn TeamPolicy>)> = Vec::new();
    for mode in [Mode::Solo, Mode::Trio] {
        for k in 0..=MAX_LEVEL {
            policies.push((format!("{}/L{k}", mode.name()), mode, Arc::new(make_level(k).unwrap())));
        }
    }
    // untrained networks sampled stochastically put mass on every entry
    for algo in AlgoId::ALL {
        let mode = if algo.is_multi_agent() { Mode::Trio } else { Mode::Solo };
        let cfg = AlgoConfig { seed: 5, ..AlgoConfig::for_mode(algo, mode) };
        let l = Learner::new(cfg, mode.action_spec(), mode.obs_dim(), mode.heroes_per_team()).unwrap();
        policies.push((algo.name().to_string(), mode, Arc::new(TrainedPolicy::from_learner(&l).stochastic())));
    }
    let mut bad = Vec::new();
    let mut least = u64::MAX;
    for (name, mode, p) in policies.iter() {
        let (n, illegal) = audit(*mode, p.clone());
        least = least.min(n);
        if illegal > 0 {
            bad.push(format!("{name}: {illegal}/{n}"));
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let entries =
        standard_suite(dir.path(), 3, SuiteScale { main_episodes: 8, subtask_episodes: 4 }, None, |_| {}).unwrap();
    let mut checked = 0;
    for e in &entries {
        let rep = validate_dataset(&e.path).unwrap();
        checked += rep.frames;
        if !rep.is_clean() {
            bad.push(format!("{}: {} violations", e.name, rep.violations.len()));
        }
    }
    check(
        bad.is_empty(),
        format!(
            "{} policies, >= {least} decisions each; {} suite datasets, {checked} stored frames validated{}",
            policies.len(),
            entries.len(),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join(", ")) }
        ),
    )
}

fn one_head(k: usize) -> ActionSpec {
    ActionSpec { head_names: vec!["target".into()], head_sizes: vec![k] }
}

fn bandit_gap(algo: AlgoId, alpha: f32, seed: u64) -> f32 {
    let mut b = TransitionBuffer::new(one_head(2), 4, 1);
    let obs = [1.0, 0.0, 0.0, 0.0];
    for _ in 0..16 {
        b.push_frame(&[AgentStep { obs: &obs, legal: &[true, true], action: &[0], reward: 0.0 }], true);
    }
    let c =
        AlgoConfig { algo, seed, hidden: 64, batch_size: 32, cql_alpha: alpha, max_steps: 2000, ..Default::default() };
    let (l, _) = train(&b, &c, |_, _| {}).unwrap();
    let q = l.q_values(&Array2::from_shape_vec((1, 4), obs.to_vec()).unwrap()).unwrap();
    q[[0, 0]] - q[[0, 1]]
}

fn conservatism() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for algo in [AlgoId::Cql, AlgoId::QmixCql] {
        let with: Vec<f32> = (0..5).map(|s| bandit_gap(algo, 10.0, s)).collect();
        let without: Vec<f32> = (0..5).map(|s| bandit_gap(algo, 0.0, s)).collect();
        let (a, b) = (with.iter().filter(|&&g| g > 0.0).count(), without.iter().filter(|&&g| g > 0.0).count());
        ok &= a >= 4 && b <= 2;
        let min_with = with.iter().cloned().fold(f32::INFINITY, f32::min);
        let max_without = without.iter().map(|g| g.abs()).fold(0.0, f32::max);
        parts.push(format!(
            "{algo}: alpha=10 {a}/5 (min gap {min_with:.3}), alpha=0 {b}/5 (max |gap| {max_without:.1e})"
        ));
    }
    check(ok, parts.join("; "))
}

fn mixers() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(61);
    let mut worst = f32::INFINITY;
    let mut probes = 0;
    for (algo, mode) in [(AlgoId::QmixCql, Mode::Solo), (AlgoId::Maicq, Mode::Trio)] {
        let cfg = AlgoConfig { seed: 2, ..AlgoConfig::for_mode(algo, mode) };
        let l = Learner::new(cfg, mode.action_spec(), mode.obs_dim(), mode.heroes_per_team()).unwrap();
        let m = l.nets.online.mixer.as_ref().unwrap();
        let n = l.nets.online.arch.mixer.unwrap().n_inputs;
        for _ in 0..1000 {
            let st = Array2::from_shape_simple_fn((1, m.state_dim()), || r.random_range(-2.0f32..2.0));
            let q = Array2::from_shape_simple_fn((1, n), || r.random_range(-5.0f32..5.0));
            let base = m.forward(&st, &q)[0];
            for i in 0..n {
                let mut up = q.clone();
                up[[0, i]] += 1e-2;
                worst = worst.min((m.forward(&st, &up)[0] - base) / 1e-2);
                probes += 1;
            }
        }
    }
    check(worst >= -1e-6, format!("{probes} probes over 2x1000 random points, min slope {worst:.3e}"))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-2)
}

/// Central differences of an f64 oracle. The step stays well below the
/// 3e-3 output-layer init scale so no probe crosses an |w| or ReLU kink.
fn fd_grad(flat: &[f64], loss: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..flat.len())
        .map(|k| {
            let mut p = flat.to_vec();
            p[k] += h;
            let up = loss(&p);
            p[k] -= 2.0 * h;
            (up - loss(&p)) / (2.0 * h)
        })
        .collect()
}

fn worst_rel(analytic: &[f32], fd: &[f64]) -> f64 {
    analytic.iter().zip(fd).map(|(&a, &b)| rel_err(a as f64, b)).fold(0.0, f64::max)
}

fn flat64<P: Params>(p: &P) -> Vec<f64> {
    p.flat().iter().map(|&v| v as f64).collect()
}

fn rows64(a: &Array2<f32>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect()
}

/// f64 MLP over the flat layout `[W0 (in×out, row-major), b0, W1, b1, ...]`.
fn mlp64(sizes: &[usize], relu_output: bool, flat: &[f64], x: &[Vec<f64>]) -> (Vec<Vec<f64>>, usize) {
    let mut h = x.to_vec();
    let mut off = 0;
    let n = sizes.len() - 1;
    for l in 0..n {
        let (i, o) = (sizes[l], sizes[l + 1]);
        let (w, b) = (&flat[off..off + i * o], &flat[off + i * o..off + i * o + o]);
        off += i * o + o;
        let act = l + 1 < n || relu_output;
        h = h
            .iter()
            .map(|row| {
                (0..o)
                    .map(|c| {
                        let v = b[c] + (0..i).map(|r| row[r] * w[r * o + c]).sum::<f64>();
                        if act {
                            v.max(0.0)
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
    }
    (h, off)
}

/// f64 monotone mixer `Σ_k |w2_k| elu(b1_k + Σ_i q_i |w1_ik|) + b2`.
fn mixer64(flat: &[f64], s: &[Vec<f64>], q: &[Vec<f64>], n: usize, e: usize, hidden: usize) -> Vec<f64> {
    let sd = s[0].len();
    let (w1, a) = mlp64(&[sd, hidden, n * e], false, flat, s);
    let (b1, b) = mlp64(&[sd, e], false, &flat[a..], s);
    let (w2, c) = mlp64(&[sd, hidden, e], false, &flat[a + b..], s);
    let (b2, _) = mlp64(&[sd, hidden, 1], false, &flat[a + b + c..], s);
    (0..s.len())
        .map(|r| {
            let mut y = b2[r][0];
            for k in 0..e {
                let pre = b1[r][k] + (0..n).map(|i| q[r][i] * w1[r][i * e + k].abs()).sum::<f64>();
                y += if pre > 0.0 { pre } else { pre.exp() - 1.0 } * w2[r][k].abs();
            }
            y
        })
        .collect()
}

fn oracles() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(77);
    let rand_mat =
        |rows, cols, r: &mut ChaCha8Rng| Array2::from_shape_simple_fn((rows, cols), || r.random_range(-1.0f32..1.0));

    // expectile minimizer by bisection on the analytic derivative vs a grid
    let mut expectile_worst = 0.0f64;
    for _ in 0..10 {
        let data: Vec<f32> = (0..7).map(|_| r.random_range(-5.0f32..5.0)).collect();
        let tau = r.random_range(0.1f32..0.95);
        let dloss = |c: f32| -> f32 {
            let u: Vec<f32> = data.iter().map(|&x| x - c).collect();
            -expectile_loss(&u, tau).1.iter().sum::<f32>()
        };
        let (mut lo, mut hi) = (-5.0f32, 5.0f32);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if dloss(mid) > 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        let ours = 0.5 * (lo + hi) as f64;
        let loss = |c: f64| {
            data.iter()
                .map(|&x| {
                    let u = x as f64 - c;
                    (if u < 0.0 { 1.0 - tau as f64 } else { tau as f64 }) * u * u
                })
                .sum::<f64>()
        };
        let grid = (0..=100_000).map(|i| -5.0 + i as f64 * 1e-4).min_by(|a, b| loss(*a).total_cmp(&loss(*b))).unwrap();
        expectile_worst = expectile_worst.max((ours - grid).abs());
    }

    let mut grads = [0.0f64; 4];
    for seed in 0..5 {
        let sizes = [4, 8, 3];
        let mut net = Mlp::new(&sizes, true, &mut ChaCha8Rng::seed_from_u64(seed));
        net.relu_output = false;
        for l in &mut net.layers {
            l.b.mapv_inplace(|_| r.random_range(-0.1..0.1));
        }
        let x = rand_mat(6, 4, &mut r);
        let w = rand_mat(6, 3, &mut r);
        let cache = net.forward_cached(&x);
        let mut g = zeros_like(&net);
        let dx = net.backward(&cache, &w, &mut g);
        let (w64, x64, p64) = (rows64(&w), rows64(&x), flat64(&net));
        let weighted = |out: Vec<Vec<f64>>| -> f64 {
            out.iter().zip(&w64).map(|(o, w)| o.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).sum()
        };
        grads[0] = grads[0].max(worst_rel(&g.flat(), &fd_grad(&p64, |p| weighted(mlp64(&sizes, false, p, &x64).0))));
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let fd_x = fd_grad(&xf, |xs| {
            weighted(mlp64(&sizes, false, &p64, &xs.chunks(4).map(|c| c.to_vec()).collect::<Vec<_>>()).0)
        });
        grads[0] = grads[0].max(worst_rel(dx.as_slice().unwrap(), &fd_x));
    }
    for _ in 0..10 {
        let mut mixer = Mixer::new(6, 3, 5, 8, &mut r);
        for m in [&mut mixer.hyper_w1, &mut mixer.hyper_b1, &mut mixer.hyper_w2, &mut mixer.hyper_b2] {
            m.layers.last_mut().unwrap().w.mapv_inplace(|v| v * 200.0);
        }
        let s = rand_mat(4, 6, &mut r);
        let q = rand_mat(4, 3, &mut r);
        let w: Vec<f32> = (0..4).map(|_| r.random_range(-1.5f32..1.5)).collect();
        let (_, cache) = mixer.forward_cached(&s, &q);
        let mut g = zeros_like(&mixer);
        let dq = mixer.backward(&cache, &w, &mut g);
        let (s64, p64) = (rows64(&s), flat64(&mixer));
        let loss = |p: &[f64], q: &[f64]| -> f64 {
            let qs: Vec<Vec<f64>> = q.chunks(3).map(|c| c.to_vec()).collect();
            mixer64(p, &s64, &qs, 3, 5, 8).iter().zip(&w).map(|(y, &w)| y * w as f64).sum()
        };
        let q64: Vec<f64> = q.iter().map(|&v| v as f64).collect();
        grads[1] = grads[1].max(worst_rel(dq.as_slice().unwrap(), &fd_grad(&q64, |qf| loss(&p64, qf))));
        grads[1] = grads[1].max(worst_rel(&g.flat(), &fd_grad(&p64, |p| loss(p, &q64))));
    }
    for _ in 0..20 {
        let logits: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
        let legal: Vec<bool> = (0..6).map(|i| i == 0 || r.random_bool(0.7)).collect();
        let target = 0;
        let lf: Vec<f32> = logits.iter().map(|&v| v as f32).collect();
        let (_, g) = masked_cross_entropy(&lf, &legal, target).unwrap();
        let ce = |l: &[f64]| {
            let lse = l.iter().zip(&legal).filter(|(_, &ok)| ok).map(|(v, _)| v.exp()).sum::<f64>().ln();
            lse - l[target]
        };
        let fd: Vec<f64> =
            fd_grad(&logits, ce).into_iter().zip(&legal).map(|(d, &ok)| if ok { d } else { 0.0 }).collect();
        grads[2] = grads[2].max(worst_rel(&g, &fd));
        let u: Vec<f32> = (0..5).map(|_| r.random_range(-2.0f32..2.0)).collect();
        let tau = r.random_range(0.1f32..0.9);
        let (_, gu) = expectile_loss(&u, tau);
        let u64s: Vec<f64> = u.iter().map(|&v| v as f64).collect();
        let el = |u: &[f64]| {
            u.iter().map(|&x| (if x < 0.0 { 1.0 - tau as f64 } else { tau as f64 }) * x * x).sum::<f64>()
                / u.len() as f64
        };
        grads[3] = grads[3].max(worst_rel(&gu, &fd_grad(&u64s, el)));
    }
    let names = ["mlp", "mixer", "masked CE", "expectile"];
    check(
        expectile_worst <= 1e-3 && grads.iter().all(|&g| g <= 1e-3),
        format!(
            "expectile minimizer |err| {expectile_worst:.1e}; gradient rel err {}",
            names.iter().zip(&grads).map(|(n, g)| format!("{n} {g:.1e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn recorded(mode: Mode, n: u64, max_steps: u32) -> TransitionBuffer {
    let mut cfg = EnvConfig::new(mode);
    cfg.max_steps = max_steps;
    let p = make_level(2).unwrap();
    let mut buf = TransitionBuffer::new(mode.action_spec(), mode.obs_dim(), mode.heroes_per_team());
    for i in 0..n {
        let ep = run_episode(&EpisodeSpec {
            config: &cfg,
            seed: 500 + i,
            controlled: &p,
            opponent: Some(&p),
            controlled_team: if i % 2 == 0 { Team::A } else { Team::B },
            record: true,
        })
        .unwrap();
        buf.push_episode(&ep);
    }
    buf
}

fn learner_for(algo: AlgoId, b: &Batch) -> Learner {
    let cfg = AlgoConfig { algo, seed: 3, hidden: 64, batch_size: 32, ..Default::default() };
    Learner::new(cfg, b.spec.clone(), b.obs_dim, b.n_agents).unwrap()
}

fn reductions() -> Outcome {
    let solo = recorded(Mode::Solo, 3, 80).sample(&mut ChaCha8Rng::seed_from_u64(8), 64);
    let obs = Array2::from_shape_vec((solo.rows(), solo.obs_dim), solo.obs.clone()).unwrap();
    let reference = |l: &Learner| {
        let n = &l.nets.online;
        bc_loss(&n.pi.as_ref().unwrap().forward(&n.encoder.forward(&obs)), &solo).unwrap().0
    };
    let mut errs = Vec::new();

    let mut iql = learner_for(AlgoId::Iql, &solo);
    let p = iql.losses(&solo, &Overrides { zero_advantage: true, ..Default::default() }).unwrap()["policy_loss"];
    errs.push(("IQL(A=0) vs BC", (p - reference(&iql)).abs()));

    let mut td3 = learner_for(AlgoId::Td3Bc, &solo);
    let t = td3.losses(&solo, &Overrides { lambda: Some(0.0), ..Default::default() }).unwrap();
    errs.push(("TD3+BC(lambda=0) vs BC", (t["actor_loss"] - reference(&td3)).abs()));

    let mut cql = learner_for(AlgoId::Cql, &solo);
    let c = cql.losses(&solo, &Overrides { cql_alpha: Some(0.0), ..Default::default() }).unwrap();
    errs.push(("CQL(alpha=0) regularizer", (c["total_loss"] - c["td_loss"]).abs()));

    let trio = recorded(Mode::Trio, 2, 60).sample(&mut ChaCha8Rng::seed_from_u64(8), 32);
    let mut omar = learner_for(AlgoId::Omar, &trio);
    let o = omar.losses(&trio, &Overrides { omar_coe: Some(0.0), ..Default::default() }).unwrap();
    let n = &omar.nets.online;
    let f = n.encoder.forward(&Array2::from_shape_vec((trio.rows(), trio.obs_dim), trio.obs.clone()).unwrap());
    let q = chosen_mean(&n.q.as_ref().unwrap().forward(&f), &trio.spec, &trio.actions, &trio.active);
    let m = mean(&q);
    let adv: Vec<f32> = q.iter().map(|v| v - m).collect();
    let w = advantage_weights(&adv, omar.config.omar_beta, omar.config.weight_clip);
    let (aw, _) =
        weighted_ce(&n.pi.as_ref().unwrap().forward(&f), &trio, &trio.actions, &trio.active, Some(&w)).unwrap();
    errs.push(("OMAR(coe=0) vs AWBC", (o["policy_loss"] - aw).abs()));

    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    check(worst <= 1e-6, errs.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", "))
}

fn trend() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let plan = suite_plan(0, SuiteScale::default());
    let opponent = 2;
    let mut means = Vec::new();
    let mut parts = Vec::new();
    for kind in ["poor", "medium", "expert"] {
        let name = format!("solo_norm_{kind}");
        let recipe = plan
            .iter()
            .find_map(|i| match i {
                SuiteItem::Sample { recipe } if recipe.name == name => Some(recipe.clone()),
                _ => None,
            })
            .unwrap();
        let path = dir.path().join(format!("{name}.mmof"));
        run_recipe(&recipe, &path, None).unwrap();
        let (header, eps) = read_all(&path).unwrap();
        let buffer = TransitionBuffer::from_episodes(&header, &eps);
        let cfg = recipe.env_config();
        let rates: Vec<f64> = (0..3u64)
            .map(|seed| {
                let c = AlgoConfig {
                    seed,
                    max_steps: 20_000,
                    log_every: 0,
                    ..AlgoConfig::for_mode(AlgoId::Bc, Mode::Solo)
                };
                let (l, _) = train(&buffer, &c, |_, _| {}).unwrap();
                let pol = TrainedPolicy::from_learner(&l);
                evaluate_winrate(&cfg, &pol, opponent, 150, 9_000_000).unwrap().win_rate
            })
            .collect();
        let (m, s) = mean_std(&rates);
        parts.push(format!("{kind} {m:.3}±{s:.3} (behavior {:.3})", header.behavior_win_rate.unwrap_or(f64::NAN)));
        means.push(m);
    }
    check(means[2] > means[1] && means[1] > means[0], format!("BC vs L{opponent}: {}", parts.join(", ")))
}

fn composition() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    let mut source_means = Vec::new();
    for (i, lvl) in [1u8, 2, 4].into_iter().enumerate() {
        let p = dir.path().join(format!("s{lvl}.mmof"));
        run_recipe(
            &Recipe::levels(&format!("s{lvl}"), Mode::Solo, lvl, Some(2), 24 + 8 * i as u32, 40 + i as u64),
            &p,
            None,
        )
        .unwrap();
        let (_, eps) = read_all(&p).unwrap();
        // equal shares take the first m episodes of each source
        let m = 24;
        source_means.push((format!("L{lvl}"), eps[..m].iter().map(|e| e.episode_return()).sum::<f64>() / m as f64));
        paths.push(p);
    }
    let out = dir.path().join("mixed.mmof");
    let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    mix_datasets(&refs, &out, 5).unwrap();
    let (_, eps) = read_all(&out).unwrap();
    let counts: Vec<usize> = source_means
        .iter()
        .map(|(label, _)| eps.iter().filter(|e| &e.meta.controlled_label == label).count())
        .collect();
    let mixed = eps.iter().map(|e| e.episode_return()).sum::<f64>() / eps.len() as f64;
    let expect = source_means.iter().map(|s| s.1).sum::<f64>() / source_means.len() as f64;
    let err = (mixed - expect).abs();
    check(
        counts.iter().all(|&c| c == 24) && err <= 1e-9,
        format!("sources of 24/32/40 episodes -> counts {counts:?}, mean return {mixed:.6} vs {expect:.6} (|err| {err:.1e})"),
    )
}

fn mmof_cli(args: &[&str]) {
    let o = Command::new(env!("CARGO_BIN_EXE_mmof")).args(args).arg("-q").output().unwrap();
    assert!(o.status.success(), "mmof {args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let recipe = dir.path().join("recipe.json");
    std::fs::write(
        &recipe,
        r#"{"name":"norm_expert","mode":"solo","controlled":{"type":"level","level":3},"opponent":{"type":"level","level":2},"episodes":128,"seed":11}"#,
    )
    .unwrap();
    let run = |tag: &str| -> (String, String, String) {
        let d = dir.path().join(tag);
        let s = |p: &Path| p.to_str().unwrap().to_string();
        let (ds, ck, ev) = (d.join("data.mmof"), d.join("ckpt"), d.join("eval.json"));
        mmof_cli(&["sample", "--recipe", &s(&recipe), "--out", &s(&ds)]);
        mmof_cli(&[
            "train",
            "--algo",
            "qmix_cql",
            "--dataset",
            &s(&ds),
            "--seed",
            "1",
            "--steps",
            "2000",
            "--out",
            &s(&ck),
        ]);
        mmof_cli(&[
            "eval",
            "--ckpt",
            &s(&ck.join("model.ckpt")),
            "--opponent",
            "2",
            "--episodes",
            "100",
            "--seed",
            "4",
            "--out",
            &s(&ev),
        ]);
        (file_hash(&ds).unwrap(), file_hash(&ck.join("model.ckpt")).unwrap(), std::fs::read_to_string(&ev).unwrap())
    };
    let t = Instant::now();
    let a = run("a");
    let b = run("b");
    let report: serde_json::Value = serde_json::from_str(&a.2).unwrap();
    check(
        a == b,
        format!(
            "dataset {}.., checkpoint {}.., win rate {} identical across two runs ({:.0?} total)",
            &a.0[..12],
            &a.1[..12],
            report["win_rate"],
            Duration::from_secs(t.elapsed().as_secs())
        ),
    )
}
