use std::sync::atomic::{AtomicU64, Ordering};

use mmof::env::{ActionMasks, EnvConfig, Environment, Mode, StructuredAction, Team};
use mmof::ladder::*;
use mmof::rollout::{run_episode, EpisodeSpec, HeroCtx, TeamPolicy};
use mmof::seed::rng_for;

fn solo() -> EnvConfig {
    EnvConfig::new(Mode::Solo)
}

fn level(k: u8) -> LevelPolicy {
    make_level(k).unwrap()
}

#[test]
fn level_zero_buttons_are_uniform() {
    let mut env = Environment::new(solo()).unwrap();
    env.reset(3);
    let spec = env.action_spec().clone();
    let masks = ActionMasks::all_legal(&spec);
    let mut rng = rng_for(11, &[]);
    let n = 1000;
    let mut counts = vec![0usize; spec.head_sizes[0]];
    for _ in 0..n {
        counts[level(0).act_hero(&env, 0, &masks, &mut rng).head_indices[0]] += 1;
    }
    let e = n as f64 / counts.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 99th percentile of chi-squared with 4 degrees of freedom.
    assert!(chi2 < 13.277, "chi2 {chi2} counts {counts:?}");
}

#[test]
fn out_of_range_level_is_rejected() {
    assert!(matches!(make_level(5), Err(LadderError::Level(5))));
    assert!(make_level(MAX_LEVEL).is_ok());
}

#[test]
fn single_legal_tuple_is_forced() {
    for mode in [Mode::Solo, Mode::Trio] {
        let mut env = Environment::new(EnvConfig::new(mode)).unwrap();
        env.reset(5);
        let spec = env.action_spec().clone();
        let want: Vec<usize> = spec.head_sizes.iter().enumerate().map(|(h, &s)| (h * 7 + 1) % s).collect();
        let mut masks = ActionMasks::all_legal(&spec);
        for (h, l) in masks.legal.iter_mut().enumerate() {
            l.iter_mut().enumerate().for_each(|(i, v)| *v = i == want[h]);
        }
        for k in 0..=MAX_LEVEL {
            let mut rng = rng_for(k as u64, &[]);
            for hero in 0..env.n_heroes() {
                assert_eq!(level(k).act_hero(&env, hero, &masks, &mut rng).head_indices, want, "level {k}");
            }
        }
    }
}

#[test]
fn self_play_is_balanced() {
    for k in [0, 2, 4] {
        let wr = duel(&solo(), &level(k), &level(k), 200, 900 + k as u64).unwrap().win_rate();
        assert!((0.40..=0.60).contains(&wr), "L{k} self-play {wr}");
    }
}

#[test]
fn ladder_is_monotone_under_golden_seed() {
    let cfg = solo();
    for k in 0..MAX_LEVEL {
        let wr = duel(&cfg, &level(k + 1), &level(k), 300, GOLDEN_SEED).unwrap().win_rate();
        assert!(wr >= 0.65, "L{} vs L{k}: {wr}", k + 1);
    }
    let wr = duel(&cfg, &level(4), &level(0), 300, GOLDEN_SEED).unwrap().win_rate();
    assert!(wr >= 0.90, "L4 vs L0: {wr}");
}

#[test]
fn duels_are_deterministic_and_count_every_episode() {
    let a = duel(&solo(), &level(3), &level(1), 40, 17).unwrap();
    let b = duel(&solo(), &level(3), &level(1), 40, 17).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.episodes(), 40);
    assert!(matches!(duel(&solo(), &level(1), &level(1), 0, 0), Err(LadderError::NoEpisodes)));
    let sub = EnvConfig::new(Mode::SubGainGold);
    assert!(matches!(duel(&sub, &level(1), &level(1), 1, 0), Err(LadderError::NoOpponent)));
}

#[test]
fn draws_count_half() {
    let r = DuelResult { wins: 3, losses: 1, draws: 2 };
    assert_eq!(r.win_rate(), 4.0 / 6.0);
}

#[test]
fn report_diagonal_dominance_and_round_trip() {
    let rep = ladder_report(&solo(), 200, GOLDEN_SEED).unwrap();
    let n = rep.levels.len();
    for i in 0..n {
        assert!((0.4..=0.6).contains(&rep.win_rate[i][i]), "diagonal {i}: {}", rep.win_rate[i][i]);
        for j in 0..n {
            assert!((0.0..=1.0).contains(&rep.win_rate[i][j]));
            for k in j + 1..n {
                assert!(
                    rep.win_rate[i][j] >= rep.win_rate[i][k] - 0.05,
                    "row {i}: vs {j} below vs {k}: {:?}",
                    rep.win_rate[i]
                );
            }
        }
    }
    let json = rep.to_json();
    let back = LadderReport::from_json(&json).unwrap();
    assert_eq!(back, rep);
    assert_eq!(back.to_json(), json);
    let csv = rep.to_csv();
    assert!(csv.starts_with("level_a,level_b,win_rate,episodes\n"));
    assert_eq!(csv.lines().count(), 1 + n * n);
}

/// Delegates to a level policy and audits every decision against the masks.
struct Audited {
    inner: LevelPolicy,
    decisions: AtomicU64,
    illegal: AtomicU64,
}

impl TeamPolicy for Audited {
    fn label(&self) -> String {
        self.inner.label()
    }

    fn act_team(&self, ctx: &[HeroCtx<'_>], rngs: &mut [rand_chacha::ChaCha8Rng]) -> Vec<StructuredAction> {
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

#[test]
fn every_level_respects_masks() {
    use rayon::prelude::*;
    for mode in [Mode::Solo, Mode::Trio] {
        let cfg = EnvConfig::new(mode);
        for k in 0..=MAX_LEVEL {
            let pol = Audited { inner: level(k), decisions: AtomicU64::new(0), illegal: AtomicU64::new(0) };
            let opp = level((k + 2) % 5);
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
            assert_eq!(pol.illegal.load(Ordering::Relaxed), 0, "{mode:?} L{k}");
        }
    }
}
