//! Fixtures shared by the throughput benchmarks.

use mmof::dataset::TransitionBuffer;
use mmof::env::{EnvConfig, Mode, Team};
use mmof::ladder::make_level;
use mmof::rollout::{run_episode, EpisodeSpec};

/// Transitions from `episodes` level-2 self-play games.
pub fn self_play_buffer(mode: Mode, episodes: u64) -> TransitionBuffer {
    let cfg = EnvConfig::new(mode);
    let p = make_level(2).expect("level 2 exists");
    let mut buf = TransitionBuffer::new(mode.action_spec(), mode.obs_dim(), mode.heroes_per_team());
    for i in 0..episodes {
        let ep = run_episode(&EpisodeSpec {
            config: &cfg,
            seed: i,
            controlled: &p,
            opponent: Some(&p),
            controlled_team: if i % 2 == 0 { Team::A } else { Team::B },
            record: true,
        })
        .expect("self-play episode");
        buf.push_episode(&ep);
    }
    buf
}
