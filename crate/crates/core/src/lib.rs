//! MOBA micro-environment with a scripted opponent ladder, a binary offline
//! dataset format, and offline RL / MARL baselines trained on it.
//!
//! The most used types are re-exported at the crate root.

pub mod algos;
pub mod dataset;
pub mod env;
pub mod evaluator;
pub mod ladder;
pub mod nn;
pub mod rollout;
pub mod sampler;
pub mod seed;

pub use algos::{AlgoConfig, AlgoError, AlgoId, Learner, TrainedPolicy};
pub use dataset::{DatasetError, DatasetHeader, EpisodeRecord, TransitionBuffer};
pub use env::{ActionMasks, ActionSpec, EnvConfig, EnvError, Environment, Mode, StructuredAction, Team};
pub use evaluator::{EvalError, SubtaskReport, WinRateReport};
pub use ladder::{make_level, LevelPolicy, GOLDEN_SEED};
pub use rollout::TeamPolicy;
pub use sampler::{Recipe, SamplerError};
