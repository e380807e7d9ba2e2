//! Offline datasets: episode records, the `.mmof` container, mixing and statistics.

mod buffer;
mod format;
mod mix;
mod record;
mod stats;

pub use buffer::{AgentStep, Batch, TransitionBuffer};
pub use format::{
    config_hash, file_hash, read_all, read_dataset, write_dataset, DatasetError, DatasetHeader, DatasetReader,
    DatasetWriter, EpisodeIter, FORMAT_VERSION, MAGIC,
};
pub use mix::{mix_datasets, MIXED_RECIPE};
pub use record::{EpisodeMeta, EpisodeRecord, HeroStep, StepFrame};
pub use stats::{dataset_stats, quantile, validate_dataset, DatasetStats, ValidationReport, Violation};
