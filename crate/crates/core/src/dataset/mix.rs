use std::path::Path;

use rand::seq::SliceRandom;

use super::format::{DatasetError, DatasetHeader, DatasetReader, DatasetWriter};
use super::record::EpisodeMeta;
use crate::seed::rng_for;

pub const MIXED_RECIPE: &str = "mixed";

/// Equal mixture of `inputs`: the first `m` episodes of each input, where `m`
/// is the smallest input count, interleaved by a shuffle seeded with `seed`.
/// Blocks are copied verbatim. The header keeps the first input's env config.
pub fn mix_datasets(inputs: &[&Path], out: &Path, seed: u64) -> Result<DatasetHeader, DatasetError> {
    if inputs.is_empty() {
        return Err(DatasetError::Schema("mix needs at least one input".into()));
    }
    let mut readers = inputs.iter().map(|p| DatasetReader::open(p)).collect::<Result<Vec<_>, _>>()?;
    for r in &readers[1..] {
        readers[0].header().compatible_with(r.header())?;
    }
    let indices = readers.iter_mut().map(|r| r.block_index()).collect::<Result<Vec<_>, _>>()?;
    let per_input = indices.iter().map(Vec::len).min().unwrap_or(0);

    let mut order: Vec<(usize, usize)> = (0..readers.len()).flat_map(|k| (0..per_input).map(move |i| (k, i))).collect();
    order.shuffle(&mut rng_for(seed, &[0x313C]));

    let mut header = readers[0].header().clone();
    header.recipe = MIXED_RECIPE.to_string();
    header.behavior_win_rate = None;
    header.episode_count = 0;
    let mut w = DatasetWriter::create(out, header)?;
    for (k, i) in order {
        let (off, len) = indices[k][i];
        let block = readers[k].read_block_at(off, len)?;
        let outcome = block_meta(&block, i as u64)?.outcome_score();
        w.write_raw(&block, outcome)?;
    }
    w.finish()
}

fn block_meta(block: &[u8], episode: u64) -> Result<EpisodeMeta, DatasetError> {
    let corrupt = |reason: String| DatasetError::Corrupt { episode, reason };
    let len = block.get(..4).ok_or_else(|| corrupt("missing meta length".into()))?;
    let len = u32::from_le_bytes(len.try_into().unwrap()) as usize;
    let json = block.get(4..4 + len).ok_or_else(|| corrupt("short meta".into()))?;
    serde_json::from_slice(json).map_err(|e| corrupt(format!("meta json: {e}")))
}
