//! Binary checkpoints: `MMCK`, u32 version, u32 meta length, JSON meta, u64
//! parameter count, then the online parameters as little-endian `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AlgoConfig, AlgoError, AlgoId, Learner, Nets, NetsArch};
use crate::env::{ActionSpec, Mode};
use crate::nn::Params;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub algo: AlgoId,
    pub mode: Option<Mode>,
    pub action_spec: ActionSpec,
    pub obs_dim: usize,
    pub n_agents: usize,
    pub config: AlgoConfig,
    pub arch: NetsArch,
    pub step: u64,
    /// Content hash of the training dataset, when known.
    pub dataset_hash: Option<String>,
}

impl CheckpointMeta {
    pub fn for_learner(learner: &Learner, mode: Option<Mode>, dataset_hash: Option<String>) -> Self {
        CheckpointMeta {
            algo: learner.algo(),
            mode,
            action_spec: learner.spec.clone(),
            obs_dim: learner.obs_dim,
            n_agents: learner.n_agents,
            config: learner.config.clone(),
            arch: learner.nets.online.arch.clone(),
            step: learner.step,
            dataset_hash,
        }
    }
}

fn ck_err(m: impl Into<String>) -> AlgoError {
    AlgoError::Checkpoint(m.into())
}

pub fn save_checkpoint(path: &Path, meta: &CheckpointMeta, nets: &Nets) -> Result<(), AlgoError> {
    if meta.arch != nets.arch {
        return Err(ck_err("metadata architecture does not match the networks"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    let json = serde_json::to_vec(meta).map_err(|e| ck_err(e.to_string()))?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let flat = nets.flat();
    w.write_all(&(flat.len() as u64).to_le_bytes())?;
    for v in flat {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointMeta, Nets), AlgoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if &b4 != CHECKPOINT_MAGIC {
        return Err(ck_err(format!("{} is not a checkpoint", path.display())));
    }
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != CHECKPOINT_VERSION {
        return Err(ck_err(format!("checkpoint version {version}, expected {CHECKPOINT_VERSION}")));
    }
    r.read_exact(&mut b4)?;
    let mut json = vec![0u8; u32::from_le_bytes(b4) as usize];
    r.read_exact(&mut json)?;
    let meta: CheckpointMeta = serde_json::from_slice(&json).map_err(|e| ck_err(format!("bad metadata: {e}")))?;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    let mut nets = Nets::zeros(&meta.arch);
    if nets.n_params() != n {
        return Err(ck_err(format!("checkpoint holds {n} parameters, architecture needs {}", nets.n_params())));
    }
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)?;
    let mut vals = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    nets.visit_mut(&mut |s| s.iter_mut().for_each(|v| *v = vals.next().expect("length checked")));
    if r.read(&mut b4)? != 0 {
        return Err(ck_err("trailing bytes after parameters"));
    }
    Ok((meta, nets))
}
