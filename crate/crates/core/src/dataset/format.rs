//! The `.mmof` container.
//!
//! ```text
//! "MMOF"                      4 bytes magic
//! version                     u32
//! header length               u32
//! header                      JSON (DatasetHeader)
//! episode block × count:
//!   block length              u64
//!   meta length               u32
//!   meta                      JSON (EpisodeMeta)
//!   frame count               u32
//!   frame × frame count:
//!     done                    u8
//!     per controlled hero:
//!       observation           obs_dim × f32
//!       action                n_heads × u16
//!       legal mask            Σ head_sizes bits, LSB first, padded to bytes
//!       active heads          n_heads bits, padded to a byte boundary
//!       reward items          n_items × f64
//!       weighted, zero_sum    2 × f64
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::record::{EpisodeMeta, EpisodeRecord, HeroStep, StepFrame};
use crate::env::{reward_item_names, ActionSpec, EnvConfig, Mode, RewardVector};

pub const MAGIC: &[u8; 4] = b"MMOF";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0} is not an .mmof file (bad magic)")]
    BadMagic(PathBuf),
    #[error("format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("file truncated inside episode {episode}")]
    Truncated { episode: u64 },
    #[error("header declares {header} episodes but the body holds {body}")]
    CountMismatch { header: u64, body: u64 },
    #[error("config hash mismatch: header says {expected}, config hashes to {found}")]
    HashMismatch { expected: String, found: String },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("episode {episode} is corrupt: {reason}")]
    Corrupt { episode: u64, reason: String },
}

impl DatasetError {
    fn io(path: &Path, source: io::Error) -> Self {
        DatasetError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub mode: Mode,
    pub action_spec: ActionSpec,
    pub obs_dim: usize,
    pub n_heroes_controlled: usize,
    pub reward_items: Vec<String>,
    /// Taxonomy label, e.g. `norm_expert` or `mixed`.
    pub recipe: String,
    pub env_config: EnvConfig,
    /// Hex sha256 of the canonical JSON of `env_config`.
    pub config_hash: String,
    /// Win rate of the controlled team; draws count one half.
    pub behavior_win_rate: Option<f64>,
    pub draw_convention: String,
    pub episode_count: u64,
}

impl DatasetHeader {
    pub fn new(env_config: &EnvConfig, recipe: &str) -> Self {
        let mode = env_config.mode;
        DatasetHeader {
            format_version: FORMAT_VERSION,
            mode,
            action_spec: mode.action_spec(),
            obs_dim: mode.obs_dim(),
            n_heroes_controlled: mode.heroes_per_team(),
            reward_items: reward_item_names(mode).into_iter().map(String::from).collect(),
            recipe: recipe.to_string(),
            env_config: env_config.clone(),
            config_hash: config_hash(env_config),
            behavior_win_rate: None,
            draw_convention: "draw counts 0.5".into(),
            episode_count: 0,
        }
    }

    /// Same mode, action layout, observation width and reward items.
    pub fn compatible_with(&self, other: &DatasetHeader) -> Result<(), DatasetError> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(DatasetError::Schema(what.to_string())) };
        check(self.mode == other.mode, "modes differ")?;
        check(self.action_spec == other.action_spec, "action specs differ")?;
        check(self.obs_dim == other.obs_dim, "observation widths differ")?;
        check(self.n_heroes_controlled == other.n_heroes_controlled, "controlled hero counts differ")?;
        check(self.reward_items == other.reward_items, "reward items differ")
    }

    fn legal_bytes(&self) -> usize {
        self.action_spec.total_size().div_ceil(8)
    }

    fn active_bytes(&self) -> usize {
        self.action_spec.n_heads().div_ceil(8)
    }
}

pub fn config_hash(cfg: &EnvConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

/// sha256 of a whole file, hex encoded.
pub fn file_hash(path: &Path) -> Result<String, DatasetError> {
    let mut f = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| DatasetError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn pack_bits(bits: impl Iterator<Item = bool>, n_bytes: usize, out: &mut Vec<u8>) {
    let start = out.len();
    out.resize(start + n_bytes, 0);
    for (i, b) in bits.enumerate() {
        if b {
            out[start + i / 8] |= 1 << (i % 8);
        }
    }
}

fn unpack_bits(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

pub(crate) fn encode_episode(header: &DatasetHeader, ep: &EpisodeRecord) -> Result<Vec<u8>, DatasetError> {
    let spec = &header.action_spec;
    let bad = |reason: String| DatasetError::Schema(format!("episode seed {}: {reason}", ep.meta.seed));
    let mut buf = Vec::new();
    let meta = serde_json::to_vec(&ep.meta).expect("meta serializes");
    buf.extend((meta.len() as u32).to_le_bytes());
    buf.extend(meta);
    buf.extend((ep.frames.len() as u32).to_le_bytes());
    for f in &ep.frames {
        buf.push(f.done as u8);
        if f.heroes.len() != header.n_heroes_controlled {
            return Err(bad(format!("frame has {} heroes", f.heroes.len())));
        }
        for h in &f.heroes {
            if h.obs.len() != header.obs_dim
                || h.action.len() != spec.n_heads()
                || h.active.len() != spec.n_heads()
                || h.legal.len() != spec.n_heads()
                || h.legal.iter().zip(&spec.head_sizes).any(|(l, &s)| l.len() != s)
                || h.reward.items.len() != header.reward_items.len()
            {
                return Err(bad("hero step widths do not match the header".into()));
            }
            for v in &h.obs {
                buf.extend(v.to_le_bytes());
            }
            for a in &h.action {
                buf.extend(a.to_le_bytes());
            }
            pack_bits(h.legal.iter().flatten().copied(), header.legal_bytes(), &mut buf);
            pack_bits(h.active.iter().copied(), header.active_bytes(), &mut buf);
            for v in h.reward.items.iter().chain([&h.reward.weighted, &h.reward.zero_sum]) {
                buf.extend(v.to_le_bytes());
            }
        }
    }
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
}

pub(crate) fn decode_episode(
    header: &DatasetHeader,
    bytes: &[u8],
    episode: u64,
) -> Result<EpisodeRecord, DatasetError> {
    let corrupt = |reason: &str| DatasetError::Corrupt { episode, reason: reason.to_string() };
    let spec = &header.action_spec;
    let mut c = Cursor { bytes, pos: 0 };
    let meta_len = c.u32().ok_or_else(|| corrupt("missing meta length"))? as usize;
    let meta: EpisodeMeta = serde_json::from_slice(c.take(meta_len).ok_or_else(|| corrupt("short meta"))?)
        .map_err(|e| corrupt(&format!("meta json: {e}")))?;
    let n_frames = c.u32().ok_or_else(|| corrupt("missing frame count"))? as usize;
    let n_items = header.reward_items.len();
    let mut frames = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let done = c.take(1).ok_or_else(|| corrupt("short frame"))?[0] != 0;
        let mut heroes = Vec::with_capacity(header.n_heroes_controlled);
        for _ in 0..header.n_heroes_controlled {
            let short = || corrupt("short hero step");
            let obs = c
                .take(4 * header.obs_dim)
                .ok_or_else(short)?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            let action = c
                .take(2 * spec.n_heads())
                .ok_or_else(short)?
                .chunks_exact(2)
                .map(|b| u16::from_le_bytes(b.try_into().unwrap()))
                .collect();
            let flat = unpack_bits(c.take(header.legal_bytes()).ok_or_else(short)?, spec.total_size());
            let mut legal = Vec::with_capacity(spec.n_heads());
            let mut off = 0;
            for &s in &spec.head_sizes {
                legal.push(flat[off..off + s].to_vec());
                off += s;
            }
            let active = unpack_bits(c.take(header.active_bytes()).ok_or_else(short)?, spec.n_heads());
            let vals: Vec<f64> = c
                .take(8 * (n_items + 2))
                .ok_or_else(short)?
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            let reward =
                RewardVector { items: vals[..n_items].to_vec(), weighted: vals[n_items], zero_sum: vals[n_items + 1] };
            heroes.push(HeroStep { obs, legal, action, active, reward });
        }
        frames.push(StepFrame { heroes, done });
    }
    if c.pos != bytes.len() {
        return Err(corrupt("trailing bytes in episode block"));
    }
    Ok(EpisodeRecord { meta, frames })
}

/// Streams episodes to a temporary body file; `finish` writes the final file
/// with the episode count and win rate filled in.
pub struct DatasetWriter {
    path: PathBuf,
    body_path: PathBuf,
    body: BufWriter<File>,
    header: DatasetHeader,
    count: u64,
    outcome_sum: f64,
}

impl DatasetWriter {
    pub fn create(path: &Path, header: DatasetHeader) -> Result<Self, DatasetError> {
        let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".body.tmp");
        let body_path = path.with_file_name(name);
        let body = BufWriter::new(File::create(&body_path).map_err(|e| DatasetError::io(&body_path, e))?);
        Ok(DatasetWriter { path: path.to_path_buf(), body_path, body, header, count: 0, outcome_sum: 0.0 })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn write_episode(&mut self, ep: &EpisodeRecord) -> Result<(), DatasetError> {
        let block = encode_episode(&self.header, ep)?;
        self.write_block(&block)?;
        self.outcome_sum += ep.meta.outcome_score();
        Ok(())
    }

    /// Append an already encoded block (used by `mix`, which copies blocks verbatim).
    pub(crate) fn write_raw(&mut self, block: &[u8], outcome: f64) -> Result<(), DatasetError> {
        self.write_block(block)?;
        self.outcome_sum += outcome;
        Ok(())
    }

    fn write_block(&mut self, block: &[u8]) -> Result<(), DatasetError> {
        let p = &self.body_path;
        self.body.write_all(&(block.len() as u64).to_le_bytes()).map_err(|e| DatasetError::io(p, e))?;
        self.body.write_all(block).map_err(|e| DatasetError::io(p, e))?;
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<DatasetHeader, DatasetError> {
        self.body.flush().map_err(|e| DatasetError::io(&self.body_path, e))?;
        drop(self.body);
        let mut header = self.header;
        header.episode_count = self.count;
        if header.mode.has_enemy_heroes() && self.count > 0 {
            header.behavior_win_rate = Some(self.outcome_sum / self.count as f64);
        }
        let write = || -> io::Result<()> {
            let mut out = BufWriter::new(File::create(&self.path)?);
            let json = serde_json::to_vec(&header).expect("header serializes");
            out.write_all(MAGIC)?;
            out.write_all(&FORMAT_VERSION.to_le_bytes())?;
            out.write_all(&(json.len() as u32).to_le_bytes())?;
            out.write_all(&json)?;
            io::copy(&mut File::open(&self.body_path)?, &mut out)?;
            out.flush()
        };
        let res = write().map_err(|e| DatasetError::io(&self.path, e));
        let _ = std::fs::remove_file(&self.body_path);
        res?;
        Ok(header)
    }
}

pub fn write_dataset<'a>(
    path: &Path,
    header: DatasetHeader,
    episodes: impl IntoIterator<Item = &'a EpisodeRecord>,
) -> Result<DatasetHeader, DatasetError> {
    let mut w = DatasetWriter::create(path, header)?;
    for ep in episodes {
        w.write_episode(ep)?;
    }
    w.finish()
}

/// Streaming reader. Episodes are decoded one block at a time.
pub struct DatasetReader {
    path: PathBuf,
    file: BufReader<File>,
    header: DatasetHeader,
    body_start: u64,
    next: u64,
    finished: bool,
}

impl DatasetReader {
    pub fn open(path: &Path) -> Result<Self, DatasetError> {
        let f = File::open(path).map_err(|e| DatasetError::io(path, e))?;
        let mut file = BufReader::new(f);
        let mut fixed = [0u8; 12];
        match file.read_exact(&mut fixed) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Err(DatasetError::BadMagic(path.into())),
            Err(e) => return Err(DatasetError::io(path, e)),
        }
        if &fixed[..4] != MAGIC {
            return Err(DatasetError::BadMagic(path.into()));
        }
        let version = u32::from_le_bytes(fixed[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(DatasetError::Version { found: version, expected: FORMAT_VERSION });
        }
        let len = u32::from_le_bytes(fixed[8..12].try_into().unwrap()) as usize;
        let mut json = vec![0u8; len];
        file.read_exact(&mut json).map_err(|_| DatasetError::Schema("truncated header".into()))?;
        let header: DatasetHeader =
            serde_json::from_slice(&json).map_err(|e| DatasetError::Schema(format!("header json: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(DatasetError::Version { found: header.format_version, expected: FORMAT_VERSION });
        }
        let found = config_hash(&header.env_config);
        if found != header.config_hash {
            return Err(DatasetError::HashMismatch { expected: header.config_hash.clone(), found });
        }
        let expected = DatasetHeader::new(&header.env_config, &header.recipe);
        header.compatible_with(&expected)?;
        let body_start = 12 + len as u64;
        Ok(DatasetReader { path: path.to_path_buf(), file, header, body_start, next: 0, finished: false })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Next raw block, or `None` after the last declared episode. Also checks
    /// that the body holds exactly the declared number of blocks.
    pub(crate) fn next_raw(&mut self) -> Result<Option<Vec<u8>>, DatasetError> {
        if self.finished {
            return Ok(None);
        }
        let episode = self.next;
        let mut len = [0u8; 8];
        let got = read_full(&mut self.file, &mut len).map_err(|e| DatasetError::io(&self.path, e))?;
        if episode == self.header.episode_count {
            self.finished = true;
            if got == 0 {
                return Ok(None);
            }
            let mut extra = episode + 1;
            // count the surplus blocks for the diagnostic
            if got == 8 {
                let mut skip = u64::from_le_bytes(len);
                while self.file.seek_relative(skip as i64).is_ok() {
                    let n = read_full(&mut self.file, &mut len).map_err(|e| DatasetError::io(&self.path, e))?;
                    if n < 8 {
                        break;
                    }
                    extra += 1;
                    skip = u64::from_le_bytes(len);
                }
            }
            return Err(DatasetError::CountMismatch { header: self.header.episode_count, body: extra });
        }
        match got {
            0 => {
                self.finished = true;
                return Err(DatasetError::CountMismatch { header: self.header.episode_count, body: episode });
            }
            8 => {}
            _ => return Err(DatasetError::Truncated { episode }),
        }
        let n = u64::from_le_bytes(len) as usize;
        let mut block = vec![0u8; n];
        let got = read_full(&mut self.file, &mut block).map_err(|e| DatasetError::io(&self.path, e))?;
        if got < n {
            self.finished = true;
            return Err(DatasetError::Truncated { episode });
        }
        self.next += 1;
        Ok(Some(block))
    }

    pub fn next_episode(&mut self) -> Result<Option<EpisodeRecord>, DatasetError> {
        let episode = self.next;
        match self.next_raw()? {
            Some(b) => decode_episode(&self.header, &b, episode).map(Some),
            None => Ok(None),
        }
    }

    /// Byte offsets and lengths of every episode block, for random access.
    pub fn block_index(&mut self) -> Result<Vec<(u64, u64)>, DatasetError> {
        self.file.seek(SeekFrom::Start(self.body_start)).map_err(|e| DatasetError::io(&self.path, e))?;
        self.next = 0;
        self.finished = false;
        let mut out = Vec::new();
        let mut pos = self.body_start;
        loop {
            let episode = self.next;
            let mut len = [0u8; 8];
            let got = read_full(&mut self.file, &mut len).map_err(|e| DatasetError::io(&self.path, e))?;
            if got == 0 {
                break;
            }
            if got < 8 {
                return Err(DatasetError::Truncated { episode });
            }
            let n = u64::from_le_bytes(len);
            let end = self.file.get_ref().metadata().map_err(|e| DatasetError::io(&self.path, e))?.len();
            if pos + 8 + n > end {
                return Err(DatasetError::Truncated { episode });
            }
            out.push((pos + 8, n));
            pos += 8 + n;
            self.file.seek(SeekFrom::Start(pos)).map_err(|e| DatasetError::io(&self.path, e))?;
            self.next += 1;
        }
        if out.len() as u64 != self.header.episode_count {
            return Err(DatasetError::CountMismatch { header: self.header.episode_count, body: out.len() as u64 });
        }
        self.file.seek(SeekFrom::Start(self.body_start)).map_err(|e| DatasetError::io(&self.path, e))?;
        self.next = 0;
        Ok(out)
    }

    pub(crate) fn read_block_at(&mut self, offset: u64, len: u64) -> Result<Vec<u8>, DatasetError> {
        self.file.seek(SeekFrom::Start(offset)).map_err(|e| DatasetError::io(&self.path, e))?;
        let mut block = vec![0u8; len as usize];
        self.file.read_exact(&mut block).map_err(|e| DatasetError::io(&self.path, e))?;
        Ok(block)
    }

    pub fn episodes(self) -> EpisodeIter {
        EpisodeIter { reader: self }
    }
}

/// Read until `buf` is full or EOF; returns the number of bytes read.
fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

pub struct EpisodeIter {
    reader: DatasetReader,
}

impl Iterator for EpisodeIter {
    type Item = Result<EpisodeRecord, DatasetError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.reader.next_episode().transpose()
    }
}

/// Open a dataset and return its header plus a streaming episode iterator.
pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, EpisodeIter), DatasetError> {
    let r = DatasetReader::open(path)?;
    Ok((r.header().clone(), r.episodes()))
}

/// Load every episode into memory.
pub fn read_all(path: &Path) -> Result<(DatasetHeader, Vec<EpisodeRecord>), DatasetError> {
    let (h, it) = read_dataset(path)?;
    let eps = it.collect::<Result<Vec<_>, _>>()?;
    Ok((h, eps))
}
