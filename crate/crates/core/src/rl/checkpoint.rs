//! Checkpoint container.
//!
//! A checkpoint is a binary file plus a JSON sidecar (`<path>.json`).
//!
//! Binary layout, little-endian:
//!
//! ```text
//! magic      8 bytes  "PIHCKPT1"
//! obs_dim    u32
//! act_dim    u32
//! n_hidden   u32
//! hidden[i]  u32 each
//! then f64 arrays, in declared order:
//!   actor layers   (w row-major out x in, then b), input -> output
//!   log_std        act_dim
//!   critic layers  (w, b)
//!   action_limits  4
//!   normalizer     mean obs_dim, m2 obs_dim, count 1
//! ```
//!
//! The sidecar records step count, seed, config hash, and the observation
//! mask, so a checkpoint can be validated against the experiment that
//! wants to load it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{ObservationMask, OBS_DIM};

use super::mlp::{Dense, Mlp};
use super::normalizer::ObsNormalizer;
use super::policy::PolicyParams;

const MAGIC: &[u8; 8] = b"PIHCKPT1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint magic (not a checkpoint file?)")]
    BadMagic,
    #[error("checkpoint metadata error: {0}")]
    Meta(#[from] serde_json::Error),
    #[error("checkpoint is incompatible: {0}")]
    Incompatible(String),
}

/// JSON sidecar contents.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step_count: u64,
    pub seed: u64,
    pub config_hash: String,
    pub mask: ObservationMask,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_checkpoint(
    path: &Path,
    params: &PolicyParams,
    normalizer: &ObsNormalizer,
    meta: &CheckpointMeta,
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    let hidden = params.hidden_dims();
    write_u32(&mut w, params.obs_dim() as u32)?;
    write_u32(&mut w, params.act_dim() as u32)?;
    write_u32(&mut w, hidden.len() as u32)?;
    for h in &hidden {
        write_u32(&mut w, *h as u32)?;
    }
    for layer in &params.actor.layers {
        write_dense(&mut w, layer)?;
    }
    for v in params.log_std.iter() {
        write_f64(&mut w, *v)?;
    }
    for layer in &params.critic.layers {
        write_dense(&mut w, layer)?;
    }
    for v in params.action_limits {
        write_f64(&mut w, v)?;
    }
    for v in normalizer.mean {
        write_f64(&mut w, v)?;
    }
    for v in normalizer.m2 {
        write_f64(&mut w, v)?;
    }
    write_f64(&mut w, normalizer.count)?;
    w.flush()?;
    let sidecar = File::create(sidecar_path(path))?;
    serde_json::to_writer_pretty(BufWriter::new(sidecar), meta)?;
    Ok(())
}

pub fn read_checkpoint(
    path: &Path,
) -> Result<(PolicyParams, ObsNormalizer, CheckpointMeta), CheckpointError> {
    let meta: CheckpointMeta =
        serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let obs_dim = read_u32(&mut r)? as usize;
    let act_dim = read_u32(&mut r)? as usize;
    let n_hidden = read_u32(&mut r)? as usize;
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden.push(read_u32(&mut r)? as usize);
    }
    if obs_dim != OBS_DIM {
        return Err(CheckpointError::Incompatible(format!(
            "observation dim {obs_dim} != {OBS_DIM}"
        )));
    }
    let mut actor_dims = vec![obs_dim];
    actor_dims.extend_from_slice(&hidden);
    actor_dims.push(act_dim);
    let actor = read_mlp(&mut r, &actor_dims)?;
    let mut log_std = Array1::zeros(act_dim);
    for v in log_std.iter_mut() {
        *v = read_f64(&mut r)?;
    }
    let mut critic_dims = vec![obs_dim];
    critic_dims.extend_from_slice(&hidden);
    critic_dims.push(1);
    let critic = read_mlp(&mut r, &critic_dims)?;
    let mut action_limits = [0.0; 4];
    for v in action_limits.iter_mut() {
        *v = read_f64(&mut r)?;
    }
    let mut normalizer = ObsNormalizer::new(meta.mask);
    for v in normalizer.mean.iter_mut() {
        *v = read_f64(&mut r)?;
    }
    for v in normalizer.m2.iter_mut() {
        *v = read_f64(&mut r)?;
    }
    normalizer.count = read_f64(&mut r)?;
    Ok((
        PolicyParams {
            actor,
            critic,
            log_std,
            action_limits,
        },
        normalizer,
        meta,
    ))
}

fn read_mlp(r: &mut impl Read, dims: &[usize]) -> Result<Mlp, CheckpointError> {
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for io in dims.windows(2) {
        let (fan_in, fan_out) = (io[0], io[1]);
        let mut w = Array2::zeros((fan_out, fan_in));
        for v in w.iter_mut() {
            *v = read_f64(r)?;
        }
        let mut b = Array1::zeros(fan_out);
        for v in b.iter_mut() {
            *v = read_f64(r)?;
        }
        layers.push(Dense { w, b });
    }
    Ok(Mlp { layers })
}

fn write_dense(w: &mut impl Write, layer: &Dense) -> std::io::Result<()> {
    for v in layer.w.iter() {
        write_f64(w, *v)?;
    }
    for v in layer.b.iter() {
        write_f64(w, *v)?;
    }
    Ok(())
}

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = PolicyParams::new(13, 4, &[64, 64], [2.0, 2.0, 2.0, 0.0349], -0.5, &mut rng);
        let mut norm = ObsNormalizer::new(ObservationMask::Ftm);
        for k in 0..50 {
            let mut v = [0.0; OBS_DIM];
            v[0] = k as f64;
            v[9] = -(k as f64) * 0.1;
            norm.update(&v);
        }
        let meta = CheckpointMeta {
            step_count: 12345,
            seed: 9,
            config_hash: "deadbeef".into(),
            mask: ObservationMask::Ftm,
        };
        let dir = std::env::temp_dir().join("pih-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.ckpt");
        write_checkpoint(&path, &params, &norm, &meta).unwrap();
        let (p2, n2, m2) = read_checkpoint(&path).unwrap();
        assert_eq!(params, p2);
        assert_eq!(norm, n2);
        assert_eq!(meta.step_count, m2.step_count);
        assert_eq!(meta.config_hash, m2.config_hash);
    }

    #[test]
    fn rejects_garbage() {
        let dir = std::env::temp_dir().join("pih-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("garbage.ckpt");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        std::fs::write(sidecar_path(&path), br#"{"step_count":0,"seed":0,"config_hash":"x","mask":"VFTM"}"#)
            .unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(CheckpointError::BadMagic)
        ));
    }
}
