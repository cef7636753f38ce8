//! Binary charge files (`.hchg`) and their JSON sidecars.
//!
//! Layout, all little-endian: the magic `HCHG`, a `u32` format version, `u32`
//! dimension, `u32` depth, an `f64` exponent hint (NaN when absent), then the
//! `2^{Nd}` leaf values in cube-index order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_depth, GridCharge};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HCHG";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sidecar {
    pub format: String,
    pub version: u32,
    pub d: usize,
    pub depth: u32,
    pub gamma_hint: Option<f64>,
    pub sha256: String,
    pub provenance: serde_json::Value,
}

pub fn encode(w: &GridCharge) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * w.leaves().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(w.dim() as u32).to_le_bytes());
    out.extend_from_slice(&w.depth().to_le_bytes());
    out.extend_from_slice(&w.gamma_hint().unwrap_or(f64::NAN).to_le_bytes());
    for v in w.leaves() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode(bytes: &[u8]) -> Result<GridCharge> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let d = u32_at(bytes, 8) as usize;
    let n = u32_at(bytes, 12);
    check_depth(d, n).map_err(|e| Error::Format(e.to_string()))?;
    let gamma = f64_at(bytes, 16);
    let count = 1usize << (n as usize * d);
    if bytes.len() != HEADER_LEN + 8 * count {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            8 * count,
            bytes.len() - HEADER_LEN
        )));
    }
    let leaves = (0..count)
        .map(|i| f64_at(bytes, HEADER_LEN + 8 * i))
        .collect();
    Ok(GridCharge::new(d, n, leaves)?.with_gamma_hint((!gamma.is_nan()).then_some(gamma)))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the charge and a sidecar recording its checksum and `provenance`.
pub fn write_charge(path: &Path, w: &GridCharge, provenance: serde_json::Value) -> Result<Sidecar> {
    let bytes = encode(w);
    let side = Sidecar {
        format: "hchg".into(),
        version: VERSION,
        d: w.dim(),
        depth: w.depth(),
        gamma_hint: w.gamma_hint(),
        sha256: sha256_hex(&bytes),
        provenance,
    };
    fs::write(path, &bytes)?;
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&side)?)?;
    Ok(side)
}

/// Reads a charge; when a sidecar exists its checksum and shape are verified.
pub fn read_charge(path: &Path) -> Result<GridCharge> {
    let bytes = fs::read(path)?;
    let w = decode(&bytes)?;
    let sp = sidecar_path(path);
    if sp.exists() {
        let side: Sidecar = serde_json::from_slice(&fs::read(sp)?)?;
        if side.sha256 != sha256_hex(&bytes) {
            return Err(Error::Format("checksum does not match sidecar".into()));
        }
        if side.d != w.dim() || side.depth != w.depth() {
            return Err(Error::Format("sidecar shape does not match header".into()));
        }
    }
    Ok(w)
}
