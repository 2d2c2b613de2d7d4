//! Trajectory records: a little-endian binary file plus a JSON sidecar.
//!
//! Layout of the binary record:
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | magic `SPBTRAJ\0`                         |
//! | 8      | 2    | format version (u16)                      |
//! | 10     | 2    | flags (u16), bit 0: output-field columns  |
//! | 12     | 8    | seed (u64)                                |
//! | 20     | 8    | integrator step dt (f64, s)               |
//! | 28     | 8    | sample interval (f64, s)                  |
//! | 36     | 8    | time of the first sample (f64, s)         |
//! | 44     | 8    | number of samples N (u64)                 |
//! | 52     | 32   | SHA-256 of the generating configuration   |
//! | 84     | ...  | N rows of x, p, Re a, Im a [, Re a_out, Im a_out] |

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SPBTRAJ\0";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 84;
pub const FLAG_OUTPUT_FIELD: u16 = 1;

/// Uniformly sampled simulator output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    /// Integrator step (s).
    pub dt: f64,
    /// Spacing of the stored samples (s).
    pub sample_interval: f64,
    /// Time of the first stored sample (s).
    pub t0: f64,
    /// Position relative to the antinode of the occupied well (m).
    pub x: Vec<f64>,
    /// Momentum (kg·m/s).
    pub p: Vec<f64>,
    /// Intracavity amplitude, normalized so that `|a|²` is the photon number.
    pub a: Vec<Complex64>,
    /// Output field `a_out − √κ a` averaged over each sample interval, when recorded.
    pub a_out: Option<Vec<Complex64>>,
    /// Hex SHA-256 of the configuration that produced the run.
    pub config_hash: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.sample_interval
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.sample_interval
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let n = self.len();
        if self.p.len() != n || self.a.len() != n || self.a_out.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::invalid("trajectory", "column lengths differ"));
        }
        let hash = hex::decode(&self.config_hash)
            .ok()
            .filter(|h| h.len() == 32)
            .ok_or_else(|| Error::invalid("config_hash", "expected 64 hex digits"))?;
        let cols = if self.a_out.is_some() { 6 } else { 4 };
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * cols * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let flags = if self.a_out.is_some() { FLAG_OUTPUT_FIELD } else { 0 };
        out.extend_from_slice(&flags.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.dt.to_le_bytes());
        out.extend_from_slice(&self.sample_interval.to_le_bytes());
        out.extend_from_slice(&self.t0.to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&hash);
        for i in 0..n {
            for v in [self.x[i], self.p[i], self.a[i].re, self.a[i].im] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            if let Some(a_out) = &self.a_out {
                out.extend_from_slice(&a_out[i].re.to_le_bytes());
                out.extend_from_slice(&a_out[i].im.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parses a binary record, rejecting truncated, oversized or non-finite data.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Parse(format!("trajectory header needs {HEADER_LEN} bytes, got {}", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Parse("bad trajectory magic".into()));
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u16_at(8);
        if version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported trajectory version {version}")));
        }
        let flags = u16_at(10);
        if flags & !FLAG_OUTPUT_FIELD != 0 {
            return Err(Error::Parse(format!("unknown trajectory flags {flags:#x}")));
        }
        let seed = u64_at(12);
        let (dt, sample_interval, t0) = (f64_at(20), f64_at(28), f64_at(36));
        if !(dt > 0.0) || !(sample_interval > 0.0) || !t0.is_finite() || !dt.is_finite() || !sample_interval.is_finite()
        {
            return Err(Error::Parse("non-positive or non-finite time step".into()));
        }
        let n = u64_at(44);
        let cols: u64 = if flags & FLAG_OUTPUT_FIELD != 0 { 6 } else { 4 };
        let payload = (bytes.len() - HEADER_LEN) as u64;
        let expected = n.checked_mul(8 * cols);
        if expected != Some(payload) {
            return Err(Error::Parse(format!("payload of {payload} bytes does not hold {n} rows of {cols} values")));
        }
        let config_hash = hex::encode(&bytes[52..84]);
        let n = n as usize;
        let mut x = Vec::with_capacity(n);
        let mut p = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        let mut a_out = (cols == 6).then(|| Vec::with_capacity(n));
        let mut vals = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        for _ in 0..n {
            let row: Vec<f64> = vals.by_ref().take(cols as usize).collect();
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse("non-finite trajectory value".into()));
            }
            x.push(row[0]);
            p.push(row[1]);
            a.push(Complex64::new(row[2], row[3]));
            if let Some(v) = a_out.as_mut() {
                v.push(Complex64::new(row[4], row[5]));
            }
        }
        Ok(Self { seed, dt, sample_interval, t0, x, p, a, a_out, config_hash })
    }

    pub fn sidecar(&self, config: &impl Serialize) -> Result<Sidecar> {
        let mut columns = vec!["x_m", "p_kg_m_per_s", "re_a", "im_a"];
        if self.a_out.is_some() {
            columns.extend(["re_a_out", "im_a_out"]);
        }
        Ok(Sidecar {
            format: "splitband-trajectory".into(),
            version: FORMAT_VERSION,
            seed: self.seed,
            dt_s: self.dt,
            sample_interval_s: self.sample_interval,
            t0_s: self.t0,
            samples: self.len() as u64,
            config_hash: self.config_hash.clone(),
            columns: columns.into_iter().map(String::from).collect(),
            config: serde_json::to_value(config)?,
        })
    }

    /// Writes `<stem>.bin` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str, config: &impl Serialize) -> Result<Vec<std::path::PathBuf>> {
        let bin = dir.join(format!("{stem}.bin"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&bin, self.encode()?)?;
        std::fs::write(&json, serde_json::to_string_pretty(&self.sidecar(config)?)?)?;
        Ok(vec![bin, json])
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    /// Plain-text export, intended for short runs.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t_s,x_m,p_kg_m_per_s,re_a,im_a")?;
        for i in 0..self.len() {
            writeln!(w, "{:e},{:e},{:e},{:e},{:e}", self.time(i), self.x[i], self.p[i], self.a[i].re, self.a[i].im)?;
        }
        Ok(())
    }
}

/// JSON description stored next to each binary record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub version: u16,
    pub seed: u64,
    pub dt_s: f64,
    pub sample_interval_s: f64,
    pub t0_s: f64,
    pub samples: u64,
    pub config_hash: String,
    pub columns: Vec<String>,
    pub config: serde_json::Value,
}
