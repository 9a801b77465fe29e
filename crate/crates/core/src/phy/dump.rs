//! Raw antenna sample dumps.
//!
//! One file per antenna, all little-endian:
//!
//! | offset | type       | field                          |
//! |--------|------------|--------------------------------|
//! | 0      | `[u8; 8]`  | magic `MXSAMP01`               |
//! | 8      | `f64`      | sample rate (Hz)               |
//! | 16     | `u64`      | sample count `n`               |
//! | 24     | `2n x f64` | interleaved `re, im` pairs     |

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phy::AntennaFrame;

pub const MAGIC: &[u8; 8] = b"MXSAMP01";

pub fn encode_stream(samples: &[Complex64], sample_rate: f64) -> Vec<u8> {
    let mut buf = Vec::with_capacity(24 + 16 * samples.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&sample_rate.to_le_bytes());
    buf.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for z in samples {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    buf
}

pub fn decode_stream(bytes: &[u8]) -> Result<(f64, Vec<Complex64>)> {
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err(Error::Io("not a sample dump (bad magic or short header)".into()));
    }
    let word = |at: usize| -> [u8; 8] { bytes[at..at + 8].try_into().expect("8-byte slice") };
    let rate = f64::from_le_bytes(word(8));
    let n = u64::from_le_bytes(word(16)) as usize;
    if bytes.len() != 24 + 16 * n {
        return Err(Error::Io(format!("dump declares {n} samples but holds {} bytes of payload", bytes.len() - 24)));
    }
    let samples = (0..n)
        .map(|i| Complex64::new(f64::from_le_bytes(word(24 + 16 * i)), f64::from_le_bytes(word(32 + 16 * i))))
        .collect();
    Ok((rate, samples))
}

/// Writes `<prefix>_ant<k>.bin` for each antenna and returns the paths.
pub fn write_frame(dir: &Path, prefix: &str, frame: &AntennaFrame) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    frame
        .streams
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let path = dir.join(format!("{prefix}_ant{k}.bin"));
            fs::write(&path, encode_stream(s, frame.sample_rate))?;
            Ok(path)
        })
        .collect()
}
