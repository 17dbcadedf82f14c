//! `RGR1` recording files, their `.labels` sidecars and dataset manifests.
//!
//! ```text
//! "RGR1" u16 version
//! f64 carrier_hz, bandwidth_hz, chirp_s, samples_per_chirp,
//!     chirps_per_cycle, pri_s, spacing_wavelengths
//! u32 cycle count
//! per cycle, [Rx0, Rx1, Rx2][chirp][sample] of (f32 re, f32 im)
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gesture_sim::GestureClass;
use crate::radar_model::{BeatFrame, RadarParams, NUM_ANTENNAS};

const MAGIC: &[u8; 4] = b"RGR1";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 7 * 8 + 4;

#[derive(Debug, Clone, PartialEq)]
pub struct RecordingFile {
    pub params: RadarParams,
    pub frames: Vec<BeatFrame>,
}

impl RecordingFile {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let p = &self.params;
        let per_cycle = NUM_ANTENNAS * p.cells();
        let mut b = Vec::with_capacity(HEADER_LEN + self.frames.len() * per_cycle * 8);
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        for v in [
            p.carrier_hz,
            p.bandwidth_hz,
            p.chirp_s,
            p.samples_per_chirp as f64,
            p.chirps_per_cycle as f64,
            p.pri_s,
            p.spacing_wavelengths,
        ] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&(self.frames.len() as u32).to_le_bytes());
        for f in &self.frames {
            f.check_shape(p)?;
            for c in &f.samples {
                b.extend_from_slice(&(c.re as f32).to_le_bytes());
                b.extend_from_slice(&(c.im as f32).to_le_bytes());
            }
        }
        Ok(b)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("recording header truncated at {} bytes", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format("not an RGR1 recording".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported recording version {version}")));
        }
        let f = |i: usize| f64::from_le_bytes(bytes[6 + 8 * i..14 + 8 * i].try_into().expect("8 bytes"));
        let as_count = |v: f64, name: &str| -> Result<usize> {
            if v.fract() != 0.0 || !(1.0..=65536.0).contains(&v) {
                return Err(Error::Format(format!("{name} {v} is not a valid count")));
            }
            Ok(v as usize)
        };
        let params = RadarParams {
            carrier_hz: f(0),
            bandwidth_hz: f(1),
            chirp_s: f(2),
            samples_per_chirp: as_count(f(3), "samples_per_chirp")?,
            chirps_per_cycle: as_count(f(4), "chirps_per_cycle")?,
            pri_s: f(5),
            spacing_wavelengths: f(6),
        };
        params.validate().map_err(|e| Error::Format(e.to_string()))?;
        let cycles = u32::from_le_bytes(bytes[62..66].try_into().expect("4 bytes")) as usize;
        let per_cycle = NUM_ANTENNAS * params.cells();
        let expect = cycles as u64 * per_cycle as u64 * 8;
        let have = (bytes.len() - HEADER_LEN) as u64;
        if have != expect {
            return Err(Error::Format(format!(
                "payload is {have} bytes, {cycles} cycles need {expect}"
            )));
        }
        let body = &bytes[HEADER_LEN..];
        let mut frames = Vec::with_capacity(cycles);
        for (i, chunk) in body.chunks_exact(per_cycle * 8).enumerate() {
            let samples = chunk
                .chunks_exact(8)
                .map(|c| {
                    Complex64::new(
                        f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64,
                        f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64,
                    )
                })
                .collect();
            frames.push(BeatFrame::from_samples(samples, &params, i as u64).map_err(|e| Error::Format(e.to_string()))?);
        }
        Ok(Self { params, frames })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// One labelled segment: class code and inclusive cycle span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSegment {
    pub class: GestureClass,
    pub start_cycle: u64,
    pub end_cycle: u64,
}

pub fn labels_path(recording: &Path) -> PathBuf {
    recording.with_extension("labels")
}

pub fn labels_to_text(labels: &[LabelSegment]) -> String {
    let mut s = String::new();
    for l in labels {
        let _ = writeln!(s, "{} {} {}", l.class.code(), l.start_cycle, l.end_cycle);
    }
    s
}

pub fn parse_labels(text: &str) -> Result<Vec<LabelSegment>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Format(format!("label line {}: {line:?}", n + 1));
        if f.len() != 3 {
            return Err(bad());
        }
        let code: u8 = f[0].parse().map_err(|_| bad())?;
        let start: u64 = f[1].parse().map_err(|_| bad())?;
        let end: u64 = f[2].parse().map_err(|_| bad())?;
        if end < start {
            return Err(bad());
        }
        out.push(LabelSegment {
            class: GestureClass::from_code(code)?,
            start_cycle: start,
            end_cycle: end,
        });
    }
    Ok(out)
}

pub fn read_labels(recording: &Path) -> Result<Vec<LabelSegment>> {
    let p = labels_path(recording);
    parse_labels(&std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Relative to the dataset directory.
    pub file: String,
    pub class: GestureClass,
    pub seed: u64,
    pub start_cycle: u64,
    pub end_cycle: u64,
    pub noise_std: f64,
}

pub const MANIFEST_NAME: &str = "manifest.txt";
const MANIFEST_HEADER: &str = "# file class seed start end noise_std";

pub fn manifest_to_text(entries: &[ManifestEntry]) -> String {
    let mut s = String::from(MANIFEST_HEADER);
    s.push('\n');
    for e in entries {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {:e}",
            e.file,
            e.class.name(),
            e.seed,
            e.start_cycle,
            e.end_cycle,
            e.noise_std
        );
    }
    s
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Format(format!("manifest line {}: {line:?}", n + 1));
        if f.len() != 6 {
            return Err(bad());
        }
        out.push(ManifestEntry {
            file: f[0].to_string(),
            class: GestureClass::from_name(f[1])?,
            seed: f[2].parse().map_err(|_| bad())?,
            start_cycle: f[3].parse().map_err(|_| bad())?,
            end_cycle: f[4].parse().map_err(|_| bad())?,
            noise_std: f[5].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let p = dir.join(MANIFEST_NAME);
    parse_manifest(&std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)
}
