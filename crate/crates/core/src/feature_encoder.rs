//! Per-cycle point features and the rolling IL × K × 5 feature cube.
//!
//! Channel order is range bin, Doppler bin, azimuth, elevation, magnitude.

use std::collections::VecDeque;
use std::f32::consts::FRAC_PI_2;

use crate::aoa::PointAngles;
use crate::error::{Error, Result};
use crate::radar_model::RadarParams;
use crate::rd_processing::PointList;

pub const CHANNELS: usize = 5;
pub const DEFAULT_K: usize = 25;
pub const DEFAULT_IL: usize = 40;
/// Normalized magnitudes are clipped to `[0, MAGNITUDE_CLIP]`.
pub const MAGNITUDE_CLIP: f32 = 2.0;

pub const CH_RANGE: usize = 0;
pub const CH_DOPPLER: usize = 1;
pub const CH_AZIMUTH: usize = 2;
pub const CH_ELEVATION: usize = 3;
pub const CH_MAGNITUDE: usize = 4;

/// Features of one cycle: K rows in top-K order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub rows: Vec<[f32; CHANNELS]>,
    pub cycle_index: u64,
}

impl FeatureFrame {
    pub fn zeros(k: usize, cycle_index: u64) -> Self {
        Self {
            rows: vec![[0.0; CHANNELS]; k],
            cycle_index,
        }
    }
}

pub fn encode_cycle(points: &PointList, angles: &[PointAngles]) -> Result<FeatureFrame> {
    if points.len() != angles.len() {
        return Err(Error::Structural(format!(
            "{} points but {} angle pairs",
            points.len(),
            angles.len()
        )));
    }
    let rows = points
        .points
        .iter()
        .zip(angles)
        .map(|(p, a)| {
            [
                p.range_bin as f32,
                p.doppler_bin as f32,
                a.azimuth_rad as f32,
                a.elevation_rad as f32,
                p.magnitude as f32,
            ]
        })
        .collect();
    Ok(FeatureFrame {
        rows,
        cycle_index: points.cycle_index,
    })
}

/// Per-channel affine map `x' = x·scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub scale: [f32; CHANNELS],
    pub offset: [f32; CHANNELS],
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            scale: [1.0; CHANNELS],
            offset: [0.0; CHANNELS],
        }
    }

    /// Fixed map from physical ranges: range bin to [0, 1], Doppler bin and
    /// both angles to [−1, 1], magnitude divided by a training-set reference
    /// (its 99th percentile).
    pub fn physical(params: &RadarParams, magnitude_reference: f32) -> Result<Self> {
        if !(magnitude_reference.is_finite() && magnitude_reference > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "magnitude reference {magnitude_reference} must be > 0"
            )));
        }
        Ok(Self {
            scale: [
                1.0 / (params.samples_per_chirp - 1) as f32,
                1.0 / (params.chirps_per_cycle / 2) as f32,
                1.0 / FRAC_PI_2,
                1.0 / FRAC_PI_2,
                1.0 / magnitude_reference,
            ],
            offset: [0.0; CHANNELS],
        })
    }

    pub fn apply(&self, channel: usize, value: f32) -> f32 {
        let y = value * self.scale[channel] + self.offset[channel];
        if channel == CH_MAGNITUDE {
            y.clamp(0.0, MAGNITUDE_CLIP)
        } else {
            y
        }
    }

    pub fn invert(&self, channel: usize, value: f32) -> f32 {
        (value - self.offset[channel]) / self.scale[channel]
    }

    pub fn normalize_frame(&self, frame: &FeatureFrame) -> FeatureFrame {
        FeatureFrame {
            rows: frame
                .rows
                .iter()
                .map(|r| std::array::from_fn(|c| self.apply(c, r[c])))
                .collect(),
            cycle_index: frame.cycle_index,
        }
    }
}

/// Value at quantile `q` (nearest rank) over every magnitude in `frames`.
pub fn magnitude_quantile<'a>(frames: impl IntoIterator<Item = &'a FeatureFrame>, q: f64) -> Option<f32> {
    let mut mags: Vec<f32> = frames
        .into_iter()
        .flat_map(|f| f.rows.iter().map(|r| r[CH_MAGNITUDE]))
        .collect();
    if mags.is_empty() {
        return None;
    }
    let rank = ((q * mags.len() as f64).ceil() as usize).clamp(1, mags.len()) - 1;
    let (_, v, _) = mags.select_nth_unstable_by(rank, |a, b| a.total_cmp(b));
    Some(*v)
}

/// `[IL][K][5]` gesture profile; row `l` is cycle `end_cycle − (IL−1) + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCube {
    pub il: usize,
    pub k: usize,
    pub data: Vec<f32>,
    pub end_cycle: u64,
    pub normalization: Normalization,
    pub normalized: bool,
    /// Leading rows were zero-filled because the stream had not yet produced
    /// IL cycles. Padded cubes are never classified.
    pub padded: bool,
}

const CUBE_MAGIC: &[u8; 4] = b"RGFC";
const CUBE_VERSION: u16 = 1;
const DTYPE_F32_LE: u8 = 1;
const CUBE_HEADER_LEN: usize = 4 + 2 + 2 + 12 + 1 + 1;

impl FeatureCube {
    pub fn zeros(il: usize, k: usize) -> Self {
        Self {
            il,
            k,
            data: vec![0.0; il * k * CHANNELS],
            end_cycle: il.saturating_sub(1) as u64,
            normalization: Normalization::identity(),
            normalized: false,
            padded: false,
        }
    }

    pub fn get(&self, l: usize, k: usize, ch: usize) -> f32 {
        self.data[(l * self.k + k) * CHANNELS + ch]
    }

    pub fn set(&mut self, l: usize, k: usize, ch: usize, v: f32) {
        self.data[(l * self.k + k) * CHANNELS + ch] = v;
    }

    /// Builds a cube from `frames` (oldest first), optionally normalized.
    pub fn from_frames(frames: &[FeatureFrame], k: usize, norm: Option<&Normalization>) -> Result<Self> {
        let il = frames.len();
        let mut cube = Self::zeros(il, k);
        for (l, f) in frames.iter().enumerate() {
            if f.rows.len() != k {
                return Err(Error::Structural(format!("frame has {} rows, want {k}", f.rows.len())));
            }
            if l > 0 && f.cycle_index != frames[l - 1].cycle_index + 1 {
                return Err(Error::Ordering(format!(
                    "cube rows must be consecutive cycles, {} follows {}",
                    f.cycle_index,
                    frames[l - 1].cycle_index
                )));
            }
            for (kk, row) in f.rows.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    let v = norm.map_or(v, |n| n.apply(c, v));
                    cube.set(l, kk, c, v);
                }
            }
        }
        cube.end_cycle = frames.last().map_or(0, |f| f.cycle_index);
        if let Some(n) = norm {
            cube.normalization = *n;
            cube.normalized = true;
        }
        Ok(cube)
    }

    /// Reverses the recorded affine map. Clipped magnitudes do not round-trip.
    pub fn denormalized(&self) -> Self {
        if !self.normalized {
            return self.clone();
        }
        let mut out = self.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            *v = self.normalization.invert(i % CHANNELS, *v);
        }
        out.normalized = false;
        out.normalization = Normalization::identity();
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CUBE_HEADER_LEN + self.data.len() * 4 + CHANNELS * 8);
        out.extend_from_slice(CUBE_MAGIC);
        out.extend_from_slice(&CUBE_VERSION.to_le_bytes());
        out.extend_from_slice(&3u16.to_le_bytes());
        for d in [self.il, self.k, CHANNELS] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(DTYPE_F32_LE);
        out.push(self.normalized as u8);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for c in 0..CHANNELS {
            out.extend_from_slice(&self.normalization.scale[c].to_le_bytes());
            out.extend_from_slice(&self.normalization.offset[c].to_le_bytes());
        }
        out
    }

    /// Parses an `RGFC` file. The format carries no cycle stamp, so the cube
    /// comes back with `end_cycle = IL − 1`.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |m: &str| Error::Format(format!("feature cube: {m}"));
        if bytes.len() < CUBE_HEADER_LEN {
            return Err(fmt("truncated header"));
        }
        if &bytes[0..4] != CUBE_MAGIC {
            return Err(fmt("bad magic"));
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        if u16_at(4) != CUBE_VERSION {
            return Err(fmt(&format!("unsupported version {}", u16_at(4))));
        }
        if u16_at(6) != 3 {
            return Err(fmt("expected 3 dimensions"));
        }
        let (il, k, ch) = (u32_at(8), u32_at(12), u32_at(16));
        if ch != CHANNELS || il == 0 || k == 0 {
            return Err(fmt(&format!("bad shape {il}x{k}x{ch}")));
        }
        if bytes[20] != DTYPE_F32_LE {
            return Err(fmt(&format!("unknown dtype {}", bytes[20])));
        }
        let normalized = match bytes[21] {
            0 => false,
            1 => true,
            f => return Err(fmt(&format!("bad normalized flag {f}"))),
        };
        let n = il
            .checked_mul(k)
            .and_then(|x| x.checked_mul(CHANNELS))
            .ok_or_else(|| fmt("shape overflow"))?;
        let expected = CUBE_HEADER_LEN + n * 4 + CHANNELS * 8;
        if bytes.len() != expected {
            return Err(fmt(&format!("length {} != expected {expected}", bytes.len())));
        }
        let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let data = (0..n).map(|i| f32_at(CUBE_HEADER_LEN + 4 * i)).collect();
        let rec = CUBE_HEADER_LEN + 4 * n;
        let mut normalization = Normalization::identity();
        for c in 0..CHANNELS {
            normalization.scale[c] = f32_at(rec + 8 * c);
            normalization.offset[c] = f32_at(rec + 8 * c + 4);
        }
        Ok(Self {
            il,
            k,
            data,
            end_cycle: (il - 1) as u64,
            normalization,
            normalized,
            padded: false,
        })
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Ring buffer of the most recent frames.
///
/// Holds `il + lag` frames so a detector that decides `lag` cycles late can
/// still snapshot the window ending at the cycle it decided about.
#[derive(Debug, Clone)]
pub struct FeatureEncoder {
    il: usize,
    k: usize,
    capacity: usize,
    frames: VecDeque<FeatureFrame>,
    normalization: Normalization,
}

impl FeatureEncoder {
    pub fn new(il: usize, k: usize, normalization: Normalization) -> Self {
        Self::with_lag(il, k, 0, normalization)
    }

    pub fn with_lag(il: usize, k: usize, lag: usize, normalization: Normalization) -> Self {
        Self {
            il,
            k,
            capacity: il + lag,
            frames: VecDeque::with_capacity(il + lag + 1),
            normalization,
        }
    }

    pub fn il(&self) -> usize {
        self.il
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn push(&mut self, frame: FeatureFrame) -> Result<()> {
        if frame.rows.len() != self.k {
            return Err(Error::Structural(format!(
                "frame has {} rows, encoder expects {}",
                frame.rows.len(),
                self.k
            )));
        }
        if let Some(last) = self.frames.back() {
            if frame.cycle_index <= last.cycle_index {
                return Err(Error::Ordering(format!(
                    "cycle {} pushed after {}",
                    frame.cycle_index, last.cycle_index
                )));
            }
        }
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        Ok(())
    }

    /// Cube over the most recent IL frames.
    pub fn snapshot(&self, normalize: bool) -> Result<FeatureCube> {
        let last = self
            .frames
            .back()
            .ok_or_else(|| Error::NotReady("no frames pushed".into()))?
            .cycle_index;
        self.snapshot_ending_at(last, normalize)
    }

    /// Cube whose last row is `end_cycle`.
    pub fn snapshot_ending_at(&self, end_cycle: u64, normalize: bool) -> Result<FeatureCube> {
        let pos = self
            .frames
            .iter()
            .position(|f| f.cycle_index == end_cycle)
            .ok_or_else(|| Error::NotReady(format!("cycle {end_cycle} not buffered")))?;
        if pos + 1 < self.il {
            return Err(Error::NotReady(format!(
                "{} of {} cycles buffered before {end_cycle}",
                pos + 1,
                self.il
            )));
        }
        let window: Vec<FeatureFrame> = self.frames.range(pos + 1 - self.il..=pos).cloned().collect();
        FeatureCube::from_frames(&window, self.k, normalize.then_some(&self.normalization))
    }

    /// Like [`snapshot`](Self::snapshot) but zero-fills missing leading rows
    /// during stream start-up. The result is flagged `padded`.
    pub fn snapshot_padded(&self, normalize: bool) -> Result<FeatureCube> {
        if self.frames.len() >= self.il {
            return self.snapshot(normalize);
        }
        let last = self
            .frames
            .back()
            .ok_or_else(|| Error::NotReady("no frames pushed".into()))?
            .cycle_index;
        let missing = self.il - self.frames.len();
        let first = self.frames.front().map_or(0, |f| f.cycle_index);
        if first < missing as u64 {
            return Err(Error::NotReady("not enough cycle history to pad".into()));
        }
        let mut window: Vec<FeatureFrame> = (0..missing)
            .map(|i| FeatureFrame::zeros(self.k, first - missing as u64 + i as u64))
            .collect();
        window.extend(self.frames.iter().cloned());
        let mut cube = FeatureCube::from_frames(&window, self.k, normalize.then_some(&self.normalization))?;
        cube.end_cycle = last;
        cube.padded = true;
        Ok(cube)
    }
}
