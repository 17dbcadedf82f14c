//! Range-Doppler processing: windowed 2-D DFT per antenna, incoherent sum
//! across antennas and top-K cell extraction.
//!
//! Spectra are stored range-major, `[range bin p][Doppler index]`, with the
//! Doppler axis centre-shifted so index `I_c/2` is zero velocity. Signed
//! Doppler bins run from `-I_c/2` to `I_c/2 - 1`; positive bins approach.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::radar_model::{BeatFrame, RadarParams, NUM_ANTENNAS};

/// Half-sample-offset Hann taper, `0.5·(1 − cos(2π(n + ½)/N))`.
///
/// On the DFT grid it has the same three-tap spectrum as the periodic Hann
/// window, and it is mirror-symmetric about the centre, `w[n] = w[N−1−n]`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * (i as f64 + 0.5) / n as f64).cos()))
        .collect()
}

/// Separable 2-D window, `[fast-time u][slow-time v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window2d {
    pub fast: Vec<f64>,
    pub slow: Vec<f64>,
}

impl Window2d {
    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.fast[u] * self.slow[v]
    }

    /// `[I_s][I_c]` row-major matrix.
    pub fn to_matrix(&self) -> Vec<f64> {
        let mut m = Vec::with_capacity(self.fast.len() * self.slow.len());
        for &a in &self.fast {
            m.extend(self.slow.iter().map(|&b| a * b));
        }
        m
    }

    /// (Σw)² / Σw², the SNR gain of a windowed DFT for an on-grid tone.
    pub fn processing_gain(&self) -> f64 {
        let sum: f64 = self.fast.iter().sum::<f64>() * self.slow.iter().sum::<f64>();
        let sq: f64 = self.fast.iter().map(|w| w * w).sum::<f64>()
            * self.slow.iter().map(|w| w * w).sum::<f64>();
        sum * sum / sq
    }
}

/// Cached per `(I_s, I_c)`.
pub fn window2d(samples_per_chirp: usize, chirps: usize) -> Result<Arc<Window2d>> {
    if samples_per_chirp < 2 || chirps < 2 {
        return Err(Error::ParameterDomain(format!(
            "window dims must be >= 2, got {samples_per_chirp}x{chirps}"
        )));
    }
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Window2d>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    Ok(guard
        .entry((samples_per_chirp, chirps))
        .or_insert_with(|| {
            Arc::new(Window2d {
                fast: hann(samples_per_chirp),
                slow: hann(chirps),
            })
        })
        .clone())
}

/// Per-antenna complex spectra plus their incoherent magnitude sum.
#[derive(Debug, Clone, PartialEq)]
pub struct RdSpectrum {
    /// `[antenna][range bin][Doppler index]`.
    pub complex_maps: Vec<Complex64>,
    /// `[range bin][Doppler index]`, Σ_z |B_z|.
    pub magnitude_map: Vec<f64>,
    pub range_bins: usize,
    pub doppler_bins: usize,
    pub params: RadarParams,
    pub cycle_index: u64,
}

impl RdSpectrum {
    pub fn zero_doppler_index(&self) -> usize {
        self.doppler_bins / 2
    }

    pub fn signed_doppler(&self, index: usize) -> i32 {
        index as i32 - self.zero_doppler_index() as i32
    }

    pub fn doppler_index(&self, signed: i32) -> usize {
        (signed + self.zero_doppler_index() as i32) as usize
    }

    pub fn cell(&self, z: usize, range_bin: usize, doppler_index: usize) -> Complex64 {
        let plane = self.range_bins * self.doppler_bins;
        self.complex_maps[z * plane + range_bin * self.doppler_bins + doppler_index]
    }

    pub fn magnitude(&self, range_bin: usize, doppler_index: usize) -> f64 {
        self.magnitude_map[range_bin * self.doppler_bins + doppler_index]
    }

    pub fn antenna_map(&self, z: usize) -> &[Complex64] {
        let plane = self.range_bins * self.doppler_bins;
        &self.complex_maps[z * plane..(z + 1) * plane]
    }

    /// `(range bin, Doppler index)` of the largest magnitude cell.
    pub fn argmax(&self) -> (usize, usize) {
        let (i, _) = self
            .magnitude_map
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("spectrum is never empty");
        (i / self.doppler_bins, i % self.doppler_bins)
    }
}

/// Reusable FFT plans and window for one parameter set.
pub struct RdProcessor {
    params: RadarParams,
    window: Arc<Window2d>,
    fast_fft: Arc<dyn Fft<f64>>,
    slow_fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RdProcessor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RdProcessor").field("params", &self.params).finish()
    }
}

impl RdProcessor {
    pub fn new(params: RadarParams) -> Result<Self> {
        params.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            params,
            window: window2d(params.samples_per_chirp, params.chirps_per_cycle)?,
            fast_fft: planner.plan_fft_forward(params.samples_per_chirp),
            slow_fft: planner.plan_fft_forward(params.chirps_per_cycle),
        })
    }

    pub fn params(&self) -> &RadarParams {
        &self.params
    }

    pub fn window(&self) -> &Window2d {
        &self.window
    }

    pub fn spectrum(&self, frame: &BeatFrame) -> Result<RdSpectrum> {
        frame.check_shape(&self.params)?;
        let (ns, nc) = (self.params.samples_per_chirp, self.params.chirps_per_cycle);
        let norm = 1.0 / (ns * nc) as f64;
        let shift = nc / 2;
        let plane = ns * nc;
        let mut maps = vec![Complex64::new(0.0, 0.0); NUM_ANTENNAS * plane];
        let mut buf = vec![Complex64::new(0.0, 0.0); plane];
        let mut column = vec![Complex64::new(0.0, 0.0); nc];
        let mut scratch = vec![
            Complex64::new(0.0, 0.0);
            self.fast_fft
                .get_inplace_scratch_len()
                .max(self.slow_fft.get_inplace_scratch_len())
        ];

        for z in 0..NUM_ANTENNAS {
            for (v, (dst, src)) in buf
                .chunks_exact_mut(ns)
                .zip(frame.antenna(z).chunks_exact(ns))
                .enumerate()
            {
                let wv = self.window.slow[v];
                for ((d, s), wu) in dst.iter_mut().zip(src).zip(&self.window.fast) {
                    *d = s * (wu * wv);
                }
            }
            // fast time: rows are contiguous chirps
            self.fast_fft.process_with_scratch(&mut buf, &mut scratch);
            let out = &mut maps[z * plane..(z + 1) * plane];
            for p in 0..ns {
                for v in 0..nc {
                    column[v] = buf[v * ns + p];
                }
                self.slow_fft.process_with_scratch(&mut column, &mut scratch);
                let row = &mut out[p * nc..(p + 1) * nc];
                for (q, c) in column.iter().enumerate() {
                    row[(q + shift) % nc] = c * norm;
                }
            }
        }

        let mut magnitude = vec![0.0; plane];
        for z in 0..NUM_ANTENNAS {
            for (m, c) in magnitude.iter_mut().zip(&maps[z * plane..(z + 1) * plane]) {
                *m += c.norm();
            }
        }

        Ok(RdSpectrum {
            complex_maps: maps,
            magnitude_map: magnitude,
            range_bins: ns,
            doppler_bins: nc,
            params: self.params,
            cycle_index: frame.cycle_index,
        })
    }
}

/// One-shot convenience over [`RdProcessor::spectrum`].
pub fn rd_spectrum(frame: &BeatFrame, params: &RadarParams) -> Result<RdSpectrum> {
    RdProcessor::new(*params)?.spectrum(frame)
}

/// One extracted RD cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub range_bin: usize,
    /// Signed, zero-centred; positive = approaching.
    pub doppler_bin: i32,
    /// Incoherent magnitude A_k.
    pub magnitude: f64,
    /// Complex amplitude per antenna Rx0, Rx1, Rx2.
    pub amplitudes: [Complex64; NUM_ANTENNAS],
}

impl Point {
    pub fn range_m(&self, params: &RadarParams) -> f64 {
        params.range_bin_to_m(self.range_bin as f64)
    }

    pub fn radial_mps(&self, params: &RadarParams) -> f64 {
        params.doppler_bin_to_mps(self.doppler_bin as f64)
    }
}

/// The K strongest cells of one cycle, magnitude non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PointList {
    pub points: Vec<Point>,
    pub cycle_index: u64,
}

impl PointList {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Selection order: magnitude descending, then lower range bin, then lower
/// |Doppler|, then positive Doppler before negative.
fn selection_order(a: &(f64, usize, i32), b: &(f64, usize, i32)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.abs().cmp(&b.2.abs()))
        .then(b.2.cmp(&a.2))
}

pub fn top_k(spectrum: &RdSpectrum, k: usize) -> Result<PointList> {
    let cells = spectrum.range_bins * spectrum.doppler_bins;
    if k == 0 || k > cells {
        return Err(Error::ParameterDomain(format!("K={k} outside [1, {cells}]")));
    }
    let mut keyed: Vec<(f64, usize, i32)> = spectrum
        .magnitude_map
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let p = i / spectrum.doppler_bins;
            let q = i % spectrum.doppler_bins;
            (m, p, spectrum.signed_doppler(q))
        })
        .collect();
    if k < cells {
        keyed.select_nth_unstable_by(k - 1, selection_order);
        keyed.truncate(k);
    }
    keyed.sort_unstable_by(selection_order);

    let points = keyed
        .into_iter()
        .map(|(magnitude, p, d)| {
            let q = spectrum.doppler_index(d);
            Point {
                range_bin: p,
                doppler_bin: d,
                magnitude,
                amplitudes: std::array::from_fn(|z| spectrum.cell(z, p, q)),
            }
        })
        .collect();
    Ok(PointList {
        points,
        cycle_index: spectrum.cycle_index,
    })
}
