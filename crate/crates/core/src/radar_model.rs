//! Radar constants, derived resolutions and the point-scatterer beat-signal
//! synthesizer.
//!
//! A measurement cycle of receive antenna `z` is modelled as
//!
//! ```text
//! b_z(u, v) = Σ_i a_i · exp{j2π(f_r,i·u·T_s − f_D,i·v·T_c)} · exp{jζ_z,i}
//! ```
//!
//! with `f_r = 2·(f_B/T_c)·(r/c)`, `f_D = 2·v_r/λ` and `T_s = T_c/I_s`. The
//! array phase `ζ` is referenced to Rx1, the corner of the L-shaped array:
//! Rx2 lags by `2π·(d/λ)·sin φ` (azimuth pair) and Rx0 lags by
//! `2π·(d/λ)·sin θ` (elevation pair).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Receive antennas Rx0, Rx1, Rx2.
pub const NUM_ANTENNAS: usize = 3;

/// Waveform and array constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarParams {
    /// Carrier frequency f_c, Hz.
    pub carrier_hz: f64,
    /// Sweep bandwidth f_B, Hz.
    pub bandwidth_hz: f64,
    /// Chirp duration T_c, s.
    pub chirp_s: f64,
    /// Samples per chirp I_s.
    pub samples_per_chirp: usize,
    /// Chirps per measurement cycle I_c.
    pub chirps_per_cycle: usize,
    /// Pulse repetition interval (cycle period), s.
    pub pri_s: f64,
    /// Receive-antenna spacing d/λ.
    pub spacing_wavelengths: f64,
}

impl Default for RadarParams {
    /// The 60 GHz desk-scale configuration: 5 GHz sweep, 432 µs chirps,
    /// 32 × 32 samples, 34 ms cycle, half-wavelength spacing.
    fn default() -> Self {
        Self {
            carrier_hz: 60.0e9,
            bandwidth_hz: 5.0e9,
            chirp_s: 432.0e-6,
            samples_per_chirp: 32,
            chirps_per_cycle: 32,
            pri_s: 34.0e-3,
            spacing_wavelengths: 0.5,
        }
    }
}

/// Range and radial-velocity cell sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolutions {
    /// Δr, m.
    pub range_m: f64,
    /// Δv_r, m/s.
    pub velocity_mps: f64,
}

impl RadarParams {
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.carrier_hz) {
            return Err(domain(format!("carrier {} Hz must be > 0", self.carrier_hz)));
        }
        if !finite_pos(self.bandwidth_hz) {
            return Err(domain(format!("bandwidth {} Hz must be > 0", self.bandwidth_hz)));
        }
        if !finite_pos(self.chirp_s) {
            return Err(domain(format!("chirp duration {} s must be > 0", self.chirp_s)));
        }
        if self.samples_per_chirp < 2 || self.chirps_per_cycle < 2 {
            return Err(domain(format!(
                "need at least 2 samples and 2 chirps, got {}x{}",
                self.samples_per_chirp, self.chirps_per_cycle
            )));
        }
        if !self.pri_s.is_finite() || self.pri_s < self.chirp_s * self.chirps_per_cycle as f64 {
            return Err(domain(format!(
                "PRI {} s shorter than the chirp train {} s",
                self.pri_s,
                self.chirp_s * self.chirps_per_cycle as f64
            )));
        }
        if !finite_pos(self.spacing_wavelengths) {
            return Err(domain("antenna spacing must be > 0".into()));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn sample_period_s(&self) -> f64 {
        self.chirp_s / self.samples_per_chirp as f64
    }

    /// Δr = c/(2 f_B), Δv_r = (λ/2)/(I_c T_c).
    pub fn resolutions(&self) -> Result<Resolutions> {
        self.validate()?;
        Ok(Resolutions {
            range_m: self.range_resolution_m(),
            velocity_mps: self.velocity_resolution_mps(),
        })
    }

    pub fn range_resolution_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    pub fn velocity_resolution_mps(&self) -> f64 {
        self.wavelength_m() / 2.0 / (self.chirps_per_cycle as f64 * self.chirp_s)
    }

    /// Largest unambiguous range, I_s·Δr.
    pub fn max_range_m(&self) -> f64 {
        self.samples_per_chirp as f64 * self.range_resolution_m()
    }

    /// Largest unambiguous |v_r|, I_c·Δv_r/2.
    pub fn max_speed_mps(&self) -> f64 {
        self.chirps_per_cycle as f64 * self.velocity_resolution_mps() / 2.0
    }

    /// Beat-signal length of one antenna, I_c·I_s.
    pub fn cells(&self) -> usize {
        self.samples_per_chirp * self.chirps_per_cycle
    }

    /// Range bin p → metres.
    pub fn range_bin_to_m(&self, bin: f64) -> f64 {
        bin * self.range_resolution_m()
    }

    /// Signed, zero-centred Doppler bin → radial velocity. Positive bins are
    /// approaching targets, so the velocity (positive = receding) is negated.
    pub fn doppler_bin_to_mps(&self, bin: f64) -> f64 {
        -bin * self.velocity_resolution_mps()
    }

    pub fn mps_to_doppler_bin(&self, v_r: f64) -> f64 {
        -v_r / self.velocity_resolution_mps()
    }

    /// Range (f_r) and Doppler (f_D) beat frequencies of a scatterer.
    pub fn scatter_frequencies(&self, range_m: f64, radial_mps: f64) -> Result<(f64, f64)> {
        self.validate()?;
        check_range(self, range_m)?;
        check_speed(self, radial_mps)?;
        Ok(self.frequencies_unchecked(range_m, radial_mps))
    }

    fn frequencies_unchecked(&self, range_m: f64, radial_mps: f64) -> (f64, f64) {
        let f_r = 2.0 * (self.bandwidth_hz / self.chirp_s) * (range_m / SPEED_OF_LIGHT);
        let f_d = 2.0 * radial_mps / self.wavelength_m();
        (f_r, f_d)
    }
}

fn domain(msg: String) -> Error {
    Error::ParameterDomain(msg)
}

fn check_range(params: &RadarParams, r: f64) -> Result<()> {
    let max = params.max_range_m();
    if !(r.is_finite() && (0.0..=max).contains(&r)) {
        return Err(domain(format!("range {r} m outside [0, {max}]")));
    }
    Ok(())
}

fn check_speed(params: &RadarParams, v: f64) -> Result<()> {
    let max = params.max_speed_mps();
    if !(v.is_finite() && v.abs() <= max) {
        return Err(domain(format!("radial velocity {v} m/s exceeds ±{max}")));
    }
    Ok(())
}

/// One dominant point scatterer of the hand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub range_m: f64,
    /// Positive = receding.
    pub radial_mps: f64,
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
}

impl Scatterer {
    pub fn validate(&self, params: &RadarParams) -> Result<()> {
        check_range(params, self.range_m)?;
        check_speed(params, self.radial_mps)?;
        for (name, a) in [("azimuth", self.azimuth_rad), ("elevation", self.elevation_rad)] {
            if !(a.is_finite() && a.abs() < PI / 2.0) {
                return Err(domain(format!("{name} {a} rad outside (-π/2, π/2)")));
            }
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(domain(format!("amplitude {} must be finite and >= 0", self.amplitude)));
        }
        if !self.phase_rad.is_finite() {
            return Err(domain("phase must be finite".into()));
        }
        Ok(())
    }

    /// Array phase of antenna `z` relative to Rx1.
    pub fn antenna_phase(&self, z: usize, spacing_wavelengths: f64) -> f64 {
        let k = 2.0 * PI * spacing_wavelengths;
        match z {
            0 => -k * self.elevation_rad.sin(),
            2 => -k * self.azimuth_rad.sin(),
            _ => 0.0,
        }
    }
}

/// One measurement cycle of complex beat samples, laid out
/// `[antenna][chirp][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatFrame {
    pub samples: Vec<Complex64>,
    pub chirps: usize,
    pub samples_per_chirp: usize,
    pub cycle_index: u64,
}

impl BeatFrame {
    pub fn zeros(params: &RadarParams, cycle_index: u64) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); NUM_ANTENNAS * params.cells()],
            chirps: params.chirps_per_cycle,
            samples_per_chirp: params.samples_per_chirp,
            cycle_index,
        }
    }

    pub fn from_samples(
        samples: Vec<Complex64>,
        params: &RadarParams,
        cycle_index: u64,
    ) -> Result<Self> {
        let frame = Self {
            samples,
            chirps: params.chirps_per_cycle,
            samples_per_chirp: params.samples_per_chirp,
            cycle_index,
        };
        frame.check_shape(params)?;
        Ok(frame)
    }

    pub fn check_shape(&self, params: &RadarParams) -> Result<()> {
        let expected = NUM_ANTENNAS * params.cells();
        if self.chirps != params.chirps_per_cycle
            || self.samples_per_chirp != params.samples_per_chirp
            || self.samples.len() != expected
        {
            return Err(Error::Structural(format!(
                "frame is {}x{}x{} ({} values), params expect {}x{}x{}",
                NUM_ANTENNAS,
                self.chirps,
                self.samples_per_chirp,
                self.samples.len(),
                NUM_ANTENNAS,
                params.chirps_per_cycle,
                params.samples_per_chirp
            )));
        }
        if self.samples.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Structural("frame contains non-finite samples".into()));
        }
        Ok(())
    }

    pub fn antenna(&self, z: usize) -> &[Complex64] {
        let n = self.chirps * self.samples_per_chirp;
        &self.samples[z * n..(z + 1) * n]
    }

    pub fn at(&self, z: usize, chirp: usize, sample: usize) -> Complex64 {
        self.antenna(z)[chirp * self.samples_per_chirp + sample]
    }
}

/// Synthesizes one measurement cycle. Noise is circular complex Gaussian with
/// total variance `noise_std²` per sample, independent across antennas.
pub fn synth_beat_frame(
    scatterers: &[Scatterer],
    params: &RadarParams,
    noise_std: f64,
    rng_seed: u64,
) -> Result<BeatFrame> {
    synth_beat_frame_at(scatterers, params, noise_std, rng_seed, 0)
}

pub fn synth_beat_frame_at(
    scatterers: &[Scatterer],
    params: &RadarParams,
    noise_std: f64,
    rng_seed: u64,
    cycle_index: u64,
) -> Result<BeatFrame> {
    params.validate()?;
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(domain(format!("noise_std {noise_std} must be finite and >= 0")));
    }
    let (ns, nc) = (params.samples_per_chirp, params.chirps_per_cycle);
    let mut frame = BeatFrame::zeros(params, cycle_index);
    let ts = params.sample_period_s();

    let mut fast = vec![Complex64::new(0.0, 0.0); ns];
    let mut slow = vec![Complex64::new(0.0, 0.0); nc];
    for s in scatterers {
        s.validate(params)?;
        let (f_r, f_d) = params.frequencies_unchecked(s.range_m, s.radial_mps);
        for (u, f) in fast.iter_mut().enumerate() {
            *f = Complex64::from_polar(1.0, 2.0 * PI * f_r * u as f64 * ts);
        }
        for (v, w) in slow.iter_mut().enumerate() {
            *w = Complex64::from_polar(1.0, -2.0 * PI * f_d * v as f64 * params.chirp_s);
        }
        for z in 0..NUM_ANTENNAS {
            let amp = Complex64::from_polar(
                s.amplitude,
                s.phase_rad + s.antenna_phase(z, params.spacing_wavelengths),
            );
            let plane = &mut frame.samples[z * nc * ns..(z + 1) * nc * ns];
            for (v, w) in slow.iter().enumerate() {
                let row_amp = amp * w;
                for (out, f) in plane[v * ns..(v + 1) * ns].iter_mut().zip(&fast) {
                    *out += row_amp * f;
                }
            }
        }
    }

    if noise_std > 0.0 {
        let mut rng = seed::rng(rng_seed, 0x6e_6f69_7365);
        let sigma = noise_std / std::f64::consts::SQRT_2;
        for c in frame.samples.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *c += Complex64::new(sigma * re, sigma * im);
        }
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boresight(range_m: f64, radial_mps: f64) -> Scatterer {
        Scatterer {
            range_m,
            radial_mps,
            azimuth_rad: 0.0,
            elevation_rad: 0.0,
            amplitude: 1.0,
            phase_rad: 0.0,
        }
    }

    #[test]
    fn table_one_resolutions() {
        let r = RadarParams::default().resolutions().unwrap();
        assert!((r.range_m - 0.029_979_245_8).abs() < 1e-12);
        assert!((0.1805..=0.1810).contains(&r.velocity_mps), "{}", r.velocity_mps);
    }

    #[test]
    fn doubling_bandwidth_halves_range_cell() {
        let p = RadarParams::default();
        let q = RadarParams {
            bandwidth_hz: 2.0 * p.bandwidth_hz,
            ..p
        };
        assert_eq!(q.range_resolution_m() * 2.0, p.range_resolution_m());
    }

    #[test]
    fn narrowband_long_cycle_resolutions() {
        // c/(2·1e9) and (c/60e9/2)/(64·432e-6), evaluated by hand
        let p = RadarParams {
            bandwidth_hz: 1.0e9,
            chirps_per_cycle: 64,
            pri_s: 64.0 * 432.0e-6,
            ..RadarParams::default()
        };
        let r = p.resolutions().unwrap();
        assert!((r.range_m - 0.149_896_229).abs() < 1e-9);
        assert!((r.velocity_mps - 0.090_360_2).abs() < 1e-6, "{}", r.velocity_mps);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = RadarParams::default();
        for bad in [
            RadarParams { bandwidth_hz: 0.0, ..p },
            RadarParams { chirp_s: -1.0, ..p },
            RadarParams { samples_per_chirp: 1, ..p },
            RadarParams { chirps_per_cycle: 1, ..p },
            RadarParams { pri_s: 1e-3, ..p },
        ] {
            assert!(matches!(bad.resolutions(), Err(Error::ParameterDomain(_))));
        }
    }

    #[test]
    fn frequencies_of_reference_scatterers() {
        let p = RadarParams::default();
        let (f_r, f_d) = p.scatter_frequencies(0.30, 0.0).unwrap();
        assert_eq!(f_d, 0.0);
        assert!((f_r * p.chirp_s - 0.30 / p.range_resolution_m()).abs() < 1e-9);
        assert_eq!((f_r * p.chirp_s).round(), 10.0);

        let (_, f_d) = p.scatter_frequencies(0.5, 0.18).unwrap();
        assert!((f_d - 72.05).abs() < 0.01, "{f_d}");
        let bins = f_d * p.chirps_per_cycle as f64 * p.chirp_s;
        assert!((bins - 0.996).abs() < 1e-3, "{bins}");
    }

    #[test]
    fn out_of_range_frequencies_rejected() {
        let p = RadarParams::default();
        assert!(p.scatter_frequencies(-0.1, 0.0).is_err());
        assert!(p.scatter_frequencies(2.0, 0.0).is_err());
        assert!(p.scatter_frequencies(0.3, 10.0).is_err());
    }

    #[test]
    fn empty_scene_is_silent() {
        let p = RadarParams::default();
        let f = synth_beat_frame(&[], &p, 0.0, 3).unwrap();
        assert!(f.samples.iter().all(|c| c.norm() == 0.0));
        f.check_shape(&p).unwrap();
    }

    #[test]
    fn single_scatterer_has_constant_modulus() {
        let p = RadarParams::default();
        let s = Scatterer {
            amplitude: 0.7,
            ..boresight(0.41, -0.6)
        };
        let f = synth_beat_frame(&[s], &p, 0.0, 0).unwrap();
        for c in &f.samples {
            assert!((c.norm() - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn azimuth_phase_between_rx1_and_rx2() {
        let p = RadarParams::default();
        let s = Scatterer {
            azimuth_rad: 30f64.to_radians(),
            ..boresight(0.3, 0.0)
        };
        let f = synth_beat_frame(&[s], &p, 0.0, 0).unwrap();
        let d = (f.at(1, 3, 5) * f.at(2, 3, 5).conj()).arg();
        assert!((d - PI / 2.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn superposition_and_determinism() {
        let p = RadarParams::default();
        let a = boresight(0.2, 0.3);
        let b = Scatterer {
            azimuth_rad: -0.3,
            elevation_rad: 0.2,
            phase_rad: 1.0,
            ..boresight(0.55, -1.0)
        };
        let fa = synth_beat_frame(&[a], &p, 0.0, 0).unwrap();
        let fb = synth_beat_frame(&[b], &p, 0.0, 0).unwrap();
        let fab = synth_beat_frame(&[a, b], &p, 0.0, 0).unwrap();
        for i in 0..fab.samples.len() {
            assert!((fab.samples[i] - fa.samples[i] - fb.samples[i]).norm() < 1e-12);
        }
        let n1 = synth_beat_frame(&[a, b], &p, 0.1, 42).unwrap();
        let n2 = synth_beat_frame(&[a, b], &p, 0.1, 42).unwrap();
        assert_eq!(n1, n2);
        let n3 = synth_beat_frame(&[a, b], &p, 0.1, 43).unwrap();
        assert_ne!(n1, n3);
    }

    #[test]
    fn noise_power_matches_std() {
        let p = RadarParams::default();
        let f = synth_beat_frame(&[], &p, 0.5, 9).unwrap();
        let power = f.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / f.samples.len() as f64;
        assert!((power - 0.25).abs() < 0.02, "{power}");
    }

    #[test]
    fn invalid_scatterer_rejected() {
        let p = RadarParams::default();
        let s = Scatterer {
            azimuth_rad: PI / 2.0,
            ..boresight(0.3, 0.0)
        };
        assert!(synth_beat_frame(&[s], &p, 0.0, 0).is_err());
        assert!(synth_beat_frame(&[], &p, -1.0, 0).is_err());
    }
}
