//! Point-scatterer hand models for the gesture vocabulary.
//!
//! A hand is a palm scatterer (always index 0) plus a few finger scatterers
//! riding on it. Each class is a template path for the palm in sensor
//! Cartesian coordinates (x lateral, y vertical, z along boresight), sampled
//! once per measurement cycle and converted to range, azimuth, elevation and
//! radial velocity. Template parameters are jittered per seed.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::radar_model::{synth_beat_frame_at, BeatFrame, RadarParams, Scatterer};
use crate::seed;

/// Cycles returned by [`trajectory`].
pub const TRAJECTORY_CYCLES: usize = 40;
pub const MIN_DURATION: usize = 15;
pub const MAX_DURATION: usize = 35;
/// Cycles in a recording made by [`synth_recording`].
pub const RECORDING_CYCLES: usize = 64;
/// Range of the last gesture cycle within a recording.
pub const END_CYCLE_RANGE: (usize, usize) = (44, 52);

const MAX_RANGE_M: f64 = 0.9;
/// Per-cycle step bound of the random-motion walk, per axis.
const WALK_STEP_M: f64 = 0.035;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GestureClass {
    Check,
    Cross,
    RotateCW,
    RotateCCW,
    MovingFingers,
    PinchIndex,
    Pull,
    Push,
    SwipeBW,
    SwipeFW,
    SwipeLT,
    SwipeRT,
    RandomMotion,
}

impl GestureClass {
    pub const ALL: [GestureClass; 13] = [
        Self::Check,
        Self::Cross,
        Self::RotateCW,
        Self::RotateCCW,
        Self::MovingFingers,
        Self::PinchIndex,
        Self::Pull,
        Self::Push,
        Self::SwipeBW,
        Self::SwipeFW,
        Self::SwipeLT,
        Self::SwipeRT,
        Self::RandomMotion,
    ];
    pub const COUNT: usize = 13;

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::Format(format!("gesture code {code} outside 0..=12")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Check => "check",
            Self::Cross => "cross",
            Self::RotateCW => "rotate_cw",
            Self::RotateCCW => "rotate_ccw",
            Self::MovingFingers => "moving_fingers",
            Self::PinchIndex => "pinch_index",
            Self::Pull => "pull",
            Self::Push => "push",
            Self::SwipeBW => "swipe_bw",
            Self::SwipeFW => "swipe_fw",
            Self::SwipeLT => "swipe_lt",
            Self::SwipeRT => "swipe_rt",
            Self::RandomMotion => "random_motion",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::Format(format!("unknown gesture class {name:?}")))
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|c| c.name()).collect()
    }

    pub fn is_gesture(self) -> bool {
        self != Self::RandomMotion
    }
}

impl std::fmt::Display for GestureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Scatterer sets for consecutive cycles plus the inclusive cycle span of the
/// motion. Cycles outside the span are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub cycles: Vec<Vec<Scatterer>>,
    pub span: (usize, usize),
}

type V3 = [f64; 3];

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn lerp(a: V3, b: V3, t: f64) -> V3 {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn norm(p: V3) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Piecewise path through `knots`, each leg eased with a smoothstep.
fn polyline(knots: &[V3], s: f64) -> V3 {
    let legs = (knots.len() - 1) as f64;
    let x = (s.clamp(0.0, 1.0) * legs).min(legs - 1e-12);
    let i = x.floor() as usize;
    lerp(knots[i], knots[i + 1], smoothstep(x - i as f64))
}

/// Draws shared by every class, in a fixed order so mirrored classes with the
/// same seed see identical values.
#[derive(Debug, Clone)]
struct Hand {
    duration: usize,
    centre: V3,
    size: f64,
    fingers: Vec<V3>,
    finger_amp: Vec<f64>,
    palm_amp: f64,
    phases: Vec<f64>,
    wobble: f64,
    wobble_phase: f64,
    rate_hz: f64,
    walk: Vec<V3>,
}

fn jitter(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.8..1.2)
}

impl Hand {
    fn draw(rng: &mut ChaCha8Rng, finger_range: (usize, usize)) -> Self {
        let duration = rng.gen_range(MIN_DURATION..=MAX_DURATION);
        let centre = [
            rng.gen_range(-0.04..0.04),
            rng.gen_range(-0.04..0.04),
            rng.gen_range(0.30..0.45),
        ];
        let size = 0.16 * jitter(rng);
        let n_fingers = rng.gen_range(finger_range.0..=finger_range.1);
        let mut fingers = Vec::with_capacity(n_fingers);
        let mut finger_amp = Vec::with_capacity(n_fingers);
        for i in 0..n_fingers {
            let spread = (i as f64 - (n_fingers as f64 - 1.0) / 2.0) * 0.018;
            fingers.push([
                spread + rng.gen_range(-0.004..0.004),
                0.06 + rng.gen_range(-0.015..0.015),
                rng.gen_range(-0.012..0.012),
            ]);
            finger_amp.push(rng.gen_range(0.15..0.35));
        }
        let palm_amp = jitter(rng);
        let phases = (0..=n_fingers).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let wobble = rng.gen_range(0.01..0.02);
        let wobble_phase = rng.gen_range(0.0..2.0 * PI);
        let rate_hz = 3.0 * jitter(rng);
        let walk = (0..MAX_DURATION)
            .map(|_| {
                [
                    rng.gen_range(-WALK_STEP_M..WALK_STEP_M),
                    rng.gen_range(-WALK_STEP_M..WALK_STEP_M),
                    rng.gen_range(-WALK_STEP_M..WALK_STEP_M),
                ]
            })
            .collect();
        Self {
            duration,
            centre,
            size,
            fingers,
            finger_amp,
            palm_amp,
            phases,
            wobble,
            wobble_phase,
            rate_hz,
            walk,
        }
    }
}

/// Palm position and finger offsets at normalized gesture time `s ∈ [0, 1]`,
/// before any mirroring. `t_s` is elapsed time in seconds.
fn pose(class: GestureClass, hand: &Hand, s: f64, t_s: f64) -> (V3, Vec<V3>) {
    use GestureClass::*;
    let c = hand.centre;
    let l = hand.size;
    let mut fingers = hand.fingers.clone();
    let palm = match class {
        SwipeLT | SwipeRT => add(c, [l / 2.0 - l * smoothstep(s), 0.0, 0.0]),
        SwipeFW | SwipeBW => add(c, [0.0, l / 2.0 - l * smoothstep(s), 0.0]),
        Push | Pull => add(c, [0.0, 0.0, l / 2.0 - l * smoothstep(s)]),
        RotateCCW | RotateCW => {
            let a = 2.0 * PI * s - PI / 2.0;
            let r = l / 2.0;
            add(c, [r * a.cos(), r * a.sin() + r, 0.0])
        }
        Check => {
            let h = l / 2.0;
            let knots = [
                add(c, [-h, h * 0.3, 0.0]),
                add(c, [-h * 0.3, -h * 0.6, 0.0]),
                add(c, [h, h, 0.0]),
            ];
            polyline(&knots, s)
        }
        Cross => {
            let h = l / 2.0;
            let knots = [
                add(c, [-h, h, 0.0]),
                add(c, [h, -h, 0.0]),
                add(c, [h, h, 0.0]),
                add(c, [-h, -h, 0.0]),
            ];
            polyline(&knots, s)
        }
        MovingFingers => {
            let n = fingers.len().max(1) as f64;
            for (i, f) in fingers.iter_mut().enumerate() {
                let ph = 2.0 * PI * (hand.rate_hz * t_s + i as f64 / n) + hand.wobble_phase;
                f[2] += hand.wobble * ph.sin();
                f[1] += 0.3 * hand.wobble * ph.cos();
            }
            c
        }
        PinchIndex => {
            // index (finger 0) closes on the thumb (last finger) and opens again
            let close = (PI * s).sin().powi(2);
            let thumb = *fingers.last().unwrap_or(&[0.0; 3]);
            if fingers.len() > 1 {
                let idx = fingers[0];
                fingers[0] = lerp(idx, add(thumb, [0.0, 0.01, 0.0]), 0.85 * close);
                fingers[0][2] -= 0.02 * close;
            }
            add(c, [0.0, 0.0, -0.005 * close])
        }
        RandomMotion => {
            let mut knots = vec![c];
            let mut p = c;
            for step in &hand.walk[..hand.duration] {
                p = add(p, *step);
                p[0] = p[0].clamp(-0.15, 0.15);
                p[1] = p[1].clamp(-0.15, 0.15);
                p[2] = p[2].clamp(0.15, 0.6);
                knots.push(p);
            }
            let legs = hand.duration as f64;
            let x = (s.clamp(0.0, 1.0) * legs).min(legs - 1e-12);
            let i = x.floor() as usize;
            let mut q = lerp(knots[i], knots[i + 1], x - i as f64);
            q[0] += 0.01 * (2.0 * PI * 5.0 * s + hand.wobble_phase).sin();
            q
        }
    };
    (palm, fingers)
}

fn mirror(class: GestureClass) -> Option<usize> {
    use GestureClass::*;
    match class {
        SwipeRT | RotateCW => Some(0),
        SwipeBW => Some(1),
        _ => None,
    }
}

/// Per-scatterer Cartesian positions at normalized time `s`.
fn positions(class: GestureClass, hand: &Hand, s: f64, params: &RadarParams) -> Vec<V3> {
    let mut s_eff = s;
    if class == GestureClass::Pull {
        s_eff = 1.0 - s;
    }
    let t_s = s * hand.duration as f64 * params.pri_s;
    let (palm, fingers) = pose(class, hand, s_eff, t_s);
    let mut pts = Vec::with_capacity(1 + fingers.len());
    pts.push(palm);
    pts.extend(fingers.iter().map(|f| add(palm, *f)));
    if let Some(axis) = mirror(class) {
        for p in pts.iter_mut() {
            p[axis] = -p[axis];
        }
    }
    pts
}

fn finger_range(class: GestureClass) -> (usize, usize) {
    match class {
        GestureClass::MovingFingers | GestureClass::PinchIndex => (2, 4),
        _ => (2, 7),
    }
}

fn hand_for(class: GestureClass, seed: u64) -> Hand {
    let mut rng = seed::rng(seed, 0x6861_6e64);
    Hand::draw(&mut rng, finger_range(class))
}

fn scatterer_at(
    p: V3,
    p_before: V3,
    p_after: V3,
    dt_s: f64,
    amplitude: f64,
    phase_offset: f64,
    params: &RadarParams,
) -> Scatterer {
    let r = norm(p).min(MAX_RANGE_M);
    let radial = (norm(p_after) - norm(p_before)) / dt_s;
    let max_v = 0.95 * params.max_speed_mps();
    Scatterer {
        range_m: r,
        radial_mps: radial.clamp(-max_v, max_v),
        azimuth_rad: (p[0] / r).clamp(-1.0, 1.0).asin(),
        elevation_rad: (p[1] / r).clamp(-1.0, 1.0).asin(),
        amplitude: amplitude * 0.3 / r,
        phase_rad: (4.0 * PI * r / params.wavelength_m() + phase_offset).rem_euclid(2.0 * PI),
    }
}

/// Scatterer sets for [`TRAJECTORY_CYCLES`] cycles, with the motion ending on
/// the last cycle.
pub fn trajectory(class: GestureClass, seed: u64, params: &RadarParams) -> Trajectory {
    let hand = hand_for(class, seed);
    let d = hand.duration;
    let start = TRAJECTORY_CYCLES - d;
    let mut cycles = vec![Vec::new(); TRAJECTORY_CYCLES];
    let h = 0.05 / d as f64;
    let dt_s = 2.0 * h * d as f64 * params.pri_s;
    for i in 0..d {
        let s = (i as f64 + 0.5) / d as f64;
        let now = positions(class, &hand, s, params);
        let before = positions(class, &hand, s - h, params);
        let after = positions(class, &hand, s + h, params);
        let mut set = Vec::with_capacity(now.len());
        for (j, p) in now.iter().enumerate() {
            let amp = if j == 0 { hand.palm_amp } else { hand.finger_amp[j - 1] };
            set.push(scatterer_at(*p, before[j], after[j], dt_s, amp, hand.phases[j], params));
        }
        cycles[start + i] = set;
    }
    Trajectory {
        cycles,
        span: (start, TRAJECTORY_CYCLES - 1),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub frames: Vec<BeatFrame>,
    pub label: GestureClass,
    /// Inclusive cycle indices of the motion.
    pub gesture_span: (usize, usize),
    pub params: RadarParams,
    pub seed: u64,
    pub noise_std: f64,
}

/// Median scatterer amplitude over all cycles of a trajectory.
pub fn median_amplitude(traj: &Trajectory) -> f64 {
    let mut a: Vec<f64> = traj.cycles.iter().flatten().map(|s| s.amplitude).collect();
    if a.is_empty() {
        return 0.0;
    }
    a.sort_by(f64::total_cmp);
    let n = a.len();
    if n % 2 == 1 {
        a[n / 2]
    } else {
        0.5 * (a[n / 2 - 1] + a[n / 2])
    }
}

/// A [`RECORDING_CYCLES`]-cycle recording with the gesture placed so that it
/// ends inside [`END_CYCLE_RANGE`]. `snr_db = +∞` disables noise.
pub fn synth_recording(
    class: GestureClass,
    seed: u64,
    params: &RadarParams,
    snr_db: f64,
) -> Result<Recording> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::ParameterDomain(format!("snr_db {snr_db} must be finite or +inf")));
    }
    params.validate()?;
    let traj = trajectory(class, seed, params);
    let mut rng = seed::rng(seed, 0x72_6563);
    let end = rng.gen_range(END_CYCLE_RANGE.0..=END_CYCLE_RANGE.1);
    let offset = end - (TRAJECTORY_CYCLES - 1);
    let noise_std = if snr_db == f64::INFINITY {
        0.0
    } else {
        median_amplitude(&traj) / 10f64.powf(snr_db / 20.0)
    };
    let empty: Vec<Scatterer> = Vec::new();
    let frames = (0..RECORDING_CYCLES)
        .map(|cycle| {
            let set = cycle
                .checked_sub(offset)
                .and_then(|i| traj.cycles.get(i))
                .unwrap_or(&empty);
            synth_beat_frame_at(set, params, noise_std, seed::derive(seed, cycle as u64), cycle as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Recording {
        frames,
        label: class,
        gesture_span: (traj.span.0 + offset, traj.span.1 + offset),
        params: *params,
        seed,
        noise_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rd_processing::rd_spectrum;

    fn params() -> RadarParams {
        RadarParams::default()
    }

    fn span_cycles(t: &Trajectory) -> &[Vec<Scatterer>] {
        &t.cycles[t.span.0..=t.span.1]
    }

    fn palm_series(t: &Trajectory, f: impl Fn(&Scatterer) -> f64) -> Vec<f64> {
        span_cycles(t).iter().map(|c| f(&c[0])).collect()
    }

    fn shoelace(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len();
        (0..n)
            .map(|i| {
                let j = (i + 1) % n;
                xs[i] * ys[j] - xs[j] * ys[i]
            })
            .sum::<f64>()
            / 2.0
    }

    #[test]
    fn thirteen_stable_codes() {
        assert_eq!(GestureClass::ALL.len(), GestureClass::COUNT);
        for (i, c) in GestureClass::ALL.iter().enumerate() {
            assert_eq!(c.code() as usize, i);
            assert_eq!(GestureClass::from_code(i as u8).unwrap(), *c);
            assert_eq!(GestureClass::from_name(c.name()).unwrap(), *c);
        }
        assert_eq!(GestureClass::RandomMotion.code(), 12);
        assert!(GestureClass::from_code(13).is_err());
    }

    #[test]
    fn trajectory_shape_and_limits() {
        let p = params();
        for class in GestureClass::ALL {
            for seed in 0..20 {
                let t = trajectory(class, seed, &p);
                assert_eq!(t.cycles.len(), TRAJECTORY_CYCLES);
                let d = t.span.1 - t.span.0 + 1;
                assert!((MIN_DURATION..=MAX_DURATION).contains(&d));
                assert_eq!(t.span.1, TRAJECTORY_CYCLES - 1);
                for (i, c) in t.cycles.iter().enumerate() {
                    if i < t.span.0 {
                        assert!(c.is_empty());
                        continue;
                    }
                    assert!((3..=8).contains(&c.len()), "{class} has {} scatterers", c.len());
                    for s in c {
                        s.validate(&p).unwrap();
                        assert!(s.range_m <= 0.9);
                        assert!(s.radial_mps.abs() < p.max_speed_mps());
                    }
                }
            }
        }
    }

    #[test]
    fn push_range_strictly_decreasing() {
        for seed in 0..25 {
            let t = trajectory(GestureClass::Push, seed, &params());
            let r = palm_series(&t, |s| s.range_m);
            assert!(r.windows(2).all(|w| w[1] < w[0]), "seed {seed}: {r:?}");
            for c in span_cycles(&t) {
                assert!(c.iter().all(|s| s.radial_mps < 0.0));
            }
        }
    }

    #[test]
    fn swipes_are_mirror_images() {
        for seed in 0..10 {
            let lt = trajectory(GestureClass::SwipeLT, seed, &params());
            let rt = trajectory(GestureClass::SwipeRT, seed, &params());
            assert_eq!(lt.span, rt.span);
            for (a, b) in span_cycles(&lt).iter().zip(span_cycles(&rt)) {
                for (x, y) in a.iter().zip(b) {
                    assert!((x.azimuth_rad + y.azimuth_rad).abs() < 1e-12);
                    assert!((x.elevation_rad - y.elevation_rad).abs() < 1e-12);
                    assert!((x.range_m - y.range_m).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rotation_sense_from_signed_area() {
        for seed in 0..10 {
            let area = |class| {
                let t = trajectory(class, seed, &params());
                let az = palm_series(&t, |s| s.azimuth_rad);
                let el = palm_series(&t, |s| s.elevation_rad);
                shoelace(&az, &el)
            };
            assert!(area(GestureClass::RotateCW) < 0.0);
            assert!(area(GestureClass::RotateCCW) > 0.0);
        }
    }

    #[test]
    fn separability_statistics() {
        let p = params();
        for seed in 0..10 {
            let mean_v = |class| {
                let t = trajectory(class, seed, &p);
                let v = palm_series(&t, |s| s.radial_mps);
                v.iter().sum::<f64>() / v.len() as f64
            };
            assert!(mean_v(GestureClass::Push) < 0.0);
            assert!(mean_v(GestureClass::Pull) > 0.0);
            let slope = |class| {
                let t = trajectory(class, seed, &p);
                let az = palm_series(&t, |s| s.azimuth_rad);
                az[az.len() - 1] - az[0]
            };
            assert!(slope(GestureClass::SwipeLT) < 0.0);
            assert!(slope(GestureClass::SwipeRT) > 0.0);
        }
    }

    #[test]
    fn noiseless_push_peak_range_non_increasing() {
        let p = params();
        for seed in 0..10 {
            let rec = synth_recording(GestureClass::Push, seed, &p, f64::INFINITY).unwrap();
            assert_eq!(rec.noise_std, 0.0);
            let (a, b) = rec.gesture_span;
            let mut bins = Vec::new();
            for f in &rec.frames[a..=b] {
                bins.push(rd_spectrum(f, &p).unwrap().argmax().0);
            }
            // first-order oracle: bin of the palm's range
            let t = trajectory(GestureClass::Push, seed, &p);
            let expect: Vec<f64> = palm_series(&t, |s| s.range_m / p.range_resolution_m());
            assert!(bins.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {bins:?}");
            for (got, want) in bins.iter().zip(&expect) {
                assert!((*got as f64 - want).abs() <= 1.0, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn recording_layout() {
        let p = params();
        let rec = synth_recording(GestureClass::RandomMotion, 3, &p, 20.0).unwrap();
        assert_eq!(rec.label.code(), 12);
        assert_eq!(rec.frames.len(), RECORDING_CYCLES);
        let (a, b) = rec.gesture_span;
        assert!((END_CYCLE_RANGE.0..=END_CYCLE_RANGE.1).contains(&b));
        assert!(b - a < TRAJECTORY_CYCLES);
        assert!(rec.noise_std > 0.0);
        for (i, f) in rec.frames.iter().enumerate() {
            assert_eq!(f.cycle_index, i as u64);
        }
        let quiet = synth_recording(GestureClass::Check, 4, &p, f64::INFINITY).unwrap();
        let (a, b) = quiet.gesture_span;
        for (i, f) in quiet.frames.iter().enumerate() {
            let silent = f.samples.iter().all(|c| c.norm_sqr() == 0.0);
            assert_eq!(silent, i < a || i > b, "cycle {i}");
        }
    }

    #[test]
    fn recording_is_deterministic() {
        let p = params();
        let a = synth_recording(GestureClass::SwipeFW, 11, &p, 15.0).unwrap();
        let b = synth_recording(GestureClass::SwipeFW, 11, &p, 15.0).unwrap();
        assert_eq!(a, b);
        let c = synth_recording(GestureClass::SwipeFW, 12, &p, 15.0).unwrap();
        assert_ne!(a.frames, c.frames);
    }

    #[test]
    fn nan_snr_rejected() {
        assert!(synth_recording(GestureClass::Push, 0, &params(), f64::NAN).is_err());
    }
}
