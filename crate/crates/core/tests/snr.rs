//! Empirical SNR of synthesized recordings, measured from the RD maps of the
//! scatterer-free cycles that precede the hand's appearance.

use rgr_core::gesture_sim::{median_amplitude, synth_recording, trajectory, GestureClass};
use rgr_core::radar_model::NUM_ANTENNAS;
use rgr_core::rd_processing::{rd_spectrum, window2d};
use rgr_core::RadarParams;

fn measured_snr_db(class: GestureClass, seed: u64, snr_db: f64) -> f64 {
    let p = RadarParams::default();
    let rec = synth_recording(class, seed, &p, snr_db).unwrap();
    let traj = trajectory(class, seed, &p);
    // cycles before the first trajectory cycle carry no scatterers
    let offset = rec.gesture_span.0 - traj.span.0;
    assert!(offset >= 4, "only {offset} empty cycles");
    let w = window2d(p.samples_per_chirp, p.chirps_per_cycle).unwrap();
    let sum_w2: f64 = w.to_matrix().iter().map(|v| v * v).sum();
    let n = p.cells() as f64;
    let (mut power, mut cells) = (0.0, 0usize);
    for f in &rec.frames[..offset] {
        let s = rd_spectrum(f, &p).unwrap();
        for z in 0..NUM_ANTENNAS {
            for c in s.antenna_map(z) {
                power += c.norm_sqr();
                cells += 1;
            }
        }
    }
    // a cell of the normalized windowed DFT has variance σ²·Σw²/N²
    let sigma = (power / cells as f64 * n * n / sum_w2).sqrt();
    20.0 * (median_amplitude(&traj) / sigma).log10()
}

#[test]
fn twenty_db_within_tolerance() {
    for (i, class) in GestureClass::ALL.into_iter().enumerate() {
        let m = measured_snr_db(class, 100 + i as u64, 20.0);
        assert!((m - 20.0).abs() <= 1.5, "{class}: {m:.2} dB");
    }
}

#[test]
fn tracks_requested_level() {
    for target in [5.0, 10.0, 30.0] {
        let m = measured_snr_db(GestureClass::Push, 9, target);
        assert!((m - target).abs() <= 1.5, "{target} dB requested, {m:.2} measured");
    }
}
