//! Azimuth and elevation from inter-antenna phase differences.
//!
//! Rx1 is the phase reference. Azimuth uses the (Rx1, Rx2) pair and
//! elevation the (Rx1, Rx0) pair; both invert
//! `Δψ = 2π·(d/λ)·sin(angle)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rd_processing::PointList;

/// Wraps a phase into the principal interval (−π, π].
pub fn principal_phase(phase: f64) -> f64 {
    let mut p = (phase + PI).rem_euclid(2.0 * PI) - PI;
    if p <= -PI {
        p += 2.0 * PI;
    }
    p
}

/// `arcsin(Δψ / (2π·d/λ))` with the argument clamped to [−1, 1].
pub fn angle_from_phase_difference(delta_psi: f64, spacing_wavelengths: f64) -> f64 {
    let arg = delta_psi / (2.0 * PI * spacing_wavelengths);
    arg.clamp(-1.0, 1.0).asin()
}

fn pair_angle(reference: Complex64, other: Complex64, spacing_wavelengths: f64) -> Result<f64> {
    if reference.norm_sqr() == 0.0 || other.norm_sqr() == 0.0 {
        return Err(Error::DegenerateInput("zero amplitude on an antenna".into()));
    }
    // phase of a·conj(b) is the principal-value difference in one step
    let mut delta = (reference * other.conj()).arg();
    if delta <= -PI {
        delta = PI;
    }
    Ok(angle_from_phase_difference(delta, spacing_wavelengths))
}

/// Azimuth from Rx1 (`a1`) and Rx2 (`a2`).
pub fn azimuth(a1: Complex64, a2: Complex64, spacing_wavelengths: f64) -> Result<f64> {
    pair_angle(a1, a2, spacing_wavelengths)
}

/// Elevation from Rx1 (`a1`) and Rx0 (`a0`).
pub fn elevation(a1: Complex64, a0: Complex64, spacing_wavelengths: f64) -> Result<f64> {
    pair_angle(a1, a0, spacing_wavelengths)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointAngles {
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
    /// Set when an amplitude was zero and the angles were replaced by 0.
    pub degenerate: bool,
}

/// Angles for every point in `points`, in the same order.
pub fn point_angles(points: &PointList, spacing_wavelengths: f64) -> Vec<PointAngles> {
    points
        .points
        .iter()
        .map(|p| {
            let [a0, a1, a2] = p.amplitudes;
            match (
                azimuth(a1, a2, spacing_wavelengths),
                elevation(a1, a0, spacing_wavelengths),
            ) {
                (Ok(az), Ok(el)) => PointAngles {
                    azimuth_rad: az,
                    elevation_rad: el,
                    degenerate: false,
                },
                _ => PointAngles {
                    azimuth_rad: 0.0,
                    elevation_rad: 0.0,
                    degenerate: true,
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn equal_amplitudes_give_boresight() {
        let a = c(0.3, -1.2);
        assert_eq!(azimuth(a, a, 0.5).unwrap(), 0.0);
        assert_eq!(elevation(a, a, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn quarter_cycle_is_thirty_degrees() {
        let a1 = Complex64::from_polar(1.0, PI / 2.0);
        let a2 = c(1.0, 0.0);
        assert!((azimuth(a1, a2, 0.5).unwrap() - PI / 6.0).abs() < 1e-12);
    }

    #[test]
    fn half_cycle_boundary() {
        assert!((angle_from_phase_difference(-PI, 0.5) + PI / 2.0).abs() < 1e-15);
        assert!((angle_from_phase_difference(PI, 0.5) - PI / 2.0).abs() < 1e-15);
        // past the boundary by rounding: clamped, not NaN
        assert_eq!(angle_from_phase_difference(PI * (1.0 + 1e-15), 0.5), PI / 2.0);
    }

    #[test]
    fn zero_amplitude_is_degenerate() {
        assert!(matches!(
            azimuth(c(0.0, 0.0), c(1.0, 0.0), 0.5),
            Err(Error::DegenerateInput(_))
        ));
        assert!(elevation(c(1.0, 0.0), c(0.0, 0.0), 0.5).is_err());
    }

    #[test]
    fn principal_phase_interval() {
        assert_eq!(principal_phase(-PI), PI);
        assert!((principal_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((principal_phase(0.25) - 0.25).abs() < 1e-15);
        assert!((principal_phase(-0.25 - 4.0 * PI) + 0.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn antisymmetric(p1 in -3.1f64..3.1, p2 in -3.1f64..3.1, m1 in 0.1f64..3.0, m2 in 0.1f64..3.0) {
            let a = Complex64::from_polar(m1, p1);
            let b = Complex64::from_polar(m2, p2);
            prop_assume!((principal_phase(p1 - p2).abs() - PI).abs() > 1e-9);
            let x = azimuth(a, b, 0.5).unwrap();
            let y = azimuth(b, a, 0.5).unwrap();
            prop_assert!((x + y).abs() < 1e-12);
        }

        #[test]
        fn monotone_in_phase_difference(d1 in -PI..PI, d2 in -PI..PI) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(angle_from_phase_difference(lo, 0.5) <= angle_from_phase_difference(hi, 0.5));
        }

        #[test]
        fn global_phase_invariant(p1 in -3.0f64..3.0, p2 in -3.0f64..3.0, g in -6.0f64..6.0) {
            let a = Complex64::from_polar(1.0, p1);
            let b = Complex64::from_polar(0.5, p2);
            let r = Complex64::from_polar(1.0, g);
            prop_assume!((principal_phase(p1 - p2).abs() - PI).abs() > 1e-9);
            let x = elevation(a, b, 0.5).unwrap();
            let y = elevation(a * r, b * r, 0.5).unwrap();
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
