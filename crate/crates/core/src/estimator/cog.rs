use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lstsq;
use crate::error::{Error, Result};
use crate::types::Vec3;

/// Body rate above which a sample counts as excited for the CoG fit, rad/s.
pub const MIN_EXCITATION_RATE: f64 = 2.0;
/// Fraction of samples that must exceed [`MIN_EXCITATION_RATE`].
pub const MIN_EXCITED_FRACTION: f64 = 0.5;

/// Result of fitting the IMU lever arm to free-fall specific force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CogFit {
    /// Vector from the combined barycentre to the IMU, m.
    pub rho: Vec3,
    /// Combined barycentre in the IMU frame, `-rho`, m.
    pub x_comb: Vec3,
    /// m/s²
    pub residual_rms: f64,
    pub condition: f64,
}

/// Samples of one free-fall segment used by [`estimate_cog`].
#[derive(Debug, Clone, Copy)]
pub struct CogSample<'a> {
    pub omega: &'a [Vec3],
    pub omega_dot: &'a [Vec3],
    pub accel: &'a [Vec3],
}

/// Least-squares lever arm over one or more segments, stacking
/// `accel = ([ω̇]× + [ω]×[ω]×) ρ` for every sample.
pub fn estimate_cog(segments: &[CogSample<'_>]) -> Result<CogFit> {
    let n: usize = segments.iter().map(|s| s.omega.len()).sum();
    for s in segments {
        if s.omega_dot.len() != s.omega.len() || s.accel.len() != s.omega.len() {
            return Err(Error::InvalidInput("CoG fit series lengths differ".into()));
        }
    }
    if n < 2 {
        return Err(Error::SeriesTooShort { len: n, required: 1 });
    }
    let excited = segments
        .iter()
        .flat_map(|s| s.omega.iter())
        .filter(|w| w.norm() > MIN_EXCITATION_RATE)
        .count();
    let fraction = excited as f64 / n as f64;
    if fraction < MIN_EXCITED_FRACTION {
        return Err(Error::InsufficientExcitation {
            fraction,
            threshold: MIN_EXCITATION_RATE,
        });
    }

    let mut a = DMatrix::zeros(3 * n, 3);
    let mut b = DVector::zeros(3 * n);
    let samples = segments
        .iter()
        .flat_map(|s| s.omega.iter().zip(s.omega_dot).zip(s.accel));
    for (k, ((w, wd), f)) in samples.enumerate() {
        let wx = w.cross_matrix();
        a.fixed_view_mut::<3, 3>(3 * k, 0)
            .copy_from(&(wd.cross_matrix() + wx * wx));
        b.fixed_rows_mut::<3>(3 * k).copy_from(f);
    }
    let sol = lstsq::solve(a, b, "centre-of-gravity fit")?;
    let rho = Vec3::new(sol.x[0], sol.x[1], sol.x[2]);
    Ok(CogFit {
        rho,
        x_comb: -rho,
        residual_rms: sol.residual_rms,
        condition: sol.condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::freefall_specific_force;
    use approx::assert_relative_eq;

    fn tumbling(n: usize) -> (Vec<Vec3>, Vec<Vec3>) {
        let omega = (0..n)
            .map(|k| {
                let t = k as f64 * 1e-3;
                Vec3::new(5.0 * (3.0 * t).cos(), 5.0 * (3.0 * t).sin(), 4.0 + t)
            })
            .collect();
        let omega_dot = (0..n)
            .map(|k| {
                let t = k as f64 * 1e-3;
                Vec3::new(-15.0 * (3.0 * t).sin(), 15.0 * (3.0 * t).cos(), 1.0)
            })
            .collect();
        (omega, omega_dot)
    }

    #[test]
    fn imu_at_barycentre() {
        let (omega, omega_dot) = tumbling(500);
        let accel = vec![Vec3::zeros(); 500];
        let fit = estimate_cog(&[CogSample {
            omega: &omega,
            omega_dot: &omega_dot,
            accel: &accel,
        }])
        .unwrap();
        assert_eq!(fit.x_comb, Vec3::zeros());
    }

    #[test]
    fn recovers_lever_arm() {
        let (omega, omega_dot) = tumbling(500);
        let rho = Vec3::new(0.012, -0.004, 0.043);
        let accel: Vec<_> = omega
            .iter()
            .zip(&omega_dot)
            .map(|(w, wd)| freefall_specific_force(w, wd, &rho))
            .collect();
        let fit = estimate_cog(&[CogSample {
            omega: &omega,
            omega_dot: &omega_dot,
            accel: &accel,
        }])
        .unwrap();
        assert_relative_eq!(fit.rho, rho, epsilon = 1e-12);
        assert_relative_eq!(fit.x_comb, -rho, epsilon = 1e-12);
    }

    #[test]
    fn slow_rotation_is_rejected() {
        let omega = vec![Vec3::new(0.5, 0.0, 0.1); 100];
        let zeros = vec![Vec3::zeros(); 100];
        assert!(matches!(
            estimate_cog(&[CogSample {
                omega: &omega,
                omega_dot: &zeros,
                accel: &zeros,
            }]),
            Err(Error::InsufficientExcitation { .. })
        ));
    }

    #[test]
    fn fixed_axis_spin_names_the_axis() {
        let omega = vec![Vec3::new(0.0, 8.0, 0.0); 100];
        let zeros = vec![Vec3::zeros(); 100];
        let accel: Vec<_> = omega
            .iter()
            .map(|w| freefall_specific_force(w, &Vec3::zeros(), &Vec3::new(0.01, 0.0, 0.0)))
            .collect();
        match estimate_cog(&[CogSample {
            omega: &omega,
            omega_dot: &zeros,
            accel: &accel,
        }]) {
            Err(Error::RankDeficient { null_direction, .. }) => {
                assert_relative_eq!(null_direction[1].abs(), 1.0, epsilon = 1e-12);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }
}
