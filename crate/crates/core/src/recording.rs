use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Window;
use crate::types::Vec3;

/// Maximum deviation of any sample interval from the nominal `1/rate`.
pub const TIME_BASE_TOL: f64 = 1e-9;

/// Uniformly sampled gyro, accelerometer and wheel-speed streams of one throw.
///
/// Units: `t` in s, `gyro` in rad/s, `accel` specific force in m/s², `wheel`
/// the wheel speed relative to the body in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThrowRecording {
    pub sample_rate: f64,
    pub t: Vec<f64>,
    pub gyro: Vec<Vec3>,
    pub accel: Vec<Vec3>,
    pub wheel: Vec<f64>,
    /// Wheel spin axis in the IMU frame, unit length.
    pub wheel_axis: Vec3,
    pub has_rest_prefix: bool,
    pub rest_window: Option<Window>,
    pub freefall_window: Option<Window>,
}

impl ThrowRecording {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    /// Index of the sample closest to time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let t0 = self.t.first().copied().unwrap_or(0.0);
        ((t - t0) * self.sample_rate).round().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::Parse(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        let n = self.t.len();
        if self.gyro.len() != n || self.accel.len() != n || self.wheel.len() != n {
            return Err(Error::Parse(format!(
                "column lengths differ: t {n}, gyro {}, accel {}, wheel {}",
                self.gyro.len(),
                self.accel.len(),
                self.wheel.len()
            )));
        }
        let dt = self.dt();
        for (k, w) in self.t.windows(2).enumerate() {
            let step = w[1] - w[0];
            if !(step > 0.0) {
                return Err(Error::Parse(format!("time is not strictly increasing at row {}", k + 1)));
            }
            if (step - dt).abs() > TIME_BASE_TOL {
                return Err(Error::Parse(format!(
                    "non-uniform time base at row {}: step {step} s, expected {dt} s",
                    k + 1
                )));
            }
        }
        let finite = self.t.iter().chain(&self.wheel).all(|v| v.is_finite())
            && self
                .gyro
                .iter()
                .chain(&self.accel)
                .all(|v| v.iter().all(|c| c.is_finite()));
        if !finite {
            return Err(Error::NonFinite("recording"));
        }
        let axis_norm = self.wheel_axis.norm();
        if (axis_norm - 1.0).abs() > 1e-6 {
            return Err(Error::Parse(format!(
                "wheel axis must be a unit vector, norm is {axis_norm}"
            )));
        }
        for w in self.rest_window.iter().chain(self.freefall_window.iter()) {
            w.check_bounds(n)?;
        }
        Ok(())
    }
}
