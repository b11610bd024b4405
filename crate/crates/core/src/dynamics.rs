//! Free-fall rotational dynamics of a rigid body carrying a reaction wheel,
//! and synthesis of the gyro, accelerometer and wheel-tachometer streams a
//! device on that body would record.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recording::ThrowRecording;
use crate::signal::{Window, STANDARD_GRAVITY};
use crate::types::{InertiaTensor, Vec3};

/// Wheel impulse used by the reference device, N·m·s (1.8 N·mm·s).
pub const REFERENCE_WHEEL_IMPULSE: f64 = 1.8e-3;
/// Axial inertia of the reference device's wheel, kg·m².
pub const REFERENCE_WHEEL_INERTIA: f64 = 2.0e-6;

/// Trapezoidal wheel angular-acceleration profile.
///
/// Times are relative to the start of free fall. The wheel accelerates with a
/// linear ramp up to `peak_accel`, holds it for `plateau`, then ramps back to
/// zero; its speed ends `speed_change()` above `initial_speed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelPulse {
    /// Wheel inertia about its spin axis, kg·m².
    pub axial_inertia: f64,
    pub start: f64,
    pub ramp_up: f64,
    pub plateau: f64,
    pub ramp_down: f64,
    /// rad/s²
    pub peak_accel: f64,
    /// rad/s
    #[serde(default)]
    pub initial_speed: f64,
}

impl WheelPulse {
    /// Pulse shaped so the wheel absorbs angular impulse `impulse` (N·m·s).
    pub fn with_impulse(
        axial_inertia: f64,
        impulse: f64,
        start: f64,
        ramp_up: f64,
        plateau: f64,
        ramp_down: f64,
    ) -> Self {
        let area = 0.5 * ramp_up + plateau + 0.5 * ramp_down;
        let peak_accel = if area > 0.0 { impulse / (axial_inertia * area) } else { 0.0 };
        Self {
            axial_inertia,
            start,
            ramp_up,
            plateau,
            ramp_down,
            peak_accel,
            initial_speed: 0.0,
        }
    }

    /// 0.2 s pulse (50 ms ramps, 100 ms plateau) starting 50 ms into free fall.
    pub fn reference(axial_inertia: f64, impulse: f64) -> Self {
        Self::with_impulse(axial_inertia, impulse, 0.05, 0.05, 0.10, 0.05)
    }

    pub fn off(axial_inertia: f64) -> Self {
        Self::reference(axial_inertia, 0.0)
    }

    pub fn duration(&self) -> f64 {
        self.ramp_up + self.plateau + self.ramp_down
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration()
    }

    /// Net wheel speed change over the pulse, rad/s.
    pub fn speed_change(&self) -> f64 {
        self.peak_accel * (0.5 * self.ramp_up + self.plateau + 0.5 * self.ramp_down)
    }

    /// Angular impulse `I_R,zz · Δω_R`, N·m·s.
    pub fn impulse(&self) -> f64 {
        self.axial_inertia * self.speed_change()
    }

    pub fn accel(&self, t: f64) -> f64 {
        let tau = t - self.start;
        let (a, b, c) = (self.ramp_up, self.plateau, self.ramp_down);
        if tau <= 0.0 || tau >= a + b + c {
            0.0
        } else if tau < a {
            self.peak_accel * tau / a
        } else if tau <= a + b {
            self.peak_accel
        } else {
            self.peak_accel * (a + b + c - tau) / c
        }
    }

    pub fn speed(&self, t: f64) -> f64 {
        let tau = t - self.start;
        let (a, b, c) = (self.ramp_up, self.plateau, self.ramp_down);
        let p = self.peak_accel;
        let delta = if tau <= 0.0 {
            0.0
        } else if tau < a {
            0.5 * p * tau * tau / a
        } else if tau <= a + b {
            0.5 * p * a + p * (tau - a)
        } else if tau < a + b + c {
            let u = tau - a - b;
            0.5 * p * a + p * b + p * (u - 0.5 * u * u / c)
        } else {
            self.speed_change()
        };
        self.initial_speed + delta
    }

    pub fn validate(&self) -> Result<()> {
        let durations = [self.ramp_up, self.plateau, self.ramp_down];
        if durations.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidInput("wheel pulse durations must be >= 0".into()));
        }
        if !(self.axial_inertia.is_finite() && self.axial_inertia > 0.0) {
            return Err(Error::InvalidInput("wheel axial inertia must be positive".into()));
        }
        if !(self.impulse().is_finite() && self.start.is_finite() && self.initial_speed.is_finite()) {
            return Err(Error::NonFinite("wheel pulse"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Integrator {
    ForwardEuler,
    #[default]
    Rk4,
}

fn default_axis() -> Vec3 {
    Vec3::z()
}

fn default_contact_accel() -> f64 {
    2.0 * STANDARD_GRAVITY
}

/// Definition of one synthetic throw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Combined inertia about the combined barycentre, IMU axes.
    pub inertia: InertiaTensor,
    /// Body rate at the start of free fall, rad/s.
    pub omega0: Vec3,
    /// Vector from the combined barycentre to the IMU, m.
    pub imu_offset: Vec3,
    pub sample_rate: f64,
    /// Length of the free-fall phase, s.
    pub duration: f64,
    #[serde(default)]
    pub integrator: Integrator,
    pub wheel: WheelPulse,
    #[serde(default = "default_axis")]
    pub wheel_axis: Vec3,
    /// Stationary phase on a level surface before the throw, s.
    #[serde(default)]
    pub rest_prefix: f64,
    /// Hand contact before and after free fall, s.
    #[serde(default)]
    pub contact: f64,
    /// Extra specific force along `up` while the hand holds the body, m/s².
    #[serde(default = "default_contact_accel")]
    pub contact_accel: f64,
    /// Body-frame direction opposing gravity while at rest or in hand.
    #[serde(default = "default_axis")]
    pub up: Vec3,
}

impl SimConfig {
    pub fn new(inertia: InertiaTensor, omega0: Vec3, imu_offset: Vec3, wheel: WheelPulse) -> Self {
        Self {
            inertia,
            omega0,
            imu_offset,
            sample_rate: 4000.0,
            duration: 1.0,
            integrator: Integrator::Rk4,
            wheel,
            wheel_axis: Vec3::z(),
            rest_prefix: 0.0,
            contact: 0.0,
            contact_accel: default_contact_accel(),
            up: Vec3::z(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidInput(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.rest_prefix >= 0.0 && self.contact >= 0.0) {
            return Err(Error::InvalidInput("rest_prefix and contact must be >= 0".into()));
        }
        if !self.inertia.is_positive_definite() {
            return Err(Error::InvalidInput("inertia must be positive-definite".into()));
        }
        if (self.wheel_axis.norm() - 1.0).abs() > 1e-9 || (self.up.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("wheel_axis and up must be unit vectors".into()));
        }
        if self.omega0.iter().chain(self.imu_offset.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("simulation config"));
        }
        self.wheel.validate()
    }
}

/// Rigid body with a wheel spinning about `axis`, prepared for repeated
/// right-hand-side evaluation.
#[derive(Debug, Clone)]
pub struct WheelBody {
    pub inertia: InertiaTensor,
    inverse: Matrix3<f64>,
    pub wheel_inertia: f64,
    pub axis: Vec3,
}

impl WheelBody {
    pub fn new(inertia: InertiaTensor, wheel_inertia: f64, axis: Vec3) -> Result<Self> {
        let inverse = inertia.inverse()?;
        Ok(Self {
            inertia,
            inverse,
            wheel_inertia,
            axis,
        })
    }

    /// Body angular acceleration during free fall.
    pub fn omega_dot(&self, omega: &Vec3, wheel_speed: f64, wheel_accel: f64) -> Vec3 {
        let wheel_torque =
            -self.wheel_inertia * (self.axis * wheel_accel + omega.cross(&(self.axis * wheel_speed)));
        let gyroscopic = omega.cross(&self.inertia.apply(omega));
        self.inverse * (wheel_torque - gyroscopic)
    }

    /// Total angular momentum of body and wheel, body axes.
    pub fn momentum(&self, omega: &Vec3, wheel_speed: f64) -> Vec3 {
        self.inertia.apply(omega) + self.axis * (self.wheel_inertia * wheel_speed)
    }

    pub fn kinetic_energy(&self, omega: &Vec3) -> f64 {
        0.5 * omega.dot(&self.inertia.apply(omega))
    }
}

/// Free-fall equation of motion solved for the body angular acceleration.
pub fn derivative_rhs(
    inertia: &InertiaTensor,
    wheel_inertia: f64,
    wheel_axis: &Vec3,
    omega: &Vec3,
    wheel_speed: f64,
    wheel_accel: f64,
) -> Result<Vec3> {
    let body = WheelBody::new(*inertia, wheel_inertia, *wheel_axis)?;
    Ok(body.omega_dot(omega, wheel_speed, wheel_accel))
}

/// Integrated free-fall state sampled at the output rate.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub omega: Vec<Vec3>,
    pub omega_dot: Vec<Vec3>,
    pub wheel_speed: Vec<f64>,
    pub wheel_accel: Vec<f64>,
    /// Body-to-inertial attitude.
    pub attitude: Vec<UnitQuaternion<f64>>,
}

impl Trajectory {
    /// Total angular momentum in the inertial frame at every sample.
    pub fn inertial_momentum(&self, body: &WheelBody) -> Vec<Vec3> {
        self.omega
            .iter()
            .zip(&self.wheel_speed)
            .zip(&self.attitude)
            .map(|((w, &ws), q)| q * body.momentum(w, ws))
            .collect()
    }

    /// Momentum of the rigid body alone (wheel relative spin excluded),
    /// inertial frame.
    pub fn inertial_body_momentum(&self, body: &WheelBody) -> Vec<Vec3> {
        self.omega
            .iter()
            .zip(&self.attitude)
            .map(|(w, q)| q * body.inertia.apply(w))
            .collect()
    }

    pub fn kinetic_energy(&self, body: &WheelBody) -> Vec<f64> {
        self.omega.iter().map(|w| body.kinetic_energy(w)).collect()
    }
}

fn quat_rate(q: &Quaternion<f64>, omega: &Vec3) -> Quaternion<f64> {
    q * Quaternion::new(0.0, omega.x, omega.y, omega.z) * 0.5
}

/// Integrates the free-fall phase of `cfg`, `round(duration · rate)` samples.
pub fn integrate(cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let body = WheelBody::new(cfg.inertia, cfg.wheel.axial_inertia, cfg.wheel_axis)?;
    let n = (cfg.duration * cfg.sample_rate).round() as usize;
    let h = 1.0 / cfg.sample_rate;
    let wheel = &cfg.wheel;
    let f = |t: f64, w: &Vec3| body.omega_dot(w, wheel.speed(t), wheel.accel(t));

    let mut traj = Trajectory {
        t: Vec::with_capacity(n),
        omega: Vec::with_capacity(n),
        omega_dot: Vec::with_capacity(n),
        wheel_speed: Vec::with_capacity(n),
        wheel_accel: Vec::with_capacity(n),
        attitude: Vec::with_capacity(n),
    };
    let mut omega = cfg.omega0;
    let mut q: Quaternion<f64> = Quaternion::identity();
    for k in 0..n {
        let t = k as f64 * h;
        if omega.iter().any(|v| !v.is_finite()) || q.coords.iter().any(|v: &f64| !v.is_finite()) {
            return Err(Error::SimulationDiverged { time: t });
        }
        traj.t.push(t);
        traj.omega.push(omega);
        traj.omega_dot.push(f(t, &omega));
        traj.wheel_speed.push(wheel.speed(t));
        traj.wheel_accel.push(wheel.accel(t));
        traj.attitude.push(UnitQuaternion::new_normalize(q));

        match cfg.integrator {
            Integrator::ForwardEuler => {
                let k1 = f(t, &omega);
                let q1 = quat_rate(&q, &omega);
                omega += k1 * h;
                q += q1 * h;
            }
            Integrator::Rk4 => {
                let w1 = omega;
                let k1 = f(t, &w1);
                let q1 = quat_rate(&q, &w1);
                let w2 = omega + k1 * (0.5 * h);
                let k2 = f(t + 0.5 * h, &w2);
                let q2 = quat_rate(&(q + q1 * (0.5 * h)), &w2);
                let w3 = omega + k2 * (0.5 * h);
                let k3 = f(t + 0.5 * h, &w3);
                let q3 = quat_rate(&(q + q2 * (0.5 * h)), &w3);
                let w4 = omega + k3 * h;
                let k4 = f(t + h, &w4);
                let q4 = quat_rate(&(q + q3 * h), &w4);
                omega += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                q += (q1 + q2 * 2.0 + q3 * 2.0 + q4) * (h / 6.0);
            }
        }
        q = q.normalize();
    }
    Ok(traj)
}

/// Specific force at an IMU displaced by `offset` from the barycentre of a
/// freely falling body.
pub fn freefall_specific_force(omega: &Vec3, omega_dot: &Vec3, offset: &Vec3) -> Vec3 {
    omega_dot.cross(offset) + omega.cross(&omega.cross(offset))
}

/// Synthesizes the ideal sensor streams of `cfg`.
///
/// Layout: `rest_prefix` at rest (level, gravity along `-up`), `contact` in
/// hand, free fall, `contact` in hand. During contact the gyro and wheel hold
/// their free-fall boundary values.
pub fn simulate(cfg: &SimConfig) -> Result<ThrowRecording> {
    let traj = integrate(cfg)?;
    let rate = cfg.sample_rate;
    let n_rest = (cfg.rest_prefix * rate).round() as usize;
    let n_contact = (cfg.contact * rate).round() as usize;
    let n_ff = traj.t.len();
    if n_ff == 0 {
        return Err(Error::InvalidInput("free-fall phase has no samples".into()));
    }
    let total = n_rest + 2 * n_contact + n_ff;

    let mut gyro = Vec::with_capacity(total);
    let mut accel = Vec::with_capacity(total);
    let mut wheel = Vec::with_capacity(total);

    let at_rest = cfg.up * STANDARD_GRAVITY;
    for _ in 0..n_rest {
        gyro.push(Vec3::zeros());
        accel.push(at_rest);
        wheel.push(cfg.wheel.initial_speed);
    }
    let ff_force: Vec<Vec3> = traj
        .omega
        .iter()
        .zip(&traj.omega_dot)
        .map(|(w, wd)| freefall_specific_force(w, wd, &cfg.imu_offset))
        .collect();
    let hand = cfg.up * cfg.contact_accel;
    for _ in 0..n_contact {
        gyro.push(traj.omega[0]);
        accel.push(ff_force[0] + hand);
        wheel.push(traj.wheel_speed[0]);
    }
    gyro.extend_from_slice(&traj.omega);
    accel.extend_from_slice(&ff_force);
    wheel.extend_from_slice(&traj.wheel_speed);
    for _ in 0..n_contact {
        gyro.push(traj.omega[n_ff - 1]);
        accel.push(ff_force[n_ff - 1] + hand);
        wheel.push(traj.wheel_speed[n_ff - 1]);
    }

    let ff_start = n_rest + n_contact;
    Ok(ThrowRecording {
        sample_rate: rate,
        t: (0..total).map(|k| k as f64 / rate).collect(),
        gyro,
        accel,
        wheel,
        wheel_axis: cfg.wheel_axis,
        has_rest_prefix: n_rest > 0,
        rest_window: (n_rest > 0).then_some(Window { start: 0, end: n_rest }),
        freefall_window: Some(Window {
            start: ff_start,
            end: ff_start + n_ff,
        }),
    })
}

/// Sensor error model: white noise densities, constant biases and a gyro
/// scale-factor error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// (rad/s)/√Hz while the wheel is running.
    pub gyro_density: f64,
    /// Gyro density inside the recording's rest window, where the wheel is idle.
    #[serde(default = "NoiseModel::datasheet_gyro_density")]
    pub rest_gyro_density: f64,
    /// (rad/s)/√Hz
    pub wheel_density: f64,
    /// (m/s²)/√Hz
    pub accel_density: f64,
    #[serde(default)]
    pub gyro_bias: Vec3,
    #[serde(default)]
    pub accel_bias: Vec3,
    /// Fractional gyro scale error.
    #[serde(default)]
    pub gyro_scale_error: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseModel {
    pub fn datasheet_gyro_density() -> f64 {
        0.05e-3
    }

    pub fn none() -> Self {
        Self {
            gyro_density: 0.0,
            rest_gyro_density: 0.0,
            wheel_density: 0.0,
            accel_density: 0.0,
            gyro_bias: Vec3::zeros(),
            accel_bias: Vec3::zeros(),
            gyro_scale_error: 0.0,
            seed: 0,
        }
    }

    /// Noise levels representative of the real device with a running wheel.
    pub fn experiment(seed: u64) -> Self {
        Self {
            gyro_density: 0.75e-3,
            rest_gyro_density: Self::datasheet_gyro_density(),
            wheel_density: 0.1,
            accel_density: 0.01,
            seed,
            ..Self::none()
        }
    }

    /// Adds the IMU datasheet bias and scale-factor errors.
    pub fn with_datasheet_errors(mut self) -> Self {
        self.gyro_bias = Vec3::new(9e-3, -9e-3, 4e-3);
        self.accel_bias = Vec3::new(0.02, -0.02, 0.01) * STANDARD_GRAVITY;
        self.gyro_scale_error = 0.005;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = [self.gyro_density, self.rest_gyro_density, self.wheel_density, self.accel_density];
        if d.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("noise densities must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-sample standard deviation of white noise of `density` sampled at `rate`.
pub fn noise_sigma(density: f64, rate: f64) -> f64 {
    density * (rate / 2.0).sqrt()
}

/// Applies `noise` to an ideal recording. Deterministic for a fixed seed, and
/// every sample consumes the same random draws whatever the densities, so
/// runs that differ only in density share their noise realisation.
pub fn corrupt(rec: &ThrowRecording, noise: &NoiseModel) -> ThrowRecording {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let rate = rec.sample_rate;
    let sg = noise_sigma(noise.gyro_density, rate);
    let sg_rest = noise_sigma(noise.rest_gyro_density, rate);
    let sw = noise_sigma(noise.wheel_density, rate);
    let sa = noise_sigma(noise.accel_density, rate);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };

    let mut out = rec.clone();
    for i in 0..out.len() {
        let gn = Vec3::new(draw(), draw(), draw());
        let wn = draw();
        let an = Vec3::new(draw(), draw(), draw());
        let resting = rec.rest_window.is_some_and(|w| w.range().contains(&i));
        let gyro_sigma = if resting { sg_rest } else { sg };
        out.gyro[i] = rec.gyro[i] * (1.0 + noise.gyro_scale_error) + noise.gyro_bias + gn * gyro_sigma;
        out.wheel[i] = rec.wheel[i] + wn * sw;
        out.accel[i] = rec.accel[i] + noise.accel_bias + an * sa;
    }
    out
}

/// Re-integrates the body rate with forward Euler from sample `start`, driven
/// by measured wheel speed and acceleration series.
pub fn replay_forward_euler(
    body: &WheelBody,
    omega_start: Vec3,
    wheel_speed: &[f64],
    wheel_accel: &[f64],
    rate: f64,
) -> Result<Vec<Vec3>> {
    let h = 1.0 / rate;
    let mut omega = omega_start;
    let mut out = Vec::with_capacity(wheel_speed.len());
    for (k, (&ws, &wa)) in wheel_speed.iter().zip(wheel_accel).enumerate() {
        if omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::SimulationDiverged { time: k as f64 * h });
        }
        out.push(omega);
        omega += body.omega_dot(&omega, ws, wa) * h;
    }
    Ok(out)
}
