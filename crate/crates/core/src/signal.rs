//! Offline signal conditioning: zero-phase Butterworth low-pass, numerical
//! differentiation, rest-bias removal and free-fall window selection.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recording::ThrowRecording;
use crate::types::Vec3;

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.806_65;
/// Minimum number of samples in any analysis window.
pub const MIN_WINDOW_LEN: usize = 50;
/// Per-axis gyro standard deviation above which a rest window is rejected.
pub const REST_GYRO_STD_LIMIT: f64 = 0.02;
/// Net wheel-speed change below which a recording is treated as having no pulse.
pub const MIN_PULSE_SPEED_CHANGE: f64 = 5.0;
/// Rate of change of the low-passed accelerometer norm that marks the hand
/// catching or releasing the body, m/s³.
pub const CONTACT_JERK_LIMIT: f64 = 25.0 * STANDARD_GRAVITY;

/// Low-pass Butterworth design, applied forward then backward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    /// Order of one pass; must be even.
    pub order: usize,
    pub cutoff_hz: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            order: 4,
            cutoff_hz: 20.0,
        }
    }
}

impl FilterSpec {
    pub fn with_cutoff(cutoff_hz: f64) -> Self {
        Self {
            cutoff_hz,
            ..Self::default()
        }
    }

    pub fn validate(&self, rate: f64) -> Result<()> {
        if self.order < 2 || !self.order.is_multiple_of(2) {
            return Err(Error::InvalidFilter(format!(
                "order must be an even integer >= 2, got {}",
                self.order
            )));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < rate / 2.0) {
            return Err(Error::InvalidFilter(format!(
                "cutoff {} Hz must lie in (0, {}) Hz",
                self.cutoff_hz,
                rate / 2.0
            )));
        }
        Ok(())
    }

    /// Time constant of the slowest-decaying analog pole, in seconds.
    pub fn dominant_time_constant(&self) -> f64 {
        let wc = 2.0 * PI * self.cutoff_hz;
        1.0 / (wc * (PI / (2.0 * self.order as f64)).sin())
    }

    /// Reflective padding applied on each side by [`filtfilt`]: three
    /// dominant time constants.
    pub fn padding_len(&self, rate: f64) -> usize {
        (3.0 * self.dominant_time_constant() * rate).ceil() as usize
    }
}

/// Half-open sample range `[start, end)` into a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidWindow(format!("start {start} must precede end {end}")));
        }
        if end - start < MIN_WINDOW_LEN {
            return Err(Error::InvalidWindow(format!(
                "window of {} samples is shorter than {MIN_WINDOW_LEN}",
                end - start
            )));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }

    pub fn check_bounds(&self, len: usize) -> Result<()> {
        Window::new(self.start, self.end)?;
        if self.end > len {
            return Err(Error::InvalidWindow(format!(
                "window [{}, {}) exceeds recording of {len} samples",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    /// Direct form II transposed state for a constant input `x0` at steady state.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let y0 = x0 * (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1]);
        [y0 - self.b[0] * x0, self.b[2] * x0 - self.a[1] * y0]
    }

    fn run(&self, data: &mut [f64], mut z: [f64; 2]) {
        for v in data.iter_mut() {
            let x = *v;
            let y = self.b[0] * x + z[0];
            z[0] = self.b[1] * x - self.a[0] * y + z[1];
            z[1] = self.b[2] * x - self.a[1] * y;
            *v = y;
        }
    }
}

/// Digital Butterworth low-pass as a cascade of second-order sections
/// (bilinear transform with pre-warped cutoff).
#[derive(Debug, Clone)]
pub struct Butterworth {
    sections: Vec<Biquad>,
}

impl Butterworth {
    pub fn design(spec: &FilterSpec, rate: f64) -> Result<Self> {
        spec.validate(rate)?;
        let n = spec.order;
        let k = (PI * spec.cutoff_hz / rate).tan();
        let k2 = k * k;
        let sections = (0..n / 2)
            .map(|i| {
                let damping = 2.0 * (PI * (2 * i + 1) as f64 / (2 * n) as f64).sin();
                let d = 1.0 + damping * k + k2;
                Biquad {
                    b: [k2 / d, 2.0 * k2 / d, k2 / d],
                    a: [2.0 * (k2 - 1.0) / d, (1.0 - damping * k + k2) / d],
                }
            })
            .collect();
        Ok(Self { sections })
    }

    /// One causal pass, starting from the steady state of the first sample.
    fn pass(&self, data: &mut [f64]) {
        let Some(&x0) = data.first() else { return };
        for s in &self.sections {
            let z = s.steady_state(x0);
            s.run(data, z);
        }
    }

    /// Magnitude of one pass at frequency `f`.
    pub fn magnitude(&self, f: f64, rate: f64) -> f64 {
        let w = 2.0 * PI * f / rate;
        let z1 = nalgebra::Complex::new(w.cos(), -w.sin());
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|s| {
                let num = s.b[0] + z1 * s.b[1] + z2 * s.b[2];
                let den = 1.0 + z1 * s.a[0] + z2 * s.a[1];
                (num / den).norm()
            })
            .product()
    }

    /// Zero-phase application with odd reflective padding of `pad` samples
    /// on each side.
    ///
    /// The forward-backward and backward-forward orders differ only in their
    /// edge transients; their mean is returned so the result commutes exactly
    /// with time reversal.
    pub fn filtfilt(&self, x: &[f64], pad: usize) -> Result<Vec<f64>> {
        let n = x.len();
        if n <= pad || n < 2 {
            return Err(Error::SeriesTooShort { len: n, required: pad.max(1) });
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let mut fb = ext.clone();
        self.pass(&mut fb);
        fb.reverse();
        self.pass(&mut fb);
        fb.reverse();

        let mut bf = ext;
        bf.reverse();
        self.pass(&mut bf);
        bf.reverse();
        self.pass(&mut bf);

        Ok((pad..pad + n).map(|i| 0.5 * (fb[i] + bf[i])).collect())
    }
}

/// Zero-phase low-pass of `signal` sampled at `rate` Hz.
pub fn filtfilt(signal: &[f64], rate: f64, spec: &FilterSpec) -> Result<Vec<f64>> {
    let filter = Butterworth::design(spec, rate)?;
    filter.filtfilt(signal, spec.padding_len(rate))
}

/// Component-wise [`filtfilt`] of a vector series.
pub fn filtfilt_vec3(signal: &[Vec3], rate: f64, spec: &FilterSpec) -> Result<Vec<Vec3>> {
    let filter = Butterworth::design(spec, rate)?;
    let pad = spec.padding_len(rate);
    let mut axes = Vec::with_capacity(3);
    for k in 0..3 {
        let comp: Vec<f64> = signal.iter().map(|v| v[k]).collect();
        axes.push(filter.filtfilt(&comp, pad)?);
    }
    Ok((0..signal.len())
        .map(|i| Vec3::new(axes[0][i], axes[1][i], axes[2][i]))
        .collect())
}

/// Central differences in the interior, second-order one-sided differences at
/// the two edges.
pub fn differentiate(signal: &[f64], rate: f64) -> Vec<f64> {
    let n = signal.len();
    match n {
        0 => return Vec::new(),
        1 => return vec![0.0],
        2 => {
            let d = (signal[1] - signal[0]) * rate;
            return vec![d, d];
        }
        _ => {}
    }
    let half = 0.5 * rate;
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * signal[0] + 4.0 * signal[1] - signal[2]) * half;
    out[n - 1] = (3.0 * signal[n - 1] - 4.0 * signal[n - 2] + signal[n - 3]) * half;
    for i in 1..n - 1 {
        out[i] = (signal[i + 1] - signal[i - 1]) * half;
    }
    out
}

pub fn differentiate_vec3(signal: &[Vec3], rate: f64) -> Vec<Vec3> {
    let axes: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            let comp: Vec<f64> = signal.iter().map(|v| v[k]).collect();
            differentiate(&comp, rate)
        })
        .collect();
    (0..signal.len())
        .map(|i| Vec3::new(axes[0][i], axes[1][i], axes[2][i]))
        .collect()
}

fn mean_std(values: impl Iterator<Item = Vec3> + Clone) -> (Vec3, Vec3) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<Vec3>() / n;
    let var = values
        .map(|v| (v - mean).component_mul(&(v - mean)))
        .sum::<Vec3>()
        / n;
    (mean, var.map(f64::sqrt))
}

/// Subtracts sensor biases measured over a stationary window recorded on a
/// level surface.
///
/// The gyro mean over `rest` is removed. For the accelerometer, the body axis
/// with the largest mean reading is taken as vertical and the mean minus one
/// standard gravity along that axis is removed.
pub fn remove_bias(rec: &ThrowRecording, rest: Window) -> Result<ThrowRecording> {
    rest.check_bounds(rec.len())?;
    let (gyro_mean, gyro_std) = mean_std(rec.gyro[rest.range()].iter().copied());
    for axis in 0..3 {
        if gyro_std[axis] >= REST_GYRO_STD_LIMIT {
            return Err(Error::NotAtRest {
                axis,
                std: gyro_std[axis],
                limit: REST_GYRO_STD_LIMIT,
            });
        }
    }
    let (accel_mean, _) = mean_std(rec.accel[rest.range()].iter().copied());
    let up = accel_mean.iamax();
    let mut expected = Vec3::zeros();
    expected[up] = STANDARD_GRAVITY * accel_mean[up].signum();
    let accel_bias = accel_mean - expected;

    let mut out = rec.clone();
    out.gyro.iter_mut().for_each(|g| *g -= gyro_mean);
    out.accel.iter_mut().for_each(|a| *a -= accel_bias);
    Ok(out)
}

/// Picks the free-fall analysis window.
///
/// A manual window is validated and returned unchanged. Otherwise the wheel
/// pulse is located where the low-passed wheel acceleration exceeds 10 % of
/// its peak, and the span is widened on both sides for as long as the
/// low-passed accelerometer norm changes slower than [`CONTACT_JERK_LIMIT`].
pub fn select_window(rec: &ThrowRecording, manual: Option<Window>) -> Result<Window> {
    if let Some(w) = manual {
        w.check_bounds(rec.len())?;
        return Ok(w);
    }
    let spec = FilterSpec::default();
    let rate = rec.sample_rate;
    let wheel = filtfilt(&rec.wheel, rate, &spec)?;
    let (lo, hi) = wheel
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo < MIN_PULSE_SPEED_CHANGE {
        return Err(Error::NoWheelPulse);
    }
    let accel_rate: Vec<f64> = differentiate(&wheel, rate).iter().map(|v| v.abs()).collect();
    let peak = accel_rate.iter().copied().fold(0.0, f64::max);
    let threshold = 0.1 * peak;
    let pulse_start = accel_rate.iter().position(|&v| v > threshold).ok_or(Error::NoWheelPulse)?;
    let pulse_end = accel_rate.iter().rposition(|&v| v > threshold).ok_or(Error::NoWheelPulse)?;

    let accel_norm: Vec<f64> = filtfilt_vec3(&rec.accel, rate, &spec)?
        .iter()
        .map(|a| a.norm())
        .collect();
    let jerk: Vec<f64> = differentiate(&accel_norm, rate).iter().map(|v| v.abs()).collect();

    let mut start = pulse_start;
    while start > 0 && jerk[start - 1] <= CONTACT_JERK_LIMIT {
        start -= 1;
    }
    let mut end = pulse_end + 1;
    while end < jerk.len() && jerk[end] <= CONTACT_JERK_LIMIT {
        end += 1;
    }
    Window::new(start, end)
}
