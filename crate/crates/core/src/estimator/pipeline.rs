use serde::{Deserialize, Serialize};

use super::cog::{estimate_cog, CogFit, CogSample};
use super::regression::{build_regressor, solve_batch, BatchSolution, RegressorRow};
use crate::error::{Error, Result};
use crate::recording::ThrowRecording;
use crate::signal::{
    differentiate, differentiate_vec3, filtfilt, filtfilt_vec3, remove_bias, select_window, FilterSpec,
    Window, MIN_WINDOW_LEN,
};
use crate::types::{InertiaTensor, Vec3};

/// Per-sample weighting of the inertia regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Weight proportional to |ω|.
    SpinRate,
}

fn default_edge_trim() -> f64 {
    0.05
}

/// Signal-conditioning settings applied before estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionOptions {
    #[serde(default)]
    pub filter: FilterSpec,
    /// Free-fall window; falls back to the recording's own, then to automatic
    /// detection.
    #[serde(default)]
    pub window: Option<Window>,
    /// Stationary window for bias removal; falls back to the recording's own.
    #[serde(default)]
    pub rest_window: Option<Window>,
    /// Seconds dropped from each end of the window after filtering, where
    /// the smoothed hand-contact transitions leak in.
    #[serde(default = "default_edge_trim")]
    pub edge_trim: f64,
    #[serde(default)]
    pub weighting: Weighting,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            window: None,
            rest_window: None,
            edge_trim: default_edge_trim(),
            weighting: Weighting::Uniform,
        }
    }
}

/// Filtered, differentiated free-fall samples of one throw.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedThrow {
    pub sample_rate: f64,
    /// Samples retained, as indices into the source recording.
    pub window: Window,
    pub omega: Vec<Vec3>,
    pub omega_dot: Vec<Vec3>,
    pub wheel_speed: Vec<f64>,
    pub wheel_accel: Vec<f64>,
    pub accel: Vec<Vec3>,
    pub wheel_axis: Vec3,
    pub bias_removed: bool,
}

impl ConditionedThrow {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn regressor_rows(&self, wheel_inertia: f64, weighting: Weighting) -> Vec<RegressorRow> {
        (0..self.len())
            .map(|k| {
                let mut row = build_regressor(
                    &self.omega[k],
                    &self.omega_dot[k],
                    self.wheel_speed[k],
                    self.wheel_accel[k],
                    wheel_inertia,
                    &self.wheel_axis,
                );
                if weighting == Weighting::SpinRate {
                    row.weight = self.omega[k].norm();
                }
                row
            })
            .collect()
    }

    pub fn cog_sample(&self) -> CogSample<'_> {
        CogSample {
            omega: &self.omega,
            omega_dot: &self.omega_dot,
            accel: &self.accel,
        }
    }
}

/// Bias removal, zero-phase filtering of every channel, differentiation of
/// gyro and wheel speed, then extraction of the trimmed free-fall window.
pub fn condition(rec: &ThrowRecording, opts: &ConditionOptions) -> Result<ConditionedThrow> {
    rec.validate()?;
    if !(opts.edge_trim >= 0.0) {
        return Err(Error::InvalidInput("edge trim must be >= 0".into()));
    }
    let rate = rec.sample_rate;
    opts.filter.validate(rate)?;

    let rest = opts.rest_window.or(if rec.has_rest_prefix { rec.rest_window } else { None });
    let debiased;
    let (src, bias_removed) = match rest {
        Some(w) => {
            debiased = remove_bias(rec, w)?;
            (&debiased, true)
        }
        None => (rec, false),
    };

    let window = match opts.window.or(rec.freefall_window) {
        Some(w) => select_window(src, Some(w))?,
        None => select_window(src, None)?,
    };
    let trim = (opts.edge_trim * rate).round() as usize;
    if window.len() < 2 * trim + MIN_WINDOW_LEN {
        return Err(Error::InvalidWindow(format!(
            "window of {} samples is too short after trimming {trim} samples per side",
            window.len()
        )));
    }
    let kept = Window::new(window.start + trim, window.end - trim)?;

    let omega = filtfilt_vec3(&src.gyro, rate, &opts.filter)?;
    let accel = filtfilt_vec3(&src.accel, rate, &opts.filter)?;
    let wheel = filtfilt(&src.wheel, rate, &opts.filter)?;
    let omega_dot = differentiate_vec3(&omega, rate);
    let wheel_accel = differentiate(&wheel, rate);

    let r = kept.range();
    Ok(ConditionedThrow {
        sample_rate: rate,
        window: kept,
        omega: omega[r.clone()].to_vec(),
        omega_dot: omega_dot[r.clone()].to_vec(),
        wheel_speed: wheel[r.clone()].to_vec(),
        wheel_accel: wheel_accel[r.clone()].to_vec(),
        accel: accel[r].to_vec(),
        wheel_axis: rec.wheel_axis,
        bias_removed,
    })
}

/// Combined-body inertia and barycentre from one or more throws of the same
/// configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedEstimate {
    pub inertia: InertiaTensor,
    pub x_comb: Vec3,
    pub inertia_fit: BatchSolution,
    pub cog_fit: CogFit,
}

/// Stacks the regressor rows and CoG equations of all `throws` and solves
/// both least-squares problems.
pub fn estimate_combined(
    throws: &[ConditionedThrow],
    wheel_inertia: f64,
    weighting: Weighting,
) -> Result<CombinedEstimate> {
    if throws.is_empty() {
        return Err(Error::InvalidInput("at least one throw is required".into()));
    }
    let rows: Vec<RegressorRow> = throws
        .iter()
        .flat_map(|t| t.regressor_rows(wheel_inertia, weighting))
        .collect();
    let inertia_fit = solve_batch(&rows)?;
    let segments: Vec<CogSample<'_>> = throws.iter().map(ConditionedThrow::cog_sample).collect();
    let cog_fit = estimate_cog(&segments)?;
    Ok(CombinedEstimate {
        inertia: inertia_fit.inertia(),
        x_comb: cog_fit.x_comb,
        inertia_fit,
        cog_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{corrupt, simulate, NoiseModel, SimConfig, WheelPulse};
    use crate::dynamics::{REFERENCE_WHEEL_IMPULSE, REFERENCE_WHEEL_INERTIA};
    use crate::types::Rotation;
    use approx::assert_relative_eq;

    fn config() -> SimConfig {
        let inertia = InertiaTensor::diagonal(450e-6, 700e-6, 850e-6)
            .rotated(&Rotation::from_euler_angles(0.4, 0.2, -0.9));
        let omega0 = Vec3::new(1.0, 2.0, -1.5).normalize() * (4.0 * std::f64::consts::PI);
        SimConfig::new(
            inertia,
            omega0,
            Vec3::new(-0.011, -0.002, -0.043),
            WheelPulse::reference(REFERENCE_WHEEL_INERTIA, REFERENCE_WHEEL_IMPULSE),
        )
    }

    fn relative(a: &InertiaTensor, b: &InertiaTensor) -> f64 {
        (*a - *b).frobenius_norm() / b.frobenius_norm()
    }

    #[test]
    fn noiseless_throw_recovers_inertia_and_cog() {
        let cfg = config();
        let rec = simulate(&cfg).unwrap();
        let throw = condition(&rec, &ConditionOptions::default()).unwrap();
        let est = estimate_combined(&[throw], REFERENCE_WHEEL_INERTIA, Weighting::Uniform).unwrap();
        assert!(relative(&est.inertia, &cfg.inertia) < 2e-3);
        assert!((est.x_comb + cfg.imu_offset).norm() < 1e-4);
    }

    #[test]
    fn contact_phases_are_trimmed_out() {
        let mut cfg = config();
        cfg.rest_prefix = 0.3;
        cfg.contact = 0.15;
        let rec = corrupt(&simulate(&cfg).unwrap(), &NoiseModel::none().with_datasheet_errors());
        let throw = condition(&rec, &ConditionOptions::default()).unwrap();
        assert!(throw.bias_removed);
        let ff = rec.freefall_window.unwrap();
        assert_eq!(throw.window.start, ff.start + 200);
        let est = estimate_combined(&[throw], REFERENCE_WHEEL_INERTIA, Weighting::Uniform).unwrap();
        // the gyro scale error is not observable from a rest window
        assert!(relative(&est.inertia, &cfg.inertia) < 0.02);
        assert!((est.x_comb + cfg.imu_offset).norm() < 5e-4);
    }

    #[test]
    fn automatic_window_finds_free_fall() {
        let mut cfg = config();
        cfg.contact = 0.2;
        let mut rec = simulate(&cfg).unwrap();
        let truth = rec.freefall_window.take().unwrap();
        let throw = condition(&rec, &ConditionOptions::default()).unwrap();
        let trim = 200;
        // the detector errs on the inside, by at most 25 ms
        let (start, end) = (truth.start + trim, truth.end - trim);
        assert!(throw.window.start >= start && throw.window.start < start + 100, "{:?}", throw.window);
        assert!(throw.window.end <= end && throw.window.end + 100 > end, "{:?}", throw.window);
    }

    #[test]
    fn frame_rotation_rotates_estimate() {
        let cfg = config();
        let rec = simulate(&cfg).unwrap();
        let r = Rotation::from_euler_angles(0.7, -0.3, 2.1);
        let mut turned = rec.clone();
        turned.gyro.iter_mut().for_each(|g| *g = r * *g);
        turned.accel.iter_mut().for_each(|a| *a = r * *a);
        turned.wheel_axis = r * rec.wheel_axis;
        let opts = ConditionOptions::default();
        let a = estimate_combined(&[condition(&rec, &opts).unwrap()], REFERENCE_WHEEL_INERTIA, Weighting::Uniform)
            .unwrap();
        let b = estimate_combined(&[condition(&turned, &opts).unwrap()], REFERENCE_WHEEL_INERTIA, Weighting::Uniform)
            .unwrap();
        assert!(relative(&b.inertia, &a.inertia.rotated(&r)) < 1e-9);
        assert_relative_eq!(b.x_comb, r * a.x_comb, epsilon = 1e-9);
    }

    #[test]
    fn window_outside_recording_is_rejected() {
        let rec = simulate(&config()).unwrap();
        let opts = ConditionOptions {
            window: Some(Window { start: 100, end: 10_000 }),
            ..ConditionOptions::default()
        };
        assert!(matches!(condition(&rec, &opts), Err(Error::InvalidWindow(_))));
    }
}
