//! Synthetic bench experiments: throws of the simulated device, alone or
//! carrying an object, with randomised spin and sensor noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bodies::{reference_device, Assembly};
use crate::dynamics::{corrupt, simulate, NoiseModel, SimConfig, WheelPulse};
use crate::dynamics::{REFERENCE_WHEEL_IMPULSE, REFERENCE_WHEEL_INERTIA};
use crate::error::{Error, Result};
use crate::montecarlo::sample_initial_spin;
use crate::recording::ThrowRecording;
use crate::types::PointMassSet;

/// Wheel impulse for throws of the bare device, N·m·s. Smaller than the
/// loaded-device pulse so the light device is not spun up excessively.
pub const DEVICE_ONLY_IMPULSE: f64 = 0.3e-3;

/// Throw conditions shared by every throw of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bench {
    pub device: PointMassSet,
    pub wheel_inertia: f64,
    pub sample_rate: f64,
    /// Free-fall duration, s.
    pub duration: f64,
    pub rest_prefix: f64,
    pub contact: f64,
    /// Initial spin magnitude range, rad/s.
    pub spin: [f64; 2],
    pub noise: NoiseModel,
}

impl Bench {
    /// Reference device at the experiment noise level, 1 s free fall at
    /// 4 kHz, spins between 1.5 and 2.5 rev/s.
    pub fn reference() -> Self {
        Self {
            device: reference_device(),
            wheel_inertia: REFERENCE_WHEEL_INERTIA,
            sample_rate: 4000.0,
            duration: 1.0,
            rest_prefix: 0.0,
            contact: 0.0,
            spin: [3.0 * std::f64::consts::PI, 5.0 * std::f64::consts::PI],
            noise: NoiseModel::experiment(0),
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.noise = NoiseModel::none();
        self
    }

    /// Simulates one throw. `seed` fixes both the spin draw and the noise.
    pub fn throw(&self, object: Option<&PointMassSet>, impulse: f64, seed: u64) -> Result<SyntheticThrow> {
        if !(self.spin[0] > 0.0 && self.spin[0] <= self.spin[1]) {
            return Err(Error::InvalidInput("spin range must be positive and ordered".into()));
        }
        let assembly = Assembly::new(&self.device, object)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega0 = sample_initial_spin(&mut rng, self.spin);
        let mut config = SimConfig::new(
            assembly.combined.inertia,
            omega0,
            assembly.imu_offset(),
            WheelPulse::reference(self.wheel_inertia, impulse),
        );
        config.sample_rate = self.sample_rate;
        config.duration = self.duration;
        config.rest_prefix = self.rest_prefix;
        config.contact = self.contact;
        let ideal = simulate(&config)?;
        let recording = corrupt(&ideal, &self.noise.with_seed(rng.random()));
        Ok(SyntheticThrow {
            recording,
            config,
            assembly,
        })
    }

    /// `n` throws with seeds `seed, seed + 1, ...`.
    pub fn throws(
        &self,
        object: Option<&PointMassSet>,
        impulse: f64,
        n: usize,
        seed: u64,
    ) -> Result<Vec<SyntheticThrow>> {
        (0..n as u64).map(|k| self.throw(object, impulse, seed.wrapping_add(k))).collect()
    }

    /// Loaded-device throws use the reference wheel impulse.
    pub fn object_throws(&self, object: &PointMassSet, n: usize, seed: u64) -> Result<Vec<SyntheticThrow>> {
        self.throws(Some(object), REFERENCE_WHEEL_IMPULSE, n, seed)
    }

    pub fn device_only_throws(&self, n: usize, seed: u64) -> Result<Vec<SyntheticThrow>> {
        self.throws(None, DEVICE_ONLY_IMPULSE, n, seed)
    }
}

/// A simulated throw together with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticThrow {
    pub recording: ThrowRecording,
    pub config: SimConfig,
    pub assembly: Assembly,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{mounted_grid, GridConfig};

    #[test]
    fn throws_are_reproducible_and_distinct() {
        let bench = Bench::reference();
        let grid = mounted_grid(GridConfig::E);
        let a = bench.object_throws(&grid, 2, 5).unwrap();
        let b = bench.object_throws(&grid, 2, 5).unwrap();
        assert_eq!(a[0].recording, b[0].recording);
        assert_ne!(a[0].recording, a[1].recording);
        assert_ne!(a[0].config.omega0, a[1].config.omega0);
        let spin = a[0].config.omega0.norm();
        assert!((bench.spin[0]..=bench.spin[1]).contains(&spin));
    }

    #[test]
    fn combined_truth_includes_device() {
        let bench = Bench::reference();
        let t = bench.throw(Some(&mounted_grid(GridConfig::B)), REFERENCE_WHEEL_IMPULSE, 1).unwrap();
        let obj = t.assembly.object.unwrap();
        assert!((t.assembly.combined.mass - obj.mass - t.assembly.device.mass).abs() < 1e-12);
        assert_eq!(t.config.imu_offset, -t.assembly.combined.cog);
    }
}
