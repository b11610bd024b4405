//! Randomised bodies and throws, and parameter sweeps of estimator accuracy.

use std::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{corrupt, simulate, NoiseModel, SimConfig, WheelPulse};
use crate::dynamics::{REFERENCE_WHEEL_IMPULSE, REFERENCE_WHEEL_INERTIA};
use crate::error::{Error, Result};
use crate::estimator::{condition, estimate_cog, solve_batch, ConditionOptions, Weighting};
use crate::metrics::AccuracyReport;
use crate::signal::FilterSpec;
use crate::types::{InertiaTensor, Rotation, Vec3, M_TO_MM};

/// Environment variable holding the default number of sweep workers.
pub const WORKERS_ENV: &str = "THROW_INERTIA_WORKERS";
/// Smallest trial count for which percentiles are reported.
pub const MIN_TRIALS: usize = 30;
/// Failure fraction above which a grid point is flagged.
pub const FAILURE_FLAG_RATE: f64 = 0.1;
const MAX_REJECTIONS: usize = 1_000_000;

/// Random principal moments with a fixed trace, in a random frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySampler {
    /// kg·m²
    pub trace: f64,
    /// Range of the largest-to-smallest moment ratio.
    pub kappa: [f64; 2],
    /// Optional accepted range of the smallest relative moment gap.
    #[serde(default)]
    pub min_delta_sigma: Option<[f64; 2]>,
}

impl Default for BodySampler {
    fn default() -> Self {
        Self {
            trace: 2000e-6,
            kappa: [1.0, 5.0],
            min_delta_sigma: None,
        }
    }
}

/// One drawn body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledBody {
    pub inertia: InertiaTensor,
    /// Ascending principal moments, kg·m².
    pub lambdas: [f64; 3],
    pub kappa: f64,
    pub min_delta_sigma: f64,
}

fn relative_gap(l: &[f64; 3]) -> f64 {
    ((l[1] - l[0]) / l[1]).min((l[2] - l[1]) / l[2])
}

impl BodySampler {
    pub fn validate(&self) -> Result<()> {
        if !(self.trace.is_finite() && self.trace > 0.0) {
            return Err(Error::InvalidInput(format!("trace must be positive, got {}", self.trace)));
        }
        if !(self.kappa[0] >= 1.0 && self.kappa[0] <= self.kappa[1] && self.kappa[1].is_finite()) {
            return Err(Error::InvalidInput(format!("kappa range {:?} must lie in [1, inf)", self.kappa)));
        }
        if let Some(b) = self.min_delta_sigma {
            if !(b[0] >= 0.0 && b[0] <= b[1] && b[1] <= 1.0) {
                return Err(Error::InvalidInput(format!("min_delta_sigma band {b:?} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Draws κ and the middle moment uniformly, rejecting triples that break
    /// the triangle inequality or fall outside the gap band, then applies a
    /// uniformly random rotation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SampledBody> {
        self.validate()?;
        for _ in 0..MAX_REJECTIONS {
            let kappa = rng.random_range(self.kappa[0]..=self.kappa[1]);
            let mid = rng.random_range(1.0..=kappa);
            if 1.0 + mid < kappa {
                continue;
            }
            let scale = self.trace / (1.0 + mid + kappa);
            let lambdas = [scale, mid * scale, kappa * scale];
            let gap = relative_gap(&lambdas);
            if let Some(band) = self.min_delta_sigma {
                if !(band[0]..=band[1]).contains(&gap) {
                    continue;
                }
            }
            let rotation = uniform_rotation(rng);
            let inertia = InertiaTensor::diagonal(lambdas[0], lambdas[1], lambdas[2]).rotated(&rotation);
            return Ok(SampledBody {
                inertia,
                lambdas,
                kappa,
                min_delta_sigma: gap,
            });
        }
        Err(Error::InvalidInput(format!(
            "no body satisfying kappa {:?} and gap band {:?} found",
            self.kappa, self.min_delta_sigma
        )))
    }
}

/// Body tensor drawn by `sampler`.
pub fn sample_body<R: Rng + ?Sized>(sampler: &BodySampler, rng: &mut R) -> Result<InertiaTensor> {
    Ok(sampler.sample(rng)?.inertia)
}

/// Rotation drawn uniformly from SO(3) via a normalised Gaussian quaternion.
pub fn uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    loop {
        let q = Quaternion::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        if q.norm() > 1e-12 {
            return UnitQuaternion::from_quaternion(q).to_rotation_matrix();
        }
    }
}

/// Initial body rate with uniformly random direction and magnitude uniform in
/// `range` (rad/s).
pub fn sample_initial_spin<R: Rng + ?Sized>(rng: &mut R, range: [f64; 2]) -> Vec3 {
    let dir = loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-12 {
            break v / n;
        }
    };
    let magnitude = if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..=range[1])
    };
    dir * magnitude
}

/// Quantity varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// |ω₀|, rad/s.
    SpinMagnitude,
    MinDeltaSigmaBand,
    KappaBand,
    /// N·m·s
    WheelImpulse,
    /// (rad/s)/√Hz
    GyroNoiseDensity,
    /// (rad/s)/√Hz
    WheelNoiseDensity,
    /// Hz
    CutoffHz,
}

impl SweepParameter {
    fn takes_band(self) -> bool {
        matches!(self, SweepParameter::MinDeltaSigmaBand | SweepParameter::KappaBand)
    }
}

/// A grid point: a single value, or a band for the band parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridValue {
    Scalar(f64),
    Band([f64; 2]),
}

impl GridValue {
    fn band(self) -> [f64; 2] {
        match self {
            GridValue::Scalar(v) => [v, v],
            GridValue::Band(b) => b,
        }
    }

    fn scalar(self) -> Option<f64> {
        match self {
            GridValue::Scalar(v) => Some(v),
            GridValue::Band(_) => None,
        }
    }

    pub fn label(self) -> String {
        match self {
            GridValue::Scalar(v) => format!("{v}"),
            GridValue::Band([a, b]) => format!("[{a}, {b}]"),
        }
    }
}

fn default_trials() -> usize {
    200
}

fn default_percentile() -> f64 {
    99.0
}

/// Conditions held fixed across a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct SweepBase {
    pub body: BodySampler,
    /// |ω₀| range, rad/s.
    pub spin: [f64; 2],
    pub wheel_inertia: f64,
    pub wheel_impulse: f64,
    pub noise: NoiseModel,
    pub sample_rate: f64,
    pub duration: f64,
    pub filter: FilterSpec,
    pub edge_trim: f64,
    /// Barycentre to IMU, m.
    pub imu_offset: Vec3,
}

impl Default for SweepBase {
    fn default() -> Self {
        Self {
            body: BodySampler::default(),
            spin: [2.0 * PI, 6.0 * PI],
            wheel_inertia: REFERENCE_WHEEL_INERTIA,
            wheel_impulse: REFERENCE_WHEEL_IMPULSE,
            noise: NoiseModel::experiment(0),
            sample_rate: 4000.0,
            duration: 1.0,
            filter: FilterSpec::default(),
            edge_trim: 0.05,
            imu_offset: Vec3::new(-0.010, -0.002, -0.045),
        }
    }
}

/// Definition of a Monte Carlo sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Vec<GridValue>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    #[serde(default)]
    pub base: SweepBase,
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, grid: Vec<GridValue>) -> Self {
        Self {
            parameter,
            grid,
            trials: default_trials(),
            seed: 0,
            percentile: default_percentile(),
            base: SweepBase::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidInput("sweep grid is empty".into()));
        }
        if self.trials < MIN_TRIALS {
            return Err(Error::InvalidInput(format!(
                "trials must be at least {MIN_TRIALS} for percentile estimates, got {}",
                self.trials
            )));
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(Error::InvalidInput(format!("percentile must lie in (0, 100], got {}", self.percentile)));
        }
        for (i, g) in self.grid.iter().enumerate() {
            let ok = match (self.parameter.takes_band(), g) {
                (true, GridValue::Band(b)) => b[0] <= b[1] && b.iter().all(|v| v.is_finite()),
                (false, GridValue::Scalar(v)) => v.is_finite() && *v >= 0.0,
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "grid[{i}] = {} is not a valid {:?} value",
                    g.label(),
                    self.parameter
                )));
            }
        }
        self.base.body.validate()?;
        self.base.noise.validate()?;
        if !(self.base.spin[0] > 0.0 && self.base.spin[0] <= self.base.spin[1]) {
            return Err(Error::InvalidInput("base spin range must be positive and ordered".into()));
        }
        Ok(())
    }

    /// Settings of grid point `index`.
    fn point(&self, index: usize) -> TrialSettings {
        let b = &self.base;
        let mut s = TrialSettings {
            body: b.body,
            spin: b.spin,
            wheel_impulse: b.wheel_impulse,
            noise: b.noise,
            filter: b.filter,
        };
        let g = self.grid[index];
        match self.parameter {
            SweepParameter::SpinMagnitude => s.spin = g.band(),
            SweepParameter::MinDeltaSigmaBand => s.body.min_delta_sigma = Some(g.band()),
            SweepParameter::KappaBand => s.body.kappa = g.band(),
            SweepParameter::WheelImpulse => s.wheel_impulse = g.scalar().unwrap_or(b.wheel_impulse),
            SweepParameter::GyroNoiseDensity => s.noise.gyro_density = g.scalar().unwrap_or(0.0),
            SweepParameter::WheelNoiseDensity => s.noise.wheel_density = g.scalar().unwrap_or(0.0),
            SweepParameter::CutoffHz => s.filter.cutoff_hz = g.scalar().unwrap_or(b.filter.cutoff_hz),
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
struct TrialSettings {
    body: BodySampler,
    spin: [f64; 2],
    wheel_impulse: f64,
    noise: NoiseModel,
    filter: FilterSpec,
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub grid_index: usize,
    pub trial: usize,
    /// Ascending true principal moments, kg·m².
    pub lambdas: [f64; 3],
    pub kappa: f64,
    pub min_delta_sigma: f64,
    pub omega0: [f64; 3],
    pub report: Option<AccuracyReport>,
    /// Distance of the estimated barycentre from the truth, mm; absent when
    /// the throw was too slow for the lever-arm fit.
    pub cog_error_mm: Option<f64>,
    pub error: Option<String>,
}

/// Summary statistics of one metric at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub percentile: f64,
}

impl Stats {
    fn of(values: &[f64], p: f64) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: percentile_sorted(&v, 50.0),
            percentile: percentile_sorted(&v, p),
        })
    }
}

/// Percentile of ascending data with linear interpolation between ranks.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (p / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Aggregates of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub index: usize,
    pub value: GridValue,
    pub trials: usize,
    pub failures: usize,
    pub flagged: bool,
    pub epsilon: Option<Stats>,
    /// degrees
    pub psi_deg: Option<Stats>,
    pub cog_error_mm: Option<Stats>,
}

impl GridSummary {
    fn from_records(index: usize, value: GridValue, records: &[TrialRecord], p: f64) -> Self {
        let ok: Vec<&AccuracyReport> = records.iter().filter_map(|r| r.report.as_ref()).collect();
        let failures = records.len() - ok.len();
        let eps: Vec<f64> = ok.iter().map(|r| r.epsilon).collect();
        let psi: Vec<f64> = ok.iter().map(|r| r.psi.to_degrees()).collect();
        let cog: Vec<f64> = records.iter().filter_map(|r| r.cog_error_mm).collect();
        Self {
            index,
            value,
            trials: records.len(),
            failures,
            flagged: failures as f64 > FAILURE_FLAG_RATE * records.len() as f64,
            epsilon: Stats::of(&eps, p),
            psi_deg: Stats::of(&psi, p),
            cog_error_mm: Stats::of(&cog, p),
        }
    }
}

/// All trials of a sweep, ordered by grid point then trial, and the
/// per-point summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub percentile: f64,
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<GridSummary>,
}

/// Independent random streams of one trial. They depend only on the sweep
/// seed and the trial index, so every grid point sees the same draws.
fn trial_rng(seed: u64, trial: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3 * trial as u64 + stream);
    rng
}

fn run_trial(spec: &SweepSpec, settings: &TrialSettings, grid_index: usize, trial: usize) -> TrialRecord {
    let mut record = TrialRecord {
        grid_index,
        trial,
        lambdas: [f64::NAN; 3],
        kappa: f64::NAN,
        min_delta_sigma: f64::NAN,
        omega0: [f64::NAN; 3],
        report: None,
        cog_error_mm: None,
        error: None,
    };
    let body = match settings.body.sample(&mut trial_rng(spec.seed, trial, 0)) {
        Ok(b) => b,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.lambdas = body.lambdas;
    record.kappa = body.kappa;
    record.min_delta_sigma = body.min_delta_sigma;
    let omega0 = sample_initial_spin(&mut trial_rng(spec.seed, trial, 1), settings.spin);
    record.omega0 = omega0.into();
    let noise_seed: u64 = trial_rng(spec.seed, trial, 2).random();

    let outcome = (|| -> Result<(AccuracyReport, Option<f64>)> {
        let b = &spec.base;
        let mut cfg = SimConfig::new(
            body.inertia,
            omega0,
            b.imu_offset,
            WheelPulse::reference(b.wheel_inertia, settings.wheel_impulse),
        );
        cfg.sample_rate = b.sample_rate;
        cfg.duration = b.duration;
        let rec = corrupt(&simulate(&cfg)?, &settings.noise.with_seed(noise_seed));
        let opts = ConditionOptions {
            filter: settings.filter,
            edge_trim: b.edge_trim,
            ..ConditionOptions::default()
        };
        let throw = condition(&rec, &opts)?;
        let fit = solve_batch(&throw.regressor_rows(b.wheel_inertia, Weighting::Uniform))?;
        let report = AccuracyReport::evaluate(&body.inertia, &fit.inertia())?;
        // a throw too slow for the lever-arm fit still scores its inertia
        let cog = estimate_cog(&[throw.cog_sample()])
            .ok()
            .map(|c| (c.x_comb + b.imu_offset).norm() * M_TO_MM);
        Ok((report, cog))
    })();
    match outcome {
        Ok((report, cog)) => {
            record.report = Some(report);
            record.cog_error_mm = cog;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|n| *n > 0)
}

/// Runs every trial of `spec` on `workers` threads (the rayon default when
/// `None`), calling `progress` after each grid point completes.
pub fn run_sweep_with(
    spec: &SweepSpec,
    workers: Option<usize>,
    mut progress: impl FnMut(&GridSummary),
) -> Result<SweepResult> {
    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;

    let mut records = Vec::with_capacity(spec.grid.len() * spec.trials);
    let mut summaries = Vec::with_capacity(spec.grid.len());
    for index in 0..spec.grid.len() {
        let settings = spec.point(index);
        let point: Vec<TrialRecord> = pool.install(|| {
            (0..spec.trials)
                .into_par_iter()
                .map(|trial| run_trial(spec, &settings, index, trial))
                .collect()
        });
        let summary = GridSummary::from_records(index, spec.grid[index], &point, spec.percentile);
        progress(&summary);
        summaries.push(summary);
        records.extend(point);
    }
    Ok(SweepResult {
        parameter: spec.parameter,
        percentile: spec.percentile,
        records,
        summaries,
    })
}

/// [`run_sweep_with`] using the worker count from the environment and no
/// progress reporting.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with(spec, workers_from_env(), |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{condition_number, principal_similarity};

    #[test]
    fn unit_kappa_gives_sphere() {
        let sampler = BodySampler {
            kappa: [1.0, 1.0],
            ..BodySampler::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let i = sample_body(&sampler, &mut rng).unwrap();
            let sphere = InertiaTensor::diagonal(1.0, 1.0, 1.0) * (2000e-6 / 3.0);
            assert!((i - sphere).frobenius_norm() < 1e-15);
        }
    }

    #[test]
    fn samples_are_physical_with_exact_trace() {
        let sampler = BodySampler::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut kappas = Vec::new();
        for _ in 0..10_000 {
            let b = sampler.sample(&mut rng).unwrap();
            assert!((b.inertia.trace() - 2000e-6).abs() < 1e-15);
            assert!(b.inertia.is_physical());
            assert!((condition_number(&b.inertia).unwrap() - b.kappa).abs() < 1e-9 * b.kappa);
            kappas.push(b.kappa);
        }
        // the triangle rule thins out elongated draws, so only check support
        // and that every part of the range is reached
        let mut bins = [0usize; 4];
        for k in &kappas {
            assert!((1.0..=5.0).contains(k));
            bins[((k - 1.0) / 1.0).min(3.0) as usize] += 1;
        }
        assert!(bins.iter().all(|b| *b > 100), "{bins:?}");
    }

    #[test]
    fn kappa_is_uniform_where_triangle_never_binds() {
        // for κ <= 2 every middle moment satisfies the triangle inequality
        let sampler = BodySampler {
            kappa: [1.0, 2.0],
            ..BodySampler::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let mut bins = [0f64; 10];
        for _ in 0..n {
            let k = sampler.sample(&mut rng).unwrap().kappa;
            bins[((k - 1.0) * 10.0).min(9.0) as usize] += 1.0;
        }
        let expected = n as f64 / 10.0;
        let chi2: f64 = bins.iter().map(|o| (o - expected).powi(2) / expected).sum();
        // 9 degrees of freedom, 0.1 % critical value
        assert!(chi2 < 27.88, "chi2 {chi2}");
    }

    #[test]
    fn gap_band_is_respected() {
        let sampler = BodySampler {
            min_delta_sigma: Some([0.002, 0.005]),
            ..BodySampler::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let b = sampler.sample(&mut rng).unwrap();
            let gap = principal_similarity(&b.inertia).unwrap();
            assert!((0.002 - 1e-9..=0.005 + 1e-9).contains(&gap), "{gap}");
        }
    }

    #[test]
    fn fixed_spin_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let w = sample_initial_spin(&mut rng, [2.0 * PI, 2.0 * PI]);
            assert!((w.norm() - 2.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn spin_direction_is_isotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| sample_initial_spin(&mut rng, [1.0, 1.0]))
            .sum::<Vec3>()
            / n as f64;
        assert!(mean.norm() < 0.05);
    }

    #[test]
    fn spin_magnitude_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let (lo, hi) = (2.0 * PI, 6.0 * PI);
        let mut u: Vec<f64> = (0..n)
            .map(|_| (sample_initial_spin(&mut rng, [lo, hi]).norm() - lo) / (hi - lo))
            .collect();
        u.sort_by(f64::total_cmp);
        let d = u
            .iter()
            .enumerate()
            .map(|(i, x)| ((i + 1) as f64 / n as f64 - x).max(x - i as f64 / n as f64))
            .fold(0.0, f64::max);
        // Kolmogorov-Smirnov critical value at 1 %
        assert!(d < 1.63 / (n as f64).sqrt(), "D = {d}");
    }

    #[test]
    fn rotations_are_proper() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let r = uniform_rotation(&mut rng);
            assert!((r.matrix().determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile_sorted(&v, 50.0), 3.0);
        assert_eq!(percentile_sorted(&v, 100.0), 5.0);
        assert!((percentile_sorted(&v, 99.0) - 4.96).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec::new(SweepParameter::CutoffHz, vec![GridValue::Scalar(20.0)]);
        assert!(spec.validate().is_ok());
        spec.trials = 10;
        assert!(spec.validate().is_err());
        spec.trials = 50;
        spec.grid = vec![GridValue::Band([1.0, 2.0])];
        assert!(spec.validate().is_err());
        spec.grid.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn grid_values_parse_as_scalars_or_bands() {
        let g: Vec<GridValue> = serde_json::from_str("[1.5, [0.01, 0.02]]").unwrap();
        assert_eq!(g, vec![GridValue::Scalar(1.5), GridValue::Band([0.01, 0.02])]);
    }

    #[test]
    fn noiseless_sweep_is_deterministic_and_accurate() {
        let grid = [2.0 * PI, 4.0 * PI, 6.0 * PI].map(GridValue::Scalar).to_vec();
        let mut spec = SweepSpec::new(SweepParameter::SpinMagnitude, grid);
        spec.trials = 30;
        spec.seed = 17;
        spec.base.noise = NoiseModel::none();
        let a = run_sweep_with(&spec, Some(2), |_| {}).unwrap();
        let b = run_sweep_with(&spec, Some(3), |_| {}).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 90);
        for s in &a.summaries {
            assert_eq!(s.failures, 0);
            assert!(s.epsilon.unwrap().median < 5e-3, "{:?}", s.epsilon);
        }
    }

    /// Two-sample Kolmogorov-Smirnov statistic.
    fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
        let cdf = |v: &[f64], x: f64| v.iter().filter(|y| **y <= x).count() as f64 / v.len() as f64;
        a.iter().chain(b).map(|&x| (cdf(a, x) - cdf(b, x)).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn accuracy_does_not_depend_on_frame() {
        let base = SweepBase::default();
        let frame = Rotation::from_euler_angles(0.9, -0.4, 2.2);
        let n = 120;
        let scores = |rotate: bool| -> (Vec<f64>, Vec<f64>) {
            (0..n)
                .map(|trial| {
                    let mut body = base.body.sample(&mut trial_rng(3, trial, 0)).unwrap().inertia;
                    let mut omega0 = sample_initial_spin(&mut trial_rng(3, trial, 1), base.spin);
                    if rotate {
                        body = body.rotated(&frame);
                        omega0 = frame * omega0;
                    }
                    let cfg = SimConfig::new(
                        body,
                        omega0,
                        base.imu_offset,
                        WheelPulse::reference(base.wheel_inertia, base.wheel_impulse),
                    );
                    // independent noise for the two populations
                    let seed = 2 * trial as u64 + rotate as u64;
                    let rec = corrupt(&simulate(&cfg).unwrap(), &base.noise.with_seed(seed));
                    let throw = condition(&rec, &ConditionOptions::default()).unwrap();
                    let fit = solve_batch(&throw.regressor_rows(base.wheel_inertia, Weighting::Uniform)).unwrap();
                    let r = AccuracyReport::evaluate(&body, &fit.inertia()).unwrap();
                    (r.epsilon, r.psi)
                })
                .unzip()
        };
        let (eps_a, psi_a) = scores(false);
        let (eps_b, psi_b) = scores(true);
        // critical value at the 1 % level for two samples of size n
        let critical = 1.63 * (2.0 / n as f64).sqrt();
        assert!(ks_statistic(&eps_a, &eps_b) < critical);
        assert!(ks_statistic(&psi_a, &psi_b) < critical);
    }
}
