//! File formats: throw CSV with its metadata sidecar, and the versioned JSON
//! documents read and written by the command line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::{NoiseModel, SimConfig};
use crate::error::{Error, Result};
use crate::estimator::{CalibrationProvenance, DeviceCalibration, EstimationResult};
use crate::montecarlo::{GridSummary, SweepParameter, SweepResult, SweepSpec};
use crate::recording::ThrowRecording;
use crate::signal::{FilterSpec, Window};
use crate::types::{InertiaTensor, Vec3, KG_M2_TO_KG_MM2, M_TO_MM};

/// Version written to, and required of, every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const CSV_HEADER: [&str; 8] = ["t", "gx", "gy", "gz", "ax", "ay", "az", "wr"];

fn check_schema(found: u32, path: &Path) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "{}: unsupported schema_version {found}, expected {SCHEMA_VERSION}",
            path.display()
        )));
    }
    Ok(())
}

fn file_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a JSON document, naming the offending field on failure.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(file_error(path))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if field == "." {
            Error::Parse(format!("{}: {inner}", path.display()))
        } else {
            Error::Parse(format!("{}: field `{field}`: {inner}", path.display()))
        }
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(file_error(path))
}

/// `throw.csv` → `throw.meta.json`
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// `throw.csv` → `throw.truth.json`
pub fn truth_path(csv: &Path) -> PathBuf {
    csv.with_extension("truth.json")
}

/// Time span `[start, end)` in seconds on the recording's clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondsWindow {
    pub start: f64,
    pub end: f64,
}

impl SecondsWindow {
    pub fn from_samples(w: Window, t0: f64, rate: f64) -> Self {
        Self {
            start: t0 + w.start as f64 / rate,
            end: t0 + w.end as f64 / rate,
        }
    }

    /// Nearest sample indices. Bounds against a recording are checked later.
    pub fn to_samples(self, t0: f64, rate: f64) -> Result<Window> {
        if !(self.start.is_finite() && self.end.is_finite()) || self.start < t0 {
            return Err(Error::InvalidWindow(format!(
                "window {}:{} s starts before the recording ({t0} s)",
                self.start, self.end
            )));
        }
        let index = |t: f64| ((t - t0) * rate).round() as usize;
        Window::new(index(self.start), index(self.end))
    }

    /// Parses `start:end` in seconds.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("window `{text}` must be written start:end in seconds"));
        let (a, b) = text.split_once(':').ok_or_else(bad)?;
        let start = a.trim().parse().map_err(|_| bad())?;
        let end = b.trim().parse().map_err(|_| bad())?;
        Ok(Self { start, end })
    }
}

fn default_axis() -> Vec3 {
    Vec3::z()
}

/// Metadata stored next to a throw CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThrowMeta {
    pub schema_version: u32,
    /// Hz
    pub sample_rate: f64,
    #[serde(default = "default_axis")]
    pub wheel_axis: Vec3,
    #[serde(default)]
    pub rest_window: Option<SecondsWindow>,
    #[serde(default)]
    pub freefall_window: Option<SecondsWindow>,
}

/// Writes `rec` as CSV plus its metadata sidecar.
pub fn write_throw(path: &Path, rec: &ThrowRecording) -> Result<()> {
    rec.validate()?;
    let file = fs::File::create(path).map_err(file_error(path))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(CSV_HEADER)?;
    for k in 0..rec.len() {
        let (g, a) = (rec.gyro[k], rec.accel[k]);
        w.serialize((rec.t[k], g.x, g.y, g.z, a.x, a.y, a.z, rec.wheel[k]))?;
    }
    w.flush().map_err(file_error(path))?;

    let t0 = rec.t.first().copied().unwrap_or(0.0);
    let rate = rec.sample_rate;
    let meta = ThrowMeta {
        schema_version: SCHEMA_VERSION,
        sample_rate: rate,
        wheel_axis: rec.wheel_axis,
        rest_window: rec.rest_window.map(|w| SecondsWindow::from_samples(w, t0, rate)),
        freefall_window: rec.freefall_window.map(|w| SecondsWindow::from_samples(w, t0, rate)),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Reads a throw CSV. Without a sidecar the sample rate is inferred from the
/// time column, the wheel axis is body z and no windows are known.
pub fn read_throw(path: &Path) -> Result<ThrowRecording> {
    let file = fs::File::open(path).map_err(file_error(path))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(std::io::BufReader::new(file));
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!(
            "{}: header must be `{}`, found `{}`",
            path.display(),
            CSV_HEADER.join(","),
            header.join(",")
        )));
    }
    let (mut t, mut gyro, mut accel, mut wheel) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut vals = [0.0f64; 8];
    for (row, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != CSV_HEADER.len() {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                row + 2,
                record.len(),
                CSV_HEADER.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            vals[j] = field.parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: row {}, column {}: `{field}` is not a number",
                    path.display(),
                    row + 2,
                    CSV_HEADER[j]
                ))
            })?;
        }
        t.push(vals[0]);
        gyro.push(Vec3::new(vals[1], vals[2], vals[3]));
        accel.push(Vec3::new(vals[4], vals[5], vals[6]));
        wheel.push(vals[7]);
    }
    if t.len() < 2 {
        return Err(Error::SeriesTooShort { len: t.len(), required: 1 });
    }

    let side = sidecar_path(path);
    let meta = if side.exists() {
        let meta: ThrowMeta = read_json(&side)?;
        check_schema(meta.schema_version, &side)?;
        meta
    } else {
        let span = t[t.len() - 1] - t[0];
        ThrowMeta {
            schema_version: SCHEMA_VERSION,
            sample_rate: (t.len() - 1) as f64 / span,
            wheel_axis: default_axis(),
            rest_window: None,
            freefall_window: None,
        }
    };
    let t0 = t[0];
    let rate = meta.sample_rate;
    let rest_window = meta.rest_window.map(|w| w.to_samples(t0, rate)).transpose()?;
    let rec = ThrowRecording {
        sample_rate: rate,
        t,
        gyro,
        accel,
        wheel,
        wheel_axis: meta.wheel_axis,
        has_rest_prefix: rest_window.is_some(),
        rest_window,
        freefall_window: meta.freefall_window.map(|w| w.to_samples(t0, rate)).transpose()?,
    };
    rec.validate()?;
    Ok(rec)
}

/// Input of the `simulate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub schema_version: u32,
    pub simulation: SimConfig,
    #[serde(default)]
    pub noise: NoiseModel,
}

impl SimulateFile {
    pub fn read(path: &Path) -> Result<Self> {
        let file: Self = read_json(path)?;
        check_schema(file.schema_version, path)?;
        Ok(file)
    }
}

/// Ground truth of a simulated throw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema_version: u32,
    /// About the barycentre, IMU axes.
    pub inertia_kg_m2: InertiaTensor,
    pub inertia_kg_mm2: InertiaTensor,
    /// Barycentre in the IMU frame.
    pub cog_m: Vec3,
    pub cog_mm: Vec3,
    /// rad/s
    pub omega0: Vec3,
    /// N·m·s
    pub wheel_impulse: f64,
}

impl TruthFile {
    pub fn new(cfg: &SimConfig) -> Self {
        let cog = -cfg.imu_offset;
        Self {
            schema_version: SCHEMA_VERSION,
            inertia_kg_m2: cfg.inertia,
            inertia_kg_mm2: cfg.inertia.scaled(KG_M2_TO_KG_MM2),
            cog_m: cog,
            cog_mm: cog * M_TO_MM,
            omega0: cfg.omega0,
            wheel_impulse: cfg.wheel.impulse(),
        }
    }
}

/// Calibration provenance together with the settings that produced it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    #[serde(flatten)]
    pub fit: CalibrationProvenance,
    #[serde(default)]
    pub filter: Option<FilterSpec>,
    #[serde(default)]
    pub software_version: Option<String>,
}

/// Stored device calibration. Inertias in kg·m², packed
/// `[Ixx, Ixy, Iyy, Ixz, Iyz, Izz]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub schema_version: u32,
    pub m_dev: f64,
    /// m, IMU frame.
    pub x_dev: Vec3,
    #[serde(rename = "I_dev")]
    pub i_dev: InertiaTensor,
    #[serde(rename = "I_R_zz")]
    pub i_r_zz: f64,
    #[serde(default)]
    pub provenance: CalibrationRecord,
}

impl CalibrationFile {
    pub fn new(cal: &DeviceCalibration, filter: FilterSpec) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            m_dev: cal.m_dev,
            x_dev: cal.x_dev,
            i_dev: cal.i_dev,
            i_r_zz: cal.i_r_zz,
            provenance: CalibrationRecord {
                fit: cal.provenance.clone(),
                filter: Some(filter),
                software_version: Some(SOFTWARE_VERSION.to_owned()),
            },
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file: Self = read_json(path)?;
        check_schema(file.schema_version, path)?;
        file.calibration().map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Ok(file)
    }

    pub fn calibration(&self) -> Result<DeviceCalibration> {
        let cal = DeviceCalibration {
            m_dev: self.m_dev,
            x_dev: self.x_dev,
            i_dev: self.i_dev,
            i_r_zz: self.i_r_zz,
            provenance: self.provenance.fit.clone(),
        };
        cal.validate()?;
        Ok(cal)
    }
}

/// An inertia tensor in both unit systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaBlocks {
    pub kg_m2: InertiaTensor,
    pub kg_mm2: InertiaTensor,
}

impl From<InertiaTensor> for InertiaBlocks {
    fn from(i: InertiaTensor) -> Self {
        Self {
            kg_m2: i,
            kg_mm2: i.scaled(KG_M2_TO_KG_MM2),
        }
    }
}

/// A position in both unit systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionBlocks {
    pub m: Vec3,
    pub mm: Vec3,
}

impl From<Vec3> for PositionBlocks {
    fn from(v: Vec3) -> Self {
        Self { m: v, mm: v * M_TO_MM }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultResiduals {
    /// N·m
    pub regression_rms: f64,
    /// m/s²
    pub cog_rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultConditions {
    /// Of the column-scaled regressor stack.
    pub regression: f64,
    pub normal_equations: f64,
    pub cog: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultFlags {
    pub combined_positive_definite: bool,
    pub object_positive_definite: bool,
    pub object_physical: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowUsed {
    pub start_index: usize,
    pub end_index: usize,
    pub start_s: f64,
    pub end_s: f64,
}

/// Output of the `estimate` command. Inertia blocks are packed
/// `[Ixx, Ixy, Iyy, Ixz, Iyz, Izz]`; positions are in the IMU frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub schema_version: u32,
    pub software_version: String,
    pub object_mass_kg: f64,
    #[serde(rename = "I_obj")]
    pub i_obj: InertiaBlocks,
    pub x_obj: PositionBlocks,
    #[serde(rename = "I_comb")]
    pub i_comb: InertiaBlocks,
    pub x_comb: PositionBlocks,
    pub residuals: ResultResiduals,
    pub condition: ResultConditions,
    pub flags: ResultFlags,
    pub window: WindowUsed,
    pub filter: FilterSpec,
}

impl ResultFile {
    pub fn new(est: &EstimationResult, rec: &ThrowRecording, filter: FilterSpec) -> Self {
        let t0 = rec.t.first().copied().unwrap_or(0.0);
        let secs = SecondsWindow::from_samples(est.window, t0, rec.sample_rate);
        Self {
            schema_version: SCHEMA_VERSION,
            software_version: SOFTWARE_VERSION.to_owned(),
            object_mass_kg: est.m_obj,
            i_obj: est.i_obj.into(),
            x_obj: est.x_obj.into(),
            i_comb: est.i_comb.into(),
            x_comb: est.x_comb.into(),
            residuals: ResultResiduals {
                regression_rms: est.regression_residual_rms,
                cog_rms: est.cog_residual_rms,
            },
            condition: ResultConditions {
                regression: est.regression_condition,
                normal_equations: est.normal_equations_condition,
                cog: est.cog_condition,
            },
            flags: ResultFlags {
                combined_positive_definite: est.combined_positive_definite,
                object_positive_definite: est.object_positive_definite,
                object_physical: est.object_physical,
            },
            window: WindowUsed {
                start_index: est.window.start,
                end_index: est.window.end,
                start_s: secs.start,
                end_s: secs.end,
            },
            filter,
        }
    }
}

/// Input of the `sweep` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub schema_version: u32,
    pub sweep: SweepSpec,
}

impl SweepFile {
    pub fn read(path: &Path) -> Result<Self> {
        let file: Self = read_json(path)?;
        check_schema(file.schema_version, path)?;
        file.sweep
            .validate()
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        Ok(file)
    }
}

/// One line of `trials.csv`.
#[derive(Debug, Serialize)]
struct TrialRow {
    grid_index: usize,
    grid_value: String,
    trial: usize,
    lambda_1: f64,
    lambda_2: f64,
    lambda_3: f64,
    kappa: f64,
    min_delta_sigma: f64,
    omega0_x: f64,
    omega0_y: f64,
    omega0_z: f64,
    epsilon: Option<f64>,
    psi_deg: Option<f64>,
    degenerate: Option<bool>,
    cog_error_mm: Option<f64>,
    error: String,
}

#[derive(Debug, Serialize)]
struct SweepSummaryFile<'a> {
    schema_version: u32,
    software_version: &'a str,
    parameter: SweepParameter,
    seed: u64,
    trials_per_point: usize,
    percentile: f64,
    summaries: &'a [GridSummary],
}

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Writes one CSV row per trial and a JSON summary into `dir`.
pub fn write_sweep(dir: &Path, spec: &SweepSpec, result: &SweepResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(file_error(dir))?;
    let path = dir.join(TRIALS_FILE);
    let file = fs::File::create(&path).map_err(file_error(&path))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for r in &result.records {
        w.serialize(TrialRow {
            grid_index: r.grid_index,
            grid_value: spec.grid[r.grid_index].label(),
            trial: r.trial,
            lambda_1: r.lambdas[0],
            lambda_2: r.lambdas[1],
            lambda_3: r.lambdas[2],
            kappa: r.kappa,
            min_delta_sigma: r.min_delta_sigma,
            omega0_x: r.omega0[0],
            omega0_y: r.omega0[1],
            omega0_z: r.omega0[2],
            epsilon: r.report.map(|x| x.epsilon),
            psi_deg: r.report.map(|x| x.psi.to_degrees()),
            degenerate: r.report.map(|x| x.degenerate),
            cog_error_mm: r.cog_error_mm,
            error: r.error.clone().unwrap_or_default(),
        })?;
    }
    w.flush().map_err(file_error(&path))?;
    write_json(
        &dir.join(SUMMARY_FILE),
        &SweepSummaryFile {
            schema_version: SCHEMA_VERSION,
            software_version: SOFTWARE_VERSION,
            parameter: result.parameter,
            seed: spec.seed,
            trials_per_point: spec.trials,
            percentile: result.percentile,
            summaries: &result.summaries,
        },
    )
}
