use serde::{Deserialize, Serialize};

use super::pipeline::{estimate_combined, CombinedEstimate, ConditionedThrow, Weighting};
use crate::error::{Error, Result};
use crate::signal::Window;
use crate::types::{parallel_axis_term, InertiaTensor, Vec3};

/// Relative size of the proof-induced inertia change below which the
/// calibration is rejected.
pub const MIN_PROOF_CONTRAST: f64 = 1e-3;

/// Calibrated properties of the measurement device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceCalibration {
    /// kg
    pub m_dev: f64,
    /// Device barycentre in the IMU frame, m.
    pub x_dev: Vec3,
    /// About the device barycentre, IMU axes, kg·m².
    pub i_dev: InertiaTensor,
    /// Wheel axial inertia, kg·m².
    pub i_r_zz: f64,
    #[serde(default)]
    pub provenance: CalibrationProvenance,
}

/// How a calibration was obtained.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProvenance {
    pub device_only_throws: usize,
    pub proof_throws: usize,
    /// Torque residual RMS of the unit-wheel fits, in units of the wheel
    /// inertia (rad/s²).
    pub device_only_residual_rms: f64,
    pub proof_residual_rms: f64,
    pub device_only_condition: f64,
    pub proof_condition: f64,
    /// Part of the proof's expected inertia change not explained by the
    /// fitted wheel scale, relative.
    pub projection_residual: f64,
}

impl DeviceCalibration {
    pub fn new(m_dev: f64, x_dev: Vec3, i_dev: InertiaTensor, i_r_zz: f64) -> Result<Self> {
        let cal = Self {
            m_dev,
            x_dev,
            i_dev,
            i_r_zz,
            provenance: CalibrationProvenance::default(),
        };
        cal.validate()?;
        Ok(cal)
    }

    /// A device with no mass, used when the combined body is the object.
    pub fn massless(i_r_zz: f64) -> Self {
        Self {
            m_dev: 0.0,
            x_dev: Vec3::zeros(),
            i_dev: InertiaTensor::zero(),
            i_r_zz,
            provenance: CalibrationProvenance::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_dev.is_finite() && self.m_dev > 0.0) {
            return Err(Error::Parse(format!("m_dev must be positive, got {}", self.m_dev)));
        }
        if !(self.i_r_zz.is_finite() && self.i_r_zz > 0.0) {
            return Err(Error::Parse(format!("I_R_zz must be positive, got {}", self.i_r_zz)));
        }
        if !self.i_dev.is_positive_definite() {
            return Err(Error::Parse("I_dev must be positive-definite".into()));
        }
        if self.x_dev.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("x_dev"));
        }
        Ok(())
    }
}

/// Object properties after removing the device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectEstimate {
    pub i_obj: InertiaTensor,
    pub x_obj: Vec3,
    /// Object barycentre relative to the combined barycentre, m.
    pub r: Vec3,
    /// Device barycentre relative to the combined barycentre, m.
    pub s: Vec3,
    pub positive_definite: bool,
    /// Positive-definite and satisfying the triangle inequality.
    pub physical: bool,
}

/// Removes the device's contribution from a combined estimate.
///
/// A non-positive-definite result is returned with its flags cleared rather
/// than as an error, so callers can report it.
pub fn correct_for_device(
    i_comb: &InertiaTensor,
    x_comb: &Vec3,
    cal: &DeviceCalibration,
    m_obj: f64,
) -> Result<ObjectEstimate> {
    if !(m_obj.is_finite() && m_obj > 0.0) {
        return Err(Error::InvalidInput(format!("object mass must be positive, got {m_obj}")));
    }
    let r = (cal.x_dev - x_comb) * (cal.m_dev / m_obj);
    let s = x_comb - cal.x_dev;
    let x_obj = x_comb - r;
    let i_obj = *i_comb - parallel_axis_term(m_obj, &r)? - cal.i_dev - parallel_axis_term(cal.m_dev, &s)?;
    Ok(ObjectEstimate {
        i_obj,
        x_obj,
        r,
        s,
        positive_definite: i_obj.is_positive_definite(),
        physical: i_obj.is_physical(),
    })
}

/// Known proof body used for calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProofBody {
    /// About its own barycentre, IMU axes, kg·m².
    pub inertia: InertiaTensor,
    pub mass: f64,
}

/// Calibrates device inertia, device barycentre and wheel inertia from
/// throws of the device alone and of the device carrying `proof`.
///
/// Both configurations are first solved with a unit wheel inertia, which
/// yields inertias in units of the true wheel inertia. The wheel inertia is
/// then the scale that best maps the difference of the two unitless
/// solutions onto the proof's known contribution.
pub fn calibrate(
    device_only: &[ConditionedThrow],
    with_proof: &[ConditionedThrow],
    proof: &ProofBody,
    m_dev: f64,
) -> Result<DeviceCalibration> {
    if device_only.is_empty() || with_proof.is_empty() {
        return Err(Error::InvalidInput(
            "calibration needs at least one throw per configuration".into(),
        ));
    }
    if !(m_dev.is_finite() && m_dev > 0.0) {
        return Err(Error::InvalidInput(format!("device mass must be positive, got {m_dev}")));
    }
    if !(proof.mass.is_finite() && proof.mass > 0.0) {
        return Err(Error::DegenerateProof(format!("proof mass must be positive, got {}", proof.mass)));
    }
    if !(proof.inertia.is_finite() && proof.inertia.frobenius_norm() > 0.0) {
        return Err(Error::DegenerateProof("proof inertia must be known and non-zero".into()));
    }

    let unit_dev = estimate_combined(device_only, 1.0, Weighting::Uniform)?;
    let unit_proof = estimate_combined(with_proof, 1.0, Weighting::Uniform)?;
    let x_dev = unit_dev.x_comb;
    let x_comb = unit_proof.x_comb;
    let r = (x_dev - x_comb) * (m_dev / proof.mass);
    let s = x_comb - x_dev;

    let lhs = (unit_proof.inertia - unit_dev.inertia).theta();
    let rhs = (proof.inertia + parallel_axis_term(proof.mass, &r)? + parallel_axis_term(m_dev, &s)?).theta();
    let lhs_sq: f64 = lhs.iter().map(|v| v * v).sum();
    let dev_sq: f64 = unit_dev.inertia.theta().iter().map(|v| v * v).sum();
    if !(lhs_sq > (MIN_PROOF_CONTRAST * MIN_PROOF_CONTRAST) * dev_sq) {
        return Err(Error::DegenerateProof(format!(
            "proof changes the fitted inertia by only {:.2e} of the device's",
            (lhs_sq / dev_sq).sqrt()
        )));
    }
    let i_r_zz = lhs.iter().zip(&rhs).map(|(a, b)| a * b).sum::<f64>() / lhs_sq;
    if !(i_r_zz > 0.0) {
        return Err(Error::DegenerateProof(format!(
            "fitted wheel inertia {i_r_zz:.3e} kg·m² is not positive"
        )));
    }
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let projection_residual = lhs
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (b - i_r_zz * a).powi(2))
        .sum::<f64>()
        .sqrt()
        / rhs_norm;

    Ok(DeviceCalibration {
        m_dev,
        x_dev,
        i_dev: unit_dev.inertia.scaled(i_r_zz),
        i_r_zz,
        provenance: CalibrationProvenance {
            device_only_throws: device_only.len(),
            proof_throws: with_proof.len(),
            device_only_residual_rms: unit_dev.inertia_fit.residual_rms,
            proof_residual_rms: unit_proof.inertia_fit.residual_rms,
            device_only_condition: unit_dev.inertia_fit.condition,
            proof_condition: unit_proof.inertia_fit.condition,
            projection_residual,
        },
    })
}

/// Full single-configuration result: combined fit plus device correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub i_comb: InertiaTensor,
    pub x_comb: Vec3,
    pub i_obj: InertiaTensor,
    pub x_obj: Vec3,
    pub m_obj: f64,
    pub r: Vec3,
    pub s: Vec3,
    /// N·m
    pub regression_residual_rms: f64,
    /// m/s²
    pub cog_residual_rms: f64,
    pub regression_condition: f64,
    pub normal_equations_condition: f64,
    pub cog_condition: f64,
    pub combined_positive_definite: bool,
    pub object_positive_definite: bool,
    pub object_physical: bool,
    /// Samples used, as indices into the recording.
    pub window: Window,
}

impl EstimationResult {
    fn assemble(combined: &CombinedEstimate, object: &ObjectEstimate, m_obj: f64, window: Window) -> Self {
        Self {
            i_comb: combined.inertia,
            x_comb: combined.x_comb,
            i_obj: object.i_obj,
            x_obj: object.x_obj,
            m_obj,
            r: object.r,
            s: object.s,
            regression_residual_rms: combined.inertia_fit.residual_rms,
            cog_residual_rms: combined.cog_fit.residual_rms,
            regression_condition: combined.inertia_fit.condition,
            normal_equations_condition: combined.inertia_fit.normal_condition(),
            cog_condition: combined.cog_fit.condition,
            combined_positive_definite: combined.inertia.is_positive_definite(),
            object_positive_definite: object.positive_definite,
            object_physical: object.physical,
            window,
        }
    }
}

/// Estimates the object carried by a calibrated device from one throw.
pub fn estimate_object(
    throw: &ConditionedThrow,
    cal: &DeviceCalibration,
    m_obj: f64,
    weighting: Weighting,
) -> Result<EstimationResult> {
    let combined = estimate_combined(std::slice::from_ref(throw), cal.i_r_zz, weighting)?;
    let object = correct_for_device(&combined.inertia, &combined.x_comb, cal, m_obj)?;
    Ok(EstimationResult::assemble(&combined, &object, m_obj, throw.window))
}
