//! Identification of inertia and barycentre from conditioned throw data,
//! removal of the measurement device, and device calibration.

mod cog;
mod device;
mod lstsq;
mod pipeline;
mod regression;

pub use cog::{estimate_cog, CogFit, CogSample, MIN_EXCITATION_RATE, MIN_EXCITED_FRACTION};
pub use device::{
    calibrate, correct_for_device, estimate_object, CalibrationProvenance, DeviceCalibration, EstimationResult,
    ObjectEstimate, ProofBody, MIN_PROOF_CONTRAST,
};
pub use lstsq::RANK_TOLERANCE;
pub use pipeline::{
    condition, estimate_combined, CombinedEstimate, ConditionOptions, ConditionedThrow, Weighting,
};
pub use regression::{
    build_regressor, solve_batch, solve_recursive, tensor_action, BatchSolution, RecursiveLeastSquares, Regressor,
    RegressorRow, Theta,
};
