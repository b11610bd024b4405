use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::lstsq;
use crate::error::{Error, Result};
use crate::types::{InertiaTensor, Vec3};

pub type Regressor = SMatrix<f64, 3, 6>;
pub type Theta = SVector<f64, 6>;

/// One sample of the parameter-linear free-fall equation `zeta · θ = mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressorRow {
    pub zeta: Regressor,
    /// Wheel reaction torque on the body, N·m.
    pub mu: Vec3,
    pub weight: f64,
}

/// Matrix `A(v)` with `A(v) · pack(I) = I v`.
pub fn tensor_action(v: &Vec3) -> Regressor {
    #[rustfmt::skip]
    let a = Regressor::new(
        v.x, v.y, 0.0, v.z, 0.0, 0.0,
        0.0, v.x, v.y, 0.0, v.z, 0.0,
        0.0, 0.0, 0.0, v.x, v.y, v.z,
    );
    a
}

/// Builds the regressor row of one conditioned sample. `wheel_speed` and
/// `wheel_accel` are measured about `wheel_axis` relative to the body.
pub fn build_regressor(
    omega: &Vec3,
    omega_dot: &Vec3,
    wheel_speed: f64,
    wheel_accel: f64,
    wheel_inertia: f64,
    wheel_axis: &Vec3,
) -> RegressorRow {
    let zeta = tensor_action(omega_dot) + omega.cross_matrix() * tensor_action(omega);
    let mu = -wheel_inertia * (wheel_axis * wheel_accel + omega.cross(&(wheel_axis * wheel_speed)));
    RegressorRow {
        zeta,
        mu,
        weight: 1.0,
    }
}

/// Batch least-squares inertia solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchSolution {
    pub theta: [f64; 6],
    /// Root-mean-square torque residual per equation, N·m.
    pub residual_rms: f64,
    /// Condition number of the column-scaled stacked regressor. The normal
    /// equations would carry its square.
    pub condition: f64,
    pub rows: usize,
}

impl BatchSolution {
    pub fn inertia(&self) -> InertiaTensor {
        InertiaTensor::from_theta(self.theta)
    }

    pub fn normal_condition(&self) -> f64 {
        self.condition * self.condition
    }
}

/// Solves the stacked rows by orthogonal factorization.
pub fn solve_batch(rows: &[RegressorRow]) -> Result<BatchSolution> {
    if rows.len() < 2 {
        return Err(Error::SeriesTooShort {
            len: rows.len(),
            required: 1,
        });
    }
    let m = 3 * rows.len();
    let mut a = DMatrix::zeros(m, 6);
    let mut b = DVector::zeros(m);
    for (k, row) in rows.iter().enumerate() {
        if !(row.weight >= 0.0) {
            return Err(Error::InvalidInput(format!("row {k} has negative weight")));
        }
        let w = row.weight.sqrt();
        a.fixed_view_mut::<3, 6>(3 * k, 0).copy_from(&(row.zeta * w));
        b.fixed_rows_mut::<3>(3 * k).copy_from(&(row.mu * w));
    }
    let sol = lstsq::solve(a, b, "inertia regression")?;
    let mut theta = [0.0; 6];
    theta.copy_from_slice(sol.x.as_slice());
    Ok(BatchSolution {
        theta,
        residual_rms: sol.residual_rms,
        condition: sol.condition,
        rows: rows.len(),
    })
}

/// Recursive least squares over regressor rows with exponential forgetting.
#[derive(Debug, Clone)]
pub struct RecursiveLeastSquares {
    theta: Theta,
    p: SMatrix<f64, 6, 6>,
    forgetting: f64,
    rows_seen: usize,
}

impl RecursiveLeastSquares {
    /// Zero prior with covariance `initial_covariance · I`.
    pub fn new(initial_covariance: f64, forgetting: f64) -> Result<Self> {
        Self::with_prior([0.0; 6], initial_covariance, forgetting)
    }

    pub fn with_prior(theta0: [f64; 6], initial_covariance: f64, forgetting: f64) -> Result<Self> {
        if !(initial_covariance.is_finite() && initial_covariance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "initial covariance scale must be positive, got {initial_covariance}"
            )));
        }
        if !(forgetting > 0.0 && forgetting <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "forgetting factor must lie in (0, 1], got {forgetting}"
            )));
        }
        Ok(Self {
            theta: Theta::from(theta0),
            p: SMatrix::identity() * initial_covariance,
            forgetting,
            rows_seen: 0,
        })
    }

    pub fn update(&mut self, row: &RegressorRow) -> Result<()> {
        let w = row.weight.sqrt();
        let h = row.zeta * w;
        let y = row.mu * w;
        let ph = self.p * h.transpose();
        let s = Matrix3::identity() * self.forgetting + h * ph;
        let s_inv = s.try_inverse().ok_or(Error::CovarianceBlowUp { row: self.rows_seen })?;
        let k = ph * s_inv;
        self.theta += k * (y - h * self.theta);
        // Joseph form keeps P symmetric positive semi-definite as it shrinks
        // over many orders of magnitude.
        let ikh = SMatrix::<f64, 6, 6>::identity() - k * h;
        let p = (ikh * self.p * ikh.transpose() + k * k.transpose()) / self.forgetting;
        self.p = (p + p.transpose()) * 0.5;
        if self.p.iter().chain(self.theta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::CovarianceBlowUp { row: self.rows_seen });
        }
        self.rows_seen += 1;
        Ok(())
    }

    pub fn theta(&self) -> [f64; 6] {
        self.theta.into()
    }

    pub fn covariance(&self) -> SMatrix<f64, 6, 6> {
        self.p
    }

    pub fn rows_seen(&self) -> usize {
        self.rows_seen
    }
}

/// Runs [`RecursiveLeastSquares`] over `rows`, returning θ after each row.
pub fn solve_recursive(
    rows: &[RegressorRow],
    initial_covariance: f64,
    forgetting: f64,
) -> Result<Vec<[f64; 6]>> {
    let mut rls = RecursiveLeastSquares::new(initial_covariance, forgetting)?;
    rows.iter()
        .map(|row| {
            rls.update(row)?;
            Ok(rls.theta())
        })
        .collect()
}
