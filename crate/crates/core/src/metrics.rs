//! Frame-independent accuracy measures of an estimated inertia tensor.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{principal_decompose, InertiaTensor, PrincipalDecomposition};

/// Principal-moment gap below which principal axes are treated as undefined.
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;

/// Column sign flips that keep a rotation proper.
const PROPER_FLIPS: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [-1.0, -1.0, 1.0],
    [-1.0, 1.0, -1.0],
    [1.0, -1.0, -1.0],
];

/// Relative magnitude error of the principal moments, rank-matched.
pub fn magnitude_error(truth: &InertiaTensor, estimate: &InertiaTensor) -> Result<f64> {
    let a = principal_decompose(truth)?.lambdas;
    let b = principal_decompose(estimate)?.lambdas;
    let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = a.iter().map(|x| x * x).sum();
    Ok((num / den).sqrt())
}

/// Rotation angle of `r`, robust near 0 and π.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let skew = r - r.transpose();
    let sin = 0.5 * (skew[(2, 1)].powi(2) + skew[(0, 2)].powi(2) + skew[(1, 0)].powi(2)).sqrt();
    let cos = 0.5 * (r.trace() - 1.0);
    sin.atan2(cos)
}

fn axes_angle(a: &PrincipalDecomposition, b: &PrincipalDecomposition) -> f64 {
    let rel = a.axes.matrix().transpose() * b.axes.matrix();
    PROPER_FLIPS
        .iter()
        .map(|flip| {
            let mut r = rel;
            for (j, s) in flip.iter().enumerate() {
                r.column_mut(j).scale_mut(*s);
            }
            rotation_angle(&r)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Geodesic angle between the principal frames, radians, minimised over the
/// sign ambiguity of the eigenvectors.
pub fn alignment_error(truth: &InertiaTensor, estimate: &InertiaTensor) -> Result<f64> {
    let a = principal_decompose(truth)?;
    let gap = gap_of(&a.lambdas);
    if !(gap >= DEGENERACY_THRESHOLD) {
        return Err(Error::DegenerateAxes { min_delta_sigma: gap });
    }
    Ok(axes_angle(&a, &principal_decompose(estimate)?))
}

fn gap_of(l: &[f64; 3]) -> f64 {
    let rel = |x: f64, y: f64| {
        let m = x.abs().max(y.abs());
        if m > 0.0 {
            (x - y).abs() / m
        } else {
            0.0
        }
    };
    rel(l[0], l[1]).min(rel(l[1], l[2])).min(rel(l[0], l[2]))
}

/// Smallest relative gap between principal moments, in [0, 1].
pub fn principal_similarity(inertia: &InertiaTensor) -> Result<f64> {
    Ok(gap_of(&principal_decompose(inertia)?.lambdas))
}

/// Ratio of largest to smallest principal moment.
pub fn condition_number(inertia: &InertiaTensor) -> Result<f64> {
    let l = principal_decompose(inertia)?.lambdas;
    if !(l[0] > 0.0) {
        return Err(Error::InvalidInput("inertia must be positive-definite".into()));
    }
    Ok(l[2] / l[0])
}

/// All accuracy measures of one estimate. `psi` is always computed; when the
/// true principal axes are not unique `degenerate` is set and `psi` only
/// reflects an arbitrary basis choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub epsilon: f64,
    /// radians
    pub psi: f64,
    /// Of the true tensor.
    pub min_delta_sigma: f64,
    /// Of the true tensor.
    pub kappa: f64,
    pub degenerate: bool,
}

impl AccuracyReport {
    pub fn evaluate(truth: &InertiaTensor, estimate: &InertiaTensor) -> Result<Self> {
        let a = principal_decompose(truth)?;
        let b = principal_decompose(estimate)?;
        if !(a.lambdas[0] > 0.0) {
            return Err(Error::InvalidInput("true inertia must be positive-definite".into()));
        }
        let num: f64 = a.lambdas.iter().zip(&b.lambdas).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = a.lambdas.iter().map(|x| x * x).sum();
        let min_delta_sigma = gap_of(&a.lambdas);
        Ok(Self {
            epsilon: (num / den).sqrt(),
            psi: axes_angle(&a, &b),
            min_delta_sigma,
            kappa: a.lambdas[2] / a.lambdas[0],
            degenerate: min_delta_sigma < DEGENERACY_THRESHOLD,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Rotation, Vec3};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn triaxial() -> InertiaTensor {
        InertiaTensor::diagonal(368e-6, 123e-6, 431e-6)
    }

    #[test]
    fn identical_tensors_score_zero() {
        let i = triaxial().rotated(&Rotation::from_euler_angles(0.3, 1.0, -2.0));
        assert_eq!(magnitude_error(&i, &i).unwrap(), 0.0);
        assert!(alignment_error(&i, &i).unwrap() < 1e-7);
    }

    #[test]
    fn uniform_scaling() {
        let i = triaxial();
        assert_relative_eq!(magnitude_error(&i, &(i * 1.02)).unwrap(), 0.02, epsilon = 1e-14);
    }

    #[test]
    fn hand_evaluated_magnitude_error() {
        let e = [0.013, -0.021, 0.007];
        let d = [368.0, 123.0, 431.0];
        let est = InertiaTensor::diagonal(d[0] * (1.0 + e[0]), d[1] * (1.0 + e[1]), d[2] * (1.0 + e[2]));
        // ascending: 123, 368, 431
        let num = (123.0f64 * 0.021).powi(2) + (368.0f64 * 0.013).powi(2) + (431.0f64 * 0.007).powi(2);
        let den = 123.0f64.powi(2) + 368.0f64.powi(2) + 431.0f64.powi(2);
        let got = magnitude_error(&InertiaTensor::diagonal(d[0], d[1], d[2]), &est).unwrap();
        assert_relative_eq!(got, (num / den).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn five_degree_rotation() {
        let i = triaxial();
        let r = Rotation::from_axis_angle(&Vec3::z_axis(), 5f64.to_radians());
        let psi = alignment_error(&i, &i.rotated(&r)).unwrap();
        assert!((psi - 5f64.to_radians()).abs() < 1e-9, "{}", psi.to_degrees());
    }

    #[test]
    fn degenerate_truth_is_rejected() {
        let sphere = InertiaTensor::diagonal(1.0, 1.0, 1.0);
        assert!(matches!(alignment_error(&sphere, &triaxial()), Err(Error::DegenerateAxes { .. })));
        assert!(AccuracyReport::evaluate(&sphere, &sphere).unwrap().degenerate);
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(principal_similarity(&InertiaTensor::diagonal(1.0, 1.0, 1.0)).unwrap(), 0.0);
        assert_relative_eq!(principal_similarity(&InertiaTensor::diagonal(1.0, 2.0, 4.0)).unwrap(), 0.5);
        let a = principal_similarity(&InertiaTensor::diagonal(1525.0, 190.0, 1577.0)).unwrap();
        assert_relative_eq!(a, 52.0 / 1577.0, max_relative = 1e-12);
        assert!((a - 0.033).abs() < 5e-4);
    }

    #[test]
    fn kappa() {
        assert_relative_eq!(condition_number(&InertiaTensor::diagonal(2.0, 1.0, 5.0)).unwrap(), 5.0);
    }

    fn naive_angle(truth: &InertiaTensor, est: &InertiaTensor) -> f64 {
        let a = principal_decompose(truth).unwrap().axes.into_inner();
        let b = principal_decompose(est).unwrap().axes.into_inner();
        let mut best = f64::INFINITY;
        for flip in PROPER_FLIPS {
            let s = Matrix3::from_diagonal(&Vec3::from(flip));
            // tr(XᵀY) written as the sum of the elementwise product
            let c = 0.5 * (b * s).component_mul(&a).sum() - 0.5;
            best = best.min(c.clamp(-1.0, 1.0).acos());
        }
        best
    }

    proptest! {
        #[test]
        fn matches_exhaustive_sign_search(
            d in prop::array::uniform3(0.5f64..2.0),
            a in prop::array::uniform3(-3.0f64..3.0),
            b in prop::array::uniform3(-0.3f64..0.3),
        ) {
            let truth = InertiaTensor::diagonal(d[0], d[1] * 1.7, d[2] * 3.1)
                .rotated(&Rotation::from_euler_angles(a[0], a[1], a[2]));
            prop_assume!(principal_similarity(&truth).unwrap() > 0.05);
            let est = truth.rotated(&Rotation::from_euler_angles(b[0], b[1], b[2]));
            let psi = alignment_error(&truth, &est).unwrap();
            prop_assert!((psi - naive_angle(&truth, &est)).abs() < 1e-6);
        }

        #[test]
        fn symmetric_and_rotation_invariant(
            d in prop::array::uniform3(0.5f64..2.0),
            a in prop::array::uniform3(-3.0f64..3.0),
            b in prop::array::uniform3(-0.5f64..0.5),
            e in prop::array::uniform3(-0.05f64..0.05),
        ) {
            let truth = InertiaTensor::diagonal(d[0], d[1] * 1.7, d[2] * 3.1);
            prop_assume!(principal_similarity(&truth).unwrap() > 0.05);
            let est = InertiaTensor::diagonal(d[0] * (1.0 + e[0]), d[1] * 1.7 * (1.0 + e[1]), d[2] * 3.1 * (1.0 + e[2]))
                .rotated(&Rotation::from_euler_angles(b[0], b[1], b[2]));
            prop_assume!(principal_similarity(&est).unwrap() > 0.05);
            let r = Rotation::from_euler_angles(a[0], a[1], a[2]);
            let eps = magnitude_error(&truth, &est).unwrap();
            prop_assert!((eps - magnitude_error(&truth.rotated(&r), &est.rotated(&r)).unwrap()).abs() < 1e-12);
            let psi = alignment_error(&truth, &est).unwrap();
            prop_assert!((psi - alignment_error(&est, &truth).unwrap()).abs() < 1e-9);
            prop_assert!((psi - alignment_error(&truth.rotated(&r), &est.rotated(&r)).unwrap()).abs() < 1e-9);
            prop_assert!((0.0..=std::f64::consts::PI).contains(&psi));
        }
    }
}
