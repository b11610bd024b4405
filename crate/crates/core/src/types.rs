//! Geometric and inertial value types.
//!
//! All quantities are SI internally (kg, m, kg·m²). The kg·mm² figures used in
//! tables only appear at the file boundary, see [`KG_M2_TO_KG_MM2`].

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Rotation3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Rotation = Rotation3<f64>;

/// Multiply a kg·m² value by this to get kg·mm².
pub const KG_M2_TO_KG_MM2: f64 = 1e6;
/// Multiply a metre value by this to get millimetres.
pub const M_TO_MM: f64 = 1e3;

const ROTATION_TOL: f64 = 1e-12;

/// Checks orthonormality and handedness before accepting a matrix as a rotation.
pub fn rotation_from_matrix(m: &Matrix3<f64>) -> Result<Rotation> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rotation matrix"));
    }
    let ortho = (m.transpose() * m - Matrix3::identity()).amax();
    let det = m.determinant();
    if ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
        return Err(Error::InvalidInput(format!(
            "matrix is not a proper rotation (orthogonality error {ortho:.3e}, det {det})"
        )));
    }
    Ok(Rotation::from_matrix_unchecked(*m))
}

/// Symmetric 3×3 mass-moment tensor.
///
/// Only the six independent components are stored, in the order
/// `[Ixx, Ixy, Iyy, Ixz, Iyz, Izz]`, so symmetry holds by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 6]", into = "[f64; 6]")]
pub struct InertiaTensor {
    theta: [f64; 6],
}

impl From<[f64; 6]> for InertiaTensor {
    fn from(theta: [f64; 6]) -> Self {
        Self { theta }
    }
}

impl From<InertiaTensor> for [f64; 6] {
    fn from(i: InertiaTensor) -> Self {
        i.theta
    }
}

/// Packs a tensor into `[Ixx, Ixy, Iyy, Ixz, Iyz, Izz]`.
pub fn pack_theta(inertia: &InertiaTensor) -> [f64; 6] {
    inertia.theta
}

/// Inverse of [`pack_theta`].
pub fn unpack_theta(theta: &[f64; 6]) -> InertiaTensor {
    InertiaTensor { theta: *theta }
}

impl InertiaTensor {
    pub const fn zero() -> Self {
        Self { theta: [0.0; 6] }
    }

    pub const fn from_theta(theta: [f64; 6]) -> Self {
        Self { theta }
    }

    pub const fn diagonal(xx: f64, yy: f64, zz: f64) -> Self {
        Self {
            theta: [xx, 0.0, yy, 0.0, 0.0, zz],
        }
    }

    /// Builds a tensor from the symmetric part of `m`.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let s = 0.5 * (m + m.transpose());
        Self {
            theta: [
                s[(0, 0)],
                s[(0, 1)],
                s[(1, 1)],
                s[(0, 2)],
                s[(1, 2)],
                s[(2, 2)],
            ],
        }
    }

    pub fn theta(&self) -> [f64; 6] {
        self.theta
    }

    pub fn xx(&self) -> f64 {
        self.theta[0]
    }
    pub fn xy(&self) -> f64 {
        self.theta[1]
    }
    pub fn yy(&self) -> f64 {
        self.theta[2]
    }
    pub fn xz(&self) -> f64 {
        self.theta[3]
    }
    pub fn yz(&self) -> f64 {
        self.theta[4]
    }
    pub fn zz(&self) -> f64 {
        self.theta[5]
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let [xx, xy, yy, xz, yz, zz] = self.theta;
        Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
    }

    pub fn diag(&self) -> [f64; 3] {
        [self.xx(), self.yy(), self.zz()]
    }

    pub fn trace(&self) -> f64 {
        self.xx() + self.yy() + self.zz()
    }

    /// `I·v`
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        let [xx, xy, yy, xz, yz, zz] = self.theta;
        Vec3::new(
            xx * v.x + xy * v.y + xz * v.z,
            xy * v.x + yy * v.y + yz * v.z,
            xz * v.x + yz * v.y + zz * v.z,
        )
    }

    /// Expresses the tensor in a frame rotated by `r`: `R·I·Rᵀ`.
    pub fn rotated(&self, r: &Rotation) -> Self {
        let m = r.matrix() * self.matrix() * r.matrix().transpose();
        Self::from_matrix(&m)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            theta: self.theta.map(|v| v * k),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    /// Frobenius norm of the full 3×3 matrix.
    pub fn frobenius_norm(&self) -> f64 {
        self.matrix().norm()
    }

    pub fn inverse(&self) -> Result<Matrix3<f64>> {
        self.matrix().try_inverse().ok_or(Error::SingularInertia)
    }

    pub fn is_positive_definite(&self) -> bool {
        match self.principal() {
            Ok(p) => p.lambdas[0] > 0.0,
            Err(_) => false,
        }
    }

    /// Positive-definite and principal moments obey `λi + λj ≥ λk`.
    pub fn is_physical(&self) -> bool {
        let Ok(p) = self.principal() else {
            return false;
        };
        let [l1, l2, l3] = p.lambdas;
        let slack = 1e-12 * l3.abs();
        l1 > 0.0 && l1 + l2 + slack >= l3
    }

    pub fn principal(&self) -> Result<PrincipalDecomposition> {
        principal_decompose(self)
    }
}

impl Add for InertiaTensor {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            theta: std::array::from_fn(|k| self.theta[k] + rhs.theta[k]),
        }
    }
}

impl AddAssign for InertiaTensor {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for InertiaTensor {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            theta: std::array::from_fn(|k| self.theta[k] - rhs.theta[k]),
        }
    }
}

impl Neg for InertiaTensor {
    type Output = Self;
    fn neg(self) -> Self {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for InertiaTensor {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        self.scaled(k)
    }
}

impl Mul<InertiaTensor> for f64 {
    type Output = InertiaTensor;
    fn mul(self, i: InertiaTensor) -> InertiaTensor {
        i.scaled(self)
    }
}

/// Inertia of a point mass `m` at offset `d`: `m(|d|²δij − di dj)`.
pub fn parallel_axis_term(mass: f64, d: &Vec3) -> Result<InertiaTensor> {
    if !mass.is_finite() || d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("parallel axis term"));
    }
    if mass < 0.0 {
        return Err(Error::NegativeMass(mass));
    }
    let d2 = d.norm_squared();
    Ok(InertiaTensor::from_theta([
        mass * (d2 - d.x * d.x),
        -mass * d.x * d.y,
        mass * (d2 - d.y * d.y),
        -mass * d.x * d.z,
        -mass * d.y * d.z,
        mass * (d2 - d.z * d.z),
    ]))
}

/// Eigen-decomposition of an inertia tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalDecomposition {
    /// Principal moments, ascending.
    pub lambdas: [f64; 3],
    /// Columns are the principal axes expressed in the body frame.
    pub axes: Rotation,
}

impl PrincipalDecomposition {
    pub fn reconstruct(&self) -> InertiaTensor {
        let u = self.axes.matrix();
        let d = Matrix3::from_diagonal(&Vec3::from(self.lambdas));
        InertiaTensor::from_matrix(&(u * d * u.transpose()))
    }
}

/// Symmetric eigen-decomposition with ascending eigenvalues and a proper
/// rotation as the axis matrix.
///
/// Repeated eigenvalues yield an arbitrary orthonormal basis of the
/// eigenspace.
pub fn principal_decompose(inertia: &InertiaTensor) -> Result<PrincipalDecomposition> {
    if !inertia.is_finite() {
        return Err(Error::NonFinite("inertia tensor"));
    }
    let eig = SymmetricEigen::new(inertia.matrix());
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let lambdas = order.map(|k| eig.eigenvalues[k]);
    let mut axes = Matrix3::from_columns(&order.map(|k| eig.eigenvectors.column(k).into_owned()));
    if axes.determinant() < 0.0 {
        axes.set_column(2, &(-axes.column(2)));
    }
    Ok(PrincipalDecomposition {
        lambdas,
        axes: Rotation::from_matrix_unchecked(axes),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub mass: f64,
    pub position: Vec3,
}

/// Homogeneous rectangular block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub mass: f64,
    pub centre: Vec3,
    /// Edge lengths along the block's own x, y, z axes.
    pub edges: Vec3,
    /// Maps block axes to the reference frame.
    #[serde(default = "Rotation::identity")]
    pub orientation: Rotation,
}

impl Cuboid {
    pub fn axis_aligned(mass: f64, centre: Vec3, edges: Vec3) -> Self {
        Self {
            mass,
            centre,
            edges,
            orientation: Rotation::identity(),
        }
    }

    /// Inertia about the block's own centre, in the reference frame.
    pub fn central_inertia(&self) -> InertiaTensor {
        let (w2, h2, d2) = (
            self.edges.x * self.edges.x,
            self.edges.y * self.edges.y,
            self.edges.z * self.edges.z,
        );
        let k = self.mass / 12.0;
        InertiaTensor::diagonal(k * (h2 + d2), k * (w2 + d2), k * (w2 + h2)).rotated(&self.orientation)
    }
}

/// Discrete mass distribution made of point masses and homogeneous cuboids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointMassSet {
    #[serde(default)]
    pub points: Vec<PointMass>,
    #[serde(default)]
    pub cuboids: Vec<Cuboid>,
}

impl PointMassSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_point(mut self, mass: f64, position: Vec3) -> Self {
        self.points.push(PointMass { mass, position });
        self
    }

    pub fn with_cuboid(mut self, cuboid: Cuboid) -> Self {
        self.cuboids.push(cuboid);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.cuboids.is_empty()
    }

    /// Union of two sets, expressed in the same frame.
    pub fn union(&self, other: &PointMassSet) -> PointMassSet {
        PointMassSet {
            points: self.points.iter().chain(&other.points).copied().collect(),
            cuboids: self.cuboids.iter().chain(&other.cuboids).copied().collect(),
        }
    }

    /// Rigidly moves every element by `r` then `t`.
    pub fn transformed(&self, r: &Rotation, t: &Vec3) -> PointMassSet {
        PointMassSet {
            points: self
                .points
                .iter()
                .map(|p| PointMass {
                    mass: p.mass,
                    position: r * p.position + t,
                })
                .collect(),
            cuboids: self
                .cuboids
                .iter()
                .map(|c| Cuboid {
                    mass: c.mass,
                    centre: r * c.centre + t,
                    edges: c.edges,
                    orientation: r * c.orientation,
                })
                .collect(),
        }
    }
}

/// Mass, barycentre and central inertia of a rigid body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassProperties {
    pub mass: f64,
    pub cog: Vec3,
    /// About `cog`, in the reference frame.
    pub inertia: InertiaTensor,
}

impl MassProperties {
    /// Combines rigidly attached bodies via the parallel axis theorem.
    pub fn compose(parts: &[MassProperties]) -> Result<MassProperties> {
        let mass: f64 = parts.iter().map(|p| p.mass).sum();
        if parts.is_empty() || mass <= 0.0 {
            return Err(Error::EmptyMassSet);
        }
        let cog = parts.iter().map(|p| p.cog * p.mass).sum::<Vec3>() / mass;
        let mut inertia = InertiaTensor::zero();
        for p in parts {
            inertia += p.inertia + parallel_axis_term(p.mass, &(p.cog - cog))?;
        }
        Ok(MassProperties { mass, cog, inertia })
    }
}

/// Evaluates the mass-distribution integral for a discrete set, about the
/// set's own barycentre.
pub fn inertia_from_point_masses(set: &PointMassSet) -> Result<MassProperties> {
    if set.is_empty() {
        return Err(Error::EmptyMassSet);
    }
    for m in set
        .points
        .iter()
        .map(|p| p.mass)
        .chain(set.cuboids.iter().map(|c| c.mass))
    {
        if !m.is_finite() {
            return Err(Error::NonFinite("mass"));
        }
        if m <= 0.0 {
            return Err(Error::InvalidInput(format!("element mass must be positive, got {m}")));
        }
    }

    let mass: f64 = set.points.iter().map(|p| p.mass).sum::<f64>()
        + set.cuboids.iter().map(|c| c.mass).sum::<f64>();
    let moment: Vec3 = set.points.iter().map(|p| p.position * p.mass).sum::<Vec3>()
        + set.cuboids.iter().map(|c| c.centre * c.mass).sum::<Vec3>();
    let cog = moment / mass;

    let mut inertia = InertiaTensor::zero();
    for p in &set.points {
        inertia += parallel_axis_term(p.mass, &(p.position - cog))?;
    }
    for c in &set.cuboids {
        inertia += c.central_inertia() + parallel_axis_term(c.mass, &(c.centre - cog))?;
    }
    Ok(MassProperties { mass, cog, inertia })
}
