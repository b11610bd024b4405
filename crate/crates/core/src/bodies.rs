//! Geometric models of the bench hardware: the measurement device, the
//! aluminium proof block and the grid body with its steel-weight layouts.
//!
//! All positions are in the IMU frame, in metres.

use serde::{Deserialize, Serialize};

use crate::dynamics::REFERENCE_WHEEL_INERTIA;
use crate::error::Result;
use crate::types::{inertia_from_point_masses, Cuboid, InertiaTensor, MassProperties, PointMassSet, Vec3};

/// Empty printed grid frame, kg.
pub const GRID_FRAME_MASS: f64 = 0.178;
/// Outer dimensions of the grid frame (x, y, z), m.
pub const GRID_FRAME_EDGES: [f64; 3] = [79.18e-3, 150.95e-3, 44.97e-3];
/// Hole spacing along both grid axes, m.
pub const GRID_PITCH: f64 = 18e-3;
/// Steel weight edges (x, y, z), m.
pub const STEEL_EDGES: [f64; 3] = [15.3e-3, 15.3e-3, 40e-3];
/// Height of a seated weight's centre above the frame's centre, m.
pub const STEEL_RAISE: f64 = 3.25e-3;
/// Frame centre relative to the IMU when the device is mounted, m.
pub const GRID_MOUNT: [f64; 3] = [10.7e-3, 1.8e-3, 43.4e-3];

/// Proof block edges, m, and mass of solid aluminium of that size, kg.
pub const PROOF_EDGES: [f64; 3] = [70e-3, 60e-3, 30e-3];
pub const PROOF_MASS: f64 = 0.340;
/// Proof block centre relative to the IMU when mounted, m.
pub const PROOF_MOUNT: [f64; 3] = [4e-3, -2e-3, 32e-3];

/// Weight layouts of the grid body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridConfig {
    E,
    A,
    B,
    C,
}

impl GridConfig {
    pub const ALL: [GridConfig; 4] = [GridConfig::E, GridConfig::A, GridConfig::B, GridConfig::C];

    pub fn label(self) -> &'static str {
        match self {
            GridConfig::E => "E",
            GridConfig::A => "A",
            GridConfig::B => "B",
            GridConfig::C => "C",
        }
    }

    /// Occupied holes as (row, column), rows 1..=8 along y, columns 1..=4
    /// along x.
    pub fn cells(self) -> &'static [(u8, u8)] {
        match self {
            GridConfig::E => &[],
            GridConfig::A => &[(1, 2), (1, 3), (8, 2), (8, 3)],
            GridConfig::B => &[(3, 1), (3, 4), (4, 2), (4, 3), (5, 2), (5, 3), (6, 1), (6, 4)],
            GridConfig::C => &[
                (1, 1),
                (1, 4),
                (2, 2),
                (2, 3),
                (3, 1),
                (3, 4),
                (4, 2),
                (4, 3),
                (5, 2),
                (5, 3),
                (6, 1),
                (6, 4),
                (7, 2),
                (7, 3),
                (8, 1),
                (8, 4),
            ],
        }
    }

    /// Weighed total mass of the configuration, kg.
    pub fn mass(self) -> f64 {
        match self {
            GridConfig::E => 0.178,
            GridConfig::A => 0.459,
            GridConfig::B => 0.739,
            GridConfig::C => 1.300,
        }
    }

    /// Principal moments from the geometry (x, y, z), kg·mm².
    pub fn reference_diagonal(self) -> [f64; 3] {
        match self {
            GridConfig::E => [368.0, 123.0, 431.0],
            GridConfig::A => [1525.0, 190.0, 1577.0],
            GridConfig::B => [682.0, 437.0, 906.0],
            GridConfig::C => [2448.0, 750.0, 2835.0],
        }
    }

    /// Mass of one steel weight in this configuration, kg.
    pub fn weight_mass(self) -> f64 {
        let n = self.cells().len();
        if n == 0 {
            0.0
        } else {
            (self.mass() - GRID_FRAME_MASS) / n as f64
        }
    }
}

/// Grid body in its own frame, origin at the frame's centre.
pub fn grid_body(config: GridConfig) -> PointMassSet {
    let mut set = PointMassSet::new().with_cuboid(Cuboid::axis_aligned(
        GRID_FRAME_MASS,
        Vec3::zeros(),
        Vec3::from(GRID_FRAME_EDGES),
    ));
    for &(row, col) in config.cells() {
        let centre = Vec3::new(
            (col as f64 - 2.5) * GRID_PITCH,
            (row as f64 - 4.5) * GRID_PITCH,
            STEEL_RAISE,
        );
        set = set.with_cuboid(Cuboid::axis_aligned(config.weight_mass(), centre, Vec3::from(STEEL_EDGES)));
    }
    set
}

/// Grid body placed in the IMU frame of the mounted device.
pub fn mounted_grid(config: GridConfig) -> PointMassSet {
    grid_body(config).transformed(&crate::types::Rotation::identity(), &Vec3::from(GRID_MOUNT))
}

/// Proof block placed in the IMU frame of the mounted device.
pub fn mounted_proof() -> PointMassSet {
    PointMassSet::new().with_cuboid(Cuboid::axis_aligned(
        PROOF_MASS,
        Vec3::from(PROOF_MOUNT),
        Vec3::from(PROOF_EDGES),
    ))
}

/// Analytic inertia of the proof block about its centre.
pub fn proof_inertia() -> InertiaTensor {
    Cuboid::axis_aligned(PROOF_MASS, Vec3::zeros(), Vec3::from(PROOF_EDGES)).central_inertia()
}

/// Reference measurement device: electronics and battery stack, motor
/// housing, and the wheel disc spinning about the IMU z axis. Total 100 g.
pub fn reference_device() -> PointMassSet {
    PointMassSet::new()
        .with_cuboid(Cuboid::axis_aligned(
            0.062,
            Vec3::new(-6e-3, 4e-3, -9e-3),
            Vec3::new(60e-3, 40e-3, 18e-3),
        ))
        .with_cuboid(Cuboid::axis_aligned(
            0.010,
            Vec3::new(-14e-3, 6e-3, 6e-3),
            Vec3::new(14e-3, 14e-3, 10e-3),
        ))
        // a thin disc of radius r has I_zz = m r²/2; the cuboid stand-in
        // with edges a·a gives m a²/6, so a = √3 r reproduces it
        .with_cuboid(Cuboid::axis_aligned(
            wheel_disc_mass(),
            Vec3::new(-14e-3, 6e-3, 13e-3),
            Vec3::new(WHEEL_CUBOID_EDGE, WHEEL_CUBOID_EDGE, 3e-3),
        ))
}

const WHEEL_CUBOID_EDGE: f64 = 20.78e-3;

/// Mass of the wheel stand-in giving it the reference axial inertia.
fn wheel_disc_mass() -> f64 {
    // I_zz of an a×a×h cuboid about z is m(a² + a²)/12
    REFERENCE_WHEEL_INERTIA * 6.0 / (WHEEL_CUBOID_EDGE * WHEEL_CUBOID_EDGE)
}

/// Mass properties of a device, an attached object and their union.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assembly {
    pub device: MassProperties,
    pub object: Option<MassProperties>,
    pub combined: MassProperties,
}

impl Assembly {
    pub fn new(device: &PointMassSet, object: Option<&PointMassSet>) -> Result<Self> {
        let dev = inertia_from_point_masses(device)?;
        let obj = object.map(inertia_from_point_masses).transpose()?;
        let combined = match obj {
            Some(o) => MassProperties::compose(&[dev, o])?,
            None => dev,
        };
        Ok(Self {
            device: dev,
            object: obj,
            combined,
        })
    }

    /// Vector from the combined barycentre to the IMU (the origin).
    pub fn imu_offset(&self) -> Vec3 {
        -self.combined.cog
    }
}
