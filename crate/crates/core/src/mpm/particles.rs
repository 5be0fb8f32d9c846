use super::config::SimConfig;
use super::grid::Vec3;
use crate::assets::{BehaviorType, MaterialParams, SimReadyAsset};
use crate::constitutive::{
    lame_from_moduli, ConstitutiveError, LameParams, Mat3, PlasticState, ReturnMapping, Softening,
};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub x: Vec3,
    pub v: Vec3,
    /// Elastic deformation gradient.
    pub f: Mat3,
    /// APIC affine velocity matrix.
    pub c: Mat3,
    pub mass: f64,
    pub volume0: f64,
    pub material: MaterialParams,
    pub plastic: PlasticState,
}

/// Constitutive data derived once from a particle's [`MaterialParams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleModel {
    pub lame: LameParams,
    pub stvk: bool,
    pub mapping: ReturnMapping,
    /// `sqrt(E / rho)`, used for the CFL bound.
    pub sound_speed: f64,
}

impl ParticleModel {
    pub fn new(m: &MaterialParams, config: &SimConfig) -> Result<Self, ConstitutiveError> {
        let lame = lame_from_moduli(m.youngs_modulus, m.poisson_ratio)?;
        let yield_stress = m.yield_stress.unwrap_or(f64::INFINITY);
        let mapping = match m.behavior {
            BehaviorType::M0 => ReturnMapping::Identity,
            BehaviorType::M1 => ReturnMapping::VonMises {
                softening: Some(Softening {
                    initial_yield: yield_stress,
                    rate: config.softening.rate,
                    floor_ratio: config.softening.floor_ratio,
                }),
            },
            BehaviorType::M2 => ReturnMapping::VonMises { softening: None },
            BehaviorType::M3 => ReturnMapping::DruckerPrager {
                friction_angle: m.friction_angle.unwrap_or(0.0),
            },
        };
        Ok(ParticleModel {
            lame,
            stvk: m.behavior == BehaviorType::M3,
            mapping,
            sound_speed: (m.youngs_modulus / m.density).sqrt(),
        })
    }
}

/// Particle volume from voxel occupancy: occupied cells at spacing `dx`,
/// times `dx³`, shared equally by all points.
pub fn voxel_volume_per_point(points: &[[f64; 3]], dx: f64) -> f64 {
    let cells: HashSet<[i64; 3]> = points
        .iter()
        .map(|p| p.map(|x| (x / dx).floor() as i64))
        .collect();
    cells.len() as f64 * dx * dx * dx / points.len() as f64
}

/// Particles at rest at the asset's world-space positions, `F = I`.
pub fn particles_from_asset(asset: &SimReadyAsset, config: &SimConfig) -> Vec<ParticleState> {
    let points = asset.world_points();
    let volume0 = voxel_volume_per_point(&points, config.dx());
    points
        .iter()
        .zip(asset.materials())
        .map(|(p, m)| ParticleState {
            x: Vec3::from(*p),
            v: Vec3::zeros(),
            f: Mat3::identity(),
            c: Mat3::zeros(),
            mass: m.density * volume0,
            volume0,
            material: *m,
            plastic: PlasticState::new(m.yield_stress.unwrap_or(f64::MAX)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voxel_volume_of_dense_cube() {
        // 10x10x10 points at spacing 0.01 fill 10^3 cells of 0.01 m
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                for k in 0..10 {
                    pts.push([i, j, k].map(|v| 0.005 + v as f64 * 0.01));
                }
            }
        }
        let v = voxel_volume_per_point(&pts, 0.01);
        assert!((v * 1000.0 - 1e-3).abs() < 1e-15);
    }
}
