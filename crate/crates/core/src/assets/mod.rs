//! Simulation-ready assets: point positions, albedo, part labels and a full
//! material bundle per point.

mod features;
mod format;
mod normalize;
mod primitives;
mod propagate;

pub use features::{material_feature_vector, material_from_features, FEATURE_DIM};
pub use format::{load_asset, save_asset, AssetEncoding, SCHEMA_VERSION};
pub use normalize::{normalize_to_unit_box, NormalizationTransform};
pub use primitives::{cube_asset, lattice_box, stacked_parts_asset, ProxyPart};
pub use propagate::{propagate_colors, propagate_materials, DEFAULT_VOTE_NEIGHBORS};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const MIN_YOUNGS_MODULUS: f64 = 1e4;
pub const MAX_YOUNGS_MODULUS: f64 = 1e13;
pub const MAX_POISSON_RATIO: f64 = 0.499;
pub const MAX_FRICTION_ANGLE: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed asset file, field `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("asset failed validation: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("point set has zero extent on every axis")]
    DegenerateExtent,
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("neighbor count must be at least 1")]
    ZeroNeighbors,
}

impl AssetError {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        AssetError::Parse {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Material behavior class: a fixed (elasticity, plasticity) pairing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BehaviorType {
    /// Neo-Hookean + identity plasticity (purely elastic).
    M0,
    /// Neo-Hookean + von Mises with softening.
    M1,
    /// Neo-Hookean + von Mises.
    M2,
    /// StVK + Drucker-Prager (granular).
    M3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElasticModel {
    NeoHookean,
    StVenantKirchhoff,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlasticModel {
    Identity,
    VonMisesSoftening,
    VonMises,
    DruckerPrager,
}

impl BehaviorType {
    pub const ALL: [BehaviorType; 4] = [
        BehaviorType::M0,
        BehaviorType::M1,
        BehaviorType::M2,
        BehaviorType::M3,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn models(self) -> (ElasticModel, PlasticModel) {
        match self {
            BehaviorType::M0 => (ElasticModel::NeoHookean, PlasticModel::Identity),
            BehaviorType::M1 => (ElasticModel::NeoHookean, PlasticModel::VonMisesSoftening),
            BehaviorType::M2 => (ElasticModel::NeoHookean, PlasticModel::VonMises),
            BehaviorType::M3 => (ElasticModel::StVenantKirchhoff, PlasticModel::DruckerPrager),
        }
    }

    pub fn requires_yield_stress(self) -> bool {
        matches!(self, BehaviorType::M1 | BehaviorType::M2)
    }

    pub fn requires_friction_angle(self) -> bool {
        self == BehaviorType::M3
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorType::M0 => "M0",
            BehaviorType::M1 => "M1",
            BehaviorType::M2 => "M2",
            BehaviorType::M3 => "M3",
        }
    }
}

impl fmt::Display for BehaviorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BehaviorType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "M0" => Ok(BehaviorType::M0),
            "M1" => Ok(BehaviorType::M1),
            "M2" => Ok(BehaviorType::M2),
            "M3" => Ok(BehaviorType::M3),
            other => Err(format!("unknown behavior type `{other}`")),
        }
    }
}

/// Physical parameters of one point, in SI units (Pa, kg/m³, radians).
///
/// `yield_stress` is only meaningful for M1/M2 and `friction_angle` only for
/// M3; [`MaterialParams::canonical`] drops the inapplicable ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    #[serde(rename = "E")]
    pub youngs_modulus: f64,
    #[serde(rename = "nu")]
    pub poisson_ratio: f64,
    #[serde(rename = "sigma_y", default, skip_serializing_if = "Option::is_none")]
    pub yield_stress: Option<f64>,
    #[serde(rename = "phi", default, skip_serializing_if = "Option::is_none")]
    pub friction_angle: Option<f64>,
    #[serde(rename = "rho")]
    pub density: f64,
    pub behavior: BehaviorType,
}

impl MaterialParams {
    pub fn elastic(youngs_modulus: f64, poisson_ratio: f64, density: f64) -> Self {
        MaterialParams {
            youngs_modulus,
            poisson_ratio,
            yield_stress: None,
            friction_angle: None,
            density,
            behavior: BehaviorType::M0,
        }
    }

    /// Every invariant violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let e = self.youngs_modulus;
        if !(MIN_YOUNGS_MODULUS..=MAX_YOUNGS_MODULUS).contains(&e) {
            out.push(format!(
                "E = {e} Pa outside [{MIN_YOUNGS_MODULUS:e}, {MAX_YOUNGS_MODULUS:e}]"
            ));
        }
        let nu = self.poisson_ratio;
        if !(0.0..=MAX_POISSON_RATIO).contains(&nu) {
            out.push(format!("nu = {nu} outside [0, {MAX_POISSON_RATIO}]"));
        }
        if !(self.density.is_finite() && self.density > 0.0) {
            out.push(format!("rho = {} must be positive", self.density));
        }
        match self.yield_stress {
            Some(s) if !(s.is_finite() && s > 0.0) => {
                out.push(format!("sigma_y = {s} must be positive"))
            }
            None if self.behavior.requires_yield_stress() => {
                out.push(format!("sigma_y is required for {}", self.behavior))
            }
            _ => {}
        }
        match self.friction_angle {
            Some(phi) if !(0.0..=MAX_FRICTION_ANGLE).contains(&phi) => {
                out.push(format!("phi = {phi} rad outside [0, pi/2]"))
            }
            None if self.behavior.requires_friction_angle() => {
                out.push(format!("phi is required for {}", self.behavior))
            }
            _ => {}
        }
        out
    }

    pub fn validate(&self) -> Result<(), AssetError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(AssetError::Invalid(v))
        }
    }

    /// Clears parameters the behavior type does not use.
    pub fn canonical(mut self) -> Self {
        if !self.behavior.requires_yield_stress() {
            self.yield_stress = None;
        }
        if !self.behavior.requires_friction_angle() {
            self.friction_angle = None;
        }
        self
    }

    /// Rounds every float toward zero to single precision, the storage
    /// precision of `.sra` files. Rounding toward zero keeps in-range values
    /// in range (0.499 and pi/2 both round up in f32 otherwise).
    pub fn to_storage_precision(self) -> Self {
        let r = f32_toward_zero;
        MaterialParams {
            youngs_modulus: r(self.youngs_modulus),
            poisson_ratio: r(self.poisson_ratio),
            yield_stress: self.yield_stress.map(r),
            friction_angle: self.friction_angle.map(r),
            density: r(self.density),
            behavior: self.behavior,
        }
    }
}

fn f32_toward_zero(x: f64) -> f64 {
    let y = x as f32;
    if y.is_finite() && (y as f64).abs() > x.abs() {
        f32::from_bits(y.to_bits() - 1) as f64
    } else {
        y as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartInfo {
    pub name: String,
    pub coarse_material: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_material: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssetMetadata {
    #[serde(default)]
    pub id: String,
    pub category: String,
    pub parts: Vec<PartInfo>,
    /// Meters per normalized unit. The normalized box is 1 m unless overridden.
    #[serde(default = "default_world_scale")]
    pub world_scale: f64,
}

fn default_world_scale() -> f64 {
    1.0
}

impl AssetMetadata {
    pub fn new(category: impl Into<String>, parts: Vec<PartInfo>) -> Self {
        AssetMetadata {
            id: String::new(),
            category: category.into(),
            parts,
            world_scale: 1.0,
        }
    }
}

/// An immutable, validated point-sampled object.
///
/// Per-point floats are held at `f32` precision so that the binary file
/// format round-trips bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SimReadyAsset {
    points: Vec<[f64; 3]>,
    colors: Vec<[f64; 3]>,
    part_labels: Vec<u32>,
    materials: Vec<MaterialParams>,
    metadata: AssetMetadata,
    normalization: NormalizationTransform,
}

/// Tolerance on the unit-box containment check, absorbing f32 rounding.
const BOX_SLACK: f64 = 1e-6;

impl SimReadyAsset {
    pub fn new(
        points: Vec<[f64; 3]>,
        colors: Vec<[f64; 3]>,
        part_labels: Vec<u32>,
        materials: Vec<MaterialParams>,
        metadata: AssetMetadata,
        normalization: NormalizationTransform,
    ) -> Result<Self, AssetError> {
        let snap = |v: [f64; 3]| v.map(|x| x as f32 as f64);
        let asset = SimReadyAsset {
            points: points.into_iter().map(snap).collect(),
            colors: colors.into_iter().map(snap).collect(),
            part_labels,
            materials: materials
                .into_iter()
                .map(|m| m.canonical().to_storage_precision())
                .collect(),
            metadata,
            normalization,
        };
        let problems = asset.violations();
        if problems.is_empty() {
            Ok(asset)
        } else {
            Err(AssetError::Invalid(problems))
        }
    }

    fn violations(&self) -> Vec<String> {
        let n = self.points.len();
        let mut out = Vec::new();
        if n == 0 {
            out.push("asset has no points".to_string());
        }
        for (name, len) in [
            ("colors", self.colors.len()),
            ("part_labels", self.part_labels.len()),
            ("materials", self.materials.len()),
        ] {
            if len != n {
                out.push(format!("{name} has {len} entries, expected {n}"));
            }
        }
        if let Some(i) = self.points.iter().position(|p| {
            p.iter()
                .any(|&x| !x.is_finite() || x < -BOX_SLACK || x > 1.0 + BOX_SLACK)
        }) {
            out.push(format!("point {i} lies outside the unit box"));
        }
        if let Some(i) = self
            .colors
            .iter()
            .position(|c| c.iter().any(|&x| !(0.0..=1.0).contains(&x)))
        {
            out.push(format!("color {i} has a channel outside [0, 1]"));
        }
        let parts = self.metadata.parts.len() as u32;
        if let Some(i) = self.part_labels.iter().position(|&l| l >= parts) {
            out.push(format!(
                "part label {} at point {i} is not in the part list ({parts} parts)",
                self.part_labels[i]
            ));
        }
        for (i, m) in self.materials.iter().enumerate() {
            for v in m.violations() {
                out.push(format!("material {i}: {v}"));
            }
        }
        if !(self.metadata.world_scale.is_finite() && self.metadata.world_scale > 0.0) {
            out.push("world_scale must be positive".to_string());
        }
        out
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    pub fn part_labels(&self) -> &[u32] {
        &self.part_labels
    }

    pub fn materials(&self) -> &[MaterialParams] {
        &self.materials
    }

    pub fn metadata(&self) -> &AssetMetadata {
        &self.metadata
    }

    pub fn normalization(&self) -> &NormalizationTransform {
        &self.normalization
    }

    /// Positions in meters: normalized coordinates times `world_scale`.
    pub fn world_points(&self) -> Vec<[f64; 3]> {
        let s = self.metadata.world_scale;
        self.points.iter().map(|p| p.map(|x| x * s)).collect()
    }

    /// A copy with every point of part `part` assigned `material`.
    pub fn with_part_material(
        &self,
        part: u32,
        material: MaterialParams,
    ) -> Result<SimReadyAsset, AssetError> {
        let mut materials = self.materials.clone();
        for (m, &l) in materials.iter_mut().zip(&self.part_labels) {
            if l == part {
                *m = material;
            }
        }
        SimReadyAsset::new(
            self.points.clone(),
            self.colors.clone(),
            self.part_labels.clone(),
            materials,
            self.metadata.clone(),
            self.normalization,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_asset(n_side: usize) -> SimReadyAsset {
        let mut pts = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                for k in 0..n_side {
                    let f = |x: usize| x as f64 / (n_side - 1) as f64;
                    pts.push([f(i), f(j), f(k)]);
                }
            }
        }
        let n = pts.len();
        SimReadyAsset::new(
            pts,
            vec![[0.5, 0.5, 0.5]; n],
            vec![0; n],
            vec![MaterialParams::elastic(1e6, 0.3, 1000.0); n],
            AssetMetadata::new(
                "cube",
                vec![PartInfo {
                    name: "body".into(),
                    coarse_material: "plastic".into(),
                    fine_material: None,
                }],
            ),
            NormalizationTransform::identity(),
        )
        .unwrap()
    }

    #[test]
    fn material_range_checks() {
        let mut m = MaterialParams::elastic(1e6, 0.7, 500.0);
        assert_eq!(m.violations().len(), 1);
        assert!(m.violations()[0].contains("nu"));
        m.poisson_ratio = 0.499;
        assert!(m.validate().is_ok());
        m.poisson_ratio = 0.5;
        assert!(m.validate().is_err());
    }

    #[test]
    fn e_span_covers_soft_to_stiff() {
        // 1e-3 GPa .. 1e3 GPa
        for e in [1e6, 1e12] {
            assert!(MaterialParams::elastic(e, 0.3, 1.0).validate().is_ok());
        }
        assert!(MaterialParams::elastic(1e3, 0.3, 1.0).validate().is_err());
        assert!(MaterialParams::elastic(1e14, 0.3, 1.0).validate().is_err());
    }

    #[test]
    fn friction_angle_range() {
        let mut m = MaterialParams {
            friction_angle: Some(std::f64::consts::FRAC_PI_2),
            behavior: BehaviorType::M3,
            ..MaterialParams::elastic(1e6, 0.3, 1500.0)
        };
        assert!(m.validate().is_ok());
        m.friction_angle = Some(1.6);
        assert!(m.validate().is_err());
        m.friction_angle = Some(-0.1);
        assert!(m.validate().is_err());
        m.friction_angle = None;
        assert!(m.violations()[0].contains("required"));
    }

    #[test]
    fn required_yield_stress() {
        let m = MaterialParams {
            behavior: BehaviorType::M2,
            ..MaterialParams::elastic(2e11, 0.3, 7800.0)
        };
        assert!(m
            .violations()
            .iter()
            .any(|v| v.contains("sigma_y is required")));
    }

    #[test]
    fn asset_lists_all_failures() {
        let err = SimReadyAsset::new(
            vec![[0.5; 3], [2.0, 0.0, 0.0]],
            vec![[0.5; 3]],
            vec![0, 3],
            vec![MaterialParams::elastic(1e6, 0.9, 1.0); 2],
            AssetMetadata::new("x", vec![]),
            NormalizationTransform::identity(),
        )
        .unwrap_err();
        let AssetError::Invalid(list) = err else {
            panic!("expected validation error")
        };
        assert!(list.len() >= 4, "{list:?}");
    }

    #[test]
    fn part_material_override() {
        let a = cube_asset(3);
        let steel = MaterialParams {
            yield_stress: Some(2.5e8),
            behavior: BehaviorType::M2,
            ..MaterialParams::elastic(2e11, 0.3, 7800.0)
        };
        let b = a.with_part_material(0, steel).unwrap();
        assert!(b.materials().iter().all(|m| m.behavior == BehaviorType::M2));
    }

    #[test]
    fn behavior_model_pairs() {
        use ElasticModel::*;
        use PlasticModel::*;
        assert_eq!(BehaviorType::M0.models(), (NeoHookean, Identity));
        assert_eq!(BehaviorType::M1.models(), (NeoHookean, VonMisesSoftening));
        assert_eq!(BehaviorType::M2.models(), (NeoHookean, VonMises));
        assert_eq!(
            BehaviorType::M3.models(),
            (StVenantKirchhoff, DruckerPrager)
        );
    }
}
