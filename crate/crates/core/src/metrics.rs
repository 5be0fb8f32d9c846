//! Geometric, trajectory and material-prediction metrics, plus per-scene
//! z-score calibration.

use crate::assets::MaterialParams;
use crate::mpm::Trajectory;
use crate::spatial::KdTree;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const DEFAULT_F_SCORE_TAU: f64 = 0.02;
pub const DEFAULT_IOU_RESOLUTION: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{0} point set is empty")]
    EmptySet(&'static str),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("grid resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(usize, usize),
    #[error("trajectories are not synchronized: {0}")]
    FrameMismatch(String),
    #[error("distance threshold must be positive, got {0}")]
    BadTau(f64),
    #[error("scene `{0}` has fewer than 2 methods")]
    TooFewMethods(String),
}

/// For every point of `from`, the squared distance to its nearest point in `to`.
fn nearest_sq(from: &[[f64; 3]], to: &KdTree) -> Vec<f64> {
    from.par_iter()
        .map(|p| to.nearest(p).map_or(f64::INFINITY, |n| n.dist2))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Half the sum of the two directed mean squared nearest-neighbour distances.
pub fn chamfer_distance(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<f64, MetricsError> {
    if a.is_empty() {
        return Err(MetricsError::EmptySet("first"));
    }
    if b.is_empty() {
        return Err(MetricsError::EmptySet("second"));
    }
    let (ta, tb) = (KdTree::build(a), KdTree::build(b));
    Ok(0.5 * (mean(&nearest_sq(a, &tb)) + mean(&nearest_sq(b, &ta))))
}

/// Mean chamfer distance over frames with matching timestamps.
pub fn sim_cd(pred: &Trajectory, truth: &Trajectory) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::FrameMismatch(format!(
            "{} frames vs {} frames",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(MetricsError::FrameMismatch("no frames".into()));
    }
    let mut total = 0.0;
    for (k, (p, t)) in pred.frames().iter().zip(truth.frames()).enumerate() {
        if (p.time - t.time).abs() > 1e-9 {
            return Err(MetricsError::FrameMismatch(format!(
                "frame {k} at t={} vs t={}",
                p.time, t.time
            )));
        }
        total += chamfer_distance(&pred.frame_points(k), &truth.frame_points(k))?;
    }
    Ok(total / pred.len() as f64)
}

/// Dense cubic occupancy grid, x-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupancyGrid {
    resolution: usize,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(resolution: usize) -> Self {
        OccupancyGrid {
            resolution,
            cells: vec![false; resolution.pow(3)],
        }
    }

    pub fn from_cells(resolution: usize, cells: Vec<bool>) -> Result<Self, MetricsError> {
        if cells.len() != resolution.pow(3) {
            return Err(MetricsError::LengthMismatch(cells.len(), resolution.pow(3)));
        }
        Ok(OccupancyGrid { resolution, cells })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.resolution + j) * self.resolution + k
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.index(i, j, k);
        self.cells[idx] = value;
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.cells[self.index(i, j, k)]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Marks every voxel of the unit cube that contains at least one point.
/// Points outside `[0,1]³` are clamped to the boundary voxels.
pub fn voxelize(points: &[[f64; 3]], resolution: usize) -> OccupancyGrid {
    let mut grid = OccupancyGrid::empty(resolution);
    let cell = |x: f64| ((x * resolution as f64).floor().max(0.0) as usize).min(resolution - 1);
    for p in points {
        grid.set(cell(p[0]), cell(p[1]), cell(p[2]), true);
    }
    grid
}

/// Intersection over union; two empty grids score 1.
pub fn occupancy_iou(a: &OccupancyGrid, b: &OccupancyGrid) -> Result<f64, MetricsError> {
    if a.resolution != b.resolution {
        return Err(MetricsError::ResolutionMismatch(a.resolution, b.resolution));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.cells.iter().zip(&b.cells) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Harmonic mean of the fraction of `pred` within `tau` of `truth` and vice versa.
pub fn f_score(pred: &[[f64; 3]], truth: &[[f64; 3]], tau: f64) -> Result<f64, MetricsError> {
    if !(tau > 0.0) {
        return Err(MetricsError::BadTau(tau));
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptySet("predicted"));
    }
    if truth.is_empty() {
        return Err(MetricsError::EmptySet("reference"));
    }
    let tau2 = tau * tau;
    let within = |d: Vec<f64>| d.iter().filter(|&&x| x <= tau2).count() as f64 / d.len() as f64;
    let precision = within(nearest_sq(pred, &KdTree::build(truth)));
    let recall = within(nearest_sq(truth, &KdTree::build(pred)));
    Ok(if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    })
}

/// Named evaluation results. Absent metrics are `None` and omitted from output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "M.B. Acc", skip_serializing_if = "Option::is_none", default)]
    pub behavior_accuracy: Option<f64>,
    #[serde(
        rename = "MAE-log(E)",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub mae_log_e: Option<f64>,
    #[serde(rename = "MAE-ν", skip_serializing_if = "Option::is_none", default)]
    pub mae_nu: Option<f64>,
    #[serde(
        rename = "MAE-log(σ)",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub mae_log_sigma: Option<f64>,
    #[serde(rename = "MAE-φ", skip_serializing_if = "Option::is_none", default)]
    pub mae_phi: Option<f64>,
    #[serde(rename = "MAE-ρ", skip_serializing_if = "Option::is_none", default)]
    pub mae_rho: Option<f64>,
    #[serde(rename = "Sim-CD", skip_serializing_if = "Option::is_none", default)]
    pub sim_cd: Option<f64>,
    #[serde(rename = "MAE-c", skip_serializing_if = "Option::is_none", default)]
    pub mae_color: Option<f64>,
    #[serde(rename = "IoU", skip_serializing_if = "Option::is_none", default)]
    pub iou: Option<f64>,
    #[serde(rename = "CD", skip_serializing_if = "Option::is_none", default)]
    pub cd: Option<f64>,
    #[serde(rename = "F-Score", skip_serializing_if = "Option::is_none", default)]
    pub f_score: Option<f64>,
}

impl MetricsReport {
    /// (name, value) pairs in table order, present metrics only.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        [
            ("M.B. Acc", self.behavior_accuracy),
            ("MAE-log(E)", self.mae_log_e),
            ("MAE-ν", self.mae_nu),
            ("MAE-log(σ)", self.mae_log_sigma),
            ("MAE-φ", self.mae_phi),
            ("MAE-ρ", self.mae_rho),
            ("Sim-CD", self.sim_cd),
            ("MAE-c", self.mae_color),
            ("IoU", self.iou),
            ("CD", self.cd),
            ("F-Score", self.f_score),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    /// Fills in every metric present in `other`.
    pub fn merge(&mut self, other: &MetricsReport) {
        macro_rules! take {
            ($($f:ident),*) => {$( if other.$f.is_some() { self.$f = other.$f; } )*};
        }
        take!(
            behavior_accuracy,
            mae_log_e,
            mae_nu,
            mae_log_sigma,
            mae_phi,
            mae_rho,
            sim_cd,
            mae_color,
            iou,
            cd,
            f_score
        );
    }

    /// One `name: value` line per metric.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}: {v}\n"))
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap()
    }
}

/// Behavior accuracy and parameter MAEs over corresponding points.
///
/// log10(σ_y) and φ use 0 for a point that lacks the parameter, matching the
/// feature-vector encoding. Their MAEs are reported only when at least one
/// point on either side carries the parameter.
pub fn material_report(
    pred: &[MaterialParams],
    truth: &[MaterialParams],
    colors: Option<(&[[f64; 3]], &[[f64; 3]])>,
) -> Result<MetricsReport, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptySet("material"));
    }
    let n = pred.len() as f64;
    let mae = |f: &dyn Fn(&MaterialParams) -> f64| {
        pred.iter()
            .zip(truth)
            .map(|(p, t)| (f(p) - f(t)).abs())
            .sum::<f64>()
            / n
    };
    let any = |f: &dyn Fn(&MaterialParams) -> bool| pred.iter().chain(truth).any(f);
    let mut report = MetricsReport {
        behavior_accuracy: Some(
            pred.iter()
                .zip(truth)
                .filter(|(p, t)| p.behavior == t.behavior)
                .count() as f64
                / n,
        ),
        mae_log_e: Some(mae(&|m| m.youngs_modulus.log10())),
        mae_nu: Some(mae(&|m| m.poisson_ratio)),
        mae_rho: Some(mae(&|m| m.density)),
        ..Default::default()
    };
    if any(&|m| m.yield_stress.is_some()) {
        report.mae_log_sigma = Some(mae(&|m| m.yield_stress.map_or(0.0, f64::log10)));
    }
    if any(&|m| m.friction_angle.is_some()) {
        report.mae_phi = Some(mae(&|m| m.friction_angle.unwrap_or(0.0)));
    }
    if let Some((pc, tc)) = colors {
        if pc.len() != tc.len() {
            return Err(MetricsError::LengthMismatch(pc.len(), tc.len()));
        }
        if !pc.is_empty() {
            let total: f64 = pc
                .iter()
                .zip(tc)
                .map(|(a, b)| (0..3).map(|i| (a[i] - b[i]).abs()).sum::<f64>())
                .sum();
            report.mae_color = Some(total / (3 * pc.len()) as f64);
        }
    }
    Ok(report)
}

pub type SceneScores = BTreeMap<String, BTreeMap<String, f64>>;

/// Per-scene standardization with the population standard deviation.
/// A scene whose scores are all equal maps to zeros.
pub fn zscore_calibrate(scores: &SceneScores) -> Result<SceneScores, MetricsError> {
    let mut out = SceneScores::new();
    for (scene, methods) in scores {
        if methods.len() < 2 {
            return Err(MetricsError::TooFewMethods(scene.clone()));
        }
        let n = methods.len() as f64;
        let mean = methods.values().sum::<f64>() / n;
        let var = methods.values().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        let z = methods
            .iter()
            .map(|(m, s)| (m.clone(), if std > 0.0 { (s - mean) / std } else { 0.0 }))
            .collect();
        out.insert(scene.clone(), z);
    }
    Ok(out)
}
