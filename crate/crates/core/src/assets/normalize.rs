use super::AssetError;
use serde::{Deserialize, Serialize};

/// Uniform scale + translation: `normalized = scale * world + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub scale: f64,
    pub translation: [f64; 3],
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        NormalizationTransform {
            scale: 1.0,
            translation: [0.0; 3],
        }
    }

    pub fn apply(&self, p: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| self.scale * p[a] + self.translation[a])
    }

    /// Maps a normalized point back to the original frame.
    pub fn invert(&self, p: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| (p[a] - self.translation[a]) / self.scale)
    }
}

/// Fits the cloud into `[0,1]^3`: the longest bounding-box axis spans exactly
/// `[0,1]`, the scale is uniform and the other axes are centered on 0.5.
pub fn normalize_to_unit_box(
    points: &[[f64; 3]],
) -> Result<(Vec<[f64; 3]>, NormalizationTransform), AssetError> {
    if points.is_empty() {
        return Err(AssetError::EmptySet("point"));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let (long_axis, extent) = (0..3)
        .map(|a| (a, hi[a] - lo[a]))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap();
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(AssetError::DegenerateExtent);
    }
    let scale = 1.0 / extent;
    let translation = std::array::from_fn(|a| {
        if a == long_axis {
            -scale * lo[a]
        } else {
            0.5 - scale * 0.5 * (lo[a] + hi[a])
        }
    });
    let t = NormalizationTransform { scale, translation };
    let out = points
        .iter()
        .map(|p| {
            let mut q = t.apply(p);
            // Pin the long axis to the exact [0,1] interval.
            q[long_axis] = (p[long_axis] - lo[long_axis]) / extent;
            q
        })
        .collect();
    Ok((out, t))
}
