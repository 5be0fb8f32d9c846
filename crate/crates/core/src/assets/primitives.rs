//! Procedural point clouds: boxes and part-stacked proxies.

use super::{
    AssetError, AssetMetadata, MaterialParams, NormalizationTransform, PartInfo, SimReadyAsset,
};

/// Cell-centered lattice with `counts[a]` points along axis `a` filling `[min, max]`.
pub fn lattice_box(counts: [usize; 3], min: [f64; 3], max: [f64; 3]) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(counts.iter().product());
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                let idx = [i, j, k];
                out.push(std::array::from_fn(|a| {
                    min[a] + (idx[a] as f64 + 0.5) / counts[a] as f64 * (max[a] - min[a])
                }));
            }
        }
    }
    out
}

/// A homogeneous cube filling the unit box with `n³` points.
pub fn cube_asset(
    id: &str,
    n: usize,
    material: MaterialParams,
    color: [f64; 3],
    world_scale: f64,
) -> Result<SimReadyAsset, AssetError> {
    let points = lattice_box([n; 3], [0.0; 3], [1.0; 3]);
    let count = points.len();
    let mut metadata = AssetMetadata::new(
        "cube",
        vec![PartInfo {
            name: "body".into(),
            coarse_material: "plastic".into(),
            fine_material: None,
        }],
    );
    metadata.id = id.to_string();
    metadata.world_scale = world_scale;
    SimReadyAsset::new(
        points,
        vec![color; count],
        vec![0; count],
        vec![material; count],
        metadata,
        NormalizationTransform::identity(),
    )
}

/// One part of a [`stacked_parts_asset`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProxyPart {
    pub info: PartInfo,
    pub material: MaterialParams,
    pub color: [f64; 3],
}

/// Stand-in geometry for an object known only by its part list: parts are
/// equal horizontal slabs of the unit box, the first part at the bottom.
pub fn stacked_parts_asset(
    id: &str,
    category: &str,
    parts: &[ProxyPart],
    points_per_axis: usize,
    world_scale: f64,
) -> Result<SimReadyAsset, AssetError> {
    if parts.is_empty() {
        return Err(AssetError::EmptySet("part"));
    }
    let n = points_per_axis.max(parts.len());
    let layers_per_part = (n / parts.len()).max(1);
    let height = 1.0 / parts.len() as f64;
    let (mut points, mut colors, mut labels, mut materials) = (vec![], vec![], vec![], vec![]);
    for (p, part) in parts.iter().enumerate() {
        let slab = lattice_box(
            [n, layers_per_part, n],
            [0.0, p as f64 * height, 0.0],
            [1.0, (p + 1) as f64 * height, 1.0],
        );
        colors.extend(std::iter::repeat_n(part.color, slab.len()));
        labels.extend(std::iter::repeat_n(p as u32, slab.len()));
        materials.extend(std::iter::repeat_n(part.material, slab.len()));
        points.extend(slab);
    }
    let mut metadata = AssetMetadata::new(category, parts.iter().map(|p| p.info.clone()).collect());
    metadata.id = id.to_string();
    metadata.world_scale = world_scale;
    SimReadyAsset::new(
        points,
        colors,
        labels,
        materials,
        metadata,
        NormalizationTransform::identity(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_is_cell_centered() {
        let pts = lattice_box([2, 1, 1], [0.0; 3], [1.0; 3]);
        assert_eq!(pts, vec![[0.25, 0.5, 0.5], [0.75, 0.5, 0.5]]);
    }

    #[test]
    fn stacked_parts_layout() {
        let part = |name: &str| ProxyPart {
            info: PartInfo {
                name: name.into(),
                coarse_material: "wood".into(),
                fine_material: None,
            },
            material: MaterialParams::elastic(1e9, 0.3, 600.0),
            color: [0.5; 3],
        };
        let a =
            stacked_parts_asset("chair", "chair", &[part("legs"), part("seat")], 8, 1.0).unwrap();
        assert_eq!(a.len(), 2 * 8 * 4 * 8);
        for (p, &l) in a.points().iter().zip(a.part_labels()) {
            assert_eq!(l, if p[1] < 0.5 { 0 } else { 1 });
        }
    }
}
