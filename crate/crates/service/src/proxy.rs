//! The asset simulated for a session: the described asset file with the
//! session's materials painted onto its parts, or stacked slab geometry when
//! the description has no asset file.

use crate::palette::color_from_name;
use simready_annotate::ObjectDescription;
use simready_core::assets::{load_asset, stacked_parts_asset, ProxyPart};
use simready_core::{MaterialParams, SimReadyAsset};
use std::collections::BTreeMap;
use std::path::Path;

pub fn session_asset(
    id: &str,
    desc: &ObjectDescription,
    materials: &BTreeMap<String, MaterialParams>,
    points_per_axis: usize,
    world_scale: f64,
) -> Result<SimReadyAsset, String> {
    let material = |name: &str| {
        materials
            .get(name)
            .copied()
            .ok_or_else(|| format!("no material for part `{name}`"))
    };
    if let Some(path) = &desc.asset_path {
        let mut asset = load_asset(Path::new(path)).map_err(|e| e.to_string())?;
        let names: Vec<String> = asset
            .metadata()
            .parts
            .iter()
            .map(|p| p.name.clone())
            .collect();
        for (i, name) in names.iter().enumerate() {
            asset = asset
                .with_part_material(i as u32, material(name)?)
                .map_err(|e| e.to_string())?;
        }
        return Ok(asset);
    }
    let parts = desc
        .parts
        .iter()
        .map(|p| {
            Ok(ProxyPart {
                info: p.info(),
                material: material(&p.name)?,
                color: color_from_name(&p.color),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    stacked_parts_asset(id, &desc.shape_name, &parts, points_per_axis, world_scale)
        .map_err(|e| e.to_string())
}
