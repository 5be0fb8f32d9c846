//! Nearest-neighbor transfer of part labels and colors from surface samples
//! to volume samples.

use super::AssetError;
use crate::spatial::KdTree;
use rayon::prelude::*;
use std::collections::HashMap;
use std::hash::Hash;

pub const DEFAULT_VOTE_NEIGHBORS: usize = 5;

/// Majority vote over the `k` nearest labeled points of each query.
///
/// Ties go to the tied label whose closest voter is nearest the query.
pub fn propagate_materials<L>(
    positions: &[[f64; 3]],
    labels: &[L],
    queries: &[[f64; 3]],
    k: usize,
) -> Result<Vec<L>, AssetError>
where
    L: Clone + Eq + Hash + Send + Sync,
{
    if positions.is_empty() {
        return Err(AssetError::EmptySet("labeled"));
    }
    if k == 0 {
        return Err(AssetError::ZeroNeighbors);
    }
    if positions.len() != labels.len() {
        return Err(AssetError::parse(
            "part_labels",
            format!("{} labels for {} points", labels.len(), positions.len()),
        ));
    }
    let tree = KdTree::build(positions);
    Ok(queries
        .par_iter()
        .map(|q| {
            let neighbors = tree.k_nearest(q, k);
            // neighbors are sorted nearest-first; remember first appearance
            let mut counts: HashMap<&L, (usize, usize)> = HashMap::new();
            for (rank, n) in neighbors.iter().enumerate() {
                counts.entry(&labels[n.index]).or_insert((0, rank)).0 += 1;
            }
            let (label, _) = counts
                .into_iter()
                .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
                .unwrap();
            label.clone()
        })
        .collect())
}

/// Each query takes the color of its nearest surface point.
pub fn propagate_colors(
    surface: &[[f64; 3]],
    colors: &[[f64; 3]],
    queries: &[[f64; 3]],
) -> Result<Vec<[f64; 3]>, AssetError> {
    if surface.is_empty() {
        return Err(AssetError::EmptySet("surface"));
    }
    if surface.len() != colors.len() {
        return Err(AssetError::parse(
            "colors",
            format!("{} colors for {} points", colors.len(), surface.len()),
        ));
    }
    let tree = KdTree::build(surface);
    Ok(queries
        .par_iter()
        .map(|q| colors[tree.nearest(q).unwrap().index])
        .collect())
}
