use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{stand_id, DelineationParams, HarvestedStand, Segment, StandError};
use crate::geom::{alpha_shape, GeomError, Point, ShapeIndex};
use crate::grid::{cells_in_window, GridFrame};
use crate::harvester::TreeRecord;

/// Index of the segment containing each tree, `None` when outside all.
pub fn assign_trees_to_segments(
    trees: &[TreeRecord],
    segments: &[Segment],
) -> Result<Vec<Option<usize>>, StandError> {
    trees
        .par_iter()
        .map(|t| {
            let p = Point::new(t.x, t.y);
            let hits: Vec<usize> = (0..segments.len()).filter(|&i| segments[i].contains(p)).collect();
            match hits.as_slice() {
                [] => Ok(None),
                [one] => Ok(Some(*one)),
                many => Err(StandError::Ambiguity {
                    object_id: t.object_id.clone(),
                    stem_id: t.stem_id.clone(),
                    segments: many.iter().map(|&i| segments[i].segment_id.clone()).collect(),
                }),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedObject {
    pub object_id: String,
    pub reason: GeomError,
}

#[derive(Debug, Clone, Default)]
pub struct Delineation {
    /// Sorted by stand id.
    pub stands: Vec<HarvestedStand>,
    pub skipped: Vec<SkippedObject>,
}

/// Crop each segment that received trees to the buffered alpha shape of
/// the harvest object's tree positions, on the cell grid.
pub fn delineate_stands(
    trees: &[TreeRecord],
    segments: &[Segment],
    frame: &GridFrame,
    params: &DelineationParams,
) -> Result<Delineation, StandError> {
    let assignment = assign_trees_to_segments(trees, segments)?;
    let mut by_object: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in trees.iter().enumerate() {
        by_object.entry(t.object_id.as_str()).or_default().push(i);
    }
    for members in by_object.values_mut() {
        members.sort_by(|&a, &b| trees[a].stem_id.cmp(&trees[b].stem_id));
    }
    let results: Vec<Result<Vec<HarvestedStand>, SkippedObject>> = by_object
        .par_iter()
        .map(|(&object_id, members)| delineate_object(object_id, members, trees, &assignment, segments, frame, params))
        .collect();

    let mut out = Delineation::default();
    for r in results {
        match r {
            Ok(stands) => out.stands.extend(stands),
            Err(skip) => {
                log::warn!("object={} skipped reason=\"{}\"", skip.object_id, skip.reason);
                out.skipped.push(skip);
            }
        }
    }
    out.stands.sort_by(|a, b| a.stand_id.cmp(&b.stand_id));
    Ok(out)
}

fn delineate_object(
    object_id: &str,
    members: &[usize],
    trees: &[TreeRecord],
    assignment: &[Option<usize>],
    segments: &[Segment],
    frame: &GridFrame,
    params: &DelineationParams,
) -> Result<Vec<HarvestedStand>, SkippedObject> {
    let positions: Vec<Point> = members.iter().map(|&i| Point::new(trees[i].x, trees[i].y)).collect();
    let shape = alpha_shape(&positions, params.alpha).map_err(|reason| SkippedObject {
        object_id: object_id.to_string(),
        reason,
    })?;
    let index = ShapeIndex::new(shape, frame.cellsize.max(params.buffer_m));
    let buffer = params.buffer_m;

    let mut per_segment: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in members {
        if let Some(s) = assignment[i] {
            per_segment.entry(s).or_default().push(i);
        }
    }
    let mut stands = Vec::new();
    for (seg_idx, seg_trees) in per_segment {
        let seg = &segments[seg_idx];
        let cells = cells_in_window(frame, &seg.bbox, |c| seg.shape.contains(c) && index.within_buffer(c, buffer));
        if cells.is_empty() {
            log::debug!("object={object_id} segment={} no cells", seg.segment_id);
            continue;
        }
        let kept: Vec<&TreeRecord> = seg_trees
            .iter()
            .map(|&i| &trees[i])
            .filter(|t| index.within_buffer(Point::new(t.x, t.y), buffer))
            .collect();
        let mut stem_ids: Vec<String> = kept.iter().map(|t| t.stem_id.clone()).collect();
        stem_ids.sort();
        let total_vol_m3 = kept.iter().map(|t| t.total_vol_m3).sum();
        let spruce_vol_m3 = kept
            .iter()
            .filter(|t| params.is_spruce(&t.species))
            .map(|t| t.total_vol_m3)
            .sum();
        let br_vol_m3 = kept.iter().map(|t| t.br_vol_m3).sum();
        stands.push(HarvestedStand {
            stand_id: stand_id(object_id, &seg.segment_id),
            object_id: object_id.to_string(),
            segment_id: seg.segment_id.clone(),
            centroid: cells.centroid().expect("non-empty cells"),
            area_ha: cells.area_ha(),
            cells,
            stem_ids,
            total_vol_m3,
            spruce_vol_m3,
            br_vol_m3,
        });
    }
    Ok(stands)
}
