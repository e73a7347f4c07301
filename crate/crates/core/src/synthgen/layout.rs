use rand::seq::SliceRandom;
use rand::Rng;

use super::ScenarioConfig;
use crate::geom::{BBox, Point, Polygon, Ring, ShapeSet};
use crate::grid::GridFrame;
use crate::seeds;
use crate::stands::stand_id;

pub(crate) const CELL_M: f64 = 16.0;
const XLL: f64 = 250_000.0;
const YLL: f64 = 6_650_000.0;
/// Side of the square slot holding one segment, in cells.
const SLOT_CELLS: usize = 13;
/// Cells kept free between a slot edge and its footprint.
const SLOT_PAD_CELLS: usize = 2;
const MIN_SIDE_CELLS: usize = 4;
const MAX_SIDE_CELLS: usize = 8;

pub(crate) fn min_footprint_ha() -> f64 {
    (MIN_SIDE_CELLS as f64 * CELL_M).powi(2) / 1e4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Harvested,
    /// Unharvested, below mapping maturity.
    Young,
    /// Unharvested mature forest.
    Unharvested,
}

/// One segment and, for harvested plots, its footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub kind: PlotKind,
    pub cluster: usize,
    pub object_id: Option<String>,
    pub segment_id: String,
    /// Western grid line of the footprint, counted from the frame's west edge.
    pub col0: usize,
    /// Southern grid line of the footprint, counted from the frame's south edge.
    pub row0: usize,
    pub cols: usize,
    pub rows: usize,
    pub footprint: BBox,
    pub segment: BBox,
    /// 0 for the youngest harvestable forest, 1 for the oldest; negative
    /// for young plots.
    pub maturity: f64,
    /// Spruce share of stems.
    pub spruce_share: f64,
}

impl Plot {
    /// Area of the cells whose centers fall inside the footprint.
    pub fn cell_area_ha(&self) -> f64 {
        (self.cols * self.rows) as f64 * CELL_M * CELL_M / 1e4
    }

    pub fn stand_id(&self) -> Option<String> {
        self.object_id.as_deref().map(|o| stand_id(o, &self.segment_id))
    }

    pub fn segment_shape(&self) -> ShapeSet {
        let b = self.segment;
        let ring = Ring::closed(vec![
            b.min,
            Point::new(b.max.x, b.min.y),
            b.max,
            Point::new(b.min.x, b.max.y),
        ]);
        ShapeSet {
            polygons: vec![Polygon::new(ring)],
        }
    }

    pub fn center(&self) -> Point {
        Point::new(
            (self.segment.min.x + self.segment.max.x) / 2.0,
            (self.segment.min.y + self.segment.max.y) / 2.0,
        )
    }
}

pub(crate) fn lay_out(config: &ScenarioConfig, seed: u64) -> (GridFrame, Vec<Plot>) {
    let mut rng = seeds::stream(seed, "layout", 0);
    let per_cluster = config.stands_per_cluster + config.extra_segments_per_cluster;
    let slots = (per_cluster as f64).sqrt().ceil() as usize;
    let lattice_cols = (config.n_clusters as f64).sqrt().ceil() as usize;
    let lattice_rows = config.n_clusters.div_ceil(lattice_cols);
    let spacing = ((config.cluster_spacing_m / CELL_M).ceil() as usize).max(slots * SLOT_CELLS + 6);
    let frame = GridFrame {
        ncols: lattice_cols * spacing,
        nrows: lattice_rows * spacing,
        xll: XLL,
        yll: YLL,
        cellsize: CELL_M,
    };

    let mut plots = Vec::new();
    for c in 0..config.n_clusters {
        let base = ((c % lattice_cols) * spacing + 3, (c / lattice_cols) * spacing + 3);
        let mut order: Vec<usize> = (0..slots * slots).collect();
        order.shuffle(&mut rng);
        for (j, &slot) in order.iter().take(per_cluster).enumerate() {
            let kind = if j < config.stands_per_cluster {
                PlotKind::Harvested
            } else if (j - config.stands_per_cluster).is_multiple_of(2) {
                PlotKind::Young
            } else {
                PlotKind::Unharvested
            };
            let sx = base.0 + (slot % slots) * SLOT_CELLS;
            let sy = base.1 + (slot / slots) * SLOT_CELLS;
            let cols = rng.random_range(MIN_SIDE_CELLS..=MAX_SIDE_CELLS);
            let rows = rng.random_range(MIN_SIDE_CELLS..=MAX_SIDE_CELLS);
            let col0 = rng.random_range(sx + SLOT_PAD_CELLS..=sx + SLOT_CELLS - SLOT_PAD_CELLS - cols);
            let row0 = rng.random_range(sy + SLOT_PAD_CELLS..=sy + SLOT_CELLS - SLOT_PAD_CELLS - rows);
            let mut off = || rng.random_range(1.0..3.0);
            let footprint = BBox {
                min: Point::new(XLL + col0 as f64 * CELL_M - off(), YLL + row0 as f64 * CELL_M - off()),
                max: Point::new(
                    XLL + (col0 + cols) as f64 * CELL_M + off(),
                    YLL + (row0 + rows) as f64 * CELL_M + off(),
                ),
            };
            let mut margin = || rng.random_range(10.0..20.0);
            let segment = BBox {
                min: Point::new(footprint.min.x - margin(), footprint.min.y - margin()),
                max: Point::new(footprint.max.x + margin(), footprint.max.y + margin()),
            };
            let maturity = match kind {
                PlotKind::Young => rng.random_range(-0.6..-0.15),
                _ => rng.random_range(0.0..1.0),
            };
            let spruce_share = match kind {
                PlotKind::Harvested => {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    (config.spruce_pct / 100.0 + 0.08 * z).clamp(super::stems::MIN_STAND_SPRUCE, 1.0)
                }
                _ => rng.random_range(0.3..1.0),
            };
            plots.push(Plot {
                kind,
                cluster: c,
                object_id: (kind == PlotKind::Harvested).then(|| format!("obj-{:02}-{:02}", c + 1, j + 1)),
                segment_id: format!("seg-{:02}-{:02}", c + 1, j + 1),
                col0,
                row0,
                cols,
                rows,
                footprint,
                segment,
                maturity,
                spruce_share,
            });
        }
    }
    (frame, plots)
}
