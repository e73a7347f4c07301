//! Aligned raster layers on a regular grid, cell membership and zonal
//! statistics.
//!
//! Row 0 is the northern row. The center of cell `(row, col)` is
//! `(xll + (col + 0.5)·cellsize, yll + (nrows − row − 0.5)·cellsize)`.

mod ascii;
mod manifest;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{BBox, Point};

pub use ascii::{parse_grid, read_grid, write_grid, write_grid_file};
pub use manifest::{LayerSpec, RasterManifest};

/// Header agreement tolerance in metres.
pub const ALIGNMENT_TOLERANCE_M: f64 = 1e-6;
pub const DEFAULT_NODATA: f64 = -9999.0;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("{path}: line {line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("layer {layer} is not aligned: {message}")]
    Alignment { layer: String, message: String },
    #[error("no data in zone{}", layer.as_ref().map(|l| format!(" of layer {l}")).unwrap_or_default())]
    NoData { layer: Option<String> },
    #[error("cell set frame does not match the grid frame")]
    FrameMismatch,
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Continuous,
    Categorical,
}

impl GridKind {
    pub fn name(self) -> &'static str {
        match self {
            GridKind::Continuous => "continuous",
            GridKind::Categorical => "categorical",
        }
    }
}

/// Alignment descriptor shared by every layer of a scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
}

impl GridFrame {
    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Point {
        Point::new(
            self.xll + (col as f64 + 0.5) * self.cellsize,
            self.yll + ((self.nrows - row) as f64 - 0.5) * self.cellsize,
        )
    }

    /// Cell area in hectares.
    pub fn cell_area_ha(&self) -> f64 {
        self.cellsize * self.cellsize / 1e4
    }

    /// Cell containing `p`, if any. Points on a shared edge go to the
    /// eastern / southern cell.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let c = ((p.x - self.xll) / self.cellsize).floor();
        let r_from_bottom = ((p.y - self.yll) / self.cellsize).floor();
        if c < 0.0 || r_from_bottom < 0.0 || c >= self.ncols as f64 || r_from_bottom >= self.nrows as f64 {
            return None;
        }
        Some((self.nrows - 1 - r_from_bottom as usize, c as usize))
    }

    pub fn bbox(&self) -> BBox {
        BBox {
            min: Point::new(self.xll, self.yll),
            max: Point::new(
                self.xll + self.ncols as f64 * self.cellsize,
                self.yll + self.nrows as f64 * self.cellsize,
            ),
        }
    }

    pub fn agrees_with(&self, other: &GridFrame) -> Result<(), String> {
        if self.ncols != other.ncols || self.nrows != other.nrows {
            return Err(format!(
                "size {}x{} differs from {}x{}",
                other.ncols, other.nrows, self.ncols, self.nrows
            ));
        }
        for (name, a, b) in [
            ("xllcorner", self.xll, other.xll),
            ("yllcorner", self.yll, other.yll),
            ("cellsize", self.cellsize, other.cellsize),
        ] {
            if (a - b).abs() > ALIGNMENT_TOLERANCE_M {
                return Err(format!("{name} {b} differs from {a}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub frame: GridFrame,
    pub nodata: f64,
    pub kind: GridKind,
    /// Row-major, row 0 north.
    pub values: Vec<f64>,
}

impl Grid {
    pub fn filled(frame: GridFrame, kind: GridKind, value: f64) -> Grid {
        Grid {
            frame,
            nodata: DEFAULT_NODATA,
            kind,
            values: vec![value; frame.len()],
        }
    }

    pub fn raw(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.frame.ncols + col]
    }

    /// Cell value, `None` for nodata.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.raw(row, col);
        (v != self.nodata && !v.is_nan()).then_some(v)
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.frame.ncols + col] = value;
    }

    pub fn value_at(&self, p: Point) -> Option<f64> {
        let (r, c) = self.frame.cell_of(p)?;
        self.get(r, c)
    }
}

/// Member cells of a zone; indices sorted by (row, col) without duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSet {
    pub frame: GridFrame,
    indices: Vec<(usize, usize)>,
}

impl CellSet {
    pub fn new(frame: GridFrame, mut indices: Vec<(usize, usize)>) -> CellSet {
        indices.retain(|&(r, c)| r < frame.nrows && c < frame.ncols);
        indices.sort_unstable();
        indices.dedup();
        CellSet { frame, indices }
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, cell: (usize, usize)) -> bool {
        self.indices.binary_search(&cell).is_ok()
    }

    pub fn area_ha(&self) -> f64 {
        self.len() as f64 * self.frame.cell_area_ha()
    }

    /// Mean of member cell centers.
    pub fn centroid(&self) -> Option<Point> {
        if self.is_empty() {
            return None;
        }
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(r, c) in &self.indices {
            let p = self.frame.cell_center(r, c);
            sx += p.x;
            sy += p.y;
        }
        let n = self.len() as f64;
        Some(Point::new(sx / n, sy / n))
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        self.indices.iter().map(|&(r, c)| self.frame.cell_center(r, c))
    }
}

/// Shared frame of all layers, or the first disagreement.
pub fn check_alignment<'a>(
    grids: impl IntoIterator<Item = (&'a str, &'a Grid)>,
) -> Result<GridFrame, GridError> {
    let mut frame: Option<GridFrame> = None;
    for (name, grid) in grids {
        match &frame {
            None => frame = Some(grid.frame),
            Some(f) => f.agrees_with(&grid.frame).map_err(|message| GridError::Alignment {
                layer: name.to_string(),
                message,
            })?,
        }
    }
    frame.ok_or_else(|| GridError::Alignment {
        layer: "<none>".into(),
        message: "no layers given".into(),
    })
}

/// All cells whose center satisfies `pred`.
pub fn cells_in_region(frame: &GridFrame, pred: impl Fn(Point) -> bool) -> CellSet {
    cells_in_window(frame, &frame.bbox(), pred)
}

/// Like [`cells_in_region`], visiting only cells whose centers fall in
/// `window`. The caller guarantees `pred` is false outside the window.
pub fn cells_in_window(frame: &GridFrame, window: &BBox, pred: impl Fn(Point) -> bool) -> CellSet {
    let s = frame.cellsize;
    let col_lo = ((window.min.x - frame.xll) / s - 0.5).ceil().max(0.0) as usize;
    let col_hi = ((window.max.x - frame.xll) / s - 0.5).floor();
    let up_lo = ((window.min.y - frame.yll) / s - 0.5).ceil().max(0.0) as usize;
    let up_hi = ((window.max.y - frame.yll) / s - 0.5).floor();
    let mut indices = Vec::new();
    if col_hi < 0.0 || up_hi < 0.0 {
        return CellSet { frame: *frame, indices };
    }
    let col_hi = (col_hi as usize).min(frame.ncols.saturating_sub(1));
    let up_hi = (up_hi as usize).min(frame.nrows.saturating_sub(1));
    for up in (up_lo..=up_hi).rev() {
        let row = frame.nrows - 1 - up;
        for col in col_lo..=col_hi {
            if pred(frame.cell_center(row, col)) {
                indices.push((row, col));
            }
        }
    }
    CellSet { frame: *frame, indices }
}

/// Zonal mean (continuous) or mode (categorical, ties to the smallest
/// code) over the non-nodata member cells.
pub fn zonal_aggregate(grid: &Grid, cells: &CellSet) -> Result<f64, GridError> {
    if grid.frame.agrees_with(&cells.frame).is_err() {
        return Err(GridError::FrameMismatch);
    }
    let values = cells.indices.iter().filter_map(|&(r, c)| grid.get(r, c));
    match grid.kind {
        GridKind::Continuous => {
            let (mut sum, mut n) = (0.0, 0usize);
            for v in values {
                sum += v;
                n += 1;
            }
            if n == 0 {
                return Err(GridError::NoData { layer: None });
            }
            Ok(sum / n as f64)
        }
        GridKind::Categorical => {
            let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
            for v in values {
                *counts.entry(v.round() as i64).or_default() += 1;
            }
            let best = counts.values().copied().max().ok_or(GridError::NoData { layer: None })?;
            let code = counts.iter().find(|(_, &n)| n == best).map(|(&c, _)| c).unwrap();
            Ok(code as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(ncols: usize, nrows: usize) -> GridFrame {
        GridFrame {
            ncols,
            nrows,
            xll: 1000.0,
            yll: 5000.0,
            cellsize: 16.0,
        }
    }

    #[test]
    fn centers_follow_north_up_convention() {
        let f = frame(3, 2);
        assert_eq!(f.cell_center(0, 0), Point::new(1008.0, 5024.0));
        assert_eq!(f.cell_center(1, 2), Point::new(1040.0, 5008.0));
        assert_eq!(f.cell_of(Point::new(1008.0, 5024.0)), Some((0, 0)));
        assert_eq!(f.cell_of(Point::new(1047.9, 5000.1)), Some((1, 2)));
        assert_eq!(f.cell_of(Point::new(999.0, 5010.0)), None);
    }

    #[test]
    fn alignment() {
        let a = Grid::filled(frame(4, 4), GridKind::Continuous, 1.0);
        let mut b = a.clone();
        assert_eq!(check_alignment([("a", &a), ("b", &b)]).unwrap(), a.frame);
        assert_eq!(check_alignment([("a", &a)]).unwrap(), a.frame);
        b.frame.xll += 8.0;
        match check_alignment([("a", &a), ("b", &b)]) {
            Err(GridError::Alignment { layer, .. }) => assert_eq!(layer, "b"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rectangle_covering_four_centers() {
        let f = frame(10, 10);
        // centers at x = 1008 + 16i, y = 5008 + 16j
        let (x0, x1, y0, y1) = (1030.0, 1060.0, 5050.0, 5080.0);
        let cells = cells_in_region(&f, |p| p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1);
        assert_eq!(cells.len(), 4);
        assert_eq!(cells_in_region(&f, |_| false).len(), 0);
        assert_eq!(cells_in_region(&f, |_| true).len(), 100);
    }

    #[test]
    fn window_matches_full_scan() {
        let f = frame(30, 20);
        let pred = |p: Point| (p.x - 1200.0).powi(2) + (p.y - 5150.0).powi(2) < 70.0f64.powi(2);
        let win = BBox {
            min: Point::new(1130.0, 5080.0),
            max: Point::new(1270.0, 5220.0),
        };
        assert_eq!(cells_in_window(&f, &win, pred), cells_in_region(&f, pred));
        let outside = BBox {
            min: Point::new(0.0, 0.0),
            max: Point::new(10.0, 10.0),
        };
        assert!(cells_in_window(&f, &outside, |_| true).is_empty());
    }

    #[test]
    fn zonal_cases() {
        let f = frame(2, 2);
        let mut g = Grid::filled(f, GridKind::Continuous, 0.0);
        g.values = vec![2.0, 4.0, DEFAULT_NODATA, 8.0];
        let top = CellSet::new(f, vec![(0, 0), (0, 1)]);
        assert_eq!(zonal_aggregate(&g, &top).unwrap(), 3.0);
        // nodata excluded
        let left = CellSet::new(f, vec![(0, 0), (1, 0)]);
        assert_eq!(zonal_aggregate(&g, &left).unwrap(), 2.0);
        let only_nd = CellSet::new(f, vec![(1, 0)]);
        assert!(matches!(zonal_aggregate(&g, &only_nd), Err(GridError::NoData { .. })));
        assert!(matches!(zonal_aggregate(&g, &CellSet::new(f, vec![])), Err(GridError::NoData { .. })));

        let mut c = Grid::filled(frame(3, 1), GridKind::Categorical, 0.0);
        c.values = vec![1.0, 1.0, 2.0];
        let all = CellSet::new(c.frame, vec![(0, 0), (0, 1), (0, 2)]);
        assert_eq!(zonal_aggregate(&c, &all).unwrap(), 1.0);
        c.values = vec![2.0, 1.0, DEFAULT_NODATA];
        assert_eq!(zonal_aggregate(&c, &all).unwrap(), 1.0);
    }

    #[test]
    fn four_cell_mean() {
        let f = frame(2, 2);
        let mut h95 = Grid::filled(f, GridKind::Continuous, 0.0);
        h95.values = vec![11.0, 12.0, 13.0, 14.0];
        let cells = cells_in_region(&f, |_| true);
        assert_eq!(zonal_aggregate(&h95, &cells).unwrap(), 12.5);
        assert_eq!(cells.area_ha(), 4.0 * 0.0256);
        assert_eq!(cells.centroid().unwrap(), Point::new(1016.0, 5016.0));
    }

    #[test]
    fn frame_mismatch_rejected() {
        let g = Grid::filled(frame(2, 2), GridKind::Continuous, 1.0);
        let cells = CellSet::new(frame(3, 2), vec![(0, 0)]);
        assert!(matches!(zonal_aggregate(&g, &cells), Err(GridError::FrameMismatch)));
    }

    proptest! {
        #[test]
        fn singleton_mean_is_exact(v in -1e6f64..1e6) {
            let f = frame(1, 1);
            let mut g = Grid::filled(f, GridKind::Continuous, v);
            g.nodata = f64::NAN;
            prop_assert_eq!(zonal_aggregate(&g, &CellSet::new(f, vec![(0, 0)])).unwrap(), v);
        }

        #[test]
        fn mean_ignores_enumeration_order(
            vals in prop::collection::vec(-100.0f64..100.0, 36),
            picks in prop::collection::vec((0usize..6, 0usize..6), 1..30),
        ) {
            let f = frame(6, 6);
            let mut g = Grid::filled(f, GridKind::Continuous, 0.0);
            g.values = vals;
            let fwd = CellSet::new(f, picks.clone());
            let rev = CellSet::new(f, picks.into_iter().rev().collect());
            prop_assert_eq!(
                zonal_aggregate(&g, &fwd).unwrap().to_bits(),
                zonal_aggregate(&g, &rev).unwrap().to_bits()
            );
        }

        #[test]
        fn polygon_membership_matches_brute_force(
            ncols in 1usize..64, nrows in 1usize..64,
            cx in 900.0f64..2100.0, cy in 4900.0f64..6100.0, r in 1.0f64..400.0,
        ) {
            let f = frame(ncols, nrows);
            let ring = crate::geom::Ring::closed(
                (0..7).map(|i| {
                    let a = i as f64 * std::f64::consts::TAU / 7.0;
                    Point::new(cx + r * a.cos(), cy + r * 0.6 * a.sin())
                }).collect(),
            );
            let cells = cells_in_window(&f, &ring.bbox(), |p| crate::geom::point_in_polygon(p, &ring));
            let mut brute = Vec::new();
            for row in 0..nrows {
                for col in 0..ncols {
                    if crate::geom::point_in_polygon(f.cell_center(row, col), &ring) {
                        brute.push((row, col));
                    }
                }
            }
            prop_assert_eq!(cells.indices(), brute.as_slice());
        }
    }
}
