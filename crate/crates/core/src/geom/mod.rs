//! Planar geometry for stand delineation.
//!
//! Coordinates are metres in a projected grid. Rings are closed (first point
//! repeated at the end); exterior rings run counterclockwise and holes
//! clockwise. Points on a boundary count as inside.

mod alpha;
mod contain;
mod delaunay;
pub mod geojson;
mod hull;
mod rings;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alpha::{alpha_shape, alpha_shape_from};
pub use contain::{point_in_polygon, segment_distance, within_buffer, ShapeIndex};
pub use delaunay::{delaunay_triangulate, Triangulation};
pub use hull::convex_hull;
pub(crate) use rings::{assemble_polygons, trace_rings};

/// Points closer than this are merged before triangulation.
pub const DEDUP_TOLERANCE_M: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("no triangle survives the alpha threshold")]
    EmptyShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub(crate) fn coords(self) -> robust::Coord<f64> {
        robust::Coord {
            x: self.x,
            y: self.y,
        }
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// Positive when `a, b, c` turn counterclockwise; exact sign.
pub(crate) fn orient(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(a.coords(), b.coords(), c.coords())
}

/// Closed ring; the first point is repeated at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring(pub Vec<Point>);

impl Ring {
    /// Close an open point sequence.
    pub fn closed(mut pts: Vec<Point>) -> Ring {
        if pts.first() != pts.last() {
            if let Some(&first) = pts.first() {
                pts.push(first);
            }
        }
        Ring(pts)
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    /// Shoelace area, positive for counterclockwise rings.
    pub fn signed_area(&self) -> f64 {
        let pts = &self.0;
        if pts.len() < 4 {
            return 0.0;
        }
        let o = pts[0];
        let mut acc = 0.0;
        for w in pts.windows(2) {
            acc += (w[0].x - o.x) * (w[1].y - o.y) - (w[1].x - o.x) * (w[0].y - o.y);
        }
        acc / 2.0
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn bbox(&self) -> BBox {
        BBox::of(self.0.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn of(points: impl IntoIterator<Item = Point>) -> BBox {
        let mut b = BBox {
            min: Point::new(f64::INFINITY, f64::INFINITY),
            max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        };
        for p in points {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        b
    }

    pub fn union(self, other: BBox) -> BBox {
        BBox {
            min: Point::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: Point::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }

    /// Euclidean distance from `p` to the box; zero inside.
    pub fn distance(&self, p: Point) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.distance(p) == 0.0
    }
}

/// Polygon with optional holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn new(exterior: Ring) -> Polygon {
        Polygon {
            exterior,
            holes: Vec::new(),
        }
    }

    pub fn area(&self) -> f64 {
        self.exterior.signed_area().abs() - self.holes.iter().map(|h| h.signed_area().abs()).sum::<f64>()
    }

    /// Inside the exterior and not strictly inside any hole.
    pub fn contains(&self, p: Point) -> bool {
        contain::ring_contains(&self.exterior, p)
            && !self
                .holes
                .iter()
                .any(|h| contain::ring_contains(h, p) && !contain::on_ring(h, p))
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    pub fn bbox(&self) -> BBox {
        self.exterior.bbox()
    }
}

/// A set of disjoint polygons, such as the components of an alpha shape.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShapeSet {
    pub polygons: Vec<Polygon>,
}

impl ShapeSet {
    pub fn area(&self) -> f64 {
        self.polygons.iter().map(Polygon::area).sum()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.polygons.iter().any(|poly| poly.contains(p))
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn bbox(&self) -> Option<BBox> {
        self.polygons.iter().map(Polygon::bbox).reduce(BBox::union)
    }
}

/// Sort lexicographically and merge points within [`DEDUP_TOLERANCE_M`].
///
/// Returns the distinct points and, for every input point, the index of the
/// distinct point it was merged into.
pub fn dedup_points(points: &[Point]) -> (Vec<Point>, Vec<usize>) {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
    });
    let mut distinct: Vec<Point> = Vec::with_capacity(points.len());
    let mut map = vec![0; points.len()];
    for &i in &order {
        let p = points[i];
        let mut merged = None;
        for (j, q) in distinct.iter().enumerate().rev() {
            if p.x - q.x > DEDUP_TOLERANCE_M {
                break;
            }
            if p.dist(*q) <= DEDUP_TOLERANCE_M {
                merged = Some(j);
                break;
            }
        }
        map[i] = match merged {
            Some(j) => j,
            None => {
                distinct.push(p);
                distinct.len() - 1
            }
        };
    }
    (distinct, map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Ring {
        Ring::closed(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
    }

    #[test]
    fn ring_area_sign() {
        let r = square();
        assert_eq!(r.0.len(), 5);
        assert_eq!(r.signed_area(), 1.0);
        let mut rev = r.0.clone();
        rev.reverse();
        assert_eq!(Ring(rev).signed_area(), -1.0);
    }

    #[test]
    fn polygon_with_hole() {
        let hole = Ring::closed(vec![
            Point::new(0.25, 0.25),
            Point::new(0.25, 0.75),
            Point::new(0.75, 0.75),
            Point::new(0.75, 0.25),
        ]);
        let poly = Polygon {
            exterior: square(),
            holes: vec![hole],
        };
        assert_eq!(poly.area(), 0.75);
        assert!(!poly.contains(Point::new(0.5, 0.5)));
        assert!(poly.contains(Point::new(0.25, 0.5)));
        assert!(poly.contains(Point::new(0.1, 0.5)));
    }

    #[test]
    fn dedup_merges_within_tolerance() {
        let pts = [
            Point::new(1.0, 1.0),
            Point::new(0.0, 0.0),
            Point::new(1.0 + 1e-12, 1.0),
            Point::new(1.0, 1.0 + 1e-6),
        ];
        let (d, map) = dedup_points(&pts);
        assert_eq!(d.len(), 3);
        assert_eq!(map[0], map[2]);
        assert_ne!(map[0], map[3]);
        assert_eq!(d[map[1]], Point::new(0.0, 0.0));
    }
}
