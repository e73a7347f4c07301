use super::{orient, BBox, Point, Polygon, Ring, ShapeSet};

/// True if `p` lies on a segment of the ring (exact orientation test).
pub(crate) fn on_ring(ring: &Ring, p: Point) -> bool {
    ring.edges().any(|(a, b)| on_segment(a, b, p))
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
        && orient(a, b, p) == 0.0
}

/// Even–odd ray casting with boundary points counted inside.
pub(crate) fn ring_contains(ring: &Ring, p: Point) -> bool {
    if on_ring(ring, p) {
        return true;
    }
    let mut inside = false;
    for (a, b) in ring.edges() {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Point-in-ring test; points on the boundary count as inside.
pub fn point_in_polygon(p: Point, ring: &Ring) -> bool {
    ring_contains(ring, p)
}

/// Distance from `p` to the segment `a`–`b`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

fn distance_to_boundary(poly: &Polygon, p: Point) -> f64 {
    poly.rings()
        .flat_map(|r| r.edges())
        .map(|(a, b)| segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// True if `p` is inside some polygon of `shape` or within `buffer` metres
/// of a polygon boundary (holes included).
pub fn within_buffer(p: Point, shape: &ShapeSet, buffer: f64) -> bool {
    shape.polygons.iter().any(|poly| {
        poly.bbox().distance(p) <= buffer
            && (poly.contains(p) || distance_to_boundary(poly, p) <= buffer)
    })
}

/// Bucketed edge index for repeated buffered-containment queries against
/// one shape. Answers exactly as [`within_buffer`].
#[derive(Debug, Clone)]
pub struct ShapeIndex {
    shape: ShapeSet,
    bbox: BBox,
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<(Point, Point)>>,
}

impl ShapeIndex {
    pub fn new(shape: ShapeSet, cell: f64) -> ShapeIndex {
        assert!(cell > 0.0);
        let bbox = shape
            .polygons
            .iter()
            .map(Polygon::bbox)
            .reduce(BBox::union)
            .unwrap_or(BBox::of([Point::default()]));
        let cols = (((bbox.max.x - bbox.min.x) / cell).floor() as usize + 1).min(4096);
        let rows = (((bbox.max.y - bbox.min.y) / cell).floor() as usize + 1).min(4096);
        let mut idx = ShapeIndex {
            bbox,
            cell,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
            shape: ShapeSet::default(),
        };
        for poly in &shape.polygons {
            for (a, b) in poly.rings().flat_map(|r| r.edges()) {
                let (c0, r0) = idx.bucket_of(Point::new(a.x.min(b.x), a.y.min(b.y)));
                let (c1, r1) = idx.bucket_of(Point::new(a.x.max(b.x), a.y.max(b.y)));
                for r in r0..=r1 {
                    for c in c0..=c1 {
                        idx.buckets[r * cols + c].push((a, b));
                    }
                }
            }
        }
        idx.shape = shape;
        idx
    }

    fn bucket_of(&self, p: Point) -> (usize, usize) {
        let c = ((p.x - self.bbox.min.x) / self.cell).floor().max(0.0) as usize;
        let r = ((p.y - self.bbox.min.y) / self.cell).floor().max(0.0) as usize;
        (c.min(self.cols - 1), r.min(self.rows - 1))
    }

    pub fn shape(&self) -> &ShapeSet {
        &self.shape
    }

    pub fn within_buffer(&self, p: Point, buffer: f64) -> bool {
        if self.shape.is_empty() || self.bbox.distance(p) > buffer {
            return false;
        }
        if self.shape.contains(p) {
            return true;
        }
        let lo = self.bucket_of(Point::new(p.x - buffer, p.y - buffer));
        let hi = self.bucket_of(Point::new(p.x + buffer, p.y + buffer));
        for r in lo.1..=hi.1 {
            for c in lo.0..=hi.0 {
                if self.buckets[r * self.cols + c]
                    .iter()
                    .any(|&(a, b)| segment_distance(p, a, b) <= buffer)
                {
                    return true;
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Ring {
        Ring::closed(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
    }

    fn shape() -> ShapeSet {
        ShapeSet {
            polygons: vec![Polygon::new(unit_square())],
        }
    }

    #[test]
    fn point_in_polygon_cases() {
        let sq = unit_square();
        assert!(point_in_polygon(Point::new(0.5, 0.5), &sq));
        assert!(!point_in_polygon(Point::new(2.0, 2.0), &sq));
        assert!(point_in_polygon(Point::new(1.0, 0.5), &sq));
        assert!(point_in_polygon(Point::new(0.0, 0.0), &sq));
        assert!(!point_in_polygon(Point::new(1.0 + 1e-12, 0.5), &sq));
    }

    #[test]
    fn buffer_cases() {
        let s = shape();
        assert!(within_buffer(Point::new(2.5, 0.5), &s, 2.0));
        assert!(!within_buffer(Point::new(3.5, 0.5), &s, 2.0));
        assert!(within_buffer(Point::new(0.5, 0.5), &s, 0.0));
        assert!(within_buffer(Point::new(3.0, 0.5), &s, 2.0));
        // corner distance is euclidean
        assert!(!within_buffer(Point::new(2.5, 2.5), &s, 2.0));
    }

    #[test]
    fn index_matches_linear_scan() {
        let ring = Ring::closed(vec![
            Point::new(0.0, 0.0),
            Point::new(40.0, 0.0),
            Point::new(40.0, 10.0),
            Point::new(10.0, 10.0),
            Point::new(10.0, 30.0),
            Point::new(0.0, 30.0),
        ]);
        let s = ShapeSet {
            polygons: vec![Polygon::new(ring)],
        };
        let idx = ShapeIndex::new(s.clone(), 7.0);
        for i in -20..70 {
            for j in -20..50 {
                let p = Point::new(i as f64 * 0.77, j as f64 * 0.83);
                for buf in [0.0, 2.0, 5.5] {
                    assert_eq!(idx.within_buffer(p, buf), within_buffer(p, &s, buf), "{p:?} {buf}");
                }
            }
        }
    }
}
