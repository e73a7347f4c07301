//! Incremental Bowyer–Watson Delaunay triangulation.
//!
//! The convex hull is closed off with "ghost" triangles that share a
//! vertex at infinity, so no bounding super-triangle is needed and hull
//! triangles are never lost. Points are inserted in lexicographic order,
//! which makes every insertion land on or outside the current hull and keeps
//! point location to a short walk from the previous insertion. Cocircular
//! configurations resolve by that fixed insertion order.

use super::{dedup_points, orient, GeomError, Point};

const GHOST: usize = usize::MAX;
const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct Triangulation {
    /// Distinct input points, sorted lexicographically.
    pub vertices: Vec<Point>,
    /// For each input point, the index of its vertex.
    pub index_map: Vec<usize>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// `neighbors[t][i]` is the triangle across the edge opposite vertex `i`,
    /// or `None` on the convex hull.
    pub neighbors: Vec<[Option<usize>; 3]>,
    pub circumcenters: Vec<Point>,
    pub circumradii: Vec<f64>,
}

impl Triangulation {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)) / 2.0
    }
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [usize; 3],
    n: [usize; 3],
}

impl Tri {
    fn is_ghost(&self) -> bool {
        self.v[2] == GHOST
    }
}

struct Builder<'a> {
    pts: &'a [Point],
    tris: Vec<Tri>,
    alive: Vec<bool>,
    free: Vec<usize>,
    stamp: Vec<u32>,
    epoch: u32,
    last: usize,
}

impl<'a> Builder<'a> {
    fn new(pts: &'a [Point]) -> Self {
        Builder {
            pts,
            tris: Vec::with_capacity(pts.len() * 2 + 8),
            alive: Vec::new(),
            free: Vec::new(),
            stamp: Vec::new(),
            epoch: 0,
            last: 0,
        }
    }

    fn alloc(&mut self, v: [usize; 3]) -> usize {
        // keep the ghost vertex in the last slot
        let v = if v[0] == GHOST {
            [v[1], v[2], v[0]]
        } else if v[1] == GHOST {
            [v[2], v[0], v[1]]
        } else {
            v
        };
        let tri = Tri { v, n: [NONE; 3] };
        if let Some(i) = self.free.pop() {
            self.tris[i] = tri;
            self.alive[i] = true;
            i
        } else {
            self.tris.push(tri);
            self.alive.push(true);
            self.stamp.push(0);
            self.tris.len() - 1
        }
    }

    /// Point the edge `{a, b}` of triangle `t` at neighbor `nb`.
    fn link(&mut self, t: usize, a: usize, b: usize, nb: usize) {
        let v = self.tris[t].v;
        for i in 0..3 {
            let (p, q) = (v[(i + 1) % 3], v[(i + 2) % 3]);
            if (p == a && q == b) || (p == b && q == a) {
                self.tris[t].n[i] = nb;
                return;
            }
        }
        unreachable!("edge not in triangle");
    }

    fn in_conflict(&self, t: usize, p: Point) -> bool {
        let tri = &self.tris[t];
        let a = self.pts[tri.v[0]];
        let b = self.pts[tri.v[1]];
        if tri.is_ghost() {
            // Outside the hull edge a->b, or strictly inside the segment.
            let o = orient(a, b, p);
            if o > 0.0 {
                return true;
            }
            if o < 0.0 {
                return false;
            }
            let ab = (b.x - a.x, b.y - a.y);
            let t0 = (p.x - a.x) * ab.0 + (p.y - a.y) * ab.1;
            let t1 = (p.x - b.x) * -ab.0 + (p.y - b.y) * -ab.1;
            return t0 > 0.0 && t1 > 0.0;
        }
        let c = self.pts[tri.v[2]];
        robust::incircle(a.coords(), b.coords(), c.coords(), p.coords()) > 0.0
    }

    fn init(&mut self, a: usize, b: usize, c: usize) {
        let t = self.alloc([a, b, c]);
        let g_ab = self.alloc([b, a, GHOST]);
        let g_bc = self.alloc([c, b, GHOST]);
        let g_ca = self.alloc([a, c, GHOST]);
        self.link(t, a, b, g_ab);
        self.link(t, b, c, g_bc);
        self.link(t, c, a, g_ca);
        self.link(g_ab, b, a, t);
        self.link(g_bc, c, b, t);
        self.link(g_ca, a, c, t);
        self.link(g_ab, a, GHOST, g_ca);
        self.link(g_ca, a, GHOST, g_ab);
        self.link(g_ab, b, GHOST, g_bc);
        self.link(g_bc, b, GHOST, g_ab);
        self.link(g_bc, c, GHOST, g_ca);
        self.link(g_ca, c, GHOST, g_bc);
        self.last = t;
    }

    /// Find one triangle in conflict with `p` by walking from the last
    /// insertion.
    fn locate(&self, p: Point) -> usize {
        let mut t = self.last;
        if !self.alive[t] {
            t = self.alive.iter().position(|&a| a).expect("live triangle");
        }
        let budget = 4 * self.tris.len() + 16;
        for step in 0..budget {
            let tri = self.tris[t];
            if tri.is_ghost() {
                if self.in_conflict(t, p) {
                    return t;
                }
                t = tri.n[2];
                continue;
            }
            let mut moved = false;
            for k in 0..3 {
                // rotate the starting edge so the walk cannot cycle
                let i = (k + step) % 3;
                let a = self.pts[tri.v[(i + 1) % 3]];
                let b = self.pts[tri.v[(i + 2) % 3]];
                if orient(a, b, p) < 0.0 {
                    t = tri.n[i];
                    moved = true;
                    break;
                }
            }
            if !moved {
                return t;
            }
        }
        (0..self.tris.len())
            .find(|&t| self.alive[t] && self.in_conflict(t, p))
            .expect("some triangle conflicts with a new point")
    }

    fn insert(&mut self, vi: usize) {
        let p = self.pts[vi];
        let start = self.locate(p);
        self.epoch += 1;
        let inside = self.epoch;
        let mut cavity = vec![start];
        self.stamp[start] = inside;
        let mut i = 0;
        while i < cavity.len() {
            let t = cavity[i];
            i += 1;
            for k in 0..3 {
                let nb = self.tris[t].n[k];
                if self.stamp[nb] != inside && self.in_conflict(nb, p) {
                    self.stamp[nb] = inside;
                    cavity.push(nb);
                }
            }
        }

        // Boundary edges (u, v) in the cavity triangle's ccw order.
        let mut boundary: Vec<(usize, usize, usize)> = Vec::new();
        for &t in &cavity {
            let tri = self.tris[t];
            for k in 0..3 {
                let nb = tri.n[k];
                if self.stamp[nb] != inside {
                    boundary.push((tri.v[(k + 1) % 3], tri.v[(k + 2) % 3], nb));
                }
            }
        }
        for &t in &cavity {
            self.alive[t] = false;
            self.free.push(t);
        }

        let mut created: Vec<(usize, usize, usize)> = Vec::with_capacity(boundary.len());
        for &(u, v, outside) in &boundary {
            let t = self.alloc([u, v, vi]);
            self.link(t, u, v, outside);
            self.link(outside, u, v, t);
            created.push((u, v, t));
        }
        for &(u, v, t) in &created {
            // across (v, p): the new triangle whose boundary edge starts at v
            let next = created.iter().find(|c| c.0 == v).expect("closed cavity").2;
            self.link(t, v, vi, next);
            let prev = created.iter().find(|c| c.1 == u).expect("closed cavity").2;
            self.link(t, u, vi, prev);
        }
        self.last = created
            .iter()
            .map(|c| c.2)
            .find(|&t| !self.tris[t].is_ghost())
            .unwrap_or(created[0].2);
    }
}

fn circumcircle(a: Point, b: Point, c: Point) -> (Point, f64) {
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let (cx, cy) = (c.x - a.x, c.y - a.y);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    (Point::new(a.x + ux, a.y + uy), ux.hypot(uy))
}

/// Delaunay triangulation of a point set. Duplicates are merged first.
pub fn delaunay_triangulate(points: &[Point]) -> Result<Triangulation, GeomError> {
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(GeomError::DegenerateGeometry("non-finite coordinate".into()));
    }
    let (pts, index_map) = dedup_points(points);
    if pts.len() < 3 {
        return Err(GeomError::DegenerateGeometry(format!(
            "{} distinct points, need at least 3",
            pts.len()
        )));
    }
    let third = (2..pts.len())
        .find(|&k| orient(pts[0], pts[1], pts[k]) != 0.0)
        .ok_or_else(|| GeomError::DegenerateGeometry("all points are collinear".into()))?;

    let mut b = Builder::new(&pts);
    if orient(pts[0], pts[1], pts[third]) > 0.0 {
        b.init(0, 1, third);
    } else {
        b.init(0, third, 1);
    }
    for vi in 2..pts.len() {
        if vi != third {
            b.insert(vi);
        }
    }

    let mut remap = vec![NONE; b.tris.len()];
    let mut triangles = Vec::new();
    for (t, tri) in b.tris.iter().enumerate() {
        if b.alive[t] && !tri.is_ghost() {
            remap[t] = triangles.len();
            triangles.push(tri.v);
        }
    }
    let neighbors = b
        .tris
        .iter()
        .enumerate()
        .filter(|(t, tri)| b.alive[*t] && !tri.is_ghost())
        .map(|(_, tri)| tri.n.map(|nb| (remap[nb] != NONE).then_some(remap[nb])))
        .collect();
    let (circumcenters, circumradii) = triangles
        .iter()
        .map(|v| circumcircle(pts[v[0]], pts[v[1]], pts[v[2]]))
        .unzip();

    Ok(Triangulation {
        vertices: pts,
        index_map,
        triangles,
        neighbors,
        circumcenters,
        circumradii,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(T·N) check: no vertex strictly inside any circumcircle.
    fn brute_force_delaunay(t: &Triangulation) -> bool {
        t.triangles.iter().all(|tri| {
            let [a, b, c] = tri.map(|v| t.vertices[v].coords());
            t.vertices.iter().enumerate().all(|(i, p)| {
                tri.contains(&i) || robust::incircle(a, b, c, p.coords()) <= 0.0
            })
        })
    }

    fn hull_area(points: &[Point]) -> f64 {
        super::super::convex_hull(points).unwrap().area()
    }

    #[test]
    fn unit_square() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let t = delaunay_triangulate(&pts).unwrap();
        assert_eq!(t.len(), 2);
        let area: f64 = (0..t.len()).map(|i| t.triangle_area(i)).sum();
        assert_eq!(area, 1.0);
        assert!(brute_force_delaunay(&t));
    }

    #[test]
    fn three_points() {
        let pts = [Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(0.0, 2.0)];
        let t = delaunay_triangulate(&pts).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.triangle_area(0) > 0.0);
        assert_eq!(t.neighbors[0], [None, None, None]);
        let (c, r) = (t.circumcenters[0], t.circumradii[0]);
        assert!((c.x - 1.0).abs() < 1e-12 && (c.y - 1.0).abs() < 1e-12);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let two = [Point::new(0.0, 0.0), Point::new(1.0, 0.0)];
        assert!(matches!(delaunay_triangulate(&two), Err(GeomError::DegenerateGeometry(_))));
        let line: Vec<Point> = (0..5).map(|i| Point::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(delaunay_triangulate(&line), Err(GeomError::DegenerateGeometry(_))));
        let dup = [Point::new(0.0, 0.0), Point::new(0.0, 0.0), Point::new(1.0, 1.0)];
        assert!(matches!(delaunay_triangulate(&dup), Err(GeomError::DegenerateGeometry(_))));
    }

    #[test]
    fn random_sets_are_delaunay_and_cover_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3usize, 4, 10, 57, 100, 300] {
            let pts: Vec<Point> = (0..n)
                .map(|_| Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
                .collect();
            let t = delaunay_triangulate(&pts).unwrap();
            assert!(brute_force_delaunay(&t), "n = {n}");
            for i in 0..t.len() {
                assert!(t.triangle_area(i) > 0.0);
            }
            let area: f64 = (0..t.len()).map(|i| t.triangle_area(i)).sum();
            let hull = hull_area(&pts);
            assert!((area - hull).abs() <= 1e-9 * hull, "n = {n}: {area} vs {hull}");
        }
    }

    #[test]
    fn lattice_with_collinear_and_cocircular_points() {
        let mut pts = Vec::new();
        for i in 0..12 {
            for j in 0..9 {
                pts.push(Point::new(i as f64 * 16.0, j as f64 * 16.0));
            }
        }
        let t = delaunay_triangulate(&pts).unwrap();
        assert!(brute_force_delaunay(&t));
        // Euler: T = 2n - 2 - h with every boundary point on the hull
        let h = 2 * (12 + 9) - 4;
        assert_eq!(t.len(), 2 * pts.len() - 2 - h);
        let area: f64 = (0..t.len()).map(|i| t.triangle_area(i)).sum();
        assert_eq!(area, 176.0 * 128.0);
    }

    #[test]
    fn neighbors_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point> = (0..200)
            .map(|_| Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
            .collect();
        let t = delaunay_triangulate(&pts).unwrap();
        let mut hull_edges = 0;
        for (a, nbs) in t.neighbors.iter().enumerate() {
            for nb in nbs {
                match nb {
                    Some(b) => assert!(t.neighbors[*b].contains(&Some(a))),
                    None => hull_edges += 1,
                }
            }
        }
        assert_eq!(t.len(), 2 * t.vertices.len() - 2 - hull_edges);
    }
}
