use super::rings::{assemble_polygons, trace_rings};
use super::{delaunay_triangulate, GeomError, Point, Ring, ShapeSet, Triangulation};

/// Alpha shape with radius parameter `alpha` (metres).
///
/// Delaunay triangles with circumradius ≤ `alpha` are kept; the result is
/// the boundary of their union, one polygon per edge-connected component,
/// with enclosed gaps as holes. As `alpha` grows the shape tends to the
/// convex hull.
pub fn alpha_shape(points: &[Point], alpha: f64) -> Result<ShapeSet, GeomError> {
    let tri = delaunay_triangulate(points)?;
    alpha_shape_from(&tri, alpha)
}

pub fn alpha_shape_from(tri: &Triangulation, alpha: f64) -> Result<ShapeSet, GeomError> {
    let kept: Vec<bool> = tri.circumradii.iter().map(|&r| r <= alpha).collect();
    if !kept.iter().any(|&k| k) {
        return Err(GeomError::EmptyShape);
    }

    // edge-connected components of kept triangles
    let mut component = vec![usize::MAX; tri.len()];
    let mut n_components = 0;
    for seed in 0..tri.len() {
        if !kept[seed] || component[seed] != usize::MAX {
            continue;
        }
        let mut stack = vec![seed];
        component[seed] = n_components;
        while let Some(t) = stack.pop() {
            for nb in tri.neighbors[t].iter().flatten() {
                if kept[*nb] && component[*nb] == usize::MAX {
                    component[*nb] = n_components;
                    stack.push(*nb);
                }
            }
        }
        n_components += 1;
    }

    let mut edges = Vec::new();
    let mut edge_group = Vec::new();
    for t in 0..tri.len() {
        if !kept[t] {
            continue;
        }
        let v = tri.triangles[t];
        for i in 0..3 {
            let border = match tri.neighbors[t][i] {
                Some(nb) => !kept[nb],
                None => true,
            };
            if border {
                edges.push((v[(i + 1) % 3], v[(i + 2) % 3]));
                edge_group.push(component[t]);
            }
        }
    }

    let rings = trace_rings(&edges, &tri.vertices)
        .into_iter()
        .map(|ring| {
            let group = edge_group[ring[0]];
            let pts = ring.iter().map(|&e| tri.vertices[edges[e].0]).collect();
            (Ring::closed(pts), group)
        })
        .collect();
    Ok(ShapeSet {
        polygons: assemble_polygons(rings),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{convex_hull, within_buffer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kept_area(tri: &Triangulation, alpha: f64) -> f64 {
        (0..tri.len())
            .filter(|&t| tri.circumradii[t] <= alpha)
            .map(|t| tri.triangle_area(t))
            .sum()
    }

    #[test]
    fn unit_square_large_alpha_is_hull() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let s = alpha_shape(&pts, 1000.0).unwrap();
        assert_eq!(s.polygons.len(), 1);
        assert!((s.area() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn small_alpha_is_empty() {
        let pts = [Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(0.0, 10.0)];
        assert_eq!(alpha_shape(&pts, 1.0), Err(GeomError::EmptyShape));
    }

    #[test]
    fn collinear_is_degenerate() {
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        assert!(matches!(alpha_shape(&pts, 25.0), Err(GeomError::DegenerateGeometry(_))));
    }

    /// Ring of points with a gap: the concavity must be cut out.
    #[test]
    fn c_shape_is_smaller_than_hull() {
        let mut pts = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1500 {
            let ang: f64 = rng.random_range(0.4..std::f64::consts::TAU - 0.4);
            let r: f64 = rng.random_range(60.0..100.0);
            pts.push(Point::new(r * ang.cos(), r * ang.sin()));
        }
        let hull = convex_hull(&pts).unwrap().area();
        let shape = alpha_shape(&pts, 25.0).unwrap();
        assert!(shape.area() < hull * 0.8, "{} vs {}", shape.area(), hull);
        assert!(!shape.contains(Point::new(0.0, 0.0)));
    }

    #[test]
    fn shape_area_equals_kept_triangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let pts: Vec<Point> = (0..150)
                .map(|_| Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
                .collect();
            let tri = delaunay_triangulate(&pts).unwrap();
            for alpha in [6.0, 10.0, 25.0] {
                let Ok(s) = alpha_shape_from(&tri, alpha) else { continue };
                let want = kept_area(&tri, alpha);
                assert!((s.area() - want).abs() <= 1e-9 * want.max(1.0), "{} vs {want}", s.area());
                for poly in &s.polygons {
                    assert!(poly.exterior.signed_area() > 0.0);
                    assert!(poly.holes.iter().all(|h| h.signed_area() < 0.0));
                }
                // every vertex of a kept triangle is on or inside the shape
                for t in (0..tri.len()).filter(|&t| tri.circumradii[t] <= alpha) {
                    for p in tri.triangle_points(t) {
                        assert!(within_buffer(p, &s, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn enclosed_gap_becomes_hole() {
        // dense square annulus
        let mut pts = Vec::new();
        for i in 0..=40 {
            for j in 0..=40 {
                let (x, y) = (i as f64 * 2.5, j as f64 * 2.5);
                if !(25.0..=75.0).contains(&x) || !(25.0..=75.0).contains(&y) {
                    pts.push(Point::new(x + 0.01 * (j % 3) as f64, y + 0.013 * (i % 5) as f64));
                }
            }
        }
        let s = alpha_shape(&pts, 5.0).unwrap();
        assert_eq!(s.polygons.len(), 1);
        assert_eq!(s.polygons[0].holes.len(), 1);
        assert!(!s.contains(Point::new(50.0, 50.0)));
        assert!(s.contains(Point::new(10.0, 50.0)));
    }
}
