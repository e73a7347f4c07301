use super::{dedup_points, orient, GeomError, Point, Polygon, Ring, ShapeSet};

/// Convex hull by the monotone-chain method. Collinear boundary points are
/// dropped so the ring has only strict corners.
pub fn convex_hull(points: &[Point]) -> Result<ShapeSet, GeomError> {
    let (pts, _) = dedup_points(points);
    if pts.len() < 3 {
        return Err(GeomError::DegenerateGeometry(format!(
            "{} distinct points, need at least 3",
            pts.len()
        )));
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && orient(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && orient(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(GeomError::DegenerateGeometry("all points are collinear".into()));
    }
    Ok(ShapeSet {
        polygons: vec![Polygon::new(Ring::closed(lower))],
    })
}
