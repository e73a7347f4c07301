use std::collections::HashMap;
use std::f64::consts::TAU;

use super::contain::ring_contains;
use super::{Point, Polygon, Ring};

/// Chain directed boundary edges (region on the left) into closed rings,
/// returned as lists of edge indices.
///
/// Where several edges leave a vertex, the walk takes the first one met when
/// turning clockwise from the incoming edge. That keeps each ring simple at
/// pinch vertices, where two parts of a region touch at a single point.
pub(crate) fn trace_rings(edges: &[(usize, usize)], coords: &[Point]) -> Vec<Vec<usize>> {
    let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
    for (e, &(from, _)) in edges.iter().enumerate() {
        outgoing.entry(from).or_default().push(e);
    }
    let mut used = vec![false; edges.len()];
    let mut rings = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut ring = vec![start];
        used[start] = true;
        let mut cur = start;
        loop {
            let (u, v) = edges[cur];
            let (pu, pv) = (coords[u], coords[v]);
            let back = (pu.y - pv.y).atan2(pu.x - pv.x);
            let next = outgoing
                .get(&v)
                .into_iter()
                .flatten()
                .copied()
                .filter(|&e| e == start || !used[e])
                .map(|e| {
                    let w = coords[edges[e].1];
                    let mut cw = back - (w.y - pv.y).atan2(w.x - pv.x);
                    while cw <= 0.0 {
                        cw += TAU;
                    }
                    while cw > TAU {
                        cw -= TAU;
                    }
                    (cw, e)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0));
            match next {
                Some((_, e)) if e != start => {
                    used[e] = true;
                    ring.push(e);
                    cur = e;
                }
                _ => break,
            }
        }
        rings.push(ring);
    }
    rings
}

/// Turn traced rings into polygons: counterclockwise rings become
/// exteriors and each clockwise ring is attached as a hole to the smallest
/// exterior of the same group that contains it.
pub(crate) fn assemble_polygons(rings: Vec<(Ring, usize)>) -> Vec<Polygon> {
    let mut polys: Vec<(Polygon, usize, f64)> = Vec::new();
    let mut holes = Vec::new();
    for (ring, group) in rings {
        let a = ring.signed_area();
        if a > 0.0 {
            polys.push((Polygon::new(ring), group, a));
        } else if a < 0.0 {
            holes.push((ring, group));
        }
    }
    for (hole, group) in holes {
        let (a, b) = (hole.0[0], hole.0[1]);
        let probe = Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
        let pick = |same_group: bool| {
            polys
                .iter()
                .enumerate()
                .filter(|(_, (p, g, _))| (!same_group || *g == group) && ring_contains(&p.exterior, probe))
                .min_by(|x, y| x.1 .2.total_cmp(&y.1 .2))
                .map(|(i, _)| i)
        };
        match pick(true).or_else(|| pick(false)) {
            Some(i) => polys[i].0.holes.push(hole),
            None => log::debug!("dropping hole with no enclosing exterior"),
        }
    }
    polys.into_iter().map(|(p, _, _)| p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Boundary edges of a set of unit squares, region on the left.
    fn square_edges(cells: &[(i32, i32)]) -> (Vec<(usize, usize)>, Vec<Point>) {
        let mut ids: HashMap<(i32, i32), usize> = HashMap::new();
        let mut coords = Vec::new();
        let mut id = |p: (i32, i32)| {
            *ids.entry(p).or_insert_with(|| {
                coords.push(Point::new(p.0 as f64, p.1 as f64));
                coords.len() - 1
            })
        };
        let set: std::collections::HashSet<_> = cells.iter().copied().collect();
        let mut edges = Vec::new();
        for &(x, y) in cells {
            if !set.contains(&(x, y - 1)) {
                edges.push((id((x, y)), id((x + 1, y))));
            }
            if !set.contains(&(x + 1, y)) {
                edges.push((id((x + 1, y)), id((x + 1, y + 1))));
            }
            if !set.contains(&(x, y + 1)) {
                edges.push((id((x + 1, y + 1)), id((x, y + 1))));
            }
            if !set.contains(&(x - 1, y)) {
                edges.push((id((x, y + 1)), id((x, y))));
            }
        }
        (edges, coords)
    }

    fn polygons(cells: &[(i32, i32)]) -> Vec<Polygon> {
        let (edges, coords) = square_edges(cells);
        let rings = trace_rings(&edges, &coords)
            .into_iter()
            .map(|r| {
                let pts = r.iter().map(|&e| coords[edges[e].0]).collect();
                (Ring::closed(pts), 0)
            })
            .collect();
        assemble_polygons(rings)
    }

    #[test]
    fn block_traces_one_ring() {
        let p = polygons(&[(0, 0), (1, 0), (0, 1), (1, 1)]);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].area(), 4.0);
        assert!(p[0].holes.is_empty());
    }

    #[test]
    fn diagonal_pinch_splits_into_two_rings() {
        let p = polygons(&[(0, 0), (1, 1)]);
        assert_eq!(p.len(), 2);
        for poly in &p {
            assert_eq!(poly.area(), 1.0);
            assert_eq!(poly.exterior.0.len(), 5);
        }
    }

    #[test]
    fn annulus_keeps_hole() {
        let cells: Vec<(i32, i32)> = (0..3)
            .flat_map(|x| (0..3).map(move |y| (x, y)))
            .filter(|&c| c != (1, 1))
            .collect();
        let p = polygons(&cells);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].holes.len(), 1);
        assert_eq!(p[0].area(), 8.0);
        assert!(!p[0].contains(Point::new(1.5, 1.5)));
    }
}
