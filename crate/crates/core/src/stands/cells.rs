use std::collections::HashMap;

use crate::geom::{assemble_polygons, trace_rings, Point, Ring, ShapeSet};
use crate::grid::CellSet;

/// Outline of the union of member cells; holes where cells are missing.
pub fn cells_to_shape(cells: &CellSet) -> ShapeSet {
    let f = &cells.frame;
    let mut corner_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut coords: Vec<Point> = Vec::new();
    let mut corner = |col: usize, up: usize| {
        *corner_ids.entry((col, up)).or_insert_with(|| {
            coords.push(Point::new(f.xll + col as f64 * f.cellsize, f.yll + up as f64 * f.cellsize));
            coords.len() - 1
        })
    };
    let member = |row: isize, col: isize| {
        row >= 0 && col >= 0 && cells.contains((row as usize, col as usize))
    };
    let mut edges = Vec::new();
    for &(row, col) in cells.indices() {
        let up = f.nrows - 1 - row;
        let (r, c) = (row as isize, col as isize);
        // south, east, north, west; row index grows southwards
        if !member(r + 1, c) {
            edges.push((corner(col, up), corner(col + 1, up)));
        }
        if !member(r, c + 1) {
            edges.push((corner(col + 1, up), corner(col + 1, up + 1)));
        }
        if !member(r - 1, c) {
            edges.push((corner(col + 1, up + 1), corner(col, up + 1)));
        }
        if !member(r, c - 1) {
            edges.push((corner(col, up + 1), corner(col, up)));
        }
    }
    let rings = trace_rings(&edges, &coords)
        .into_iter()
        .map(|ring| {
            let pts = simplify(ring.iter().map(|&e| coords[edges[e].0]).collect());
            (Ring::closed(pts), 0)
        })
        .collect();
    ShapeSet {
        polygons: assemble_polygons(rings),
    }
}

/// Drop vertices in the middle of straight runs.
fn simplify(pts: Vec<Point>) -> Vec<Point> {
    let n = pts.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b, c) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
        let collinear = (b.x - a.x) * (c.y - b.y) == (b.y - a.y) * (c.x - b.x);
        if !collinear {
            out.push(b);
        }
    }
    out
}
