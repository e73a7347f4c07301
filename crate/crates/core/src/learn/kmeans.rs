use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::geom::Point;
use crate::seeds;

pub const DEFAULT_MIN_CLUSTER: usize = 5;
const MAX_ITER: usize = 100;

/// Default cluster count: about 11 stands per cluster, at least 2.
pub fn default_k(n: usize) -> usize {
    ((n as f64 / 11.0).round() as usize).max(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Surviving clusters.
    pub k: usize,
    pub requested_k: usize,
    pub min_size: usize,
    pub centroids: Vec<Point>,
    /// Cluster of each input point.
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub sse_history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    pub fn sse(&self, points: &[Point]) -> f64 {
        sse(points, &self.centroids, &self.labels)
    }
}

fn d2(a: Point, b: Point) -> f64 {
    (a.x - b.x).powi(2) + (a.y - b.y).powi(2)
}

fn nearest(p: Point, centroids: &[Point]) -> usize {
    let mut best = 0;
    for (j, c) in centroids.iter().enumerate().skip(1) {
        if d2(p, *c) < d2(p, centroids[best]) {
            best = j;
        }
    }
    best
}

fn sse(points: &[Point], centroids: &[Point], labels: &[usize]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| d2(*p, centroids[l])).sum()
}

fn means(points: &[Point], labels: &[usize], old: &[Point]) -> Vec<Point> {
    let k = old.len();
    let mut sum = vec![(0.0, 0.0, 0usize); k];
    for (p, &l) in points.iter().zip(labels) {
        sum[l].0 += p.x;
        sum[l].1 += p.y;
        sum[l].2 += 1;
    }
    sum.iter()
        .zip(old)
        .map(|(&(x, y, n), &o)| if n == 0 { o } else { Point::new(x / n as f64, y / n as f64) })
        .collect()
}

fn plus_plus_init(points: &[Point], k: usize, rng: &mut impl Rng) -> Vec<Point> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut dist: Vec<f64> = points.iter().map(|p| d2(*p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick];
        centroids.push(c);
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(d2(*p, c));
        }
    }
    centroids
}

/// k-means++ seeding, Lloyd iterations, then dissolution of clusters
/// smaller than `min_size` into the nearest surviving centroid.
pub fn kmeans_cluster(points: &[Point], k: usize, min_size: usize, seed: u64) -> Result<ClusterAssignment, LearnError> {
    let n = points.len();
    if n < min_size.max(1) {
        return Err(LearnError::Cluster(format!("{n} points, fewer than the minimum cluster size {min_size}")));
    }
    if k == 0 || k > n {
        return Err(LearnError::Cluster(format!("k = {k} outside 1..={n}")));
    }
    let mut rng = seeds::stream(seed, "kmeans", 0);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(*p, &centroids)).collect();
    let mut sse_history = Vec::new();
    for _ in 0..MAX_ITER {
        centroids = means(points, &labels, &centroids);
        sse_history.push(sse(points, &centroids, &labels));
        let next: Vec<usize> = points.iter().map(|p| nearest(*p, &centroids)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }

    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }
    let mut survivors: Vec<usize> = (0..k).filter(|&c| sizes[c] >= min_size).collect();
    if survivors.is_empty() {
        let largest = (0..k).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))).unwrap();
        survivors.push(largest);
    }
    if survivors.len() < k {
        let kept: Vec<Point> = survivors.iter().map(|&c| centroids[c]).collect();
        let relabel: Vec<Option<usize>> = (0..k).map(|c| survivors.iter().position(|&s| s == c)).collect();
        for (l, p) in labels.iter_mut().zip(points) {
            *l = relabel[*l].unwrap_or_else(|| nearest(*p, &kept));
        }
        centroids = means(points, &labels, &kept);
    }
    Ok(ClusterAssignment {
        k: centroids.len(),
        requested_k: k,
        min_size,
        centroids,
        labels,
        sse_history,
    })
}
