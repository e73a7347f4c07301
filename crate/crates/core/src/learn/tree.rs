use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, VarKind};

/// Flattened tree node; children are indices into the tree's node array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        n: usize,
    },
    /// `x <= threshold` goes left.
    Threshold {
        var: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Listed codes go to their side; any other code follows
    /// `default_left`, the side that held more training rows.
    Categorical {
        var: usize,
        left_codes: Vec<i64>,
        right_codes: Vec<i64>,
        default_left: bool,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Bootstrap sample: sorted training row indices, repeats kept.
    pub bag: Vec<u32>,
}

impl Tree {
    pub fn predict_with(&self, value_of: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Threshold {
                    var,
                    threshold,
                    left,
                    right,
                } => i = if value_of(*var) <= *threshold { *left } else { *right },
                Node::Categorical {
                    var,
                    left_codes,
                    right_codes,
                    default_left,
                    left,
                    right,
                } => {
                    let code = value_of(*var).round() as i64;
                    let go_left = if left_codes.binary_search(&code).is_ok() {
                        true
                    } else if right_codes.binary_search(&code).is_ok() {
                        false
                    } else {
                        *default_left
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.predict_with(|v| row[v])
    }

    pub fn in_bag(&self, row: usize) -> bool {
        self.bag.binary_search(&(row as u32)).is_ok()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

struct Candidate {
    score: f64,
    var: usize,
    rule: Rule,
}

enum Rule {
    Threshold(f64),
    Codes { left: Vec<i64>, right: Vec<i64> },
}

pub(crate) struct TreeBuilder<'a, R: Rng> {
    data: &'a Dataset,
    nodesize: usize,
    mtry: usize,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

impl<'a, R: Rng> TreeBuilder<'a, R> {
    pub(crate) fn new(data: &'a Dataset, nodesize: usize, mtry: usize, rng: &'a mut R) -> Self {
        TreeBuilder {
            data,
            nodesize,
            mtry,
            rng,
            nodes: Vec::new(),
        }
    }

    /// Grow a tree on `bag` (row indices with repeats).
    pub(crate) fn grow(mut self, mut bag: Vec<u32>) -> Tree {
        let mut rows = bag.clone();
        self.split_node(&mut rows);
        bag.sort_unstable();
        Tree { nodes: self.nodes, bag }
    }

    fn leaf(&mut self, rows: &[u32]) -> usize {
        let y = &self.data.response;
        let sum: f64 = rows.iter().map(|&r| y[r as usize]).sum();
        self.nodes.push(Node::Leaf {
            value: sum / rows.len() as f64,
            n: rows.len(),
        });
        self.nodes.len() - 1
    }

    fn split_node(&mut self, rows: &mut [u32]) -> usize {
        let y = &self.data.response;
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            (lo.min(y[r as usize]), hi.max(y[r as usize]))
        });
        if rows.len() < 2 * self.nodesize || lo == hi {
            return self.leaf(rows);
        }
        let Some(best) = self.best_split(rows) else {
            return self.leaf(rows);
        };

        let goes_left = |r: u32| {
            let v = self.data.rows[r as usize][best.var];
            match &best.rule {
                Rule::Threshold(t) => v <= *t,
                Rule::Codes { left, .. } => left.binary_search(&(v.round() as i64)).is_ok(),
            }
        };
        let (mut left, mut right): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&r| goes_left(r));
        let n_left = left.len();
        let n_right = right.len();
        debug_assert!(n_left > 0 && n_right > 0);

        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0, n: 0 });
        let l = self.split_node(&mut left);
        let r = self.split_node(&mut right);
        self.nodes[me] = match best.rule {
            Rule::Threshold(threshold) => Node::Threshold {
                var: best.var,
                threshold,
                left: l,
                right: r,
            },
            Rule::Codes { left, right } => Node::Categorical {
                var: best.var,
                left_codes: left,
                right_codes: right,
                default_left: n_left >= n_right,
                left: l,
                right: r,
            },
        };
        me
    }

    fn draw_vars(&mut self) -> Vec<usize> {
        let p = self.data.n_vars();
        let mut pool: Vec<usize> = (0..p).collect();
        for i in 0..self.mtry {
            let j = self.rng.random_range(i..p);
            pool.swap(i, j);
        }
        pool.truncate(self.mtry);
        pool
    }

    /// Split maximizing `S_l²/n_l + S_r²/n_r`, i.e. minimizing the summed
    /// child squared error.
    fn best_split(&mut self, rows: &[u32]) -> Option<Candidate> {
        let vars = self.draw_vars();
        let mut best: Option<Candidate> = None;
        for var in vars {
            let cand = match self.data.kinds[var] {
                VarKind::Continuous => self.continuous_split(rows, var),
                VarKind::Categorical => self.categorical_split(rows, var),
            };
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.score > b.score) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn continuous_split(&self, rows: &[u32], var: usize) -> Option<Candidate> {
        let x = |r: u32| self.data.rows[r as usize][var];
        let y = &self.data.response;
        let mut sorted: Vec<u32> = rows.to_vec();
        sorted.sort_by(|&a, &b| x(a).total_cmp(&x(b)).then(a.cmp(&b)));
        let total: f64 = sorted.iter().map(|&r| y[r as usize]).sum();
        let n = sorted.len();
        let mut left_sum = 0.0;
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n - 1 {
            left_sum += y[sorted[i] as usize];
            let (a, b) = (x(sorted[i]), x(sorted[i + 1]));
            if a == b {
                continue;
            }
            let nl = (i + 1) as f64;
            let nr = (n - i - 1) as f64;
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / nl + right_sum * right_sum / nr;
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, i));
            }
        }
        best.map(|(score, i)| {
            let (a, b) = (x(sorted[i]), x(sorted[i + 1]));
            let mut t = a + (b - a) / 2.0;
            if t >= b {
                t = a;
            }
            Candidate {
                score,
                var,
                rule: Rule::Threshold(t),
            }
        })
    }

    /// Categories ordered by mean response in the node, then swept as an
    /// ordered variable.
    fn categorical_split(&self, rows: &[u32], var: usize) -> Option<Candidate> {
        let y = &self.data.response;
        let mut groups: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
        for &r in rows {
            let code = self.data.rows[r as usize][var].round() as i64;
            let g = groups.entry(code).or_default();
            g.0 += y[r as usize];
            g.1 += 1;
        }
        if groups.len() < 2 {
            return None;
        }
        let mut order: Vec<(i64, f64, usize)> = groups.into_iter().map(|(c, (s, n))| (c, s, n)).collect();
        order.sort_by(|a, b| (a.1 / a.2 as f64).total_cmp(&(b.1 / b.2 as f64)).then(a.0.cmp(&b.0)));
        let total: f64 = order.iter().map(|g| g.1).sum();
        let n = rows.len();
        let (mut ls, mut ln) = (0.0, 0usize);
        let mut best: Option<(f64, usize)> = None;
        for (k, g) in order.iter().enumerate().take(order.len() - 1) {
            ls += g.1;
            ln += g.2;
            let rs = total - ls;
            let score = ls * ls / ln as f64 + rs * rs / (n - ln) as f64;
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, k));
            }
        }
        best.map(|(score, k)| {
            let mut left: Vec<i64> = order[..=k].iter().map(|g| g.0).collect();
            let mut right: Vec<i64> = order[k + 1..].iter().map(|g| g.0).collect();
            left.sort_unstable();
            right.sort_unstable();
            Candidate {
                score,
                var,
                rule: Rule::Codes { left, right },
            }
        })
    }
}
