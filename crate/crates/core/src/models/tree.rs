//! CART regression trees with variance-reduction splits.
//!
//! Splits send `x[feature] <= threshold` left. The threshold is the largest
//! training value on the left side, so a fitted tree only ever compares
//! query values against values it has seen, and refitting after a strictly
//! monotone transform of a feature yields the transformed thresholds.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split. `None` examines all of them.
    pub max_features: Option<usize>,
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    order: Vec<(f64, f64)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let value = rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn best_split(&mut self, rows: &[usize], features: &[usize]) -> Option<BestSplit> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let total: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<BestSplit> = None;
        for &f in features {
            self.order.clear();
            self.order.extend(rows.iter().map(|&r| (self.x[[r, f]], self.y[r])));
            self.order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = 0.0;
            for i in 0..n - 1 {
                left += self.order[i].1;
                let (xi, xn) = (self.order[i].0, self.order[i + 1].0);
                if xi == xn || i + 1 < min_leaf || n - i - 1 < min_leaf {
                    continue;
                }
                let nl = (i + 1) as f64;
                let right = total - left;
                let gain = left * left / nl + right * right / (n as f64 - nl) - parent;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: xi,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, rows: &mut [usize], depth: usize, rng: &mut Option<&mut Rng>) -> usize {
        let n = rows.len();
        let first = self.y[rows[0]];
        let pure = rows.iter().all(|&r| self.y[r] == first);
        if depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf.max(1) || pure {
            return self.leaf(rows);
        }
        let p = self.x.ncols();
        let mut features: Vec<usize> = match (self.params.max_features, rng.as_deref_mut()) {
            (Some(m), Some(r)) if m < p => index::sample(r, p, m).into_vec(),
            _ => (0..p).collect(),
        };
        features.sort_unstable();
        let Some(split) = self.best_split(rows, &features) else {
            return self.leaf(rows);
        };
        let (f, t) = (split.feature, split.threshold);
        let mid = partition(rows, |&r| self.x[[r, f]] <= t);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: f64::NAN });
        let (l, r) = rows.split_at_mut(mid);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: f,
            threshold: t,
            left,
            right,
        };
        id
    }
}

/// Stable in-place partition; returns the count of rows satisfying `pred`.
fn partition(rows: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let (a, b): (Vec<usize>, Vec<usize>) = rows.iter().partition(|r| pred(r));
    let mid = a.len();
    rows[..mid].copy_from_slice(&a);
    rows[mid..].copy_from_slice(&b);
    mid
}

impl RegressionTree {
    /// Fits on `rows` of `x` (repeats allowed, as in a bootstrap sample).
    pub fn fit(x: ArrayView2<f64>, y: &[f64], rows: &[usize], params: TreeParams, rng: Option<&mut Rng>) -> Self {
        assert!(!rows.is_empty(), "tree needs at least one row");
        let mut b = Builder {
            x,
            y,
            params,
            nodes: Vec::new(),
            order: Vec::with_capacity(rows.len()),
        };
        let mut rows = rows.to_vec();
        let mut rng = rng;
        b.build(&mut rows, 0, &mut rng);
        RegressionTree { nodes: b.nodes }
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Structural sanity: children in range and after their parent.
    pub fn is_well_formed(&self, n_features: usize) -> bool {
        !self.nodes.is_empty()
            && self.nodes.iter().enumerate().all(|(i, n)| match *n {
                Node::Leaf { value } => value.is_finite(),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    feature < n_features
                        && threshold.is_finite()
                        && left > i
                        && right > i
                        && left < self.nodes.len()
                        && right < self.nodes.len()
                }
            })
    }
}
