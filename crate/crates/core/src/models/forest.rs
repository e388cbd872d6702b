//! Bootstrap-aggregated regression trees.

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeParams};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    /// Fits `n_trees` trees, each on a bootstrap resample of `rows`.
    ///
    /// Tree `i` draws from its own stream `rng::child(seed, i)`.
    pub fn fit(x: ArrayView2<f64>, y: &[f64], rows: &[usize], n_trees: usize, params: TreeParams, seed: u64) -> Self {
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::child(seed, i as u64);
                let sample: Vec<usize> = (0..rows.len()).map(|_| rows[r.random_range(0..rows.len())]).collect();
                RegressionTree::fit(x, y, &sample, params, Some(&mut r))
            })
            .collect();
        Forest { trees }
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(x)).sum();
        sum / self.trees.len() as f64
    }
}
