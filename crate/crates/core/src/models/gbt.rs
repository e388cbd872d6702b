//! Least-squares gradient boosting on shallow regression trees.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    pub base: f64,
    pub learning_rate: f64,
    pub stages: Vec<RegressionTree>,
}

impl Boosted {
    pub fn fit(x: ArrayView2<f64>, y: &[f64], rows: &[usize], n_stages: usize, max_depth: usize, learning_rate: f64) -> Self {
        let base = rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64;
        let params = TreeParams {
            max_depth,
            min_samples_leaf: 1,
            max_features: None,
        };
        let mut current = vec![base; y.len()];
        let mut residual = vec![0.0; y.len()];
        let mut stages = Vec::with_capacity(n_stages);
        for _ in 0..n_stages {
            for &r in rows {
                residual[r] = y[r] - current[r];
            }
            let tree = RegressionTree::fit(x, &residual, rows, params, None);
            for &r in rows {
                current[r] += learning_rate * tree.predict_row(x.row(r));
            }
            stages.push(tree);
        }
        Boosted {
            base,
            learning_rate,
            stages,
        }
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        self.stages
            .iter()
            .fold(self.base, |acc, t| acc + self.learning_rate * t.predict_row(x))
    }
}
