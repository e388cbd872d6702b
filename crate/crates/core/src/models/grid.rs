//! Exhaustive cross-validated hyperparameter search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::RegressorSpec;
use crate::dataset::Table;
use crate::error::{Error, Result};
use crate::eval;

/// Ordered hyperparameter grid. Points enumerate with the last key varying
/// fastest.
/// Largest accepted grid.
pub const MAX_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axes: Vec<(String, Vec<Value>)>,
}

impl Grid {
    /// Parses `{"key": [v1, v2, ...], ...}`, keeping key order.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        Self::from_value(&doc)
    }

    pub fn from_value(doc: &Value) -> Result<Self> {
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::Config("grid must be a JSON object".into()))?;
        let mut axes = Vec::with_capacity(obj.len());
        for (k, v) in obj {
            let values = v
                .as_array()
                .filter(|a| !a.is_empty())
                .ok_or_else(|| Error::Config(format!("grid axis `{k}` must be a nonempty array")))?;
            axes.push((k.clone(), values.clone()));
        }
        if axes.is_empty() {
            return Err(Error::Config("grid has no axes".into()));
        }
        let n = axes.iter().try_fold(1usize, |acc, (_, v)| acc.checked_mul(v.len()));
        if n.is_none_or(|n| n > MAX_GRID_POINTS) {
            return Err(Error::Config(format!("grid exceeds {MAX_GRID_POINTS} points")));
        }
        Ok(Grid { axes })
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<Map<String, Value>> {
        let mut out = vec![Map::new()];
        for (key, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|m| {
                    values.iter().map(move |v| {
                        let mut m = m.clone();
                        m.insert(key.clone(), v.clone());
                        m
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub params: Map<String, Value>,
    /// Mean over targets of the fold-mean RMSE; `None` when infeasible.
    pub mean_cv_rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: RegressorSpec,
    pub best_index: usize,
    pub rows: Vec<GridRow>,
}

/// Evaluates every grid point by k-fold CV and returns the lowest mean
/// RMSE, earliest point winning ties.
pub fn grid_search(base: &RegressorSpec, grid: &Grid, table: &Table, k: usize, seed: u64) -> Result<GridResult> {
    if k < 2 {
        return Err(Error::Config("grid search needs k ≥ 2".into()));
    }
    for (key, values) in &grid.axes {
        if let Some(v) = values.first() {
            base.with_param(key, v)?;
        }
    }
    let points = grid.points();
    let evaluated: Vec<(Option<RegressorSpec>, GridRow)> = points
        .into_par_iter()
        .map(|params| {
            let attempt = params
                .iter()
                .try_fold(base.clone(), |s, (key, v)| s.with_param(key, v))
                .and_then(|spec| {
                    let res = eval::kfold(&spec, table, k, seed)?;
                    let m = res.average.rmse_mean;
                    if m.is_finite() {
                        Ok((spec, m))
                    } else {
                        Err(Error::Search("non-finite CV RMSE".into()))
                    }
                });
            match attempt {
                Ok((spec, m)) => (
                    Some(spec),
                    GridRow {
                        params,
                        mean_cv_rmse: Some(m),
                        error: None,
                    },
                ),
                Err(e) => (
                    None,
                    GridRow {
                        params,
                        mean_cv_rmse: None,
                        error: Some(e.to_string()),
                    },
                ),
            }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, (_, row)) in evaluated.iter().enumerate() {
        if let Some(m) = row.mean_cv_rmse {
            if best.is_none_or(|(_, b)| m < b) {
                best = Some((i, m));
            }
        }
    }
    let (best_index, _) = best.ok_or_else(|| {
        Error::Search(format!(
            "all {} grid points infeasible (first: {})",
            evaluated.len(),
            evaluated[0].1.error.as_deref().unwrap_or("unknown")
        ))
    })?;
    let best = evaluated[best_index].0.clone().expect("feasible point has a spec");
    Ok(GridResult {
        best,
        best_index,
        rows: evaluated.into_iter().map(|(_, r)| r).collect(),
    })
}
