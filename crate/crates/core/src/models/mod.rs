//! Multi-output regressors behind one fit/predict interface.

pub mod forest;
pub mod gbt;
pub mod grid;
pub mod lbfgs;
pub mod mlp;
pub mod tree;

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ScalerParams, Table};
use crate::error::{Error, Result};
use crate::rng;
use forest::Forest;
use gbt::Boosted;
use lbfgs::LbfgsConfig;
use mlp::{Activation, Network};
use tree::TreeParams;

pub use grid::{grid_search, Grid, GridResult, GridRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden_layers: usize,
    pub neurons: usize,
    pub activation: Activation,
    pub l2_alpha: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub memory: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_layers: 3,
            neurons: 25,
            activation: Activation::Tanh,
            l2_alpha: 0.05,
            max_iter: 500,
            tol: 1e-6,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means ⌈features/3⌉.
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            estimators: 250,
            max_depth: 90,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            estimators: 300,
            max_depth: 2,
            learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "hyperparameters", rename_all = "snake_case")]
pub enum Hyperparameters {
    Mlp(MlpParams),
    RandomForest(ForestParams),
    Gbt(GbtParams),
}

impl Hyperparameters {
    pub fn family(&self) -> &'static str {
        match self {
            Hyperparameters::Mlp(_) => "mlp",
            Hyperparameters::RandomForest(_) => "random_forest",
            Hyperparameters::Gbt(_) => "gbt",
        }
    }

    pub fn default_for(family: &str) -> Result<Self> {
        match family {
            "mlp" => Ok(Hyperparameters::Mlp(MlpParams::default())),
            "random_forest" => Ok(Hyperparameters::RandomForest(ForestParams::default())),
            "gbt" => Ok(Hyperparameters::Gbt(GbtParams::default())),
            other => Err(Error::Config(format!("unknown model family `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        match self {
            Hyperparameters::Mlp(p) => {
                if p.hidden_layers == 0 || p.neurons == 0 {
                    return bad("mlp needs at least one hidden layer of positive width");
                }
                if !(p.l2_alpha >= 0.0 && p.l2_alpha.is_finite()) || !(p.tol > 0.0) || p.memory == 0 {
                    return bad("mlp l2_alpha must be finite and ≥ 0, tol > 0, memory ≥ 1");
                }
            }
            Hyperparameters::RandomForest(p) => {
                if p.estimators == 0 || p.min_samples_leaf == 0 || p.max_features == Some(0) {
                    return bad("random_forest needs estimators, min_samples_leaf and max_features ≥ 1");
                }
            }
            Hyperparameters::Gbt(p) => {
                if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
                    return bad("gbt learning_rate must be finite and > 0");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    #[serde(flatten)]
    pub hyper: Hyperparameters,
    pub seed: u64,
}

impl RegressorSpec {
    pub fn new(hyper: Hyperparameters, seed: u64) -> Self {
        RegressorSpec { hyper, seed }
    }

    pub fn mlp(seed: u64) -> Self {
        Self::new(Hyperparameters::Mlp(MlpParams::default()), seed)
    }

    pub fn random_forest(seed: u64) -> Self {
        Self::new(Hyperparameters::RandomForest(ForestParams::default()), seed)
    }

    pub fn gbt(seed: u64) -> Self {
        Self::new(Hyperparameters::Gbt(GbtParams::default()), seed)
    }

    pub fn family(&self) -> &'static str {
        self.hyper.family()
    }

    /// Copy with one hyperparameter replaced. Unknown keys are rejected.
    pub fn with_param(&self, key: &str, value: &serde_json::Value) -> Result<Self> {
        let mut doc = serde_json::to_value(&self.hyper)?;
        let params = doc["hyperparameters"]
            .as_object_mut()
            .ok_or_else(|| Error::Config("hyperparameters are not an object".into()))?;
        if !params.contains_key(key) {
            return Err(Error::Config(format!("{} has no hyperparameter `{key}`", self.family())));
        }
        params.insert(key.to_string(), value.clone());
        let hyper: Hyperparameters = serde_json::from_value(doc)
            .map_err(|e| Error::Config(format!("bad value for `{key}`: {e}")))?;
        Ok(RegressorSpec { hyper, seed: self.seed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalers {
    pub input: ScalerParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ScalerParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Parameters {
    Mlp { network: Network },
    /// One forest per target.
    RandomForest { forests: Vec<Forest> },
    /// One boosted ensemble per target.
    Gbt { ensembles: Vec<Boosted> },
}

/// Anything that maps a feature matrix to a target matrix.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    spec: RegressorSpec,
    feature_names: Vec<String>,
    target_names: Vec<String>,
    scalers: Scalers,
    parameters: Parameters,
    #[serde(default)]
    training_log: Vec<String>,
}

fn check_inputs(table: &Table) -> Result<()> {
    let (n, p) = table.x.dim();
    if table.y.nrows() != n {
        return Err(Error::ShapeMismatch(format!("{n} feature rows but {} target rows", table.y.nrows())));
    }
    if p != table.feature_names.len() || table.y.ncols() != table.target_names.len() {
        return Err(Error::ShapeMismatch("column count does not match names".into()));
    }
    if let Some(m) = &table.mask {
        if m.dim() != table.y.dim() {
            return Err(Error::ShapeMismatch("mask shape differs from target shape".into()));
        }
    }
    if table.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite feature value".into()));
    }
    for i in 0..n {
        for t in 0..table.y.ncols() {
            if table.observed(i, t) && !table.y[[i, t]].is_finite() {
                return Err(Error::Data(format!("non-finite observed target at row {i}")));
            }
        }
    }
    let distinct = table.canonical_order();
    let rows: Vec<_> = distinct.iter().map(|&i| table.x.row(i)).collect();
    if n < 2 || rows.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::Data("need at least two distinct rows".into()));
    }
    for t in 0..table.y.ncols() {
        if table.target_column(t).0.len() < 2 {
            return Err(Error::Data(format!("target {} has fewer than two observed rows", table.target_names[t])));
        }
    }
    Ok(())
}

/// Fits a model on `table`, honouring its absence mask.
pub fn fit(spec: &RegressorSpec, table: &Table) -> Result<TrainedModel> {
    spec.hyper.validate()?;
    check_inputs(table)?;
    let input = ScalerParams::fit(&table.feature_names, table.x.view())?;
    let x = input.apply(table.x.view());
    let n_targets = table.y.ncols();
    let mut log = Vec::new();
    let (parameters, target) = match &spec.hyper {
        Hyperparameters::Mlp(p) => {
            let ts = ScalerParams::fit(&table.target_names, table.y.view())?;
            let y = ts.apply(table.y.view());
            let mut sizes = vec![x.ncols()];
            sizes.extend(std::iter::repeat_n(p.neurons, p.hidden_layers));
            sizes.push(n_targets);
            let mut net = Network::init(&sizes, p.activation, rng::derive(spec.seed, 0));
            let cfg = LbfgsConfig {
                memory: p.memory,
                max_iter: p.max_iter,
                grad_tol: p.tol,
                ..Default::default()
            };
            let report = net.train(x.view(), y.view(), table.mask.as_ref().map(|m| m.view()), p.l2_alpha, &cfg);
            log.push(format!(
                "lbfgs iterations={} converged={} final_loss={:e} fallback_steps={}",
                report.iterations,
                report.converged,
                report.loss_history.last().copied().unwrap_or(f64::NAN),
                report.fallback_steps
            ));
            log.extend(report.log);
            (Parameters::Mlp { network: net }, Some(ts))
        }
        Hyperparameters::RandomForest(p) => {
            let params = TreeParams {
                max_depth: p.max_depth,
                min_samples_leaf: p.min_samples_leaf,
                max_features: Some(p.max_features.unwrap_or(x.ncols().div_ceil(3)).min(x.ncols())),
            };
            let forests = (0..n_targets)
                .into_par_iter()
                .map(|t| {
                    let (rows, _) = table.target_column(t);
                    let y = table.y.column(t).to_vec();
                    Forest::fit(x.view(), &y, &rows, p.estimators, params, rng::derive(spec.seed, t as u64))
                })
                .collect();
            (Parameters::RandomForest { forests }, None)
        }
        Hyperparameters::Gbt(p) => {
            let ensembles = (0..n_targets)
                .into_par_iter()
                .map(|t| {
                    let (rows, _) = table.target_column(t);
                    let y = table.y.column(t).to_vec();
                    Boosted::fit(x.view(), &y, &rows, p.estimators, p.max_depth, p.learning_rate)
                })
                .collect();
            (Parameters::Gbt { ensembles }, None)
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        feature_names: table.feature_names.clone(),
        target_names: table.target_names.clone(),
        scalers: Scalers { input, target },
        parameters,
        training_log: log,
    })
}

impl TrainedModel {
    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn scalers(&self) -> &Scalers {
        &self.scalers
    }

    pub fn parameters(&self) -> &Parameters {
        &self.parameters
    }

    pub fn training_log(&self) -> &[String] {
        &self.training_log
    }

    /// Predictions in physical units.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.feature_names.len() {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} features, got {}",
                self.feature_names.len(),
                x.ncols()
            )));
        }
        let xs = self.scalers.input.apply(x);
        let n = xs.nrows();
        let k = self.target_names.len();
        let out = match &self.parameters {
            Parameters::Mlp { network } => {
                let raw = network.forward(xs.view());
                match &self.scalers.target {
                    Some(ts) => ts.invert(raw.view()),
                    None => raw,
                }
            }
            Parameters::RandomForest { forests } => {
                Array2::from_shape_fn((n, k), |(i, t)| forests[t].predict_row(xs.row(i)))
            }
            Parameters::Gbt { ensembles } => {
                Array2::from_shape_fn((n, k), |(i, t)| ensembles[t].predict_row(xs.row(i)))
            }
        };
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(text)?;
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Consistency of a deserialized model.
    fn check(&self) -> Result<()> {
        let p = self.feature_names.len();
        let k = self.target_names.len();
        let bad = |m: String| Err(Error::Validation(m));
        if p == 0 || k == 0 {
            return bad("model has no features or no targets".into());
        }
        if self.scalers.input.names != self.feature_names {
            return bad("input scaler does not match feature names".into());
        }
        let ranges_ok = |s: &ScalerParams| s.ranges.iter().all(|(a, b)| a.is_finite() && b.is_finite() && a <= b);
        if !ranges_ok(&self.scalers.input) {
            return bad("input scaler has invalid ranges".into());
        }
        match &self.parameters {
            Parameters::Mlp { network } => {
                match &self.scalers.target {
                    Some(ts) if ts.names == self.target_names && ranges_ok(ts) => {}
                    _ => return bad("mlp needs a target scaler matching target names".into()),
                }
                if network.sizes.len() < 2
                    || network.sizes[0] != p
                    || *network.sizes.last().unwrap() != k
                    || network.sizes.contains(&0)
                    || network.params.len() != Network::n_params(&network.sizes)
                    || network.params.iter().any(|v| !v.is_finite())
                {
                    return bad("mlp parameters do not match the declared shape".into());
                }
            }
            Parameters::RandomForest { forests } => {
                if forests.len() != k
                    || forests
                        .iter()
                        .any(|f| f.trees.is_empty() || !f.trees.iter().all(|t| t.is_well_formed(p)))
                {
                    return bad("forest structure is invalid".into());
                }
            }
            Parameters::Gbt { ensembles } => {
                if ensembles.len() != k
                    || ensembles.iter().any(|e| {
                        !e.base.is_finite() || !e.learning_rate.is_finite() || !e.stages.iter().all(|t| t.is_well_formed(p))
                    })
                {
                    return bad("boosted ensemble structure is invalid".into());
                }
            }
        }
        Ok(())
    }
}

impl Predictor for TrainedModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn n_outputs(&self) -> usize {
        self.target_names.len()
    }

    fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.predict(x)
    }
}

/// Column means of observed targets, used as a trivial baseline.
pub fn target_means(table: &Table) -> Vec<f64> {
    (0..table.y.len_of(Axis(1)))
        .map(|t| crate::stats::mean(&table.target_column(t).1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{r2, rmse};
    use rand::Rng as _;

    fn synthetic(n: usize, p: usize, seed: u64, f: impl Fn(&[f64]) -> Vec<f64>) -> Table {
        let mut r = rng::rng(seed);
        let x = Array2::from_shape_fn((n, p), |_| r.random_range(0.5..2.0));
        let ys: Vec<Vec<f64>> = x.rows().into_iter().map(|row| f(row.as_slice().unwrap())).collect();
        let k = ys[0].len();
        let y = Array2::from_shape_fn((n, k), |(i, j)| ys[i][j]);
        Table {
            feature_names: (0..p).map(|i| format!("f{i}")).collect(),
            target_names: (0..k).map(|i| format!("t{i}")).collect(),
            x,
            y,
            mask: None,
        }
    }

    fn small_forest(seed: u64) -> RegressorSpec {
        RegressorSpec::new(
            Hyperparameters::RandomForest(ForestParams {
                estimators: 30,
                ..Default::default()
            }),
            seed,
        )
    }

    #[test]
    fn spec_json_shape() {
        let v = serde_json::to_value(RegressorSpec::gbt(3)).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"family": "gbt", "hyperparameters": {"estimators": 300, "max_depth": 2, "learning_rate": 0.1}, "seed": 3})
        );
        let partial: RegressorSpec =
            serde_json::from_str(r#"{"family":"mlp","hyperparameters":{"neurons":7},"seed":1}"#).unwrap();
        match partial.hyper {
            Hyperparameters::Mlp(p) => assert_eq!((p.neurons, p.hidden_layers), (7, 3)),
            _ => panic!(),
        }
        assert!(serde_json::from_str::<RegressorSpec>(r#"{"family":"gbt","hyperparameters":{"depth":2},"seed":1}"#).is_err());
    }

    #[test]
    fn with_param_rejects_unknown_keys() {
        let s = RegressorSpec::mlp(0);
        assert!(s.with_param("neurons", &serde_json::json!(9)).is_ok());
        assert!(s.with_param("estimators", &serde_json::json!(9)).is_err());
        assert!(s.with_param("neurons", &serde_json::json!("x")).is_err());
    }

    #[test]
    fn gbt_without_stages_predicts_mean() {
        let t = synthetic(40, 3, 1, |r| vec![r[0] * 2.0, r[1] - r[2]]);
        let spec = RegressorSpec::new(
            Hyperparameters::Gbt(GbtParams {
                estimators: 0,
                ..Default::default()
            }),
            0,
        );
        let m = fit(&spec, &t).unwrap();
        let p = m.predict(t.x.view()).unwrap();
        let means = target_means(&t);
        for row in p.rows() {
            for (a, b) in row.iter().zip(&means) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mlp_fits_linear_target() {
        let w = [0.3, -1.2, 0.7, 2.0, -0.4, 0.1, 1.1];
        let t = synthetic(200, 7, 2, |r| vec![r.iter().zip(&w).map(|(a, b)| a * b).sum()]);
        let m = fit(&RegressorSpec::mlp(4), &t).unwrap();
        let p = m.predict(t.x.view()).unwrap();
        let score = r2(t.y.column(0).as_slice().unwrap(), &p.column(0).to_vec()).unwrap();
        assert!(score > 0.999, "training R² {score}");
    }

    #[test]
    fn forest_beats_mean_predictor_in_sample() {
        let t = synthetic(120, 4, 3, |r| vec![(r[0] * 3.0).sin() + r[1] * r[2], r[3].ln()]);
        let m = fit(&small_forest(5), &t).unwrap();
        let p = m.predict(t.x.view()).unwrap();
        let means = target_means(&t);
        for j in 0..2 {
            let y = t.y.column(j).to_vec();
            let base = rmse(&y, &vec![means[j]; y.len()]).unwrap();
            assert!(rmse(&y, &p.column(j).to_vec()).unwrap() <= base);
        }
    }

    #[test]
    fn deep_forest_memorizes_training_rows() {
        let t = synthetic(150, 5, 4, |r| vec![r.iter().sum::<f64>() + r[0] * r[1]]);
        let m = fit(&RegressorSpec::random_forest(1), &t).unwrap();
        let p = m.predict(t.x.view()).unwrap();
        let close = (0..150).filter(|&i| ((p[[i, 0]] - t.y[[i, 0]]) / t.y[[i, 0]]).abs() < 0.1).count();
        assert!(close >= 135, "{close} of 150 rows within 10%");
    }

    #[test]
    fn tree_models_invariant_under_cubing_a_feature() {
        let t = synthetic(80, 3, 5, |r| vec![r[0] * r[1] - r[2], (r[0] + r[2]).sqrt()]);
        let mut cubed = t.clone();
        cubed.x.column_mut(1).mapv_inplace(|v| v * v * v);
        let query = synthetic(40, 3, 6, |_| vec![0.0]).x;
        let mut query_cubed = query.clone();
        query_cubed.column_mut(1).mapv_inplace(|v| v * v * v);
        for spec in [small_forest(9), RegressorSpec::gbt(9)] {
            let a = fit(&spec, &t).unwrap().predict(query.view()).unwrap();
            let b = fit(&spec, &cubed).unwrap().predict(query_cubed.view()).unwrap();
            assert_eq!(a, b, "{}", spec.family());
        }
    }

    #[test]
    fn fits_are_seed_deterministic_and_round_trip() {
        let t = synthetic(60, 3, 7, |r| vec![r[0] + r[1] * r[2], r[2]]);
        let specs = [
            RegressorSpec::new(
                Hyperparameters::Mlp(MlpParams {
                    neurons: 6,
                    max_iter: 60,
                    ..Default::default()
                }),
                2,
            ),
            small_forest(2),
            RegressorSpec::gbt(2),
        ];
        for spec in specs {
            let a = fit(&spec, &t).unwrap();
            let b = fit(&spec, &t).unwrap();
            let pa = a.predict(t.x.view()).unwrap();
            assert_eq!(pa, b.predict(t.x.view()).unwrap());
            let back = TrainedModel::from_json(&a.to_json().unwrap()).unwrap();
            assert_eq!(back, a);
            assert_eq!(back.predict(t.x.view()).unwrap(), pa);
        }
    }

    #[test]
    fn masked_targets_train_on_observed_rows() {
        let mut t = synthetic(50, 2, 8, |r| vec![r[0], r[1]]);
        let mut mask = Array2::from_elem((50, 2), true);
        for i in 0..10 {
            mask[[i, 1]] = false;
            t.y[[i, 1]] = f64::NAN;
        }
        t.mask = Some(mask);
        for spec in [small_forest(1), RegressorSpec::gbt(1)] {
            let p = fit(&spec, &t).unwrap().predict(t.x.view()).unwrap();
            assert!(p.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn predict_rejects_wrong_width() {
        let t = synthetic(30, 3, 9, |r| vec![r[0]]);
        let m = fit(&RegressorSpec::gbt(0), &t).unwrap();
        assert!(matches!(m.predict(Array2::zeros((2, 4)).view()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn rejects_degenerate_training_data() {
        let mut t = synthetic(10, 2, 1, |r| vec![r[0]]);
        let row = t.x.row(0).to_owned();
        for mut r in t.x.rows_mut() {
            r.assign(&row);
        }
        assert!(matches!(fit(&RegressorSpec::gbt(0), &t), Err(Error::Data(_))));
        let mut t = synthetic(10, 2, 1, |r| vec![r[0]]);
        t.x[[3, 1]] = f64::INFINITY;
        assert!(matches!(fit(&RegressorSpec::gbt(0), &t), Err(Error::Data(_))));
    }
}
