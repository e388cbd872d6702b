//! Shapley-value attributions: exact enumeration and KernelSHAP.
//!
//! Coalition values use marginal replacement: features outside the coalition
//! take each background row's value and the model outputs are averaged over
//! the background.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jetphys::{self, JetCase};
use crate::models::Predictor;
use crate::{rng, stats};

/// Largest feature count accepted by [`exact_shapley`].
pub const MAX_ENUMERATION_FEATURES: usize = 20;
/// Largest feature count for which exact-mode KernelSHAP is the default.
pub const AUTO_EXACT_FEATURES: usize = 12;
/// Largest feature count accepted by exact-mode KernelSHAP.
pub const MAX_EXACT_KERNEL_FEATURES: usize = 16;
pub const RIDGE: f64 = 1e-10;
pub const DEFAULT_BACKGROUND_ROWS: usize = 100;

/// Mean model output for every coalition mask, one row per mask.
pub fn coalition_values<P: Predictor + ?Sized>(
    model: &P,
    instance: ArrayView1<f64>,
    background: ArrayView2<f64>,
    masks: &[u64],
) -> Result<Array2<f64>> {
    let (nb, p) = background.dim();
    if nb == 0 {
        return Err(Error::Data("background set is empty".into()));
    }
    if instance.len() != p || model.n_features() != p {
        return Err(Error::ShapeMismatch(format!(
            "instance has {} features, background {p}, model {}",
            instance.len(),
            model.n_features()
        )));
    }
    let mut batch = Array2::zeros((masks.len() * nb, p));
    for (m, &mask) in masks.iter().enumerate() {
        for b in 0..nb {
            let mut row = batch.row_mut(m * nb + b);
            for j in 0..p {
                row[j] = if mask >> j & 1 == 1 { instance[j] } else { background[[b, j]] };
            }
        }
    }
    let out = model.predict_batch(batch.view())?;
    let k = out.ncols();
    let mut values = Array2::zeros((masks.len(), k));
    for m in 0..masks.len() {
        for t in 0..k {
            let mut s = 0.0;
            for b in 0..nb {
                s += out[[m * nb + b, t]];
            }
            values[[m, t]] = s / nb as f64;
        }
    }
    Ok(values)
}

fn shapley_weights(n: usize) -> Vec<f64> {
    // weight[s] = s!(n−s−1)!/n!
    (0..n)
        .map(|s| {
            let mut w = 1.0 / n as f64;
            for i in 1..=s {
                w *= i as f64 / (n - i) as f64;
            }
            w
        })
        .collect()
}

/// Shapley values of every target for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyValues {
    /// v(∅) per target.
    pub base: Vec<f64>,
    /// targets × features.
    pub phi: Array2<f64>,
    /// Model prediction at the instance per target.
    pub prediction: Vec<f64>,
}

/// Exact Shapley values by enumerating all 2ⁿ coalitions.
pub fn exact_shapley_all<P: Predictor + ?Sized>(
    model: &P,
    instance: ArrayView1<f64>,
    background: ArrayView2<f64>,
) -> Result<ShapleyValues> {
    let n = instance.len();
    if n > MAX_ENUMERATION_FEATURES {
        return Err(Error::Capability(format!(
            "exact enumeration supports at most {MAX_ENUMERATION_FEATURES} features, got {n}; use kernel_shap in sampling mode"
        )));
    }
    let full = (1u64 << n) - 1;
    let masks: Vec<u64> = (0..full).collect();
    let mut v = coalition_values(model, instance, background, &masks)?;
    let prediction = model.predict_batch(instance.insert_axis(ndarray::Axis(0)))?.row(0).to_vec();
    let k = v.ncols();
    v.push_row(ArrayView1::from(&prediction)).expect("row width matches");
    let w = shapley_weights(n);
    let mut phi = Array2::zeros((k, n));
    for j in 0..n {
        let bit = 1u64 << j;
        for s in (0..=full).filter(|s| s & bit == 0) {
            let weight = w[s.count_ones() as usize];
            for t in 0..k {
                phi[[t, j]] += weight * (v[[(s | bit) as usize, t]] - v[[s as usize, t]]);
            }
        }
    }
    Ok(ShapleyValues {
        base: v.row(0).to_vec(),
        phi,
        prediction,
    })
}

/// Exact Shapley values for one target: `(phi, base)`.
pub fn exact_shapley<P: Predictor + ?Sized>(
    model: &P,
    instance: ArrayView1<f64>,
    background: ArrayView2<f64>,
    target: usize,
) -> Result<(Vec<f64>, f64)> {
    if target >= model.n_outputs() {
        return Err(Error::ShapeMismatch(format!("target {target} out of range")));
    }
    let sv = exact_shapley_all(model, instance, background)?;
    Ok((sv.phi.row(target).to_vec(), sv.base[target]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapMode {
    /// Exact for up to 12 features, sampling above.
    Auto,
    Exact,
    Sampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub mode: ShapMode,
    /// Coalition budget in sampling mode.
    pub n_coalitions: usize,
    pub seed: u64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            mode: ShapMode::Auto,
            n_coalitions: 2048,
            seed: 0,
        }
    }
}

/// Shapley kernel weight of a coalition of size `s` among `n` features.
pub fn kernel_weight(n: usize, s: usize) -> f64 {
    (n - 1) as f64 / (binomial(n, s) * s as f64 * (n - s) as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Draws `m` distinct proper coalitions with probability proportional to
/// their kernel weight, one at a time without replacement. Returned masks
/// are sorted.
pub fn sample_coalitions(n: usize, m: usize, r: &mut rng::Rng) -> Vec<u64> {
    let total = (1u128 << n) - 2;
    if m as u128 >= total {
        return (1..(1u64 << n) - 1).collect();
    }
    // A size s carries total weight C(n,s)·w(s) = (n−1)/(s(n−s)).
    let size_weights: Vec<f64> = (1..n).map(|s| 1.0 / (s * (n - s)) as f64).collect();
    let wsum: f64 = size_weights.iter().sum();
    let features: Vec<usize> = (0..n).collect();
    let mut seen = std::collections::BTreeSet::new();
    while seen.len() < m {
        let mut u = r.random::<f64>() * wsum;
        let mut size = n - 1;
        for (i, w) in size_weights.iter().enumerate() {
            if u < *w {
                size = i + 1;
                break;
            }
            u -= w;
        }
        let mask = features.choose_multiple(r, size).fold(0u64, |acc, &j| acc | 1 << j);
        seen.insert(mask);
    }
    seen.into_iter().collect()
}

struct KernelSystem {
    /// Cholesky or ridge-regularized solve of the reduced normal equations.
    solve: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
    masks: Vec<u64>,
    ridge: bool,
}

fn kernel_system(n: usize, masks: Vec<u64>) -> Result<KernelSystem> {
    let weights: Vec<f64> = masks.iter().map(|m| kernel_weight(n, m.count_ones() as usize)).collect();
    let last = n - 1;
    let a = DMatrix::from_fn(masks.len(), last, |r, j| {
        let z = |k: usize| (masks[r] >> k & 1) as f64;
        z(j) - z(last)
    });
    let mut ata = DMatrix::zeros(last, last);
    for (r, w) in weights.iter().enumerate() {
        let row = a.row(r);
        ata += row.transpose() * row * *w;
    }
    let at_w = {
        let mut m = a.transpose();
        for (c, w) in weights.iter().enumerate() {
            m.column_mut(c).scale_mut(*w);
        }
        m
    };
    if let Some(ch) = ata.clone().cholesky() {
        return Ok(KernelSystem {
            solve: Box::new(move |b| ch.solve(&(&at_w * b))),
            masks,
            ridge: false,
        });
    }
    let reg = ata + DMatrix::identity(last, last) * RIDGE;
    let lu = reg.lu();
    if !lu.is_invertible() {
        return Err(Error::Numeric {
            s: 0.0,
            reason: "kernel regression system is singular even with ridge".into(),
        });
    }
    Ok(KernelSystem {
        solve: Box::new(move |b| lu.solve(&(&at_w * b)).expect("invertible")),
        masks,
        ridge: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMeta {
    pub mode: ShapMode,
    pub coalitions_per_instance: usize,
    pub background_rows: usize,
    pub seed: u64,
    /// Instances whose weighted system needed the ridge fallback.
    pub ridge_fallback: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    /// Expected model output over the background, per target.
    pub base_values: Vec<f64>,
    /// Per target: instances × features.
    pub phi: Vec<Array2<f64>>,
    /// instances × targets.
    pub predictions: Array2<f64>,
    /// Explained instances in raw units.
    pub feature_values: Array2<f64>,
    pub meta: AttributionMeta,
}

/// KernelSHAP over every row of `instances`.
///
/// The weighted regression eliminates the last feature through the
/// constraint Σφ = f(x) − base, so local accuracy holds by construction.
pub fn kernel_shap<P: Predictor + ?Sized>(
    model: &P,
    feature_names: &[String],
    target_names: &[String],
    instances: ArrayView2<f64>,
    background: ArrayView2<f64>,
    config: &KernelConfig,
) -> Result<Attribution> {
    let n = instances.ncols();
    if background.nrows() == 0 {
        return Err(Error::Data("background set is empty".into()));
    }
    if n < 2 || feature_names.len() != n || target_names.len() != model.n_outputs() {
        return Err(Error::ShapeMismatch("kernel_shap needs ≥ 2 named features and named targets".into()));
    }
    let exact = match config.mode {
        ShapMode::Exact => {
            if n > MAX_EXACT_KERNEL_FEATURES {
                return Err(Error::Capability(format!(
                    "exact mode supports at most {MAX_EXACT_KERNEL_FEATURES} features"
                )));
            }
            true
        }
        ShapMode::Auto => n <= AUTO_EXACT_FEATURES,
        ShapMode::Sampling => false,
    };
    if !exact {
        if n > 63 {
            return Err(Error::Capability("sampling mode supports at most 63 features".into()));
        }
        if config.n_coalitions < 2 * n + 2 {
            return Err(Error::Config(format!(
                "n_coalitions must be at least 2n + 2 = {}",
                2 * n + 2
            )));
        }
    }
    let base = coalition_values(model, instances.row(0), background, &[0])?.row(0).to_vec();
    let predictions = model.predict_batch(instances)?;
    let k = predictions.ncols();

    let shared = if exact { Some(kernel_system(n, (1..(1u64 << n) - 1).collect())?) } else { None };

    let per_instance: Vec<(Array2<f64>, bool, usize)> = (0..instances.nrows())
        .into_par_iter()
        .map(|i| {
            let owned;
            let sys = match &shared {
                Some(s) => s,
                None => {
                    let mut r = rng::child(config.seed, i as u64);
                    owned = kernel_system(n, sample_coalitions(n, config.n_coalitions, &mut r))?;
                    &owned
                }
            };
            let v = coalition_values(model, instances.row(i), background, &sys.masks)?;
            let mut phi = Array2::zeros((k, n));
            for t in 0..k {
                let delta = predictions[[i, t]] - base[t];
                let b = DVector::from_fn(sys.masks.len(), |r, _| {
                    let z_last = (sys.masks[r] >> (n - 1) & 1) as f64;
                    v[[r, t]] - base[t] - z_last * delta
                });
                let head = (sys.solve)(&b);
                let mut rest = delta;
                for j in 0..n - 1 {
                    phi[[t, j]] = head[j];
                    rest -= head[j];
                }
                phi[[t, n - 1]] = rest;
            }
            Ok((phi, sys.ridge, sys.masks.len()))
        })
        .collect::<Result<_>>()?;

    let m = instances.nrows();
    let mut phi = vec![Array2::zeros((m, n)); k];
    let mut ridge_fallback = Vec::new();
    for (i, (p, ridge, _)) in per_instance.iter().enumerate() {
        for t in 0..k {
            phi[t].row_mut(i).assign(&p.row(t));
        }
        if *ridge {
            ridge_fallback.push(i);
        }
    }
    Ok(Attribution {
        feature_names: feature_names.to_vec(),
        target_names: target_names.to_vec(),
        base_values: base,
        phi,
        predictions,
        feature_values: instances.to_owned(),
        meta: AttributionMeta {
            mode: if exact { ShapMode::Exact } else { ShapMode::Sampling },
            coalitions_per_instance: per_instance.first().map_or(0, |p| p.2),
            background_rows: background.nrows(),
            seed: config.seed,
            ridge_fallback,
        },
    })
}

/// Up to `rows` rows of `x` drawn without replacement from the canonical
/// order with `seed`.
pub fn background(x: ArrayView2<f64>, rows: usize, seed: u64) -> Array2<f64> {
    let all: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut order = crate::dataset::canonical_order(&all);
    order.shuffle(&mut rng::rng(seed));
    order.truncate(rows.min(order.len()));
    x.select(ndarray::Axis(0), &order)
}

impl Attribution {
    pub fn n_instances(&self) -> usize {
        self.feature_values.nrows()
    }

    fn target_index(&self, target: &str) -> Result<usize> {
        self.target_names
            .iter()
            .position(|t| t == target)
            .ok_or_else(|| Error::UnknownFeature(target.to_string()))
    }

    pub fn feature_index(&self, feature: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|f| f == feature)
            .ok_or_else(|| Error::UnknownFeature(feature.to_string()))
    }

    /// Largest |base + Σφ − f(x)| over all instances and targets.
    pub fn local_accuracy_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (t, phi) in self.phi.iter().enumerate() {
            for i in 0..self.n_instances() {
                let s = self.base_values[t] + phi.row(i).sum();
                worst = worst.max((s - self.predictions[[i, t]]).abs());
            }
        }
        worst
    }

    /// Restricts the attribution to a subset of instances.
    pub fn select(&self, rows: &[usize]) -> Attribution {
        let ax = ndarray::Axis(0);
        Attribution {
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
            base_values: self.base_values.clone(),
            phi: self.phi.iter().map(|p| p.select(ax, rows)).collect(),
            predictions: self.predictions.select(ax, rows),
            feature_values: self.feature_values.select(ax, rows),
            meta: self.meta.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, target: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["instance".to_string(), "base".to_string()];
        header.extend(self.feature_names.iter().map(|f| format!("phi_{f}")));
        header.push("prediction".into());
        w.write_record(&header)?;
        for i in 0..self.n_instances() {
            let mut rec = vec![i.to_string(), self.base_values[target].to_string()];
            rec.extend(self.phi[target].row(i).iter().map(f64::to_string));
            rec.push(self.predictions[[i, target]].to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<attribution csv>", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarChart {
    pub target: String,
    /// (feature, mean |φ|), descending.
    pub bars: Vec<(String, f64)>,
}

pub fn bar_data(attr: &Attribution) -> Vec<BarChart> {
    attr.target_names
        .iter()
        .zip(&attr.phi)
        .map(|(target, phi)| {
            let mut bars: Vec<(String, f64)> = attr
                .feature_names
                .iter()
                .enumerate()
                .map(|(j, f)| (f.clone(), stats::mean(&phi.column(j).mapv(f64::abs).to_vec())))
                .collect();
            bars.sort_by(|a, b| b.1.total_cmp(&a.1));
            BarChart {
                target: target.clone(),
                bars,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarySeries {
    pub target: String,
    pub feature: String,
    /// (φ, raw feature value) per instance, in instance order.
    pub points: Vec<(f64, f64)>,
}

pub fn summary_data(attr: &Attribution) -> Vec<SummarySeries> {
    let mut out = Vec::new();
    for (t, target) in attr.target_names.iter().enumerate() {
        for (j, feature) in attr.feature_names.iter().enumerate() {
            out.push(SummarySeries {
                target: target.clone(),
                feature: feature.clone(),
                points: (0..attr.n_instances())
                    .map(|i| (attr.phi[t][[i, j]], attr.feature_values[[i, j]]))
                    .collect(),
            });
        }
    }
    out
}

/// Spearman correlation between raw values and φ of one summary series.
pub fn value_phi_correlation(series: &SummarySeries) -> Option<f64> {
    let (phi, val): (Vec<f64>, Vec<f64>) = series.points.iter().copied().unzip();
    stats::spearman(&val, &phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceSeries {
    pub target: String,
    pub feature: String,
    /// (raw value, φ) sorted by raw value.
    pub points: Vec<(f64, f64)>,
}

pub fn dependence_data(attr: &Attribution, feature: &str) -> Result<Vec<DependenceSeries>> {
    let j = attr.feature_index(feature)?;
    Ok(attr
        .target_names
        .iter()
        .enumerate()
        .map(|(t, target)| {
            let mut points: Vec<(f64, f64)> = (0..attr.n_instances())
                .map(|i| (attr.feature_values[[i, j]], attr.phi[t][[i, j]]))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            DependenceSeries {
                target: target.clone(),
                feature: feature.to_string(),
                points,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterfallStep {
    /// `base`, a feature name, or `prediction`.
    pub label: String,
    pub feature_value: Option<f64>,
    pub contribution: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waterfall {
    pub target: String,
    pub instance: usize,
    pub steps: Vec<WaterfallStep>,
}

pub fn waterfall_data(attr: &Attribution, instance: usize, target: &str) -> Result<Waterfall> {
    let t = attr.target_index(target)?;
    if instance >= attr.n_instances() {
        return Err(Error::ShapeMismatch(format!("instance {instance} out of range")));
    }
    let base = attr.base_values[t];
    let mut order: Vec<usize> = (0..attr.feature_names.len()).collect();
    order.sort_by(|&a, &b| attr.phi[t][[instance, b]].abs().total_cmp(&attr.phi[t][[instance, a]].abs()));
    let mut steps = vec![WaterfallStep {
        label: "base".into(),
        feature_value: None,
        contribution: base,
        cumulative: base,
    }];
    let mut acc = base;
    for j in order {
        let c = attr.phi[t][[instance, j]];
        acc += c;
        steps.push(WaterfallStep {
            label: attr.feature_names[j].clone(),
            feature_value: Some(attr.feature_values[[instance, j]]),
            contribution: c,
            cumulative: acc,
        });
    }
    let pred = attr.predictions[[instance, t]];
    steps.push(WaterfallStep {
        label: "prediction".into(),
        feature_value: None,
        contribution: pred - acc,
        cumulative: pred,
    });
    Ok(Waterfall {
        target: target.to_string(),
        instance,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeFlags {
    pub coanda: bool,
    pub shallow: bool,
    pub coanda_ratio: f64,
    pub shallow_ratio: f64,
    pub shallow_threshold: f64,
}

pub const COANDA_RATIO_LIMIT: f64 = 0.2;

/// Shallow-water threshold on d·Fr/H: 0.95 at 30°, 0.65 at 45°, linear in
/// between and beyond, clamped to [0.3, 0.95].
pub fn shallow_threshold(theta: f64) -> f64 {
    let t = (0.95 * (45.0 - theta) + 0.65 * (theta - 30.0)) / 15.0;
    t.clamp(0.3, 0.95)
}

pub fn regime_flags(case: &JetCase) -> Result<RegimeFlags> {
    let q = jetphys::derive(case)?;
    let threshold = shallow_threshold(case.theta);
    Ok(RegimeFlags {
        coanda: q.coanda_ratio < COANDA_RATIO_LIMIT,
        shallow: q.shallow_ratio >= threshold,
        coanda_ratio: q.coanda_ratio,
        shallow_ratio: q.shallow_ratio,
        shallow_threshold: threshold,
    })
}

pub fn write_bar_csv<W: Write>(bars: &[BarChart], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["target", "rank", "feature", "mean_abs_phi"])?;
    for b in bars {
        for (rank, (f, v)) in b.bars.iter().enumerate() {
            w.write_record([b.target.as_str(), &(rank + 1).to_string(), f, &v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<bar csv>", e))
}

pub fn write_summary_csv<W: Write>(series: &[SummarySeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["target", "feature", "instance", "phi", "value"])?;
    for s in series {
        for (i, (phi, v)) in s.points.iter().enumerate() {
            w.write_record([s.target.as_str(), &s.feature, &i.to_string(), &phi.to_string(), &v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<summary csv>", e))
}

pub fn write_dependence_csv<W: Write>(series: &[DependenceSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["target", "feature", "value", "phi"])?;
    for s in series {
        for (v, phi) in &s.points {
            w.write_record([s.target.as_str(), &s.feature, &v.to_string(), &phi.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<dependence csv>", e))
}

pub fn write_waterfall_csv<W: Write>(falls: &[Waterfall], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["target", "instance", "step", "label", "feature_value", "contribution", "cumulative"])?;
    for f in falls {
        for (k, s) in f.steps.iter().enumerate() {
            w.write_record([
                f.target.as_str(),
                &f.instance.to_string(),
                &k.to_string(),
                &s.label,
                &s.feature_value.map_or(String::new(), |v| v.to_string()),
                &s.contribution.to_string(),
                &s.cumulative.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<waterfall csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};

    /// Closure-backed predictor for constructed games.
    pub(crate) struct FnModel<F> {
        pub p: usize,
        pub k: usize,
        pub f: F,
    }

    impl<F: Fn(ArrayView1<f64>) -> Vec<f64> + Sync> Predictor for FnModel<F> {
        fn n_features(&self) -> usize {
            self.p
        }
        fn n_outputs(&self) -> usize {
            self.k
        }
        fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
            let mut out = Array2::zeros((x.nrows(), self.k));
            for (i, row) in x.rows().into_iter().enumerate() {
                out.row_mut(i).assign(&Array1::from((self.f)(row)));
            }
            Ok(out)
        }
    }

    fn names(n: usize, prefix: &str) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::rng(seed);
        Array2::from_shape_fn((rows, cols), |_| r.random_range(-1.0..1.0))
    }

    fn nonlinear(p: usize) -> FnModel<impl Fn(ArrayView1<f64>) -> Vec<f64> + Sync> {
        FnModel {
            p,
            k: 2,
            f: move |x: ArrayView1<f64>| {
                let a = x[0] * x[1] + (x[2] * 2.0).sin() + x.iter().map(|v| v * v).sum::<f64>();
                let b = x.iter().product::<f64>() + (x[p - 1] - x[0]).exp();
                vec![a, b]
            },
        }
    }

    #[test]
    fn linear_model_closed_form() {
        let w = [0.5, -2.0, 1.5, 3.0];
        let m = FnModel {
            p: 4,
            k: 1,
            f: move |x: ArrayView1<f64>| vec![x.iter().zip(&w).map(|(a, b)| a * b).sum()],
        };
        let bg = random_matrix(9, 4, 1);
        let x = array![0.3, 0.1, -0.7, 0.9];
        let (phi, _) = exact_shapley(&m, x.view(), bg.view(), 0).unwrap();
        for j in 0..4 {
            let mean = bg.column(j).mean().unwrap();
            assert_abs_diff_eq!(phi[j], w[j] * (x[j] - mean), epsilon = 1e-12);
        }
    }

    #[test]
    fn instance_equal_to_background_gets_zero() {
        let m = nonlinear(3);
        let x = array![0.2, -0.4, 0.6];
        let bg = x.clone().insert_axis(ndarray::Axis(0));
        let sv = exact_shapley_all(&m, x.view(), bg.view()).unwrap();
        assert!(sv.phi.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(sv.base, (m.f)(x.view()));
    }

    #[test]
    fn symmetric_features_share_credit() {
        let m = FnModel {
            p: 3,
            k: 1,
            f: |x: ArrayView1<f64>| vec![x[0] + x[1] + x[0] * x[1] * x[2]],
        };
        let x = array![0.7, 0.7, -0.2];
        let bg = array![[0.1, 0.1, 0.5], [-0.3, -0.3, 0.2]];
        let (phi, _) = exact_shapley(&m, x.view(), bg.view(), 0).unwrap();
        assert_abs_diff_eq!(phi[0], phi[1], epsilon = 1e-12);
        let attr = kernel_shap(&m, &names(3, "f"), &names(1, "t"), x.view().insert_axis(ndarray::Axis(0)), bg.view(), &KernelConfig::default()).unwrap();
        assert_abs_diff_eq!(attr.phi[0][[0, 0]], attr.phi[0][[0, 1]], epsilon = 1e-10);
    }

    #[test]
    fn enumeration_rejects_too_many_features() {
        let m = FnModel {
            p: 21,
            k: 1,
            f: |x: ArrayView1<f64>| vec![x.sum()],
        };
        let x = Array1::zeros(21);
        let bg = Array2::zeros((1, 21));
        assert!(matches!(exact_shapley(&m, x.view(), bg.view(), 0), Err(Error::Capability(_))));
    }

    #[test]
    fn exact_kernel_matches_enumeration() {
        for p in [3usize, 5, 7] {
            let m = nonlinear(p);
            let bg = random_matrix(15, p, p as u64);
            let xs = random_matrix(4, p, 100 + p as u64);
            let attr = kernel_shap(&m, &names(p, "f"), &names(2, "t"), xs.view(), bg.view(), &KernelConfig { mode: ShapMode::Exact, ..Default::default() }).unwrap();
            assert!(attr.local_accuracy_error() < 1e-10);
            for i in 0..4 {
                let sv = exact_shapley_all(&m, xs.row(i), bg.view()).unwrap();
                for t in 0..2 {
                    assert_abs_diff_eq!(attr.base_values[t], sv.base[t], epsilon = 1e-12);
                    for j in 0..p {
                        assert_abs_diff_eq!(attr.phi[t][[i, j]], sv.phi[[t, j]], epsilon = 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn dummy_feature_gets_zero() {
        let inner = nonlinear(6);
        let m = FnModel {
            p: 7,
            k: 2,
            f: |x: ArrayView1<f64>| (inner.f)(x.slice(ndarray::s![..6])),
        };
        let bg = random_matrix(20, 7, 4);
        let xs = random_matrix(3, 7, 5);
        let attr = kernel_shap(&m, &names(7, "f"), &names(2, "t"), xs.view(), bg.view(), &KernelConfig::default()).unwrap();
        for t in 0..2 {
            for i in 0..3 {
                assert!(attr.phi[t][[i, 6]].abs() < 1e-8);
            }
        }
    }

    #[test]
    fn full_sampling_budget_equals_exact() {
        let m = nonlinear(5);
        let bg = random_matrix(10, 5, 6);
        let xs = random_matrix(2, 5, 7);
        let n5 = names(5, "f");
        let t2 = names(2, "t");
        let exact = kernel_shap(&m, &n5, &t2, xs.view(), bg.view(), &KernelConfig { mode: ShapMode::Exact, ..Default::default() }).unwrap();
        let sampled = kernel_shap(&m, &n5, &t2, xs.view(), bg.view(), &KernelConfig { mode: ShapMode::Sampling, n_coalitions: 30, seed: 1 }).unwrap();
        for t in 0..2 {
            for (a, b) in exact.phi[t].iter().zip(sampled.phi[t].iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sampling_converges_toward_exact() {
        let p = 9;
        let m = nonlinear(p);
        let bg = random_matrix(12, p, 8);
        let xs = random_matrix(6, p, 9);
        let (np, nt) = (names(p, "f"), names(2, "t"));
        let exact = kernel_shap(&m, &np, &nt, xs.view(), bg.view(), &KernelConfig { mode: ShapMode::Exact, ..Default::default() }).unwrap();
        let mad = |budget: usize| {
            let mut total = 0.0;
            for seed in 0..4 {
                let s = kernel_shap(&m, &np, &nt, xs.view(), bg.view(), &KernelConfig { mode: ShapMode::Sampling, n_coalitions: budget, seed }).unwrap();
                assert!(s.local_accuracy_error() < 1e-9);
                total += s.phi.iter().zip(&exact.phi).map(|(a, b)| (a - b).mapv(f64::abs).mean().unwrap()).sum::<f64>();
            }
            total
        };
        let (a, b, c) = (mad(24), mad(120), mad(480));
        assert!(a > b && b > c, "{a} {b} {c}");
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut r1 = rng::rng(3);
        let mut r2 = rng::rng(3);
        let a = sample_coalitions(10, 50, &mut r1);
        assert_eq!(a, sample_coalitions(10, 50, &mut r2));
        assert_eq!(a.len(), 50);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&m| m != 0 && m != (1 << 10) - 1));
    }

    #[test]
    fn sampling_budget_validated() {
        let m = nonlinear(4);
        let bg = random_matrix(3, 4, 1);
        let cfg = KernelConfig { mode: ShapMode::Sampling, n_coalitions: 9, seed: 0 };
        assert!(matches!(kernel_shap(&m, &names(4, "f"), &names(2, "t"), bg.view(), bg.view(), &cfg), Err(Error::Config(_))));
    }

    fn tiny_attr() -> Attribution {
        let m = nonlinear(3);
        let bg = random_matrix(5, 3, 2);
        let xs = random_matrix(4, 3, 3);
        kernel_shap(&m, &["a".into(), "b".into(), "c".into()], &["y".into(), "z".into()], xs.view(), bg.view(), &KernelConfig::default()).unwrap()
    }

    #[test]
    fn plot_products() {
        let attr = tiny_attr();
        let bars = bar_data(&attr);
        assert_eq!(bars.len(), 2);
        assert!(bars[0].bars.windows(2).all(|w| w[0].1 >= w[1].1));
        let one = attr.select(&[2]);
        let b1 = bar_data(&one);
        let j = one.feature_index(&b1[0].bars[0].0).unwrap();
        assert_eq!(b1[0].bars[0].1, one.phi[0][[0, j]].abs());

        let dep = dependence_data(&attr, "b").unwrap();
        assert_eq!(dep[0].points.len(), 4);
        assert!(dep[0].points.windows(2).all(|w| w[0].0 <= w[1].0));
        assert!(matches!(dependence_data(&attr, "nope"), Err(Error::UnknownFeature(_))));

        let wf = waterfall_data(&attr, 1, "z").unwrap();
        assert_eq!(wf.steps.len(), 5);
        assert_eq!(wf.steps[0].cumulative, attr.base_values[1]);
        assert_abs_diff_eq!(wf.steps[3].cumulative, attr.predictions[[1, 1]], epsilon = 1e-9);
        assert_eq!(wf.steps[4].cumulative, attr.predictions[[1, 1]]);

        assert_eq!(summary_data(&one.select(&[0])).len(), 6);
        let mut buf = Vec::new();
        write_waterfall_csv(&[wf], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("target,instance,step,label"));
    }

    #[test]
    fn zero_phi_keeps_feature_order() {
        let mut attr = tiny_attr();
        for p in &mut attr.phi {
            p.fill(0.0);
        }
        let bars = bar_data(&attr);
        let names: Vec<&str> = bars[0].bars.iter().map(|b| b.0.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
    }

    #[test]
    fn monotone_one_feature_model_aligns_phi_with_value() {
        let m = FnModel {
            p: 2,
            k: 1,
            f: |x: ArrayView1<f64>| vec![x[0].powi(3) + 2.0 * x[0] + 0.1 * x[1]],
        };
        let bg = random_matrix(20, 2, 10);
        let xs = random_matrix(40, 2, 11);
        let attr = kernel_shap(&m, &names(2, "f"), &names(1, "t"), xs.view(), bg.view(), &KernelConfig::default()).unwrap();
        let s = &summary_data(&attr)[0];
        assert!(value_phi_correlation(s).unwrap() > 0.99);
    }

    #[test]
    fn regime_threshold_and_flags() {
        assert_eq!(shallow_threshold(30.0), 0.95);
        assert_eq!(shallow_threshold(45.0), 0.65);
        assert_eq!(shallow_threshold(10.0), 0.95);
        assert_eq!(shallow_threshold(80.0), 0.3);
        let val = JetCase::new(45.0, 0.07, 0.15, 0.0058, 0.515, 1034.0, 997.0).unwrap();
        let f = regime_flags(&val).unwrap();
        assert!(!f.coanda && !f.shallow);
        assert!((f.coanda_ratio - 1.144).abs() < 1e-3);
        assert!((f.shallow_ratio - 0.433).abs() < 1e-3);
        let mut c = val;
        c.h_p = 0.038 * jetphys::derive(&val).unwrap().l_m;
        assert!(regime_flags(&c).unwrap().coanda);
        let mut c = val;
        c.h_p = 0.03;
        c.depth = val.d * jetphys::derive(&val).unwrap().fr / 0.65;
        let f = regime_flags(&c).unwrap();
        assert!(f.shallow, "ratio {} threshold {}", f.shallow_ratio, f.shallow_threshold);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn local_accuracy_on_random_models(p in 3usize..9, seed in 0u64..10_000, mode in 0usize..2) {
            let model = nonlinear(p);
            let x = random_matrix(6, p, seed);
            let bg = random_matrix(20, p, seed + 1);
            let config = KernelConfig {
                mode: if mode == 0 { ShapMode::Exact } else { ShapMode::Sampling },
                n_coalitions: 4 * p + 8,
                seed,
            };
            let attr = kernel_shap(&model, &names(p, "x"), &names(2, "t"), x.view(), bg.view(), &config).unwrap();
            proptest::prop_assert!(attr.local_accuracy_error() <= 1e-6);
        }
    }
}
