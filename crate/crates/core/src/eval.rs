//! Metrics, K-fold cross validation, held-out validation and learning curves.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Table;
use crate::error::{Error, Result};
use crate::models::{self, RegressorSpec, TrainedModel};
use crate::{rng, stats};

pub fn rmse(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() || observed.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "rmse needs equal nonzero lengths, got {} and {}",
            observed.len(),
            predicted.len()
        )));
    }
    let ss: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p) * (o - p)).sum();
    Ok((ss / observed.len() as f64).sqrt())
}

pub fn r2(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() {
        return Err(Error::ShapeMismatch(format!(
            "r2 needs equal lengths, got {} and {}",
            observed.len(),
            predicted.len()
        )));
    }
    if observed.len() < 2 {
        return Err(Error::UndefinedR2);
    }
    let m = stats::mean(observed);
    let ss_tot: f64 = observed.iter().map(|o| (o - m) * (o - m)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedR2);
    }
    let ss_res: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p) * (o - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Shuffles the canonical row order with `seed` and cuts it into `k`
/// contiguous folds whose sizes differ by at most one.
pub fn fold_indices(table: &Table, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = table.n_rows();
    if k < 2 || n < k {
        return Err(Error::Size(format!("k-fold needs 2 ≤ k ≤ rows, got k = {k} with {n} rows")));
    }
    let mut order = table.canonical_order();
    order.shuffle(&mut rng::rng(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// Per-target scores on the observed cells of `table`.
pub fn score(model: &TrainedModel, table: &Table) -> Result<Vec<(Result<f64>, Result<f64>)>> {
    let pred = model.predict(table.x.view())?;
    Ok((0..table.target_names.len())
        .map(|t| {
            let (rows, obs) = table.target_column(t);
            let p: Vec<f64> = rows.iter().map(|&r| pred[[r, t]]).collect();
            (r2(&obs, &p), rmse(&obs, &p))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScores {
    pub target: String,
    pub r2_mean: f64,
    pub r2_std: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub train_r2_mean: f64,
    pub train_r2_std: f64,
    /// Folds contributing to the R² statistics.
    pub r2_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedFold {
    pub fold: usize,
    pub target: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfoldResult {
    pub k: usize,
    pub fold_sizes: Vec<usize>,
    pub targets: Vec<TargetScores>,
    pub average: TargetScores,
    pub flagged: Vec<FlaggedFold>,
    /// Per-fold R² averaged over the targets defined in that fold.
    pub fold_cv_r2: Vec<f64>,
    pub fold_train_r2: Vec<f64>,
}

struct FoldOutcome {
    cv: Vec<(Result<f64>, Result<f64>)>,
    train: Vec<Result<f64>>,
}

fn finite_mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (stats::mean(values), stats::std(values))
    }
}

fn average_row(rows: &[TargetScores]) -> TargetScores {
    let avg = |f: fn(&TargetScores) -> f64| stats::mean(&rows.iter().map(f).collect::<Vec<_>>());
    TargetScores {
        target: "average".into(),
        r2_mean: avg(|r| r.r2_mean),
        r2_std: avg(|r| r.r2_std),
        rmse_mean: avg(|r| r.rmse_mean),
        rmse_std: avg(|r| r.rmse_std),
        train_r2_mean: avg(|r| r.train_r2_mean),
        train_r2_std: avg(|r| r.train_r2_std),
        r2_folds: rows.iter().map(|r| r.r2_folds).min().unwrap_or(0),
    }
}

/// K-fold cross validation of `spec` on `table`.
///
/// Folds whose held-out target is constant or has fewer than two observed
/// cells get their R² flagged and left out of the R² statistics.
pub fn kfold(spec: &RegressorSpec, table: &Table, k: usize, seed: u64) -> Result<KfoldResult> {
    let folds = fold_indices(table, k, seed)?;
    let outcomes: Vec<FoldOutcome> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            let train = table.select(&train_idx);
            let test = table.select(&folds[f]);
            let model = models::fit(spec, &train)?;
            let cv = score(&model, &test)?;
            let train = score(&model, &train)?.into_iter().map(|(r, _)| r).collect();
            Ok(FoldOutcome { cv, train })
        })
        .collect::<Result<_>>()?;

    let names = &table.target_names;
    let mut flagged = Vec::new();
    let mut targets = Vec::with_capacity(names.len());
    for (t, name) in names.iter().enumerate() {
        let (mut r2s, mut rmses, mut train) = (Vec::new(), Vec::new(), Vec::new());
        for (f, o) in outcomes.iter().enumerate() {
            match &o.cv[t].0 {
                Ok(v) => r2s.push(*v),
                Err(e) => flagged.push(FlaggedFold {
                    fold: f,
                    target: name.clone(),
                    reason: e.to_string(),
                }),
            }
            match &o.cv[t].1 {
                Ok(v) => rmses.push(*v),
                Err(e) => flagged.push(FlaggedFold {
                    fold: f,
                    target: name.clone(),
                    reason: e.to_string(),
                }),
            }
            if let Ok(v) = &o.train[t] {
                let v = *v;
                train.push(v);
            }
        }
        let (r2_mean, r2_std) = finite_mean_std(&r2s);
        let (rmse_mean, rmse_std) = finite_mean_std(&rmses);
        let (train_r2_mean, train_r2_std) = finite_mean_std(&train);
        targets.push(TargetScores {
            target: name.clone(),
            r2_mean,
            r2_std,
            rmse_mean,
            rmse_std,
            train_r2_mean,
            train_r2_std,
            r2_folds: r2s.len(),
        });
    }
    let per_fold = |f: fn(&FoldOutcome) -> Vec<f64>| -> Vec<f64> {
        outcomes.iter().map(|o| f(o)).filter(|v| !v.is_empty()).map(|v| stats::mean(&v)).collect()
    };
    let fold_cv_r2 = per_fold(|o| o.cv.iter().filter_map(|(r, _)| r.as_ref().ok().copied()).collect());
    let fold_train_r2 = per_fold(|o| o.train.iter().filter_map(|r| r.as_ref().ok().copied()).collect());
    Ok(KfoldResult {
        k,
        fold_sizes: folds.iter().map(Vec::len).collect(),
        average: average_row(&targets),
        targets,
        flagged,
        fold_cv_r2,
        fold_train_r2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationScore {
    pub target: String,
    pub r2: f64,
    pub rmse: f64,
}

/// Scores a fitted model on a held-out table. Undefined R² becomes NaN.
pub fn validate(model: &TrainedModel, test: &Table) -> Result<Vec<ValidationScore>> {
    score(model, test)?
        .into_iter()
        .zip(&test.target_names)
        .map(|((r2, rmse), name)| {
            Ok(ValidationScore {
                target: name.clone(),
                r2: match r2 {
                    Ok(v) => v,
                    Err(Error::UndefinedR2) => f64::NAN,
                    Err(e) => return Err(e),
                },
                rmse: rmse?,
            })
        })
        .collect()
}

pub fn average_validation(rows: &[ValidationScore]) -> ValidationScore {
    ValidationScore {
        target: "average".into(),
        r2: stats::mean(&rows.iter().map(|r| r.r2).collect::<Vec<_>>()),
        rmse: stats::mean(&rows.iter().map(|r| r.rmse).collect::<Vec<_>>()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub family: String,
    pub validation: Vec<ValidationScore>,
    pub validation_average: ValidationScore,
    pub kfold: KfoldResult,
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "NaN".into()
    }
}

impl EvalReport {
    pub fn new(family: &str, validation: Vec<ValidationScore>, kfold: KfoldResult) -> Self {
        EvalReport {
            family: family.to_string(),
            validation_average: average_validation(&validation),
            validation,
            kfold,
        }
    }

    pub fn write_kfold_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["target", "r2_mean", "r2_std", "rmse_mean", "rmse_std", "train_r2_mean", "train_r2_std", "r2_folds"])?;
        for r in self.kfold.targets.iter().chain(std::iter::once(&self.kfold.average)) {
            w.write_record([
                r.target.clone(),
                fmt(r.r2_mean),
                fmt(r.r2_std),
                fmt(r.rmse_mean),
                fmt(r.rmse_std),
                fmt(r.train_r2_mean),
                fmt(r.train_r2_std),
                r.r2_folds.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<kfold csv>", e))
    }

    pub fn write_validation_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["target", "r2", "rmse"])?;
        for r in self.validation.iter().chain(std::iter::once(&self.validation_average)) {
            w.write_record([r.target.clone(), fmt(r.r2), fmt(r.rmse)])?;
        }
        w.flush().map_err(|e| Error::io("<validation csv>", e))
    }

    /// JSON with non-finite numbers written as null.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    pub train_r2_mean: f64,
    pub train_r2_std: f64,
    pub cv_r2_mean: f64,
    pub cv_r2_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
    /// First size whose CV mean lies within one pooled std of the last.
    pub plateau: Option<usize>,
}

/// First point whose CV mean is within √((s_i² + s_last²)/2) of the last.
pub fn plateau_onset(points: &[CurvePoint]) -> Option<usize> {
    let last = points.last()?;
    points
        .iter()
        .find(|p| {
            let pooled = ((p.cv_r2_std.powi(2) + last.cv_r2_std.powi(2)) / 2.0).sqrt();
            (p.cv_r2_mean - last.cv_r2_mean).abs() <= pooled
        })
        .map(|p| p.size)
}

/// Nested subsamples of one seeded shuffle, each scored by k-fold.
pub fn learning_curve(spec: &RegressorSpec, table: &Table, sizes: &[usize], k: usize, seed: u64) -> Result<LearningCurve> {
    if sizes.is_empty() {
        return Err(Error::Size("learning curve needs at least one size".into()));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Size("learning-curve sizes must be strictly increasing".into()));
    }
    if let Some(&s) = sizes.iter().find(|&&s| s < 2 * k) {
        return Err(Error::Size(format!("size {s} is below 2·k = {}", 2 * k)));
    }
    if let Some(&s) = sizes.iter().find(|&&s| s > table.n_rows()) {
        return Err(Error::Size(format!("size {s} exceeds the {} available rows", table.n_rows())));
    }
    let mut order = table.canonical_order();
    order.shuffle(&mut rng::rng(rng::derive(seed, u64::MAX)));
    let points = sizes
        .par_iter()
        .map(|&size| {
            let sub = table.select(&order[..size]);
            let res = kfold(spec, &sub, k, seed)?;
            let (cv_r2_mean, cv_r2_std) = finite_mean_std(&res.fold_cv_r2);
            let (train_r2_mean, train_r2_std) = finite_mean_std(&res.fold_train_r2);
            Ok(CurvePoint {
                size,
                train_r2_mean,
                train_r2_std,
                cv_r2_mean,
                cv_r2_std,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LearningCurve {
        plateau: plateau_onset(&points),
        points,
    })
}

impl LearningCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["size", "train_r2_mean", "train_r2_std", "cv_r2_mean", "cv_r2_std", "plateau"])?;
        for p in &self.points {
            w.write_record([
                p.size.to_string(),
                fmt(p.train_r2_mean),
                fmt(p.train_r2_std),
                fmt(p.cv_r2_mean),
                fmt(p.cv_r2_std),
                (self.plateau == Some(p.size)).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<learning curve csv>", e))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_relative_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 3.53553, epsilon = 1e-5);
        assert_eq!(rmse(&[5.0], &[2.0]).unwrap(), 3.0);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn r2_examples() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -3.0);
        assert!(matches!(r2(&[4.0, 4.0], &[1.0, 2.0]), Err(Error::UndefinedR2)));
    }

    fn table(n: usize) -> Table {
        Table {
            feature_names: vec!["a".into(), "b".into()],
            target_names: vec!["y".into()],
            x: Array2::from_shape_fn((n, 2), |(i, j)| (i * (j + 1)) as f64 + 0.5 * j as f64),
            y: Array2::from_shape_fn((n, 1), |(i, _)| (i as f64 * 0.3).sin()),
            mask: None,
        }
    }

    #[test]
    fn folds_partition_rows() {
        let t = table(500);
        let folds = fold_indices(&t, 5, 9).unwrap();
        assert!(folds.iter().all(|f| f.len() == 100));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..500).collect::<Vec<_>>());
        let f = fold_indices(&table(13), 5, 1).unwrap();
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 3, 2, 2]);
    }

    #[test]
    fn leave_one_out_flags_every_fold() {
        let t = table(10);
        let res = kfold(&RegressorSpec::gbt(0), &t, 10, 3).unwrap();
        assert_eq!(res.fold_sizes, vec![1; 10]);
        assert_eq!(res.flagged.len(), 10);
        assert_eq!(res.targets[0].r2_folds, 0);
        assert!(res.targets[0].rmse_mean.is_finite());
    }

    #[test]
    fn kfold_ignores_row_order() {
        let t = table(40);
        let rev: Vec<usize> = (0..40).rev().collect();
        let spec = RegressorSpec::gbt(0);
        assert_eq!(kfold(&spec, &t, 5, 7).unwrap(), kfold(&spec, &t.select(&rev), 5, 7).unwrap());
    }

    #[test]
    fn plateau_rule() {
        let pt = |size, m, s| CurvePoint {
            size,
            train_r2_mean: 1.0,
            train_r2_std: 0.0,
            cv_r2_mean: m,
            cv_r2_std: s,
        };
        let pts = [pt(50, 0.5, 0.1), pt(100, 0.85, 0.05), pt(150, 0.88, 0.02), pt(200, 0.9, 0.01)];
        assert_eq!(plateau_onset(&pts), Some(200));
        let pts = [pt(50, 0.5, 0.1), pt(100, 0.89, 0.02), pt(150, 0.9, 0.01)];
        assert_eq!(plateau_onset(&pts), Some(100));
    }

    #[test]
    fn learning_curve_validates_sizes() {
        let t = table(30);
        let s = RegressorSpec::gbt(0);
        assert!(matches!(learning_curve(&s, &t, &[10, 40], 5, 0), Err(Error::Size(_))));
        assert!(matches!(learning_curve(&s, &t, &[8], 5, 0), Err(Error::Size(_))));
        let c = learning_curve(&s, &t, &[20], 5, 0).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.plateau, Some(20));
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..30).prop_flat_map(|n| (prop::collection::vec(-100.0..100.0f64, n), prop::collection::vec(-100.0..100.0f64, n)))
    }

    proptest! {
        #[test]
        fn rmse_symmetric_and_homogeneous((a, b) in vec_pair(), c in 0.01..50.0f64) {
            let ab = rmse(&a, &b).unwrap();
            prop_assert_eq!(ab, rmse(&b, &a).unwrap());
            prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
            prop_assert!(ab >= 0.0);
            let ca: Vec<f64> = a.iter().map(|v| c * v).collect();
            let cb: Vec<f64> = b.iter().map(|v| c * v).collect();
            prop_assert!((rmse(&ca, &cb).unwrap() - c * ab).abs() <= 1e-9 * (1.0 + c * ab));
        }

        #[test]
        fn r2_affine_invariant((a, b) in vec_pair(), alpha in 0.1..10.0f64, beta in -50.0..50.0f64) {
            prop_assume!(stats::std(&a) > 1e-3);
            let base = r2(&a, &b).unwrap();
            prop_assert!(base <= 1.0);
            let ta: Vec<f64> = a.iter().map(|v| alpha * v + beta).collect();
            let tb: Vec<f64> = b.iter().map(|v| alpha * v + beta).collect();
            let moved = r2(&ta, &tb).unwrap();
            prop_assert!((moved - base).abs() <= 1e-8 * (1.0 + base.abs()));
        }
    }
}
