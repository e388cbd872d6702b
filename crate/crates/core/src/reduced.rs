//! Three-feature (θ, Fr, d) surrogate and its comparison with the full model.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, Table};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport};
use crate::explain::{Attribution, DependenceSeries};
use crate::jetphys::{self, JetCase, GRAVITY};
use crate::models::{self, Hyperparameters, MlpParams, RegressorSpec, TrainedModel};

pub const REDUCED_FEATURES: [&str; 3] = ["theta", "Fr", "d"];
pub const REDUCED_NEURONS: usize = 20;

/// Replaces the seven inputs by (θ, Fr, d); targets and mask are kept.
pub fn compress(dataset: &Dataset) -> Result<Table> {
    let full = dataset.to_table();
    let mut x = Array2::zeros((dataset.len(), 3));
    for (i, rec) in dataset.rows().iter().enumerate() {
        let q = jetphys::derive(&rec.case)?;
        x[[i, 0]] = rec.case.theta;
        x[[i, 1]] = q.fr;
        x[[i, 2]] = rec.case.d;
    }
    Ok(Table {
        feature_names: REDUCED_FEATURES.iter().map(|s| s.to_string()).collect(),
        target_names: full.target_names,
        x,
        y: full.y,
        mask: full.mask,
    })
}

/// A case with the given (θ, Fr, d) that borrows h_p, H and both densities
/// from `template` and solves the Froude number for U0.
pub fn synthesize_case(theta: f64, fr: f64, d: f64, template: &JetCase) -> Result<JetCase> {
    let g0p = GRAVITY * (template.rho_b - template.rho_a).abs() / template.rho_a;
    let u0 = fr * (g0p * d).sqrt();
    JetCase::new(theta, template.h_p, template.depth, d, u0, template.rho_b, template.rho_a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedComparison {
    pub full: EvalReport,
    pub reduced: EvalReport,
}

pub fn reduced_spec(seed: u64) -> RegressorSpec {
    RegressorSpec::new(
        Hyperparameters::Mlp(MlpParams {
            neurons: REDUCED_NEURONS,
            ..Default::default()
        }),
        seed,
    )
}

/// Train/validation split, k-fold and validation scores of one spec.
pub fn evaluate(spec: &RegressorSpec, train: &Table, validation: &Table, k: usize, seed: u64) -> Result<(TrainedModel, EvalReport)> {
    let kf = eval::kfold(spec, train, k, seed)?;
    let model = models::fit(spec, train)?;
    let val = eval::validate(&model, validation)?;
    Ok((model, EvalReport::new(spec.family(), val, kf)))
}

/// Default MLP against the 20-neuron reduced MLP under identical
/// split and fold seeds.
pub fn reduced_fit_eval(dataset: &Dataset, seed: u64) -> Result<ReducedComparison> {
    if dataset.len() < 100 {
        return Err(Error::Size(format!("reduced comparison needs ≥ 100 rows, got {}", dataset.len())));
    }
    let (train_idx, val_idx) = dataset::split_indices(&dataset.canonical_order(), 0.9, seed);
    let full = dataset.to_table();
    let reduced = compress(dataset)?;
    let (_, full_report) = evaluate(
        &RegressorSpec::mlp(seed),
        &full.select(&train_idx),
        &full.select(&val_idx),
        5,
        seed,
    )?;
    let (_, reduced_report) = evaluate(
        &reduced_spec(seed),
        &reduced.select(&train_idx),
        &reduced.select(&val_idx),
        5,
        seed,
    )?;
    Ok(ReducedComparison {
        full: full_report,
        reduced: reduced_report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfrDependence {
    pub theta: Vec<DependenceSeries>,
    /// (d·Fr, φ(Fr) + φ(d)) per target, sorted by d·Fr.
    pub dfr: Vec<DependenceSeries>,
}

/// θ and d·Fr dependence series of a reduced-model attribution. The d·Fr
/// attribution is the summed attribution of its two factors.
pub fn dfr_dependence(attr: &Attribution) -> Result<DfrDependence> {
    let jf = attr.feature_index("Fr")?;
    let jd = attr.feature_index("d")?;
    let theta = crate::explain::dependence_data(attr, "theta")?;
    let dfr = attr
        .target_names
        .iter()
        .enumerate()
        .map(|(t, target)| {
            let mut points: Vec<(f64, f64)> = (0..attr.n_instances())
                .map(|i| {
                    let v = attr.feature_values[[i, jf]] * attr.feature_values[[i, jd]];
                    (v, attr.phi[t][[i, jf]] + attr.phi[t][[i, jd]])
                })
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            DependenceSeries {
                target: target.clone(),
                feature: "dFr".into(),
                points,
            }
        })
        .collect();
    Ok(DfrDependence { theta, dfr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Provenance, Record};
    use crate::jetphys::JetGeometry;

    fn validation_case() -> JetCase {
        JetCase::new(45.0, 0.07, 0.15, 0.0058, 0.515, 1034.0, 997.0).unwrap()
    }

    fn dataset(cases: &[JetCase]) -> Dataset {
        Dataset::from_records(
            cases
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let g = JetGeometry::from_array([1.0, 2.0, 3.0, 4.0, 5.0].map(|v| v * (i + 1) as f64));
                    Record::complete(*c, g, Provenance::Oracle)
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn validation_row_compresses() {
        let t = compress(&dataset(&[validation_case()])).unwrap();
        assert_eq!(t.x[[0, 0]], 45.0);
        assert!((t.x[[0, 1]] - 11.207).abs() < 1e-3);
        assert_eq!(t.x[[0, 2]], 0.0058);
        assert_eq!(t.y.row(0).to_vec(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn equal_froude_rows_collapse() {
        let a = validation_case();
        let b = synthesize_case(45.0, jetphys::derive(&a).unwrap().fr, a.d, &JetCase { rho_b: 1050.0, rho_a: 990.0, ..a }).unwrap();
        assert_ne!(a.u0, b.u0);
        let t = compress(&dataset(&[a, b])).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert!((t.x[[0, 1]] - t.x[[1, 1]]).abs() < 1e-12);
    }

    #[test]
    fn compress_round_trip_is_idempotent() {
        let cases = dataset::sample_cases(40, &dataset::SamplingRanges::default(), 4).unwrap();
        let first = compress(&dataset(&cases)).unwrap();
        let rebuilt: Vec<JetCase> = (0..40)
            .map(|i| synthesize_case(first.x[[i, 0]], first.x[[i, 1]], first.x[[i, 2]], &cases[(i + 7) % 40]).unwrap())
            .collect();
        let second = compress(&dataset(&rebuilt)).unwrap();
        for (a, b) in first.x.iter().zip(second.x.iter()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
