//! Case sampling, dataset assembly and persistence, external-record merging,
//! min-max scaling, Pearson correlation and train/validation splitting.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jetmodel::{self, OracleConfig};
use crate::jetphys::{self, JetCase, JetGeometry, FEATURE_NAMES, TARGET_NAMES};
use crate::{rng, stats};

/// Uniform sampling bounds for each input, plus optional windows on the
/// Froude number and on the source length d·Fr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingRanges {
    pub theta: (f64, f64),
    pub h_p: (f64, f64),
    #[serde(rename = "H")]
    pub depth: (f64, f64),
    pub d: (f64, f64),
    #[serde(rename = "U0")]
    pub u0: (f64, f64),
    pub rho_b: (f64, f64),
    pub rho_a: (f64, f64),
    /// Accepted densimetric Froude numbers; `None` disables the window.
    pub froude: Option<(f64, f64)>,
    /// Largest accepted d·Fr in metres; `None` disables the cap.
    pub max_dfr: Option<f64>,
}

impl Default for SamplingRanges {
    fn default() -> Self {
        SamplingRanges {
            theta: (5.0, 80.0),
            h_p: (0.02, 5.89),
            depth: (0.11, 9.8),
            d: (0.002, 0.39),
            u0: (0.059, 4.96),
            rho_b: (1000.0, 1059.0),
            rho_a: (980.0, 1030.0),
            froude: Some((1.0, 94.0)),
            max_dfr: Some(5.0),
        }
    }
}

impl SamplingRanges {
    pub fn bounds(&self) -> [(f64, f64); 7] {
        [
            self.theta, self.h_p, self.depth, self.d, self.u0, self.rho_b, self.rho_a,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in FEATURE_NAMES.iter().zip(self.bounds()) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("range for {name} must satisfy min < max")));
            }
            if lo <= 0.0 {
                return Err(Error::Config(format!("range for {name} must be positive")));
            }
        }
        if self.theta.1 >= 90.0 {
            return Err(Error::Config("theta range must stay below 90 degrees".into()));
        }
        if let Some((lo, hi)) = self.froude {
            if !(lo < hi) {
                return Err(Error::Config("froude window must satisfy min < max".into()));
            }
        }
        if let Some(m) = self.max_dfr {
            if !(m > 0.0) {
                return Err(Error::Config("max_dfr must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn contains(&self, case: &JetCase) -> bool {
        self.bounds()
            .iter()
            .zip(case.to_array())
            .all(|(&(lo, hi), v)| v >= lo && v <= hi)
    }
}

/// Total draws allowed before sampling gives up.
pub const MAX_DRAWS: usize = 1_000_000;

/// Draws `n` unique cases uniformly over `ranges`, rejecting draws that
/// violate the physical constraints or fall outside the Froude and d·Fr
/// windows.
pub fn sample_cases(n: usize, ranges: &SamplingRanges, seed: u64) -> Result<Vec<JetCase>> {
    ranges.validate()?;
    let mut r = rng::rng(seed);
    let bounds = ranges.bounds();
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let mut draws = 0;
    while out.len() < n {
        if draws >= MAX_DRAWS {
            return Err(Error::SamplingExhausted {
                requested: n,
                found: out.len(),
                draws,
            });
        }
        draws += 1;
        let values = bounds.map(|(lo, hi)| lo + (hi - lo) * r.random::<f64>());
        let Ok(case) = JetCase::from_array(values) else {
            continue;
        };
        let fr = jetphys::derive(&case)?.fr;
        if ranges.froude.is_some_and(|(lo, hi)| fr < lo || fr > hi) {
            continue;
        }
        if ranges.max_dfr.is_some_and(|m| case.d * fr > m) {
            continue;
        }
        if seen.insert(case.key()) {
            out.push(case);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Oracle,
    External,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Oracle => "oracle",
            Provenance::External => "external",
        }
    }
}

/// One dataset row. Targets may be absent for external records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub case: JetCase,
    pub targets: [Option<f64>; 5],
    pub provenance: Provenance,
}

impl Record {
    pub fn complete(case: JetCase, geometry: JetGeometry, provenance: Provenance) -> Self {
        Record {
            case,
            targets: geometry.to_array().map(Some),
            provenance,
        }
    }
}

/// Column-named table of jet cases and their characteristic coordinates.
///
/// Invariants: every case is valid and no two rows share a case.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    rows: Vec<Record>,
}

pub const CSV_HEADER: [&str; 13] = [
    "theta", "h_p", "H", "d", "U0", "rho_b", "rho_a", "x_m", "z_m", "z_t", "x_r", "x_i",
    "provenance",
];

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a dataset, enforcing case validity and uniqueness.
    pub fn from_records(records: Vec<Record>) -> Result<Self> {
        let mut ds = Dataset::new();
        for (row, rec) in records.into_iter().enumerate() {
            ds.push(rec).map_err(|reason| Error::InvalidRecord { row, reason })?;
        }
        Ok(ds)
    }

    fn push(&mut self, rec: Record) -> std::result::Result<(), String> {
        rec.case.validate().map_err(|e| e.to_string())?;
        if rec.targets.iter().all(Option::is_none) {
            return Err("record carries no target".into());
        }
        if let Some(v) = rec.targets.iter().flatten().find(|v| !v.is_finite()) {
            return Err(format!("non-finite target {v}"));
        }
        if self.rows.iter().any(|r| r.case.key() == rec.case.key()) {
            return Err("duplicate jet case".into());
        }
        self.rows.push(rec);
        Ok(())
    }

    pub fn rows(&self) -> &[Record] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_names(&self) -> Vec<String> {
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
    }

    pub fn target_names(&self) -> Vec<String> {
        TARGET_NAMES.iter().map(|s| s.to_string()).collect()
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i]).collect(),
        }
    }

    /// Row order sorted lexicographically on the inputs.
    pub fn canonical_order(&self) -> Vec<usize> {
        canonical_order(&self.rows.iter().map(|r| r.case.to_array().to_vec()).collect::<Vec<_>>())
    }

    pub fn to_table(&self) -> Table {
        let n = self.len();
        let mut x = Array2::zeros((n, 7));
        let mut y = Array2::zeros((n, 5));
        let mut mask = Array2::from_elem((n, 5), true);
        for (i, rec) in self.rows.iter().enumerate() {
            for (j, v) in rec.case.to_array().into_iter().enumerate() {
                x[[i, j]] = v;
            }
            for (j, t) in rec.targets.iter().enumerate() {
                match t {
                    Some(v) => y[[i, j]] = *v,
                    None => {
                        y[[i, j]] = f64::NAN;
                        mask[[i, j]] = false;
                    }
                }
            }
        }
        let complete = mask.iter().all(|&m| m);
        Table {
            feature_names: self.feature_names(),
            target_names: self.target_names(),
            x,
            y,
            mask: (!complete).then_some(mask),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for rec in &self.rows {
            let mut fields: Vec<String> = rec.case.to_array().iter().map(|v| v.to_string()).collect();
            fields.extend(rec.targets.iter().map(|t| t.map(|v| v.to_string()).unwrap_or_default()));
            fields.push(rec.provenance.as_str().to_string());
            w.write_record(&fields)?;
        }
        w.flush().map_err(|e| Error::io("<dataset>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Parses the canonical dataset CSV; the header must match exactly.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rd.headers()?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::Data(format!(
                "unexpected dataset header `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut records = Vec::new();
        for (row, result) in rd.records().enumerate() {
            let rec = result?;
            let bad = |reason: String| Error::InvalidRecord { row, reason };
            let mut inputs = [0.0; 7];
            for (j, slot) in inputs.iter_mut().enumerate() {
                *slot = parse_field(&rec[j]).map_err(bad)?.ok_or_else(|| {
                    bad(format!("missing input {}", FEATURE_NAMES[j]))
                })?;
            }
            let mut targets = [None; 5];
            for (j, slot) in targets.iter_mut().enumerate() {
                *slot = parse_field(&rec[7 + j]).map_err(bad)?;
            }
            let provenance = match &rec[12] {
                "oracle" => Provenance::Oracle,
                "external" => Provenance::External,
                other => return Err(bad(format!("unknown provenance `{other}`"))),
            };
            let case = JetCase::from_array(inputs).map_err(|e| bad(e.to_string()))?;
            records.push(Record {
                case,
                targets,
                provenance,
            });
        }
        Dataset::from_records(records)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

fn parse_field(field: &str) -> std::result::Result<Option<f64>, String> {
    let t = field.trim();
    if t.is_empty() {
        return Ok(None);
    }
    let v: f64 = t.parse().map_err(|_| format!("cannot parse `{t}` as a number"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value `{t}`"));
    }
    Ok(Some(v))
}

/// Lexicographic (total order) sort of row vectors, returning indices.
pub fn canonical_order(rows: &[Vec<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&a, &b| {
        rows[a]
            .iter()
            .zip(&rows[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Per-case oracle failure collected during generation.
#[derive(Debug)]
pub struct CaseFailure {
    pub index: usize,
    pub case: JetCase,
    pub error: Error,
}

#[derive(Debug)]
pub struct Generated {
    pub dataset: Dataset,
    pub failures: Vec<CaseFailure>,
}

/// Minimum share of cases the oracle must resolve for generation to succeed.
pub const MIN_SUCCESS_RATE: f64 = 0.95;

/// Runs the oracle on every case. Noise for case `i` is seeded from
/// `(noise_seed, i)`, so results do not depend on scheduling.
pub fn generate(cases: &[JetCase], config: &OracleConfig, noise_seed: Option<u64>) -> Result<Generated> {
    let outcomes: Vec<_> = cases
        .par_iter()
        .enumerate()
        .map(|(i, case)| {
            let seed = noise_seed.map(|s| rng::derive(s, i as u64));
            jetmodel::oracle(case, config, seed)
        })
        .collect();
    let mut records = Vec::with_capacity(cases.len());
    let mut failures = Vec::new();
    for (index, (case, outcome)) in cases.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(g) => records.push(Record::complete(*case, g, Provenance::Oracle)),
            Err(error) => failures.push(CaseFailure {
                index,
                case: *case,
                error,
            }),
        }
    }
    if !cases.is_empty() && (records.len() as f64) < MIN_SUCCESS_RATE * cases.len() as f64 {
        let first = &failures[0];
        return Err(Error::OracleFailures {
            failed: failures.len(),
            total: cases.len(),
            first: format!("case {} {:?}: {}", first.index, first.case, first.error),
        });
    }
    Ok(Generated {
        dataset: Dataset::from_records(records)?,
        failures,
    })
}

/// An experimental record: all seven inputs and any subset of targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalRecord {
    pub inputs: [f64; 7],
    pub targets: [Option<f64>; 5],
}

/// Parses an external table. Columns are matched by name; the seven input
/// columns are required, target columns are optional and may hold empty
/// fields, other columns are ignored.
pub fn read_external_csv<R: Read>(input: R) -> Result<Vec<ExternalRecord>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(input);
    let header = rd.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let mut input_cols = [0usize; 7];
    for (slot, name) in input_cols.iter_mut().zip(FEATURE_NAMES) {
        *slot = find(name).ok_or_else(|| Error::Data(format!("external table lacks column `{name}`")))?;
    }
    let target_cols = TARGET_NAMES.map(find);
    if target_cols.iter().all(Option::is_none) {
        return Err(Error::Data("external table has no target column".into()));
    }
    let mut out = Vec::new();
    for (row, result) in rd.records().enumerate() {
        let rec = result?;
        let bad = |reason: String| Error::InvalidRecord { row, reason };
        let mut inputs = [0.0; 7];
        for (j, &c) in input_cols.iter().enumerate() {
            inputs[j] = parse_field(&rec[c])
                .map_err(bad)?
                .ok_or_else(|| bad(format!("missing input {}", FEATURE_NAMES[j])))?;
        }
        let mut targets = [None; 5];
        for (j, col) in target_cols.iter().enumerate() {
            if let Some(c) = col {
                targets[j] = parse_field(&rec[*c]).map_err(bad)?;
            }
        }
        out.push(ExternalRecord { inputs, targets });
    }
    Ok(out)
}

/// Appends external records, tagging them `external`.
pub fn merge_external(dataset: &Dataset, records: &[ExternalRecord]) -> Result<Dataset> {
    let mut merged = dataset.clone();
    for (row, rec) in records.iter().enumerate() {
        let bad = |reason: String| Error::InvalidRecord { row, reason };
        let case = JetCase::from_array(rec.inputs).map_err(|e| bad(e.to_string()))?;
        merged
            .push(Record {
                case,
                targets: rec.targets,
                provenance: Provenance::External,
            })
            .map_err(bad)?;
    }
    Ok(merged)
}

/// Generic numeric table consumed by models and evaluation.
///
/// `y` holds NaN wherever `mask` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub mask: Option<Array2<bool>>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn select(&self, indices: &[usize]) -> Table {
        let ax = ndarray::Axis(0);
        Table {
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
            x: self.x.select(ax, indices),
            y: self.y.select(ax, indices),
            mask: self.mask.as_ref().map(|m| m.select(ax, indices)),
        }
    }

    pub fn observed(&self, row: usize, target: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[[row, target]])
    }

    /// Observed (row, value) pairs of one target.
    pub fn target_column(&self, target: usize) -> (Vec<usize>, Vec<f64>) {
        (0..self.n_rows())
            .filter(|&i| self.observed(i, target))
            .map(|i| (i, self.y[[i, target]]))
            .unzip()
    }

    pub fn canonical_order(&self) -> Vec<usize> {
        canonical_order(&self.x.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }
}

/// Per-column (min, max) of a min-max scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub names: Vec<String>,
    pub ranges: Vec<(f64, f64)>,
}

impl ScalerParams {
    /// Fits over the finite entries of each column. Requires ≥ 2 rows.
    pub fn fit(names: &[String], data: ArrayView2<f64>) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::Size(format!("scaler needs >= 2 rows, got {}", data.nrows())));
        }
        if names.len() != data.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} names for {} columns",
                names.len(),
                data.ncols()
            )));
        }
        let ranges = data
            .columns()
            .into_iter()
            .zip(names)
            .map(|(col, name)| {
                let (lo, hi) = col
                    .iter()
                    .filter(|v| v.is_finite())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                if lo > hi {
                    Err(Error::Data(format!("column `{name}` has no finite values")))
                } else {
                    Ok((lo, hi))
                }
            })
            .collect::<Result<_>>()?;
        Ok(ScalerParams {
            names: names.to_vec(),
            ranges,
        })
    }

    pub fn fit_dataset(dataset: &Dataset, columns: &[&str]) -> Result<Self> {
        let table = dataset.to_table();
        let all: Vec<String> = table.feature_names.iter().chain(&table.target_names).cloned().collect();
        let full = ndarray::concatenate![ndarray::Axis(1), table.x, table.y];
        let idx = columns
            .iter()
            .map(|c| all.iter().position(|n| n == c).ok_or_else(|| Error::UnknownFeature(c.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let names: Vec<String> = idx.iter().map(|&i| all[i].clone()).collect();
        Self::fit(&names, full.select(ndarray::Axis(1), &idx).view())
    }

    /// (v − min)/(max − min); constant columns map to 0.
    pub fn apply_value(&self, col: usize, v: f64) -> f64 {
        let (lo, hi) = self.ranges[col];
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.0
        }
    }

    pub fn invert_value(&self, col: usize, v: f64) -> f64 {
        let (lo, hi) = self.ranges[col];
        if hi > lo {
            v * (hi - lo) + lo
        } else {
            lo
        }
    }

    pub fn apply(&self, data: ArrayView2<f64>) -> Array2<f64> {
        let mut out = data.to_owned();
        for ((_, j), v) in out.indexed_iter_mut() {
            *v = self.apply_value(j, *v);
        }
        out
    }

    pub fn invert(&self, data: ArrayView2<f64>) -> Array2<f64> {
        let mut out = data.to_owned();
        for ((_, j), v) in out.indexed_iter_mut() {
            *v = self.invert_value(j, *v);
        }
        out
    }

    pub fn constant_columns(&self) -> Vec<&str> {
        self.names
            .iter()
            .zip(&self.ranges)
            .filter(|(_, (lo, hi))| hi <= lo)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scaler serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

// Serialized as {name: [min, max], ...} in column order.
impl Serialize for ScalerParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(self.names.len()))?;
        for (n, (lo, hi)) in self.names.iter().zip(&self.ranges) {
            m.serialize_entry(n, &[lo, hi])?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for ScalerParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
        let mut names = Vec::with_capacity(map.len());
        let mut ranges = Vec::with_capacity(map.len());
        for (k, v) in map {
            let [lo, hi]: [f64; 2] = serde_json::from_value(v).map_err(serde::de::Error::custom)?;
            if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
                return Err(serde::de::Error::custom(format!("invalid range for `{k}`")));
            }
            names.push(k);
            ranges.push((lo, hi));
        }
        Ok(ScalerParams { names, ranges })
    }
}

/// Pearson correlation matrix over the given columns (rows with any
/// absent value in a pair are skipped for that pair).
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub names: Vec<String>,
    pub matrix: Array2<f64>,
}

pub fn pearson_matrix(dataset: &Dataset) -> Result<Correlation> {
    let table = dataset.to_table();
    let names: Vec<String> = table.feature_names.iter().chain(&table.target_names).cloned().collect();
    let data = ndarray::concatenate![ndarray::Axis(1), table.x, table.y];
    pearson_columns(&names, data.view())
}

pub fn pearson_columns(names: &[String], data: ArrayView2<f64>) -> Result<Correlation> {
    if data.nrows() < 3 {
        return Err(Error::Size(format!("correlation needs >= 3 rows, got {}", data.nrows())));
    }
    let p = data.ncols();
    let mut matrix = Array2::from_elem((p, p), 0.0);
    for a in 0..p {
        matrix[[a, a]] = 1.0;
        for b in 0..p {
            if b == a {
                continue;
            }
            let (xa, xb): (Vec<f64>, Vec<f64>) = data
                .rows()
                .into_iter()
                .filter(|r| r[a].is_finite() && r[b].is_finite())
                .map(|r| (r[a], r[b]))
                .unzip();
            if xa.len() < 3 {
                return Err(Error::Size(format!("columns `{}` and `{}` share < 3 rows", names[a], names[b])));
            }
            if b < a {
                continue;
            }
            let c = stats::pearson(&xa, &xb).ok_or_else(|| {
                let constant = if stats::std(&xa) == 0.0 { &names[a] } else { &names[b] };
                Error::UndefinedCorrelation(constant.clone())
            })?;
            matrix[[a, b]] = c;
            matrix[[b, a]] = c;
        }
    }
    Ok(Correlation {
        names: names.to_vec(),
        matrix,
    })
}

/// Disjoint (train/test, validation) index sets; sizes ⌊fraction·n⌋ and the
/// remainder. The shuffle acts on the canonical row order.
pub fn split_indices(canonical: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx = canonical.to_vec();
    idx.shuffle(&mut rng::rng(seed));
    let n_train = (fraction * idx.len() as f64 + 1e-9).floor() as usize;
    let val = idx.split_off(n_train);
    (idx, val)
}

pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if dataset.len() < 10 {
        return Err(Error::Size(format!("split needs >= 10 rows, got {}", dataset.len())));
    }
    let (a, b) = split_indices(&dataset.canonical_order(), fraction, seed);
    Ok((dataset.subset(&a), dataset.subset(&b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn small_dataset(n: usize, seed: u64) -> Dataset {
        let cases = sample_cases(n, &SamplingRanges::default(), seed).unwrap();
        Dataset::from_records(
            cases
                .into_iter()
                .enumerate()
                .map(|(i, c)| {
                    let g = JetGeometry::from_array([1.0, 2.0, 3.0, 4.0, 5.0].map(|v| v + i as f64));
                    Record::complete(c, g, Provenance::Oracle)
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn sample_table_defaults() {
        let cases = sample_cases(500, &SamplingRanges::default(), 1).unwrap();
        assert_eq!(cases.len(), 500);
        let keys: HashSet<_> = cases.iter().map(|c| c.key()).collect();
        assert_eq!(keys.len(), 500);
        for c in &cases {
            assert!((5.0..=80.0).contains(&c.theta));
            assert!((0.002..=0.39).contains(&c.d));
            assert!(c.rho_b > c.rho_a && c.depth >= 2.0 * c.h_p);
        }
        assert_eq!(cases, sample_cases(500, &SamplingRanges::default(), 1).unwrap());
    }

    #[test]
    fn infeasible_density_ranges_exhaust() {
        let ranges = SamplingRanges {
            rho_b: (990.0, 995.0),
            rho_a: (1000.0, 1010.0),
            ..SamplingRanges::default()
        };
        assert!(matches!(
            sample_cases(5, &ranges, 0),
            Err(Error::SamplingExhausted { found: 0, .. })
        ));
    }

    #[test]
    fn empty_generation() {
        let g = generate(&[], &OracleConfig::default(), Some(1)).unwrap();
        assert!(g.dataset.is_empty());
    }

    #[test]
    fn csv_roundtrip_is_byte_identical() {
        let ds = small_dataset(20, 4);
        let mut a = Vec::new();
        ds.write_csv(&mut a).unwrap();
        let back = Dataset::read_csv(a.as_slice()).unwrap();
        assert_eq!(back, ds);
        let mut b = Vec::new();
        back.write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a)
            .unwrap()
            .starts_with("theta,h_p,H,d,U0,rho_b,rho_a,x_m,z_m,z_t,x_r,x_i,provenance\n"));
    }

    #[test]
    fn merge_external_rules() {
        let ds = small_dataset(10, 2);
        assert_eq!(merge_external(&ds, &[]).unwrap(), ds);

        let only_xm = ExternalRecord {
            inputs: [45.0, 0.07, 0.15, 0.0058, 0.515, 1034.0, 997.0],
            targets: [Some(0.119), None, None, None, None],
        };
        let merged = merge_external(&ds, &[only_xm]).unwrap();
        assert_eq!(merged.len(), 11);
        let last = merged.rows().last().unwrap();
        assert_eq!(last.provenance, Provenance::External);
        let t = merged.to_table();
        let mask = t.mask.as_ref().unwrap();
        assert!(mask[[10, 0]] && !mask[[10, 1]]);
        assert_eq!(t.target_column(0).0.len(), 11);
        assert_eq!(t.target_column(1).0.len(), 10);

        let dup = ExternalRecord {
            inputs: ds.rows()[3].case.to_array(),
            targets: [Some(1.0); 5],
        };
        assert!(matches!(
            merge_external(&ds, &[only_xm, dup]),
            Err(Error::InvalidRecord { row: 1, .. })
        ));
        let mut light = only_xm;
        light.inputs[5] = 990.0;
        assert!(matches!(merge_external(&ds, &[light]), Err(Error::InvalidRecord { row: 0, .. })));
    }

    #[test]
    fn external_csv_by_column_name() {
        let text = "U0,theta,h_p,H,d,rho_b,rho_a,x_m,source\n0.515,45,0.07,0.15,0.0058,1034,997,0.119,lab\n";
        let recs = read_external_csv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].inputs[4], 0.515);
        assert_eq!(recs[0].targets, [Some(0.119), None, None, None, None]);
        assert!(read_external_csv("theta,h_p\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn scaler_examples() {
        let names = vec!["a".to_string(), "b".to_string()];
        let data = array![[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]];
        let s = ScalerParams::fit(&names, data.view()).unwrap();
        let t = s.apply(data.view());
        assert_eq!(t.column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(t.column(1).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(s.invert(t.view()), data);
        assert_eq!(s.constant_columns(), vec!["b"]);
        let json = s.to_json();
        assert!(json.find("\"a\"").unwrap() < json.find("\"b\"").unwrap());
        assert_eq!(ScalerParams::from_json(&json).unwrap(), s);
        assert!(ScalerParams::fit(&names, data.slice(ndarray::s![..1, ..])).is_err());
    }

    #[test]
    fn pearson_examples() {
        let names: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let data = array![[1.0, -1.0, 1.0], [2.0, -2.0, 1.0], [4.0, -4.0, 1.0]];
        match pearson_columns(&names, data.view()) {
            Err(Error::UndefinedCorrelation(c)) => assert_eq!(c, "z"),
            other => panic!("{other:?}"),
        }
        let c = pearson_columns(&names[..2], data.slice(ndarray::s![.., ..2])).unwrap();
        assert_eq!(c.matrix[[0, 0]], 1.0);
        assert!((c.matrix[[0, 1]] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_sizes() {
        let ds = small_dataset(10, 9);
        let (a, b) = split(&ds, 0.9, 3).unwrap();
        assert_eq!((a.len(), b.len()), (9, 1));
        let (a, b) = split_indices(&(0..500).collect::<Vec<_>>(), 0.9, 3);
        assert_eq!((a.len(), b.len()), (450, 50));
        assert!(split(&small_dataset(9, 1), 0.9, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn samples_respect_bounds(seed in 0u64..1000) {
            let ranges = SamplingRanges::default();
            for c in sample_cases(625, &ranges, seed).unwrap() {
                prop_assert!(ranges.contains(&c));
                let fr = jetphys::derive(&c).unwrap().fr;
                prop_assert!((1.0..=94.0).contains(&fr));
            }
        }

        #[test]
        fn scaler_roundtrip(rows in proptest::collection::vec(proptest::array::uniform3(-1e3..1e3f64), 2..40)) {
            let names: Vec<String> = (0..3).map(|i| i.to_string()).collect();
            let data = Array2::from_shape_fn((rows.len(), 3), |(i, j)| rows[i][j]);
            let s = ScalerParams::fit(&names, data.view()).unwrap();
            let back = s.invert(s.apply(data.view()).view());
            for (a, b) in back.iter().zip(data.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn pearson_is_symmetric_unit_diagonal(seed in 0u64..500) {
            let ds = small_dataset(12, seed);
            // targets are an affine function of row index; keep the inputs only
            let t = ds.to_table();
            let c = pearson_columns(&t.feature_names, t.x.view()).unwrap();
            for a in 0..7 {
                prop_assert_eq!(c.matrix[[a, a]], 1.0);
                for b in 0..7 {
                    prop_assert_eq!(c.matrix[[a, b]], c.matrix[[b, a]]);
                    prop_assert!(c.matrix[[a, b]].abs() <= 1.0);
                }
            }
        }

        #[test]
        fn split_is_partition(n in 10usize..300, seed in 0u64..1000) {
            let canon: Vec<usize> = (0..n).collect();
            let (a, b) = split_indices(&canon, 0.9, seed);
            prop_assert_eq!(a.len(), n * 9 / 10);
            let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
            all.sort();
            prop_assert_eq!(all, canon.clone());
            prop_assert_eq!((a, b), split_indices(&canon, 0.9, seed));
        }
    }
}
