//! `jetsurro` command line: generate, train, explain, report.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input or
//! configuration, 3 empty selection. Failures print one JSON object on
//! stderr.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, bail};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, SamplingRanges, Table};
use crate::eval::{self, EvalReport};
use crate::explain::{self, KernelConfig, ShapMode};
use crate::jetmodel::{self, OracleConfig};
use crate::jetphys::FEATURE_NAMES;
use crate::models::grid::{self, Grid};
use crate::models::{self, ForestParams, GbtParams, Hyperparameters, MlpParams, RegressorSpec, TrainedModel};
use crate::reduced::{self, REDUCED_FEATURES};
use crate::report::{self, Format};
use crate::{Error, rng, stats};

// Seed streams derived from the top-level seed.
const STREAM_SAMPLE: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_FOLDS: u64 = 3;
const STREAM_MODEL: u64 = 4;
const STREAM_BACKGROUND: u64 = 5;
const STREAM_KERNEL: u64 = 6;

/// Run configuration. Every field has a default, so `{}` is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub generate: GenerateConfig,
    pub train: TrainConfig,
    pub explain: ExplainConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 42,
            generate: GenerateConfig::default(),
            train: TrainConfig::default(),
            explain: ExplainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub n: usize,
    pub ranges: SamplingRanges,
    pub oracle: OracleConfig,
    /// Adds the oracle's multiplicative output noise.
    pub noise: bool,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            n: 500,
            ranges: SamplingRanges::default(),
            oracle: OracleConfig::default(),
            noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Share of rows used for training; the rest is held out for validation.
    pub train_fraction: f64,
    pub folds: usize,
    pub mlp: MlpParams,
    pub random_forest: ForestParams,
    pub gbt: GbtParams,
    /// Training-set sizes for an optional learning curve.
    pub learning_curve: Option<Vec<usize>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            train_fraction: 0.9,
            folds: 5,
            mlp: MlpParams::default(),
            random_forest: ForestParams::default(),
            gbt: GbtParams::default(),
            learning_curve: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub background_rows: usize,
    pub mode: ShapMode,
    pub n_coalitions: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            background_rows: explain::DEFAULT_BACKGROUND_ROWS,
            mode: ShapMode::Auto,
            n_coalitions: 2048,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> crate::Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> crate::Result<()> {
        self.generate.ranges.validate()?;
        let t = &self.train;
        if !(t.train_fraction > 0.0 && t.train_fraction < 1.0) {
            return Err(Error::Config("train.train_fraction must lie in (0, 1)".into()));
        }
        if t.folds < 2 {
            return Err(Error::Config("train.folds must be at least 2".into()));
        }
        Hyperparameters::Mlp(t.mlp.clone()).validate()?;
        Hyperparameters::RandomForest(t.random_forest.clone()).validate()?;
        Hyperparameters::Gbt(t.gbt.clone()).validate()?;
        if self.explain.background_rows == 0 {
            return Err(Error::Config("explain.background_rows must be positive".into()));
        }
        Ok(())
    }

    pub fn spec(&self, family: Family) -> RegressorSpec {
        let hyper = match family {
            Family::Mlp => Hyperparameters::Mlp(self.train.mlp.clone()),
            Family::Rf => Hyperparameters::RandomForest(self.train.random_forest.clone()),
            Family::Gbt => Hyperparameters::Gbt(self.train.gbt.clone()),
        };
        RegressorSpec::new(hyper, rng::derive(self.seed, STREAM_MODEL))
    }
}

/// Errors raised by the command layer itself.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("no instances match regime `{0}`")]
    EmptySelection(String),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "jetsurro", version, about = "Surrogate models and explanations for inclined dense jets")]
pub struct Cli {
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, global = true, env = "JETSURRO_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample cases, run the jet model and write a dataset CSV.
    Generate(GenerateArgs),
    /// Fit a regressor and write the model plus evaluation files.
    Train(TrainArgs),
    /// Attribute model predictions and write plot-source CSVs.
    Explain(ExplainArgs),
    /// Render an HTML or Markdown report from a directory of outputs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for one noise-free centerline CSV per case.
    #[arg(long)]
    pub centerlines: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Mlp,
    #[value(alias = "random_forest")]
    Rf,
    Gbt,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub family: Family,
    /// Hyperparameter grid searched by k-fold CV on the training split.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train on (theta, Fr, d) instead of the seven raw inputs.
    #[arg(long)]
    pub reduced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Regime {
    Coanda,
    Shallow,
}

impl Regime {
    fn name(self) -> &'static str {
        match self {
            Regime::Coanda => "coanda",
            Regime::Shallow => "shallow",
        }
    }
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Row index for a single-instance waterfall.
    #[arg(long)]
    pub instance: Option<usize>,
    /// Waterfalls for every row in this regime.
    #[arg(long, value_enum)]
    pub regime: Option<Regime>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> anyhow::Result<Config> {
    let mut cfg = match path {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(f))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn out_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Min, max, mean and std per column as an aligned text table.
pub fn summary_table(table: &Table) -> String {
    let names: Vec<&String> = table.feature_names.iter().chain(&table.target_names).collect();
    let nf = table.feature_names.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(names.len());
    for j in 0..nf {
        cols.push(table.x.column(j).to_vec());
    }
    for t in 0..table.target_names.len() {
        cols.push(table.target_column(t).1);
    }
    let stat = |name: &str, f: &dyn Fn(&[f64]) -> f64| {
        let mut line = format!("{name:<9}");
        for c in &cols {
            let v = if c.is_empty() { f64::NAN } else { f(c) };
            line += &format!(" {v:>11.4}");
        }
        line
    };
    let mut out = format!("{:<9}", "");
    for n in &names {
        out += &format!(" {n:>11}");
    }
    out.push('\n');
    let min = |c: &[f64]| c.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |c: &[f64]| c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for line in [
        stat("Min", &min),
        stat("Max", &max),
        stat("Average", &stats::mean),
        stat("Std dev", &stats::std),
    ] {
        out += &line;
        out.push('\n');
    }
    out
}

fn generate(args: &GenerateArgs) -> anyhow::Result<()> {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let g = &cfg.generate;
    let cases = dataset::sample_cases(g.n, &g.ranges, rng::derive(cfg.seed, STREAM_SAMPLE))?;
    let noise = g.noise.then(|| rng::derive(cfg.seed, STREAM_NOISE));
    let generated = dataset::generate(&cases, &g.oracle, noise)?;
    for f in &generated.failures {
        eprintln!("warning: case {} skipped: {}", f.index, f.error);
    }
    let ds = generated.dataset;
    ds.save_csv(&args.out)?;
    if let Some(dir) = &args.centerlines {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let failed: Vec<usize> = generated.failures.iter().map(|f| f.index).collect();
        let runs: Vec<_> = cases
            .par_iter()
            .enumerate()
            .filter(|(i, _)| !failed.contains(i))
            .map(|(i, c)| (i, jetmodel::oracle_run(c, &g.oracle, None)))
            .collect();
        for (i, run) in runs {
            run?.centerline.save_csv(&dir.join(format!("case_{i:05}.csv")))?;
        }
    }
    println!("{} rows written to {}", ds.len(), args.out.display());
    if !ds.is_empty() {
        print!("{}", summary_table(&ds.to_table()));
    }
    Ok(())
}

fn load_table(path: &Path, reduced: bool) -> anyhow::Result<(Dataset, Table)> {
    let ds = Dataset::load_csv(path).with_context(|| format!("loading dataset {}", path.display()))?;
    let table = if reduced { reduced::compress(&ds)? } else { ds.to_table() };
    Ok((ds, table))
}

fn write_predictions(path: &Path, model: &TrainedModel, table: &Table, rows: &[usize]) -> anyhow::Result<()> {
    let pred = model.predict(table.x.view())?;
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["target", "row", "observed", "predicted"])?;
    for (t, name) in table.target_names.iter().enumerate() {
        for (i, &row) in rows.iter().enumerate() {
            if table.observed(i, t) {
                w.write_record([name.clone(), row.to_string(), table.y[[i, t]].to_string(), pred[[i, t]].to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn train(args: &TrainArgs) -> anyhow::Result<()> {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let (ds, table) = load_table(&args.data, args.reduced)?;
    let (train_idx, val_idx) = dataset::split_indices(&ds.canonical_order(), cfg.train.train_fraction, rng::derive(cfg.seed, STREAM_SPLIT));
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::Size(format!("{} rows cannot be split into training and validation sets", ds.len())).into());
    }
    let (train_t, val_t) = (table.select(&train_idx), table.select(&val_idx));
    let fold_seed = rng::derive(cfg.seed, STREAM_FOLDS);
    let k = cfg.train.folds;
    let dir = out_dir(&args.out);

    let mut spec = cfg.spec(args.family);
    if let Some(grid_path) = &args.grid {
        let text = fs::read_to_string(grid_path).map_err(|e| Error::io(grid_path, e))?;
        let grid = Grid::from_json(&text).with_context(|| format!("parsing grid {}", grid_path.display()))?;
        let result = grid::grid_search(&spec, &grid, &train_t, k, fold_seed)?;
        let mut w = csv::Writer::from_writer(create(&dir.join("grid_search.csv"))?);
        w.write_record(["index", "params", "mean_cv_rmse", "error", "best"])?;
        for (i, row) in result.rows.iter().enumerate() {
            w.write_record([
                i.to_string(),
                serde_json::to_string(&row.params)?,
                row.mean_cv_rmse.map(|v| v.to_string()).unwrap_or_default(),
                row.error.clone().unwrap_or_default(),
                (i == result.best_index).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(dir.join("grid_search.csv"), e))?;
        spec = result.best;
    }

    let kf = eval::kfold(&spec, &train_t, k, fold_seed)?;
    let model = models::fit(&spec, &train_t)?;
    let val = eval::validate(&model, &val_t)?;
    let report = EvalReport::new(spec.family(), val, kf);

    write_text(&args.out, &(model.to_json()? + "\n"))?;
    report.write_kfold_csv(create(&dir.join("eval_kfold.csv"))?)?;
    report.write_validation_csv(create(&dir.join("eval_validation.csv"))?)?;
    write_text(&dir.join("eval_report.json"), &report.to_json()?)?;
    write_predictions(&dir.join("predictions.csv"), &model, &val_t, &val_idx)?;
    if let Some(sizes) = &cfg.train.learning_curve {
        let curve = eval::learning_curve(&spec, &train_t, sizes, k, fold_seed)?;
        curve.save_csv(&dir.join("learning_curve.csv"))?;
    }
    println!(
        "{}: cv r2 = {:.4}, validation r2 = {:.4}",
        spec.family(),
        report.kfold.average.r2_mean,
        report.validation_average.r2
    );
    Ok(())
}

fn explain_cmd(args: &ExplainArgs) -> anyhow::Result<()> {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let model = TrainedModel::load(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let ds = Dataset::load_csv(&args.data).with_context(|| format!("loading dataset {}", args.data.display()))?;
    let names = model.feature_names();
    let table = if names.iter().eq(FEATURE_NAMES.iter()) {
        ds.to_table()
    } else if names.iter().eq(REDUCED_FEATURES.iter()) {
        reduced::compress(&ds)?
    } else {
        return Err(Error::ShapeMismatch(format!("model features {names:?} match neither input layout")).into());
    };
    if table.n_rows() == 0 {
        return Err(Error::Data("dataset has no rows".into()).into());
    }
    if let Some(i) = args.instance {
        if i >= table.n_rows() {
            return Err(Error::Size(format!("instance {i} out of range for {} rows", table.n_rows())).into());
        }
    }
    let selected = match args.regime {
        Some(regime) => {
            let mut rows = Vec::new();
            for (i, rec) in ds.rows().iter().enumerate() {
                let f = explain::regime_flags(&rec.case)?;
                if match regime {
                    Regime::Coanda => f.coanda,
                    Regime::Shallow => f.shallow,
                } {
                    rows.push(i);
                }
            }
            if rows.is_empty() {
                return Err(CliError::EmptySelection(regime.name().into()).into());
            }
            rows
        }
        None => Vec::new(),
    };

    let bg = explain::background(table.x.view(), cfg.explain.background_rows, rng::derive(cfg.seed, STREAM_BACKGROUND));
    let kernel = KernelConfig {
        mode: cfg.explain.mode,
        n_coalitions: cfg.explain.n_coalitions,
        seed: rng::derive(cfg.seed, STREAM_KERNEL),
    };
    let attr = explain::kernel_shap(&model, &table.feature_names, model.target_names(), table.x.view(), bg.view(), &kernel)?;

    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for (t, target) in attr.target_names.iter().enumerate() {
        attr.write_csv(t, create(&out.join(format!("attribution_{target}.csv")))?)?;
    }
    explain::write_bar_csv(&explain::bar_data(&attr), create(&out.join("bar.csv"))?)?;
    explain::write_summary_csv(&explain::summary_data(&attr), create(&out.join("summary.csv"))?)?;
    let mut dependence = Vec::new();
    for f in &attr.feature_names {
        dependence.extend(explain::dependence_data(&attr, f)?);
    }
    explain::write_dependence_csv(&dependence, create(&out.join("dependence.csv"))?)?;

    let mut w = csv::Writer::from_writer(create(&out.join("regimes.csv"))?);
    w.write_record(["instance", "coanda", "shallow", "coanda_ratio", "shallow_ratio", "shallow_threshold"])?;
    for (i, rec) in ds.rows().iter().enumerate() {
        let f = explain::regime_flags(&rec.case)?;
        w.write_record([
            i.to_string(),
            f.coanda.to_string(),
            f.shallow.to_string(),
            f.coanda_ratio.to_string(),
            f.shallow_ratio.to_string(),
            f.shallow_threshold.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(out.join("regimes.csv"), e))?;

    let waterfall = |i: usize, path: PathBuf| -> anyhow::Result<()> {
        let falls = attr
            .target_names
            .iter()
            .map(|t| explain::waterfall_data(&attr, i, t))
            .collect::<crate::Result<Vec<_>>>()?;
        explain::write_waterfall_csv(&falls, create(&path)?)?;
        Ok(())
    };
    if let Some(i) = args.instance {
        waterfall(i, out.join(format!("waterfall_{i:05}.csv")))?;
    }
    if let Some(regime) = args.regime {
        for &i in &selected {
            waterfall(i, out.join(format!("waterfall_{}_{i:05}.csv", regime.name())))?;
        }
    }

    let meta = serde_json::json!({
        "meta": attr.meta,
        "base_values": attr.base_values,
        "local_accuracy_error": attr.local_accuracy_error(),
        "instances": attr.n_instances(),
    });
    write_text(&out.join("explain_meta.json"), &serde_json::to_string_pretty(&meta)?)?;
    println!(
        "{} instances explained, local accuracy error {:.3e}",
        attr.n_instances(),
        attr.local_accuracy_error()
    );
    Ok(())
}

fn report_cmd(args: &ReportArgs) -> anyhow::Result<()> {
    let format = Format::from_path(&args.out)?;
    if !args.input.is_dir() {
        bail!(CliError::Usage(format!("{} is not a directory", args.input.display())));
    }
    let (text, missing) = report::render(&args.input, format)?;
    write_text(&args.out, &text)?;
    for m in &missing {
        eprintln!("warning: missing {m}");
    }
    println!("report written to {}", args.out.display());
    Ok(())
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .context("building thread pool")?;
    pool.install(|| match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Explain(a) => explain_cmd(a),
        Command::Report(a) => report_cmd(a),
    })
}

/// Exit code and machine-readable kind for an error chain.
pub fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::EmptySelection(_) => (3, "empty_selection"),
                CliError::Usage(_) => (2, "usage"),
            };
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            let code = match e {
                Error::Divergence { .. }
                | Error::Numeric { .. }
                | Error::Shape(_)
                | Error::Truncation(_)
                | Error::OracleFailures { .. }
                | Error::Search(_) => 1,
                _ => 2,
            };
            return (code, e.kind());
        }
        if cause.downcast_ref::<csv::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return (2, "io");
        }
    }
    (1, "internal")
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            let report = serde_json::json!({
                "error": kind,
                "message": format!("{err:#}"),
                "exit_code": code,
            });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(Config::from_json("{}").unwrap(), Config::default());
    }

    #[test]
    fn config_rejects_unknown_and_invalid() {
        assert!(Config::from_json(r#"{"sede": 1}"#).is_err());
        assert!(Config::from_json(r#"{"train": {"folds": 1}}"#).is_err());
        let e = Config::from_json(r#"{"generate": {"ranges": {"theta": [10, 5]}}}"#).unwrap_err();
        assert_eq!(e.kind(), "config");
    }

    #[test]
    fn config_round_trips() {
        let mut c = Config::default();
        c.train.learning_curve = Some(vec![50, 100]);
        c.generate.ranges.froude = None;
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json(&text).unwrap(), c);
    }

    #[test]
    fn exit_codes() {
        let e: anyhow::Error = CliError::EmptySelection("coanda".into()).into();
        assert_eq!(classify(&e), (3, "empty_selection"));
        let e = anyhow::Error::from(Error::Config("x".into())).context("loading");
        assert_eq!(classify(&e), (2, "config"));
        let e: anyhow::Error = Error::OracleFailures { failed: 1, total: 2, first: String::new() }.into();
        assert_eq!(classify(&e).0, 1);
        assert_eq!(classify(&anyhow::anyhow!("boom")), (1, "internal"));
    }

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let c = Cli::try_parse_from(["jetsurro", "train", "--data", "d.csv", "--family", "rf", "--out", "m.json"]).unwrap();
        assert!(matches!(c.command, Command::Train(TrainArgs { family: Family::Rf, .. })));
    }
}
