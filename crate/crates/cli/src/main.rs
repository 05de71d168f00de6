//! `tti`: synthesize data, describe it, select features, evaluate models and
//! run the full model grid.

mod data;
mod model_file;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tti_core::describe::standard_series;
use tti_core::evaluate::Protocol;
use tti_core::experiment::{read_results, summary_csv, summary_markdown, write_results};
use tti_core::ingest::{write_tti_csv, write_weather_csv};
use tti_core::regress::{DEFAULT_LASSO_MAX_ITER, DEFAULT_LASSO_TOL};
use tti_core::{
    best_per_model, emit_report, r2_score, repeated_sampled_cv, rfe_sweep, run_grid, standardize,
    synthesize_dataset, GridConfig, Kernel, ModelSpec, Parallelism, PredictionCase, Preprocess,
};

use data::{parse_sizes, read, read_feature_list, write, Inputs};
use model_file::ModelFile;

#[derive(Debug, Parser)]
#[command(name = "tti", version, about = "Travel-time-index forecasting toolkit")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic tti.csv and weather.csv.
    Synth(SynthArgs),
    /// Write the daily, monthly, hourly, weekday and yearly mean series.
    Describe(DescribeArgs),
    /// Recursive feature elimination over the 93 variables.
    Select(SelectArgs),
    /// Repeated sampled cross-validation of one model.
    Evaluate(EvaluateArgs),
    /// Run the model x parameter x subset size x degree grid.
    Grid(GridArgs),
    /// Summarize results.csv as best-per-model tables.
    Report(ReportArgs),
    /// Fit one model and write it as JSON.
    Train(TrainArgs),
    /// Score data with a trained model.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaseArg {
    Short,
    Long,
}

impl From<CaseArg> for PredictionCase {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::Short => PredictionCase::ShortTerm,
            CaseArg::Long => PredictionCase::LongTerm,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Linear,
    Ridge,
    Lasso,
    Svr,
    Tree,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: FamilyArg,
    /// Penalty for ridge and lasso.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// SVR box constraint.
    #[arg(long = "c", default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// RBF width; defaults to 1 / (p * mean variance).
    #[arg(long)]
    gamma: Option<f64>,
    /// Use a linear kernel instead of RBF.
    #[arg(long)]
    linear_kernel: bool,
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec> {
        let spec = match self.model {
            FamilyArg::Linear => ModelSpec::Linear,
            FamilyArg::Ridge => ModelSpec::ridge(self.alpha),
            FamilyArg::Lasso => ModelSpec::Lasso {
                alpha: self.alpha,
                tol: DEFAULT_LASSO_TOL,
                max_iter: DEFAULT_LASSO_MAX_ITER,
            },
            FamilyArg::Svr => ModelSpec::Svr {
                c: self.c,
                epsilon: self.epsilon,
                kernel: if self.linear_kernel {
                    Kernel::Linear
                } else {
                    Kernel::Rbf { gamma: self.gamma }
                },
            },
            FamilyArg::Tree => ModelSpec::Tree {
                max_depth: self.max_depth,
                min_leaf: self.min_leaf,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Directory for tti.csv and weather.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "2010-01-01")]
    start: NaiveDate,
    /// Last day, inclusive.
    #[arg(long, default_value = "2016-06-26")]
    end: NaiveDate,
}

#[derive(Debug, Args)]
struct DescribeArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_enum)]
    case: CaseArg,
    /// Subset sizes, e.g. `1..24` or `3,5,8`.
    #[arg(long, default_value = "1..24", value_parser = |s: &str| parse_sizes(s).map(Sizes))]
    sizes: Sizes,
    /// Run on a seeded sample of this many rows instead of the whole matrix.
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the 93-column design matrix as CSV.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct Sizes(Vec<usize>);

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_enum)]
    case: CaseArg,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    degree: u32,
    /// Column names to use (text or JSON array); all 93 when omitted.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    sample_size: usize,
    /// With more than one repeat the full repeated score is printed.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Overrides the case in the config file.
    #[arg(long, value_enum)]
    case: Option<CaseArg>,
    /// GridConfig JSON; defaults apply to missing fields or a missing file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    sequential: bool,
    /// Write the effective GridConfig here.
    #[arg(long)]
    save_config: Option<PathBuf>,
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, default_value = "results.csv")]
    results: PathBuf,
    /// Directory for the per-case CSV and Markdown tables.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_enum)]
    case: CaseArg,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    degree: u32,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Fit on a seeded sample of this many rows; all rows when omitted.
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    model: PathBuf,
    /// Predictions CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parallelism(sequential: bool) -> Parallelism {
    if sequential {
        Parallelism::Sequential
    } else {
        Parallelism::default()
    }
}

fn feature_names(path: Option<&PathBuf>, case: PredictionCase) -> Result<Vec<String>> {
    match path {
        Some(p) => read_feature_list(p),
        None => Ok(tti_core::FeatureSchema::for_case(case).names),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let data = synthesize_dataset(a.start, a.end, a.seed)?;
    write(&a.out.join("tti.csv"), &write_tti_csv(&data.tti))?;
    write(&a.out.join("weather.csv"), &write_weather_csv(&data.weather))?;
    println!(
        "wrote {} hourly observations and {} weather days to {}",
        data.tti.len(),
        data.weather.len(),
        a.out.display()
    );
    Ok(())
}

fn describe(a: DescribeArgs) -> Result<()> {
    let records = a.inputs.records()?;
    for path in emit_report(&standard_series(&records)?, &a.out)? {
        println!("{}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct SubsetReport {
    size: usize,
    columns: Vec<String>,
    indexes: Vec<usize>,
}

#[derive(Serialize)]
struct SelectReport {
    case: PredictionCase,
    rows: usize,
    sample_seed: Option<u64>,
    /// Removal order down to the smallest requested size.
    elimination_order: Vec<String>,
    subsets: Vec<SubsetReport>,
}

fn select(a: SelectArgs) -> Result<()> {
    let case = a.case.into();
    let mut m = a.inputs.matrix(case, a.dump_matrix.as_deref())?;
    let mut sample_seed = None;
    if let Some(n) = a.sample_size {
        let protocol = Protocol {
            sample_size: n,
            seed: a.seed,
            ..Protocol::default()
        };
        m = m.select_rows(&protocol.sample_rows(m.n_rows(), 0)?);
        sample_seed = Some(protocol.sample_seed(0));
    }
    let (z, _) = standardize(&m)?;
    let results = rfe_sweep(z.x.view(), z.y.view(), &a.sizes.0)?;
    let deepest = results.iter().max_by_key(|r| r.elimination_order.len()).expect("sizes non-empty");
    let report = SelectReport {
        case,
        rows: m.n_rows(),
        sample_seed,
        elimination_order: deepest.elimination_order.iter().map(|&c| m.names[c].clone()).collect(),
        subsets: results
            .iter()
            .map(|r| SubsetReport {
                size: r.target_size,
                columns: r.selected.iter().map(|&c| m.names[c].clone()).collect(),
                indexes: r.selected.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&report)?;
    match a.out {
        Some(p) => write(&p, &json),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let case = a.case.into();
    let m = a.inputs.matrix(case, a.dump_matrix.as_deref())?;
    let names = feature_names(a.features.as_ref(), case)?;
    let m = m.select_columns(&m.column_indexes(&names)?);
    let protocol = Protocol {
        sample_size: a.sample_size,
        repeats: a.repeats,
        k: a.k,
        seed: a.seed,
    };
    let preprocess = Preprocess::degree(a.degree);
    let score = repeated_sampled_cv(&m, &a.model.spec()?, preprocess, protocol, parallelism(a.sequential))?;
    let json = if a.repeats == 1 {
        serde_json::to_string_pretty(&score.per_repeat[0])?
    } else {
        serde_json::to_string_pretty(&score)?
    };
    println!("{json}");
    Ok(())
}

fn grid(a: GridArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => GridConfig::from_json(&read(p)?).with_context(|| format!("reading {}", p.display()))?,
        None => GridConfig::default(),
    };
    if let Some(c) = a.case {
        config.case = c.into();
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(r) = a.repeats {
        config.repeats = r;
    }
    config.validate()?;
    if let Some(p) = &a.save_config {
        write(p, &config.to_json())?;
    }
    let m = a.inputs.matrix(config.case, a.dump_matrix.as_deref())?;
    log::info!(
        "{} cells on {} rows ({})",
        config.cell_count(),
        m.n_rows(),
        config.case.as_str()
    );
    let t = Instant::now();
    let results = run_grid(&m, &config, parallelism(a.sequential))?;
    let mut buf = Vec::new();
    write_results(&results, &mut buf)?;
    write(&a.out, std::str::from_utf8(&buf)?)?;
    println!(
        "{} cells in {:.1}s -> {}",
        results.len(),
        t.elapsed().as_secs_f64(),
        a.out.display()
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let text = read(&a.results)?;
    let results = read_results(text.as_bytes())?;
    let mut by_case: BTreeMap<&'static str, Vec<_>> = BTreeMap::new();
    for r in results {
        by_case.entry(r.case.as_str()).or_default().push(r);
    }
    if by_case.is_empty() {
        bail!("{} holds no results", a.results.display());
    }
    for (case, rows) in by_case {
        let summary = best_per_model(&rows)?;
        let md = summary_markdown(&summary, case);
        write(&a.out.join(format!("table_{case}.csv")), &summary_csv(&summary))?;
        write(&a.out.join(format!("table_{case}.md")), &md)?;
        println!("{md}");
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let case = a.case.into();
    let spec = a.model.spec()?;
    let mut m = a.inputs.matrix(case, a.dump_matrix.as_deref())?;
    if let Some(n) = a.sample_size {
        let protocol = Protocol {
            sample_size: n,
            seed: a.seed,
            ..Protocol::default()
        };
        m = m.select_rows(&protocol.sample_rows(m.n_rows(), 0)?);
    }
    if matches!(spec, ModelSpec::Svr { .. }) && m.n_rows() > 20_000 {
        bail!(
            "SVR keeps an n x n kernel; {} rows is too many, pass --sample-size",
            m.n_rows()
        );
    }
    let names = feature_names(a.features.as_ref(), case)?;
    let file = ModelFile::train(&m, case, &names, &spec, Preprocess::degree(a.degree))?;
    let fitted = file.predict(&m)?;
    write(&a.out, &file.to_json())?;
    println!(
        "{} on {} rows, {} features, training R² {:.4} -> {}",
        spec.family().display_name(),
        m.n_rows(),
        names.len(),
        r2_score(m.y.view(), fitted.view())?,
        a.out.display()
    );
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let file = ModelFile::from_json(&read(&a.model)?)?;
    let m = a.inputs.matrix(file.case, None)?;
    let pred = file.predict(&m)?;
    let mut csv = String::from("timestamp,tti,prediction\n");
    for ((t, y), p) in m.timestamps.iter().zip(&m.y).zip(&pred) {
        csv.push_str(&format!("{},{y},{p}\n", t.format("%Y-%m-%dT%H:%M:%S")));
    }
    let r2 = r2_score(m.y.view(), pred.view())?;
    match &a.out {
        Some(p) => {
            write(p, &csv)?;
            println!("{} predictions, R² {r2:.4} -> {}", pred.len(), p.display());
        }
        None => {
            print!("{csv}");
            eprintln!("{} predictions, R² {r2:.4}", pred.len());
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Describe(a) => describe(a),
        Command::Select(a) => select(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Grid(a) => grid(a),
        Command::Report(a) => report(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
    }
}
