//! `sparsedag-bench`: generate data, fit one estimator, cross-validate, run
//! sweeps and emit plot data.
//!
//! Exit codes: 0 success, 1 hard error, 2 sweep finished with recorded failures.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparsedag::data::{load_dataset, DatasetMeta};
use sparsedag::graphs::{
    compare, read_edge_list, sample_weighted_dag, write_edge_list, GraphSpec, WeightDist, DEFAULT_ZERO_TOL,
};
use sparsedag::simulate::{simulate_linear_sem, simulate_logistic_sem, NoiseKind};
use sparsedag::SolverConfig;
use sparsedag_bench::config::{EstimatorParams, ExperimentConfig, Model, SweepEstimator};
use sparsedag_bench::fit::{fit_estimator, model_of};
use sparsedag_bench::sweep::{read_missed, read_runs, MISSED_FILE, RUNS_FILE};
use sparsedag_bench::{emit_plot_data, run_sweep, BenchError, Result, SweepOptions};

#[derive(Parser)]
#[command(name = "sparsedag-bench", version, about = "DAG structure learning benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an ER graph and simulate data from it.
    Generate(GenerateArgs),
    /// Fit one estimator to one dataset.
    Fit(FitArgs),
    /// Cross-validated adaptive-lasso fit with the full CV table.
    Cv(CvArgs),
    /// Run a config-driven benchmark sweep.
    Sweep(SweepArgs),
    /// Emit plot-ready CSVs from a sweep directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    d: usize,
    /// Expected edges per node.
    #[arg(long, default_value_t = 1.0)]
    degree: f64,
    /// `gaussian:MEAN:SD`, `uniform:C` or `gap:LO:HI`.
    #[arg(long, default_value = "gaussian:0:2")]
    weights: WeightDist,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// `gaussian[:SD]`, `exponential[:SCALE]` or `gumbel[:SCALE]`; ignored for logistic.
    #[arg(long, default_value = "gaussian:1")]
    noise: NoiseKind,
    #[arg(long, default_value = "linear")]
    model: Model,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Estimator settings shared by `fit` and `cv`; flags override `--config`.
#[derive(Args)]
struct ParamArgs {
    /// TOML file whose `[params]` and `[solver]` tables are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Seeds the CV splits.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    /// Headerless numeric CSV; `<stem>.json` beside it is read as metadata.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "notears_al")]
    estimator: SweepEstimator,
    /// For `notears_al`, `--lambda` fixes λ and skips CV.
    #[command(flatten)]
    params: ParamArgs,
    /// Ground-truth edge list; prints recovery metrics.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// Comma-separated γ grid.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Comma-separated subset of notears_fixed, notears_al, ols_only.
    #[arg(long, value_delimiter = ',')]
    estimator: Option<Vec<SweepEstimator>>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Also write wall times to timings.csv.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep output directory holding runs.csv and missed_edges.csv.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn generate(a: GenerateArgs) -> Result<()> {
    let spec = GraphSpec { d: a.d, er_degree: a.degree, weight_dist: a.weights, seed: a.seed };
    spec.validate()?;
    let truth = sample_weighted_dag(&spec)?;
    let data_seed = sparsedag::rng::derive_seed(a.seed, &[1]);
    let data = match a.model {
        Model::Linear => simulate_linear_sem(&truth, a.n, &a.noise, data_seed)?,
        Model::Logistic => simulate_logistic_sem(&truth, a.n, data_seed)?,
    };
    fs::create_dir_all(&a.out)?;
    write_edge_list(File::create(a.out.join("graph.csv"))?, &truth, DEFAULT_ZERO_TOL)?;
    data.write_csv(BufWriter::new(File::create(a.out.join("data.csv"))?))?;
    let meta = DatasetMeta {
        n: data.n(),
        d: data.d(),
        kind: data.kind(),
        seed: Some(data_seed),
        noise: (a.model == Model::Linear).then(|| a.noise.to_string()),
        graph_file: Some("graph.csv".into()),
        has_header: false,
    };
    fs::write(a.out.join("data.json"), serde_json::to_string_pretty(&meta)?)?;
    println!(
        "wrote {} edges and {}x{} data to {}",
        truth.edge_count(DEFAULT_ZERO_TOL),
        data.n(),
        data.d(),
        a.out.display()
    );
    Ok(())
}

fn resolve_params(p: &ParamArgs) -> Result<(EstimatorParams, SolverConfig)> {
    #[derive(serde::Deserialize, Default)]
    struct Partial {
        #[serde(default)]
        params: EstimatorParams,
        #[serde(default)]
        solver: SolverConfig,
    }
    let base: Partial = match &p.config {
        Some(path) => {
            toml::from_str::<toml::Table>(&fs::read_to_string(path)?).map_err(BenchError::from).and_then(|t| {
                let mut keep = toml::Table::new();
                for key in ["params", "solver"] {
                    if let Some(v) = t.get(key) {
                        keep.insert(key.into(), v.clone());
                    }
                }
                Ok(keep.try_into::<Partial>()?)
            })?
        }
        None => Partial::default(),
    };
    let mut params = base.params;
    if let Some(l) = p.lambda {
        params.lambda = l;
        params.lambda_al = l;
    }
    if let Some(g) = p.gamma {
        params.gamma = g;
    }
    if let Some(t) = p.threshold {
        params.threshold = t;
    }
    params.validate()?;
    base.solver.validate()?;
    Ok((params, base.solver))
}

fn print_metrics(w_hat: &sparsedag::WeightMatrix, truth_path: &Path) -> Result<()> {
    let truth = read_edge_list(File::open(truth_path)?, Some(w_hat.d()))?;
    let m = compare(w_hat, &truth, DEFAULT_ZERO_TOL)?;
    println!("{}", serde_json::to_string(&m)?);
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let (data, _) = load_dataset(&a.data)?;
    let (mut params, solver) = resolve_params(&a.params)?;
    if a.estimator == SweepEstimator::NotearsAl && a.params.lambda.is_some() {
        params.cv = false;
    }
    let out = fit_estimator(a.estimator, model_of(&data), &data, &params, &solver, a.params.seed)?;
    fs::create_dir_all(&a.out)?;
    out.result.write_json(File::create(a.out.join("estimate.json"))?)?;
    out.result.write_edge_list(File::create(a.out.join("estimate.csv"))?)?;
    out.result.write_trace_jsonl(File::create(a.out.join("trace.jsonl"))?)?;
    if let Some(cv) = &out.cv {
        cv.write_table_csv(File::create(a.out.join("cv_table.csv"))?)?;
        fs::write(a.out.join("cv_winner.json"), serde_json::to_string_pretty(&cv.winner_json())?)?;
    }
    if !out.result.converged {
        log::warn!("solver did not converge; the estimate is the repaired best iterate");
    }
    println!(
        "{}: {} edges, h = {:e}, lambda = {}",
        a.estimator,
        out.result.w_hat.edge_count(DEFAULT_ZERO_TOL),
        out.result.h_final,
        out.result.lambda_used
    );
    if let Some(t) = &a.truth {
        print_metrics(&out.result.w_hat, t)?;
    }
    Ok(())
}

fn cv(a: CvArgs) -> Result<()> {
    let (data, _) = load_dataset(&a.data)?;
    let (mut params, solver) = resolve_params(&a.params)?;
    params.cv = true;
    if let Some(g) = a.gammas {
        params.cv_gammas = Some(g);
    }
    if let Some(f) = a.folds {
        params.cv_folds = f;
    }
    params.validate()?;
    let out = fit_estimator(SweepEstimator::NotearsAl, model_of(&data), &data, &params, &solver, a.params.seed)?;
    let cv = out.cv.expect("cv enabled");
    fs::create_dir_all(&a.out)?;
    cv.write_table_csv(File::create(a.out.join("cv_table.csv"))?)?;
    fs::write(a.out.join("cv_winner.json"), serde_json::to_string_pretty(&cv.winner_json())?)?;
    out.result.write_json(File::create(a.out.join("estimate.json"))?)?;
    out.result.write_edge_list(File::create(a.out.join("estimate.csv"))?)?;
    println!(
        "selected lambda = {} gamma = {} with {} edges from {} candidates",
        cv.best.lambda,
        cv.best.gamma,
        cv.best.support.len(),
        cv.candidates.len()
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<usize> {
    let mut config = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(o) = a.out {
        config.output_dir = o;
    }
    if let Some(e) = a.estimator {
        config.estimators = e;
    }
    if let Some(l) = a.lambda {
        config.params.lambda = l;
    }
    if let Some(g) = a.gamma {
        config.params.gamma = g;
    }
    if let Some(t) = a.threshold {
        config.params.threshold = t;
    }
    config.validate()?;
    let summary = run_sweep(&config, SweepOptions { jobs: a.jobs, timings: a.timings })?;
    println!(
        "{} runs, {} failed; results in {}",
        summary.records.len(),
        summary.failures,
        summary.output_dir.display()
    );
    Ok(summary.failures)
}

fn report(a: ReportArgs) -> Result<()> {
    let records = read_runs(&a.input.join(RUNS_FILE))?;
    let missed_path = a.input.join(MISSED_FILE);
    let missed = if missed_path.exists() { read_missed(&missed_path)? } else { vec![] };
    let files = emit_plot_data(&records, &missed, &a.out)?;
    println!("wrote {} files to {}", files.len(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a).map(|_| 0),
        Command::Fit(a) => fit(a).map(|_| 0),
        Command::Cv(a) => cv(a).map(|_| 0),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a).map(|_| 0),
    };
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
