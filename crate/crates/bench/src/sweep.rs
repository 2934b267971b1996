//! Full-factorial sweeps with deterministic, crash-safe output.
//!
//! A data cell is one (graph entry, n, noise) combination; cells are numbered
//! in that nesting order. The truth graph of replicate r of graph entry g is
//! shared by every cell using g, so estimators and sample sizes are compared on
//! the same DAGs. Seeds derive from the master seed through `derive_seed`:
//!
//! * graph:  `[0, g, r]`
//! * data:   `[1, cell, r]`
//! * CV:     `[2, cell, r]`
//!
//! Workers fit (cell, replicate) units in parallel; a single appender writes
//! them in unit order, flushing after each, so every output file is a pure
//! function of the config.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sparsedag::data::Dataset;
use sparsedag::graphs::{compare, sample_weighted_dag, write_edge_list, GraphSpec, DEFAULT_ZERO_TOL};
use sparsedag::rng::derive_seed;
use sparsedag::simulate::{simulate_linear_sem, simulate_logistic_sem, NoiseKind};
use sparsedag::WeightMatrix;

use crate::config::{ExperimentConfig, Model, SweepEstimator};
use crate::error::Result;
use crate::fit::fit_estimator;

pub const RUNS_FILE: &str = "runs.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const MISSED_FILE: &str = "missed_edges.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataCell {
    pub index: usize,
    pub graph: usize,
    pub n: usize,
    pub noise: NoiseKind,
}

pub fn data_cells(config: &ExperimentConfig) -> Vec<DataCell> {
    let mut cells = Vec::new();
    for graph in 0..config.graphs.len() {
        for &n in &config.n {
            for &noise in &config.noise {
                cells.push(DataCell { index: cells.len(), graph, n, noise });
            }
        }
    }
    cells
}

/// One estimator on one replicate of one cell. Wall time is kept out of the
/// CSV so reruns are byte-identical; see [`TIMINGS_FILE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub cell: usize,
    pub d: usize,
    pub er_degree: f64,
    pub weights: String,
    pub n: usize,
    pub noise: String,
    pub model: Model,
    pub estimator: SweepEstimator,
    pub replicate: usize,
    pub seed: u64,
    pub failed: bool,
    pub converged: bool,
    pub true_edges: usize,
    pub shd: Option<usize>,
    pub tpr: Option<f64>,
    pub fdr: Option<f64>,
    pub tp: Option<usize>,
    pub fp: Option<usize>,
    #[serde(rename = "fn")]
    pub fn_: Option<usize>,
    pub reversed: Option<usize>,
    pub predicted: Option<usize>,
    pub h_final: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub error: String,
    #[serde(skip)]
    pub seconds: f64,
}

/// A true edge absent from an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissedEdge {
    pub cell: usize,
    pub d: usize,
    pub er_degree: f64,
    pub weights: String,
    pub n: usize,
    pub noise: String,
    pub estimator: SweepEstimator,
    pub replicate: usize,
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub cell: usize,
    pub d: usize,
    pub er_degree: f64,
    pub weights: String,
    pub n: usize,
    pub noise: String,
    pub model: Model,
    pub estimator: SweepEstimator,
    pub runs: usize,
    pub failures: usize,
    pub shd_mean: Option<f64>,
    pub shd_sd: Option<f64>,
    pub tpr_mean: Option<f64>,
    pub tpr_sd: Option<f64>,
    pub fdr_mean: Option<f64>,
    pub fdr_sd: Option<f64>,
}

/// Mean and sample standard deviation; sd needs two values.
pub fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

/// Groups by (cell, estimator) in first-appearance order; failed runs count
/// toward `failures` only.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut order: Vec<(usize, SweepEstimator)> = Vec::new();
    let mut groups: BTreeMap<(usize, SweepEstimator), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.cell, r.estimator);
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rs = &groups[&key];
            let ok: Vec<&&RunRecord> = rs.iter().filter(|r| !r.failed).collect();
            let col = |f: fn(&RunRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
            let (shd_mean, shd_sd) = mean_sd(&col(|r| r.shd.map(|v| v as f64)));
            let (tpr_mean, tpr_sd) = mean_sd(&col(|r| r.tpr));
            let (fdr_mean, fdr_sd) = mean_sd(&col(|r| r.fdr));
            let r0 = rs[0];
            AggregateRow {
                cell: r0.cell,
                d: r0.d,
                er_degree: r0.er_degree,
                weights: r0.weights.clone(),
                n: r0.n,
                noise: r0.noise.clone(),
                model: r0.model,
                estimator: r0.estimator,
                runs: rs.len(),
                failures: rs.len() - ok.len(),
                shd_mean,
                shd_sd,
                tpr_mean,
                tpr_sd,
                fdr_mean,
                fdr_sd,
            }
        })
        .collect()
}

struct UnitOutput {
    unit: usize,
    cell: DataCell,
    replicate: usize,
    truth: Option<WeightMatrix>,
    records: Vec<RunRecord>,
    estimates: Vec<(SweepEstimator, WeightMatrix)>,
    missed: Vec<MissedEdge>,
}

fn noise_label(config: &ExperimentConfig, noise: &NoiseKind) -> String {
    match config.model {
        Model::Linear => noise.to_string(),
        Model::Logistic => "bernoulli".to_string(),
    }
}

fn simulate(
    config: &ExperimentConfig,
    cell: &DataCell,
    replicate: usize,
) -> sparsedag::Result<(WeightMatrix, Dataset)> {
    let g = &config.graphs[cell.graph];
    let spec = GraphSpec {
        d: g.d,
        er_degree: g.er_degree,
        weight_dist: g.weights,
        seed: derive_seed(config.seed, &[0, cell.graph as u64, replicate as u64]),
    };
    let truth = sample_weighted_dag(&spec)?;
    let data_seed = derive_seed(config.seed, &[1, cell.index as u64, replicate as u64]);
    let data = match config.model {
        Model::Linear => simulate_linear_sem(&truth, cell.n, &cell.noise, data_seed)?,
        Model::Logistic => simulate_logistic_sem(&truth, cell.n, data_seed)?,
    };
    Ok((truth, data))
}

fn run_unit(config: &ExperimentConfig, unit: usize, cell: DataCell, replicate: usize) -> UnitOutput {
    let g = &config.graphs[cell.graph];
    let data_seed = derive_seed(config.seed, &[1, cell.index as u64, replicate as u64]);
    let base = |estimator: SweepEstimator, true_edges: usize| RunRecord {
        cell: cell.index,
        d: g.d,
        er_degree: g.er_degree,
        weights: g.weights.to_string(),
        n: cell.n,
        noise: noise_label(config, &cell.noise),
        model: config.model,
        estimator,
        replicate,
        seed: data_seed,
        failed: true,
        converged: false,
        true_edges,
        shd: None,
        tpr: None,
        fdr: None,
        tp: None,
        fp: None,
        fn_: None,
        reversed: None,
        predicted: None,
        h_final: None,
        lambda: None,
        gamma: None,
        error: String::new(),
        seconds: 0.0,
    };
    let mut out = UnitOutput { unit, cell, replicate, truth: None, records: vec![], estimates: vec![], missed: vec![] };
    let (truth, data) = match simulate(config, &cell, replicate) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("cell {} replicate {replicate}: simulation failed: {e}", cell.index);
            out.records =
                config.estimators.iter().map(|&est| RunRecord { error: e.to_string(), ..base(est, 0) }).collect();
            return out;
        }
    };
    let true_edges = truth.edge_count(DEFAULT_ZERO_TOL);
    let cv_seed = derive_seed(config.seed, &[2, cell.index as u64, replicate as u64]);
    for &est in &config.estimators {
        let t0 = Instant::now();
        let fitted = fit_estimator(est, config.model, &data, &config.params, &config.solver, cv_seed)
            .and_then(|f| Ok((compare(&f.result.w_hat, &truth, DEFAULT_ZERO_TOL)?, f)));
        let seconds = t0.elapsed().as_secs_f64();
        let rec = match fitted {
            Ok((m, f)) => {
                let w_hat = &f.result.w_hat;
                for (src, dst, weight) in truth.edges(DEFAULT_ZERO_TOL) {
                    if w_hat.get(src, dst).abs() <= DEFAULT_ZERO_TOL {
                        out.missed.push(MissedEdge {
                            cell: cell.index,
                            d: g.d,
                            er_degree: g.er_degree,
                            weights: g.weights.to_string(),
                            n: cell.n,
                            noise: noise_label(config, &cell.noise),
                            estimator: est,
                            replicate,
                            src,
                            dst,
                            weight,
                        });
                    }
                }
                if !f.result.converged {
                    log::warn!("cell {} replicate {replicate} {est}: solver did not converge", cell.index);
                }
                let r = RunRecord {
                    failed: false,
                    converged: f.result.converged,
                    shd: Some(m.shd),
                    tpr: Some(m.tpr),
                    fdr: Some(m.fdr),
                    tp: Some(m.tp),
                    fp: Some(m.fp),
                    fn_: Some(m.fn_),
                    reversed: Some(m.reversed),
                    predicted: Some(m.predicted),
                    h_final: Some(f.result.h_final),
                    lambda: Some(f.result.lambda_used),
                    gamma: f.result.gamma,
                    seconds,
                    ..base(est, true_edges)
                };
                out.estimates.push((est, f.result.w_hat));
                r
            }
            Err(e) => {
                log::warn!("cell {} replicate {replicate} {est}: {e}", cell.index);
                RunRecord { error: e.to_string(), seconds, ..base(est, true_edges) }
            }
        };
        out.records.push(rec);
    }
    out.truth = Some(truth);
    out
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub records: Vec<RunRecord>,
    pub aggregate: Vec<AggregateRow>,
    pub failures: usize,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    /// Also write wall times to `timings.csv` (not reproducible).
    pub timings: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { jobs: 1, timings: false }
    }
}

fn truth_path(dir: &Path, graph: usize, replicate: usize) -> PathBuf {
    dir.join("truth").join(format!("g{graph}_r{replicate}.csv"))
}

pub fn estimate_path(dir: &Path, cell: usize, replicate: usize, estimator: SweepEstimator) -> PathBuf {
    dir.join("estimates").join(format!("c{cell}_r{replicate}_{estimator}.csv"))
}

struct Appender {
    dir: PathBuf,
    runs: csv::Writer<BufWriter<File>>,
    missed: csv::Writer<BufWriter<File>>,
    timings: Option<csv::Writer<BufWriter<File>>>,
    truths_written: HashSet<(usize, usize)>,
    records: Vec<RunRecord>,
}

#[derive(Serialize)]
struct TimingRow {
    cell: usize,
    replicate: usize,
    estimator: SweepEstimator,
    seconds: f64,
}

impl Appender {
    fn new(dir: &Path, timings: bool) -> Result<Self> {
        fs::create_dir_all(dir.join("truth"))?;
        fs::create_dir_all(dir.join("estimates"))?;
        let open = |name: &str| -> Result<csv::Writer<BufWriter<File>>> {
            Ok(headerless(BufWriter::new(File::create(dir.join(name))?)))
        };
        let mut runs = open(RUNS_FILE)?;
        runs.write_record(RUN_HEADER)?;
        runs.flush()?;
        let mut missed = open(MISSED_FILE)?;
        missed.write_record(MISSED_HEADER)?;
        missed.flush()?;
        let timings = if timings {
            let mut t = open(TIMINGS_FILE)?;
            t.write_record(["cell", "replicate", "estimator", "seconds"])?;
            Some(t)
        } else {
            None
        };
        Ok(Self { dir: dir.to_path_buf(), runs, missed, timings, truths_written: HashSet::new(), records: vec![] })
    }

    fn append(&mut self, u: UnitOutput) -> Result<()> {
        if let Some(truth) = &u.truth {
            if self.truths_written.insert((u.cell.graph, u.replicate)) {
                write_edge_list(
                    File::create(truth_path(&self.dir, u.cell.graph, u.replicate))?,
                    truth,
                    DEFAULT_ZERO_TOL,
                )?;
            }
        }
        for (est, w) in &u.estimates {
            write_edge_list(
                File::create(estimate_path(&self.dir, u.cell.index, u.replicate, *est))?,
                w,
                DEFAULT_ZERO_TOL,
            )?;
        }
        for m in &u.missed {
            self.missed.serialize(m)?;
        }
        for r in &u.records {
            self.runs.serialize(r)?;
            if let Some(t) = &mut self.timings {
                t.serialize(TimingRow {
                    cell: r.cell,
                    replicate: r.replicate,
                    estimator: r.estimator,
                    seconds: r.seconds,
                })?;
            }
        }
        self.missed.flush()?;
        self.runs.flush()?;
        if let Some(t) = &mut self.timings {
            t.flush()?;
        }
        self.records.extend(u.records);
        Ok(())
    }
}

pub const RUN_HEADER: [&str; 25] = [
    "cell",
    "d",
    "er_degree",
    "weights",
    "n",
    "noise",
    "model",
    "estimator",
    "replicate",
    "seed",
    "failed",
    "converged",
    "true_edges",
    "shd",
    "tpr",
    "fdr",
    "tp",
    "fp",
    "fn",
    "reversed",
    "predicted",
    "h_final",
    "lambda",
    "gamma",
    "error",
];

pub const MISSED_HEADER: [&str; 11] =
    ["cell", "d", "er_degree", "weights", "n", "noise", "estimator", "replicate", "src", "dst", "weight"];

/// Runs every (cell, estimator, replicate) and writes the output bundle to
/// `config.output_dir`. Individual failures are recorded, never fatal.
pub fn run_sweep(config: &ExperimentConfig, opts: SweepOptions) -> Result<SweepSummary> {
    config.validate()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(RESOLVED_CONFIG_FILE), config.to_toml()?)?;
    let mut appender = Appender::new(&dir, opts.timings)?;

    let units: Vec<(usize, DataCell, usize)> = data_cells(config)
        .into_iter()
        .flat_map(|c| (0..config.replicates).map(move |r| (c, r)))
        .enumerate()
        .map(|(u, (c, r))| (u, c, r))
        .collect();
    let total = units.len();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build().expect("thread pool");
    let (tx, rx) = mpsc::channel::<UnitOutput>();

    let mut write_result = Ok(());
    std::thread::scope(|s| {
        s.spawn(|| {
            pool.install(|| {
                units.into_par_iter().for_each_with(tx, |tx, (u, c, r)| {
                    let _ = tx.send(run_unit(config, u, c, r));
                })
            })
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for out in rx {
            pending.insert(out.unit, out);
            while let Some(out) = pending.remove(&next) {
                if write_result.is_ok() {
                    write_result = appender.append(out);
                }
                next += 1;
                log::info!("finished unit {next}/{total}");
            }
        }
    });
    write_result?;

    let records = std::mem::take(&mut appender.records);
    let aggregate = aggregate(&records);
    write_aggregate(&dir.join(AGGREGATE_FILE), &aggregate)?;
    let failures = records.iter().filter(|r| r.failed).count();
    Ok(SweepSummary { records, aggregate, failures, output_dir: dir })
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = headerless(BufWriter::new(File::create(path)?));
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const AGGREGATE_HEADER: [&str; 16] = [
    "cell",
    "d",
    "er_degree",
    "weights",
    "n",
    "noise",
    "model",
    "estimator",
    "runs",
    "failures",
    "shd_mean",
    "shd_sd",
    "tpr_mean",
    "tpr_sd",
    "fdr_mean",
    "fdr_sd",
];

/// Writer whose header row is written explicitly, so empty tables keep it.
pub(crate) fn headerless<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>> {
    read_csv(path)
}

pub fn read_missed(path: &Path) -> Result<Vec<MissedEdge>> {
    read_csv(path)
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    read_csv(path)
}

/// Serializes rows with `header` to a string; used to compare against files.
pub fn to_csv_string<T: Serialize>(header: &[&str], rows: &[T]) -> Result<String> {
    let mut w = headerless(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn aggregate_csv_string(rows: &[AggregateRow]) -> Result<String> {
    to_csv_string(&AGGREGATE_HEADER, rows)
}
