//! Plot-ready CSV bundles from sweep records.
//!
//! * `by_density/{metric}_er{k}.csv`: `estimator,d,mean,sd,count`, one file
//!   per metric and ER degree, pooled over the other axes.
//! * `by_estimator/{metric}.csv`: per-cell rows keyed by estimator.
//! * `missed_hist.csv`: histogram of true weights of missed edges per
//!   estimator, bins of width [`BIN_WIDTH`] covering the weight-distribution
//!   support.
//!
//! Failed runs are excluded from every mean.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sparsedag::graphs::WeightDist;

use crate::config::SweepEstimator;
use crate::error::Result;
use crate::sweep::{headerless, mean_sd, MissedEdge, RunRecord};

pub const BIN_WIDTH: f64 = 0.25;
pub const METRICS: [&str; 3] = ["shd", "tpr", "fdr"];

fn metric(r: &RunRecord, name: &str) -> Option<f64> {
    match name {
        "shd" => r.shd.map(|v| v as f64),
        "tpr" => r.tpr,
        "fdr" => r.fdr,
        _ => None,
    }
}

#[derive(Serialize)]
struct DensityRow {
    estimator: SweepEstimator,
    d: usize,
    mean: Option<f64>,
    sd: Option<f64>,
    count: usize,
}

#[derive(Serialize)]
struct EstimatorRow<'a> {
    cell: usize,
    d: usize,
    er_degree: f64,
    weights: &'a str,
    n: usize,
    noise: &'a str,
    estimator: SweepEstimator,
    mean: Option<f64>,
    sd: Option<f64>,
    count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistBin {
    pub estimator: SweepEstimator,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = headerless(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// ER degree as a file-name token: `1`, `2`, `0.5`.
fn degree_token(k: f64) -> String {
    format!("{k}")
}

/// Bins of width [`BIN_WIDTH`] on a grid anchored at 0 that cover `[lo, hi]`.
pub fn bin_edges(lo: f64, hi: f64) -> Vec<f64> {
    let first = (lo / BIN_WIDTH).floor() as i64;
    let last = ((hi / BIN_WIDTH).ceil() as i64).max(first + 1);
    (first..=last).map(|k| k as f64 * BIN_WIDTH).collect()
}

/// Counts of missed-edge weights per estimator over the union of the
/// records' weight supports. Every estimator in `records` gets a series.
pub fn missed_histogram(records: &[RunRecord], missed: &[MissedEdge]) -> Vec<HistBin> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for w in records.iter().map(|r| r.weights.as_str()).chain(missed.iter().map(|m| m.weights.as_str())) {
        if let Ok(dist) = w.parse::<WeightDist>() {
            let (a, b) = dist.support();
            lo = lo.min(a);
            hi = hi.max(b);
        }
    }
    for m in missed {
        lo = lo.min(m.weight);
        hi = hi.max(m.weight);
    }
    if !lo.is_finite() {
        return vec![];
    }
    let edges = bin_edges(lo, hi);
    let mut estimators: Vec<SweepEstimator> =
        records.iter().map(|r| r.estimator).chain(missed.iter().map(|m| m.estimator)).collect();
    estimators.sort();
    estimators.dedup();
    let nbins = edges.len() - 1;
    let mut out = Vec::new();
    for est in estimators {
        let mut counts = vec![0usize; nbins];
        for m in missed.iter().filter(|m| m.estimator == est) {
            let k = (((m.weight - edges[0]) / BIN_WIDTH).floor() as usize).min(nbins - 1);
            counts[k] += 1;
        }
        for (k, count) in counts.into_iter().enumerate() {
            out.push(HistBin { estimator: est, bin_lo: edges[k], bin_hi: edges[k + 1], count });
        }
    }
    out
}

/// Writes the bundle under `out_dir` and returns the files written.
pub fn emit_plot_data(records: &[RunRecord], missed: &[MissedEdge], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.failed).collect();

    let density_dir = out_dir.join("by_density");
    fs::create_dir_all(&density_dir)?;
    let mut degrees: Vec<f64> = records.iter().map(|r| r.er_degree).collect();
    degrees.sort_by(f64::total_cmp);
    degrees.dedup();
    for &k in &degrees {
        for m in METRICS {
            let mut groups: BTreeMap<(SweepEstimator, usize), Vec<f64>> = BTreeMap::new();
            for r in ok.iter().filter(|r| r.er_degree == k) {
                if let Some(v) = metric(r, m) {
                    groups.entry((r.estimator, r.d)).or_default().push(v);
                }
            }
            let rows: Vec<DensityRow> = groups
                .into_iter()
                .map(|((estimator, d), vals)| {
                    let (mean, sd) = mean_sd(&vals);
                    DensityRow { estimator, d, mean, sd, count: vals.len() }
                })
                .collect();
            let path = density_dir.join(format!("{m}_er{}.csv", degree_token(k)));
            write_rows(&path, &["estimator", "d", "mean", "sd", "count"], &rows)?;
            written.push(path);
        }
    }

    let est_dir = out_dir.join("by_estimator");
    fs::create_dir_all(&est_dir)?;
    for m in METRICS {
        let mut groups: BTreeMap<(usize, SweepEstimator), (Vec<f64>, &RunRecord)> = BTreeMap::new();
        for r in &ok {
            if let Some(v) = metric(r, m) {
                groups.entry((r.cell, r.estimator)).or_insert_with(|| (vec![], r)).0.push(v);
            }
        }
        let rows: Vec<EstimatorRow> = groups
            .into_values()
            .map(|(vals, r)| {
                let (mean, sd) = mean_sd(&vals);
                EstimatorRow {
                    cell: r.cell,
                    d: r.d,
                    er_degree: r.er_degree,
                    weights: &r.weights,
                    n: r.n,
                    noise: &r.noise,
                    estimator: r.estimator,
                    mean,
                    sd,
                    count: vals.len(),
                }
            })
            .collect();
        let path = est_dir.join(format!("{m}.csv"));
        write_rows(
            &path,
            &["cell", "d", "er_degree", "weights", "n", "noise", "estimator", "mean", "sd", "count"],
            &rows,
        )?;
        written.push(path);
    }

    let path = out_dir.join("missed_hist.csv");
    write_rows(&path, &["estimator", "bin_lo", "bin_hi", "count"], &missed_histogram(records, missed))?;
    written.push(path);
    Ok(written)
}
