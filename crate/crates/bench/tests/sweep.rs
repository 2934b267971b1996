use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::Path;
use std::process::Command;

use sparsedag::graphs::{read_edge_list, topological_order};
use sparsedag_bench::sweep::{
    aggregate_csv_string, data_cells, estimate_path, read_aggregate, read_runs, AGGREGATE_FILE, RUNS_FILE,
};
use sparsedag_bench::{aggregate, run_sweep, ExperimentConfig, SweepEstimator, SweepOptions};

fn config(dir: &Path, extra: &str) -> ExperimentConfig {
    let text = format!(
        r#"
schema_version = 1
seed = 11
replicates = 3
n = [200]
estimators = ["notears_fixed", "notears_al", "ols_only"]
output_dir = "{}"
{extra}

[[graphs]]
d = 5
er_degree = 1.0
weights = "gaussian:0:2"

[[graphs]]
d = 5
er_degree = 2.0
weights = "uniform:3"
"#,
        dir.display()
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in fs::read_dir(&p).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let key = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(key, fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn rerun_is_byte_identical_regardless_of_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    run_sweep(&cfg, SweepOptions { jobs: 1, timings: false }).unwrap();
    let first = snapshot(tmp.path());
    run_sweep(&cfg, SweepOptions { jobs: 3, timings: false }).unwrap();
    let second = snapshot(tmp.path());
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (k, v) in &first {
        assert!(v == &second[k], "{k} differs between runs");
    }
    assert!(first.contains_key("config.resolved.toml"));
}

#[test]
fn outputs_are_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let summary = run_sweep(&cfg, SweepOptions::default()).unwrap();
    assert_eq!(summary.failures, 0);

    // One record per cell × estimator × replicate.
    let runs = read_runs(&tmp.path().join(RUNS_FILE)).unwrap();
    assert_eq!(runs.len(), data_cells(&cfg).len() * cfg.estimators.len() * cfg.replicates);
    let mut keys: Vec<_> = runs.iter().map(|r| (r.cell, r.estimator, r.replicate)).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), runs.len());

    // Aggregates recomputed from the per-run file match the emitted table exactly.
    let agg_text = fs::read_to_string(tmp.path().join(AGGREGATE_FILE)).unwrap();
    assert_eq!(aggregate_csv_string(&aggregate(&runs)).unwrap(), agg_text);
    assert_eq!(read_aggregate(&tmp.path().join(AGGREGATE_FILE)).unwrap(), summary.aggregate);

    // Every estimate reloads as a DAG.
    for r in &runs {
        let w =
            read_edge_list(File::open(estimate_path(tmp.path(), r.cell, r.replicate, r.estimator)).unwrap(), Some(r.d))
                .unwrap();
        assert!(topological_order(&w, 0.0).is_ok());
        assert_eq!(w.edge_count(0.0), r.predicted.unwrap());
    }
}

#[test]
fn run_failures_are_recorded_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    // CV needs 20 rows, so every notears_al run fails.
    let mut cfg = config(tmp.path(), "");
    cfg.n = vec![15];
    let summary = run_sweep(&cfg, SweepOptions::default()).unwrap();
    let failed: Vec<_> = summary.records.iter().filter(|r| r.failed).collect();
    assert_eq!(failed.len(), summary.failures);
    assert_eq!(failed.len(), 2 * cfg.replicates);
    assert!(failed.iter().all(|r| r.estimator == SweepEstimator::NotearsAl && !r.error.is_empty() && r.shd.is_none()));
    let al = summary.aggregate.iter().find(|a| a.estimator == SweepEstimator::NotearsAl).unwrap();
    assert_eq!((al.failures, al.shd_mean), (cfg.replicates, None));
}

#[test]
fn two_estimator_rows_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        r#"
schema_version = 1
replicates = 15
n = [1000]
estimators = ["notears_fixed", "notears_al"]
output_dir = "{}"
[[graphs]]
d = 10
er_degree = 1.0
weights = "gaussian:0:2"
"#,
        tmp.path().display()
    );
    let summary = run_sweep(&ExperimentConfig::from_toml(&text).unwrap(), SweepOptions::default()).unwrap();
    assert_eq!(summary.aggregate.len(), 2);
    assert!(summary.aggregate.iter().all(|a| a.runs == 15));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for e in fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|err| panic!("{}: {err}", path.display()));
        if path.file_name().unwrap() == "high_dim.toml" {
            assert!(cfg.graphs.iter().any(|g| g.d == 100 && g.er_degree == 2.0));
        }
        seen += 1;
    }
    assert!(seen >= 6);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsedag-bench"))
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let write_cfg = |name: &str, n: usize| {
        let mut cfg = config(&tmp.path().join(name), "");
        cfg.n = vec![n];
        cfg.replicates = 1;
        let path = tmp.path().join(format!("{name}.toml"));
        fs::write(&path, cfg.to_toml().unwrap()).unwrap();
        path
    };
    let ok = write_cfg("ok", 100);
    let status = bin().args(["sweep", "--config"]).arg(&ok).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let with_failures = write_cfg("fail", 15);
    let status = bin().args(["sweep", "--config"]).arg(&with_failures).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "schema_version = 9\n").unwrap();
    let status = bin().args(["sweep", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let plots = tmp.path().join("plots");
    let status =
        bin().args(["report", "--input"]).arg(tmp.path().join("ok")).arg("--out").arg(&plots).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(plots.join("missed_hist.csv").exists());
}

#[test]
fn cli_generate_then_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("gen");
    let status = bin()
        .args(["generate", "--d", "6", "--degree", "1", "--n", "400", "--seed", "2", "--out"])
        .arg(&g)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for est in ["notears_fixed", "notears_al", "ols_only"] {
        let out = tmp.path().join(est);
        let o = bin()
            .args(["fit", "--estimator", est, "--data"])
            .arg(g.join("data.csv"))
            .arg("--truth")
            .arg(g.join("graph.csv"))
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("estimate.json")).unwrap()).unwrap();
        assert!(json["W_hat"].is_array());
    }
    let o =
        bin().args(["cv", "--data"]).arg(g.join("data.csv")).arg("--out").arg(tmp.path().join("cv")).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let table = fs::read_to_string(tmp.path().join("cv/cv_table.csv")).unwrap();
    assert!(table.starts_with("lambda,gamma,fold,support_size,val_loss\n"));
}
