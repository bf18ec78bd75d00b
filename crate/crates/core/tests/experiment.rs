use std::fs;
use std::path::{Path, PathBuf};

use stalesgd::experiment::*;
use stalesgd::sim::read_rows;
use stalesgd::{run_replication, Error, ObjectiveSpec, RuntimeDistribution};

const BASE: &str = r#"
name = "demo"
replications = 3
master_seed = 5
burn_in = 10
grid_points = 50

[distribution]
kind = "exponential"
rate = 1.0

[objective]
objective = "quadratic"
dim = 4
eigenvalues = [1.0, 2.0, 3.0, 4.0]
sigma = 1.0

[[variants]]
name = "sync"
protocol = "k-sync"
learners = 4
wait_for = 2
iterations = 1200
schedule = { kind = "fixed", eta = 0.02 }

[[variants]]
name = "async"
protocol = "k-async"
learners = 4
wait_for = 1
iterations = 1200
schedule = { kind = "fixed", eta = 0.02 }

[[variants]]
name = "comp"
protocol = "k-batch-async"
learners = 4
wait_for = 2
iterations = 1200
schedule = { kind = "staleness_compensated", c = 0.001, eta_max = 0.02 }
"#;

fn base() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(BASE).unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn single_replication_matches_the_trace() {
    let mut cfg = base();
    cfg.replications = 1;
    let res = run_experiment(&cfg).unwrap();
    let obj = cfg.objective.as_ref().unwrap().build().unwrap();
    let dist = cfg.distribution.as_ref().unwrap();
    for nv in &cfg.variants {
        let trace = run_replication(&nv.config, obj.as_ref(), dist, cfg.master_seed, 0).unwrap();
        let v = res.variant(&nv.name).unwrap();
        assert_eq!(v.by_iteration.mean, trace.losses());
        assert!(v.by_iteration.stderr.is_none());
        let wc: Vec<f64> = trace.records.iter().map(|r| r.wallclock).collect();
        assert_eq!(v.columns.wallclock, wc);
        assert_eq!(v.final_loss, *trace.losses().last().unwrap());
    }
}

#[test]
fn outputs_are_byte_identical_across_reruns_and_worker_counts() {
    let mut written = Vec::new();
    for workers in [1, 1, 4] {
        let mut cfg = base();
        cfg.workers = Some(workers);
        let res = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&res, dir.path(), Formats { csv: true, plot: false }).unwrap();
        written.push(csv_files(dir.path()));
    }
    assert_eq!(written[0], written[1]);
    assert_eq!(written[0], written[2]);
    let names: Vec<&str> = written[0].iter().map(|(n, _)| n.as_str()).collect();
    for expected in ["summary.csv", "sync.csv", "sync_wallclock.csv", "sync_bound.csv", "async_bound.csv", "comp_bound.csv"] {
        assert!(names.contains(&expected), "{names:?}");
    }
}

#[test]
fn empty_experiment_writes_header_only_summary() {
    let cfg = ExperimentConfig::from_toml_str("name = \"empty\"").unwrap();
    assert!(matches!(run_experiment(&cfg), Err(Error::Validation(_))));
    let res = ExperimentResult { name: "empty".into(), horizon: 0.0, variants: Vec::new(), speedup: Vec::new() };
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(&res, dir.path(), Formats::default()).unwrap();
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(text, format!("{}\n", SUMMARY_HEADER.join(",")));
}

#[test]
fn summary_reports_bounds_and_runtimes() {
    let res = run_experiment(&base()).unwrap();
    let mut buf = Vec::new();
    write_summary(&mut buf, &res).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SUMMARY_HEADER.join(","));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][0], "sync");
    assert_eq!(rows[0][9], "k_sync");
    assert_eq!(rows[1][9], "k_async");
    assert_eq!(rows[2][9], "variable_lr");
    let theory_t: f64 = rows[0][7].parse().unwrap();
    assert!((theory_t - (1.0 / 4.0 + 1.0 / 3.0)).abs() < 1e-12);
    for r in &rows {
        assert_eq!(r[11], "0");
    }
    let a = res.variant("async").unwrap();
    assert!(a.gamma.is_some() && a.p0.is_some());
}

#[test]
fn curve_files_round_trip() {
    let res = run_experiment(&base()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(&res, dir.path(), Formats { csv: true, plot: true }).unwrap();
    for v in &res.variants {
        let rows = read_curve_file(&dir.path().join(format!("{}.csv", v.name))).unwrap();
        assert_eq!(rows, iteration_rows(v));
        let bound = read_curve_file(&dir.path().join(format!("{}_bound.csv", v.name))).unwrap();
        let expected = bound_rows(v).unwrap();
        assert_eq!(bound.len(), expected.len());
        for (a, b) in bound.iter().zip(&expected) {
            assert_eq!((a.iteration, a.value), (b.iteration, b.value));
        }
        let wc = read_wallclock_curve(&fs::read_to_string(dir.path().join(format!("{}_wallclock.csv", v.name))).unwrap())
            .unwrap();
        assert_eq!(wc, v.by_wallclock);
    }
    assert!(dir.path().join("demo.svg").exists());
    assert!(dir.path().join("demo_iterations.svg").exists());
    let rows = read_rows(&fs::read_to_string(dir.path().join("sync.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1200);
}

#[test]
fn validation_lists_every_violation() {
    let mut cfg = base();
    cfg.replications = 0;
    cfg.burn_in = 5000;
    cfg.variants[1].name = "sync".into();
    cfg.variants[2].config.wait_for = 9;
    cfg.distribution = None;
    let Err(Error::Validation(msgs)) = cfg.validate() else { panic!("expected validation error") };
    assert!(msgs.len() >= 4, "{msgs:?}");
    let joined = msgs.join("\n");
    for needle in ["replications", "burn_in", "duplicate", "distribution"] {
        assert!(joined.contains(needle), "missing {needle}: {joined}");
    }
    let unknown = ExperimentConfig::from_toml_str("name = \"x\"\nbogus = 1");
    assert!(matches!(unknown, Err(Error::Validation(_))));
    let mut reserved = base();
    reserved.variants[0].name = "summary".into();
    assert!(reserved.validate().is_err());
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = base();
    assert_eq!(ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
}

#[test]
fn k_sweep_at_full_wait_equals_fully_synchronous_run() {
    let mut cfg = base();
    cfg.variants.truncate(1);
    let points = sweep(&cfg, SweepAxis::K, &[4.0]).unwrap();
    let mut direct = cfg.clone();
    direct.variants[0].config.wait_for = 4;
    let d = run_experiment(&direct).unwrap();
    assert_eq!(points[0].1.variants[0].by_iteration, d.variants[0].by_iteration);
    assert!(matches!(sweep(&cfg, SweepAxis::K, &[2.0, 9.0]), Err(Error::Validation(_))));
    assert!(matches!(sweep(&cfg, SweepAxis::K, &[1.5]), Err(Error::Validation(_))));

    let dir = tempfile::tempdir().unwrap();
    emit_sweep(SweepAxis::K, &points, dir.path(), Formats { csv: true, plot: false }).unwrap();
    assert!(dir.path().join("K_4/summary.csv").exists());
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(table.starts_with("K,variant,final_loss,loss_at_horizon,mean_T\n4,sync,"));
}

#[test]
fn m_sweep_scales_the_shift() {
    let mut cfg = base();
    cfg.unit_compute_time = Some(0.5);
    assert!(sweep_point(&cfg, SweepAxis::M, 2.0).is_err());
    cfg.distribution = Some(RuntimeDistribution::shifted_exponential(0.5, 1.0).unwrap());
    let p = sweep_point(&cfg, SweepAxis::M, 4.0).unwrap();
    assert_eq!(p.distribution, Some(RuntimeDistribution::shifted_exponential(2.0, 1.0).unwrap()));
    assert!(p.variants.iter().all(|v| v.config.batch_size == 4));
    let e = sweep_point(&cfg, SweepAxis::Eta, 0.07).unwrap();
    assert_eq!(e.variants[0].config.schedule.ceiling(), 0.07);
    assert_eq!(e.variants[2].config.schedule.ceiling(), 0.07);
}

#[test]
fn recipe_configs_parse_and_validate() {
    let mut n = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if let Some(ObjectiveSpec::Quadratic { .. }) = cfg.objective {
            cfg.objective.as_ref().unwrap().build().unwrap();
        }
        n += 1;
    }
    assert_eq!(n, 9);
}

#[test]
fn kasync_vs_kbatch_recipe_has_paired_variants() {
    let cfg = ExperimentConfig::from_path(&configs_dir().join("kasync_vs_kbatch.toml")).unwrap();
    for k in [1, 4, 8] {
        for proto in ["k_async", "k_batch_async"] {
            let v = cfg.variants.iter().find(|v| v.name == format!("{proto}_K{k}")).unwrap();
            assert_eq!((v.config.learners, v.config.wait_for), (8, k));
        }
    }
    let mut small = cfg.clone();
    small.replications = 2;
    small.variants.iter_mut().for_each(|v| v.config.iterations = 300);
    let res = run_experiment(&small).unwrap();
    assert_eq!(res.variants.len(), 6);
    for k in [1, 4, 8] {
        let a = res.variant(&format!("k_async_K{k}")).unwrap().runtime.unwrap().value;
        let b = res.variant(&format!("k_batch_async_K{k}")).unwrap().runtime.unwrap().value;
        assert!(b <= a * 1.05, "K={k}: batch {b} vs async {a}");
    }
}

#[test]
fn speedup_recipe_table() {
    let cfg = ExperimentConfig::from_path(&configs_dir().join("speedup_table.toml")).unwrap();
    let mut cfg = cfg;
    cfg.speedup_table.as_mut().unwrap().samples = 5_000;
    let res = run_experiment(&cfg).unwrap();
    assert_eq!(res.speedup.len(), 18);
    let exp64 = res.speedup.iter().find(|r| r.distribution.starts_with("exp") && r.learners == 64).unwrap();
    let h64: f64 = (1..=64).map(|i| 1.0 / i as f64).sum();
    assert!((exp64.speedup.value - 64.0 * h64).abs() < 1e-9);
    let mut buf = Vec::new();
    write_speedup(&mut buf, &res.speedup).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 19);
}

#[test]
fn ordering_of_protocols_under_heavy_tails() {
    let mut cfg = ExperimentConfig::from_path(&configs_dir().join("runtime_pareto.toml")).unwrap();
    cfg.replications = 3;
    let res = run_experiment(&cfg).unwrap();
    let t = |name: &str| res.variant(name).unwrap().runtime.unwrap().value;
    assert!(t("k_batch_async") < t("k_async"));
    assert!(t("k_async") < t("k_sync"));
}
