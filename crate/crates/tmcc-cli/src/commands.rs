//! The generate / fit / bench commands. All outputs land in the config's
//! output directory; every emitted file is deterministic for a pinned
//! config except the timing CSVs, which are explicitly wall-clock.

use crate::config::{scenario_label, RunConfig};
use crate::matio;
use crate::{io_err, CliError};
use ndarray::{concatenate, Axis};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use tmcc::data_model::{self, Dataset};
use tmcc::evaluation::{
    self, default_grid, evaluate_method, fit_method, record_from_fit, summarize, top_sigma, tune,
    EvalError, ExperimentOutput, Method, MethodFit, SummaryTable, TrialRecord,
};
use tmcc::objective::Hyperparams;
use tmcc::synth::{generate, GroundTruth};

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    io_err(path, std::io::Error::other(e))
}

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::AllGridPointsFailed { .. } => CliError::Solver(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.scenario_spec();
    let (truth, ds) = generate(&spec).map_err(|e| CliError::Config(e.to_string()))?;
    let dir = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: String, m: &tmcc::linalg::DenseMatrix| -> Result<(), CliError> {
        let path = dir.join(name);
        matio::write_matrix(&path, m)?;
        written.push(path);
        Ok(())
    };
    emit("x_star.csv".into(), &truth.x_star)?;
    for (s, z) in truth.z_star.iter().enumerate() {
        emit(format!("z_star_{}.csv", s + 1), z)?;
    }
    let path = dir.join("dataset.csv");
    matio::write_dataset(&path, &ds)?;
    written.push(path);
    Ok(written)
}

fn load_truth(dir: &Path, ds: &Dataset) -> Result<GroundTruth, CliError> {
    let x_star = matio::read_matrix(&dir.join("x_star.csv"))?;
    let mut z_star = Vec::with_capacity(ds.tasks.len());
    for s in 1..=ds.tasks.len() {
        z_star.push(matio::read_matrix(&dir.join(format!("z_star_{s}.csv")))?);
    }
    let mut views = vec![x_star.view()];
    views.extend(z_star.iter().map(|z| z.view()));
    let m_star = concatenate(Axis(1), &views)
        .map_err(|e| CliError::Config(format!("truth blocks do not align: {e}")))?;
    Ok(GroundTruth {
        x_star,
        z_star,
        m_star,
    })
}

/// Per-method penalties: the fixed pair when pinned, otherwise a grid
/// search scored against `truth`.
fn tuned_hyperparams(
    cfg: &RunConfig,
    methods: &[Method],
    ds: &Dataset,
    truth: &GroundTruth,
) -> Result<BTreeMap<Method, Hyperparams>, CliError> {
    let mut tuned = BTreeMap::new();
    match cfg.fixed_hp() {
        Some(hp) => {
            for &m in methods {
                tuned.insert(m, hp);
            }
        }
        None => {
            let scale = top_sigma(ds);
            let base = cfg.solver_config(Hyperparams::default());
            for &m in methods {
                let grid = default_grid(m, scale);
                let hp = tune(ds, truth, m, &grid, &base).map_err(eval_err)?;
                tuned.insert(m, hp);
            }
        }
    }
    Ok(tuned)
}

fn write_records_csv(path: &Path, records: &[TrialRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "method",
        "trial",
        "seed",
        "ds_hash",
        "tau1",
        "tau2",
        "re_x",
        "re_z",
        "iterations",
        "converged",
        "restarts",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record([
            r.method.label().to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.ds_hash.to_string(),
            fmt(r.tau1),
            fmt(r.tau2),
            fmt(r.re_x),
            fmt(r.re_z),
            r.iterations.to_string(),
            r.converged.to_string(),
            r.restarts.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_timings_csv(path: &Path, records: &[TrialRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["method", "trial", "wall_time", "stage1", "stage2"])
        .map_err(|e| csv_err(path, e))?;
    for r in records {
        let (s1, s2) = match r.stage_times {
            Some((a, b)) => (fmt(a), fmt(b)),
            None => (String::new(), String::new()),
        };
        w.write_record([
            r.method.label().to_string(),
            r.trial.to_string(),
            fmt(r.wall_time),
            s1,
            s2,
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_failures_csv(path: &Path, output: &ExperimentOutput) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["method", "trial", "seed", "message"])
        .map_err(|e| csv_err(path, e))?;
    for f in &output.failures {
        w.write_record([
            f.method.label().to_string(),
            f.trial.to_string(),
            f.seed.to_string(),
            f.message.clone(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_summary_csv(path: &Path, scenario: &str, table: &SummaryTable) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "method",
        "scenario",
        "count",
        "failed",
        "re_x_mean",
        "re_x_se",
        "re_z_mean",
        "re_z_se",
        "time_mean",
        "time_se",
        "time_stages",
    ])
    .map_err(|e| csv_err(path, e))?;
    for row in &table.rows {
        let stages = match row.mean_stage_times {
            Some((a, b)) => format!("{a:.2}+{b:.2}"),
            None => String::new(),
        };
        w.write_record([
            row.method.label().to_string(),
            scenario.to_string(),
            row.count.to_string(),
            row.failed.to_string(),
            fmt(row.mean_re_x),
            fmt(row.se_re_x),
            fmt(row.mean_re_z),
            fmt(row.se_re_z),
            fmt(row.mean_time),
            fmt(row.se_time),
            stages,
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_trace_csv(path: &Path, trace: &[f64]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["iter", "objective"])
        .map_err(|e| csv_err(path, e))?;
    for (k, v) in trace.iter().enumerate() {
        w.write_record([k.to_string(), fmt(*v)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = Path::new(&cfg.output_dir);
    let ds = matio::read_dataset(&dir.join("dataset.csv"))?;
    let violations = data_model::validate(&ds);
    if !violations.is_empty() {
        let text = violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("\n");
        return Err(CliError::Validation(text));
    }
    let truth = load_truth(dir, &ds)?;
    let methods = cfg.parsed_methods()?;
    let tuned = tuned_hyperparams(cfg, &methods, &ds, &truth)?;
    let seed = cfg.scenario.seed;
    let mut records = Vec::new();
    for &method in &methods {
        let hp = tuned[&method];
        let scfg = cfg.solver_config(hp);
        let run: MethodFit =
            fit_method(&ds, method, &scfg).map_err(|e| CliError::Solver(e.to_string()))?;
        let label = method.label();
        write_trace_csv(
            &dir.join(format!("trace_{label}_1.csv")),
            &run.fit.objective_trace,
        )?;
        let m_hat = concatenate![Axis(1), run.x_hat.view(), run.z_hat.view()];
        matio::write_matrix(&dir.join(format!("m_hat_{label}_1.csv")), &m_hat)?;
        let record = record_from_fit(&ds, &truth, method, hp, &run, 1, seed)
            .map_err(|f| CliError::Solver(f.message))?;
        records.push(record);
    }
    write_records_csv(&dir.join("records.csv"), &records)?;
    write_timings_csv(&dir.join("timings.csv"), &records)
}

/// Trial-parallel variant of the library's experiment runner; workers
/// only change scheduling, never the records, and the merge keeps trial
/// order.
fn run_trials(
    cfg: &RunConfig,
    methods: &[Method],
    tuned: &BTreeMap<Method, Hyperparams>,
    workers: usize,
) -> Result<ExperimentOutput, CliError> {
    let spec = cfg.scenario_spec();
    let base = cfg.solver_config(Hyperparams::default());
    if workers <= 1 {
        return evaluation::run_experiment(&spec, methods, cfg.trials, tuned, &base)
            .map_err(eval_err);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let per_trial: Vec<Result<ExperimentOutput, EvalError>> = pool.install(|| {
        (1..=cfg.trials)
            .into_par_iter()
            .map(|t| {
                let seed = spec.seed + t as u64;
                let trial_spec = tmcc::synth::ScenarioSpec {
                    seed,
                    ..spec.clone()
                };
                let (truth, ds) = generate(&trial_spec)?;
                let mut out = ExperimentOutput::default();
                for &method in methods {
                    let hp = *tuned.get(&method).unwrap_or(&Hyperparams::default());
                    match evaluate_method(&ds, &truth, method, hp, &base, t, seed) {
                        Ok(r) => out.records.push(r),
                        Err(f) => out.failures.push(f),
                    }
                }
                Ok(out)
            })
            .collect()
    });
    let mut merged = ExperimentOutput::default();
    for part in per_trial {
        let part = part.map_err(eval_err)?;
        merged.records.extend(part.records);
        merged.failures.extend(part.failures);
    }
    Ok(merged)
}

pub fn cmd_bench(cfg: &RunConfig, workers: usize) -> Result<(), CliError> {
    let dir = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let methods = cfg.parsed_methods()?;
    let spec = cfg.scenario_spec();
    let (vtruth, vds) = generate(&spec).map_err(|e| CliError::Config(e.to_string()))?;
    let tuned = tuned_hyperparams(cfg, &methods, &vds, &vtruth)?;
    let output = run_trials(cfg, &methods, &tuned, workers)?;
    write_records_csv(&dir.join("records.csv"), &output.records)?;
    write_timings_csv(&dir.join("timings.csv"), &output.records)?;
    write_failures_csv(&dir.join("failures.csv"), &output)?;
    let table = summarize(&output);
    write_summary_csv(&dir.join("summary.csv"), &scenario_label(cfg), &table)?;
    for row in &table.rows {
        println!(
            "{}: re_x {:.4} ({:.4}), re_z {:.4} ({:.4}), {} ok / {} failed",
            row.method.label(),
            row.mean_re_x,
            row.se_re_x,
            row.mean_re_z,
            row.se_re_z,
            row.count,
            row.failed
        );
    }
    Ok(())
}
