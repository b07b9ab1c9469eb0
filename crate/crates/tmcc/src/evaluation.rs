//! Experiment harness: relative-error metrics, hyperparameter tuning on a
//! validation scenario, repeated-trial execution, and mean/standard-error
//! summaries.
//!
//! Conventions pinned here: trial `t` (1-based) generates its data from
//! seed `spec.seed + t`, so a validation scenario built from `spec.seed`
//! itself never collides with a trial; the standard error is the sample
//! standard deviation (n-1 denominator) divided by the square root of the
//! trial count, 0 for a single trial; failed trials are excluded from the
//! averages and reported as counts, never imputed.

use crate::data_model::Dataset;
use crate::expfam::Family;
use crate::linalg::{self, DenseMatrix};
use crate::objective::Hyperparams;
use crate::solvers::{self, FitResult, SolverConfig};
use crate::synth::{generate, GroundTruth, ScenarioSpec, SynthError};
use ndarray::{s, ArrayView2};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shapes {est:?} and {truth:?} do not match")]
    ShapeMismatch {
        est: (usize, usize),
        truth: (usize, usize),
    },
    #[error("truth matrix has zero Frobenius norm")]
    ZeroNormTruth,
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("every grid point failed: {}", failures.join("; "))]
    AllGridPointsFailed { failures: Vec<String> },
    #[error("unknown method name {0:?}")]
    UnknownMethod(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Tmcc,
    Mc0,
    CmcSi,
    Ts,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Tmcc, Method::Mc0, Method::CmcSi, Method::Ts];

    pub fn label(self) -> &'static str {
        match self {
            Method::Tmcc => "TMCC",
            Method::Mc0 => "MC0",
            Method::CmcSi => "CMC_SI",
            Method::Ts => "TS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "TMCC" => Ok(Method::Tmcc),
            "MC0" => Ok(Method::Mc0),
            "CMC_SI" => Ok(Method::CmcSi),
            "TS" => Ok(Method::Ts),
            _ => Err(EvalError::UnknownMethod(s.to_string())),
        }
    }
}

/// One completed (method, trial) run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub method: Method,
    /// 1-based trial index.
    pub trial: usize,
    /// Data seed the trial's scenario was generated from.
    pub seed: u64,
    pub ds_hash: u64,
    pub tau1: f64,
    pub tau2: f64,
    pub re_x: f64,
    pub re_z: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarts: usize,
    pub wall_time: f64,
    pub stage_times: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub count: usize,
    pub failed: usize,
    pub mean_re_x: f64,
    pub se_re_x: f64,
    pub mean_re_z: f64,
    pub se_re_z: f64,
    pub mean_time: f64,
    pub se_time: f64,
    /// Mean stage durations where the method reports them.
    pub mean_stage_times: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

/// `||est - truth||_F / ||truth||_F`.
pub fn relative_error(est: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64, EvalError> {
    if est.dim() != truth.dim() {
        return Err(EvalError::ShapeMismatch {
            est: est.dim(),
            truth: truth.dim(),
        });
    }
    let denom = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(EvalError::ZeroNormTruth);
    }
    let num = est
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

fn fnv1a(hash: &mut u64, bytes: &[u8]) {
    for &b in bytes {
        *hash ^= u64::from(b);
        *hash = hash.wrapping_mul(0x100000001b3);
    }
}

fn fnv1a_f64s<'a>(hash: &mut u64, values: impl Iterator<Item = &'a f64>) {
    for v in values {
        fnv1a(hash, &v.to_bits().to_le_bytes());
    }
}

/// FNV-1a fingerprint of a dataset's shape, families, values, masks, and
/// calibration, for checking that runs consumed identical data.
pub fn ds_hash(ds: &Dataset) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    fnv1a(&mut h, &(ds.n() as u64).to_le_bytes());
    fnv1a(&mut h, &(ds.d() as u64).to_le_bytes());
    fnv1a(&mut h, &(ds.tasks.len() as u64).to_le_bytes());
    fnv1a_f64s(&mut h, ds.features.values().iter());
    fnv1a_f64s(&mut h, ds.features.mask().iter());
    for task in &ds.tasks {
        fnv1a(&mut h, task.family.label().as_bytes());
        if let Family::Gaussian { sigma2 } = task.family {
            fnv1a(&mut h, &sigma2.to_bits().to_le_bytes());
        }
        fnv1a(&mut h, &(task.data.ncols() as u64).to_le_bytes());
        fnv1a_f64s(&mut h, task.data.values().iter());
        fnv1a_f64s(&mut h, task.data.mask().iter());
    }
    match &ds.calibration {
        None => fnv1a(&mut h, b"none"),
        Some(cal) => {
            fnv1a(&mut h, &(cal.a.nrows() as u64).to_le_bytes());
            fnv1a_f64s(&mut h, cal.a.iter());
            fnv1a_f64s(&mut h, cal.b.iter());
        }
    }
    h
}

/// Top singular value of the zero-filled concatenation; the scale the
/// default `tau2` grid is anchored to.
pub fn top_sigma(ds: &Dataset) -> f64 {
    linalg::norm_operator(&ds.zero_filled_concat().m)
}

/// Default tuning grid: 8 log-spaced `tau2` values spanning
/// `[1e-7, 1e-2] * top_sigma`; the joint method additionally sweeps `tau1`
/// over `{0, 1e-3, 1e-2, 1e-1, 1}`, every other method keeps `tau1 = 0`.
pub fn default_grid(method: Method, top_sigma: f64) -> Vec<Hyperparams> {
    let scale = if top_sigma > 0.0 { top_sigma } else { 1.0 };
    let (lo, hi) = (1e-7 * scale, 1e-2 * scale);
    let ratio = (hi / lo).powf(1.0 / 7.0);
    let tau2s: Vec<f64> = (0..8).map(|i| lo * ratio.powi(i)).collect();
    let tau1s: &[f64] = match method {
        Method::Tmcc => &[0.0, 1e-3, 1e-2, 1e-1, 1.0],
        _ => &[0.0],
    };
    let mut grid = Vec::with_capacity(tau1s.len() * tau2s.len());
    for &tau1 in tau1s {
        for &tau2 in &tau2s {
            grid.push(Hyperparams { tau1, tau2 });
        }
    }
    grid
}

fn with_hp(base: &SolverConfig, hp: Hyperparams) -> SolverConfig {
    SolverConfig { hp, ..base.clone() }
}

fn response_truth(truth: &GroundTruth) -> ArrayView2<'_, f64> {
    let d = truth.x_star.ncols();
    truth.m_star.slice(s![.., d..])
}

/// A method's fit reduced to the pieces the metrics and the file outputs
/// need: the recovered feature and response blocks plus the underlying
/// solver result. For composite methods `fit.wall_time` covers both
/// stages and `stage_times` splits it.
pub struct MethodFit {
    pub x_hat: DenseMatrix,
    pub z_hat: DenseMatrix,
    pub fit: FitResult,
    pub stage_times: Option<(f64, f64)>,
}

/// Run one method on a dataset. `cfg.hp` carries the penalties.
pub fn fit_method(
    ds: &Dataset,
    method: Method,
    cfg: &SolverConfig,
) -> Result<MethodFit, solvers::SolverError> {
    match method {
        Method::Tmcc | Method::Mc0 | Method::Ts => {
            let fit = match method {
                Method::Tmcc => solvers::tmcc_fit(ds, cfg)?,
                Method::Mc0 => solvers::mc0_fit(ds, cfg)?,
                _ => solvers::two_stage_fit(ds, cfg)?,
            };
            let x_hat = fit.m_out.slice_feature().to_owned();
            let z_hat = fit.m_out.slice_responses().to_owned();
            let stage_times = fit.stage_times;
            Ok(MethodFit {
                x_hat,
                z_hat,
                fit,
                stage_times,
            })
        }
        Method::CmcSi => {
            let detail = solvers::cmc_si_detail(ds, cfg)?;
            let z_time = detail.z_fit.wall_time;
            let mut fit = detail.z_fit;
            fit.wall_time += detail.si_time;
            Ok(MethodFit {
                x_hat: detail.x_hat,
                z_hat: fit.m_out.m.clone(),
                fit,
                stage_times: Some((detail.si_time, z_time)),
            })
        }
    }
}

/// Score an existing fit against the truth. Non-finite errors come back
/// as a [`TrialFailure`].
pub fn record_from_fit(
    ds: &Dataset,
    truth: &GroundTruth,
    method: Method,
    hp: Hyperparams,
    run: &MethodFit,
    trial: usize,
    seed: u64,
) -> Result<TrialRecord, TrialFailure> {
    let fail = |message: String| TrialFailure {
        method,
        trial,
        seed,
        message,
    };
    let re_x = relative_error(run.x_hat.view(), truth.x_star.view())
        .map_err(|e| fail(e.to_string()))?;
    let re_z = relative_error(run.z_hat.view(), response_truth(truth))
        .map_err(|e| fail(e.to_string()))?;
    if !(re_x.is_finite() && re_z.is_finite()) {
        return Err(fail(format!("non-finite relative error ({re_x}, {re_z})")));
    }
    Ok(TrialRecord {
        method,
        trial,
        seed,
        ds_hash: ds_hash(ds),
        tau1: hp.tau1,
        tau2: hp.tau2,
        re_x,
        re_z,
        iterations: run.fit.iterations,
        converged: run.fit.converged,
        restarts: run.fit.restarts,
        wall_time: run.fit.wall_time,
        stage_times: run.stage_times,
    })
}

/// Run one method on an already generated trial and score it against the
/// truth. Solver errors and non-finite errors come back as a
/// [`TrialFailure`], never a panic or an abort.
pub fn evaluate_method(
    ds: &Dataset,
    truth: &GroundTruth,
    method: Method,
    hp: Hyperparams,
    base_cfg: &SolverConfig,
    trial: usize,
    seed: u64,
) -> Result<TrialRecord, TrialFailure> {
    let cfg = with_hp(base_cfg, hp);
    let run = fit_method(ds, method, &cfg).map_err(|e| TrialFailure {
        method,
        trial,
        seed,
        message: e.to_string(),
    })?;
    record_from_fit(ds, truth, method, hp, &run, trial, seed)
}

/// Pick the grid point minimizing the response relative error on a
/// validation scenario. Points that error out or produce a non-finite
/// score are skipped; a candidate must beat the incumbent by more than
/// 1e-12 to replace it, so ties keep the earliest grid point.
pub fn tune(
    ds: &Dataset,
    truth: &GroundTruth,
    method: Method,
    grid: &[Hyperparams],
    base_cfg: &SolverConfig,
) -> Result<Hyperparams, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let mut best: Option<(Hyperparams, f64)> = None;
    let mut failures = Vec::new();
    for &hp in grid {
        match evaluate_method(ds, truth, method, hp, base_cfg, 0, 0) {
            Ok(record) => {
                let replace = match &best {
                    None => true,
                    Some((_, incumbent)) => record.re_z < incumbent - 1e-12,
                };
                if replace {
                    best = Some((hp, record.re_z));
                }
            }
            Err(failure) => failures.push(format!(
                "tau1 = {}, tau2 = {}: {}",
                hp.tau1, hp.tau2, failure.message
            )),
        }
    }
    match best {
        Some((hp, _)) => Ok(hp),
        None => Err(EvalError::AllGridPointsFailed { failures }),
    }
}

/// Run `trials` repetitions of a scenario. Trial `t` generates its data
/// from `spec.seed + t`; every requested method consumes that same
/// dataset. Records arrive in (trial, method) order. Methods missing
/// from `tuned` run with both penalties zero.
pub fn run_experiment(
    spec: &ScenarioSpec,
    methods: &[Method],
    trials: usize,
    tuned: &BTreeMap<Method, Hyperparams>,
    base_cfg: &SolverConfig,
) -> Result<ExperimentOutput, EvalError> {
    let mut output = ExperimentOutput::default();
    for t in 1..=trials {
        let seed = spec.seed + t as u64;
        let trial_spec = ScenarioSpec {
            seed,
            ..spec.clone()
        };
        let (truth, ds) = generate(&trial_spec)?;
        for &method in methods {
            let hp = *tuned.get(&method).unwrap_or(&Hyperparams {
                tau1: 0.0,
                tau2: 0.0,
            });
            match evaluate_method(&ds, &truth, method, hp, base_cfg, t, seed) {
                Ok(record) => output.records.push(record),
                Err(failure) => output.failures.push(failure),
            }
        }
    }
    Ok(output)
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt() / (n as f64).sqrt())
}

/// Aggregate per method: means and standard errors of the relative errors
/// and wall time, plus mean stage times where present. Records are sorted
/// internally, so the result does not depend on input order.
pub fn summarize(output: &ExperimentOutput) -> SummaryTable {
    let mut records: Vec<&TrialRecord> = output.records.iter().collect();
    records.sort_by_key(|r| (r.method, r.trial));
    let mut rows = Vec::new();
    for method in Method::ALL {
        let group: Vec<&&TrialRecord> =
            records.iter().filter(|r| r.method == method).collect();
        let failed = output
            .failures
            .iter()
            .filter(|f| f.method == method)
            .count();
        if group.is_empty() && failed == 0 {
            continue;
        }
        let collect = |f: fn(&TrialRecord) -> f64| -> Vec<f64> {
            group.iter().map(|r| f(r)).collect()
        };
        let (mean_re_x, se_re_x) = mean_se(&collect(|r| r.re_x));
        let (mean_re_z, se_re_z) = mean_se(&collect(|r| r.re_z));
        let (mean_time, se_time) = mean_se(&collect(|r| r.wall_time));
        let stages: Vec<(f64, f64)> = group.iter().filter_map(|r| r.stage_times).collect();
        let mean_stage_times = if stages.is_empty() {
            None
        } else {
            let k = stages.len() as f64;
            Some((
                stages.iter().map(|s| s.0).sum::<f64>() / k,
                stages.iter().map(|s| s.1).sum::<f64>() / k,
            ))
        };
        rows.push(SummaryRow {
            method,
            count: group.len(),
            failed,
            mean_re_x,
            se_re_x,
            mean_re_z,
            se_re_z,
            mean_time,
            se_time,
            mean_stage_times,
        });
    }
    SummaryTable { rows }
}
