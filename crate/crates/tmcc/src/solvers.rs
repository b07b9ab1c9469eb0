//! Accelerated proximal gradient solver for the nuclear-norm-penalized
//! objective, plus the baseline fitters built on the same machinery.
//!
//! One iteration: with momentum weight `theta = (c-1)/(c+2)`,
//!
//! ```text
//! Q       = (1 + theta) M_k - theta M_{k-1}
//! T       = Q - eta grad_f(Q)
//! M_{k+1} = svt(T, eta tau2)
//! ```
//!
//! The counter `c` starts at 1, increments when the full objective `L` does
//! not increase, and resets to 1 on an increase (a restart; the iterate is
//! kept). The run stops at the first `|L_{k+1} - L_k| <= kappa`, always
//! returning `M_{k+1}`. Both the restart and the stop test use the full
//! objective, and the trace records it at every iterate.

use crate::data_model::{ConcatMatrix, Dataset, MaskedMatrix};
use crate::linalg::{self, DenseMatrix, LinalgError};
use crate::objective::{self, Hyperparams, ObjectiveError};
use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use thiserror::Error;

/// Frobenius-change stopping threshold for the feature-only first stage.
pub const KAPPA0: f64 = 1e-12;

/// An objective increase on every one of the first `START_INCREASE_WINDOW`
/// iterations means the step size is too large: halve it and rerun.
const START_INCREASE_WINDOW: usize = 10;
const MAX_HALVINGS: usize = 60;
/// This many consecutive increases anywhere in a run aborts it.
const DIVERGE_STREAK: usize = 50;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("objective increased for {streak} consecutive iterations at eta = {eta}")]
    Diverged { eta: f64, streak: usize },
    #[error(transparent)]
    Objective(ObjectiveError),
}

fn lift(err: ObjectiveError) -> SolverError {
    match err {
        ObjectiveError::Linalg(e) => SolverError::Linalg(e),
        other => SolverError::Objective(other),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub hp: Hyperparams,
    pub eta: f64,
    pub max_iters: usize,
    pub stop_kappa: f64,
    pub seed: u64,
}

impl SolverConfig {
    /// Defaults: `eta = 1`, `max_iters = 1000`, `stop_kappa = 1e-7`.
    pub fn new(hp: Hyperparams) -> Self {
        Self {
            hp,
            eta: 1.0,
            max_iters: 1000,
            stop_kappa: 1e-7,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        Hyperparams::new(self.hp.tau1, self.hp.tau2).map_err(lift)?;
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "eta = {} must be positive",
                self.eta
            )));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidConfig("max_iters = 0".into()));
        }
        if !(self.stop_kappa.is_finite() && self.stop_kappa > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "stop_kappa = {} must be positive",
                self.stop_kappa
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub m_out: ConcatMatrix,
    /// Full objective at every iterate, starting with the initial one;
    /// length is `iterations + 1`.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Seconds, informational only; excluded from all determinism claims.
    pub wall_time: f64,
    pub restarts: usize,
    /// Per-stage seconds for two-stage fits, `None` elsewhere.
    pub stage_times: Option<(f64, f64)>,
}

/// The shared starting iterate `M_0 = M_1`: entrywise i.i.d. uniform on
/// `(-0.01, 0.01)`, drawn in row-major order from a ChaCha8 stream seeded
/// with `seed`.
pub fn initial_iterate(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            m[[i, j]] = rng.gen_range(-0.01..0.01);
        }
    }
    m
}

/// Smooth loss of `m`, with a divergent iterate (overflow in the response
/// link) reported as `None` rather than an error.
fn smooth_or_divergent(
    ds: &Dataset,
    m: &ConcatMatrix,
    hp: Hyperparams,
) -> Result<Option<f64>, SolverError> {
    match objective::smooth_loss(ds, m, hp) {
        Ok(v) => Ok(Some(v)),
        Err(ObjectiveError::Expfam(_)) => Ok(None),
        Err(e) => Err(lift(e)),
    }
}

fn gradient_or_divergent(
    ds: &Dataset,
    m: &ConcatMatrix,
    hp: Hyperparams,
) -> Result<Option<DenseMatrix>, SolverError> {
    match objective::gradient(ds, m, hp) {
        Ok(g) => Ok(Some(g)),
        Err(ObjectiveError::Expfam(_)) => Ok(None),
        Err(e) => Err(lift(e)),
    }
}

fn proximal_fit(ds: &Dataset, cfg: &SolverConfig, hp: Hyperparams) -> Result<FitResult, SolverError> {
    cfg.validate()?;
    let start = Instant::now();
    let layout = ds.layout();
    let (n, total) = (ds.n(), layout.total());
    let mut eta = cfg.eta;
    let mut halvings = 0usize;

    'attempt: loop {
        let init = initial_iterate(n, total, cfg.seed);
        let mut m_prev = ConcatMatrix::new(init.clone(), layout.clone()).map_err(|e| {
            SolverError::InvalidConfig(e.to_string())
        })?;
        let mut m_cur = m_prev.clone();

        let l_init = {
            let smooth = smooth_or_divergent(ds, &m_cur, hp)?.ok_or_else(|| {
                SolverError::InvalidConfig("objective not finite at the initial iterate".into())
            })?;
            let nuclear = if hp.tau2 > 0.0 {
                linalg::svd(&m_cur.m)?.sigma.sum()
            } else {
                0.0
            };
            smooth + hp.tau2 * nuclear
        };
        if !l_init.is_finite() {
            return Err(SolverError::InvalidConfig(
                "objective not finite at the initial iterate".into(),
            ));
        }

        let mut trace = vec![l_init];
        let mut l_prev = l_init;
        let mut c: u64 = 1;
        let mut restarts = 0usize;
        let mut inc_streak = 0usize;
        let mut converged = false;
        let mut k = 0usize;

        let finish = |m_out: ConcatMatrix, trace: Vec<f64>, converged: bool, restarts: usize| {
            let iterations = trace.len() - 1;
            FitResult {
                m_out,
                objective_trace: trace,
                iterations,
                converged,
                wall_time: start.elapsed().as_secs_f64(),
                restarts,
                stage_times: None,
            }
        };

        while k < cfg.max_iters {
            k += 1;
            let theta = (c as f64 - 1.0) / (c as f64 + 2.0);
            let mut q_values = Array2::zeros((n, total));
            Zip::from(&mut q_values)
                .and(&m_cur.m)
                .and(&m_prev.m)
                .for_each(|q, &cur, &prev| *q = (1.0 + theta) * cur - theta * prev);
            let q = ConcatMatrix::new(q_values, layout.clone()).expect("layout fixed");

            let Some(grad) = gradient_or_divergent(ds, &q, hp)? else {
                return Ok(finish(m_cur, trace, false, restarts));
            };
            let mut t = q.m;
            t.scaled_add(-eta, &grad);

            let (m_next_values, l_new) = if hp.tau2 > 0.0 {
                let (values, nuclear) = linalg::svt_with_nuclear(&t, eta * hp.tau2)?;
                let next = ConcatMatrix::new(values, layout.clone()).expect("layout fixed");
                let Some(smooth) = smooth_or_divergent(ds, &next, hp)? else {
                    return Ok(finish(m_cur, trace, false, restarts));
                };
                (next, smooth + hp.tau2 * nuclear)
            } else {
                let next = ConcatMatrix::new(t, layout.clone()).expect("layout fixed");
                let Some(smooth) = smooth_or_divergent(ds, &next, hp)? else {
                    return Ok(finish(m_cur, trace, false, restarts));
                };
                (next, smooth)
            };
            if !l_new.is_finite() {
                return Ok(finish(m_cur, trace, false, restarts));
            }

            trace.push(l_new);
            if l_new > l_prev {
                c = 1;
                restarts += 1;
                inc_streak += 1;
            } else {
                c += 1;
                inc_streak = 0;
            }
            let done = (l_new - l_prev).abs() <= cfg.stop_kappa;
            m_prev = std::mem::replace(&mut m_cur, m_next_values);
            l_prev = l_new;
            if done {
                converged = true;
                break;
            }
            if inc_streak == k && inc_streak >= START_INCREASE_WINDOW && halvings < MAX_HALVINGS {
                eta /= 2.0;
                halvings += 1;
                continue 'attempt;
            }
            if inc_streak >= DIVERGE_STREAK {
                return Err(SolverError::Diverged {
                    eta,
                    streak: inc_streak,
                });
            }
        }
        return Ok(finish(m_cur, trace, converged, restarts));
    }
}

/// Joint fit with the calibration penalty active (when the dataset carries
/// a constraint and `tau1 > 0`).
pub fn tmcc_fit(ds: &Dataset, cfg: &SolverConfig) -> Result<FitResult, SolverError> {
    proximal_fit(ds, cfg, cfg.hp)
}

/// The same solve with the calibration term removed (`tau1` treated as 0);
/// the result never depends on `A` or `B`.
pub fn mc0_fit(ds: &Dataset, cfg: &SolverConfig) -> Result<FitResult, SolverError> {
    proximal_fit(
        ds,
        cfg,
        Hyperparams {
            tau1: 0.0,
            tau2: cfg.hp.tau2,
        },
    )
}

/// Feature-only completion: starting from the zero matrix, iterate
/// `X_{t+1} = svt(observed entries + current fill at unobserved entries,
/// tau)` until the Frobenius change drops to [`KAPPA0`] or `cfg.max_iters`
/// is exhausted.
pub fn soft_impute_fit(
    x: &MaskedMatrix,
    tau: f64,
    cfg: &SolverConfig,
) -> Result<DenseMatrix, SolverError> {
    if cfg.max_iters == 0 {
        return Err(SolverError::InvalidConfig("max_iters = 0".into()));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(SolverError::InvalidConfig(format!(
            "soft-impute tau = {tau} must be nonnegative"
        )));
    }
    let observed = x.values();
    let mask = x.mask();
    let mut cur: DenseMatrix = Array2::zeros(observed.dim());
    for _ in 0..cfg.max_iters {
        let mut filled = observed.clone();
        Zip::from(&mut filled)
            .and(mask)
            .and(&cur)
            .for_each(|f, &r, &c| {
                if r == 0.0 {
                    *f = c;
                }
            });
        let next = linalg::svt(&filled, tau)?;
        let change = linalg::norm_frobenius(&(&next - &cur));
        cur = next;
        if change <= KAPPA0 {
            break;
        }
    }
    Ok(cur)
}

/// Soft-impute threshold policy used by the composed baselines: zero when
/// the block is fully observed (or has nothing to scale against), otherwise
/// a small multiple of the zero-fill's top singular value.
pub fn si_tau(x: &MaskedMatrix) -> f64 {
    if x.ncols() == 0 || x.nrows() == 0 || x.is_fully_observed() || x.observed_count() == 0 {
        return 0.0;
    }
    1e-5 * linalg::norm_operator(x.values())
}

pub(crate) struct CmcSiDetail {
    pub x_hat: DenseMatrix,
    pub z_fit: FitResult,
    pub si_time: f64,
}

pub(crate) fn cmc_si_detail(ds: &Dataset, cfg: &SolverConfig) -> Result<CmcSiDetail, SolverError> {
    let si_start = Instant::now();
    let x_hat = soft_impute_fit(&ds.features, si_tau(&ds.features), cfg)?;
    let si_time = si_start.elapsed().as_secs_f64();
    let z_fit = mc0_fit(&ds.responses_only(), cfg)?;
    Ok(CmcSiDetail {
        x_hat,
        z_fit,
        si_time,
    })
}

/// Features by soft-impute, responses by a collective solve over the task
/// blocks alone; the two stages never exchange information.
pub fn cmc_si_fit(
    ds: &Dataset,
    cfg: &SolverConfig,
) -> Result<(DenseMatrix, DenseMatrix), SolverError> {
    let detail = cmc_si_detail(ds, cfg)?;
    Ok((detail.x_hat, detail.z_fit.m_out.m))
}

/// Soft-impute the features first, then run the calibration-free joint
/// solve on a dataset whose feature block is the completed matrix, fully
/// observed. `stage_times` carries the two stage durations; `wall_time` is
/// their sum.
pub fn two_stage_fit(ds: &Dataset, cfg: &SolverConfig) -> Result<FitResult, SolverError> {
    let stage1 = Instant::now();
    let x_hat = soft_impute_fit(&ds.features, si_tau(&ds.features), cfg)?;
    let t1 = stage1.elapsed().as_secs_f64();

    let completed = Dataset {
        features: MaskedMatrix::fully_observed(x_hat)
            .map_err(|e| SolverError::InvalidConfig(e.to_string()))?,
        tasks: ds.tasks.clone(),
        calibration: None,
    };
    let stage2 = Instant::now();
    let mut fit = mc0_fit(&completed, cfg)?;
    let t2 = stage2.elapsed().as_secs_f64();
    fit.wall_time = t1 + t2;
    fit.stage_times = Some((t1, t2));
    Ok(fit)
}
