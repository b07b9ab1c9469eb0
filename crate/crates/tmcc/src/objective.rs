//! The smooth loss
//!
//! ```text
//! f(M) = (1/(nD)) [ sum_s sum_{(i,j) observed} { -y z + g(z) }
//!                   + (1/2) || R_x o (X' - X) ||_F^2 ]
//!        + tau1 || A X' - B ||_F^2
//! ```
//!
//! its gradient, and the full objective `L(M) = f(M) + tau2 ||M||_*`. The
//! calibration penalty sits outside the `1/(nD)` bracket. Observed-entry
//! sums run in row-major order, so evaluation is deterministic.

use crate::data_model::{ConcatMatrix, Dataset};
use crate::expfam::{self, ExpfamError};
use crate::linalg::{self, DenseMatrix, LinalgError};
use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error(transparent)]
    Expfam(#[from] ExpfamError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("hyperparameter {name} = {value} must be finite and nonnegative")]
    InvalidHyperparam { name: &'static str, value: f64 },
    #[error("iterate layout {got:?} does not match the dataset layout {expected:?}")]
    LayoutMismatch {
        got: (usize, Vec<usize>),
        expected: (usize, Vec<usize>),
    },
}

/// Weights of the calibration penalty (`tau1`) and the nuclear-norm
/// penalty (`tau2`). The default turns both penalties off.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Hyperparams {
    pub tau1: f64,
    pub tau2: f64,
}

impl Hyperparams {
    pub fn new(tau1: f64, tau2: f64) -> Result<Self, ObjectiveError> {
        for (name, value) in [("tau1", tau1), ("tau2", tau2)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ObjectiveError::InvalidHyperparam { name, value });
            }
        }
        Ok(Self { tau1, tau2 })
    }
}

fn check_layout(ds: &Dataset, m: &ConcatMatrix) -> Result<(), ObjectiveError> {
    let expected = ds.layout();
    if m.layout != expected || m.nrows() != ds.n() {
        return Err(ObjectiveError::LayoutMismatch {
            got: (m.layout.d, m.layout.widths.clone()),
            expected: (expected.d, expected.widths),
        });
    }
    Ok(())
}

/// `f(M)`: negative log-likelihood of the observed response entries plus
/// half squared error on the observed feature entries, averaged over `nD`,
/// plus the (unaveraged) calibration penalty.
pub fn smooth_loss(
    ds: &Dataset,
    m: &ConcatMatrix,
    hp: Hyperparams,
) -> Result<f64, ObjectiveError> {
    check_layout(ds, m)?;
    let nd = (ds.n() * m.layout.total()) as f64;

    let mut sum = 0.0;
    let x_hat = m.slice_feature();
    let x = ds.features.values();
    for ((i, j), &r) in ds.features.mask().indexed_iter() {
        if r == 1.0 {
            let diff = x_hat[[i, j]] - x[[i, j]];
            sum += 0.5 * diff * diff;
        }
    }
    for (s, task) in ds.tasks.iter().enumerate() {
        let z = m.slice_task(s).expect("layout checked");
        let y = task.data.values();
        for ((i, j), &r) in task.data.mask().indexed_iter() {
            if r == 1.0 {
                sum += expfam::nll_term(task.family, y[[i, j]], z[[i, j]])?;
            }
        }
    }
    let mut loss = if nd == 0.0 { 0.0 } else { sum / nd };

    if hp.tau1 > 0.0 {
        if let Some(cal) = &ds.calibration {
            let resid = cal.a.dot(&x_hat) - &cal.b;
            loss += hp.tau1 * resid.iter().map(|v| v * v).sum::<f64>();
        }
    }
    Ok(loss)
}

/// `L(M) = f(M) + tau2 ||M||_*`.
pub fn full_objective(
    ds: &Dataset,
    m: &ConcatMatrix,
    hp: Hyperparams,
) -> Result<f64, ObjectiveError> {
    let nuclear: f64 = linalg::svd(&m.m)?.sigma.iter().sum();
    Ok(smooth_loss(ds, m, hp)? + hp.tau2 * nuclear)
}

/// Entrywise gradient of [`smooth_loss`], shape `n x D`.
///
/// Feature entry `(i, j)`: `(r_x/(nD)) (x'_{ij} - x_{ij}) + 2 tau1
/// (A^T (A X' - B))_{ij}`; the calibration term applies to every feature
/// entry, observed or not. Response entry: `(r_y/(nD)) (g'(z) - y)`.
pub fn gradient(
    ds: &Dataset,
    m: &ConcatMatrix,
    hp: Hyperparams,
) -> Result<DenseMatrix, ObjectiveError> {
    check_layout(ds, m)?;
    let n = ds.n();
    let d = ds.d();
    let total = m.layout.total();
    let nd = (n * total) as f64;
    let mut grad = Array2::zeros((n, total));

    let x_hat = m.slice_feature();
    let x = ds.features.values();
    for ((i, j), &r) in ds.features.mask().indexed_iter() {
        if r == 1.0 {
            grad[[i, j]] = (x_hat[[i, j]] - x[[i, j]]) / nd;
        }
    }
    if hp.tau1 > 0.0 {
        if let Some(cal) = &ds.calibration {
            let resid = cal.a.dot(&x_hat) - &cal.b;
            let calib = cal.a.t().dot(&resid);
            for i in 0..n {
                for j in 0..d {
                    grad[[i, j]] += 2.0 * hp.tau1 * calib[[i, j]];
                }
            }
        }
    }
    for (s, task) in ds.tasks.iter().enumerate() {
        let range = m.layout.task_range(s).expect("layout checked");
        let z = m.slice_task(s).expect("layout checked");
        let y = task.data.values();
        for ((i, j), &r) in task.data.mask().indexed_iter() {
            if r == 1.0 {
                grad[[i, range.start + j]] =
                    (expfam::g_prime(task.family, z[[i, j]])? - y[[i, j]]) / nd;
            }
        }
    }
    Ok(grad)
}
