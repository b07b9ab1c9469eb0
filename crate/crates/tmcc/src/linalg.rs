//! Dense linear-algebra kernels: SVD, matrix norms, singular-value
//! soft-thresholding, and the projection pair onto a matrix's row/column
//! spaces.
//!
//! The SVD backend runs single-threaded so that results are reproducible
//! bit-for-bit across runs and worker counts.

use ndarray::{Array1, Array2};
use thiserror::Error;

/// Dense real matrix in row-major order. All kernels require finite entries.
pub type DenseMatrix = Array2<f64>;

/// Relative cutoff under which a singular value counts as zero: anything
/// below `RANK_EPS * sigma_max` is treated as rank noise.
pub const RANK_EPS: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("svd did not converge on a {rows}x{cols} matrix")]
    SvdFailed { rows: usize, cols: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("soft-threshold level must be nonnegative, got {0}")]
    NegativeThreshold(f64),
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
}

/// Thin SVD `S = U diag(sigma) V^T` with `sigma` nonincreasing and the first
/// nonzero entry of every `U` column nonnegative (pins the sign ambiguity).
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: Array1<f64>,
    pub v: DenseMatrix,
}

fn check_finite(s: &DenseMatrix) -> Result<(), LinalgError> {
    for ((row, col), &x) in s.indexed_iter() {
        if !x.is_finite() {
            return Err(LinalgError::NonFinite { row, col });
        }
    }
    Ok(())
}

fn to_faer(s: &DenseMatrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(s.nrows(), s.ncols(), |i, j| s[[i, j]])
}

fn seq_backend() {
    // One-time global switch; parallel SVD buys nothing at these sizes and
    // sequential execution keeps reductions deterministic.
    use std::sync::Once;
    static ONCE: Once = Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Thin SVD of a finite matrix.
pub fn svd(s: &DenseMatrix) -> Result<SvdFactors, LinalgError> {
    check_finite(s)?;
    seq_backend();
    let (n, m) = (s.nrows(), s.ncols());
    let k = n.min(m);
    let fac = to_faer(s)
        .thin_svd()
        .map_err(|_| LinalgError::SvdFailed { rows: n, cols: m })?;
    let mut u = Array2::zeros((n, k));
    let mut v = Array2::zeros((m, k));
    let mut sigma = Array1::zeros(k);
    for j in 0..k {
        sigma[j] = fac.S()[j];
        for (i, &x) in fac.U().col(j).iter().enumerate() {
            u[[i, j]] = x;
        }
        for (i, &x) in fac.V().col(j).iter().enumerate() {
            v[[i, j]] = x;
        }
    }
    // Sign convention: first nonzero entry of each U column nonnegative.
    for j in 0..k {
        let lead = (0..n).map(|i| u[[i, j]]).find(|&x| x != 0.0);
        if let Some(x) = lead {
            if x < 0.0 {
                for i in 0..n {
                    u[[i, j]] = -u[[i, j]];
                }
                for i in 0..m {
                    v[[i, j]] = -v[[i, j]];
                }
            }
        }
    }
    Ok(SvdFactors { u, sigma, v })
}

/// Singular-value soft-threshold operator `T_c(S) = U diag((sigma_i - c)_+) V^T`,
/// the proximal operator of `c * ||.||_*`. `svt(S, 0)` returns `S` unchanged.
pub fn svt(s: &DenseMatrix, c: f64) -> Result<DenseMatrix, LinalgError> {
    Ok(svt_with_nuclear(s, c)?.0)
}

/// Like [`svt`], but also returns the nuclear norm of the thresholded matrix
/// (the sum of the shrunk singular values), reusing the factorization.
pub fn svt_with_nuclear(s: &DenseMatrix, c: f64) -> Result<(DenseMatrix, f64), LinalgError> {
    if !(c >= 0.0) {
        return Err(LinalgError::NegativeThreshold(c));
    }
    if c == 0.0 {
        check_finite(s)?;
        let nuclear = svd(s)?.sigma.sum();
        return Ok((s.clone(), nuclear));
    }
    let fac = svd(s)?;
    let kept: Vec<usize> = (0..fac.sigma.len())
        .filter(|&i| fac.sigma[i] > c)
        .collect();
    let mut out = Array2::zeros((s.nrows(), s.ncols()));
    let mut nuclear = 0.0;
    for &i in &kept {
        let shrunk = fac.sigma[i] - c;
        nuclear += shrunk;
        let ui = fac.u.column(i);
        let vi = fac.v.column(i);
        for (r, &ur) in ui.iter().enumerate() {
            let scale = shrunk * ur;
            for (cidx, &vc) in vi.iter().enumerate() {
                out[[r, cidx]] += scale * vc;
            }
        }
    }
    Ok((out, nuclear))
}

/// Frobenius norm.
pub fn norm_frobenius(s: &DenseMatrix) -> f64 {
    s.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Operator (spectral) norm: the largest singular value.
pub fn norm_operator(s: &DenseMatrix) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let fac = svd(s).expect("svd for operator norm");
    fac.sigma.iter().copied().fold(0.0, f64::max)
}

/// Nuclear norm: the sum of singular values.
pub fn norm_nuclear(s: &DenseMatrix) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    svd(s).expect("svd for nuclear norm").sigma.sum()
}

/// Max-absolute-entry norm.
pub fn norm_inf(s: &DenseMatrix) -> f64 {
    s.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Numerical rank: singular values above `RANK_EPS * sigma_max`.
pub fn numerical_rank(s: &DenseMatrix) -> usize {
    if s.is_empty() {
        return 0;
    }
    let sigma = svd(s).expect("svd for numerical rank").sigma;
    let top = sigma.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&x| x > RANK_EPS * top).count()
}

/// Splits `T` into its components on and off the column/row spaces of `S`:
/// `P_S_perp(T) = (I - U U^T) T (I - V V^T)` with `U, V` spanning the compact
/// factors of `S`, and `P_S(T) = T - P_S_perp(T)`. Returned as
/// `(P_S(T), P_S_perp(T))`; the pair sums back to `T` and
/// `rank(P_S(T)) <= 2 rank(S)`.
pub fn project_pair(
    s: &DenseMatrix,
    t: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix), LinalgError> {
    if s.dim() != t.dim() {
        return Err(LinalgError::DimMismatch {
            left: s.dim(),
            right: t.dim(),
        });
    }
    check_finite(t)?;
    let fac = svd(s)?;
    let top = fac.sigma.iter().copied().fold(0.0, f64::max);
    let rank = fac
        .sigma
        .iter()
        .filter(|&&x| top > 0.0 && x > RANK_EPS * top)
        .count();
    let u = fac.u.slice(ndarray::s![.., ..rank]);
    let v = fac.v.slice(ndarray::s![.., ..rank]);
    // (I - UU^T) T (I - VV^T) expanded so only thin products are formed.
    let ut_t = u.t().dot(t); // rank x m
    let t_v = t.dot(&v); // n x rank
    let ut_t_v = ut_t.dot(&v); // rank x rank
    let perp = t - &u.dot(&ut_t) - &t_v.dot(&v.t()) + &u.dot(&ut_t_v).dot(&v.t());
    let on = t - &perp;
    Ok((on, perp))
}
