//! Reference implementations kept deliberately independent of the `tmcc`
//! kernels. The test-suites compare production code against these; nothing
//! here is reused by the library itself.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Central finite difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Numerically minimizes `0.5 * ||T - S||_F^2 + c * ||T||_*` without any SVD,
/// via gradient descent on the factored surrogate
/// `0.5 * ||P Q^T - S||_F^2 + (c / 2) * (||P||_F^2 + ||Q||_F^2)`
/// with inner dimension `min(n, m)` (full width, so no rank is excluded).
/// At a shared minimizer the factored penalty equals `c` times the nuclear
/// norm of `P Q^T`, which makes the best of several seeded random starts an
/// independent check on the closed-form thresholding operator.
pub fn nuclear_prox_gd(s: &Array2<f64>, c: f64, starts: usize, seed: u64) -> Array2<f64> {
    use rand::SeedableRng;
    let (n, m) = s.dim();
    let p_dim = n.min(m);
    let sv: Vec<f64> = s.iter().copied().collect(); // row-major n x m
    let frob_sq: f64 = sv.iter().map(|x| x * x).sum();
    let step = 0.05 / (frob_sq + c + 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;

    for _ in 0..starts {
        let mut p: Vec<f64> = (0..n * p_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut q: Vec<f64> = (0..m * p_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut resid = vec![0.0; n * m];
        let mut grad_p = vec![0.0; n * p_dim];
        let mut grad_q = vec![0.0; m * p_dim];
        for _ in 0..200_000 {
            // resid = P Q^T - S
            for i in 0..n {
                for j in 0..m {
                    let mut acc = 0.0;
                    for k in 0..p_dim {
                        acc += p[i * p_dim + k] * q[j * p_dim + k];
                    }
                    resid[i * m + j] = acc - sv[i * m + j];
                }
            }
            // grad_P = resid Q + c P ; grad_Q = resid^T P + c Q
            for i in 0..n {
                for k in 0..p_dim {
                    let mut acc = 0.0;
                    for j in 0..m {
                        acc += resid[i * m + j] * q[j * p_dim + k];
                    }
                    grad_p[i * p_dim + k] = acc + c * p[i * p_dim + k];
                }
            }
            for j in 0..m {
                for k in 0..p_dim {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += resid[i * m + j] * p[i * p_dim + k];
                    }
                    grad_q[j * p_dim + k] = acc + c * q[j * p_dim + k];
                }
            }
            let mut max_step = 0.0f64;
            for (x, g) in p.iter_mut().zip(&grad_p) {
                let delta = step * g;
                *x -= delta;
                max_step = max_step.max(delta.abs());
            }
            for (x, g) in q.iter_mut().zip(&grad_q) {
                let delta = step * g;
                *x -= delta;
                max_step = max_step.max(delta.abs());
            }
            if max_step < 1e-13 {
                break;
            }
        }
        let mut t = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..p_dim {
                    acc += p[i * p_dim + k] * q[j * p_dim + k];
                }
                t[i * m + j] = acc;
            }
        }
        let fit: f64 = t
            .iter()
            .zip(&sv)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        let pen: f64 = p.iter().map(|x| x * x).sum::<f64>() + q.iter().map(|x| x * x).sum::<f64>();
        let obj = 0.5 * fit + 0.5 * c * pen;
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, t));
        }
    }
    let t = best.expect("at least one start").1;
    Array2::from_shape_vec((n, m), t).expect("shape")
}

/// Completes a rank-1 matrix with exactly one missing entry from row/column
/// ratios: if `(i0, j0)` is missing, any other row `i` with a nonzero pivot
/// gives `x[i0][j0] = x[i0][j] * x[i][j0] / x[i][j]`.
pub fn rank1_complete_one(values: &Array2<f64>, missing: (usize, usize)) -> f64 {
    let (i0, j0) = missing;
    let (n, m) = values.dim();
    for i in 0..n {
        if i == i0 {
            continue;
        }
        for j in 0..m {
            if j == j0 || values[[i, j]] == 0.0 {
                continue;
            }
            return values[[i0, j]] * values[[i, j0]] / values[[i, j]];
        }
    }
    panic!("no pivot entry available for rank-1 completion");
}
