//! Synthetic scenario generator: low-rank ground truth, linear or
//! polynomial target construction, per-block max-abs normalization,
//! exponential-family observation sampling, i.i.d. missingness, and the
//! column-mean calibration pair.
//!
//! Everything is drawn from one ChaCha8 stream seeded with `spec.seed`, in
//! a fixed order: `P`, then `Q` (row-major, uniform over (0,1)); per task
//! in order, the linear mixing matrix `W` when applicable; the feature
//! mask, then each task mask (row-major, observed with probability
//! `1 - missing_rate`); feature noise (row-major, only when
//! `noise_sd > 0`); finally the response samples, task by task in row-major
//! order, drawn at every entry so the values do not depend on the masks.

use crate::data_model::{CalibrationConstraint, Dataset, MaskedMatrix, TaskBlock};
use crate::expfam::{self, Family};
use crate::linalg::{self, DenseMatrix};
use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("dimension {name} must be positive")]
    ZeroDimension { name: &'static str },
    #[error("rank {r} exceeds min(n, d) = {limit}")]
    RankTooLarge { r: usize, limit: usize },
    #[error("missing rate {nu} must lie in [0, 1)")]
    MissingRate { nu: f64 },
    #[error("noise_sd {sd} must be finite and nonnegative")]
    NoiseSd { sd: f64 },
    #[error("polynomial targets define exactly 3 tasks with m = d; got {tasks} tasks, m = {m}, d = {d}")]
    NonlinearShape { tasks: usize, m: usize, d: usize },
    #[error("transform index {s} outside 1..=3")]
    TransformIndex { s: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Linear,
    Nonlinear,
}

/// Everything needed to generate one scenario. `m` is the column count of
/// every task block; the polynomial (nonlinear) construction maps the
/// feature matrix elementwise, which forces `tasks = 3` and `m = d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub r: usize,
    pub tasks: usize,
    pub transform: Transform,
    pub missing_rate: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, value) in [
            ("n", self.n),
            ("d", self.d),
            ("m", self.m),
            ("r", self.r),
            ("tasks", self.tasks),
        ] {
            if value == 0 {
                return Err(SynthError::ZeroDimension { name });
            }
        }
        let limit = self.n.min(self.d);
        if self.r > limit {
            return Err(SynthError::RankTooLarge { r: self.r, limit });
        }
        if !(self.missing_rate >= 0.0 && self.missing_rate < 1.0) {
            return Err(SynthError::MissingRate {
                nu: self.missing_rate,
            });
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(SynthError::NoiseSd { sd: self.noise_sd });
        }
        if self.transform == Transform::Nonlinear && (self.tasks != 3 || self.m != self.d) {
            return Err(SynthError::NonlinearShape {
                tasks: self.tasks,
                m: self.m,
                d: self.d,
            });
        }
        Ok(())
    }
}

/// Noiseless truth underlying a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub x_star: DenseMatrix,
    pub z_star: Vec<DenseMatrix>,
    /// `[x_star, z_star_1, ..., z_star_S]`.
    pub m_star: DenseMatrix,
}

/// The polynomial targets, indexed 1 through 3:
/// `t1(x) = x^2 + x + 0.5`, `t2(x) = -x^2 - x`, `t3(x) = -x^2 - 2x + 0.2`.
pub fn apply_transform(x: f64, s: usize) -> Result<f64, SynthError> {
    match s {
        1 => Ok(x * x + x + 0.5),
        2 => Ok(-x * x - x),
        3 => Ok(-x * x - 2.0 * x + 0.2),
        _ => Err(SynthError::TransformIndex { s }),
    }
}

/// Task families cycle Bernoulli, Poisson, Gaussian(1) by block position.
pub fn family_for_task(index: usize) -> Family {
    match index % 3 {
        0 => Family::Bernoulli,
        1 => Family::Poisson,
        _ => Family::Gaussian { sigma2: 1.0 },
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let mut m = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            m[[i, j]] = rng.gen::<f64>();
        }
    }
    m
}

fn mask_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, nu: f64) -> DenseMatrix {
    let mut m = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            m[[i, j]] = f64::from(rng.gen_bool(1.0 - nu));
        }
    }
    m
}

fn normalized(mut m: DenseMatrix) -> DenseMatrix {
    let scale = linalg::norm_inf(&m);
    m.mapv_inplace(|v| v / scale);
    m
}

/// Build one scenario: the ground truth and the observed dataset with its
/// calibration pair `A = (1/n) 1`, `B = A x_star` (exact column means of
/// the noiseless truth).
pub fn generate(spec: &ScenarioSpec) -> Result<(GroundTruth, Dataset), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, d, m) = (spec.n, spec.d, spec.m);

    let p = uniform_matrix(&mut rng, n, spec.r);
    let q = uniform_matrix(&mut rng, d, spec.r);
    let x_star = normalized(p.dot(&q.t()));

    let mut z_star = Vec::with_capacity(spec.tasks);
    for s in 0..spec.tasks {
        let raw = match spec.transform {
            Transform::Linear => {
                let w = uniform_matrix(&mut rng, d, m);
                x_star.dot(&w)
            }
            Transform::Nonlinear => x_star.mapv(|x| {
                apply_transform(x, s + 1).expect("task count validated")
            }),
        };
        z_star.push(normalized(raw));
    }

    let feature_mask = mask_matrix(&mut rng, n, d, spec.missing_rate);
    let task_masks: Vec<DenseMatrix> = (0..spec.tasks)
        .map(|_| mask_matrix(&mut rng, n, m, spec.missing_rate))
        .collect();

    let mut x_observed = x_star.clone();
    if spec.noise_sd > 0.0 {
        for i in 0..n {
            for j in 0..d {
                x_observed[[i, j]] += spec.noise_sd * expfam::standard_normal(&mut rng);
            }
        }
    }

    let mut tasks = Vec::with_capacity(spec.tasks);
    for (s, mask) in task_masks.into_iter().enumerate() {
        let family = family_for_task(s);
        let mut y = Array2::zeros((n, m));
        for i in 0..n {
            for j in 0..m {
                y[[i, j]] = expfam::sample(family, z_star[s][[i, j]], &mut rng)
                    .expect("natural parameters are bounded by 1");
            }
        }
        tasks.push(TaskBlock {
            data: MaskedMatrix::new(y, mask).expect("binary mask, finite samples"),
            family,
        });
    }

    let a = Array2::from_elem((1, n), 1.0 / n as f64);
    let b = a.dot(&x_star);
    let ds = Dataset {
        features: MaskedMatrix::new(x_observed, feature_mask)
            .expect("binary mask, finite values"),
        tasks,
        calibration: Some(CalibrationConstraint { a, b }),
    };

    let views: Vec<_> = std::iter::once(x_star.view())
        .chain(z_star.iter().map(|z| z.view()))
        .collect();
    let m_star = concatenate(Axis(1), &views).expect("row counts agree");
    Ok((
        GroundTruth {
            x_star,
            z_star,
            m_star,
        },
        ds,
    ))
}
