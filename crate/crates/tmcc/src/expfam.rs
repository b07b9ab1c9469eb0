//! Exponential-family response models in canonical form
//! `f(y | z) = h(y) exp{y z - g(z)}`: the link function `g` with its first two
//! derivatives, per-entry negative log-likelihood terms (constant `h(y)`
//! dropped throughout), and seeded sampling.
//!
//! Sampling is implemented with fixed, documented algorithms rather than
//! platform-dependent library routines so that a seed stream produces the
//! same draws everywhere:
//! - Bernoulli: one uniform compared against `sigmoid(z)`.
//! - Poisson (mean `e^z`): Knuth's multiplication method for mean <= 30
//!   (multiply uniforms until the product drops below `e^-mean`); larger
//!   means are split recursively as the sum of two independent half-mean
//!   Poisson draws. Valid for means up to `1e6`.
//! - Gaussian (mean `sigma^2 z`, variance `sigma^2`): Box-Muller transform,
//!   consuming exactly two uniforms per draw (the paired variate is
//!   discarded to keep stream accounting simple).

use rand::Rng;
use thiserror::Error;

/// Natural-parameter bound beyond which the Poisson link overflows; hitting
/// it mid-solve signals an unnormalized or diverging iterate.
pub const POISSON_Z_MAX: f64 = 700.0;

/// Largest Poisson mean the sampler accepts.
pub const POISSON_MEAN_MAX: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Bernoulli,
    Poisson,
    /// Response with density `N(sigma2 * z, sigma2)` in natural form.
    Gaussian {
        sigma2: f64,
    },
}

impl Family {
    /// Gaussian family with validated variance.
    pub fn gaussian(sigma2: f64) -> Result<Self, ExpfamError> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(ExpfamError::InvalidVariance { sigma2 });
        }
        Ok(Family::Gaussian { sigma2 })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Family::Bernoulli => "bernoulli",
            Family::Poisson => "poisson",
            Family::Gaussian { .. } => "gaussian",
        }
    }

    /// Whether `y` lies in the family's support
    /// (Bernoulli: {0, 1}; Poisson: nonnegative integers; Gaussian: reals).
    pub fn in_support(&self, y: f64) -> bool {
        match self {
            Family::Bernoulli => y == 0.0 || y == 1.0,
            Family::Poisson => y.is_finite() && y >= 0.0 && y.fract() == 0.0,
            Family::Gaussian { .. } => y.is_finite(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExpfamError {
    #[error("poisson link overflow at z = {z} (iterate out of range)")]
    PoissonOverflow { z: f64 },
    #[error("poisson mean {mean} exceeds sampler limit {POISSON_MEAN_MAX}")]
    MeanOverflow { mean: f64 },
    #[error("value {y} outside the support of the {family} family")]
    OutsideSupport { family: &'static str, y: f64 },
    #[error("gaussian variance must be positive and finite, got {sigma2}")]
    InvalidVariance { sigma2: f64 },
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Link function `g(z)`: Bernoulli `log(1 + e^z)` (computed overflow-safely,
/// `g(z) = z` once `z > 35` where the two agree to machine precision),
/// Poisson `e^z`, Gaussian `sigma2 z^2 / 2`.
pub fn g(fam: Family, z: f64) -> Result<f64, ExpfamError> {
    match fam {
        Family::Bernoulli => Ok(if z > 35.0 { z } else { z.exp().ln_1p() }),
        Family::Poisson => {
            if z > POISSON_Z_MAX {
                Err(ExpfamError::PoissonOverflow { z })
            } else {
                Ok(z.exp())
            }
        }
        Family::Gaussian { sigma2 } => Ok(0.5 * sigma2 * z * z),
    }
}

/// First derivative `g'(z)`: the conditional mean of `y` given `z`.
pub fn g_prime(fam: Family, z: f64) -> Result<f64, ExpfamError> {
    match fam {
        Family::Bernoulli => Ok(sigmoid(z)),
        Family::Poisson => {
            if z > POISSON_Z_MAX {
                Err(ExpfamError::PoissonOverflow { z })
            } else {
                Ok(z.exp())
            }
        }
        Family::Gaussian { sigma2 } => Ok(sigma2 * z),
    }
}

/// Second derivative `g''(z)`: the conditional variance of `y` given `z`.
pub fn g_double_prime(fam: Family, z: f64) -> Result<f64, ExpfamError> {
    match fam {
        Family::Bernoulli => {
            let p = sigmoid(z);
            Ok(p * (1.0 - p))
        }
        Family::Poisson => {
            if z > POISSON_Z_MAX {
                Err(ExpfamError::PoissonOverflow { z })
            } else {
                Ok(z.exp())
            }
        }
        Family::Gaussian { sigma2 } => Ok(sigma2),
    }
}

/// Per-entry negative quasi log-likelihood `-y z + g(z)`, `h(y)` dropped.
pub fn nll_term(fam: Family, y: f64, z: f64) -> Result<f64, ExpfamError> {
    if !fam.in_support(y) {
        return Err(ExpfamError::OutsideSupport {
            family: fam.label(),
            y,
        });
    }
    Ok(-y * z + g(fam, z)?)
}

fn poisson_draw<R: Rng>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 30.0 {
        let limit = (-mean).exp();
        let mut count = 0u64;
        let mut product = rng.gen::<f64>();
        while product > limit {
            count += 1;
            product *= rng.gen::<f64>();
        }
        count as f64
    } else {
        poisson_draw(mean / 2.0, rng) + poisson_draw(mean / 2.0, rng)
    }
}

/// Box-Muller standard normal (cosine branch), consuming exactly two
/// uniforms; the first is flipped into (0, 1] so the log stays finite.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// One response draw at natural parameter `z`, advancing the caller's stream.
pub fn sample<R: Rng>(fam: Family, z: f64, rng: &mut R) -> Result<f64, ExpfamError> {
    match fam {
        Family::Bernoulli => Ok(if rng.gen::<f64>() < sigmoid(z) {
            1.0
        } else {
            0.0
        }),
        Family::Poisson => {
            let mean = z.exp();
            if !(mean <= POISSON_MEAN_MAX) {
                return Err(ExpfamError::MeanOverflow { mean });
            }
            Ok(poisson_draw(mean, rng))
        }
        Family::Gaussian { sigma2 } => Ok(sigma2 * z + sigma2.sqrt() * standard_normal(rng)),
    }
}
