use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tmcc::expfam::{g, g_double_prime, g_prime, nll_term, sample, ExpfamError, Family};

const FAMILIES: [Family; 3] = [
    Family::Bernoulli,
    Family::Poisson,
    Family::Gaussian { sigma2: 1.0 },
];

#[test]
fn link_values_at_reference_points() {
    assert!((g(Family::Bernoulli, 0.0).unwrap() - 2.0f64.ln()).abs() < 1e-12);
    assert!((g(Family::Gaussian { sigma2: 1.0 }, 2.0).unwrap() - 2.0).abs() < 1e-12);
    assert!((g(Family::Poisson, 0.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn link_derivatives_at_zero() {
    assert!((g_prime(Family::Bernoulli, 0.0).unwrap() - 0.5).abs() < 1e-12);
    assert!((g_prime(Family::Poisson, 0.0).unwrap() - 1.0).abs() < 1e-12);
    assert!((g_prime(Family::Gaussian { sigma2: 2.0 }, 3.0).unwrap() - 6.0).abs() < 1e-12);
}

#[test]
fn bernoulli_link_is_overflow_safe() {
    let big = g(Family::Bernoulli, 800.0).unwrap();
    assert!((big - 800.0).abs() < 1e-9);
    let small = g(Family::Bernoulli, -800.0).unwrap();
    assert!(small >= 0.0 && small < 1e-300);
}

#[test]
fn poisson_link_guards_overflow() {
    assert!(matches!(
        g(Family::Poisson, 701.0),
        Err(ExpfamError::PoissonOverflow { .. })
    ));
    assert!(matches!(
        g_prime(Family::Poisson, 701.0),
        Err(ExpfamError::PoissonOverflow { .. })
    ));
    assert!(matches!(
        g_double_prime(Family::Poisson, 701.0),
        Err(ExpfamError::PoissonOverflow { .. })
    ));
}

#[test]
fn first_derivative_matches_central_difference() {
    let h = 1e-5;
    for fam in FAMILIES {
        for z in [-1.0, 0.0, 0.7] {
            let fd = tmcc_oracles::central_diff(|x| g(fam, x).unwrap(), z, h);
            let analytic = g_prime(fam, z).unwrap();
            assert!(
                (fd - analytic).abs() < 1e-6,
                "{} at z={z}: fd {fd} vs analytic {analytic}",
                fam.label()
            );
        }
    }
}

#[test]
fn second_derivative_matches_central_difference_on_grid() {
    let h = 1e-5;
    for fam in FAMILIES {
        for i in 0..=100 {
            let z = -5.0 + 0.1 * i as f64;
            let fd = tmcc_oracles::central_diff(|x| g_prime(fam, x).unwrap(), z, h);
            let analytic = g_double_prime(fam, z).unwrap();
            assert!(
                (fd - analytic).abs() < 1e-5,
                "{} at z={z}: fd {fd} vs analytic {analytic}",
                fam.label()
            );
        }
    }
}

#[test]
fn second_derivative_is_nonnegative_on_grid() {
    for fam in FAMILIES {
        for i in 0..=100 {
            let z = -5.0 + 0.1 * i as f64;
            assert!(g_double_prime(fam, z).unwrap() >= 0.0);
        }
    }
}

#[test]
fn nll_reference_values() {
    assert!((nll_term(Family::Bernoulli, 1.0, 0.0).unwrap() - 2.0f64.ln()).abs() < 1e-12);
    assert!((nll_term(Family::Gaussian { sigma2: 1.0 }, 0.0, 0.0).unwrap()).abs() < 1e-12);
    let expected = -1.0 + 0.5f64.exp();
    assert!((nll_term(Family::Poisson, 2.0, 0.5).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn nll_rejects_values_outside_support() {
    assert!(matches!(
        nll_term(Family::Bernoulli, 2.0, 0.0),
        Err(ExpfamError::OutsideSupport { .. })
    ));
    assert!(matches!(
        nll_term(Family::Poisson, -1.0, 0.0),
        Err(ExpfamError::OutsideSupport { .. })
    ));
    assert!(matches!(
        nll_term(Family::Poisson, 1.5, 0.0),
        Err(ExpfamError::OutsideSupport { .. })
    ));
    assert!(matches!(
        nll_term(Family::Gaussian { sigma2: 1.0 }, f64::NAN, 0.0),
        Err(ExpfamError::OutsideSupport { .. })
    ));
}

#[test]
fn nll_is_convex_in_z() {
    for fam in FAMILIES {
        for i in 0..50 {
            let z0 = -5.0 + 0.2 * i as f64;
            let z1 = z0 + 1.4;
            let mid = 0.5 * (z0 + z1);
            let y = match fam {
                Family::Bernoulli => 1.0,
                Family::Poisson => 2.0,
                Family::Gaussian { .. } => 0.3,
            };
            let f0 = nll_term(fam, y, z0).unwrap();
            let f1 = nll_term(fam, y, z1).unwrap();
            let fm = nll_term(fam, y, mid).unwrap();
            assert!(fm <= 0.5 * (f0 + f1) + 1e-9);
        }
    }
}

#[test]
fn bernoulli_sample_saturates_at_large_z() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        assert_eq!(sample(Family::Bernoulli, 30.0, &mut rng).unwrap(), 1.0);
    }
}

#[test]
fn poisson_sample_mean_matches_link() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let mean: f64 = (0..n)
        .map(|_| sample(Family::Poisson, 0.0, &mut rng).unwrap())
        .sum::<f64>()
        / n as f64;
    assert!((mean - 1.0).abs() < 0.02, "empirical mean {mean}");
}

#[test]
fn poisson_sample_large_mean_split_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = 200.0f64.ln();
    let n = 20_000;
    let mean: f64 = (0..n)
        .map(|_| sample(Family::Poisson, z, &mut rng).unwrap())
        .sum::<f64>()
        / n as f64;
    assert!((mean - 200.0).abs() < 1.0, "empirical mean {mean}");
}

#[test]
fn poisson_sample_rejects_huge_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    assert!(matches!(
        sample(Family::Poisson, 20.0, &mut rng),
        Err(ExpfamError::MeanOverflow { .. })
    ));
}

#[test]
fn gaussian_sample_mean_matches_link() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let fam = Family::Gaussian { sigma2: 1.0 };
    let mean: f64 = (0..n)
        .map(|_| sample(fam, 0.3, &mut rng).unwrap())
        .sum::<f64>()
        / n as f64;
    assert!((mean - 0.3).abs() < 0.02, "empirical mean {mean}");
}

#[test]
fn gaussian_variance_must_be_positive() {
    assert!(Family::gaussian(0.0).is_err());
    assert!(Family::gaussian(-1.0).is_err());
    assert!(Family::gaussian(f64::NAN).is_err());
    assert!(Family::gaussian(2.5).is_ok());
}

#[test]
fn samples_are_reproducible_for_equal_seeds() {
    for fam in FAMILIES {
        let mut a = ChaCha8Rng::seed_from_u64(99);
        let mut b = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let x = sample(fam, 0.4, &mut a).unwrap();
            let y = sample(fam, 0.4, &mut b).unwrap();
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
