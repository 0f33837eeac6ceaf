use padres_core::continuation::{
    alpha_trajectory, find_stationary, gap_exponent, puiseux_fit, theta_trajectory, PuiseuxSample, SeedRegion, StationaryOptions,
};
use padres_core::schlessinger::{diagnose, evaluate, fit, subsample_indices, DiagnosticWarning};
use padres_core::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn f(z: C64) -> C64 {
    (z * z + 2.0) / (z * z * z + z + 5.0)
}

fn samples(n: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).map(|x| (x, f(C64::new(x, 0.0)).re)).collect()
}

#[test]
fn nine_samples_reproduce_the_rational_function() {
    let cf = fit(&samples(9, 1.0, 2.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut probes: Vec<C64> = (0..50).map(|_| C64::new(rng.random_range(1.0..2.0), 0.0)).collect();
    probes.extend((0..20).map(|_| C64::new(rng.random_range(1.0..2.0), rng.random_range(-0.5..0.5))));
    for z in probes {
        let got = evaluate(&cf, z).value().unwrap().value;
        assert!((got - f(z)).norm() <= 1e-8 * f(z).norm(), "{z}: {got} vs {}", f(z));
    }
}

#[test]
fn analytic_derivative_matches_central_difference() {
    let cf = fit(&samples(9, 1.0, 2.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    for _ in 0..20 {
        let z = C64::new(rng.random_range(1.0..2.0), rng.random_range(-0.4..0.4));
        let d = evaluate(&cf, z).value().unwrap().derivative;
        let v = |w: C64| evaluate(&cf, w).value().unwrap().value;
        let fd = (v(z + h) - v(z - h)) / (2.0 * h);
        assert!((d - fd).norm() <= 1e-6 * d.norm().max(1e-3), "{z}: {d} vs {fd}");
    }
}

#[test]
fn well_spaced_fit_has_no_warnings() {
    let pts = samples(15, 1.0, 2.0);
    let cf = fit(&pts).unwrap();
    let d = diagnose(&cf, &pts, 1.0);
    assert!(d.warnings.is_empty(), "{:?}", d.warnings);
    assert!(d.leave_one_out_residual < 1e-8, "{}", d.leave_one_out_residual);
}

#[test]
fn crowded_abscissae_warn() {
    let pts: Vec<(f64, f64)> = (0..60).map(|i| 1.5 + 1e-6 * i as f64).map(|x| (x, f(C64::new(x, 0.0)).re)).collect();
    let cf = match fit(&pts) {
        Ok(cf) => cf,
        // Breakdown is also an acceptable reaction to near-duplicate data.
        Err(e) => return assert!(matches!(e, padres_core::Error::DegenerateData { .. }), "{e}"),
    };
    let d = diagnose(&cf, &pts, 1.0);
    assert!(d.warnings.iter().any(|w| matches!(w, DiagnosticWarning::DenseAbscissae { .. })), "{:?}", d.warnings);
}

#[test]
fn constant_data_is_clean() {
    let pts = [(1.0, 0.3), (2.0, 0.3), (3.0, 0.3)];
    let cf = fit(&pts).unwrap();
    let d = diagnose(&cf, &pts, 2.0);
    assert_eq!(d.interpolation_residual, 0.0);
    assert_eq!(d.leave_one_out_residual, 0.0);
    assert!(d.warnings.is_empty());
    let v = evaluate(&cf, C64::new(0.3, 0.2)).value().unwrap();
    assert_eq!(v.value, C64::new(0.3, 0.0));
    assert_eq!(v.derivative, C64::new(0.0, 0.0));
    assert_eq!(v.pade_error, 0.0);
}

#[test]
fn inverse_fraction_value_and_slope() {
    let cf = fit(&[(1.0, 1.0), (2.0, 0.5)]).unwrap();
    let v = evaluate(&cf, C64::new(1.0, 0.0)).value().unwrap();
    assert!((v.value - 1.0).norm() < 1e-15);
    assert!((v.derivative + 1.0).norm() < 1e-15);
    let w = evaluate(&cf, C64::new(0.0, 2.0)).value().unwrap().value;
    assert!((w - C64::new(0.0, -0.5)).norm() < 1e-15);
}

#[test]
fn trajectories_of_simple_fractions() {
    let c = fit(&[(1.0, 0.7), (2.0, 0.7), (3.0, 0.7)]).unwrap();
    let t = theta_trajectory(&c, 1.3, &[0.0, 0.1, 0.2, 0.3]).unwrap();
    assert!(t.energies.iter().all(|e| *e == C64::new(0.7, 0.0)));
    let a = alpha_trajectory(&c, 0.2, &[0.8, 1.0, 1.2]).unwrap();
    assert!(a.energies.iter().all(|e| *e == C64::new(0.7, 0.0)));

    let inv = fit(&[(1.0, 1.0), (2.0, 0.5)]).unwrap();
    let t = theta_trajectory(&inv, 1.0, &[0.0, std::f64::consts::FRAC_PI_6]).unwrap();
    assert!((t.energies[0] - 1.0).norm() < 1e-15);
    assert!((t.energies[1] - C64::from_polar(1.0, -std::f64::consts::FRAC_PI_6)).norm() < 1e-15);
    let grid: Vec<f64> = (0..11).map(|k| 0.5 + 0.1 * k as f64).collect();
    let a = alpha_trajectory(&inv, 0.0, &grid).unwrap();
    for (e, x) in a.energies.iter().zip(&grid) {
        assert!((e - 1.0 / x).norm() < 1e-14);
    }
    assert!(a.energies.windows(2).all(|w| w[1].re < w[0].re));
}

#[test]
fn newton_finds_critical_points_of_quadratic_over_linear() {
    // f = 2 − u + 0.04/u with u = α − 1: f′ = 0 at u = ±0.2i, where f = 2 ∓ 0.4i.
    let g = |z: C64| 3.0 - z + 0.04 / (z - 1.0);
    let pts: Vec<(f64, f64)> = (0..7).map(|i| 1.2 + 0.1 * i as f64).map(|x| (x, g(C64::new(x, 0.0)).re)).collect();
    let cf = fit(&pts).unwrap();
    let expected = C64::new(1.0, 0.2);
    let region = SeedRegion { alpha: (0.9, 1.2), theta: (0.05, 0.35) };
    let opts = StationaryOptions { pade_error_tol: 1.0, ..Default::default() };
    let found = find_stationary(&cf, &region, "w0-0-6", &opts).unwrap();
    assert!(!found.points.is_empty(), "no stationary point");
    let best = found.points.iter().map(|p| (p.eta_star.eta() - expected).norm()).fold(f64::INFINITY, f64::min);
    let e = found.points.iter().find(|p| (p.eta_star.eta() - expected).norm() < 1e-6).unwrap().energy;
    assert!((e - C64::new(2.0, -0.4)).norm() < 1e-8, "{e}");
    assert!(best < 1e-8, "closest critical point off by {best:e}: {:?}", found.points.iter().map(|p| (p.eta_star.eta(), p.derivative_norm)).collect::<Vec<_>>());
}

#[test]
fn inverse_has_no_stationary_point_in_region() {
    let inv = fit(&[(1.0, 1.0), (2.0, 0.5)]).unwrap();
    let region = SeedRegion { alpha: (0.5, 2.0), theta: (0.0, 0.7) };
    let found = find_stationary(&inv, &region, "w0-0-1", &StationaryOptions::default()).unwrap();
    assert!(found.points.is_empty());
    assert!(found.landscape.is_some());
}

#[test]
fn square_root_pair_gives_half_exponent() {
    // Eigenvalues of [[0, 1], [η − η₀, 0]] are ±√(η − η₀).
    let eta0 = C64::new(0.9, 0.05);
    let mut pts = Vec::new();
    for r in [1e-6, 1e-5, 1e-4, 1e-3] {
        for j in 0..6 {
            let eta = eta0 + C64::from_polar(r, 0.4 + j as f64);
            let s = (eta - eta0).sqrt();
            pts.push(PuiseuxSample { eta, e_plus: s, e_minus: -s });
        }
    }
    let est = puiseux_fit(&pts).unwrap();
    assert!((est.eta_bp - eta0).norm() < 1e-8, "{}", est.eta_bp);
    assert!(est.energy_bp.norm() < 1e-8);
    let slope = gap_exponent(&pts, eta0);
    assert!((slope - 0.5).abs() < 1e-9, "{slope}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_interpolates_its_points(n in 2usize..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = rng.random_range(0.5..1.5);
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = start + 0.03 * i as f64;
                (x, 1.0 + 0.3 * (3.0 * x).sin() + rng.random_range(-1e-3..1e-3))
            })
            .collect();
        let cf = fit(&pts).unwrap();
        let emax = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        for &(x, e) in &pts {
            let v = evaluate(&cf, C64::new(x, 0.0)).value().unwrap().value;
            prop_assert!((v - e).norm() <= 1e-10 * emax);
        }
    }

    #[test]
    fn fraction_is_real_on_the_real_axis(n in 2usize..15, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(f64, f64)> = (0..n).map(|i| (1.0 + 0.05 * i as f64, rng.random_range(1.0..2.0))).collect();
        let cf = fit(&pts).unwrap();
        let x = rng.random_range(1.0..1.0 + 0.05 * n as f64);
        if let Some(v) = evaluate(&cf, C64::new(x, 0.0)).value() {
            prop_assert!(v.value.im.abs() <= 1e-12 * v.value.norm().max(1.0));
        }
    }

    #[test]
    fn fraction_respects_conjugation(seed in any::<u64>(), re in 0.8f64..1.6, im in -0.3f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(f64, f64)> = (0..8).map(|i| (0.8 + 0.1 * i as f64, 1.0 + rng.random_range(-0.2..0.2))).collect();
        let cf = fit(&pts).unwrap();
        let z = C64::new(re, im);
        if let (Some(a), Some(b)) = (evaluate(&cf, z).value(), evaluate(&cf, z.conj()).value()) {
            prop_assert!((a.value - b.value.conj()).norm() <= 1e-9 * a.value.norm().max(1.0));
        }
    }

    #[test]
    fn subsample_keeps_ends(n in 2usize..200, m in 2usize..40) {
        let idx = subsample_indices(n, m);
        prop_assert_eq!(idx[0], 0);
        prop_assert_eq!(*idx.last().unwrap(), n - 1);
        prop_assert!(idx.windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(idx.len(), m.min(n));
    }
}
