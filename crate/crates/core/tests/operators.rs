use padres_core::eigen::eig;
use padres_core::model::{
    quadrature_self_test, build_basis, BasisSpec, ComplexMatrixPair, Hamiltonian, ModelSpec, Overlap, ScaledOperator,
    ScalingParameter,
};
use padres_core::ucs::{derivative_landscape, ucs_stationary, ucs_sweep, RootSelector, UcsOptions};
use padres_core::{Result, C64};
use faer::Mat;

fn ho(n: usize, order: usize) -> BasisSpec {
    BasisSpec { quadrature_order: order, ..BasisSpec::harmonic_oscillator(n, 1.0) }
}

fn trace(ham: &Hamiltonian, eta: C64) -> C64 {
    let h = ham.matrices_at(eta).unwrap().h;
    (0..h.nrows()).map(|i| h[(i, i)]).sum()
}

fn sorted_eigs(op: &dyn ScaledOperator, eta: C64) -> Vec<C64> {
    let p = op.matrices_at(eta).unwrap();
    let mut v = eig(&p.h, &p.s).unwrap().values;
    v.sort_by(|a, b| a.re.total_cmp(&b.re));
    v
}

#[test]
fn quadrature_orders_agree_on_benchmark_potential() {
    let basis = build_basis(&ho(30, 200)).unwrap();
    let check = quadrature_self_test(&ModelSpec::benchmark(), &basis).unwrap();
    assert_eq!((check.order, check.refined_order), (200, 300));
    assert!(check.passed && check.relative_change < 1e-12, "{}", check.relative_change);
}

#[test]
fn benchmark_trace_is_stable() {
    let eta = C64::from_polar(1.0, 0.2);
    let a = trace(&Hamiltonian::new(ModelSpec::benchmark(), &ho(60, 240)).unwrap(), eta);
    let b = trace(&Hamiltonian::new(ModelSpec::benchmark(), &ho(60, 360)).unwrap(), eta);
    assert!((a - b).norm() < 1e-10 * b.norm(), "{a} vs {b}");
    let golden = C64::new(GOLDEN_TRACE.0, GOLDEN_TRACE.1);
    assert!((a - golden).norm() < 1e-10 * golden.norm(), "{a:?}");
}

// Frozen after the two quadrature orders above agreed.
const GOLDEN_TRACE: (f64, f64) = (907.1863403528625, -355.38362675874873);

#[test]
fn odd_potential_shifts_the_oscillator() {
    // x²/2 + 0.3x = (x + 0.3)²/2 − 0.045.
    let model = ModelSpec::custom(0.0, 0.0, &[0.0, 0.3, 0.5]);
    assert!(!model.is_even());
    let ham = Hamiltonian::new(model, &BasisSpec::harmonic_oscillator(40, 1.0)).unwrap();
    for eta in [C64::new(1.0, 0.0), C64::from_polar(1.1, 0.2)] {
        let e = sorted_eigs(&ham, eta);
        for (n, en) in e.iter().take(4).enumerate() {
            assert!((en - (n as f64 + 0.455)).norm() < 1e-9, "eta {eta}: level {n} = {en}");
        }
    }
}

#[test]
fn square_root_pair_swaps_around_exceptional_point() {
    // [[a, 1], [1, −a]] has eigenvalues ±√(a² + 1), which coalesce at a = i.
    let steps = 256;
    let at = |phi: f64| {
        let a = C64::new(0.0, 1.0) + C64::from_polar(0.1, phi);
        let one = C64::new(1.0, 0.0);
        let h = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => a,
            (1, 1) => -a,
            _ => one,
        });
        eig(&h, &Overlap::Identity).unwrap().values
    };
    let start = at(0.0);
    let mut tracked = start[0];
    for k in 1..=steps {
        let vals = at(std::f64::consts::TAU * k as f64 / steps as f64);
        tracked = if (vals[0] - tracked).norm() < (vals[1] - tracked).norm() { vals[0] } else { vals[1] };
    }
    assert!((tracked - start[1]).norm() < 1e-10, "{tracked} vs {}", start[1]);
    assert!((start[0] + start[1]).norm() < 1e-12);
}

#[test]
fn free_particle_rotates_by_twice_theta() {
    let ham = Hamiltonian::new(ModelSpec::kinetic_only(), &BasisSpec::harmonic_oscillator(20, 1.0)).unwrap();
    let grid: Vec<f64> = (0..9).map(|k| 0.05 * k as f64).collect();
    let traj = ucs_sweep(&ham, 1.0, &grid, RootSelector::Index(3), true).unwrap();
    let e0 = traj.tracked_energy[0];
    for (t, e) in grid.iter().zip(&traj.tracked_energy) {
        let expected = e0 * C64::from_polar(1.0, -2.0 * t);
        assert!((e - expected).norm() < 1e-10 * e0.norm(), "theta {t}: {e} vs {expected}");
    }
    let spectra = traj.full_spectra.unwrap();
    assert_eq!(spectra.len(), grid.len());
}

#[test]
fn free_particle_landscape_is_twice_the_energy() {
    let ham = Hamiltonian::new(ModelSpec::kinetic_only(), &BasisSpec::harmonic_oscillator(20, 1.0)).unwrap();
    let land = derivative_landscape(&ham, &[0.9, 1.2], &[0.1, 0.2, 0.3], 3.0, 1e-4).unwrap();
    for (dt, e) in land.d_theta.iter().zip(&land.energies) {
        let (dt, e) = (dt.unwrap(), e.unwrap());
        assert!((dt - 2.0 * e.norm()).abs() < 1e-6 * e.norm(), "{dt} vs {}", 2.0 * e.norm());
    }
}

#[test]
fn bound_state_search_stops_at_once() {
    let ham = Hamiltonian::new(ModelSpec::pure_harmonic(), &BasisSpec::harmonic_oscillator(30, 1.0)).unwrap();
    let sp = ucs_stationary(&ham, ScalingParameter::new(1.0, 0.1), RootSelector::Index(2), &UcsOptions::default()).unwrap();
    assert_eq!(sp.rounds, 1);
    assert!((sp.energy - 2.5).norm() < 1e-9, "{}", sp.energy);
}

#[test]
fn benchmark_resonance_flattens_in_theta() {
    let ham = Hamiltonian::benchmark();
    let sp = ucs_stationary(&ham, ScalingParameter::new(1.74, 0.31), RootSelector::Energy(1.42), &UcsOptions::default())
        .unwrap();
    assert!((sp.energy.re - 1.420971).abs() < 1e-4, "{}", sp.energy);
    let (a, t) = (sp.eta_star.alpha, sp.eta_star.theta);
    let land = derivative_landscape(&ham, &[a], &[0.02, t], 1.42, 1e-4).unwrap();
    let far = land.d_theta[0].unwrap();
    let near = land.d_theta[1].unwrap();
    assert!(far >= 100.0 * near, "|dE/dtheta| {far:e} -> {near:e}");
}

/// diag(E₀ + (η − η₀)², 10): one eigenvalue with a known stationary point.
struct Parabola {
    e0: C64,
    eta0: C64,
}

impl ScaledOperator for Parabola {
    fn dimension(&self) -> usize {
        2
    }

    fn matrices_at(&self, eta: C64) -> Result<ComplexMatrixPair> {
        let d = eta - self.eta0;
        let e = self.e0 + d * d;
        let h = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => e,
            (1, 1) => C64::new(10.0, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        Ok(ComplexMatrixPair { h, s: Overlap::Identity })
    }
}

#[test]
fn two_level_stationary_point_is_recovered() {
    let op = Parabola { e0: C64::new(2.0, -0.3), eta0: C64::from_polar(1.1, 0.25) };
    let opts = UcsOptions { eta_tol: 1e-11, ..Default::default() };
    let sp = ucs_stationary(&op, ScalingParameter::new(1.05, 0.2), RootSelector::Energy(2.0), &opts).unwrap();
    assert!((sp.eta_star.eta() - op.eta0).norm() < 1e-8, "{:?}", sp.eta_star);
    assert!((sp.energy - op.e0).norm() < 1e-12);
}
