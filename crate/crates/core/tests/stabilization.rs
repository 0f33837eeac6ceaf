use std::sync::OnceLock;

use padres_core::config::{Config, GridSpec};
use padres_core::continuation::{alpha_trajectory, theta_trajectory};
use padres_core::model::{BasisSpec, Hamiltonian, ModelSpec};
use padres_core::pipeline::{self, ResonanceRequest, StationaryOutcome};
use padres_core::session::{Session, Source};
use padres_core::stabilization::{sweep, SweepOptions};

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    GridSpec::new(lo, hi, n).points()
}

// Low levels are exact near α = 1 to rounding, so the curve minimum is checked as
// "the α = 1 sample is the smallest, up to rounding" rather than by locating a vertex.
#[test]
fn oscillator_levels_are_lowest_at_matching_width() {
    let ham = Hamiltonian::new(ModelSpec::pure_harmonic(), &BasisSpec::harmonic_oscillator(40, 1.0)).unwrap();
    let xs = grid(0.8, 1.2, 81);
    let at_one = xs.iter().position(|&a| (a - 1.0).abs() < 1e-12).unwrap();
    let data = sweep(&ham, &xs, SweepOptions { roots: 6 }).unwrap();
    for (n, curve) in data.curves.iter().enumerate().take(6) {
        let exact = n as f64 + 0.5;
        assert!((curve[at_one] - exact).abs() < 1e-12, "level {n}: {}", curve[at_one]);
        for (a, e) in xs.iter().zip(curve) {
            assert!(*e >= curve[at_one] - 1e-12, "level {n} dips below at {a}: {e}");
        }
    }
    // Away from the matching width the levels rise.
    let wide = sweep(&ham, &grid(0.3, 3.0, 28), SweepOptions { roots: 6 }).unwrap();
    for curve in &wide.curves {
        assert!(curve[0] > curve[7] + 1e-6 && *curve.last().unwrap() > curve[7] + 1e-6);
    }
}

#[test]
fn free_particle_curves_scale_as_inverse_square() {
    let ham = Hamiltonian::new(ModelSpec::kinetic_only(), &BasisSpec::harmonic_oscillator(20, 1.0)).unwrap();
    let xs = grid(0.5, 1.5, 11);
    let data = sweep(&ham, &xs, SweepOptions { roots: 10 }).unwrap();
    let at_one = xs.iter().position(|&a| (a - 1.0).abs() < 1e-12).unwrap();
    for curve in &data.curves {
        for (a, e) in xs.iter().zip(curve) {
            let expected = curve[at_one] / (a * a);
            assert!((e - expected).abs() < 1e-12 * expected.abs().max(1.0), "{a}: {e} vs {expected}");
        }
    }
}

struct Benchmark {
    session: Session,
    outcome: StationaryOutcome,
}

fn benchmark() -> &'static Benchmark {
    static CELL: OnceLock<Benchmark> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = Config::default();
        let mut session =
            Session::new(Source::Model { model: ModelSpec::benchmark(), basis: BasisSpec::benchmark() }, Default::default(), "");
        let stab = pipeline::stabilize(&session, &cfg.stabilize_alpha, &cfg).unwrap();
        session.add_stabilization(stab).unwrap();
        let outcome = pipeline::resonance(&mut session, &ResonanceRequest::default(), &cfg).unwrap();
        Benchmark { session, outcome }
    })
}

#[test]
fn benchmark_has_one_plateau() {
    let b = benchmark();
    let data = &b.session.stabilization().unwrap().data;
    let report = &b.session.windows[0].report;
    assert!(!report.windows.is_empty());
    let mid = |w: &padres_core::stabilization::StableWindow| data.curves[w.root_index][w.point_indices[w.len() / 2]];
    // Every window above threshold sits on the same energy.
    let above: Vec<f64> = report.windows.iter().map(mid).filter(|&e| e > 0.8).collect();
    assert!(!above.is_empty());
    for e in &above {
        assert!((e - above[0]).abs() < 0.05, "second plateau at {e} besides {}", above[0]);
    }
    assert!((above[0] - 1.421).abs() < 0.01, "{}", above[0]);
    for w in report.windows.iter().filter(|w| mid(w) > 0.8) {
        assert!(w.flatness < 1e-2, "{}: {}", w.id, w.flatness);
    }
    assert!(report.windows.iter().any(|w| mid(w) > 0.8 && w.len() >= 20));
    // Continuum curves outside the plateau move.
    let plateau: Vec<usize> = report.windows.iter().map(|w| w.root_index).collect();
    for (r, curve) in data.curves.iter().enumerate() {
        let lo = curve.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo > 2.5 && !plateau.contains(&r) {
            assert!(hi - lo > 0.1, "root {r} varies by {}", hi - lo);
        }
    }
}

#[test]
fn benchmark_theta_trajectory_slows_at_the_stationary_point() {
    let b = benchmark();
    let sp = &b.outcome.points[0].point;
    let fit = b.session.fit(&b.outcome.search.fit_id).unwrap();
    let thetas = grid(0.0, 0.6, 121);
    let t = theta_trajectory(&fit.fraction, sp.eta_star.alpha, &thetas).unwrap();
    let s = t.spacings();
    let k = t.min_spacing_segment().unwrap();
    let fastest = s.iter().copied().fold(0.0, f64::max);
    assert!(fastest > 10.0 * s[k], "fastest {fastest:e}, slowest {:e}", s[k]);
    assert!((0.5 * (thetas[k] + thetas[k + 1]) - sp.eta_star.theta).abs() <= 0.005 + 1e-12);
}

#[test]
fn benchmark_alpha_trajectory_has_cusp_at_the_stationary_point() {
    let b = benchmark();
    let sp = &b.outcome.points[0].point;
    let fit = b.session.fit(&b.outcome.search.fit_id).unwrap();
    let (lo, hi) = fit.window.alpha_range;
    let alphas = grid(lo, hi, 201);
    let t = alpha_trajectory(&fit.fraction, sp.eta_star.theta, &alphas).unwrap();
    let k = t.min_spacing_segment().unwrap();
    let step = alphas[1] - alphas[0];
    assert!((0.5 * (alphas[k] + alphas[k + 1]) - sp.eta_star.alpha).abs() <= step, "cusp at segment {k}");
}

#[test]
fn benchmark_energy_matches_reference() {
    let e = benchmark().outcome.points[0].point.energy;
    assert!((e.re - 1.420971).abs() < 5e-4 && (e.im + 5.83e-5).abs() < 5e-4, "{e}");
}
