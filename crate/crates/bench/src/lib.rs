//! Shared inputs for the benchmarks.

use padres_core::config::Config;
use padres_core::model::Hamiltonian;
use padres_core::stabilization::{self, StabilizationData};

/// Benchmark sweep on the default grid.
pub fn benchmark_sweep() -> StabilizationData {
    let cfg = Config::default();
    stabilization::sweep(&Hamiltonian::benchmark(), &cfg.stabilize_alpha.points(), cfg.sweep).expect("sweep")
}

/// Points of the flattest window of `data`.
pub fn flattest_window(data: &StabilizationData) -> Vec<(f64, f64)> {
    let report = stabilization::detect_windows(data, Config::default().windows).expect("windows");
    report.windows[0].points(data)
}
