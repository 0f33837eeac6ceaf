//! Stabilization sweeps at θ = 0, root tracking, avoided-crossing detection and
//! stable-window proposal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{eig_real_symmetric, match_by_overlap, EigenSet};
use crate::error::{Error, Result};
use crate::model::{Hamiltonian, ScaledOperator};
use crate::C64;

/// Tracking overlap below which a sweep step is rejected.
pub const MIN_TRACKING_QUALITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Computed,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationData {
    pub alpha_grid: Vec<f64>,
    /// curves[root][k] = E_root(α_k).
    pub curves: Vec<Vec<f64>>,
    /// Worst matched overlap for each step k -> k+1.
    pub tracking_quality: Vec<f64>,
    pub source: DataSource,
    /// Set when imported data lacked root labels and nearest-energy tracking was applied.
    #[serde(default)]
    pub nearest_energy_tracking: bool,
}

impl StabilizationData {
    /// Structural checks shared by computed and imported data.
    pub fn validate(&self) -> Result<()> {
        let n = self.alpha_grid.len();
        if n < 2 {
            return Err(Error::validation("alpha_grid", "need at least 2 points"));
        }
        if self.alpha_grid.iter().any(|a| !a.is_finite()) {
            return Err(Error::validation("alpha_grid", "must be finite"));
        }
        if self.alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("alpha_grid", "must be strictly increasing"));
        }
        if self.curves.is_empty() {
            return Err(Error::validation("curves", "no curves"));
        }
        for (r, c) in self.curves.iter().enumerate() {
            if c.len() != n {
                return Err(Error::validation("curves", format!("curve {r} has {} values for {n} grid points", c.len())));
            }
            if c.iter().any(|e| !e.is_finite()) {
                return Err(Error::validation("curves", format!("curve {r} has non-finite values")));
            }
        }
        if self.tracking_quality.len() != n - 1 {
            return Err(Error::validation("tracking_quality", "need one entry per grid step"));
        }
        if self.tracking_quality.iter().any(|q| !(*q > 0.0 && *q <= 1.0)) {
            return Err(Error::validation("tracking_quality", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn num_roots(&self) -> usize {
        self.curves.len()
    }

    /// Largest grid step.
    pub fn max_step(&self) -> f64 {
        self.alpha_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Validates a grid for sweeps: at least 10 strictly increasing positive points.
pub fn validate_grid(alpha_grid: &[f64]) -> Result<()> {
    if alpha_grid.len() < 10 {
        return Err(Error::validation("alpha_grid", "need at least 10 points"));
    }
    if alpha_grid.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::validation("alpha_grid", "must be positive and finite"));
    }
    if alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("alpha_grid", "must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Number of lowest roots (at the first grid point) to track.
    pub roots: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { roots: 20 }
    }
}

/// Eigenvalues along a real α grid, tracked by eigenvector overlap.
pub fn sweep(ham: &Hamiltonian, alpha_grid: &[f64], options: SweepOptions) -> Result<StabilizationData> {
    validate_grid(alpha_grid)?;
    let n = ham.dimension();
    let roots = options.roots.clamp(1, n);
    let sets: Vec<Result<EigenSet>> = alpha_grid
        .par_iter()
        .map(|&a| {
            let p = ham.matrices_at(C64::new(a, 0.0))?;
            eig_real_symmetric(&p.h, &p.s)
        })
        .collect();
    let sets: Vec<EigenSet> = sets.into_iter().collect::<Result<_>>()?;
    let s = ham.basis.overlap().clone();

    let mut curves = vec![Vec::with_capacity(alpha_grid.len()); roots];
    let mut reference: Vec<Vec<C64>> = (0..roots).map(|r| sets[0].vector(r)).collect();
    for (r, c) in curves.iter_mut().enumerate() {
        c.push(sets[0].values[r].re);
    }
    let mut tracking_quality = Vec::with_capacity(alpha_grid.len() - 1);
    for (k, set) in sets.iter().enumerate().skip(1) {
        let assignment = match_by_overlap(&s, &reference, set);
        let worst = assignment.iter().map(|a| a.1).fold(1.0, f64::min);
        if worst < MIN_TRACKING_QUALITY {
            return Err(Error::TrackingAmbiguity { step: k, quality: worst });
        }
        tracking_quality.push(worst);
        for (r, &(col, _)) in assignment.iter().enumerate() {
            curves[r].push(set.values[col].re);
            reference[r] = set.vector(col);
        }
    }
    Ok(StabilizationData {
        alpha_grid: alpha_grid.to_vec(),
        curves,
        tracking_quality,
        source: crate::stabilization::DataSource::Computed,
        nearest_energy_tracking: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableWindow {
    pub id: String,
    pub root_index: usize,
    pub alpha_range: (f64, f64),
    pub point_indices: Vec<usize>,
    pub flatness: f64,
}

impl StableWindow {
    /// Builds a window over explicit contiguous indices of one curve.
    pub fn from_indices(data: &StabilizationData, root_index: usize, first: usize, last: usize) -> Result<Self> {
        if root_index >= data.num_roots() {
            return Err(Error::validation("root_index", format!("no root {root_index}")));
        }
        if first >= last || last >= data.alpha_grid.len() {
            return Err(Error::validation("point_indices", "need a contiguous range inside the grid"));
        }
        let c = &data.curves[root_index];
        let g = &data.alpha_grid;
        let flatness = (first..last).map(|k| ((c[k + 1] - c[k]) / (g[k + 1] - g[k])).abs()).fold(0.0, f64::max);
        Ok(Self {
            id: format!("w{root_index}-{first}-{last}"),
            root_index,
            alpha_range: (g[first], g[last]),
            point_indices: (first..=last).collect(),
            flatness,
        })
    }

    pub fn len(&self) -> usize {
        self.point_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_indices.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.alpha_range.1 - self.alpha_range.0
    }

    /// (α, E) pairs of the window, ascending in α.
    pub fn points(&self, data: &StabilizationData) -> Vec<(f64, f64)> {
        self.point_indices
            .iter()
            .map(|&k| (data.alpha_grid[k], data.curves[self.root_index][k]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidedCrossing {
    pub root_pair: (usize, usize),
    pub alpha_at_min_gap: f64,
    pub min_gap: f64,
    /// Curves swap order between grid points (followed through by tracking) rather than
    /// turning back at a resolved gap minimum. Exact crossings of decoupled states show up this way.
    #[serde(default)]
    pub sign_change: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOptions {
    pub flatness_tol: f64,
    pub min_points: usize,
    /// Guard margin in grid steps.
    pub guard: usize,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self { flatness_tol: 1e-2, min_points: 12, guard: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub windows: Vec<StableWindow>,
    pub crossings: Vec<AvoidedCrossing>,
    pub gap_tol: f64,
    /// Present when no window was found.
    pub diagnostic: Option<String>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Vertex of the parabola through three points: (x*, y*).
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let d01 = (y[1] - y[0]) / (x[1] - x[0]);
    let d12 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d12 - d01) / (x[2] - x[0]);
    if !(a > 0.0) {
        return None;
    }
    let b = d01 - a * (x[0] + x[1]);
    let xv = -b / (2.0 * a);
    let yv = y[1] + (xv - x[1]) * (d01 + a * (xv - x[0]));
    let yv = {
        // Evaluate in Newton form for accuracy: y0 + d01 (x - x0) + a (x - x0)(x - x1).
        let alt = y[0] + d01 * (xv - x[0]) + a * (xv - x[0]) * (xv - x[1]);
        if alt.is_finite() { alt } else { yv }
    };
    Some((xv, yv))
}

/// Whether curves a and b are neighbours in energy at grid point k.
fn adjacent(data: &StabilizationData, a: usize, b: usize, k: usize) -> bool {
    let (lo, hi) = {
        let (ea, eb) = (data.curves[a][k], data.curves[b][k]);
        if ea <= eb { (ea, eb) } else { (eb, ea) }
    };
    !data
        .curves
        .iter()
        .enumerate()
        .any(|(r, c)| r != a && r != b && c[k] > lo && c[k] < hi)
}

/// Avoided crossings between energy-adjacent curves, and the gap tolerance used.
pub fn detect_crossings(data: &StabilizationData) -> (Vec<AvoidedCrossing>, f64) {
    let g = &data.alpha_grid;
    let kmax = g.len();
    let r = data.num_roots();

    // Noise floor: median step-to-step change of adjacent gaps.
    let mut changes = Vec::new();
    for k in 0..kmax.saturating_sub(1) {
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&x, &y| data.curves[x][k].total_cmp(&data.curves[y][k]));
        for w in order.windows(2) {
            let g0 = (data.curves[w[1]][k] - data.curves[w[0]][k]).abs();
            let g1 = (data.curves[w[1]][k + 1] - data.curves[w[0]][k + 1]).abs();
            changes.push((g1 - g0).abs());
        }
    }
    let gap_tol = 5.0 * median(changes);

    let mut out = Vec::new();
    for a in 0..r {
        for b in a + 1..r {
            let d: Vec<f64> = (0..kmax).map(|k| data.curves[a][k] - data.curves[b][k]).collect();
            for k in 0..kmax - 1 {
                if d[k] * d[k + 1] < 0.0 && (adjacent(data, a, b, k) || adjacent(data, a, b, k + 1)) {
                    let t = d[k] / (d[k] - d[k + 1]);
                    out.push(AvoidedCrossing {
                        root_pair: (a, b),
                        alpha_at_min_gap: g[k] + t * (g[k + 1] - g[k]),
                        min_gap: d[k].abs().min(d[k + 1].abs()),
                        sign_change: true,
                    });
                }
            }
            for k in 1..kmax.saturating_sub(1) {
                let (l, m, h) = (d[k - 1], d[k], d[k + 1]);
                if l * m <= 0.0 || m * h <= 0.0 {
                    continue;
                }
                if !(m.abs() < l.abs() && m.abs() <= h.abs() && m.abs() < gap_tol) {
                    continue;
                }
                if !adjacent(data, a, b, k) {
                    continue;
                }
                let (alpha, gap) = match parabola_vertex([g[k - 1], g[k], g[k + 1]], [l * l, m * m, h * h]) {
                    Some((x, y)) if y > 0.0 && x > g[k - 1] && x < g[k + 1] => (x, y.sqrt()),
                    _ => (g[k], m.abs()),
                };
                out.push(AvoidedCrossing { root_pair: (a, b), alpha_at_min_gap: alpha, min_gap: gap, sign_change: false });
            }
        }
    }
    out.sort_by(|x, y| {
        x.alpha_at_min_gap
            .total_cmp(&y.alpha_at_min_gap)
            .then(x.root_pair.cmp(&y.root_pair))
    });
    (out, gap_tol)
}

/// True when the guard-extended support of `crossing` touches grid point `k` of `root`.
pub fn guarded(data: &StabilizationData, crossing: &AvoidedCrossing, root: usize, k: usize, guard: usize) -> bool {
    let (a, b) = crossing.root_pair;
    if a != root && b != root {
        return false;
    }
    let margin = guard as f64 * data.max_step() * (1.0 + 1e-9);
    (data.alpha_grid[k] - crossing.alpha_at_min_gap).abs() <= margin
}

/// Crossings (involving `root`) whose guard band meets the index range [first, last].
pub fn crossings_in_range<'a>(
    data: &StabilizationData,
    crossings: &'a [AvoidedCrossing],
    root: usize,
    first: usize,
    last: usize,
    guard: usize,
) -> Vec<&'a AvoidedCrossing> {
    let margin = guard as f64 * data.max_step() * (1.0 + 1e-9);
    let lo = data.alpha_grid[first] - margin;
    let hi = data.alpha_grid[last] + margin;
    crossings
        .iter()
        .filter(|c| (c.root_pair.0 == root || c.root_pair.1 == root) && c.alpha_at_min_gap >= lo && c.alpha_at_min_gap <= hi)
        .collect()
}

/// Flat, crossing-free windows on every curve plus the detected crossings.
pub fn detect_windows(data: &StabilizationData, options: WindowOptions) -> Result<WindowReport> {
    data.validate()?;
    if !(options.flatness_tol > 0.0) {
        return Err(Error::validation("flatness_tol", "must be positive"));
    }
    if options.min_points < 2 {
        return Err(Error::validation("min_points", "must be at least 2"));
    }
    let (crossings, gap_tol) = detect_crossings(data);
    let g = &data.alpha_grid;
    let kmax = g.len();
    let mut windows = Vec::new();
    let mut best_run: Option<(usize, usize, f64)> = None;
    for (root, c) in data.curves.iter().enumerate() {
        let flat: Vec<bool> = (0..kmax - 1)
            .map(|k| ((c[k + 1] - c[k]) / (g[k + 1] - g[k])).abs() <= options.flatness_tol)
            .collect();
        let keep: Vec<bool> = (0..kmax)
            .map(|k| !crossings.iter().any(|x| guarded(data, x, root, k, options.guard)))
            .collect();
        let mut k = 0;
        while k < kmax - 1 {
            if !(flat[k] && keep[k] && keep[k + 1]) {
                k += 1;
                continue;
            }
            let first = k;
            while k < kmax - 1 && flat[k] && keep[k + 1] {
                k += 1;
            }
            let last = k;
            let len = last - first + 1;
            if best_run.is_none_or(|b| len > b.1) {
                best_run = Some((root, len, 0.0));
            }
            if len >= options.min_points {
                windows.push(StableWindow::from_indices(data, root, first, last)?);
            }
        }
    }
    windows.sort_by(|a, b| {
        a.flatness
            .total_cmp(&b.flatness)
            .then(a.root_index.cmp(&b.root_index))
            .then(a.point_indices[0].cmp(&b.point_indices[0]))
    });
    let diagnostic = if windows.is_empty() {
        Some(match best_run {
            Some((root, len, _)) => format!(
                "no run of {} flat points (|dE/dalpha| <= {}); longest flat run has {} points on root {}",
                options.min_points, options.flatness_tol, len, root
            ),
            None => format!("no segment with |dE/dalpha| <= {}", options.flatness_tol),
        })
    } else {
        None
    };
    Ok(WindowReport { windows, crossings, gap_tol, diagnostic })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(grid: Vec<f64>, curves: Vec<Vec<f64>>) -> StabilizationData {
        let n = grid.len();
        StabilizationData {
            alpha_grid: grid,
            curves,
            tracking_quality: vec![1.0; n - 1],
            source: DataSource::Imported,
            nearest_energy_tracking: false,
        }
    }

    #[test]
    fn constant_curve_is_one_window() {
        let grid: Vec<f64> = (0..30).map(|k| 1.0 + 0.05 * k as f64).collect();
        let d = data(grid, vec![vec![0.3; 30]]);
        let rep = detect_windows(&d, WindowOptions::default()).unwrap();
        assert_eq!(rep.windows.len(), 1);
        assert_eq!(rep.windows[0].point_indices, (0..30).collect::<Vec<_>>());
        assert_eq!(rep.windows[0].flatness, 0.0);
        assert!(rep.crossings.is_empty());
    }

    #[test]
    fn hyperbolic_crossing_is_located() {
        let grid: Vec<f64> = (0..101).map(|k| 0.02 * k as f64 + 0.003).collect();
        let up: Vec<f64> = grid.iter().map(|a| ((a - 1.0f64).powi(2) + 1e-4).sqrt()).collect();
        let dn: Vec<f64> = up.iter().map(|e| -e).collect();
        let d = data(grid, vec![dn, up]);
        let (c, _) = detect_crossings(&d);
        assert_eq!(c.len(), 1);
        assert!((c[0].alpha_at_min_gap - 1.0).abs() <= 0.02);
        assert!((c[0].min_gap - 0.02).abs() <= 1e-6, "{}", c[0].min_gap);
    }

    #[test]
    fn no_window_gives_diagnostic() {
        let grid: Vec<f64> = (0..20).map(|k| 1.0 + 0.1 * k as f64).collect();
        let curve = grid.iter().map(|a| 3.0 * a).collect();
        let rep = detect_windows(&data(grid, vec![curve]), WindowOptions::default()).unwrap();
        assert!(rep.windows.is_empty());
        assert!(rep.diagnostic.is_some());
    }
}
