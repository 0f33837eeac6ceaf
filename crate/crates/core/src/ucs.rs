//! Uniform complex scaling oracle: tracked complex eigenvalues of H(η), an alternating
//! golden-section stationary-point search, derivative landscapes and branch-point sampling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuation::{scan_then_golden, PuiseuxSample};
use crate::eigen::{eig_pair, match_by_overlap, refine_eigenpair, EigenSet};
use crate::error::{Error, Result};
use crate::model::{ScaledOperator, ScalingParameter};
use crate::stabilization::MIN_TRACKING_QUALITY;
use crate::C64;

const MAX_THETA: f64 = std::f64::consts::FRAC_PI_4;

/// How the tracked root is chosen at the first θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootSelector {
    /// Eigenvalue nearest to this energy.
    Energy(f64),
    /// k-th eigenvalue by real part.
    Index(usize),
}

impl RootSelector {
    fn pick(self, set: &EigenSet) -> Result<usize> {
        match self {
            RootSelector::Energy(e) => Ok(set.nearest(C64::new(e, 0.0))),
            RootSelector::Index(k) if k < set.len() => Ok(k),
            RootSelector::Index(k) => Err(Error::validation("root", format!("no root {k}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcsTrajectory {
    pub alpha: f64,
    pub theta_grid: Vec<f64>,
    pub tracked_energy: Vec<C64>,
    pub full_spectra: Option<Vec<Vec<C64>>>,
    /// Overlap of each step θ_k -> θ_{k+1}.
    pub tracking_quality: Vec<f64>,
}

fn check_theta_grid(theta_grid: &[f64]) -> Result<()> {
    if theta_grid.is_empty() {
        return Err(Error::validation("theta_grid", "empty"));
    }
    if theta_grid.iter().any(|t| !(0.0..=MAX_THETA + 1e-12).contains(t)) {
        return Err(Error::validation("theta_grid", "must lie in [0, pi/4]"));
    }
    if theta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("theta_grid", "must be strictly increasing"));
    }
    Ok(())
}

/// Eigenvalues along θ at fixed α, with one root tracked by overlap.
pub fn ucs_sweep(
    op: &dyn ScaledOperator,
    alpha: f64,
    theta_grid: &[f64],
    selector: RootSelector,
    keep_spectra: bool,
) -> Result<UcsTrajectory> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::validation("alpha", "must be positive"));
    }
    check_theta_grid(theta_grid)?;
    let sets: Vec<Result<(EigenSet, crate::model::Overlap)>> = theta_grid
        .par_iter()
        .map(|&t| {
            let p = op.matrices_at(C64::from_polar(alpha, t))?;
            Ok((eig_pair(&p)?, p.s))
        })
        .collect();
    let sets: Vec<(EigenSet, crate::model::Overlap)> = sets.into_iter().collect::<Result<_>>()?;
    let first = selector.pick(&sets[0].0)?;
    let mut reference = vec![sets[0].0.vector(first)];
    let mut tracked_energy = vec![sets[0].0.values[first]];
    let mut tracking_quality = Vec::new();
    for (k, (set, s)) in sets.iter().enumerate().skip(1) {
        let (col, q) = match_by_overlap(s, &reference, set)[0];
        if q < MIN_TRACKING_QUALITY {
            return Err(Error::TrackingFailure { theta: theta_grid[k], quality: q });
        }
        tracking_quality.push(q);
        tracked_energy.push(set.values[col]);
        reference[0] = set.vector(col);
    }
    let full_spectra = keep_spectra.then(|| sets.iter().map(|(e, _)| e.values.clone()).collect());
    Ok(UcsTrajectory { alpha, theta_grid: theta_grid.to_vec(), tracked_energy, full_spectra, tracking_quality })
}

/// A tracked eigenpair.
#[derive(Debug, Clone)]
struct Pair {
    energy: C64,
    vector: Vec<C64>,
}

/// Re-solves at η starting from a nearby tracked pair.
fn track(op: &dyn ScaledOperator, eta: C64, from: &Pair) -> Result<Pair> {
    let p = op.matrices_at(eta)?;
    if let Some((energy, vector)) = refine_eigenpair(&p, from.energy, &from.vector) {
        return Ok(Pair { energy, vector });
    }
    let set = eig_pair(&p)?;
    let (col, q) = match_by_overlap(&p.s, std::slice::from_ref(&from.vector), &set)[0];
    if q < MIN_TRACKING_QUALITY {
        return Err(Error::TrackingFailure { theta: eta.arg(), quality: q });
    }
    Ok(Pair { energy: set.values[col], vector: set.vector(col) })
}

fn anchor(op: &dyn ScaledOperator, eta: C64, selector: RootSelector) -> Result<Pair> {
    let p = op.matrices_at(eta)?;
    let set = eig_pair(&p)?;
    let k = selector.pick(&set)?;
    Ok(Pair { energy: set.values[k], vector: set.vector(k) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcsOptions {
    /// Central-difference step in α and θ.
    pub fd_step: f64,
    pub max_rounds: usize,
    /// Round-to-round change of η below which the search stops.
    pub eta_tol: f64,
    /// Half-width of the θ line-search bracket (radians).
    pub theta_bracket: f64,
    /// Relative half-width of the α line-search bracket.
    pub alpha_bracket: f64,
    /// Coarse scan points per line search.
    pub scan_points: usize,
}

impl Default for UcsOptions {
    fn default() -> Self {
        Self { fd_step: 1e-4, max_rounds: 50, eta_tol: 1e-6, theta_bracket: 0.08, alpha_bracket: 0.15, scan_points: 17 }
    }
}

impl UcsOptions {
    /// Derivative magnitude indistinguishable from eigenvalue rounding in the central difference.
    pub fn noise_floor(&self, energy: C64) -> f64 {
        64.0 * f64::EPSILON * energy.norm().max(1.0) / self.fd_step
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcsStationaryPoint {
    pub eta_star: ScalingParameter,
    pub energy: C64,
    /// max(|∂E/∂α|, |∂E/∂θ|/α), an estimate of |dE/dη|.
    pub numerical_derivative_norm: f64,
    pub d_theta: f64,
    pub d_alpha: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, Copy)]
enum Line {
    Theta { alpha: f64 },
    Alpha { theta: f64 },
}

struct LineSearch<'a> {
    op: &'a dyn ScaledOperator,
    line: Line,
    h: f64,
    /// (parameter, pair, |derivative|)
    cache: std::cell::RefCell<Vec<(f64, Pair, f64)>>,
    failed: std::cell::Cell<bool>,
}

impl LineSearch<'_> {
    fn eta(&self, x: f64) -> C64 {
        match self.line {
            Line::Theta { alpha } => C64::from_polar(alpha, x),
            Line::Alpha { theta } => C64::from_polar(x, theta),
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let reference = {
            let cache = self.cache.borrow();
            cache
                .iter()
                .min_by(|a, b| (a.0 - x).abs().total_cmp(&(b.0 - x).abs()))
                .map(|c| c.1.clone())
        };
        let Some(reference) = reference else { return f64::INFINITY };
        let f = (|| -> Result<(Pair, f64)> {
            let center = track(self.op, self.eta(x), &reference)?;
            let plus = track(self.op, self.eta(x + self.h), &center)?;
            let minus = track(self.op, self.eta(x - self.h), &center)?;
            Ok((center, ((plus.energy - minus.energy) / (2.0 * self.h)).norm()))
        })();
        match f {
            Ok((pair, d)) => {
                self.cache.borrow_mut().push((x, pair, d));
                d
            }
            Err(_) => {
                self.failed.set(true);
                f64::INFINITY
            }
        }
    }

    /// Evaluates the scan outward from the start so each point is tracked from a neighbour.
    fn minimize(&self, start: f64, lo: f64, hi: f64, scan: usize, noise: f64) -> Option<(f64, Pair, f64)> {
        let n = scan.max(3);
        let xs: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| (xs[a] - start).abs().total_cmp(&(xs[b] - start).abs()));
        for &k in &order {
            self.eval(xs[k]);
        }
        let cache = self.cache.borrow().clone();
        let best = cache.iter().min_by(|a, b| a.2.total_cmp(&b.2))?.clone();
        if best.2 <= noise {
            return Some(best);
        }
        let step = (hi - lo) / (n - 1) as f64;
        let a = (best.0 - step).max(lo);
        let b = (best.0 + step).min(hi);
        let (x, _) = scan_then_golden(&|x| self.eval(x), a, b, 3, 1e-10, noise);
        let cache = self.cache.borrow();
        let found = cache.iter().filter(|c| c.0 == x).min_by(|a, b| a.2.total_cmp(&b.2)).cloned();
        let overall = cache.iter().min_by(|a, b| a.2.total_cmp(&b.2)).cloned();
        match (found, overall) {
            (Some(f), Some(o)) => Some(if o.2 < f.2 { o } else { f }),
            (None, o) => o,
            (f, None) => f,
        }
    }
}

fn fd_derivatives(op: &dyn ScaledOperator, alpha: f64, theta: f64, center: &Pair, h: f64) -> Result<(f64, f64)> {
    let e = |a: f64, t: f64| track(op, C64::from_polar(a, t), center).map(|p| p.energy);
    let dt = (e(alpha, theta + h)? - e(alpha, theta - h)?) / (2.0 * h);
    let da = (e(alpha + h, theta)? - e(alpha - h, theta)?) / (2.0 * h);
    Ok((dt.norm(), da.norm()))
}

/// Alternating golden-section search for a stationary point of the tracked eigenvalue.
pub fn ucs_stationary(
    op: &dyn ScaledOperator,
    seed: ScalingParameter,
    selector: RootSelector,
    options: &UcsOptions,
) -> Result<UcsStationaryPoint> {
    if !(seed.alpha > 0.0 && seed.alpha.is_finite()) || !(0.0..=MAX_THETA).contains(&seed.theta) {
        return Err(Error::validation("seed", "need alpha > 0 and theta in [0, pi/4]"));
    }
    let h = options.fd_step;
    let (mut alpha, mut theta) = (seed.alpha, seed.theta);
    let mut pair = anchor(op, seed.eta(), selector)?;
    let mut trace = Vec::new();
    for round in 1..=options.max_rounds {
        let prev = C64::from_polar(alpha, theta);
        let noise = options.noise_floor(pair.energy);

        let ls = LineSearch { op, line: Line::Theta { alpha }, h, cache: Default::default(), failed: Default::default() };
        ls.cache.borrow_mut().push((theta, pair.clone(), f64::INFINITY));
        let lo = (theta - options.theta_bracket).max(h);
        let hi = (theta + options.theta_bracket).min(MAX_THETA - h);
        let (t, p, ft) = ls
            .minimize(theta, lo, hi, options.scan_points, noise * alpha)
            .ok_or_else(|| Error::NonConvergence { rounds: round, trace: "theta line search failed".into() })?;
        theta = t;
        pair = p;

        let ls = LineSearch { op, line: Line::Alpha { theta }, h, cache: Default::default(), failed: Default::default() };
        ls.cache.borrow_mut().push((alpha, pair.clone(), f64::INFINITY));
        let lo = (alpha * (1.0 - options.alpha_bracket)).max(2.0 * h);
        let hi = alpha * (1.0 + options.alpha_bracket);
        let (a, p, fa) = ls
            .minimize(alpha, lo, hi, options.scan_points, noise)
            .ok_or_else(|| Error::NonConvergence { rounds: round, trace: "alpha line search failed".into() })?;
        alpha = a;
        pair = p;

        let eta = C64::from_polar(alpha, theta);
        trace.push(format!("({alpha:.7}, {theta:.7}) |dE/dtheta|={ft:.2e} |dE/dalpha|={fa:.2e}"));
        let settled = (eta - prev).norm() < options.eta_tol;
        let at_noise = ft <= noise * alpha && fa <= noise;
        if settled || at_noise {
            let (d_theta, d_alpha) = fd_derivatives(op, alpha, theta, &pair, h)?;
            let norm = d_alpha.max(d_theta / alpha);
            if norm > 1e-6 * pair.energy.norm().max(1.0) {
                return Err(Error::NonConvergence {
                    rounds: round,
                    trace: format!("stalled with |dE/deta| = {norm:.3e}: {}", trace.join(" -> ")),
                });
            }
            return Ok(UcsStationaryPoint {
                eta_star: ScalingParameter::new(alpha, theta),
                energy: pair.energy,
                numerical_derivative_norm: norm,
                d_theta,
                d_alpha,
                rounds: round,
            });
        }
    }
    Err(Error::NonConvergence { rounds: options.max_rounds, trace: trace.join(" -> ") })
}

/// |∂E/∂θ| and |∂E/∂α| of a tracked root on an (α, θ) grid, row-major with α outer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub alpha_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub d_theta: Vec<Option<f64>>,
    pub d_alpha: Vec<Option<f64>>,
    pub energies: Vec<Option<C64>>,
}

impl Landscape {
    fn argmin(&self, v: &[Option<f64>]) -> Option<(usize, usize)> {
        let nt = self.theta_grid.len();
        v.iter()
            .enumerate()
            .filter_map(|(i, x)| x.map(|x| (i, x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| (i / nt, i % nt))
    }

    /// (α index, θ index) of the global minimum of |∂E/∂θ|.
    pub fn d_theta_minimum(&self) -> Option<(usize, usize)> {
        self.argmin(&self.d_theta)
    }

    pub fn d_alpha_minimum(&self) -> Option<(usize, usize)> {
        self.argmin(&self.d_alpha)
    }

    pub fn get(&self, v: &[Option<f64>], ia: usize, it: usize) -> Option<f64> {
        v[ia * self.theta_grid.len() + it]
    }

    /// α indices of local maxima of |∂E/∂θ| along the θ row `it`.
    pub fn ridges(&self, it: usize) -> Vec<usize> {
        let na = self.alpha_grid.len();
        let row: Vec<f64> = (0..na).map(|ia| self.get(&self.d_theta, ia, it).unwrap_or(f64::NAN)).collect();
        (1..na.saturating_sub(1))
            .filter(|&i| row[i] > row[i - 1] && row[i] >= row[i + 1])
            .collect()
    }
}

/// Finite-difference derivative magnitudes of the root nearest `reference_energy` at θ₀,
/// tracked along θ for every α. Tracking failures become gaps.
pub fn derivative_landscape(
    op: &dyn ScaledOperator,
    alpha_grid: &[f64],
    theta_grid: &[f64],
    reference_energy: f64,
    fd_step: f64,
) -> Result<Landscape> {
    check_theta_grid(theta_grid)?;
    if alpha_grid.is_empty() || alpha_grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::validation("alpha_grid", "must be non-empty and positive"));
    }
    if alpha_grid.len() * theta_grid.len() > 10_000 {
        return Err(Error::validation("grid", "at most 10^4 points"));
    }
    let columns: Vec<Vec<(Option<f64>, Option<f64>, Option<C64>)>> = alpha_grid
        .par_iter()
        .map(|&a| {
            let mut out = Vec::with_capacity(theta_grid.len());
            let mut current = anchor(op, C64::from_polar(a, theta_grid[0]), RootSelector::Energy(reference_energy)).ok();
            for &t in theta_grid {
                let Some(prev) = current.clone() else {
                    out.push((None, None, None));
                    continue;
                };
                match track(op, C64::from_polar(a, t), &prev) {
                    Ok(pair) => {
                        let d = fd_derivatives(op, a, t, &pair, fd_step).ok();
                        out.push((d.map(|d| d.0), d.map(|d| d.1), Some(pair.energy)));
                        current = Some(pair);
                    }
                    Err(_) => out.push((None, None, None)),
                }
            }
            out
        })
        .collect();
    let mut land = Landscape {
        alpha_grid: alpha_grid.to_vec(),
        theta_grid: theta_grid.to_vec(),
        d_theta: Vec::new(),
        d_alpha: Vec::new(),
        energies: Vec::new(),
    };
    for col in columns {
        for (dt, da, e) in col {
            land.d_theta.push(dt);
            land.d_alpha.push(da);
            land.energies.push(e);
        }
    }
    Ok(land)
}

/// The two eigenvalues nearest `center`.
fn nearest_pair(op: &dyn ScaledOperator, eta: C64, center: C64) -> Result<(C64, C64)> {
    let set = eig_pair(&op.matrices_at(eta)?)?;
    let mut idx: Vec<usize> = (0..set.len()).collect();
    idx.sort_by(|&a, &b| (set.values[a] - center).norm().total_cmp(&(set.values[b] - center).norm()));
    if idx.len() < 2 {
        return Err(Error::validation("operator", "need at least two eigenvalues"));
    }
    Ok((set.values[idx[0]], set.values[idx[1]]))
}

/// Branch point (η_BP, E_BP) by Newton on D(η) = (E_a − E_b)² for the pair nearest `energy_guess`.
pub fn locate_branch_point(op: &dyn ScaledOperator, eta_guess: C64, energy_guess: C64) -> Result<(C64, C64)> {
    let mut eta = eta_guess;
    let mut center = energy_guess;
    let mut trace = Vec::new();
    for it in 0..60 {
        let (a, b) = nearest_pair(op, eta, center)?;
        center = 0.5 * (a + b);
        let d = (a - b) * (a - b);
        let h = 1e-7 * eta.norm();
        let (a1, b1) = nearest_pair(op, eta + h, center)?;
        let d1 = (a1 - b1) * (a1 - b1);
        let slope = (d1 - d) / h;
        if slope.norm() == 0.0 {
            break;
        }
        let mut step = d / slope;
        let cap = 0.01 * eta.norm();
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        eta -= step;
        trace.push(format!("{it}: eta={eta:.10} |gap|={:.3e}", (a - b).norm()));
        if step.norm() < 1e-13 * eta.norm() {
            let (a, b) = nearest_pair(op, eta, center)?;
            return Ok((eta, 0.5 * (a + b)));
        }
    }
    Err(Error::NonConvergence { rounds: 60, trace: trace.join("; ") })
}

/// Eigenvalue-pair samples on circles of the given radii around η_BP.
pub fn branch_point_samples(
    op: &dyn ScaledOperator,
    eta_bp: C64,
    energy_bp: C64,
    radii: &[f64],
    angles: &[f64],
) -> Result<Vec<PuiseuxSample>> {
    let mut out = Vec::new();
    for &r in radii {
        for &phi in angles {
            let eta = eta_bp + C64::from_polar(r, phi);
            let (a, b) = nearest_pair(op, eta, energy_bp)?;
            out.push(PuiseuxSample { eta, e_plus: a, e_minus: b });
        }
    }
    Ok(out)
}
