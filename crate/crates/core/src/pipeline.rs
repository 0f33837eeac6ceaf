//! The analysis steps shared by the CLI and the HTTP service. Each step reads a session,
//! returns the derived record (or the cached one when an identical request was already
//! recorded), and a matching `Session::add_*` appends it.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{Config, GridSpec};
use crate::continuation::{
    alpha_trajectory, find_stationary, gap_exponent, puiseux_fit, theta_trajectory, SeedRegion, TrajectoryKind,
};
use crate::error::{Error, Result};
use crate::ids::content_id;
use crate::io::{fmt_f64, Imported, ImportFormat};
use crate::model::Hamiltonian;
use crate::schlessinger::{diagnose, fit as fit_fraction, subsample_indices};
use crate::session::*;
use crate::stabilization::{crossings_in_range, detect_crossings, detect_windows, sweep, StableWindow};
use crate::ucs::{branch_point_samples, derivative_landscape, locate_branch_point, ucs_stationary, RootSelector};
use crate::C64;

const MAX_THETA: f64 = std::f64::consts::FRAC_PI_4;

fn bits(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

fn hash_json<T: Serialize>(prefix: &str, parts: &[&str], value: &T) -> String {
    content_id(prefix, &format!("{}|{}", parts.join("|"), serde_json::to_string(value).expect("serializable")))
}

/// Session seeded with imported stabilization data.
pub fn import_session(imported: Imported, path: &str, format: ImportFormat, salt: &str) -> Session {
    let source = Source::Import { path: path.to_string(), format, annotations: imported.annotations };
    let mut s = Session::new(source, imported.units, salt);
    let id = hash_json("stab", &[], &imported.data);
    s.stabilization = Some(StabilizationRecord { id, data: imported.data });
    s
}

pub fn hamiltonian(s: &Session) -> Result<Hamiltonian> {
    match &s.source {
        Source::Model { model, basis } => Hamiltonian::new(model.clone(), basis),
        Source::Import { .. } => Err(Error::validation("source", "this step needs a model session; imported data has no Hamiltonian")),
    }
}

/// Real-scaling sweep.
pub fn stabilize(s: &Session, grid: &GridSpec, cfg: &Config) -> Result<StabilizationRecord> {
    grid.validate("alpha_grid")?;
    let id = match &s.source {
        Source::Model { model, basis } => hash_json("stab", &[&grid.to_string(), &cfg.sweep.roots.to_string()], &(model, basis)),
        Source::Import { .. } => {
            return s.stabilization.clone().ok_or_else(|| Error::NotFound("imported stabilization data".into()));
        }
    };
    if let Some(existing) = &s.stabilization {
        if existing.id == id {
            return Ok(existing.clone());
        }
        return Err(Error::validation("alpha_grid", "session already holds a different stabilization sweep; start a new session"));
    }
    let ham = hamiltonian(s)?;
    let data = sweep(&ham, &grid.points(), cfg.sweep)?;
    Ok(StabilizationRecord { id, data })
}

/// Crossings and stable windows.
pub fn windows(s: &Session, cfg: &Config) -> Result<WindowsRecord> {
    let stab = s.stabilization()?;
    let id = hash_json("win", &[&stab.id], &cfg.windows);
    if let Some(w) = s.windows.iter().find(|w| w.id == id) {
        return Ok(w.clone());
    }
    let report = detect_windows(&stab.data, cfg.windows)?;
    Ok(WindowsRecord { id, stabilization_id: stab.id.clone(), options: cfg.windows, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRequest {
    /// A detected window id, or `w{root}-{first}-{last}` for any contiguous range.
    pub window_id: String,
    /// Grid indices to fit, inside the window; default is the whole window.
    #[serde(default)]
    pub point_indices: Option<Vec<usize>>,
    /// Order M; larger selections are subsampled evenly.
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default)]
    pub force: bool,
}

fn parse_window_id(id: &str) -> Option<(usize, usize, usize)> {
    let rest = id.strip_prefix('w')?;
    let mut it = rest.split('-').map(|p| p.parse::<usize>().ok());
    let (r, a, b) = (it.next()??, it.next()??, it.next()??);
    it.next().is_none().then_some((r, a, b))
}

/// Window by id: the detected one if present, else built from the id's indices.
pub fn resolve_window(s: &Session, window_id: &str) -> Result<StableWindow> {
    for w in s.windows.iter().rev() {
        if let Some(found) = w.report.windows.iter().find(|x| x.id == window_id) {
            return Ok(found.clone());
        }
    }
    let stab = s.stabilization()?;
    let (r, a, b) = parse_window_id(window_id)
        .ok_or_else(|| Error::validation("window_id", format!("unknown window {window_id:?}; expected a detected id or w<root>-<first>-<last>")))?;
    StableWindow::from_indices(&stab.data, r, a, b)
}

/// Schlessinger fit over a window.
pub fn fit(s: &Session, req: &FitRequest, cfg: &Config) -> Result<FitRecord> {
    let stab = s.stabilization()?;
    let data = &stab.data;
    let window = resolve_window(s, &req.window_id)?;
    let (first, last) = (window.point_indices[0], *window.point_indices.last().expect("window"));
    let chosen: Vec<usize> = match &req.point_indices {
        Some(idx) => {
            if idx.len() < 2 {
                return Err(Error::validation("point_indices", "need at least 2 points"));
            }
            if idx.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::validation("point_indices", "must be strictly increasing"));
            }
            if idx[0] < first || idx[idx.len() - 1] > last {
                return Err(Error::validation("point_indices", format!("must lie inside window indices {first}..={last}")));
            }
            idx.clone()
        }
        None => window.point_indices.clone(),
    };
    let order = req.order.unwrap_or(cfg.fit_order);
    if order < 2 {
        return Err(Error::validation("order", "must be at least 2"));
    }
    let point_indices: Vec<usize> = subsample_indices(chosen.len(), order).into_iter().map(|k| chosen[k]).collect();

    let (crossings, _) = detect_crossings(data);
    let lo = point_indices[0];
    let hi = *point_indices.last().expect("points");
    let hits: Vec<_> = crossings_in_range(data, &crossings, window.root_index, lo, hi, cfg.windows.guard)
        .into_iter()
        .cloned()
        .collect();
    if !hits.is_empty() && !req.force {
        return Err(Error::CrossingInWindow { alpha: hits[0].alpha_at_min_gap });
    }
    let forced = !hits.is_empty();

    let idx_text: Vec<String> = point_indices.iter().map(|k| k.to_string()).collect();
    let id = content_id("fit", &format!("{}|{}|{}|{forced}", stab.id, window.id, idx_text.join(",")));
    if let Some(f) = s.fits.iter().find(|f| f.id == id) {
        return Ok(f.clone());
    }
    let points: Vec<(f64, f64)> = point_indices.iter().map(|&k| (data.alpha_grid[k], data.curves[window.root_index][k])).collect();
    let fraction = fit_fraction(&points)?;
    let diagnostics = diagnose(&fraction, &window.points(data), window.span());
    Ok(FitRecord {
        id,
        stabilization_id: stab.id.clone(),
        window,
        point_indices,
        forced,
        crossings: hits,
        fraction,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRequest {
    pub fit_id: String,
    pub kind: TrajectoryKind,
    /// Held α (θ-trajectory) or held θ (α-trajectory).
    pub fixed_value: f64,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

/// One trajectory of the fitted fraction.
pub fn trajectory(s: &Session, req: &TrajectoryRequest, cfg: &Config) -> Result<TrajectoryRecord> {
    let f = s.fit(&req.fit_id)?;
    let grid = match (req.grid, req.kind) {
        (Some(g), _) => g,
        (None, TrajectoryKind::ThetaTrajectory) => cfg.trajectory_theta,
        (None, TrajectoryKind::AlphaTrajectory) => {
            GridSpec::new(f.window.alpha_range.0, f.window.alpha_range.1, cfg.trajectory_alpha_points)
        }
    };
    grid.validate("grid")?;
    let id = hash_json("traj", &[&f.id, &bits(req.fixed_value), &grid.to_string()], &req.kind);
    if let Some(t) = s.trajectories.iter().find(|t| t.id == id) {
        return Ok(t.clone());
    }
    let trajectory = match req.kind {
        TrajectoryKind::ThetaTrajectory => theta_trajectory(&f.fraction, req.fixed_value, &grid.points())?,
        TrajectoryKind::AlphaTrajectory => alpha_trajectory(&f.fraction, req.fixed_value, &grid.points())?,
    };
    Ok(TrajectoryRecord { id, fit_id: f.id.clone(), trajectory })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryRequest {
    pub fit_id: String,
    /// Default: the window's α range × [0, π/4].
    #[serde(default)]
    pub region: Option<SeedRegion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryOutcome {
    pub search: SearchRecord,
    pub points: Vec<StationaryRecord>,
}

/// Stationary points of the fitted fraction.
pub fn stationary(s: &Session, req: &StationaryRequest, cfg: &Config) -> Result<StationaryOutcome> {
    let f = s.fit(&req.fit_id)?;
    let region = req.region.unwrap_or(SeedRegion { alpha: f.window.alpha_range, theta: (0.0, MAX_THETA) });
    region.validate()?;
    let id = hash_json("search", &[&f.id], &(region, cfg.stationary));
    if let Some(search) = s.searches.iter().find(|x| x.id == id) {
        let points = s.search_points(&search.id).into_iter().cloned().collect();
        return Ok(StationaryOutcome { search: search.clone(), points });
    }
    let found = find_stationary(&f.fraction, &region, &f.window.id, &cfg.stationary)?;
    let points: Vec<StationaryRecord> = found
        .points
        .into_iter()
        .map(|mut p| {
            p.id = content_id("sp", &format!("{id}|{}", p.id));
            StationaryRecord { search_id: id.clone(), fit_id: f.id.clone(), point: p }
        })
        .collect();
    let search = SearchRecord {
        id,
        fit_id: f.id.clone(),
        region,
        point_ids: points.iter().map(|p| p.point.id.clone()).collect(),
        landscape: found.landscape,
    };
    Ok(StationaryOutcome { search, points })
}

/// Complex-scaling check of one Padé stationary point, seeded at its η*.
pub fn crosscheck(s: &Session, stationary_id: &str, cfg: &Config) -> Result<CrosscheckRecord> {
    let p = &s.stationary(stationary_id)?.point;
    let id = hash_json("xc", &[&p.id], &cfg.ucs);
    if let Some(c) = s.crosschecks.iter().find(|c| c.id == id) {
        return Ok(c.clone());
    }
    let ham = hamiltonian(s)?;
    let ucs = ucs_stationary(&ham, p.eta_star, RootSelector::Energy(p.energy.re), &cfg.ucs)?;
    let distance = (ucs.energy - p.energy).norm();
    Ok(CrosscheckRecord { id, stationary_id: p.id.clone(), ucs, distance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LandscapeRequest {
    #[serde(default)]
    pub alpha: Option<GridSpec>,
    #[serde(default)]
    pub theta: Option<GridSpec>,
    /// Energy used to pick the tracked root at the first θ; defaults to the latest
    /// stationary point, else the flattest detected window.
    #[serde(default)]
    pub reference_energy: Option<f64>,
}

fn default_reference(s: &Session) -> Option<f64> {
    if let Some(p) = s.stationary_points.last() {
        return Some(p.point.energy.re);
    }
    let stab = s.stabilization.as_ref()?;
    let w = s.windows.last()?.report.windows.first()?;
    let mid = w.point_indices[w.len() / 2];
    Some(stab.data.curves[w.root_index][mid])
}

/// |∂E/∂θ| and |∂E/∂α| of the tracked complex-scaled eigenvalue over a grid.
pub fn landscape(s: &Session, req: &LandscapeRequest, cfg: &Config) -> Result<LandscapeRecord> {
    let ag = req.alpha.unwrap_or(cfg.landscape_alpha);
    let tg = req.theta.unwrap_or(cfg.landscape_theta);
    ag.validate("alpha")?;
    tg.validate("theta")?;
    let reference_energy = req
        .reference_energy
        .or_else(|| default_reference(s))
        .ok_or_else(|| Error::validation("reference_energy", "required when the session has no windows or stationary points"))?;
    let id = content_id(
        "land",
        &format!("{}|{ag}|{tg}|{}|{}", serde_json::to_string(&s.source).expect("source"), bits(reference_energy), bits(cfg.ucs.fd_step)),
    );
    if let Some(l) = s.landscapes.iter().find(|l| l.id == id) {
        return Ok(l.clone());
    }
    let ham = hamiltonian(s)?;
    let landscape = derivative_landscape(&ham, &ag.points(), &tg.points(), reference_energy, cfg.ucs.fd_step)?;
    Ok(LandscapeRecord { id, session_id: s.id.clone(), reference_energy, landscape })
}

/// Radii (relative to α) and angles of the Puiseux sampling circles.
const BP_RADII: [f64; 4] = [1e-7, 1e-6, 1e-5, 1e-4];
const BP_ANGLES: usize = 8;
/// θ of the Newton seed off the real axis.
const BP_SEED_THETA: f64 = 1e-3;

/// Branch point behind detected crossing `index` of the latest window report.
pub fn branch_point(s: &Session, index: usize) -> Result<BranchPointRecord> {
    let w = s.windows.last().ok_or_else(|| Error::NotFound("window report (run windows first)".into()))?;
    let crossing = w
        .report
        .crossings
        .get(index)
        .cloned()
        .ok_or_else(|| Error::validation("crossing", format!("no crossing {index}; {} detected", w.report.crossings.len())))?;
    let id = content_id("bp", &format!("{}|{index}", w.id));
    if let Some(b) = s.branch_points.iter().find(|b| b.id == id) {
        return Ok(b.clone());
    }
    let data = &s.stabilization()?.data;
    let k = (0..data.alpha_grid.len())
        .min_by(|&a, &b| {
            (data.alpha_grid[a] - crossing.alpha_at_min_gap).abs().total_cmp(&(data.alpha_grid[b] - crossing.alpha_at_min_gap).abs())
        })
        .expect("grid");
    let (ra, rb) = crossing.root_pair;
    let guess = 0.5 * (data.curves[ra][k] + data.curves[rb][k]);
    let ham = hamiltonian(s)?;
    let (eta_bp, e_bp) =
        match locate_branch_point(&ham, C64::from_polar(crossing.alpha_at_min_gap, BP_SEED_THETA), C64::new(guess, 0.0)) {
            Ok(found) => found,
            Err(Error::NonConvergence { .. }) if crossing.sign_change => {
                return Err(Error::validation(
                    "crossing",
                    format!(
                        "curves {}-{} cross at alpha = {} without a resolved gap and Newton drifts to the real axis; \
                         an exact crossing of decoupled states has no branch point",
                        ra, rb, crossing.alpha_at_min_gap
                    ),
                ))
            }
            Err(e) => return Err(e),
        };
    let radii: Vec<f64> = BP_RADII.iter().map(|r| r * eta_bp.norm()).collect();
    let angles: Vec<f64> = (0..BP_ANGLES).map(|j| 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / BP_ANGLES as f64).collect();
    let samples = branch_point_samples(&ham, eta_bp, e_bp, &radii, &angles)?;
    let estimate = puiseux_fit(&samples)?;
    let exponent = gap_exponent(&samples, eta_bp);
    Ok(BranchPointRecord { id, windows_id: w.id.clone(), crossing, estimate, gap_exponent: exponent })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ResonanceRequest {
    /// Default: the flattest detected window whose energy lies above the model threshold.
    #[serde(default)]
    pub window_id: Option<String>,
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default)]
    pub force: bool,
    #[serde(default)]
    pub region: Option<SeedRegion>,
}

/// Default window: flattest one above the continuum threshold (when the model has one).
pub fn default_window(s: &Session, w: &WindowsRecord) -> Result<String> {
    let data = &s.stabilization()?.data;
    let threshold = match &s.source {
        Source::Model { model, .. } => model.threshold(),
        Source::Import { .. } => None,
    };
    w.report
        .windows
        .iter()
        .find(|win| {
            let mid = win.point_indices[win.len() / 2];
            threshold.is_none_or(|t| data.curves[win.root_index][mid] > t)
        })
        .map(|win| win.id.clone())
        .ok_or_else(|| {
            Error::validation(
                "window",
                w.report.diagnostic.clone().unwrap_or_else(|| "no detected window above the threshold; pass a window id".into()),
            )
        })
}

/// Windows → fit → stationary, appending every record to the session.
pub fn resonance(s: &mut Session, req: &ResonanceRequest, cfg: &Config) -> Result<StationaryOutcome> {
    let w = windows(s, cfg)?;
    s.add_windows(w.clone())?;
    let window_id = match &req.window_id {
        Some(id) => id.clone(),
        None => default_window(s, &w)?,
    };
    let f = fit(s, &FitRequest { window_id, point_indices: None, order: req.order, force: req.force }, cfg)?;
    let fit_id = f.id.clone();
    s.add_fit(f)?;
    let out = stationary(s, &StationaryRequest { fit_id, region: req.region }, cfg)?;
    s.add_stationary(out.clone())?;
    Ok(out)
}

/// Text report of a stationary search.
pub fn render_stationary(out: &StationaryOutcome) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "search {} (fit {})", out.search.id, out.search.fit_id);
    if out.points.is_empty() {
        let _ = writeln!(t, "no stationary point passed the filters");
        if let Some((a, th, v)) = out.search.landscape.as_ref().and_then(|l| l.minimum()) {
            let _ = writeln!(t, "smallest |dC/deta| = {} at alpha = {}, theta = {}", fmt_f64(v), fmt_f64(a), fmt_f64(th));
        }
    }
    for r in &out.points {
        let p = &r.point;
        let _ = writeln!(t, "stationary point {} (window {})", p.id, p.window_id);
        let _ = writeln!(t, "  E_r        = {}", fmt_f64(p.energy.re));
        let _ = writeln!(t, "  Im E       = {}", fmt_f64(p.energy.im));
        let _ = writeln!(t, "  Gamma      = {}", fmt_f64(p.width));
        let _ = writeln!(t, "  alpha*     = {}", fmt_f64(p.eta_star.alpha));
        let _ = writeln!(t, "  theta*     = {}", fmt_f64(p.eta_star.theta));
        let _ = writeln!(t, "  |dC/deta|  = {}", fmt_f64(p.derivative_norm));
        let _ = writeln!(t, "  pade_error = {}", fmt_f64(p.pade_error));
    }
    t
}

impl Session {
    pub fn add_stabilization(&mut self, r: StabilizationRecord) -> Result<()> {
        match &self.stabilization {
            Some(existing) if existing.id == r.id => Ok(()),
            Some(_) => Err(Error::validation("stabilization", "session already holds different stabilization data")),
            None => {
                self.stabilization = Some(r);
                Ok(())
            }
        }
    }

    pub fn add_windows(&mut self, r: WindowsRecord) -> Result<()> {
        if self.stabilization.as_ref().map(|s| &s.id) != Some(&r.stabilization_id) {
            return Err(Error::NotFound(format!("stabilization {}", r.stabilization_id)));
        }
        if !self.windows.iter().any(|w| w.id == r.id) {
            self.windows.push(r);
        }
        Ok(())
    }

    pub fn add_fit(&mut self, r: FitRecord) -> Result<()> {
        if self.stabilization.as_ref().map(|s| &s.id) != Some(&r.stabilization_id) {
            return Err(Error::NotFound(format!("stabilization {}", r.stabilization_id)));
        }
        if !self.fits.iter().any(|f| f.id == r.id) {
            self.fits.push(r);
        }
        Ok(())
    }

    pub fn add_trajectory(&mut self, r: TrajectoryRecord) -> Result<()> {
        self.fit(&r.fit_id)?;
        if !self.trajectories.iter().any(|t| t.id == r.id) {
            self.trajectories.push(r);
        }
        Ok(())
    }

    pub fn add_stationary(&mut self, out: StationaryOutcome) -> Result<()> {
        self.fit(&out.search.fit_id)?;
        if !self.searches.iter().any(|x| x.id == out.search.id) {
            self.searches.push(out.search);
            self.stationary_points.extend(out.points);
        }
        Ok(())
    }

    pub fn add_crosscheck(&mut self, r: CrosscheckRecord) -> Result<()> {
        self.stationary(&r.stationary_id)?;
        if !self.crosschecks.iter().any(|c| c.id == r.id) {
            self.crosschecks.push(r);
        }
        Ok(())
    }

    pub fn add_landscape(&mut self, r: LandscapeRecord) -> Result<()> {
        if !self.landscapes.iter().any(|l| l.id == r.id) {
            self.landscapes.push(r);
        }
        Ok(())
    }

    pub fn add_branch_point(&mut self, r: BranchPointRecord) -> Result<()> {
        if !self.branch_points.iter().any(|b| b.id == r.id) {
            self.branch_points.push(r);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_ids_parse() {
        assert_eq!(parse_window_id("w1-45-64"), Some((1, 45, 64)));
        assert_eq!(parse_window_id("w1-45"), None);
        assert_eq!(parse_window_id("x1-2-3"), None);
        assert_eq!(parse_window_id("w1-2-3-4"), None);
    }
}
