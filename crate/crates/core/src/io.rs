//! Text formats: stabilization CSV/JSON import and export, trajectory and landscape CSV.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::continuation::Trajectory;
use crate::error::{Error, Result};
use crate::stabilization::{DataSource, StabilizationData};
use crate::ucs::{Landscape, UcsTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    ModelUnits,
    Hartree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportFormat {
    Csv,
    Json,
}

impl ImportFormat {
    /// Guess from the file extension; CSV unless it ends in `.json`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ImportFormat::Json,
            _ => ImportFormat::Csv,
        }
    }
}

/// Parsed stabilization file: the data plus any `#` comment lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imported {
    pub data: StabilizationData,
    pub annotations: Vec<String>,
    pub units: Units,
}

/// Shortest round-trip decimal.
pub fn fmt_f64(x: f64) -> String {
    ryu::Buffer::new().format(x).to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Pretty JSON with a trailing newline; the one serializer used for every JSON output.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn import_stabilization(path: &Path, format: ImportFormat) -> Result<Imported> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    match format {
        ImportFormat::Csv => parse_csv(&text),
        ImportFormat::Json => parse_json(&text),
    }
}

fn units_from(annotations: &[String]) -> Units {
    for a in annotations {
        if let Some((k, v)) = a.split_once(':') {
            if k.trim().eq_ignore_ascii_case("units") && v.trim().eq_ignore_ascii_case("hartree") {
                return Units::Hartree;
            }
        }
    }
    Units::ModelUnits
}

fn parse_field(s: &str, line: usize, field: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        line,
        field: field.into(),
        message: format!("not a number: {:?}", s.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, field: field.into(), message: "must be finite".into() });
    }
    Ok(v)
}

/// Stabilization CSV: `alpha,root,energy` (or `alpha,energy` without root labels).
pub fn parse_csv(text: &str) -> Result<Imported> {
    let mut annotations = Vec::new();
    let mut header: Option<(usize, bool)> = None;
    let mut rows: Vec<(usize, f64, Option<usize>, f64)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(c) = t.strip_prefix('#') {
            annotations.push(c.trim().to_string());
            continue;
        }
        let cols: Vec<&str> = t.split(',').map(str::trim).collect();
        let Some((_, labelled)) = header else {
            let labelled = match cols.as_slice() {
                ["alpha", "root", "energy"] => true,
                ["alpha", "energy"] => false,
                _ => {
                    return Err(Error::Parse {
                        line,
                        field: "header".into(),
                        message: format!("expected `alpha,root,energy`, found {t:?}"),
                    })
                }
            };
            header = Some((line, labelled));
            continue;
        };
        let want = if labelled { 3 } else { 2 };
        if cols.len() != want {
            return Err(Error::Parse { line, field: "row".into(), message: format!("expected {want} fields, found {}", cols.len()) });
        }
        let alpha = parse_field(cols[0], line, "alpha")?;
        let (root, energy) = if labelled {
            let r = cols[1].parse::<usize>().map_err(|_| Error::Parse {
                line,
                field: "root".into(),
                message: format!("not a root index: {:?}", cols[1]),
            })?;
            (Some(r), parse_field(cols[2], line, "energy")?)
        } else {
            (None, parse_field(cols[1], line, "energy")?)
        };
        rows.push((line, alpha, root, energy));
    }
    let Some((hline, labelled)) = header else {
        return Err(Error::Parse { line: text.lines().count().max(1), field: "header".into(), message: "missing header".into() });
    };
    if rows.is_empty() {
        return Err(Error::Parse { line: hline, field: "row".into(), message: "no data rows".into() });
    }
    let data = if labelled { labelled_data(&rows)? } else { unlabelled_data(&rows)? };
    data.validate()?;
    let units = units_from(&annotations);
    Ok(Imported { data, annotations, units })
}

fn labelled_data(rows: &[(usize, f64, Option<usize>, f64)]) -> Result<StabilizationData> {
    let nroots = rows.iter().filter_map(|r| r.2).max().unwrap_or(0) + 1;
    let mut per_root: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); nroots];
    for &(line, a, r, e) in rows {
        per_root[r.unwrap_or(0)].push((line, a, e));
    }
    for (r, pts) in per_root.iter().enumerate() {
        if pts.is_empty() {
            return Err(Error::validation("root", format!("root {r} has no rows")));
        }
        if let Some(w) = pts.windows(2).find(|w| w[1].1 <= w[0].1) {
            return Err(Error::validation("alpha_grid", format!("alpha not increasing for root {r} at line {}", w[1].0)));
        }
    }
    let grid: Vec<f64> = per_root[0].iter().map(|p| p.1).collect();
    for (r, pts) in per_root.iter().enumerate() {
        if pts.len() != grid.len() || pts.iter().zip(&grid).any(|(p, g)| p.1 != *g) {
            return Err(Error::validation("curves", format!("root {r} is not sampled on the same alpha grid as root 0")));
        }
    }
    let n = grid.len();
    Ok(StabilizationData {
        alpha_grid: grid,
        curves: per_root.into_iter().map(|p| p.into_iter().map(|x| x.2).collect()).collect(),
        tracking_quality: vec![1.0; n.saturating_sub(1)],
        source: DataSource::Imported,
        nearest_energy_tracking: false,
    })
}

fn unlabelled_data(rows: &[(usize, f64, Option<usize>, f64)]) -> Result<StabilizationData> {
    // Group consecutive rows sharing one alpha.
    let mut grid: Vec<f64> = Vec::new();
    let mut levels: Vec<Vec<f64>> = Vec::new();
    for &(line, a, _, e) in rows {
        match grid.last() {
            Some(&last) if a == last => levels.last_mut().expect("group").push(e),
            Some(&last) if a < last => {
                return Err(Error::validation("alpha_grid", format!("alpha decreases at line {line}")));
            }
            _ => {
                grid.push(a);
                levels.push(vec![e]);
            }
        }
    }
    let nroots = levels[0].len();
    if let Some(k) = levels.iter().position(|l| l.len() != nroots) {
        return Err(Error::validation("curves", format!("alpha {} has {} energies, expected {nroots}", grid[k], levels[k].len())));
    }
    let n = grid.len();
    Ok(StabilizationData {
        alpha_grid: grid,
        curves: nearest_energy_curves(&levels),
        tracking_quality: vec![1.0; n.saturating_sub(1)],
        source: DataSource::Imported,
        nearest_energy_tracking: true,
    })
}

/// Follows each level to the closest unused level at the next grid point, closest pairs first.
pub fn nearest_energy_curves(levels: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let nroots = levels[0].len();
    let mut first = levels[0].clone();
    first.sort_by(f64::total_cmp);
    let mut curves: Vec<Vec<f64>> = first.into_iter().map(|e| vec![e]).collect();
    for next in &levels[1..] {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(nroots * nroots);
        for (r, c) in curves.iter().enumerate() {
            let last = *c.last().expect("non-empty");
            for (j, &e) in next.iter().enumerate() {
                pairs.push(((e - last).abs(), r, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_r = vec![false; nroots];
        let mut used_j = vec![false; nroots];
        let mut pick = vec![0usize; nroots];
        for (_, r, j) in pairs {
            if !used_r[r] && !used_j[j] {
                used_r[r] = true;
                used_j[j] = true;
                pick[r] = j;
            }
        }
        for (r, c) in curves.iter_mut().enumerate() {
            c.push(next[pick[r]]);
        }
    }
    curves
}

#[derive(Deserialize)]
struct JsonStabilization {
    alpha_grid: Vec<f64>,
    curves: Vec<Vec<f64>>,
    #[serde(default)]
    tracking_quality: Option<Vec<f64>>,
    #[serde(default)]
    annotations: Vec<String>,
    #[serde(default)]
    units: Option<Units>,
}

/// JSON with the StabilizationData field names; `tracking_quality` optional.
pub fn parse_json(text: &str) -> Result<Imported> {
    let j: JsonStabilization = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        field: "json".into(),
        message: e.to_string(),
    })?;
    let n = j.alpha_grid.len();
    let data = StabilizationData {
        alpha_grid: j.alpha_grid,
        curves: j.curves,
        tracking_quality: j.tracking_quality.unwrap_or_else(|| vec![1.0; n.saturating_sub(1)]),
        source: DataSource::Imported,
        nearest_energy_tracking: false,
    };
    data.validate()?;
    let units = j.units.unwrap_or_else(|| units_from(&j.annotations));
    Ok(Imported { data, annotations: j.annotations, units })
}

/// Stabilization CSV, one row per (α, root), α outer.
pub fn stabilization_csv(data: &StabilizationData, annotations: &[String]) -> String {
    let mut out = String::new();
    for a in annotations {
        let _ = writeln!(out, "# {a}");
    }
    out.push_str("alpha,root,energy\n");
    for (k, &a) in data.alpha_grid.iter().enumerate() {
        for (r, c) in data.curves.iter().enumerate() {
            let _ = writeln!(out, "{},{r},{}", fmt_f64(a), fmt_f64(c[k]));
        }
    }
    out
}

pub fn stabilization_json(data: &StabilizationData) -> String {
    to_json(data)
}

/// `theta,alpha,re_e,im_e,pade_error` for a Padé trajectory.
pub fn trajectory_csv(t: &Trajectory) -> String {
    let mut out = String::from("theta,alpha,re_e,im_e,pade_error\n");
    for (k, e) in t.energies.iter().enumerate() {
        let (a, th) = match t.kind {
            crate::continuation::TrajectoryKind::ThetaTrajectory => (t.fixed_value, t.grid[k]),
            crate::continuation::TrajectoryKind::AlphaTrajectory => (t.grid[k], t.fixed_value),
        };
        let _ = writeln!(out, "{},{},{},{},{}", fmt_f64(th), fmt_f64(a), fmt_f64(e.re), fmt_f64(e.im), fmt_f64(t.pade_errors[k]));
    }
    out
}

/// The same columns for a complex-scaling θ sweep; `pade_error` is left empty.
pub fn ucs_trajectory_csv(t: &UcsTrajectory) -> String {
    let mut out = String::from("theta,alpha,re_e,im_e,pade_error\n");
    for (th, e) in t.theta_grid.iter().zip(&t.tracked_energy) {
        let _ = writeln!(out, "{},{},{},{},", fmt_f64(*th), fmt_f64(t.alpha), fmt_f64(e.re), fmt_f64(e.im));
    }
    out
}

/// `alpha,theta,d_theta,d_alpha`, α outer; tracking gaps are empty fields.
pub fn landscape_csv(l: &Landscape) -> String {
    let mut out = String::from("alpha,theta,d_theta,d_alpha\n");
    let nt = l.theta_grid.len();
    for (ia, &a) in l.alpha_grid.iter().enumerate() {
        for (it, &t) in l.theta_grid.iter().enumerate() {
            let i = ia * nt + it;
            let _ = writeln!(out, "{},{},{},{}", fmt_f64(a), fmt_f64(t), opt(l.d_theta[i]), opt(l.d_alpha[i]));
        }
    }
    out
}

/// Writes text atomically (temp file + rename) so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, contents).map_err(|e| Error::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0, -2.5e-300, 1.4209709511378585, f64::MAX, 5e-324] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn unlabelled_rows_follow_nearest_energy() {
        let csv = "alpha,energy\n1,0.5\n1,0.1\n2,0.12\n2,0.45\n3,0.13\n3,0.4\n";
        let imp = parse_csv(csv).unwrap();
        assert!(imp.data.nearest_energy_tracking);
        assert_eq!(imp.data.curves, vec![vec![0.1, 0.12, 0.13], vec![0.5, 0.45, 0.4]]);
    }

    #[test]
    fn bad_field_reports_line() {
        let err = parse_csv("# note\nalpha,root,energy\n1,0,0.5\n2,0,x\n").unwrap_err();
        assert_eq!(err, Error::Parse { line: 4, field: "energy".into(), message: "not a number: \"x\"".into() });
    }

    #[test]
    fn decreasing_unlabelled_grid_is_rejected() {
        let err = parse_csv("alpha,energy\n2,0.5\n1,0.4\n").unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "alpha_grid"), "{err}");
    }
}
