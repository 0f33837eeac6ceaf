//! Tunable defaults, `key = value` config files and `start:stop:count` grids.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::continuation::{SearchStrategy, StationaryOptions, WidthConvention};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::stabilization::{SweepOptions, WindowOptions};
use crate::ucs::UcsOptions;

/// Evenly spaced grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(start: f64, stop: f64, count: usize) -> Self {
        Self { start, stop, count }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::validation(field, "endpoints must be finite"));
        }
        if self.count < 2 {
            return Err(Error::validation(field, "count must be at least 2"));
        }
        if self.stop <= self.start {
            return Err(Error::validation(field, "stop must exceed start"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let n = self.count;
        if n == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (n - 1) as f64;
        (0..n).map(|k| if k == n - 1 { self.stop } else { self.start + h * k as f64 }).collect()
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(Error::validation("grid", format!("expected start:stop:count, got {s:?}")));
        };
        let num = |x: &str| x.parse::<f64>().map_err(|_| Error::validation("grid", format!("not a number: {x:?}")));
        let count = n.parse::<usize>().map_err(|_| Error::validation("grid", format!("count must be an integer: {n:?}")))?;
        let g = GridSpec::new(num(a)?, num(b)?, count);
        g.validate("grid")?;
        Ok(g)
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", fmt_f64(self.start), fmt_f64(self.stop), self.count)
    }
}

/// Every default the pipeline uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// α grid of a stabilization sweep when none is given.
    pub stabilize_alpha: GridSpec,
    pub sweep: SweepOptions,
    pub windows: WindowOptions,
    /// Fraction order M; windows larger than this are subsampled evenly.
    pub fit_order: usize,
    pub stationary: StationaryOptions,
    pub ucs: UcsOptions,
    /// Swept θ grid of a θ-trajectory when none is given.
    pub trajectory_theta: GridSpec,
    /// Points of an α-trajectory across the window's range when no grid is given.
    pub trajectory_alpha_points: usize,
    pub landscape_alpha: GridSpec,
    pub landscape_theta: GridSpec,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            stabilize_alpha: GridSpec::new(0.6, 1.6, 101),
            sweep: SweepOptions::default(),
            windows: WindowOptions::default(),
            fit_order: 25,
            stationary: StationaryOptions::default(),
            ucs: UcsOptions::default(),
            trajectory_theta: GridSpec::new(0.0, 0.6, 61),
            trajectory_alpha_points: 61,
            landscape_alpha: GridSpec::new(0.6, 1.6, 36),
            landscape_theta: GridSpec::new(0.0, 0.35, 20),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>().map_err(|_| Error::validation(key, format!("cannot parse {v:?}")))
}

impl Config {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "stabilize.alpha" => self.stabilize_alpha = v.parse().map_err(|e: Error| rename(e, key))?,
            "sweep.roots" => self.sweep.roots = parse_num(key, v)?,
            "windows.flatness_tol" => self.windows.flatness_tol = parse_num(key, v)?,
            "windows.min_points" => self.windows.min_points = parse_num(key, v)?,
            "windows.guard" => self.windows.guard = parse_num(key, v)?,
            "fit.order" => self.fit_order = parse_num(key, v)?,
            "stationary.seeds_alpha" => self.stationary.seeds_alpha = parse_num(key, v)?,
            "stationary.seeds_theta" => self.stationary.seeds_theta = parse_num(key, v)?,
            "stationary.derivative_tol" => self.stationary.derivative_tol = parse_num(key, v)?,
            "stationary.pade_error_tol" => self.stationary.pade_error_tol = parse_num(key, v)?,
            "stationary.dedup_tol" => self.stationary.dedup_tol = parse_num(key, v)?,
            "stationary.strategy" => {
                self.stationary.strategy = match v {
                    "newton" => SearchStrategy::Newton,
                    "alternating_scan" => SearchStrategy::AlternatingScan,
                    _ => return Err(Error::validation(key, "expected newton or alternating_scan")),
                }
            }
            "stationary.width_convention" => {
                self.stationary.width_convention = match v {
                    "minus_two_imag" => WidthConvention::MinusTwoImag,
                    "minus_imag" => WidthConvention::MinusImag,
                    _ => return Err(Error::validation(key, "expected minus_two_imag or minus_imag")),
                }
            }
            "stationary.trajectory_points" => self.stationary.trajectory_points = parse_num(key, v)?,
            "stationary.theta_half_width" => self.stationary.theta_half_width = parse_num(key, v)?,
            "stationary.alpha_half_width" => self.stationary.alpha_half_width = parse_num(key, v)?,
            "ucs.fd_step" => self.ucs.fd_step = parse_num(key, v)?,
            "ucs.max_rounds" => self.ucs.max_rounds = parse_num(key, v)?,
            "ucs.eta_tol" => self.ucs.eta_tol = parse_num(key, v)?,
            "ucs.theta_bracket" => self.ucs.theta_bracket = parse_num(key, v)?,
            "ucs.alpha_bracket" => self.ucs.alpha_bracket = parse_num(key, v)?,
            "ucs.scan_points" => self.ucs.scan_points = parse_num(key, v)?,
            "trajectory.theta" => self.trajectory_theta = v.parse().map_err(|e: Error| rename(e, key))?,
            "trajectory.alpha_points" => self.trajectory_alpha_points = parse_num(key, v)?,
            "landscape.alpha" => self.landscape_alpha = v.parse().map_err(|e: Error| rename(e, key))?,
            "landscape.theta" => self.landscape_theta = v.parse().map_err(|e: Error| rename(e, key))?,
            _ => return Err(Error::validation(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse { line: i + 1, field: "config".into(), message: format!("expected key = value, got {line:?}") });
            };
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Validation { field, message } => Error::Parse { line: i + 1, field, message },
                other => other,
            })?;
        }
        self.validate()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Config::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fit_order < 2 {
            return Err(Error::validation("fit.order", "must be at least 2"));
        }
        if self.sweep.roots == 0 {
            return Err(Error::validation("sweep.roots", "must be positive"));
        }
        if self.stationary.trajectory_points < 3 {
            return Err(Error::validation("stationary.trajectory_points", "must be at least 3"));
        }
        if !(self.ucs.fd_step > 0.0) || self.ucs.max_rounds == 0 || self.ucs.scan_points < 3 {
            return Err(Error::validation("ucs", "fd_step > 0, max_rounds >= 1 and scan_points >= 3 required"));
        }
        if self.trajectory_alpha_points < 2 {
            return Err(Error::validation("trajectory.alpha_points", "must be at least 2"));
        }
        self.stabilize_alpha.validate("stabilize.alpha")?;
        self.trajectory_theta.validate("trajectory.theta")?;
        self.landscape_alpha.validate("landscape.alpha")?;
        self.landscape_theta.validate("landscape.theta")?;
        Ok(())
    }

    /// The full configuration in the file format, one key per line.
    pub fn render(&self) -> String {
        let s = &self.stationary;
        let u = &self.ucs;
        let strategy = match s.strategy {
            SearchStrategy::Newton => "newton",
            SearchStrategy::AlternatingScan => "alternating_scan",
        };
        let width = match s.width_convention {
            WidthConvention::MinusTwoImag => "minus_two_imag",
            WidthConvention::MinusImag => "minus_imag",
        };
        let rows: Vec<(&str, String)> = vec![
            ("stabilize.alpha", self.stabilize_alpha.to_string()),
            ("sweep.roots", self.sweep.roots.to_string()),
            ("windows.flatness_tol", fmt_f64(self.windows.flatness_tol)),
            ("windows.min_points", self.windows.min_points.to_string()),
            ("windows.guard", self.windows.guard.to_string()),
            ("fit.order", self.fit_order.to_string()),
            ("stationary.seeds_alpha", s.seeds_alpha.to_string()),
            ("stationary.seeds_theta", s.seeds_theta.to_string()),
            ("stationary.derivative_tol", fmt_f64(s.derivative_tol)),
            ("stationary.pade_error_tol", fmt_f64(s.pade_error_tol)),
            ("stationary.dedup_tol", fmt_f64(s.dedup_tol)),
            ("stationary.strategy", strategy.into()),
            ("stationary.width_convention", width.into()),
            ("stationary.trajectory_points", s.trajectory_points.to_string()),
            ("stationary.theta_half_width", fmt_f64(s.theta_half_width)),
            ("stationary.alpha_half_width", fmt_f64(s.alpha_half_width)),
            ("ucs.fd_step", fmt_f64(u.fd_step)),
            ("ucs.max_rounds", u.max_rounds.to_string()),
            ("ucs.eta_tol", fmt_f64(u.eta_tol)),
            ("ucs.theta_bracket", fmt_f64(u.theta_bracket)),
            ("ucs.alpha_bracket", fmt_f64(u.alpha_bracket)),
            ("ucs.scan_points", u.scan_points.to_string()),
            ("trajectory.theta", self.trajectory_theta.to_string()),
            ("trajectory.alpha_points", self.trajectory_alpha_points.to_string()),
            ("landscape.alpha", self.landscape_alpha.to_string()),
            ("landscape.theta", self.landscape_theta.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn rename(e: Error, key: &str) -> Error {
    match e {
        Error::Validation { message, .. } => Error::validation(key, message),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_syntax() {
        let g: GridSpec = "0.6:1.6:101".parse().unwrap();
        let p = g.points();
        assert_eq!(p.len(), 101);
        assert_eq!(p[0], 0.6);
        assert_eq!(p[100], 1.6);
        assert!(("1:0:5".parse::<GridSpec>()).is_err());
        assert!(("1:2".parse::<GridSpec>()).is_err());
    }

    #[test]
    fn rendered_defaults_parse_back() {
        let c = Config::default();
        assert_eq!(Config::from_text(&c.render()).unwrap(), c);
    }

    #[test]
    fn unknown_key_names_the_line() {
        let e = Config::from_text("fit.order = 20\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
    }
}
