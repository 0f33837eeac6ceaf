//! Schlessinger point method: a truncated continued fraction
//!
//! C_M(η) = E₁ / (1 + z₁(η−α₁) / (1 + z₂(η−α₂) / ( ... / (1 + z_{M−1}(η−α_{M−1})))))
//!
//! interpolating M real points, evaluated anywhere in the complex η plane.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative size of a Möbius-solve denominator below which the solve is treated as a breakdown.
pub const BREAKDOWN_TOL: f64 = 1e-14;
/// Intermediate denominators below this magnitude mark a pole.
pub const POLE_TOL: f64 = 1e-30;
/// Stand-in for an unbounded error or residual (keeps JSON output numeric).
pub const UNBOUNDED: f64 = f64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    /// z₁..z_{M−1}.
    pub coefficients: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PadeValue {
    pub value: C64,
    pub derivative: C64,
    pub pade_error: f64,
}

/// Result of evaluating a fraction: a value or a pole marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PadeEval {
    Value(PadeValue),
    Pole,
}

impl PadeEval {
    pub fn value(self) -> Option<PadeValue> {
        match self {
            PadeEval::Value(v) => Some(v),
            PadeEval::Pole => None,
        }
    }
}

/// Value with first and second η-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: C64,
    pub d1: C64,
    pub d2: C64,
}

enum Solve {
    Done(Vec<C64>),
    Breakdown(usize),
}

fn solve_coefficients(xs: &[f64], ys: &[f64]) -> Solve {
    let m = xs.len();
    let zero = C64::new(0.0, 0.0);
    if ys.iter().all(|&y| y == 0.0) {
        return Solve::Done(vec![zero; m - 1]);
    }
    if ys[0] == 0.0 {
        return Solve::Breakdown(0);
    }
    let e1 = ys[0];
    let mut z: Vec<C64> = Vec::with_capacity(m - 1);
    'points: for j in 1..m {
        if ys[j] == 0.0 {
            return Solve::Breakdown(j);
        }
        let mut d = C64::new(e1 / ys[j], 0.0);
        for k in 0..j - 1 {
            let dm1 = d - 1.0;
            let small = dm1.norm() < BREAKDOWN_TOL * d.norm().max(1.0);
            if z[k] == zero {
                if small {
                    // Terminated fraction already interpolates this point.
                    z.push(zero);
                    continue 'points;
                }
                return Solve::Breakdown(j);
            }
            if small {
                return Solve::Breakdown(j);
            }
            d = z[k] * (xs[j] - xs[k]) / dm1;
        }
        let dm1 = d - 1.0;
        if dm1.norm() < BREAKDOWN_TOL * d.norm().max(1.0) {
            z.push(zero);
        } else {
            z.push(dm1 / (xs[j] - xs[j - 1]));
        }
        if !(z[j - 1].re.is_finite() && z[j - 1].im.is_finite()) {
            return Solve::Breakdown(j);
        }
    }
    Solve::Done(z)
}

/// Fits the fraction through `points`, taken in the given order.
pub fn fit(points: &[(f64, f64)]) -> Result<ContinuedFraction> {
    if points.len() < 2 {
        return Err(Error::validation("points", "need at least 2 points"));
    }
    if points.iter().any(|(a, e)| !(a.is_finite() && e.is_finite())) {
        return Err(Error::validation("points", "must be finite"));
    }
    let mut sorted: Vec<f64> = points.iter().map(|p| p.0).collect();
    sorted.sort_by(f64::total_cmp);
    let span = sorted[sorted.len() - 1] - sorted[0];
    if sorted.windows(2).any(|w| w[1] - w[0] <= 1e-12 * span) || span == 0.0 {
        return Err(Error::validation("abscissae", "duplicate abscissae"));
    }
    // On breakdown, move the offending point last; if that fails too, start from another point
    // (equal values at two abscissae break the first level whatever comes after).
    let m = points.len();
    let mut last_bad = 0.0;
    for start in 0..m {
        let mut xs: Vec<f64> = (0..m).map(|i| points[(start + i) % m].0).collect();
        let mut ys: Vec<f64> = (0..m).map(|i| points[(start + i) % m].1).collect();
        match solve_coefficients(&xs, &ys) {
            Solve::Done(z) => return Ok(ContinuedFraction { abscissae: xs, values: ys, coefficients: z }),
            Solve::Breakdown(j) => {
                let x = xs.remove(j);
                let y = ys.remove(j);
                xs.push(x);
                ys.push(y);
            }
        }
        match solve_coefficients(&xs, &ys) {
            Solve::Done(z) => return Ok(ContinuedFraction { abscissae: xs, values: ys, coefficients: z }),
            Solve::Breakdown(j) => last_bad = xs[j],
        }
    }
    Err(Error::DegenerateData { alpha: last_bad })
}

impl ContinuedFraction {
    /// Number of interpolation points M.
    pub fn m(&self) -> usize {
        self.abscissae.len()
    }

    /// Value and two derivatives using the first `depth` coefficients; `None` at a pole.
    pub fn jet_truncated(&self, eta: C64, depth: usize) -> Option<Jet> {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        // D_i = 1 + z_i (η − α_i) / D_{i+1}, bottom-up.
        let (mut d, mut d1, mut d2) = (one, zero, zero);
        for i in (0..depth).rev() {
            if d.norm() < POLE_TOL {
                return None;
            }
            let z = self.coefficients[i];
            let num = z * (eta - self.abscissae[i]);
            let inv = d.inv();
            let inv2 = inv * inv;
            let nd = one + num * inv;
            let nd1 = z * inv - num * d1 * inv2;
            let nd2 = -2.0 * z * d1 * inv2 - num * (d2 * inv2 - 2.0 * d1 * d1 * inv2 * inv);
            d = nd;
            d1 = nd1;
            d2 = nd2;
        }
        if d.norm() < POLE_TOL {
            return None;
        }
        let e1 = self.values[0];
        let inv = d.inv();
        let inv2 = inv * inv;
        let value = e1 * inv;
        let first = -e1 * d1 * inv2;
        let second = -e1 * (d2 * inv2 - 2.0 * d1 * d1 * inv2 * inv);
        if !(value.re.is_finite() && value.im.is_finite()) {
            return None;
        }
        Some(Jet { value, d1: first, d2: second })
    }

    pub fn jet(&self, eta: C64) -> Option<Jet> {
        self.jet_truncated(eta, self.coefficients.len())
    }

    /// Value with all coefficients but the last (C_{M−1}).
    pub fn lower_order_value(&self, eta: C64) -> Option<C64> {
        let depth = self.coefficients.len().saturating_sub(1);
        self.jet_truncated(eta, depth).map(|j| j.value)
    }

    /// Maximum interpolation residual over the fit abscissae.
    pub fn interpolation_residual(&self) -> f64 {
        self.abscissae
            .iter()
            .zip(&self.values)
            .map(|(&a, &e)| match self.jet(C64::new(a, 0.0)) {
                Some(j) => (j.value - e).norm(),
                None => UNBOUNDED,
            })
            .fold(0.0, f64::max)
    }
}

pub fn evaluate(cf: &ContinuedFraction, eta: C64) -> PadeEval {
    let Some(jet) = cf.jet(eta) else {
        return PadeEval::Pole;
    };
    let pade_error = match cf.lower_order_value(eta) {
        Some(lower) => (jet.value - lower).norm(),
        None => UNBOUNDED,
    };
    PadeEval::Value(PadeValue { value: jet.value, derivative: jet.d1, pade_error })
}

/// Evenly spaced selection of `order` indices out of `n`, ascending.
pub fn subsample_indices(n: usize, order: usize) -> Vec<usize> {
    if order >= n {
        return (0..n).collect();
    }
    if order <= 1 {
        return vec![0];
    }
    let mut out: Vec<usize> = (0..order)
        .map(|k| ((k as f64) * (n - 1) as f64 / (order - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticWarning {
    /// Consecutive abscissae closer than 10⁻³ of the window span.
    DenseAbscissae { min_spacing: f64, window_span: f64 },
    /// Leave-one-out residual more than 10³× the interpolation residual.
    LeaveOneOut { residual: f64, reference: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub interpolation_residual: f64,
    /// (α, |C(α) − E|) at window points not used by the fit.
    pub offsample_residuals: Vec<(f64, f64)>,
    pub leave_one_out_residual: f64,
    pub coefficient_max: f64,
    /// Geometric mean growth factor |z_{k+1}|/|z_k| across the fraction.
    pub coefficient_growth: f64,
    pub warnings: Vec<DiagnosticWarning>,
}

/// Fit diagnostics against all points of the source window.
pub fn diagnose(cf: &ContinuedFraction, window_points: &[(f64, f64)], window_span: f64) -> FitDiagnostics {
    let interpolation_residual = cf.interpolation_residual();
    let max_e = cf.values.iter().fold(0.0f64, |a, &e| a.max(e.abs()));
    let offsample_residuals = window_points
        .iter()
        .filter(|(a, _)| !cf.abscissae.contains(a))
        .map(|&(a, e)| {
            let r = cf.jet(C64::new(a, 0.0)).map_or(UNBOUNDED, |j| (j.value - e).norm());
            (a, r)
        })
        .collect();

    let mut leave_one_out_residual: f64 = 0.0;
    let m = cf.m();
    if m >= 3 {
        for i in 0..m {
            let pts: Vec<(f64, f64)> = (0..m)
                .filter(|&k| k != i)
                .map(|k| (cf.abscissae[k], cf.values[k]))
                .collect();
            let r = match fit(&pts) {
                Ok(sub) => sub
                    .jet(C64::new(cf.abscissae[i], 0.0))
                    .map_or(UNBOUNDED, |j| (j.value - cf.values[i]).norm()),
                Err(_) => UNBOUNDED,
            };
            leave_one_out_residual = leave_one_out_residual.max(r);
        }
    }

    let mags: Vec<f64> = cf.coefficients.iter().map(|z| z.norm()).collect();
    let coefficient_max = mags.iter().copied().fold(0.0, f64::max);
    let coefficient_growth = match (mags.first(), mags.last()) {
        (Some(&a), Some(&b)) if mags.len() > 1 && a > 0.0 && b > 0.0 => (b / a).powf(1.0 / (mags.len() - 1) as f64),
        _ => 0.0,
    };

    let mut warnings = Vec::new();
    let mut sorted = cf.abscissae.clone();
    sorted.sort_by(f64::total_cmp);
    let min_spacing = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if min_spacing < 1e-3 * window_span {
        warnings.push(DiagnosticWarning::DenseAbscissae { min_spacing, window_span });
    }
    let reference = interpolation_residual.max(1e-10 * max_e);
    if leave_one_out_residual > 1e3 * reference {
        warnings.push(DiagnosticWarning::LeaveOneOut { residual: leave_one_out_residual, reference });
    }
    FitDiagnostics {
        interpolation_residual,
        offsample_residuals,
        leave_one_out_residual,
        coefficient_max,
        coefficient_growth,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_points_give_zero_coefficients() {
        let cf = fit(&[(1.0, 0.7), (2.0, 0.7), (3.0, 0.7)]).unwrap();
        assert!(cf.coefficients.iter().all(|z| *z == C64::new(0.0, 0.0)));
        let v = evaluate(&cf, C64::new(0.3, 0.2)).value().unwrap();
        assert_eq!(v.value, C64::new(0.7, 0.0));
        assert_eq!(v.derivative, C64::new(0.0, 0.0));
        assert_eq!(v.pade_error, 0.0);
    }

    #[test]
    fn two_point_fraction_is_inverse() {
        let cf = fit(&[(1.0, 1.0), (2.0, 0.5)]).unwrap();
        assert_eq!(cf.coefficients, vec![C64::new(1.0, 0.0)]);
        let v = evaluate(&cf, C64::new(0.0, 2.0)).value().unwrap();
        assert!((v.value - C64::new(0.0, -0.5)).norm() < 1e-15);
        let v1 = evaluate(&cf, C64::new(1.0, 0.0)).value().unwrap();
        assert!((v1.value - 1.0).norm() < 1e-15);
        assert!((v1.derivative + 1.0).norm() < 1e-15);
    }

    #[test]
    fn pole_is_reported() {
        let cf = fit(&[(1.0, 1.0), (2.0, 0.5)]).unwrap();
        assert_eq!(evaluate(&cf, C64::new(0.0, 0.0)), PadeEval::Pole);
    }

    #[test]
    fn duplicates_are_rejected() {
        assert!(matches!(fit(&[(1.0, 1.0), (1.0, 2.0), (2.0, 3.0)]), Err(Error::Validation { .. })));
    }

    #[test]
    fn second_derivative_matches_differences() {
        let pts: Vec<(f64, f64)> = (0..7).map(|k| {
            let a = 1.0 + k as f64 / 6.0;
            (a, (a * a + 2.0) / (a * a * a + a + 5.0))
        }).collect();
        let cf = fit(&pts).unwrap();
        let eta = C64::new(1.3, 0.2);
        let h = 1e-4;
        let j = cf.jet(eta).unwrap();
        let jp = cf.jet(eta + h).unwrap();
        let jm = cf.jet(eta - h).unwrap();
        let fd = (jp.d1 - jm.d1) / (2.0 * h);
        assert!((fd - j.d2).norm() < 1e-7 * j.d2.norm().max(1.0));
    }

    #[test]
    fn subsample_is_even_and_ascending() {
        assert_eq!(subsample_indices(5, 10), vec![0, 1, 2, 3, 4]);
        assert_eq!(subsample_indices(9, 3), vec![0, 4, 8]);
        let s = subsample_indices(40, 25);
        assert_eq!(s.len(), 25);
        assert_eq!((s[0], s[24]), (0, 39));
    }
}
