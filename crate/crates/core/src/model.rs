//! One-dimensional model Hamiltonians under the dilation x -> ηx.
//!
//! Matrices follow the scale-the-operator convention: H(η) = η⁻² T + V(η), with the
//! basis fixed and S independent of η.

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{hermite_functions, GaussHermite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialFamily {
    /// V(x) = (x²/2 − J)e^{−λx²} + J, parameters [J, λ].
    GaussianWellBarrier,
    /// V(x) = offset + e^{−λx²} Σ_k c_k x^k, parameters [λ, offset, c_0, c_1, ...].
    CustomPolynomialGaussian,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub potential_family: PotentialFamily,
    pub parameters: Vec<f64>,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub hbar: f64,
}

impl ModelSpec {
    pub fn gaussian_well_barrier(j: f64, lambda: f64) -> Self {
        Self {
            potential_family: PotentialFamily::GaussianWellBarrier,
            parameters: vec![j, lambda],
            mass: 1.0,
            hbar: 1.0,
        }
    }

    /// The default benchmark: J = 0.8, λ = 0.1.
    pub fn benchmark() -> Self {
        Self::gaussian_well_barrier(0.8, 0.1)
    }

    pub fn custom(lambda: f64, offset: f64, coefficients: &[f64]) -> Self {
        let mut parameters = vec![lambda, offset];
        parameters.extend_from_slice(coefficients);
        Self {
            potential_family: PotentialFamily::CustomPolynomialGaussian,
            parameters,
            mass: 1.0,
            hbar: 1.0,
        }
    }

    /// V(x) = x²/2.
    pub fn pure_harmonic() -> Self {
        Self::custom(0.0, 0.0, &[0.0, 0.0, 0.5])
    }

    /// V ≡ 0.
    pub fn kinetic_only() -> Self {
        Self::custom(0.0, 0.0, &[])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::validation("mass", "must be positive"));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::validation("hbar", "must be positive"));
        }
        if self.parameters.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation("parameters", "must be finite"));
        }
        match self.potential_family {
            PotentialFamily::GaussianWellBarrier => {
                if self.parameters.len() != 2 {
                    return Err(Error::validation("parameters", "gaussian_well_barrier takes [J, lambda]"));
                }
                if self.parameters[1] <= 0.0 {
                    return Err(Error::validation("lambda", "must be positive"));
                }
            }
            PotentialFamily::CustomPolynomialGaussian => {
                if self.parameters.len() < 2 {
                    return Err(Error::validation(
                        "parameters",
                        "custom_polynomial_gaussian takes [lambda, offset, c0, c1, ...]",
                    ));
                }
                if self.parameters[0] < 0.0 {
                    return Err(Error::validation("lambda", "must be non-negative"));
                }
            }
        }
        Ok(())
    }

    /// (λ, offset, polynomial coefficients) of the equivalent custom form.
    fn canonical(&self) -> (f64, f64, Vec<f64>) {
        match self.potential_family {
            PotentialFamily::GaussianWellBarrier => {
                let (j, lambda) = (self.parameters[0], self.parameters[1]);
                (lambda, j, vec![-j, 0.0, 0.5])
            }
            PotentialFamily::CustomPolynomialGaussian => {
                (self.parameters[0], self.parameters[1], self.parameters[2..].to_vec())
            }
        }
    }

    /// V at complex argument.
    pub fn potential(&self, x: C64) -> C64 {
        let (lambda, offset, c) = self.canonical();
        let poly = c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &ck| acc * x + ck);
        let damp = if lambda == 0.0 { C64::new(1.0, 0.0) } else { (-lambda * x * x).exp() };
        damp * poly + offset
    }

    /// True when V(−x) = V(x).
    pub fn is_even(&self) -> bool {
        let (_, _, c) = self.canonical();
        c.iter().skip(1).step_by(2).all(|&ck| ck == 0.0)
    }

    /// Asymptotic value of V, when the potential tends to a constant.
    pub fn threshold(&self) -> Option<f64> {
        let (lambda, offset, c) = self.canonical();
        if lambda > 0.0 || c.iter().all(|&ck| ck == 0.0) {
            Some(offset)
        } else {
            None
        }
    }

    fn kinetic_prefactor(&self) -> f64 {
        self.hbar * self.hbar / self.mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    HarmonicOscillator,
    EvenTemperedGaussian,
}

fn default_width() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub size: usize,
    /// ω for the oscillator basis.
    #[serde(default = "default_width")]
    pub width: f64,
    /// β₀ for the even-tempered basis.
    #[serde(default)]
    pub base_exponent: f64,
    /// s for the even-tempered basis.
    #[serde(default)]
    pub ratio: f64,
    #[serde(default)]
    pub quadrature_order: usize,
    /// Even-tempered only: use x·e^{−βx²} instead of e^{−βx²}.
    #[serde(default)]
    pub odd: bool,
}

impl BasisSpec {
    /// Oscillator basis with the default quadrature order 4N (at least 64).
    pub fn harmonic_oscillator(size: usize, width: f64) -> Self {
        Self {
            kind: BasisKind::HarmonicOscillator,
            size,
            width,
            base_exponent: 0.0,
            ratio: 0.0,
            quadrature_order: (4 * size).max(64),
            odd: false,
        }
    }

    pub fn even_tempered(size: usize, base_exponent: f64, ratio: f64) -> Self {
        Self {
            kind: BasisKind::EvenTemperedGaussian,
            size,
            width: 1.0,
            base_exponent,
            ratio,
            quadrature_order: 0,
            odd: false,
        }
    }

    /// The benchmark basis: oscillator, N = 60, ω = 1.
    pub fn benchmark() -> Self {
        Self::harmonic_oscillator(60, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(Error::validation("size", "must be at least 2"));
        }
        if self.size > 1000 {
            return Err(Error::validation("size", "must not exceed 1000"));
        }
        match self.kind {
            BasisKind::HarmonicOscillator => {
                if !(self.width > 0.0 && self.width.is_finite()) {
                    return Err(Error::validation("width", "must be positive"));
                }
                if self.quadrature_order < self.size {
                    return Err(Error::validation("quadrature_order", "must be at least the basis size"));
                }
                if self.quadrature_order > crate::quadrature::MAX_ORDER {
                    return Err(Error::validation(
                        "quadrature_order",
                        format!("must not exceed {}", crate::quadrature::MAX_ORDER),
                    ));
                }
            }
            BasisKind::EvenTemperedGaussian => {
                if !(self.base_exponent > 0.0 && self.base_exponent.is_finite()) {
                    return Err(Error::validation("base_exponent", "must be positive"));
                }
                if !(self.ratio > 1.0 && self.ratio.is_finite()) {
                    return Err(Error::validation("ratio", "must exceed 1"));
                }
                let last = self.base_exponent * self.ratio.powi(self.size as i32 - 1);
                if !last.is_finite() {
                    return Err(Error::validation("ratio", "exponents overflow"));
                }
            }
        }
        Ok(())
    }
}

/// Factored overlap matrix S = L Lᵀ (no conjugation) with its condition estimate.
#[derive(Debug, Clone)]
pub struct OverlapFactor {
    pub s: Mat<C64>,
    pub l: Mat<C64>,
    pub condition: f64,
}

impl OverlapFactor {
    pub fn new(s: Mat<C64>) -> Result<Self> {
        let n = s.nrows();
        crate::eigen::sequential();
        let sv = s.singular_values().map_err(|e| Error::Solver(format!("overlap SVD: {e:?}")))?;
        let condition = if sv[n - 1] > 0.0 { sv[0] / sv[n - 1] } else { f64::INFINITY };
        let mut l = Mat::<C64>::zeros(n, n);
        for j in 0..n {
            let mut d = s[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut v = s[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / d;
            }
        }
        Ok(Self { s, l, condition })
    }
}

/// Overlap of the basis: the identity for orthonormal bases.
#[derive(Debug, Clone)]
pub enum Overlap {
    Identity,
    Matrix(Arc<OverlapFactor>),
}

/// H(η) and S for one scaling parameter.
#[derive(Debug, Clone)]
pub struct ComplexMatrixPair {
    pub h: Mat<C64>,
    pub s: Overlap,
}

#[derive(Debug, Clone)]
enum BasisData {
    Oscillator {
        quadrature: GaussHermite,
        /// h_n(t_i), node-major.
        values: Vec<Vec<f64>>,
    },
    EvenTempered,
}

/// Immutable basis descriptor with precomputed kinetic and overlap matrices.
#[derive(Debug, Clone)]
pub struct BasisSet {
    pub spec: BasisSpec,
    /// ln of the per-function normalization constants.
    pub log_norms: Vec<f64>,
    /// Exponents β_k (even-tempered only).
    pub exponents: Vec<f64>,
    /// Kinetic matrix for ħ²/m = 1, i.e. of −½ d²/dx².
    kinetic: Mat<f64>,
    overlap: Overlap,
    data: BasisData,
}

fn ln_gamma_half(m: usize) -> f64 {
    // ln Γ(m + 1/2)
    let mut v = 0.5 * std::f64::consts::PI.ln();
    for k in 0..m {
        v += (k as f64 + 0.5).ln();
    }
    v
}

/// I_{2m}(a) = ∫ x^{2m} e^{−a x²} dx = Γ(m+½) a^{−(m+½)} on the principal branch.
fn gaussian_moment(m: usize, a: C64) -> C64 {
    ln_gamma_half(m).exp() * a.powf(-(m as f64 + 0.5))
}

fn gaussian_moment_real(m: usize, a: f64) -> f64 {
    (ln_gamma_half(m) - (m as f64 + 0.5) * a.ln()).exp()
}

pub fn build_basis(spec: &BasisSpec) -> Result<BasisSet> {
    spec.validate()?;
    let n = spec.size;
    match spec.kind {
        BasisKind::HarmonicOscillator => {
            let w = spec.width;
            let log_norms = (0..n)
                .map(|k| {
                    let mut ln_fact = 0.0;
                    for i in 2..=k {
                        ln_fact += (i as f64).ln();
                    }
                    0.25 * w.ln() - 0.5 * (k as f64 * 2f64.ln() + ln_fact + 0.5 * std::f64::consts::PI.ln())
                })
                .collect();
            let kinetic = Mat::<f64>::from_fn(n, n, |i, j| {
                if i == j {
                    w * (2 * i + 1) as f64 / 4.0
                } else if i.abs_diff(j) == 2 {
                    let k = i.min(j) as f64;
                    -w * ((k + 1.0) * (k + 2.0)).sqrt() / 4.0
                } else {
                    0.0
                }
            });
            let quadrature = GaussHermite::new(spec.quadrature_order)?;
            let values = quadrature.nodes.iter().map(|&t| hermite_functions(t, n)).collect();
            Ok(BasisSet {
                spec: spec.clone(),
                log_norms,
                exponents: Vec::new(),
                kinetic,
                overlap: Overlap::Identity,
                data: BasisData::Oscillator { quadrature, values },
            })
        }
        BasisKind::EvenTemperedGaussian => {
            let exponents: Vec<f64> =
                (0..n).map(|k| spec.base_exponent * spec.ratio.powi(k as i32)).collect();
            if exponents.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::validation("ratio", "exponents are not strictly increasing"));
            }
            let p = usize::from(spec.odd);
            let log_norms: Vec<f64> =
                exponents.iter().map(|&b| -0.5 * gaussian_moment_real(p, 2.0 * b).ln()).collect();
            let norms: Vec<f64> = log_norms.iter().map(|l| l.exp()).collect();
            let s = Mat::<f64>::from_fn(n, n, |i, j| {
                norms[i] * norms[j] * gaussian_moment_real(p, exponents[i] + exponents[j])
            });
            let kinetic = Mat::<f64>::from_fn(n, n, |i, j| {
                let (bi, bj) = (exponents[i], exponents[j]);
                let a = bi + bj;
                let raw = if p == 0 {
                    4.0 * bi * bj * gaussian_moment_real(1, a)
                } else {
                    gaussian_moment_real(0, a) - 2.0 * a * gaussian_moment_real(1, a)
                        + 4.0 * bi * bj * gaussian_moment_real(2, a)
                };
                0.5 * norms[i] * norms[j] * raw
            });
            let s = Mat::<C64>::from_fn(n, n, |i, j| C64::new(s[(i, j)], 0.0));
            let factor = OverlapFactor::new(s)?;
            Ok(BasisSet {
                spec: spec.clone(),
                log_norms,
                exponents,
                kinetic,
                overlap: Overlap::Matrix(Arc::new(factor)),
                data: BasisData::EvenTempered,
            })
        }
    }
}

impl BasisSet {
    pub fn size(&self) -> usize {
        self.spec.size
    }

    pub fn overlap(&self) -> &Overlap {
        &self.overlap
    }

    /// Kinetic matrix of −½ d²/dx² in the unscaled basis.
    pub fn kinetic(&self) -> &Mat<f64> {
        &self.kinetic
    }

    /// Value of basis function `k` at real `x` (unscaled).
    pub fn evaluate(&self, k: usize, x: f64) -> f64 {
        match &self.data {
            BasisData::Oscillator { .. } => {
                let w = self.spec.width;
                w.powf(0.25) * hermite_functions(w.sqrt() * x, k + 1)[k]
            }
            BasisData::EvenTempered => {
                let b = self.exponents[k];
                let poly = if self.spec.odd { x } else { 1.0 };
                self.log_norms[k].exp() * poly * (-b * x * x).exp()
            }
        }
    }

    fn potential_matrix(&self, model: &ModelSpec, eta: C64) -> Mat<C64> {
        let n = self.size();
        let mut v = Mat::<C64>::zeros(n, n);
        match &self.data {
            BasisData::Oscillator { quadrature, values } => {
                let scale = eta / self.spec.width.sqrt();
                let q = quadrature.order();
                if model.is_even() {
                    // Mirror nodes carry equal weight and h_m h_n has parity (−1)^{m+n}:
                    // odd-parity elements vanish and even ones fold onto t ≥ 0.
                    let half: Vec<(usize, f64)> = (q / 2..q)
                        .map(|i| (i, if quadrature.nodes[i] == 0.0 { 1.0 } else { 2.0 }))
                        .collect();
                    let wv: Vec<C64> = half
                        .iter()
                        .map(|&(i, f)| model.potential(scale * quadrature.nodes[i]) * (f * quadrature.weights[i]))
                        .collect();
                    for m in 0..n {
                        for k in (m..n).step_by(2) {
                            let mut acc = C64::new(0.0, 0.0);
                            for (j, &(i, _)) in half.iter().enumerate() {
                                acc += wv[j] * (values[i][m] * values[i][k]);
                            }
                            v[(m, k)] = acc;
                            v[(k, m)] = acc;
                        }
                    }
                } else {
                    let wv: Vec<C64> = quadrature
                        .nodes
                        .iter()
                        .zip(&quadrature.weights)
                        .map(|(&t, &w)| model.potential(scale * t) * w)
                        .collect();
                    for m in 0..n {
                        for k in m..n {
                            let mut acc = C64::new(0.0, 0.0);
                            for (i, hv) in values.iter().enumerate() {
                                acc += wv[i] * (hv[m] * hv[k]);
                            }
                            v[(m, k)] = acc;
                            v[(k, m)] = acc;
                        }
                    }
                }
            }
            BasisData::EvenTempered => {
                let (lambda, offset, c) = model.canonical();
                let p = usize::from(self.spec.odd);
                let damp = lambda * eta * eta;
                let norms: Vec<f64> = self.log_norms.iter().map(|l| l.exp()).collect();
                let s = match &self.overlap {
                    Overlap::Matrix(f) => &f.s,
                    Overlap::Identity => unreachable!("even-tempered overlap is explicit"),
                };
                for m in 0..n {
                    for k in m..n {
                        let a = C64::new(self.exponents[m] + self.exponents[k], 0.0) + damp;
                        let mut acc = C64::new(0.0, 0.0);
                        let mut eta_pow = C64::new(1.0, 0.0);
                        for (j, &cj) in c.iter().enumerate() {
                            if j % 2 == 0 && cj != 0.0 {
                                acc += cj * eta_pow * gaussian_moment(p + j / 2, a);
                            }
                            eta_pow *= eta;
                        }
                        let val = acc * (norms[m] * norms[k]) + s[(m, k)] * offset;
                        v[(m, k)] = val;
                        v[(k, m)] = val;
                    }
                }
            }
        }
        v
    }
}

/// η = α·e^{iθ}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParameter {
    pub alpha: f64,
    pub theta: f64,
}

impl ScalingParameter {
    pub fn new(alpha: f64, theta: f64) -> Self {
        Self { alpha, theta }
    }

    pub fn real(alpha: f64) -> Self {
        Self { alpha, theta: 0.0 }
    }

    pub fn from_eta(eta: C64) -> Self {
        Self { alpha: eta.norm(), theta: eta.arg() }
    }

    pub fn eta(&self) -> C64 {
        C64::from_polar(self.alpha, self.theta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::validation("alpha", "must be positive"));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_4 + 1e-12).contains(&self.theta) {
            return Err(Error::validation("theta", "must lie in [0, pi/4]"));
        }
        Ok(())
    }
}

/// A family of complex-symmetric matrices analytic in η.
pub trait ScaledOperator: Sync {
    fn dimension(&self) -> usize;

    /// Matrices at an arbitrary complex η (no range check).
    fn matrices_at(&self, eta: C64) -> Result<ComplexMatrixPair>;
}

/// A model paired with a basis.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub model: ModelSpec,
    pub basis: BasisSet,
}

impl Hamiltonian {
    pub fn new(model: ModelSpec, basis: &BasisSpec) -> Result<Self> {
        model.validate()?;
        Ok(Self { model, basis: build_basis(basis)? })
    }

    pub fn benchmark() -> Self {
        Self::new(ModelSpec::benchmark(), &BasisSpec::benchmark()).expect("benchmark is valid")
    }
}

impl ScaledOperator for Hamiltonian {
    fn dimension(&self) -> usize {
        self.basis.size()
    }

    fn matrices_at(&self, eta: C64) -> Result<ComplexMatrixPair> {
        assemble(&self.model, &self.basis, eta)
    }
}

fn assemble(model: &ModelSpec, basis: &BasisSet, eta: C64) -> Result<ComplexMatrixPair> {
    let n = basis.size();
    let real = eta.im == 0.0;
    let inv2 = if real { C64::new(1.0 / (eta.re * eta.re), 0.0) } else { (eta * eta).inv() };
    let t_scale = inv2 * model.kinetic_prefactor();
    let mut h = basis.potential_matrix(model, eta);
    for m in 0..n {
        for k in 0..n {
            let t = basis.kinetic[(m, k)];
            if t != 0.0 {
                h[(m, k)] += t_scale * t;
            }
            if real {
                h[(m, k)].im = 0.0;
            }
        }
    }
    for m in 0..n {
        for k in m..n {
            let z = h[(m, k)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NumericRange { m, n: k });
            }
        }
    }
    Ok(ComplexMatrixPair { h, s: basis.overlap.clone() })
}

/// H(η) and S for a validated scaling parameter.
pub fn scaled_matrices(model: &ModelSpec, basis: &BasisSet, eta: ScalingParameter) -> Result<ComplexMatrixPair> {
    model.validate()?;
    eta.validate()?;
    assemble(model, basis, eta.eta())
}

/// Outcome of the quadrature-order self-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureCheck {
    pub order: usize,
    pub refined_order: usize,
    /// max |A_q − A_{1.5q}| / max |A_{1.5q}| over H at the probe η.
    pub relative_change: f64,
    pub passed: bool,
}

/// Compares the potential matrix at the basis' quadrature order against 1.5× that order,
/// at η = 1 and at η = e^{0.2i}.
pub fn quadrature_self_test(model: &ModelSpec, basis: &BasisSet) -> Result<QuadratureCheck> {
    model.validate()?;
    if basis.spec.kind == BasisKind::EvenTemperedGaussian {
        return Ok(QuadratureCheck { order: 0, refined_order: 0, relative_change: 0.0, passed: true });
    }
    let order = basis.spec.quadrature_order;
    let refined_order = (order * 3).div_ceil(2).min(crate::quadrature::MAX_ORDER);
    let mut refined_spec = basis.spec.clone();
    refined_spec.quadrature_order = refined_order;
    let refined = build_basis(&refined_spec)?;
    let mut worst: f64 = 0.0;
    for eta in [C64::new(1.0, 0.0), C64::from_polar(1.0, 0.2)] {
        let a = basis.potential_matrix(model, eta);
        let b = refined.potential_matrix(model, eta);
        let n = basis.size();
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for m in 0..n {
            for k in 0..n {
                diff = diff.max((a[(m, k)] - b[(m, k)]).norm());
                scale = scale.max(b[(m, k)].norm());
            }
        }
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    Ok(QuadratureCheck { order, refined_order, relative_change: worst, passed: worst < 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lowest_real_eigs(h: &Mat<C64>, k: usize) -> Vec<f64> {
        let n = h.nrows();
        let hr = Mat::<f64>::from_fn(n, n, |i, j| h[(i, j)].re);
        let mut e = hr.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        e.sort_by(f64::total_cmp);
        e.truncate(k);
        e
    }

    #[test]
    fn pure_harmonic_spectrum_is_exact() {
        let ham = Hamiltonian::new(ModelSpec::pure_harmonic(), &BasisSpec::harmonic_oscillator(10, 1.0)).unwrap();
        let p = scaled_matrices(&ham.model, &ham.basis, ScalingParameter::real(1.0)).unwrap();
        let e = lowest_real_eigs(&p.h, 5);
        for (k, ek) in e.iter().enumerate() {
            assert!((ek - (k as f64 + 0.5)).abs() < 1e-10, "{k}: {ek}");
        }
    }

    #[test]
    fn kinetic_only_scales_as_inverse_square() {
        let ham = Hamiltonian::new(ModelSpec::kinetic_only(), &BasisSpec::harmonic_oscillator(12, 1.3)).unwrap();
        let h1 = ham.matrices_at(C64::new(1.0, 0.0)).unwrap().h;
        let eta = C64::from_polar(0.7, 0.3);
        let h = ham.matrices_at(eta).unwrap().h;
        let f = (eta * eta).inv();
        for i in 0..12 {
            for j in 0..12 {
                assert!((h[(i, j)] - f * h1[(i, j)]).norm() <= 4.0 * f64::EPSILON * h1[(i, j)].norm() * f.norm());
            }
        }
    }

    #[test]
    fn theta_zero_is_real_and_symmetric() {
        let ham = Hamiltonian::benchmark();
        let p = scaled_matrices(&ham.model, &ham.basis, ScalingParameter::real(1.3)).unwrap();
        let h = ham.matrices_at(C64::from_polar(1.1, 0.25)).unwrap().h;
        for i in 0..60 {
            for j in 0..60 {
                assert_eq!(p.h[(i, j)].im, 0.0);
                assert_eq!(h[(i, j)], h[(j, i)]);
            }
        }
    }

    #[test]
    fn oscillator_functions_are_normalized() {
        let basis = build_basis(&BasisSpec::harmonic_oscillator(3, 1.0)).unwrap();
        let dx = 1e-3;
        for k in 0..3 {
            let norm: f64 = (-12000..=12000).map(|i| basis.evaluate(k, i as f64 * dx).powi(2) * dx).sum();
            assert!((norm - 1.0).abs() < 1e-10, "{k}: {norm}");
        }
    }

    #[test]
    fn even_tempered_exponents_and_normalization() {
        let basis = build_basis(&BasisSpec::even_tempered(4, 0.05, 2.0)).unwrap();
        assert_eq!(basis.exponents, vec![0.05, 0.1, 0.2, 0.4]);
        let Overlap::Matrix(f) = basis.overlap() else { panic!("expected explicit overlap") };
        for k in 0..4 {
            assert!((f.s[(k, k)].re - 1.0).abs() < 1e-14);
        }
        let dx = 1e-3;
        let s01: f64 = (-40000..=40000).map(|i| {
            let x = i as f64 * dx;
            basis.evaluate(0, x) * basis.evaluate(1, x) * dx
        }).sum();
        assert!((s01 - f.s[(0, 1)].re).abs() < 1e-9);
    }

    #[test]
    fn even_tempered_matches_quadrature_elements() {
        // Closed-form potential elements against brute-force quadrature on a line.
        let model = ModelSpec::benchmark();
        let mut spec = BasisSpec::even_tempered(5, 0.1, 2.2);
        spec.odd = true;
        let basis = build_basis(&spec).unwrap();
        let v = basis.potential_matrix(&model, C64::new(1.2, 0.0));
        let dx = 2e-3;
        for (m, k) in [(0, 0), (1, 3), (4, 4)] {
            let num: f64 = (-30000..=30000)
                .map(|i| {
                    let x = i as f64 * dx;
                    basis.evaluate(m, x) * basis.evaluate(k, x) * model.potential(C64::new(1.2 * x, 0.0)).re * dx
                })
                .sum();
            assert!((num - v[(m, k)].re).abs() < 1e-9, "({m},{k}) {num} vs {}", v[(m, k)]);
        }
    }

    #[test]
    fn validation_names_the_field() {
        let mut spec = BasisSpec::harmonic_oscillator(1, 1.0);
        assert!(matches!(build_basis(&spec), Err(Error::Validation { field, .. }) if field == "size"));
        spec.size = 4;
        spec.width = -1.0;
        assert!(matches!(build_basis(&spec), Err(Error::Validation { field, .. }) if field == "width"));
        let bad = ModelSpec::gaussian_well_barrier(0.8, 0.0);
        assert!(matches!(bad.validate(), Err(Error::Validation { field, .. }) if field == "lambda"));
        assert!(ScalingParameter::new(1.0, 1.0).validate().is_err());
        assert!(ScalingParameter::new(0.0, 0.1).validate().is_err());
    }
}
