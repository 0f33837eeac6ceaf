//! Dense complex-symmetric eigensolution with c-product normalization and
//! overlap-based root matching.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComplexMatrixPair, Overlap};

/// Condition estimate of S above which the generalized problem is refused.
pub const MAX_OVERLAP_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    ByRealPart,
    ByTracking,
}

#[derive(Debug, Clone)]
pub struct EigenSet {
    pub values: Vec<C64>,
    /// Right eigenvectors as columns, c-normalized (vᵀ S v = 1) where possible.
    pub vectors: Mat<C64>,
    pub ordering: Ordering,
}

impl EigenSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.nrows()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// Index of the eigenvalue closest to `target`.
    pub fn nearest(&self, target: C64) -> usize {
        let mut best = 0;
        for k in 1..self.len() {
            if (self.values[k] - target).norm() < (self.values[best] - target).norm() {
                best = k;
            }
        }
        best
    }
}

fn frobenius(h: &Mat<C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..h.ncols() {
        for i in 0..h.nrows() {
            acc += h[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

fn mat_vec(a: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    let n = a.nrows();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for j in 0..a.ncols() {
        let vj = v[j];
        if vj == C64::new(0.0, 0.0) {
            continue;
        }
        for i in 0..n {
            out[i] += a[(i, j)] * vj;
        }
    }
    out
}

/// S v (identity aware).
pub fn apply_overlap(s: &Overlap, v: &[C64]) -> Vec<C64> {
    match s {
        Overlap::Identity => v.to_vec(),
        Overlap::Matrix(f) => mat_vec(&f.s, v),
    }
}

/// uᵀ S v without conjugation.
pub fn c_product(s: &Overlap, u: &[C64], v: &[C64]) -> C64 {
    let sv = apply_overlap(s, v);
    u.iter().zip(&sv).map(|(a, b)| a * b).sum()
}

fn hermitian_norm_sq(s: &Overlap, v: &[C64]) -> f64 {
    let sv = apply_overlap(s, v);
    v.iter().zip(&sv).map(|(a, b)| (a.conj() * b).re).sum::<f64>().max(0.0)
}

/// |uᵀ S v| / sqrt((u^H S u)(v^H S v)), in [0, 1] for positive-definite S.
pub fn overlap_magnitude(s: &Overlap, u: &[C64], v: &[C64]) -> f64 {
    let d = (hermitian_norm_sq(s, u) * hermitian_norm_sq(s, v)).sqrt();
    if d == 0.0 {
        0.0
    } else {
        (c_product(s, u, v).norm() / d).min(1.0)
    }
}

fn c_normalize(s: &Overlap, v: &mut [C64]) {
    let c = c_product(s, v, v);
    let e2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    let f = if c.norm() > 1e-12 * e2 { c.sqrt().inv() } else { C64::new(1.0 / e2.sqrt(), 0.0) };
    for x in v.iter_mut() {
        *x *= f;
    }
}

fn sort_by_real_part(values: Vec<C64>, vectors: Vec<Vec<C64>>) -> EigenSet {
    let n = values.len();
    let dim = vectors.first().map_or(0, Vec::len);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re).then(values[a].im.total_cmp(&values[b].im)));
    let vals = idx.iter().map(|&k| values[k]).collect();
    let vecs = Mat::<C64>::from_fn(dim, n, |i, j| vectors[idx[j]][i]);
    EigenSet { values: vals, vectors: vecs, ordering: Ordering::ByRealPart }
}

fn check_overlap(s: &Overlap) -> Result<()> {
    if let Overlap::Matrix(f) = s {
        if !(f.condition < MAX_OVERLAP_CONDITION) {
            return Err(Error::IllConditionedOverlap { condition: f.condition });
        }
    }
    Ok(())
}

/// L⁻¹ H L⁻ᵀ for S = L Lᵀ.
fn reduce(h: &Mat<C64>, l: &Mat<C64>) -> Mat<C64> {
    let n = h.nrows();
    let mut x = h.clone();
    l.as_ref().solve_lower_triangular_in_place(x.as_mut());
    let mut y = x.transpose().to_owned();
    l.as_ref().solve_lower_triangular_in_place(y.as_mut());
    // y = L⁻¹ (L⁻¹ H)ᵀ = L⁻¹ Hᵀ L⁻ᵀ = L⁻¹ H L⁻ᵀ; symmetrize rounding.
    Mat::<C64>::from_fn(n, n, |i, j| if i <= j { y[(i, j)] } else { y[(j, i)] })
}

/// Pins faer to sequential kernels once, so results do not depend on the thread count.
pub(crate) fn sequential() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Full spectrum of H v = E S v.
pub fn eig(h: &Mat<C64>, s: &Overlap) -> Result<EigenSet> {
    sequential();
    check_overlap(s)?;
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(Error::validation("H", "must be square and non-empty"));
    }
    let (a, l) = match s {
        Overlap::Identity => (h.clone(), None),
        Overlap::Matrix(f) => (reduce(h, &f.l), Some(&f.l)),
    };
    let evd = a.eigen().map_err(|e| Error::Solver(format!("complex eigensolve did not converge: {e:?}")))?;
    let sdiag = evd.S();
    let u = evd.U();
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        values.push(sdiag[k]);
        let mut y = Mat::<C64>::from_fn(n, 1, |i, _| u[(i, k)]);
        if let Some(l) = l {
            // v = L⁻ᵀ y
            l.as_ref().transpose().solve_upper_triangular_in_place(y.as_mut());
        }
        let mut v: Vec<C64> = (0..n).map(|i| y[(i, 0)]).collect();
        c_normalize(s, &mut v);
        vectors.push(v);
    }
    Ok(sort_by_real_part(values, vectors))
}

pub fn eig_pair(pair: &ComplexMatrixPair) -> Result<EigenSet> {
    eig(&pair.h, &pair.s)
}

/// Real-symmetric specialization for θ = 0 (imaginary parts of H are ignored).
pub fn eig_real_symmetric(h: &Mat<C64>, s: &Overlap) -> Result<EigenSet> {
    sequential();
    check_overlap(s)?;
    let n = h.nrows();
    let hr = Mat::<f64>::from_fn(n, n, |i, j| h[(i, j)].re);
    let (a, l) = match s {
        Overlap::Identity => (hr, None),
        Overlap::Matrix(f) => {
            let lr = Mat::<f64>::from_fn(n, n, |i, j| f.l[(i, j)].re);
            let mut x = hr;
            lr.as_ref().solve_lower_triangular_in_place(x.as_mut());
            let mut y = x.transpose().to_owned();
            lr.as_ref().solve_lower_triangular_in_place(y.as_mut());
            let y = Mat::<f64>::from_fn(n, n, |i, j| if i <= j { y[(i, j)] } else { y[(j, i)] });
            (y, Some(lr))
        }
    };
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("symmetric eigensolve did not converge: {e:?}")))?;
    let sdiag = evd.S();
    let u = evd.U();
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        values.push(C64::new(sdiag[k], 0.0));
        let mut y = Mat::<f64>::from_fn(n, 1, |i, _| u[(i, k)]);
        if let Some(l) = &l {
            l.as_ref().transpose().solve_upper_triangular_in_place(y.as_mut());
        }
        let mut v: Vec<C64> = (0..n).map(|i| C64::new(y[(i, 0)], 0.0)).collect();
        c_normalize(s, &mut v);
        vectors.push(v);
    }
    Ok(sort_by_real_part(values, vectors))
}

/// ‖H v_k − E_k S v_k‖₂ / (‖H‖_F ‖v_k‖₂) for every k.
pub fn residuals(h: &Mat<C64>, s: &Overlap, set: &EigenSet) -> Vec<f64> {
    let hf = frobenius(h).max(f64::MIN_POSITIVE);
    (0..set.len())
        .map(|k| {
            let v = set.vector(k);
            let hv = mat_vec(h, &v);
            let sv = apply_overlap(s, &v);
            let r: f64 = hv.iter().zip(&sv).map(|(a, b)| (a - set.values[k] * b).norm_sqr()).sum::<f64>().sqrt();
            let vn: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            r / (hf * vn.max(f64::MIN_POSITIVE))
        })
        .collect()
}

/// Assigns each reference vector to a distinct column of `next`, greedily by
/// descending overlap magnitude. Returns (column, overlap) per reference.
pub fn match_by_overlap(s: &Overlap, reference: &[Vec<C64>], next: &EigenSet) -> Vec<(usize, f64)> {
    let m = reference.len();
    let n = next.len();
    let cols: Vec<Vec<C64>> = (0..n).map(|k| next.vector(k)).collect();
    let mut scores = Vec::with_capacity(m * n);
    for (r, u) in reference.iter().enumerate() {
        for (c, v) in cols.iter().enumerate() {
            scores.push((overlap_magnitude(s, u, v), r, c));
        }
    }
    scores.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![(usize::MAX, 0.0); m];
    let mut used = vec![false; n];
    let mut left = m.min(n);
    for (q, r, c) in scores {
        if left == 0 {
            break;
        }
        if out[r].0 == usize::MAX && !used[c] {
            out[r] = (c, q);
            used[c] = true;
            left -= 1;
        }
    }
    out
}

/// Rayleigh-quotient refinement of a single eigenpair from a nearby guess.
/// Returns `None` when the iteration does not settle on a pair with a small residual
/// that still overlaps the guess.
pub fn refine_eigenpair(pair: &ComplexMatrixPair, guess: C64, guess_vector: &[C64]) -> Option<(C64, Vec<C64>)> {
    sequential();
    let n = pair.h.nrows();
    let hf = frobenius(&pair.h);
    let s_mat = match &pair.s {
        Overlap::Identity => None,
        Overlap::Matrix(f) => Some(&f.s),
    };
    let mut shift = guess;
    let mut v = guess_vector.to_vec();
    for _ in 0..8 {
        let a = Mat::<C64>::from_fn(n, n, |i, j| {
            let sij = match s_mat {
                None => {
                    if i == j {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                }
                Some(s) => s[(i, j)],
            };
            pair.h[(i, j)] - shift * sij
        });
        let rhs_v = apply_overlap(&pair.s, &v);
        let rhs = Mat::<C64>::from_fn(n, 1, |i, _| rhs_v[i]);
        let w = a.partial_piv_lu().solve(&rhs);
        let mut next: Vec<C64> = (0..n).map(|i| w[(i, 0)]).collect();
        if next.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
            break;
        }
        let scale = next.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return None;
        }
        for x in next.iter_mut() {
            *x /= scale;
        }
        c_normalize(&pair.s, &mut next);
        let hv = mat_vec(&pair.h, &next);
        let num: C64 = next.iter().zip(&hv).map(|(a, b)| a * b).sum();
        let den = c_product(&pair.s, &next, &next);
        if den.norm() == 0.0 {
            return None;
        }
        let new_shift = num / den;
        let change = (new_shift - shift).norm();
        shift = new_shift;
        v = next;
        if change <= 4.0 * f64::EPSILON * shift.norm().max(1.0) {
            break;
        }
    }
    let hv = mat_vec(&pair.h, &v);
    let sv = apply_overlap(&pair.s, &v);
    let r: f64 = hv.iter().zip(&sv).map(|(a, b)| (a - shift * b).norm_sqr()).sum::<f64>().sqrt();
    let vn: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if r / (hf * vn) > 1e-11 || overlap_magnitude(&pair.s, guess_vector, &v) < 0.5 {
        return None;
    }
    Some((shift, v))
}
