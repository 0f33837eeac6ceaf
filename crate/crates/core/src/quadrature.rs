//! Gauss–Hermite nodes and weights for integrals of the form ∫ h_m(x) h_n(x) f(x) dx,
//! where h_k are the normalized Hermite functions.

use crate::error::{Error, Result};
use faer::{Mat, Side};

/// Largest supported order. Beyond this e^{-x²/2} underflows at the outer nodes.
pub const MAX_ORDER: usize = 600;

/// Fixed quadrature rule. `weights` are the scaled (Christoffel) weights W_i = 1/Σ_k h_k(x_i)²,
/// so that Σ_i W_i h_m(x_i) h_n(x_i) = δ_mn exactly for m + n < 2·order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Normalized Hermite functions h_0..h_{n-1} at `x`.
pub fn hermite_functions(x: f64, n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n];
    if n == 0 {
        return h;
    }
    h[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n > 1 {
        h[1] = std::f64::consts::SQRT_2 * x * h[0];
    }
    for k in 2..n {
        let kf = k as f64;
        h[k] = (2.0 / kf).sqrt() * x * h[k - 1] - ((kf - 1.0) / kf).sqrt() * h[k - 2];
    }
    h
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::validation(
                "quadrature_order",
                format!("must lie in 1..={MAX_ORDER}, got {order}"),
            ));
        }
        crate::eigen::sequential();
        // Golub–Welsch: eigenvalues of the Jacobi matrix of the Hermite recurrence.
        let jac = Mat::<f64>::from_fn(order, order, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes = jac
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Solver(format!("Golub-Welsch eigenvalues: {e:?}")))?;
        nodes.sort_by(f64::total_cmp);

        // Newton polish on h_order, with h_n' = sqrt(2n) h_{n-1} - x h_n.
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let h = hermite_functions(*x, order + 1);
                let p = h[order];
                let dp = (2.0 * order as f64).sqrt() * h[order - 1] - *x * p;
                if dp == 0.0 {
                    break;
                }
                let step = p / dp;
                *x -= step;
                if step.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
        }
        // Exact mirror symmetry.
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -x;
            nodes[j] = x;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }

        let weights = nodes
            .iter()
            .map(|&x| 1.0 / hermite_functions(x, order).iter().map(|h| h * h).sum::<f64>())
            .collect();
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Standard weights for ∫ g(x) e^{-x²} dx ≈ Σ w_i g(x_i).
    pub fn gaussian_weights(&self) -> Vec<f64> {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * (-x * x).exp()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_moments_of_gaussian() {
        let q = GaussHermite::new(20).unwrap();
        let w = q.gaussian_weights();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        // ∫ x^{2k} e^{-x²} = Γ(k + 1/2)
        let mut gamma = sqrt_pi;
        for k in 0..10 {
            let m: f64 = q.nodes.iter().zip(&w).map(|(x, w)| w * x.powi(2 * k)).sum();
            assert!((m - gamma).abs() < 1e-12 * gamma, "k={k}: {m} vs {gamma}");
            gamma *= k as f64 + 0.5;
        }
    }

    #[test]
    fn hermite_functions_orthonormal_under_rule() {
        let q = GaussHermite::new(40).unwrap();
        let n = 30;
        let hs: Vec<Vec<f64>> = q.nodes.iter().map(|&x| hermite_functions(x, n)).collect();
        for m in 0..n {
            for k in 0..n {
                let s: f64 = (0..q.order()).map(|i| q.weights[i] * hs[i][m] * hs[i][k]).sum();
                let want = if m == k { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-12, "({m},{k}) = {s}");
            }
        }
    }

    #[test]
    fn nodes_are_symmetric_and_sorted() {
        let q = GaussHermite::new(301).unwrap();
        assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
        for i in 0..q.order() {
            assert_eq!(q.nodes[i], -q.nodes[q.order() - 1 - i]);
        }
        assert_eq!(q.nodes[150], 0.0);
    }

    #[test]
    fn rejects_bad_order() {
        assert!(GaussHermite::new(0).is_err());
        assert!(GaussHermite::new(MAX_ORDER + 1).is_err());
    }
}
