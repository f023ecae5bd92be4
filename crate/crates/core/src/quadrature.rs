//! Gauss–Hermite quadrature for the probabilists' weight, i.e. rules with
//! `∫ g(y) f_∞,1d(y) dy ≈ Σ w_i g(y_i)` where `f_∞,1d = (2π)^{-1/2} e^{-y²/2}`
//! and `Σ w_i = 1`. Exact for polynomials of degree ≤ 2n − 1.
//!
//! Nodes and weights come from Golub–Welsch on the Jacobi matrix of the monic
//! Hermite recurrence `He_{k+1} = x He_k − k He_{k−1}` (diagonal 0,
//! off-diagonal `√k`).

use nalgebra::{DMatrix, SymmetricEigen};

#[derive(Clone, Debug)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// An `n`-point rule. Panics for `n = 0`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be positive");
        if n == 1 {
            return GaussHermite {
                nodes: vec![0.0],
                weights: vec![1.0],
            };
        }
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let node = eig.eigenvalues[i];
                let first = eig.eigenvectors[(0, i)];
                (node, first * first)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ g f_∞,1d` in one dimension.
    pub fn integrate_1d(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * g(y))
            .sum()
    }

    /// Tensor-product integration against the standard Gaussian in `d`
    /// dimensions: `∫ g(y) f_∞(y) dy`.
    pub fn integrate(&self, d: usize, mut g: impl FnMut(&[f64]) -> f64) -> f64 {
        let n = self.len();
        let mut idx = vec![0usize; d];
        let mut point = vec![0.0f64; d];
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                point[k] = self.nodes[i];
                w *= self.weights[i];
            }
            acc += w * g(&point);
            // odometer increment
            let mut k = 0;
            loop {
                if k == d {
                    return acc;
                }
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}
