//! ν-one-class SVM with an RBF kernel, trained by SMO on the dual
//!
//! ```text
//! min ½ αᵀKα   s.t.  0 ≤ α_i ≤ 1/(νℓ),  Σ α_i = 1
//! ```
//!
//! Scores are `h(s) = Σ α_j K(s_j, s) − b`.

use crate::error::{GaitError, Result};
use crate::pca::PcaTransform;

/// Stopping tolerance on the maximal KKT violation.
pub const KKT_TOL: f64 = 1e-9;
/// Scores within this distance of zero lie on the boundary to solver accuracy.
pub const BOUNDARY_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 1_000_000;
const ALPHA_KEEP: f64 = 1e-12;

pub fn rbf_kernel(s: &[f64], t: &[f64], gamma: f64) -> f64 {
    let d2: f64 = s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneClassSvm {
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub b: f64,
    pub gamma: f64,
    pub nu: f64,
}

impl OneClassSvm {
    pub fn score(&self, s: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.alphas)
            .map(|(sv, a)| a * rbf_kernel(sv, s, self.gamma))
            .sum::<f64>()
            - self.b
    }

    /// `+1` inside the boundary (score ≥ 0), `−1` outside.
    pub fn decide(&self, s: &[f64]) -> i8 {
        if self.score(s) >= 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.support_vectors.is_empty() || self.support_vectors.len() != self.alphas.len() {
            return Err(GaitError::ShapeMismatch("one positive α per support vector required".into()));
        }
        let d = self.dim();
        if self.support_vectors.iter().any(|v| v.len() != d) {
            return Err(GaitError::ShapeMismatch("support vectors differ in length".into()));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0)) {
            return Err(GaitError::Validation("support vector coefficients must be positive".into()));
        }
        let sum: f64 = self.alphas.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(GaitError::Validation(format!("coefficients sum to {sum}, not 1")));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) || !(self.gamma >= 0.0) || !self.b.is_finite() {
            return Err(GaitError::Validation("invalid ν, γ or offset".into()));
        }
        Ok(())
    }
}

/// Solution of the dual problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub b: f64,
    pub iterations: usize,
    pub violation: f64,
}

/// Offset from the gradient `G = Kα`: mean over free coefficients, otherwise
/// the midpoint of the bounds implied by the clamped ones.
pub fn offset_from_gradient(alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for (&a, &g) in alpha.iter().zip(grad) {
        if a >= c {
            lb = lb.max(g);
        } else if a <= 0.0 {
            ub = ub.min(g);
        } else {
            sum_free += g;
            n_free += 1;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    }
}

pub fn kernel_matrix(points: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    let l = points.len();
    let mut k = vec![vec![0.0; l]; l];
    for i in 0..l {
        k[i][i] = 1.0;
        for j in 0..i {
            let v = rbf_kernel(&points[i], &points[j], gamma);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

/// Maximal-violating-pair SMO on a precomputed kernel matrix.
pub fn solve_dual(k: &[Vec<f64>], nu: f64) -> Result<DualSolution> {
    let l = k.len();
    let c = 1.0 / (nu * l as f64);
    let mut alpha = vec![0.0; l];
    let n_full = ((nu * l as f64).floor() as usize).min(l);
    for a in alpha.iter_mut().take(n_full) {
        *a = c;
    }
    if n_full < l {
        alpha[n_full] = (1.0 - n_full as f64 * c).max(0.0);
    }
    let mut grad: Vec<f64> = (0..l)
        .map(|i| (0..l).map(|j| k[i][j] * alpha[j]).sum())
        .collect();

    let mut iterations = 0;
    let violation = loop {
        // i raises its coefficient, j lowers.
        let (mut i, mut gi) = (usize::MAX, f64::INFINITY);
        let (mut j, mut gj) = (usize::MAX, f64::NEG_INFINITY);
        for t in 0..l {
            if alpha[t] < c && grad[t] < gi {
                gi = grad[t];
                i = t;
            }
            if alpha[t] > 0.0 && grad[t] > gj {
                gj = grad[t];
                j = t;
            }
        }
        let violation = if i == usize::MAX || j == usize::MAX { 0.0 } else { gj - gi };
        if violation < KKT_TOL {
            break violation.max(0.0);
        }
        if iterations >= MAX_ITER {
            return Err(GaitError::Convergence {
                iterations,
                violation,
            });
        }
        iterations += 1;
        let eta = (k[i][i] + k[j][j] - 2.0 * k[i][j]).max(1e-12);
        let step = (violation / eta).min(c - alpha[i]).min(alpha[j]);
        alpha[i] += step;
        alpha[j] -= step;
        // Snap to the bounds so the active sets are exact.
        if c - alpha[i] <= 1e-15 * c {
            alpha[i] = c;
        }
        if alpha[j] <= 1e-15 * c {
            alpha[j] = 0.0;
        }
        for t in 0..l {
            grad[t] += step * (k[t][i] - k[t][j]);
        }
    };
    let b = offset_from_gradient(&alpha, &grad, c);
    Ok(DualSolution {
        alpha,
        b,
        iterations,
        violation,
    })
}

/// Trains on `ℓ ≥ 10` vectors.
pub fn train_osvm(train: &[Vec<f64>], nu: f64, gamma: f64) -> Result<OneClassSvm> {
    if train.len() < 10 {
        return Err(GaitError::InsufficientData(format!(
            "one-class SVM needs at least 10 training vectors, got {}",
            train.len()
        )));
    }
    fit(train, nu, gamma)
}

/// Same as [`train_osvm`] without the minimum training-set size.
pub fn fit(train: &[Vec<f64>], nu: f64, gamma: f64) -> Result<OneClassSvm> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(GaitError::Parameter(format!("ν = {nu} outside (0, 1]")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(GaitError::Parameter(format!("γ = {gamma} must be non-negative")));
    }
    let d = train.first().map_or(0, Vec::len);
    if train.is_empty() || train.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
        return Err(GaitError::ShapeMismatch("training vectors must be finite and equally long".into()));
    }
    let sol = solve_dual(&kernel_matrix(train, gamma), nu)?;
    Ok(from_dual(train, &sol, nu, gamma))
}

/// Keeps the vectors with `α > 1e-12`.
pub fn from_dual(train: &[Vec<f64>], sol: &DualSolution, nu: f64, gamma: f64) -> OneClassSvm {
    let (support_vectors, alphas) = train
        .iter()
        .zip(&sol.alpha)
        .filter(|(_, a)| **a > ALPHA_KEEP)
        .map(|(v, a)| (v.clone(), *a))
        .unzip();
    OneClassSvm {
        support_vectors,
        alphas,
        b: sol.b,
        gamma,
        nu,
    }
}

/// PCA feature selection followed by the one-class SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct OsvmModel {
    pub pca: PcaTransform,
    pub svm: OneClassSvm,
}

impl OsvmModel {
    pub fn score_features(&self, f: &[f64]) -> Result<f64> {
        Ok(self.svm.score(&self.pca.apply(f)?))
    }

    pub fn validate(&self) -> Result<()> {
        self.pca.validate()?;
        self.svm.validate()?;
        if self.svm.dim() != self.pca.output_dim() {
            return Err(GaitError::ShapeMismatch(format!(
                "PCA yields {} components, SVM expects {}",
                self.pca.output_dim(),
                self.svm.dim()
            )));
        }
        Ok(())
    }
}
