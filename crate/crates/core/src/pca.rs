//! PCA feature selection for the one-class SVM.

use std::fmt;
use std::str::FromStr;

use crate::error::{GaitError, Result};
use crate::linalg::symmetric_eigen;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcaMode {
    /// Keep the components with the smallest variance.
    #[default]
    Lowest,
    Highest,
}

impl fmt::Display for PcaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PcaMode::Lowest => "lowest",
            PcaMode::Highest => "highest",
        })
    }
}

impl FromStr for PcaMode {
    type Err = GaitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowest" => Ok(PcaMode::Lowest),
            "highest" => Ok(PcaMode::Highest),
            other => Err(GaitError::Parameter(format!("unknown PCA mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaTransform {
    pub mean: Vec<f64>,
    /// `S` unit rows of length `F`.
    pub basis: Vec<Vec<f64>>,
    pub component_variances: Vec<f64>,
}

impl PcaTransform {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.mean.len();
        if self.basis.is_empty() || self.basis.len() > f || self.basis.iter().any(|r| r.len() != f) {
            return Err(GaitError::ShapeMismatch(format!(
                "PCA basis must be S×{f} with 1 ≤ S ≤ {f}"
            )));
        }
        if self.component_variances.len() != self.basis.len() {
            return Err(GaitError::ShapeMismatch("one variance per PCA component required".into()));
        }
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate().skip(i) {
                let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (d - expect).abs() > 1e-8 {
                    return Err(GaitError::Validation("PCA basis rows are not orthonormal".into()));
                }
            }
        }
        Ok(())
    }

    /// `basis · (f − mean)`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.mean.len() {
            return Err(GaitError::ShapeMismatch(format!(
                "feature vector of length {}, PCA expects {}",
                f.len(),
                self.mean.len()
            )));
        }
        Ok(self
            .basis
            .iter()
            .map(|row| row.iter().zip(f.iter().zip(&self.mean)).map(|(b, (x, m))| b * (x - m)).sum())
            .collect())
    }
}

/// Fits the mean and sample covariance (divisor `n − 1`) and keeps `s`
/// principal directions. Each direction is signed so that its largest-magnitude
/// entry is positive.
pub fn fit_pca(features: &[Vec<f64>], s: usize, mode: PcaMode) -> Result<PcaTransform> {
    let f = features.first().map_or(0, Vec::len);
    if f == 0 || features.iter().any(|v| v.len() != f) {
        return Err(GaitError::ShapeMismatch("feature vectors must share a non-zero length".into()));
    }
    if s == 0 || s > f {
        return Err(GaitError::Parameter(format!("cannot keep {s} of {f} components")));
    }
    let n = features.len();
    if n < f + 1 {
        return Err(GaitError::InsufficientData(format!(
            "PCA of {f} features needs at least {} samples, got {n}",
            f + 1
        )));
    }
    let mean: Vec<f64> = (0..f)
        .map(|j| features.iter().map(|v| v[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; f]; f];
    for v in features {
        let c: Vec<f64> = v.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..f {
            let ci = c[i];
            for (j, cj) in c.iter().enumerate().skip(i) {
                cov[i][j] += ci * cj;
            }
        }
    }
    for i in 0..f {
        for j in i..f {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    let eig = symmetric_eigen(&cov)?;
    let top = eig.values[0].max(0.0);
    let picked: Vec<usize> = match mode {
        PcaMode::Highest => (0..s).collect(),
        PcaMode::Lowest => (f - s..f).collect(),
    };
    // Numerical rank cutoff: eigenvalues below this are round-off.
    let tol = f as f64 * f64::EPSILON * top;
    if top <= 0.0 || picked.iter().any(|&k| eig.values[k] <= tol) {
        return Err(GaitError::DegenerateInput(format!(
            "covariance is rank-deficient: fewer than {s} components with positive variance"
        )));
    }
    let basis = picked
        .iter()
        .map(|&k| {
            let v = &eig.vectors[k];
            let lead = v.iter().fold(0.0f64, |b, x| if x.abs() > b.abs() { *x } else { b });
            if lead < 0.0 {
                v.iter().map(|x| -x).collect()
            } else {
                v.clone()
            }
        })
        .collect();
    Ok(PcaTransform {
        mean,
        basis,
        component_variances: picked.iter().map(|&k| eig.values[k]).collect(),
    })
}
