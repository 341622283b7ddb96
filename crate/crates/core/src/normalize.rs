//! Fixed-size, standardized cycle matrices.

use crate::error::{GaitError, Result};
use crate::orientation::OrientedCycle;
use crate::spline::resample_index_span;

pub const DEFAULT_N: usize = 200;

/// Row names in storage order; without gyroscope only the first four are used.
pub const ROW_NAMES: [&str; 8] = [
    "a_xi", "a_psi", "a_zeta", "a_mag", "g_xi", "g_psi", "g_zeta", "g_mag",
];

/// Row-major `rows × n` matrix of one normalized cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleMatrix {
    pub rows: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

impl CycleMatrix {
    pub fn new(rows: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || n == 0 || data.len() != rows * n {
            return Err(GaitError::ShapeMismatch(format!(
                "{} values do not form a {rows}×{n} matrix",
                data.len()
            )));
        }
        Ok(CycleMatrix { rows, n, data })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n..(r + 1) * self.n]
    }
}

pub fn magnitudes(oc: &OrientedCycle) -> (Vec<f64>, Vec<f64>) {
    let mag = |a: &[f64], b: &[f64], c: &[f64]| -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(c)
            .map(|((x, y), z)| (x * x + y * y + z * z).sqrt())
            .collect()
    };
    (
        mag(&oc.a_xi, &oc.a_psi, &oc.a_zeta),
        mag(&oc.g_xi, &oc.g_psi, &oc.g_zeta),
    )
}

/// Cubic-spline resampling onto `n` points spanning the cycle, endpoints kept.
pub fn resample_cycle(v: &[f64], n: usize) -> Result<Vec<f64>> {
    resample_index_span(v, n)
}

/// `(v − mean) / std` with the population standard deviation.
pub fn zscore(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(GaitError::DegenerateCycle("empty row".into()));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if !(var > 1e-12) {
        return Err(GaitError::DegenerateCycle(format!(
            "row variance {var:.3e} is too small to standardize"
        )));
    }
    let sd = var.sqrt();
    Ok(v.iter().map(|x| (x - mean) / sd).collect())
}

/// Stacks the eight (or, without gyroscope, four) rows, each resampled to `n`
/// points and standardized.
pub fn assemble_input(oc: &OrientedCycle, n: usize, use_gyro: bool) -> Result<CycleMatrix> {
    let (a_mag, g_mag) = magnitudes(oc);
    let mut rows: Vec<&[f64]> = vec![&oc.a_xi, &oc.a_psi, &oc.a_zeta, &a_mag];
    if use_gyro {
        rows.extend([oc.g_xi.as_slice(), &oc.g_psi, &oc.g_zeta, &g_mag]);
    }
    let count = rows.len();
    let mut data = Vec::with_capacity(count * n);
    for (name, row) in ROW_NAMES.iter().zip(rows) {
        let z = zscore(&resample_cycle(row, n)?)
            .map_err(|e| GaitError::DegenerateCycle(format!("{name}: {e}")))?;
        data.extend(z);
    }
    CycleMatrix::new(count, n, data)
}
