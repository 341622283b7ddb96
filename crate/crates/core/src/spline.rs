//! Cubic spline interpolation on non-uniform knots.
//!
//! Uses not-a-knot end conditions, so any cubic polynomial is reproduced
//! exactly (up to rounding).

use crate::error::{GaitError, Result};

#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    /// Builds the not-a-knot interpolant. Needs at least four strictly
    /// increasing knots.
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(GaitError::ShapeMismatch(format!(
                "spline knots ({}) and values ({}) differ in length",
                xs.len(),
                ys.len()
            )));
        }
        let n = xs.len();
        if n < 4 {
            return Err(GaitError::InsufficientData(format!(
                "cubic spline needs at least 4 samples, got {n}"
            )));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GaitError::Validation(
                "spline knots must be strictly increasing".into(),
            ));
        }

        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<f64> = ys
            .windows(2)
            .zip(&h)
            .map(|(w, hi)| (w[1] - w[0]) / hi)
            .collect();

        // Interior equations i = 1..n-2:
        //   h[i-1] M[i-1] + 2(h[i-1]+h[i]) M[i] + h[i] M[i+1] = 6 (d[i] - d[i-1])
        // Not-a-knot rows eliminate M[0] and M[n-1]:
        //   M[0]   = ((h0+h1) M1 - h0 M2) / h1
        //   M[n-1] = ((h[n-3]+h[n-2]) M[n-2] - h[n-2] M[n-3]) / h[n-3]
        let k = n - 2;
        let mut lower = vec![0.0; k];
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for r in 0..k {
            let i = r + 1;
            lower[r] = h[i - 1];
            diag[r] = 2.0 * (h[i - 1] + h[i]);
            upper[r] = h[i];
            rhs[r] = 6.0 * (d[i] - d[i - 1]);
        }
        let (h0, h1) = (h[0], h[1]);
        diag[0] += h0 * (h0 + h1) / h1;
        upper[0] -= h0 * h0 / h1;
        lower[0] = 0.0;
        let (ha, hb) = (h[n - 3], h[n - 2]);
        diag[k - 1] += hb * (ha + hb) / ha;
        lower[k - 1] -= hb * hb / ha;
        upper[k - 1] = 0.0;

        let interior = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
        let mut m = Vec::with_capacity(n);
        m.push(((h0 + h1) * interior[0] - h0 * interior[1]) / h1);
        m.extend_from_slice(&interior);
        m.push(((ha + hb) * interior[k - 1] - hb * interior[k - 2]) / ha);

        Ok(CubicSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    fn eval_in(&self, i: usize, x: f64) -> f64 {
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    /// Evaluates the spline; outside the knot range the end polynomials are extrapolated.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_in(self.segment(x), x)
    }

    /// Evaluates at ascending abscissae with a single forward sweep.
    pub fn eval_sorted(&self, xs: &[f64]) -> Vec<f64> {
        let last = self.xs.len() - 2;
        let mut seg = xs.first().map_or(0, |&x| self.segment(x));
        xs.iter()
            .map(|&x| {
                while seg < last && x >= self.xs[seg + 1] {
                    seg += 1;
                }
                self.eval_in(seg, x)
            })
            .collect()
    }
}

/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom.abs() < f64::MIN_POSITIVE {
        return Err(GaitError::DegenerateInput("singular spline system".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom.abs() < f64::MIN_POSITIVE {
            return Err(GaitError::DegenerateInput("singular spline system".into()));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Resamples `values` given at index positions `0..len` onto `n_out`
/// uniformly spaced positions spanning the same range (endpoints kept).
pub fn resample_index_span(values: &[f64], n_out: usize) -> Result<Vec<f64>> {
    if n_out < 2 {
        return Err(GaitError::Parameter(format!(
            "resampled length must be at least 2, got {n_out}"
        )));
    }
    let xs: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
    let spline = CubicSpline::new(&xs, values)?;
    let span = (values.len() - 1) as f64;
    let grid: Vec<f64> = (0..n_out)
        .map(|k| span * k as f64 / (n_out - 1) as f64)
        .collect();
    let mut out = spline.eval_sorted(&grid);
    out[0] = values[0];
    out[n_out - 1] = values[values.len() - 1];
    Ok(out)
}
