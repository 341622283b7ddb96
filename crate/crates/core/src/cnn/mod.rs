//! Convolutional feature network.
//!
//! Layers: CL1 (per-row 1×10 convolutions, linear), CL2 (4×10 convolutions
//! across all CL1 maps, tanh), max-pool (1,2) over time, FL1 (fully
//! connected, tanh; its output is the feature vector `f`) and FL2 (fully
//! connected, softmax).
//!
//! Because CL1 is linear, CL1 followed by CL2 is itself a single convolution
//! with 4×19 kernels. The forward pass evaluates that fused kernel and the
//! backward pass maps its gradient back onto the CL1 and CL2 weights.

mod train;

pub use train::{evaluate, split_dataset, train, EpochStats, LabeledCycle, Split, TrainConfig, TrainReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GaitError, Result};
use crate::normalize::CycleMatrix;

pub const K1_LEN: usize = 10;
pub const K2_ROWS: usize = 4;
pub const K2_LEN: usize = 10;
pub const POOL: usize = 2;
const FUSED_LEN: usize = K1_LEN + K2_LEN - 1;
const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnArchitecture {
    pub input_rows: usize,
    pub n: usize,
    pub q1: usize,
    pub q2: usize,
    pub features: usize,
    pub classes: usize,
}

impl CnnArchitecture {
    pub fn new(input_rows: usize, n: usize, q1: usize, q2: usize, features: usize, classes: usize) -> Result<Self> {
        let arch = CnnArchitecture {
            input_rows,
            n,
            q1,
            q2,
            features,
            classes,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q1 == 0 || self.q2 == 0 || self.features == 0 || self.classes == 0 {
            return Err(GaitError::Parameter(format!("layer widths must be positive: {self:?}")));
        }
        if self.input_rows < K2_ROWS || self.n < FUSED_LEN + POOL - 1 {
            return Err(GaitError::Parameter(format!(
                "input {}×{} is too small for the convolution stack",
                self.input_rows, self.n
            )));
        }
        Ok(())
    }

    /// Length of a CL1 output row.
    pub fn cl1_len(&self) -> usize {
        self.n - K1_LEN + 1
    }

    pub fn cl2_rows(&self) -> usize {
        self.input_rows - K2_ROWS + 1
    }

    pub fn cl2_len(&self) -> usize {
        self.cl1_len() - K2_LEN + 1
    }

    pub fn pooled_len(&self) -> usize {
        self.cl2_len() / POOL
    }

    /// Input width of FL1.
    pub fn flat_len(&self) -> usize {
        self.q2 * self.cl2_rows() * self.pooled_len()
    }

    pub fn param_shapes(&self) -> [(&'static str, Vec<usize>); 8] {
        [
            ("cl1.w", vec![self.q1, K1_LEN]),
            ("cl1.b", vec![self.q1]),
            ("cl2.w", vec![self.q2, self.q1, K2_ROWS, K2_LEN]),
            ("cl2.b", vec![self.q2]),
            ("fl1.w", vec![self.features, self.flat_len()]),
            ("fl1.b", vec![self.features]),
            ("fl2.w", vec![self.classes, self.features]),
            ("fl2.b", vec![self.classes]),
        ]
    }
}

/// All weights and biases, row-major in the shapes of [`CnnArchitecture::param_shapes`].
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
    pub w4: Vec<f64>,
    pub b4: Vec<f64>,
}

impl CnnParams {
    pub fn zeros(arch: &CnnArchitecture) -> Self {
        let z = |shape: &[usize]| vec![0.0; shape.iter().product()];
        let s = arch.param_shapes();
        CnnParams {
            w1: z(&s[0].1),
            b1: z(&s[1].1),
            w2: z(&s[2].1),
            b2: z(&s[3].1),
            w3: z(&s[4].1),
            b3: z(&s[5].1),
            w4: z(&s[6].1),
            b4: z(&s[7].1),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(arch: &CnnArchitecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(arch);
        let k2 = K2_ROWS * K2_LEN;
        let fans = [
            (K1_LEN, K1_LEN * arch.q1),
            (arch.q1 * k2, arch.q2 * k2),
            (arch.flat_len(), arch.features),
            (arch.features, arch.classes),
        ];
        for (w, (fan_in, fan_out)) in [&mut p.w1, &mut p.w2, &mut p.w3, &mut p.w4].into_iter().zip(fans) {
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.iter_mut().for_each(|v| *v = rng.random_range(-s..=s));
        }
        p
    }

    pub fn arrays(&self) -> [&Vec<f64>; 8] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3, &self.w4, &self.b4]
    }

    pub fn arrays_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
            &mut self.w4,
            &mut self.b4,
        ]
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &CnnParams, scale: f64) {
        for (a, b) in self.arrays_mut().into_iter().zip(other.arrays()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub final_train_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub arch: CnnArchitecture,
    pub params: CnnParams,
    /// Class names, index = output unit.
    pub classes: Vec<String>,
    pub meta: TrainingMeta,
}

/// Fused CL1∘CL2 kernel: `keff[m][dr][v]`, `v < 19`, and bias `beff[m]`.
struct Fused {
    keff: Vec<f64>,
    beff: Vec<f64>,
}

fn fuse(arch: &CnnArchitecture, p: &CnnParams) -> Fused {
    let (q1, q2) = (arch.q1, arch.q2);
    let mut keff = vec![0.0; q2 * K2_ROWS * FUSED_LEN];
    let mut beff = p.b2.clone();
    for m in 0..q2 {
        for k in 0..q1 {
            let w1 = &p.w1[k * K1_LEN..(k + 1) * K1_LEN];
            let mut wsum = 0.0;
            for dr in 0..K2_ROWS {
                let w2 = &p.w2[((m * q1 + k) * K2_ROWS + dr) * K2_LEN..][..K2_LEN];
                let out = &mut keff[(m * K2_ROWS + dr) * FUSED_LEN..][..FUSED_LEN];
                for (u, &a) in w2.iter().enumerate() {
                    wsum += a;
                    for (up, &b) in w1.iter().enumerate() {
                        out[u + up] += a * b;
                    }
                }
            }
            beff[m] += p.b1[k] * wsum;
        }
    }
    Fused { keff, beff }
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
struct Trace {
    /// tanh output of CL2, `q2 × rows2 × len2`.
    a2: Vec<f64>,
    pooled: Vec<f64>,
    /// Index into `a2` of each pooled maximum.
    argmax: Vec<usize>,
    f: Vec<f64>,
    y: Vec<f64>,
}

fn check_input(arch: &CnnArchitecture, x: &CycleMatrix) -> Result<()> {
    if x.rows != arch.input_rows || x.n != arch.n {
        return Err(GaitError::ShapeMismatch(format!(
            "input is {}×{}, network expects {}×{}",
            x.rows, x.n, arch.input_rows, arch.n
        )));
    }
    Ok(())
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn dense(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(o, bo)| bo + w[o * x.len()..(o + 1) * x.len()].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

fn run(arch: &CnnArchitecture, p: &CnnParams, fused: &Fused, x: &[f64], with_head: bool) -> Trace {
    let (n, rows2, len2, plen) = (arch.n, arch.cl2_rows(), arch.cl2_len(), arch.pooled_len());
    let mut a2 = vec![0.0; arch.q2 * rows2 * len2];
    for m in 0..arch.q2 {
        for r in 0..rows2 {
            let out = &mut a2[(m * rows2 + r) * len2..][..len2];
            out.iter_mut().for_each(|v| *v = fused.beff[m]);
            for dr in 0..K2_ROWS {
                let xrow = &x[(r + dr) * n..(r + dr + 1) * n];
                let k = &fused.keff[(m * K2_ROWS + dr) * FUSED_LEN..][..FUSED_LEN];
                for (v, &kv) in k.iter().enumerate() {
                    for (o, xi) in out.iter_mut().zip(&xrow[v..v + len2]) {
                        *o += kv * xi;
                    }
                }
            }
            out.iter_mut().for_each(|v| *v = v.tanh());
        }
    }
    let mut pooled = Vec::with_capacity(arch.flat_len());
    let mut argmax = Vec::with_capacity(arch.flat_len());
    for map in 0..arch.q2 * rows2 {
        let base = map * len2;
        for t in 0..plen {
            let i = base + POOL * t;
            let best = (i..i + POOL).fold(i, |b, j| if a2[j] > a2[b] { j } else { b });
            pooled.push(a2[best]);
            argmax.push(best);
        }
    }
    let f: Vec<f64> = dense(&p.w3, &p.b3, &pooled).into_iter().map(f64::tanh).collect();
    let y = if with_head { softmax(&dense(&p.w4, &p.b4, &f)) } else { Vec::new() };
    Trace {
        a2,
        pooled,
        argmax,
        f,
        y,
    }
}

/// `-Σ t_j log y_j` with `y` clamped at 1e-12.
pub fn loss(y: &[f64], target: usize) -> f64 {
    -y[target].max(LOG_EPS).ln()
}

impl CnnModel {
    pub fn new(arch: CnnArchitecture, params: CnnParams, classes: Vec<String>) -> Result<Self> {
        arch.validate()?;
        if classes.len() != arch.classes {
            return Err(GaitError::ShapeMismatch(format!(
                "{} class names for {} output units",
                classes.len(),
                arch.classes
            )));
        }
        let model = CnnModel {
            arch,
            params,
            classes,
            meta: TrainingMeta::default(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Shapes and finiteness of every parameter array.
    pub fn validate(&self) -> Result<()> {
        for ((name, shape), arr) in self.arch.param_shapes().iter().zip(self.params.arrays()) {
            let want: usize = shape.iter().product();
            if arr.len() != want {
                return Err(GaitError::ShapeMismatch(format!(
                    "{name} has {} values, expected {want} for shape {shape:?}",
                    arr.len()
                )));
            }
            if arr.iter().any(|v| !v.is_finite()) {
                return Err(GaitError::Validation(format!("{name} contains non-finite values")));
            }
        }
        Ok(())
    }

    /// Returns the feature vector `f` and the class probabilities `y`.
    pub fn forward(&self, x: &CycleMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
        check_input(&self.arch, x)?;
        let fused = fuse(&self.arch, &self.params);
        let t = run(&self.arch, &self.params, &fused, &x.data, true);
        Ok((t.f, t.y))
    }

    /// FL1 output only.
    pub fn extract_features(&self, x: &CycleMatrix) -> Result<Vec<f64>> {
        check_input(&self.arch, x)?;
        let fused = fuse(&self.arch, &self.params);
        Ok(run(&self.arch, &self.params, &fused, &x.data, false).f)
    }

    pub fn extract_features_batch(&self, xs: &[CycleMatrix]) -> Result<Vec<Vec<f64>>> {
        let fused = fuse(&self.arch, &self.params);
        xs.iter()
            .map(|x| {
                check_input(&self.arch, x)?;
                Ok(run(&self.arch, &self.params, &fused, &x.data, false).f)
            })
            .collect()
    }

    /// Class probabilities for many inputs, reusing the fused kernel.
    pub fn predict_batch(&self, xs: &[&CycleMatrix]) -> Result<Vec<Vec<f64>>> {
        let fused = fuse(&self.arch, &self.params);
        xs.iter()
            .map(|x| {
                check_input(&self.arch, x)?;
                Ok(run(&self.arch, &self.params, &fused, &x.data, true).y)
            })
            .collect()
    }

    /// Summed loss of a batch and its exact gradient with respect to every parameter.
    pub fn gradients(&self, batch: &[(&CycleMatrix, usize)]) -> Result<(f64, CnnParams)> {
        let arch = &self.arch;
        let p = &self.params;
        for (x, label) in batch {
            check_input(arch, x)?;
            if *label >= arch.classes {
                return Err(GaitError::Parameter(format!("label {label} out of range")));
            }
        }
        let fused = fuse(arch, p);
        let (n, rows2, len2) = (arch.n, arch.cl2_rows(), arch.cl2_len());
        let (ff, kk, d) = (arch.features, arch.classes, arch.flat_len());
        let mut g = CnnParams::zeros(arch);
        let mut dkeff = vec![0.0; fused.keff.len()];
        let mut dbeff = vec![0.0; arch.q2];
        let mut dz2 = vec![0.0; arch.q2 * rows2 * len2];
        let mut total = 0.0;

        for (x, label) in batch {
            let t = run(arch, p, &fused, &x.data, true);
            total += loss(&t.y, *label);

            // Softmax with cross-entropy.
            let mut d4 = t.y.clone();
            d4[*label] -= 1.0;
            let mut df = vec![0.0; ff];
            for c in 0..kk {
                g.b4[c] += d4[c];
                let row = &p.w4[c * ff..(c + 1) * ff];
                let grow = &mut g.w4[c * ff..(c + 1) * ff];
                for j in 0..ff {
                    grow[j] += d4[c] * t.f[j];
                    df[j] += d4[c] * row[j];
                }
            }
            let d3: Vec<f64> = df.iter().zip(&t.f).map(|(a, f)| a * (1.0 - f * f)).collect();
            let mut dpool = vec![0.0; d];
            for (o, &delta) in d3.iter().enumerate() {
                g.b3[o] += delta;
                let row = &p.w3[o * d..(o + 1) * d];
                let grow = &mut g.w3[o * d..(o + 1) * d];
                for (gi, pi) in grow.iter_mut().zip(&t.pooled) {
                    *gi += delta * pi;
                }
                for (dp, w) in dpool.iter_mut().zip(row) {
                    *dp += delta * w;
                }
            }
            dz2.iter_mut().for_each(|v| *v = 0.0);
            for (k, &idx) in t.argmax.iter().enumerate() {
                let a = t.a2[idx];
                dz2[idx] = dpool[k] * (1.0 - a * a);
            }
            for m in 0..arch.q2 {
                for r in 0..rows2 {
                    let dz = &dz2[(m * rows2 + r) * len2..][..len2];
                    dbeff[m] += dz.iter().sum::<f64>();
                    for dr in 0..K2_ROWS {
                        let xrow = &x.data[(r + dr) * n..(r + dr + 1) * n];
                        let gk = &mut dkeff[(m * K2_ROWS + dr) * FUSED_LEN..][..FUSED_LEN];
                        for (v, gv) in gk.iter_mut().enumerate() {
                            *gv += dz.iter().zip(&xrow[v..v + len2]).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                }
            }
        }

        // Map the fused-kernel gradient back onto CL1 and CL2.
        let q1 = arch.q1;
        for m in 0..arch.q2 {
            g.b2[m] = dbeff[m];
            for k in 0..q1 {
                let w1 = &p.w1[k * K1_LEN..(k + 1) * K1_LEN];
                let mut w2sum = 0.0;
                for dr in 0..K2_ROWS {
                    let off = ((m * q1 + k) * K2_ROWS + dr) * K2_LEN;
                    let dk = &dkeff[(m * K2_ROWS + dr) * FUSED_LEN..][..FUSED_LEN];
                    for u in 0..K2_LEN {
                        let w2 = p.w2[off + u];
                        w2sum += w2;
                        let mut acc = dbeff[m] * p.b1[k];
                        for up in 0..K1_LEN {
                            acc += dk[u + up] * w1[up];
                            g.w1[k * K1_LEN + up] += dk[u + up] * w2;
                        }
                        g.w2[off + u] = acc;
                    }
                }
                g.b1[k] += dbeff[m] * w2sum;
            }
        }
        Ok((total, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_arch() -> CnnArchitecture {
        CnnArchitecture::new(8, 20, 2, 3, 4, 3).unwrap()
    }

    fn random_input(rows: usize, n: usize, seed: u64) -> CycleMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CycleMatrix::new(rows, n, (0..rows * n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    fn randomized(arch: &CnnArchitecture, seed: u64) -> CnnParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = CnnParams::glorot(arch, seed);
        for a in p.arrays_mut() {
            a.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
        }
        p
    }

    /// Layer-by-layer loops straight from the definitions.
    fn oracle_forward(arch: &CnnArchitecture, p: &CnnParams, x: &CycleMatrix) -> (Vec<f64>, Vec<f64>) {
        let (rows, n, q1, q2) = (arch.input_rows, arch.n, arch.q1, arch.q2);
        let l1 = n - K1_LEN + 1;
        let mut h1 = vec![vec![vec![0.0; l1]; rows]; q1];
        for k in 0..q1 {
            for r in 0..rows {
                for t in 0..l1 {
                    let mut s = p.b1[k];
                    for u in 0..K1_LEN {
                        s += p.w1[k * K1_LEN + u] * x.data[r * n + t + u];
                    }
                    h1[k][r][t] = s;
                }
            }
        }
        let (r2, l2) = (rows - K2_ROWS + 1, l1 - K2_LEN + 1);
        let mut h2 = vec![vec![vec![0.0; l2]; r2]; q2];
        for m in 0..q2 {
            for r in 0..r2 {
                for t in 0..l2 {
                    let mut s = p.b2[m];
                    for k in 0..q1 {
                        for dr in 0..K2_ROWS {
                            for u in 0..K2_LEN {
                                s += p.w2[((m * q1 + k) * K2_ROWS + dr) * K2_LEN + u] * h1[k][r + dr][t + u];
                            }
                        }
                    }
                    h2[m][r][t] = s.tanh();
                }
            }
        }
        let mut flat = Vec::new();
        for m in 0..q2 {
            for r in 0..r2 {
                for t in 0..l2 / 2 {
                    flat.push(h2[m][r][2 * t].max(h2[m][r][2 * t + 1]));
                }
            }
        }
        let f: Vec<f64> = (0..arch.features)
            .map(|o| {
                let s: f64 = (0..flat.len()).map(|i| p.w3[o * flat.len() + i] * flat[i]).sum();
                (s + p.b3[o]).tanh()
            })
            .collect();
        let logits: Vec<f64> = (0..arch.classes)
            .map(|c| p.b4[c] + (0..f.len()).map(|j| p.w4[c * f.len() + j] * f[j]).sum::<f64>())
            .collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        (f, logits.iter().map(|l| l.exp() / z).collect())
    }

    #[test]
    fn default_shapes() {
        let a = CnnArchitecture::new(8, 200, 20, 40, 40, 10).unwrap();
        assert_eq!((a.cl1_len(), a.cl2_rows(), a.cl2_len(), a.pooled_len()), (191, 5, 182, 91));
        assert_eq!(a.flat_len(), 40 * 5 * 91);
        assert!(CnnArchitecture::new(3, 200, 1, 1, 1, 1).is_err());
        assert!(CnnArchitecture::new(8, 200, 0, 1, 1, 1).is_err());
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let arch = CnnArchitecture::new(8, 200, 20, 40, 40, 4).unwrap();
        let model = CnnModel::new(arch, CnnParams::zeros(&arch), (0..4).map(|i| i.to_string()).collect()).unwrap();
        let (_, y) = model.forward(&random_input(8, 200, 1)).unwrap();
        assert!(y.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn forward_matches_loop_oracle() {
        let arch = CnnArchitecture::new(8, 20, 1, 1, 2, 2).unwrap();
        let mut p = CnnParams::zeros(&arch);
        for (i, v) in p.w1.iter_mut().enumerate() {
            *v = 0.1 * (i as f64 - 4.5);
        }
        p.b1[0] = 0.2;
        for (i, v) in p.w2.iter_mut().enumerate() {
            *v = 0.05 * ((i % 7) as f64 - 3.0);
        }
        p.b2[0] = -0.1;
        for (i, v) in p.w3.iter_mut().enumerate() {
            *v = if i % 2 == 0 { 0.3 } else { -0.2 } + 0.01 * i as f64;
        }
        p.b3 = vec![0.05, -0.05];
        p.w4 = vec![1.0, -1.0, -0.5, 2.0];
        p.b4 = vec![0.1, 0.0];
        let model = CnnModel::new(arch, p.clone(), vec!["a".into(), "b".into()]).unwrap();
        let x = random_input(8, 20, 5);
        let (f, y) = model.forward(&x).unwrap();
        let (fo, yo) = oracle_forward(&arch, &p, &x);
        for (a, b) in f.iter().zip(&fo).chain(y.iter().zip(&yo)) {
            assert!((a - b).abs() < 1e-9);
        }

        let arch = tiny_arch();
        let p = randomized(&arch, 9);
        let model = CnnModel::new(arch, p.clone(), vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let (f, y) = model.forward(&x).unwrap();
        let (fo, yo) = oracle_forward(&arch, &p, &x);
        for (a, b) in f.iter().zip(&fo).chain(y.iter().zip(&yo)) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(y.iter().all(|v| *v > 0.0 && *v < 1.0));
        assert_eq!(model.extract_features(&x).unwrap(), f);
    }

    #[test]
    fn loss_values() {
        assert_eq!(loss(&[0.0, 1.0], 1), 0.0);
        assert!((loss(&[0.25; 4], 2) - 4f64.ln()).abs() < 1e-12);
        assert!((loss(&[0.5, 0.5], 0) - 2f64.ln()).abs() < 1e-12);
        assert!((loss(&[1.0, 0.0], 1) - 1e12f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let arch = tiny_arch();
        let model = CnnModel::new(arch, CnnParams::zeros(&arch), vec!["a".into(), "b".into(), "c".into()]).unwrap();
        assert!(matches!(model.forward(&random_input(4, 20, 1)), Err(GaitError::ShapeMismatch(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let arch = tiny_arch();
        let mut model = CnnModel::new(arch, randomized(&arch, 4), vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let xs: Vec<CycleMatrix> = (0..3).map(|s| random_input(8, 20, 100 + s)).collect();
        let batch: Vec<(&CycleMatrix, usize)> = xs.iter().zip([0, 2, 1]).collect();
        let (_, grad) = model.gradients(&batch).unwrap();
        let h = 1e-4;
        for a in 0..8 {
            for i in 0..grad.arrays()[a].len() {
                let orig = model.params.arrays()[a][i];
                model.params.arrays_mut()[a][i] = orig + h;
                let (lp, _) = model.gradients(&batch).unwrap();
                model.params.arrays_mut()[a][i] = orig - h;
                let (lm, _) = model.gradients(&batch).unwrap();
                model.params.arrays_mut()[a][i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let an = grad.arrays()[a][i];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                assert!(rel < 1e-4, "array {a} index {i}: fd {fd} analytic {an}");
            }
        }
    }

    #[test]
    fn duplicated_sample_doubles_gradient() {
        let arch = tiny_arch();
        let model = CnnModel::new(arch, randomized(&arch, 2), vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let x = random_input(8, 20, 3);
        let (l1, g1) = model.gradients(&[(&x, 1)]).unwrap();
        let (l2, g2) = model.gradients(&[(&x, 1), (&x, 1)]).unwrap();
        assert_eq!(l2, 2.0 * l1);
        for (a, b) in g1.arrays().iter().zip(g2.arrays()) {
            for (u, v) in a.iter().zip(b) {
                assert!((2.0 * u - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn zero_input_gives_zero_cl1_weight_gradient() {
        let arch = tiny_arch();
        let mut p = randomized(&arch, 6);
        p.b1.iter_mut().for_each(|v| *v = 0.0);
        p.b2.iter_mut().for_each(|v| *v = 0.0);
        let model = CnnModel::new(arch, p, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let x = CycleMatrix::new(8, 20, vec![0.0; 160]).unwrap();
        let (_, g) = model.gradients(&[(&x, 0)]).unwrap();
        assert!(g.w1.iter().all(|v| *v == 0.0));
    }
}
