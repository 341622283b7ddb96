//! Deterministic synthetic gait with known cycle boundaries and device pose.
//!
//! A walk is a sum of three harmonics of the stride frequency per channel,
//! expressed in a body frame (x forward, y lateral, z up), plus a short dip of
//! the vertical acceleration at every heel strike. The body signal and its
//! noise are rotated into the device frame and sampled on jittered
//! timestamps.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{GaitError, Result};
use crate::linalg::{is_rotation, mat_vec, quat_to_matrix, Mat3};
use crate::osvm::{from_dual, offset_from_gradient, DualSolution, OneClassSvm};
use crate::recording::{Recording, Sample};

pub const GRAVITY: f64 = 9.81;
pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub amplitude: f64,
    pub phase: f64,
}

/// Fundamental plus two overtones.
pub type Harmonics = [Harmonic; 3];

fn harmonic_sum(h: &Harmonics, theta: f64) -> f64 {
    h.iter()
        .enumerate()
        .map(|(k, c)| c.amplitude * ((k + 1) as f64 * theta + c.phase).cos())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub seed: u64,
    pub cycle_period_s: f64,
    /// Body-frame forward, lateral and vertical acceleration (m/s²).
    pub accel: [Harmonics; 3],
    /// Angular rate about the body axes (rad/s).
    pub gyro: [Harmonics; 3],
    pub heel_dip_depth: f64,
    /// Standard deviation of the Gaussian heel-strike dip in seconds.
    pub heel_dip_width_s: f64,
    pub gravity: f64,
    pub noise_std: f64,
    pub gyro_noise_std: f64,
}

fn draw(rng: &mut ChaCha8Rng, ranges: [(f64, f64); 3]) -> Harmonics {
    ranges.map(|(lo, hi)| Harmonic {
        amplitude: rng.random_range(lo..hi),
        phase: rng.random_range(-PI..PI),
    })
}

pub fn generate_subject(seed: u64) -> SubjectProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cycle_period_s = rng.random_range(0.9..1.4);
    let forward = draw(&mut rng, [(0.8, 1.6), (0.3, 0.9), (0.1, 0.5)]);
    let lateral = draw(&mut rng, [(0.2, 0.6), (0.1, 0.3), (0.05, 0.2)]);
    let mut vertical = draw(&mut rng, [(1.5, 2.5), (0.1, 0.4), (0.05, 0.3)]);
    // Every vertical harmonic bottoms out near the heel strike, so the
    // stride has a single magnitude trough.
    for (h, spread) in vertical.iter_mut().zip([0.25, 0.5, 0.5]) {
        h.phase = PI + rng.random_range(-spread..spread);
    }
    let gyro = [
        draw(&mut rng, [(0.3, 1.5), (0.1, 0.6), (0.05, 0.3)]),
        draw(&mut rng, [(0.3, 1.5), (0.1, 0.6), (0.05, 0.3)]),
        draw(&mut rng, [(0.3, 1.5), (0.1, 0.6), (0.05, 0.3)]),
    ];
    SubjectProfile {
        subject_id: format!("s{seed:03}"),
        seed,
        cycle_period_s,
        accel: [forward, lateral, vertical],
        gyro,
        heel_dip_depth: rng.random_range(1.5..2.5),
        heel_dip_width_s: rng.random_range(0.02..0.035),
        gravity: GRAVITY,
        noise_std: rng.random_range(0.05..0.2),
        gyro_noise_std: rng.random_range(0.01..0.04),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkOptions {
    pub duration_s: f64,
    /// Body to device rotation.
    pub rotation: Mat3,
    /// Timestamp jitter as a fraction of the nominal interval (uniform ±).
    pub timing_jitter: f64,
    pub rate_hz: f64,
    /// Relative standard deviation of the stride period and amplitude.
    pub stride_jitter: f64,
    /// Overrides the profile noise when set.
    pub noise_std: Option<f64>,
    pub seed: u64,
    pub session_id: String,
}

impl Default for WalkOptions {
    fn default() -> Self {
        WalkOptions {
            duration_s: 60.0,
            rotation: IDENTITY,
            timing_jitter: 0.2,
            rate_hz: 150.0,
            stride_jitter: 0.02,
            noise_std: None,
            seed: 0,
            session_id: "w0".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub subject_id: String,
    /// Heel-strike times inside the recording.
    pub cycle_start_times: Vec<f64>,
    pub device_rotation: Mat3,
}

struct Strides {
    starts: Vec<f64>,
    gains: Vec<f64>,
}

impl Strides {
    /// Stride index, phase in [0, 2π), interpolated gain and distance to
    /// the nearest heel strike.
    fn locate(&self, t: f64) -> (f64, f64, f64) {
        let k = self.starts.partition_point(|&c| c <= t) - 1;
        let (c0, c1) = (self.starts[k], self.starts[k + 1]);
        let u = (t - c0) / (c1 - c0);
        let gain = self.gains[k] + u * (self.gains[k + 1] - self.gains[k]);
        (2.0 * PI * u, gain, (t - c0).min(c1 - t))
    }
}

fn body_sample(p: &SubjectProfile, strides: &Strides, t: f64) -> ([f64; 3], [f64; 3]) {
    let (theta, gain, d) = strides.locate(t);
    // The dip is offset by its stride mean so the vertical channel averages to gravity.
    let dip_mean = p.heel_dip_depth * p.heel_dip_width_s * (2.0 * PI).sqrt() / p.cycle_period_s;
    let dip = p.heel_dip_depth * (-0.5 * (d / p.heel_dip_width_s).powi(2)).exp() - dip_mean;
    let a = [
        gain * harmonic_sum(&p.accel[0], theta),
        gain * harmonic_sum(&p.accel[1], theta),
        p.gravity + gain * harmonic_sum(&p.accel[2], theta) - dip,
    ];
    let g = [0, 1, 2].map(|i| gain * harmonic_sum(&p.gyro[i], theta));
    (a, g)
}

fn timestamps(rng: &mut ChaCha8Rng, duration: f64, rate: f64, jitter: f64) -> Vec<f64> {
    let dt = 1.0 / rate;
    let n = (duration * rate).floor() as usize + 1;
    let mut ts = Vec::with_capacity(n);
    ts.push(0.0);
    for k in 1..n {
        let j = if jitter > 0.0 { rng.random_range(-jitter..jitter) } else { 0.0 };
        ts.push((k as f64 + j) * dt);
    }
    ts
}

/// Generates one walk of a subject and the heel-strike times.
pub fn generate_walk(profile: &SubjectProfile, opts: &WalkOptions) -> Result<(Recording, GroundTruth)> {
    if !(opts.duration_s >= 5.0) {
        return Err(GaitError::Parameter(format!(
            "walk duration {} s is below 5 s",
            opts.duration_s
        )));
    }
    if !is_rotation(&opts.rotation, 1e-9) {
        return Err(GaitError::Parameter("device rotation is not orthonormal with det +1".into()));
    }
    if !(0.0..0.5).contains(&opts.timing_jitter) {
        return Err(GaitError::Parameter(format!(
            "timing jitter {} outside [0, 0.5)",
            opts.timing_jitter
        )));
    }
    if !(opts.rate_hz > 0.0) || !(0.0..0.2).contains(&opts.stride_jitter) {
        return Err(GaitError::Parameter("rate must be positive and stride jitter in [0, 0.2)".into()));
    }
    let noise_std = opts.noise_std.unwrap_or(profile.noise_std);
    if !(noise_std >= 0.0) {
        return Err(GaitError::Parameter(format!("noise std {noise_std} is negative")));
    }

    let mut stride_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    stride_rng.set_stream(1);
    let period = profile.cycle_period_s;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut starts = vec![-stride_rng.random_range(0.0..period) - period];
    let mut gains = vec![1.0];
    while *starts.last().unwrap() < opts.duration_s + period {
        let z: f64 = std_normal.sample(&mut stride_rng);
        let scale = (1.0 + opts.stride_jitter * z).clamp(0.8, 1.25);
        starts.push(starts.last().unwrap() + period * scale);
        let z: f64 = std_normal.sample(&mut stride_rng);
        gains.push((1.0 + 1.5 * opts.stride_jitter * z).clamp(0.7, 1.3));
    }
    let strides = Strides { starts, gains };

    let sample_stream = |stream: u64, gyro: bool, std: f64| -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(stream);
        let ts = timestamps(&mut rng, opts.duration_s, opts.rate_hz, opts.timing_jitter);
        ts.into_iter()
            .map(|t| {
                let (a, g) = body_sample(profile, &strides, t);
                let mut v = if gyro { g } else { a };
                if std > 0.0 {
                    for x in v.iter_mut() {
                        let z: f64 = std_normal.sample(&mut rng);
                        *x += std * z;
                    }
                }
                let d = mat_vec(&opts.rotation, &v);
                Sample::new(t, d[0], d[1], d[2])
            })
            .collect()
    };
    let accel = sample_stream(2, false, noise_std);
    let gyro_std = if noise_std > 0.0 { profile.gyro_noise_std } else { 0.0 };
    let gyro = sample_stream(3, true, gyro_std);

    let rec = Recording {
        subject_id: profile.subject_id.clone(),
        session_id: opts.session_id.clone(),
        accel,
        gyro,
    };
    rec.validate()?;
    let truth = GroundTruth {
        subject_id: profile.subject_id.clone(),
        cycle_start_times: strides
            .starts
            .iter()
            .copied()
            .filter(|&c| (0.0..=opts.duration_s).contains(&c))
            .collect(),
        device_rotation: opts.rotation,
    };
    Ok((rec, truth))
}

/// Uniformly distributed rotation from a normalized Gaussian quaternion.
pub fn random_rotation<R: Rng>(rng: &mut R) -> Mat3 {
    let nd = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let q: [f64; 4] = [0; 4].map(|_| nd.sample(rng));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-6 {
            return quat_to_matrix(q.map(|v| v / n));
        }
    }
}

/// Euclidean projection onto `{0 ≤ α ≤ c, Σα = 1}` by bisection on the shift.
fn project_capped_simplex(y: &[f64], c: f64) -> Vec<f64> {
    let total = |tau: f64| y.iter().map(|v| (v - tau).clamp(0.0, c)).sum::<f64>();
    let mut lo = y.iter().cloned().fold(f64::INFINITY, f64::min) - c - 1.0;
    let mut hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    y.iter().map(|v| (v - tau).clamp(0.0, c)).collect()
}

/// Solves the one-class dual by projected gradient descent, stopping at a
/// maximal KKT violation of 1e-8. Meant for a handful of points.
pub fn brute_force_dual(k: &[Vec<f64>], nu: f64) -> Result<DualSolution> {
    let l = k.len();
    if l == 0 || !(nu > 0.0 && nu <= 1.0) {
        return Err(GaitError::Parameter("need at least one point and ν in (0, 1]".into()));
    }
    let c = 1.0 / (nu * l as f64);
    // Gershgorin bound on the largest eigenvalue.
    let lmax = k.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lmax.max(1e-12);
    let grad_of = |a: &[f64]| -> Vec<f64> { k.iter().map(|r| r.iter().zip(a).map(|(x, y)| x * y).sum()).collect() };
    let mut alpha = project_capped_simplex(&vec![1.0 / l as f64; l], c);
    let max_iter = 5_000_000;
    for it in 0..=max_iter {
        let grad = grad_of(&alpha);
        let snapped: Vec<f64> = alpha
            .iter()
            .map(|&a| {
                if a < 1e-13 {
                    0.0
                } else if a > c - 1e-13 {
                    c
                } else {
                    a
                }
            })
            .collect();
        let up = snapped.iter().zip(&grad).filter(|(a, _)| **a < c).map(|(_, g)| *g).fold(f64::INFINITY, f64::min);
        let down = snapped.iter().zip(&grad).filter(|(a, _)| **a > 0.0).map(|(_, g)| *g).fold(f64::NEG_INFINITY, f64::max);
        let violation = if up.is_finite() && down.is_finite() { (down - up).max(0.0) } else { 0.0 };
        if violation < 1e-8 {
            let grad = grad_of(&snapped);
            return Ok(DualSolution {
                b: offset_from_gradient(&snapped, &grad, c),
                alpha: snapped,
                iterations: it,
                violation,
            });
        }
        let y: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        alpha = project_capped_simplex(&y, c);
    }
    Err(GaitError::Convergence {
        iterations: max_iter,
        violation: f64::NAN,
    })
}

/// Reference one-class SVM for tiny training sets.
pub fn brute_force_osvm(train: &[Vec<f64>], nu: f64, gamma: f64) -> Result<OneClassSvm> {
    let k = crate::osvm::kernel_matrix(train, gamma);
    let sol = brute_force_dual(&k, nu)?;
    Ok(from_dual(train, &sol, nu, gamma))
}
