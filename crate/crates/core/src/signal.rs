//! Uniform resampling, zero-phase FIR low-pass filtering and Welch spectra.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{GaitError, Result};
use crate::recording::{Recording, Sample};
use crate::spline::CubicSpline;

/// Three equally long channels sampled at `rate_hz`, starting at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSignal {
    pub rate_hz: f64,
    pub t0: f64,
    pub channels: [Vec<f64>; 3],
}

impl UniformSignal {
    pub fn new(rate_hz: f64, t0: f64, channels: [Vec<f64>; 3]) -> Result<Self> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(GaitError::Parameter(format!("rate {rate_hz} must be positive")));
        }
        let n = channels[0].len();
        if channels.iter().any(|c| c.len() != n) {
            return Err(GaitError::ShapeMismatch("channels differ in length".into()));
        }
        Ok(UniformSignal {
            rate_hz,
            t0,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.rate_hz
    }

    /// Copies samples `start..end` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> [Vec<f64>; 3] {
        [
            self.channels[0][start..end].to_vec(),
            self.channels[1][start..end].to_vec(),
            self.channels[2][start..end].to_vec(),
        ]
    }
}

fn grid(t_start: f64, t_end: f64, rate_hz: f64) -> Vec<f64> {
    let count = ((t_end - t_start) * rate_hz + 1e-9).floor() as usize + 1;
    (0..count).map(|k| t_start + k as f64 / rate_hz).collect()
}

fn spline_channels(stream: &[Sample], times: &[f64]) -> Result<[Vec<f64>; 3]> {
    if stream.len() < 4 {
        return Err(GaitError::InsufficientData(format!(
            "resampling needs at least 4 samples, got {}",
            stream.len()
        )));
    }
    let ts: Vec<f64> = stream.iter().map(|s| s.t).collect();
    let mut out: [Vec<f64>; 3] = Default::default();
    for (axis, slot) in out.iter_mut().enumerate() {
        let ys: Vec<f64> = stream.iter().map(|s| s.xyz[axis]).collect();
        *slot = CubicSpline::new(&ts, &ys)?.eval_sorted(times);
    }
    Ok(out)
}

/// Cubic-spline resampling of one sensor stream at exactly `rate_hz`
/// over `[t_first, t_last]`.
pub fn resample_uniform(stream: &[Sample], rate_hz: f64) -> Result<UniformSignal> {
    if !(rate_hz > 0.0) {
        return Err(GaitError::Parameter(format!("rate {rate_hz} must be positive")));
    }
    if stream.len() < 4 {
        return Err(GaitError::InsufficientData(format!(
            "resampling needs at least 4 samples, got {}",
            stream.len()
        )));
    }
    let times = grid(stream[0].t, stream[stream.len() - 1].t, rate_hz);
    let channels = spline_channels(stream, &times)?;
    UniformSignal::new(rate_hz, stream[0].t, channels)
}

/// Resamples both streams onto one shared grid starting at the later of the
/// two first timestamps and ending at the earlier of the two last ones.
pub fn resample_recording(rec: &Recording, rate_hz: f64) -> Result<(UniformSignal, UniformSignal)> {
    if rec.accel.len() < 4 || rec.gyro.len() < 4 {
        return Err(GaitError::InsufficientData(
            "each stream needs at least 4 samples".into(),
        ));
    }
    let start = rec.accel[0].t.max(rec.gyro[0].t);
    let end = rec.accel[rec.accel.len() - 1]
        .t
        .min(rec.gyro[rec.gyro.len() - 1].t);
    if end <= start {
        return Err(GaitError::InsufficientData(
            "accelerometer and gyroscope streams do not overlap".into(),
        ));
    }
    let times = grid(start, end, rate_hz);
    let accel = UniformSignal::new(rate_hz, start, spline_channels(&rec.accel, &times)?)?;
    let gyro = UniformSignal::new(rate_hz, start, spline_channels(&rec.gyro, &times)?)?;
    Ok((accel, gyro))
}

/// Windowed-sinc low-pass taps (Hamming window), normalized to unit DC gain.
pub fn design_lowpass(cutoff_hz: f64, rate_hz: f64, taps: usize) -> Result<Vec<f64>> {
    if !(cutoff_hz > 0.0 && cutoff_hz < rate_hz / 2.0) {
        return Err(GaitError::Parameter(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
            rate_hz / 2.0
        )));
    }
    if taps < 3 || taps.is_multiple_of(2) {
        return Err(GaitError::Parameter(format!(
            "FIR length must be odd and at least 3, got {taps}"
        )));
    }
    let fc = cutoff_hz / rate_hz;
    let mid = (taps - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let x = n as f64 - mid;
            let sinc = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            let w = 0.54 - 0.46 * (2.0 * PI * n as f64 / (taps - 1) as f64).cos();
            sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    Ok(h)
}

/// Default FIR length: 101 taps at 200 Hz, scaled with the rate.
pub fn default_taps(rate_hz: f64, seconds: f64) -> usize {
    let n = (seconds * rate_hz).round() as usize;
    (n | 1).max(3)
}

fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut k = i.rem_euclid(period);
    if k >= n as isize {
        k = period - k;
    }
    k as usize
}

/// Applies a symmetric FIR with its group delay removed; edges are padded by
/// reflection about the end samples.
pub fn filter_zero_phase(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let half = (taps.len() / 2) as isize;
    let padded: Vec<f64> = (-half..n as isize + half).map(|i| x[reflect(i, n)]).collect();
    (0..n)
        .map(|i| {
            padded[i..i + taps.len()]
                .iter()
                .zip(taps)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Zero-phase low-pass of every channel at `cutoff_hz`, 101 taps at 200 Hz.
pub fn lowpass_fir(sig: &UniformSignal, cutoff_hz: f64) -> Result<UniformSignal> {
    let taps = design_lowpass(cutoff_hz, sig.rate_hz, default_taps(sig.rate_hz, 0.505))?;
    let channels = [
        filter_zero_phase(&sig.channels[0], &taps),
        filter_zero_phase(&sig.channels[1], &taps),
        filter_zero_phase(&sig.channels[2], &taps),
    ];
    UniformSignal::new(sig.rate_hz, sig.t0, channels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    /// Power spectral density in dB per channel.
    pub power_db: [Vec<f64>; 3],
}

impl Spectrum {
    /// Linear-scale density of one channel.
    pub fn linear(&self, channel: usize) -> Vec<f64> {
        self.power_db[channel]
            .iter()
            .map(|db| 10f64.powf(db / 10.0))
            .collect()
    }

    pub fn bin_width(&self) -> f64 {
        self.freqs_hz.get(1).copied().unwrap_or(0.0)
    }
}

/// One-sided Welch PSD with Hann windows (no detrending), reported in dB.
pub fn welch_psd(sig: &UniformSignal, window_s: f64, overlap: f64) -> Result<Spectrum> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(GaitError::Parameter(format!("overlap {overlap} must be in [0, 1)")));
    }
    let seg = (window_s * sig.rate_hz).round() as usize;
    if seg < 2 {
        return Err(GaitError::Parameter(format!("window of {seg} samples is too short")));
    }
    if sig.len() < seg {
        return Err(GaitError::InsufficientData(format!(
            "signal of {} samples is shorter than one {seg}-sample window",
            sig.len()
        )));
    }
    let step = (seg - (overlap * seg as f64).round() as usize).max(1);
    // Periodic Hann.
    let window: Vec<f64> = (0..seg)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / seg as f64).cos())
        .collect();
    let w_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let bins = seg / 2 + 1;
    let starts: Vec<usize> = (0..=(sig.len() - seg) / step).map(|k| k * step).collect();

    let mut power_db: [Vec<f64>; 3] = Default::default();
    let mut buf = vec![Complex::new(0.0, 0.0); seg];
    for (ch, out) in power_db.iter_mut().enumerate() {
        let x = &sig.channels[ch];
        let mut acc = vec![0.0; bins];
        for &s in &starts {
            for (b, (v, w)) in buf.iter_mut().zip(x[s..s + seg].iter().zip(&window)) {
                *b = Complex::new(v * w, 0.0);
            }
            fft.process(&mut buf);
            for (a, c) in acc.iter_mut().zip(&buf) {
                *a += c.norm_sqr();
            }
        }
        let scale = 1.0 / (sig.rate_hz * w_energy * starts.len() as f64);
        *out = acc
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let one_sided = if k == 0 || (seg.is_multiple_of(2) && k == seg / 2) { 1.0 } else { 2.0 };
                10.0 * (p * scale * one_sided).max(1e-300).log10()
            })
            .collect();
    }
    let freqs_hz = (0..bins).map(|k| k as f64 * sig.rate_hz / seg as f64).collect();
    Ok(Spectrum { freqs_hz, power_db })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn tone(freq: f64, rate: f64, secs: f64) -> Vec<f64> {
        let n = (rate * secs) as usize;
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / rate).sin()).collect()
    }

    fn uniform(ch: Vec<f64>, rate: f64) -> UniformSignal {
        UniformSignal::new(rate, 0.0, [ch.clone(), ch.clone(), ch]).unwrap()
    }

    fn mid_amplitude(x: &[f64]) -> f64 {
        let n = x.len();
        x[n / 4..3 * n / 4].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn stream(ts: &[f64], f: impl Fn(f64) -> f64) -> Vec<Sample> {
        ts.iter().map(|&t| Sample::new(t, f(t), 2.0 * f(t), -f(t))).collect()
    }

    fn jittered_times(rate: f64, secs: f64, seed: u64) -> Vec<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (rate * secs) as usize;
        let mut ts: Vec<f64> = (0..n)
            .map(|k| (k as f64 + rng.random_range(-0.2..0.2)) / rate)
            .collect();
        ts[0] = 0.0;
        ts
    }

    #[test]
    fn resample_identity_on_uniform_input() {
        let ts: Vec<f64> = (0..400).map(|k| k as f64 / 200.0).collect();
        let s = stream(&ts, |t| (3.0 * t).sin() + t * t);
        let u = resample_uniform(&s, 200.0).unwrap();
        assert_eq!(u.len(), 400);
        for (k, v) in u.channels[0].iter().enumerate() {
            assert!((v - s[k].xyz[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_linear_ramp() {
        let ts = jittered_times(150.0, 3.0, 7);
        let s = stream(&ts, |t| 3.0 * t - 1.0);
        let u = resample_uniform(&s, 200.0).unwrap();
        for (k, v) in u.channels[0].iter().enumerate() {
            let t = u.time_of(k);
            assert!((v - (3.0 * t - 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_sine_analytic() {
        let ts = jittered_times(150.0, 4.0, 11);
        let f = |t: f64| (2.0 * PI * 3.0 * t).sin();
        let s = stream(&ts, f);
        let u = resample_uniform(&s, 200.0).unwrap();
        let err = u.channels[0]
            .iter()
            .enumerate()
            .map(|(k, v)| (v - f(u.time_of(k))).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "max error {err}");
        // Grid ends at the last knot or just before it.
        let last = u.time_of(u.len() - 1);
        assert!(last <= ts[ts.len() - 1] + 1e-12 && last > ts[ts.len() - 1] - 1.0 / 200.0);
    }

    #[test]
    fn resample_needs_four_samples() {
        let s = stream(&[0.0, 0.01, 0.02], |t| t);
        assert!(matches!(resample_uniform(&s, 200.0), Err(GaitError::InsufficientData(_))));
    }

    #[test]
    fn shared_grid_starts_at_later_stream() {
        let a = stream(&jittered_times(150.0, 2.0, 1), |t| t);
        let mut g = stream(&jittered_times(150.0, 2.0, 2), |t| t);
        for s in &mut g {
            s.t += 0.013;
        }
        let rec = Recording {
            subject_id: "s".into(),
            session_id: "x".into(),
            accel: a,
            gyro: g,
        };
        let (ua, ug) = resample_recording(&rec, 200.0).unwrap();
        assert_eq!(ua.len(), ug.len());
        assert!((ua.t0 - 0.013).abs() < 1e-12);
        // Gyro values were built before the shift, so value = t - 0.013.
        assert!(ug.channels[0][0].abs() < 1e-9);
        assert!((ua.channels[0][0] - 0.013).abs() < 1e-9);
    }

    #[test]
    fn fir_dc_gain_and_parameters() {
        let c = uniform(vec![4.2; 300], 200.0);
        let out = lowpass_fir(&c, 40.0).unwrap();
        for v in &out.channels[1] {
            assert!((v - 4.2).abs() < 1e-12);
        }
        assert!(matches!(lowpass_fir(&c, 100.0), Err(GaitError::Parameter(_))));
        assert_eq!(default_taps(200.0, 0.505), 101);
    }

    #[test]
    fn fir_passband_and_stopband() {
        let pass = lowpass_fir(&uniform(tone(5.0, 200.0, 4.0), 200.0), 40.0).unwrap();
        let db = 20.0 * mid_amplitude(&pass.channels[0]).log10();
        assert!(db.abs() < 0.1, "5 Hz change {db} dB");

        let stop = lowpass_fir(&uniform(tone(80.0, 200.0, 4.0), 200.0), 40.0).unwrap();
        let db = 20.0 * mid_amplitude(&stop.channels[0]).log10();
        assert!(db <= -40.0, "80 Hz attenuation only {db} dB");

        // Design target: >= 40 dB above 1.25x cutoff.
        let edge = lowpass_fir(&uniform(tone(50.0, 200.0, 4.0), 200.0), 40.0).unwrap();
        assert!(20.0 * mid_amplitude(&edge.channels[0]).log10() <= -40.0);
    }

    #[test]
    fn fir_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let u: Vec<f64> = (0..500).map(|_| nd.sample(&mut rng)).collect();
        let v: Vec<f64> = (0..500).map(|_| nd.sample(&mut rng)).collect();
        let taps = design_lowpass(40.0, 200.0, 101).unwrap();
        let (a, b) = (1.7, -0.4);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = filter_zero_phase(&mix, &taps);
        let fu = filter_zero_phase(&u, &taps);
        let fv = filter_zero_phase(&v, &taps);
        for i in 0..500 {
            assert!((lhs[i] - (a * fu[i] + b * fv[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn fir_short_signal_reflects_repeatedly() {
        let x = [1.0, 2.0, 3.0];
        let taps = design_lowpass(40.0, 200.0, 101).unwrap();
        let y = filter_zero_phase(&x, &taps);
        assert_eq!(y.len(), 3);
        assert!(y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn welch_peak_at_tone() {
        let sig = uniform(tone(5.0, 200.0, 10.0), 200.0);
        let spec = welch_psd(&sig, 1.0, 0.5).unwrap();
        let (peak, _) = spec.power_db[0]
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
        assert!((spec.freqs_hz[peak] - 5.0).abs() < spec.bin_width() / 2.0);
        assert!(spec.freqs_hz.windows(2).all(|w| w[1] > w[0]));
        assert!(*spec.freqs_hz.last().unwrap() <= 100.0);
    }

    #[test]
    fn welch_white_noise_flat_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let nd = Normal::new(0.0, 1.5).unwrap();
        let x: Vec<f64> = (0..200 * 60).map(|_| nd.sample(&mut rng)).collect();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let spec = welch_psd(&uniform(x, 200.0), 1.0, 0.5).unwrap();
        let lin = spec.linear(0);
        let band: Vec<f64> = spec
            .freqs_hz
            .iter()
            .zip(&lin)
            .filter(|(f, _)| (1.0..=90.0).contains(*f))
            .map(|(_, p)| *p)
            .collect();
        let mean = band.iter().sum::<f64>() / band.len() as f64;
        for p in &band {
            assert!((10.0 * (p / mean).log10()).abs() <= 3.0);
        }
        let total: f64 = lin.iter().sum::<f64>() * spec.bin_width();
        assert!((total - var).abs() / var < 0.10, "total {total} var {var}");
    }

    #[test]
    fn welch_too_short() {
        let sig = uniform(vec![0.0; 150], 200.0);
        assert!(matches!(welch_psd(&sig, 1.0, 0.5), Err(GaitError::InsufficientData(_))));
    }
}
