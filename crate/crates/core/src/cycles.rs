//! Walking-cycle segmentation with an adaptive accelerometer-magnitude template.

use crate::error::{GaitError, Result};
use crate::signal::{design_lowpass, filter_zero_phase, UniformSignal};

/// One-second magnitude snippet used for template matching.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub values: Vec<f64>,
}

/// One walking cycle in device coordinates; `accel[axis][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitCycle {
    pub accel: [Vec<f64>; 3],
    pub gyro: [Vec<f64>; 3],
    pub start_index: usize,
    pub end_index: usize,
}

impl GaitCycle {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    pub phi_th: f64,
    /// Cutoff of the smoothing filter used to seed the template.
    pub cycle_cutoff_hz: f64,
    pub alpha: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            phi_th: 0.3,
            cycle_cutoff_hz: 3.0,
            alpha: 0.9,
        }
    }
}

/// Intermediate products of [`segment_cycles`], kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub cycles: Vec<GaitCycle>,
    pub a_mag: Vec<f64>,
    /// Match metric of the initial template against the whole signal.
    pub phi: Vec<f64>,
    /// Minima of `phi` found with the initial template.
    pub minima: Vec<usize>,
    /// Every cycle boundary found by the adaptive pass.
    pub boundaries: Vec<usize>,
}

pub fn magnitude(channels: &[Vec<f64>; 3]) -> Vec<f64> {
    channels[0]
        .iter()
        .zip(&channels[1])
        .zip(&channels[2])
        .map(|((x, y), z)| (x * x + y * y + z * z).sqrt())
        .collect()
}

/// One minus the Pearson correlation of `u` and `v`, in `[0, 2]`.
pub fn corr_dist(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(GaitError::ShapeMismatch(format!(
            "correlation of sequences of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    if u.len() < 2 {
        return Err(GaitError::InsufficientData("correlation needs at least 2 samples".into()));
    }
    corr_dist_unchecked(u, v)
        .ok_or_else(|| GaitError::DegenerateInput("constant sequence has no correlation".into()))
}

fn corr_dist_unchecked(u: &[f64], v: &[f64]) -> Option<f64> {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (da, db) = (a - mu, b - mv);
        suv += da * db;
        suu += da * da;
        svv += db * db;
    }
    let denom = (suu * svv).sqrt();
    if !(denom > 0.0) || suu <= 1e-24 * n || svv <= 1e-24 * n {
        return None;
    }
    Some((1.0 - suv / denom).clamp(0.0, 2.0))
}

/// `phi[i] = corr_dist(T, a_mag[i..i+N_s])`; constant windows score 2.
pub fn match_metric(a_mag: &[f64], template: &Template) -> Result<Vec<f64>> {
    let ns = template.values.len();
    if ns < 2 {
        return Err(GaitError::Parameter("template needs at least 2 samples".into()));
    }
    if a_mag.len() < ns {
        return Err(GaitError::InsufficientData(format!(
            "signal of {} samples is shorter than the {ns}-sample template",
            a_mag.len()
        )));
    }
    Ok(metric_range(a_mag, template, 0, a_mag.len() - ns))
}

fn metric_range(a_mag: &[f64], template: &Template, from: usize, to_inclusive: usize) -> Vec<f64> {
    let ns = template.values.len();
    (from..=to_inclusive)
        .map(|i| corr_dist_unchecked(&template.values, &a_mag[i..i + ns]).unwrap_or(2.0))
        .collect()
}

/// Sub-threshold regions of `phi`: `(start, end_exclusive, argmin)`, with
/// regions closer than `merge_gap` samples merged.
fn regions(phi: &[f64], phi_th: f64, merge_gap: usize) -> Vec<(usize, usize, usize)> {
    let mut out: Vec<(usize, usize, usize)> = Vec::new();
    let mut i = 0;
    while i < phi.len() {
        if phi[i] >= phi_th {
            i += 1;
            continue;
        }
        let start = i;
        while i < phi.len() && phi[i] < phi_th {
            i += 1;
        }
        match out.last_mut() {
            Some(last) if start - last.1 < merge_gap => last.1 = i,
            _ => out.push((start, i, start)),
        }
    }
    for r in &mut out {
        r.2 = argmin(&phi[r.0..r.1]) + r.0;
    }
    // A region cut off by the end of `phi` whose lowest value is the last
    // sample has its true minimum beyond the data.
    if phi.len() > 1 && out.last().is_some_and(|r| r.2 == phi.len() - 1) {
        out.pop();
    }
    out
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// One index per sub-threshold region of `phi` (its argmin); regions closer
/// than `0.25 * n_s` samples are merged.
pub fn find_cycle_starts(phi: &[f64], phi_th: f64, n_s: usize) -> Vec<usize> {
    regions(phi, phi_th, merge_gap(n_s)).into_iter().map(|r| r.2).collect()
}

fn merge_gap(n_s: usize) -> usize {
    ((0.25 * n_s as f64).round() as usize).max(1)
}

/// `alpha * t + (1 - alpha) * t_prime`.
pub fn update_template(t: &Template, t_prime: &Template, alpha: f64) -> Result<Template> {
    if t.values.len() != t_prime.values.len() {
        return Err(GaitError::ShapeMismatch(format!(
            "templates of length {} and {}",
            t.values.len(),
            t_prime.values.len()
        )));
    }
    Ok(Template {
        values: t
            .values
            .iter()
            .zip(&t_prime.values)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect(),
    })
}

/// Seeds the template from the first trough of the smoothed magnitude.
///
/// Returns the template (the raw magnitude window of `N_s` samples centred at
/// the trough) and the trough index.
pub fn initial_template(a_mag: &[f64], rate_hz: f64) -> Result<(Template, usize)> {
    initial_template_with(a_mag, rate_hz, SegmentParams::default().cycle_cutoff_hz)
}

fn initial_template_with(a_mag: &[f64], rate_hz: f64, cutoff_hz: f64) -> Result<(Template, usize)> {
    let ns = rate_hz.round() as usize;
    let three_s = (3.0 * rate_hz).round() as usize;
    if a_mag.len() < three_s {
        return Err(GaitError::InsufficientData(format!(
            "template search needs 3 s of data, got {:.2} s",
            a_mag.len() as f64 / rate_hz
        )));
    }
    let taps = design_lowpass(cutoff_hz, rate_hz, (ns | 1).max(3))?;
    let smooth = filter_zero_phase(a_mag, &taps);
    let half = ns / 2;
    let refine = ((0.25 * rate_hz).round() as usize).max(1);
    for i in 1..three_s.min(smooth.len() - 1) {
        if !(smooth[i] < smooth[i - 1] && smooth[i] <= smooth[i + 1]) {
            continue;
        }
        let lo = i.saturating_sub(refine);
        let hi = (i + refine + 1).min(a_mag.len());
        let star = lo + argmin(&a_mag[lo..hi]);
        if star >= half && star - half + ns <= a_mag.len() {
            let values = a_mag[star - half..star - half + ns].to_vec();
            return Ok((Template { values }, star));
        }
    }
    Err(GaitError::NoGaitDetected(
        "no local minimum of the smoothed magnitude in the first 3 s".into(),
    ))
}

/// Full iterative segmentation of aligned accelerometer and gyroscope signals.
///
/// Cycles run between consecutive template matches starting at the second
/// minimum; cycles shorter than `0.25 N_s` or longer than `2.5 N_s` samples
/// are dropped.
pub fn segment_cycles(
    accel: &UniformSignal,
    gyro: &UniformSignal,
    params: &SegmentParams,
) -> Result<Segmentation> {
    if accel.len() != gyro.len() {
        return Err(GaitError::ShapeMismatch(format!(
            "accelerometer has {} samples, gyroscope {}",
            accel.len(),
            gyro.len()
        )));
    }
    if !(0.0..=1.0).contains(&params.alpha) {
        return Err(GaitError::Parameter(format!("alpha {} outside [0, 1]", params.alpha)));
    }
    let rate = accel.rate_hz;
    let ns = rate.round() as usize;
    if (accel.len() as f64) < 3.0 * rate {
        return Err(GaitError::NoCycles(format!(
            "recording of {:.2} s is shorter than 3 s",
            accel.duration_s()
        )));
    }
    let a_mag = magnitude(&accel.channels);
    let (mut template, _) = initial_template_with(&a_mag, rate, params.cycle_cutoff_hz)?;
    let phi = match_metric(&a_mag, &template)?;
    let gap = merge_gap(ns);
    let global = regions(&phi, params.phi_th, gap);
    let minima: Vec<usize> = global.iter().map(|r| r.2).collect();
    if minima.len() < 3 {
        return Err(GaitError::NoCycles(format!(
            "only {} template matches below threshold {}",
            minima.len(),
            params.phi_th
        )));
    }

    let last_start = a_mag.len() - ns;
    let min_len = (0.25 * ns as f64).ceil() as usize;
    let max_len = (2.5 * ns as f64).floor() as usize;
    let mut boundaries = vec![minima[1]];
    let mut cycles = Vec::new();
    let mut cur = minima[1];
    loop {
        let fresh = Template {
            values: a_mag[cur..cur + ns].to_vec(),
        };
        template = update_template(&template, &fresh, params.alpha)?;

        let hi = (cur + max_len).min(last_start);
        let next = if hi > cur {
            let local = metric_range(&a_mag, &template, cur, hi);
            regions(&local, params.phi_th, gap)
                .into_iter()
                .map(|r| (r.0 + cur, r.2 + cur))
                .find(|&(start, m)| start > cur && m >= cur + gap)
                .map(|(_, m)| m)
        } else {
            None
        };
        let next = match next {
            Some(m) => m,
            None => match minima.iter().find(|&&m| m >= cur + gap) {
                // Lost track: jump to the next global match without emitting.
                Some(&m) => {
                    cur = m;
                    boundaries.push(m);
                    continue;
                }
                None => break,
            },
        };
        let len = next - cur;
        if (min_len..=max_len).contains(&len) {
            cycles.push(GaitCycle {
                accel: accel.slice(cur, next),
                gyro: gyro.slice(cur, next),
                start_index: cur,
                end_index: next,
            });
        }
        boundaries.push(next);
        cur = next;
    }
    Ok(Segmentation {
        cycles,
        a_mag,
        phi,
        minima,
        boundaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sig(ch: [Vec<f64>; 3]) -> UniformSignal {
        UniformSignal::new(200.0, 0.0, ch).unwrap()
    }

    #[test]
    fn magnitude_examples() {
        let m = magnitude(&[vec![3.0, 0.0], vec![4.0, 0.0], vec![0.0, -9.8]]);
        assert_eq!(m, vec![5.0, 9.8]);
    }

    #[test]
    fn corr_dist_examples() {
        assert!(corr_dist(&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0]).unwrap().abs() < 1e-15);
        assert!((corr_dist(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((corr_dist(&[1.0, 0.0, -1.0], &[0.0, 1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            corr_dist(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(GaitError::DegenerateInput(_))
        ));
    }

    #[test]
    fn template_update() {
        let ones = Template { values: vec![1.0; 5] };
        let zeros = Template { values: vec![0.0; 5] };
        let t = update_template(&ones, &zeros, 0.9).unwrap();
        assert!(t.values.iter().all(|v| (v - 0.9).abs() < 1e-15));
        assert_eq!(update_template(&ones, &zeros, 1.0).unwrap(), ones);
        assert_eq!(update_template(&ones, &ones, 0.9).unwrap(), ones);
        assert!(update_template(&ones, &Template { values: vec![0.0; 4] }, 0.9).is_err());
    }

    #[test]
    fn starts_from_constructed_phi() {
        let mut phi = vec![1.0; 400];
        for c in [100usize, 300] {
            for d in 0..=10usize {
                let v = 0.05 + 0.01 * (d * d) as f64;
                phi[c - d] = v;
                phi[c + d] = v;
            }
        }
        assert_eq!(find_cycle_starts(&phi, 0.3, 200), vec![100, 300]);
        assert!(find_cycle_starts(&vec![1.0; 400], 0.3, 200).is_empty());
    }

    #[test]
    fn close_regions_merge() {
        let mut phi = vec![1.0; 200];
        phi[50] = 0.1;
        phi[60] = 0.05;
        assert_eq!(find_cycle_starts(&phi, 0.3, 200), vec![60]);
    }

    #[test]
    fn initial_template_on_sine() {
        let a: Vec<f64> = (0..1000)
            .map(|i| 10.0 + (2.0 * PI * i as f64 / 200.0).sin())
            .collect();
        let (t, star) = initial_template(&a, 200.0).unwrap();
        assert_eq!(t.values.len(), 200);
        assert!((star as i64 - 150).abs() <= 2, "trough at {star}");
        assert_eq!(t.values[100], a[star]);
    }

    #[test]
    fn monotone_has_no_gait() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01).collect();
        assert!(matches!(initial_template(&a, 200.0), Err(GaitError::NoGaitDetected(_))));
    }

    #[test]
    fn periodic_self_match() {
        let period: Vec<f64> = (0..200).map(|i| ((i * 7919) % 200) as f64 * 0.01).collect();
        let a: Vec<f64> = (0..1000).map(|i| period[i % 200]).collect();
        let phi = match_metric(&a, &Template { values: period }).unwrap();
        for k in 0..4 {
            assert!(phi[200 * k].abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_window_matches_its_reverse() {
        let w: Vec<f64> = (0..200).map(|i| ((i as f64 - 99.5) / 30.0).powi(2).min(4.0)).collect();
        let rev: Vec<f64> = w.iter().rev().cloned().collect();
        assert!(corr_dist(&w, &rev).unwrap() < 1e-12);
    }

    #[test]
    fn stationary_periodic_cycles_exact() {
        // Period 1.1 s = 220 samples.
        let f = |i: usize| {
            let th = 2.0 * PI * i as f64 / 220.0;
            9.8 + 2.0 * th.cos() + 0.8 * (2.0 * th + 0.3).cos() + 0.3 * (3.0 * th).sin()
        };
        let n = 200 * 12;
        let z: Vec<f64> = (0..n).map(f).collect();
        let zeros = vec![0.0; n];
        let accel = sig([zeros.clone(), zeros.clone(), z]);
        let gyro = sig([zeros.clone(), zeros.clone(), zeros]);
        let seg = segment_cycles(&accel, &gyro, &SegmentParams::default()).unwrap();
        assert!(seg.cycles.len() >= 8);
        for c in &seg.cycles {
            assert_eq!(c.len(), 220);
            assert_eq!(c.accel[2].len(), 220);
        }
    }

    #[test]
    fn short_recording_has_no_cycles() {
        let x: Vec<f64> = (0..400).map(|i| (i as f64 * 0.05).sin()).collect();
        let accel = sig([x.clone(), x.clone(), x.clone()]);
        assert!(matches!(
            segment_cycles(&accel, &accel, &SegmentParams::default()),
            Err(GaitError::NoCycles(_))
        ));
    }
}
