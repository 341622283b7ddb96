//! Browser bindings. Every export returns a JSON string for the page to plot.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use gaitkit::config::PipelineConfig;
use gaitkit::pipeline::preprocess;
use gaitkit::sprt::{run_sprt, ScoreModel, SprtConfig};
use gaitkit::synth::{generate_subject, generate_walk, WalkOptions};

fn err(e: impl ToString) -> JsError {
    JsError::new(&e.to_string())
}

fn round(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

/// Device rotation from yaw, pitch and roll in degrees.
pub fn rotation(yaw: f64, pitch: f64, roll: f64) -> [[f64; 3]; 3] {
    let (a, b, c) = (yaw.to_radians(), pitch.to_radians(), roll.to_radians());
    let rz = [[a.cos(), -a.sin(), 0.0], [a.sin(), a.cos(), 0.0], [0.0, 0.0, 1.0]];
    let ry = [[b.cos(), 0.0, b.sin()], [0.0, 1.0, 0.0], [-b.sin(), 0.0, b.cos()]];
    let rx = [[1.0, 0.0, 0.0], [0.0, c.cos(), -c.sin()], [0.0, c.sin(), c.cos()]];
    let mul = |p: [[f64; 3]; 3], q: [[f64; 3]; 3]| {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| p[i][k] * q[k][j]).sum();
            }
        }
        m
    };
    mul(mul(rz, ry), rx)
}

/// Synthesizes a walk and segments it: raw magnitude, detected heel strikes
/// and the true ones.
pub fn segment(subject: u64, duration_s: f64, noise_std: f64) -> Result<Value, gaitkit::GaitError> {
    let opts = WalkOptions {
        duration_s,
        noise_std: Some(noise_std),
        seed: subject,
        ..WalkOptions::default()
    };
    let (rec, truth) = generate_walk(&generate_subject(subject), &opts)?;
    let p = preprocess(&rec, &PipelineConfig::default())?;
    let t: Vec<f64> = rec.accel.iter().map(|s| round(s.t)).collect();
    let mag: Vec<f64> = rec
        .accel
        .iter()
        .map(|s| round(s.xyz.iter().map(|v| v * v).sum::<f64>().sqrt()))
        .collect();
    Ok(json!({
        "t": t,
        "magnitude": mag,
        "detected": p.strike_times().into_iter().map(round).collect::<Vec<_>>(),
        "truth": truth.cycle_start_times.into_iter().map(round).collect::<Vec<_>>(),
        "cycles": p.cycles.len(),
        "dropped": p.dropped.len(),
    }))
}

/// The same walk held upright and rotated: device-frame axes of the rotated
/// copy next to the walking-frame rows of both.
pub fn orientation(subject: u64, yaw: f64, pitch: f64, roll: f64) -> Result<Value, gaitkit::GaitError> {
    let profile = generate_subject(subject);
    let base = WalkOptions {
        duration_s: 12.0,
        seed: subject,
        ..WalkOptions::default()
    };
    let cfg = PipelineConfig::default();
    let (upright, _) = generate_walk(&profile, &base)?;
    let (rotated, _) = generate_walk(
        &profile,
        &WalkOptions {
            rotation: rotation(yaw, pitch, roll),
            ..base
        },
    )?;
    let a = preprocess(&upright, &cfg)?;
    let b = preprocess(&rotated, &cfg)?;
    let rows = |p: &gaitkit::pipeline::Preprocessed, r: usize| -> Vec<f64> {
        p.cycles.iter().take(3).flat_map(|c| c.row(r).iter().map(|v| round(*v))).collect()
    };
    let (t0, t1) = (b.strike_time(b.start_indices[0]), b.strike_time(b.start_indices[0]) + 3.0 * profile.cycle_period_s);
    let window: Vec<_> = rotated.accel.iter().filter(|s| s.t >= t0 && s.t < t1).collect();
    let axis = |k: usize| window.iter().map(|s| round(s.xyz[k])).collect::<Vec<_>>();
    Ok(json!({
        "device": { "x": axis(0), "y": axis(1), "z": axis(2) },
        "upright": { "xi": rows(&a, 0), "psi": rows(&a, 1), "zeta": rows(&a, 2) },
        "rotated": { "xi": rows(&b, 0), "psi": rows(&b, 1), "zeta": rows(&b, 2) },
        "same_boundaries": a.boundaries == b.boundaries,
    }))
}

/// Log-likelihood ratio paths of genuine and impostor score streams drawn
/// from unit Gaussians `separation` apart.
pub fn sprt(separation: f64, alpha_err: f64, beta_err: f64, streams: usize, seed: u64) -> Result<Value, gaitkit::GaitError> {
    let cfg = SprtConfig::new(alpha_err, beta_err, 30)?;
    let p1 = ScoreModel::Gaussian { mean: separation / 2.0, std: 1.0 };
    let p0 = ScoreModel::Gaussian { mean: -separation / 2.0, std: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = Vec::new();
    for (mean, genuine) in [(separation / 2.0, true), (-separation / 2.0, false)] {
        let nd = Normal::new(mean, 1.0).expect("unit variance");
        for _ in 0..streams {
            let scores: Vec<f64> = (0..cfg.max_cycles).map(|_| nd.sample(&mut rng)).collect();
            let out = run_sprt(scores, &p0, &p1, &cfg)?;
            paths.push(json!({
                "genuine": genuine,
                "decision": out.decision.to_string(),
                "trace": out.trace.into_iter().map(round).collect::<Vec<_>>(),
            }));
        }
    }
    Ok(json!({ "a": cfg.a, "b": cfg.b, "paths": paths }))
}

#[wasm_bindgen]
pub fn segment_demo(subject: u32, duration_s: f64, noise_std: f64) -> Result<String, JsError> {
    segment(subject.into(), duration_s, noise_std).map(|v| v.to_string()).map_err(err)
}

#[wasm_bindgen]
pub fn orientation_demo(subject: u32, yaw: f64, pitch: f64, roll: f64) -> Result<String, JsError> {
    orientation(subject.into(), yaw, pitch, roll).map(|v| v.to_string()).map_err(err)
}

#[wasm_bindgen]
pub fn sprt_demo(separation: f64, alpha_err: f64, beta_err: f64, streams: u32, seed: u32) -> Result<String, JsError> {
    sprt(separation, alpha_err, beta_err, streams as usize, seed.into()).map(|v| v.to_string()).map_err(err)
}
