//! Synthetic cohorts and the evaluation protocols.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cnn::{evaluate, train, CnnModel, LabeledCycle, TrainConfig};
use crate::config::{OsvmConfig, PipelineConfig};
use crate::container::CycleDataset;
use crate::error::{GaitError, Result};
use crate::normalize::CycleMatrix;
use crate::pca::PcaMode;
use crate::pipeline::preprocess_all;
use crate::profile::{f_measure, fit_osvm_model, out_of_fold_scores, score_all, SCORE_FOLDS};
use crate::recording::Recording;
use crate::sprt::{fit_score_model, run_sprt, Decision, SprtConfig};
use crate::synth::{generate_subject, generate_walk, random_rotation, GroundTruth, WalkOptions};

/// Walk `w` of subject `seed`, held in a random device orientation.
pub fn synth_walk(seed: u64, w: u64, duration_s: f64) -> Result<(Recording, GroundTruth)> {
    let walk_seed = seed.wrapping_mul(1_000_003).wrapping_add(w);
    let mut rng = ChaCha8Rng::seed_from_u64(walk_seed);
    let opts = WalkOptions {
        duration_s,
        rotation: random_rotation(&mut rng),
        seed: walk_seed,
        session_id: format!("w{w}"),
        ..WalkOptions::default()
    };
    generate_walk(&generate_subject(seed), &opts)
}

/// Preprocessed cycles of walks `first_walk..first_walk + walks` of every subject.
pub fn synth_cycles(
    seeds: &[u64],
    first_walk: u64,
    walks: u64,
    duration_s: f64,
    cfg: &PipelineConfig,
) -> Result<Vec<LabeledCycle>> {
    let mut recs = Vec::new();
    for &s in seeds {
        for w in first_walk..first_walk + walks {
            recs.push(synth_walk(s, w, duration_s)?.0);
        }
    }
    let mut out = Vec::new();
    for r in preprocess_all(&recs, cfg) {
        out.extend(r?.labeled());
    }
    Ok(out)
}

/// Drops the gyroscope rows of 8-row cycles.
pub fn accel_only(x: &CycleMatrix) -> Result<CycleMatrix> {
    if x.rows != 8 {
        return Err(GaitError::ShapeMismatch(format!("expected 8 rows, got {}", x.rows)));
    }
    CycleMatrix::new(4, x.n, x.data[..4 * x.n].to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// CNN accuracy against the feature count F.
    Features,
    /// CNN accuracy against the training cycles per subject.
    NCycles,
    /// CNN accuracy with and without gyroscope rows.
    Gyro,
    /// OSVM F-measure over a (γ, ν) grid.
    OsvmGrid,
    /// OSVM F-measure against the number of PCA components.
    PcaSweep,
    /// OSVM F-measure against the number of enrollment cycles.
    EnrollSize,
    /// Sequential test error rates and cycles to decision.
    Sprt,
}

impl Protocol {
    pub const ALL: [Protocol; 7] = [
        Protocol::Features,
        Protocol::NCycles,
        Protocol::Gyro,
        Protocol::OsvmGrid,
        Protocol::PcaSweep,
        Protocol::EnrollSize,
        Protocol::Sprt,
    ];

    pub fn needs_cnn(self) -> bool {
        matches!(self, Protocol::OsvmGrid | Protocol::PcaSweep | Protocol::EnrollSize | Protocol::Sprt)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Features => "features",
            Protocol::NCycles => "ncycles",
            Protocol::Gyro => "gyro",
            Protocol::OsvmGrid => "osvm-grid",
            Protocol::PcaSweep => "pca-sweep",
            Protocol::EnrollSize => "enroll-size",
            Protocol::Sprt => "sprt",
        })
    }
}

impl FromStr for Protocol {
    type Err = GaitError;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| GaitError::Usage(format!("unknown protocol {s:?}")))
    }
}

fn pct(x: f64) -> String {
    format!("{:.4}", x)
}

fn cnn_accuracy(data: &[LabeledCycle], cfg: &TrainConfig) -> Result<f64> {
    let (_, report) = train(data, cfg)?;
    report
        .test_accuracy
        .ok_or_else(|| GaitError::InsufficientData("no test cycles".into()))
}

pub fn accuracy_vs_features(data: &[LabeledCycle], cfg: &TrainConfig, fs: &[usize]) -> Result<Table> {
    let mut t = Table::new(&["features", "accuracy"]);
    for &f in fs {
        let acc = cnn_accuracy(data, &TrainConfig { features: f, ..*cfg })?;
        t.push(vec![f.to_string(), pct(acc)]);
    }
    Ok(t)
}

pub fn accuracy_vs_ncycles(data: &[LabeledCycle], cfg: &TrainConfig, ns: &[usize]) -> Result<Table> {
    let mut t = Table::new(&["n_train", "accuracy"]);
    for &n in ns {
        let acc = cnn_accuracy(data, &TrainConfig { n_train: n, ..*cfg })?;
        t.push(vec![n.to_string(), pct(acc)]);
    }
    Ok(t)
}

pub fn gyro_ablation(data: &[LabeledCycle], cfg: &TrainConfig) -> Result<Table> {
    let accel: Vec<LabeledCycle> = data
        .iter()
        .map(|c| {
            Ok(LabeledCycle {
                x: accel_only(&c.x)?,
                ..c.clone()
            })
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["gyro", "accuracy"]);
    t.push(vec!["on".into(), pct(cnn_accuracy(data, cfg)?)]);
    t.push(vec!["off".into(), pct(cnn_accuracy(&accel, cfg)?)]);
    Ok(t)
}

/// Target enrollment and held-out cycles plus impostor cycles, as CNN features.
#[derive(Debug, Clone)]
pub struct OneClassSplit {
    pub enroll: Vec<Vec<f64>>,
    pub held_out: Vec<Vec<f64>>,
    /// Impostors whose scores fit the negative density.
    pub bank: Vec<Vec<f64>>,
    /// Impostors used for testing, one group per subject.
    pub impostors: Vec<Vec<Vec<f64>>>,
}

/// Target cycles alternate between enrollment and held-out; the other
/// subjects alternate between the bank and the test impostors.
pub fn one_class_split(ds: &CycleDataset, cnn: &CnnModel, target: &str) -> Result<OneClassSplit> {
    let subjects = ds.subjects();
    if !subjects.iter().any(|s| s == target) {
        return Err(GaitError::Usage(format!("target {target:?} not in the dataset")));
    }
    let feats = |s: &str| cnn.extract_features_batch(&ds.cycles_of(s));
    let own = feats(target)?;
    let (mut enroll, mut held_out) = (Vec::new(), Vec::new());
    for (i, f) in own.into_iter().enumerate() {
        if i % 2 == 0 {
            enroll.push(f);
        } else {
            held_out.push(f);
        }
    }
    let (mut bank, mut impostors) = (Vec::new(), Vec::new());
    for (i, s) in subjects.iter().filter(|s| *s != target).enumerate() {
        if i % 2 == 0 {
            bank.extend(feats(s)?);
        } else {
            impostors.push(feats(s)?);
        }
    }
    if impostors.is_empty() {
        return Err(GaitError::InsufficientData("need at least two impostor subjects".into()));
    }
    Ok(OneClassSplit {
        enroll,
        held_out,
        bank,
        impostors,
    })
}

fn held_out_f_measure(split: &OneClassSplit, enroll: &[Vec<f64>], cfg: &OsvmConfig) -> Result<f64> {
    let model = fit_osvm_model(enroll, cfg)?;
    let pos = score_all(&model, &split.held_out)?;
    let neg: Vec<f64> = split
        .impostors
        .iter()
        .map(|g| score_all(&model, g))
        .collect::<Result<Vec<_>>>()?
        .concat();
    Ok(f_measure(&pos, &neg))
}

pub fn osvm_grid(split: &OneClassSplit, base: &OsvmConfig, gammas: &[f64], nus: &[f64]) -> Result<Table> {
    let mut t = Table::new(&["gamma", "nu", "f_measure"]);
    for &gamma in gammas {
        for &nu in nus {
            let f = held_out_f_measure(split, &split.enroll, &OsvmConfig { gamma, nu, ..*base })?;
            t.push(vec![gamma.to_string(), nu.to_string(), pct(f)]);
        }
    }
    Ok(t)
}

pub fn pca_sweep(split: &OneClassSplit, base: &OsvmConfig, ss: &[usize]) -> Result<Table> {
    let mut t = Table::new(&["s", "mode", "f_measure"]);
    let dim = split.enroll.first().map_or(0, Vec::len);
    for mode in [PcaMode::Lowest, PcaMode::Highest] {
        // Sizes beyond the feature dimension are skipped.
        for &s in ss.iter().filter(|s| **s <= dim) {
            let f = held_out_f_measure(split, &split.enroll, &OsvmConfig { s, pca_mode: mode, ..*base })?;
            t.push(vec![s.to_string(), mode.to_string(), pct(f)]);
        }
    }
    Ok(t)
}

pub fn enroll_size_sweep(split: &OneClassSplit, cfg: &OsvmConfig, sizes: &[usize]) -> Result<Table> {
    let mut t = Table::new(&["enroll_cycles", "f_measure"]);
    for &n in sizes {
        if n > split.enroll.len() {
            break;
        }
        let f = held_out_f_measure(split, &split.enroll[..n], cfg)?;
        t.push(vec![n.to_string(), pct(f)]);
    }
    Ok(t)
}

/// Rates of one sequential-test experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprtRates {
    pub false_negative: f64,
    pub false_positive: f64,
    pub pending: usize,
    pub mean_cycles: f64,
    pub median_cycles: f64,
}

fn median(v: &mut [usize]) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2]) as f64
    }
}

/// Runs the test on `trials` genuine and `trials` impostor streams drawn by
/// resampling the given score pools.
pub fn sprt_trials(
    genuine: &[f64],
    impostor: &[f64],
    p0: &crate::sprt::ScoreModel,
    p1: &crate::sprt::ScoreModel,
    cfg: &SprtConfig,
    trials: usize,
    seed: u64,
) -> Result<SprtRates> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cycles = Vec::with_capacity(2 * trials);
    let (mut fneg, mut fpos, mut pending) = (0, 0, 0);
    for (pool, genuine_side) in [(genuine, true), (impostor, false)] {
        for _ in 0..trials {
            let stream: Vec<f64> = (0..cfg.max_cycles).map(|_| *pool.choose(&mut rng).expect("non-empty pool")).collect();
            let out = run_sprt(stream, p0, p1, cfg)?;
            cycles.push(out.n_used);
            match (out.decision, genuine_side) {
                (Decision::AcceptH0, true) => fneg += 1,
                (Decision::AcceptH1, false) => fpos += 1,
                (Decision::Pending, _) => pending += 1,
                _ => {}
            }
        }
    }
    let mean_cycles = cycles.iter().sum::<usize>() as f64 / cycles.len().max(1) as f64;
    Ok(SprtRates {
        false_negative: fneg as f64 / trials as f64,
        false_positive: fpos as f64 / trials as f64,
        pending,
        mean_cycles,
        median_cycles: median(&mut cycles),
    })
}

pub fn sprt_table(split: &OneClassSplit, cfg: &PipelineConfig, errors: &[f64], trials: usize) -> Result<Table> {
    let model = fit_osvm_model(&split.enroll, &cfg.osvm)?;
    let oof = out_of_fold_scores(&split.enroll, &cfg.osvm, SCORE_FOLDS)?;
    let p1 = fit_score_model(&oof, cfg.sprt.family)?;
    let p0 = fit_score_model(&score_all(&model, &split.bank)?, cfg.sprt.family)?;
    let genuine = score_all(&model, &split.held_out)?;
    let impostor: Vec<f64> = split
        .impostors
        .iter()
        .map(|g| score_all(&model, g))
        .collect::<Result<Vec<_>>>()?
        .concat();
    let mut t = Table::new(&["alpha_err", "beta_err", "false_negative", "false_positive", "mean_cycles", "median_cycles"]);
    for &e in errors {
        let sc = SprtConfig::new(e, e, cfg.sprt.max_cycles)?;
        let r = sprt_trials(&genuine, &impostor, &p0, &p1, &sc, trials, cfg.cnn.seed)?;
        t.push(vec![
            e.to_string(),
            e.to_string(),
            pct(r.false_negative),
            pct(r.false_positive),
            format!("{:.2}", r.mean_cycles),
            format!("{:.1}", r.median_cycles),
        ]);
    }
    Ok(t)
}

/// Runs one protocol with its default sweep values.
pub fn run_protocol(
    protocol: Protocol,
    ds: &CycleDataset,
    cnn: Option<&CnnModel>,
    target: Option<&str>,
    cfg: &PipelineConfig,
) -> Result<Table> {
    let split = || -> Result<OneClassSplit> {
        let cnn = cnn.ok_or_else(|| GaitError::Usage(format!("protocol {protocol} needs a CNN model")))?;
        let subjects = ds.subjects();
        let target = target.map(str::to_string).or_else(|| subjects.first().cloned());
        one_class_split(ds, cnn, &target.unwrap_or_default())
    };
    match protocol {
        Protocol::Features => accuracy_vs_features(&ds.items, &cfg.cnn, &[10, 20, 40, 80]),
        Protocol::NCycles => accuracy_vs_ncycles(&ds.items, &cfg.cnn, &[5, 10, 20, 40]),
        Protocol::Gyro => gyro_ablation(&ds.items, &cfg.cnn),
        Protocol::OsvmGrid => osvm_grid(
            &split()?,
            &cfg.osvm,
            &[0.01, 0.03, 0.1, 0.3, 1.0, 3.0],
            &[0.01, 0.02, 0.05, 0.1, 0.2, 0.3],
        ),
        Protocol::PcaSweep => pca_sweep(&split()?, &cfg.osvm, &[5, 10, 15, 20, 30]),
        Protocol::EnrollSize => enroll_size_sweep(&split()?, &cfg.osvm, &[50, 100, 200, 400, 800]),
        Protocol::Sprt => sprt_table(&split()?, cfg, &[0.001, 0.01, 0.05, 0.1], 1000),
    }
}

/// Seeded shuffle used by callers that subsample cycles.
pub fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

/// Test-set accuracy of an existing model on labeled cycles of its classes.
pub fn model_accuracy(model: &CnnModel, data: &[LabeledCycle]) -> Result<f64> {
    let items: Vec<(&CycleMatrix, usize)> = data
        .iter()
        .map(|c| {
            model
                .classes
                .iter()
                .position(|k| *k == c.subject)
                .map(|l| (&c.x, l))
                .ok_or_else(|| GaitError::Validation(format!("subject {} unknown to the model", c.subject)))
        })
        .collect::<Result<_>>()?;
    Ok(evaluate(model, &items)?.0)
}
