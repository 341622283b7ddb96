//! Recording to normalized cycle matrices.

use std::thread;

use crate::cnn::LabeledCycle;
use crate::config::PipelineConfig;
use crate::cycles::segment_cycles;
use crate::error::Result;
use crate::normalize::{assemble_input, CycleMatrix};
use crate::orientation::transform_cycle;
use crate::recording::Recording;
use crate::signal::{lowpass_fir, resample_recording};

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedCycle {
    pub start_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub subject_id: String,
    pub session_id: String,
    pub rate_hz: f64,
    /// Time of the first resampled sample.
    pub t0: f64,
    /// Half the template length: boundaries sit this many samples before the
    /// magnitude trough the template was seeded on.
    pub anchor_offset: usize,
    /// Every template match visited, including ones that did not yield a cycle.
    pub boundaries: Vec<usize>,
    /// Match metric against the initial template and its sub-threshold minima.
    pub phi: Vec<f64>,
    pub minima: Vec<usize>,
    pub cycles: Vec<CycleMatrix>,
    pub start_indices: Vec<usize>,
    pub dropped: Vec<DroppedCycle>,
}

impl Preprocessed {
    /// Estimated heel-strike time for a boundary index.
    pub fn strike_time(&self, index: usize) -> f64 {
        self.t0 + (index + self.anchor_offset) as f64 / self.rate_hz
    }

    pub fn strike_times(&self) -> Vec<f64> {
        self.boundaries.iter().map(|&b| self.strike_time(b)).collect()
    }

    pub fn labeled(&self) -> Vec<LabeledCycle> {
        self.cycles
            .iter()
            .map(|x| LabeledCycle {
                subject: self.subject_id.clone(),
                session: self.session_id.clone(),
                x: x.clone(),
            })
            .collect()
    }
}

/// Resample, low-pass, segment, rotate into the walking frame and normalize.
///
/// Cycles whose frame or normalization is degenerate are dropped and listed
/// with the reason; failures of the whole recording are returned as errors.
pub fn preprocess(rec: &Recording, cfg: &PipelineConfig) -> Result<Preprocessed> {
    rec.validate()?;
    rec.check_sample_rates()?;
    let (accel, gyro) = resample_recording(rec, cfg.rate_hz)?;
    let accel = lowpass_fir(&accel, cfg.fir_cutoff)?;
    let gyro = lowpass_fir(&gyro, cfg.fir_cutoff)?;
    let seg = segment_cycles(&accel, &gyro, &cfg.segment_params())?;
    let mut cycles = Vec::new();
    let mut start_indices = Vec::new();
    let mut dropped = Vec::new();
    for c in &seg.cycles {
        match transform_cycle(c).and_then(|oc| assemble_input(&oc, cfg.n, cfg.use_gyro)) {
            Ok(x) => {
                cycles.push(x);
                start_indices.push(c.start_index);
            }
            Err(e) => dropped.push(DroppedCycle {
                start_index: c.start_index,
                reason: e.to_string(),
            }),
        }
    }
    Ok(Preprocessed {
        subject_id: rec.subject_id.clone(),
        session_id: rec.session_id.clone(),
        rate_hz: accel.rate_hz,
        t0: accel.t0,
        anchor_offset: (accel.rate_hz.round() as usize) / 2,
        boundaries: seg.boundaries,
        phi: seg.phi,
        minima: seg.minima,
        cycles,
        start_indices,
        dropped,
    })
}

/// Runs [`preprocess`] on every recording across the available cores;
/// results keep the input order.
pub fn preprocess_all(recs: &[Recording], cfg: &PipelineConfig) -> Vec<Result<Preprocessed>> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(recs.len().max(1));
    if workers <= 1 {
        return recs.iter().map(|r| preprocess(r, cfg)).collect();
    }
    let chunk = recs.len().div_ceil(workers);
    thread::scope(|s| {
        let handles: Vec<_> = recs
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|r| preprocess(r, cfg)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("preprocessing worker panicked"))
            .collect()
    })
}
