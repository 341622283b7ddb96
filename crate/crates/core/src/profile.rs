//! Enrollment of a target user and sequential authentication.

use crate::cnn::CnnModel;
use crate::config::{OsvmConfig, PipelineConfig};
use crate::error::{GaitError, Result};
use crate::normalize::CycleMatrix;
use crate::osvm::{train_osvm, OsvmModel};
use crate::pca::fit_pca;
use crate::sprt::{fit_score_model, run_sprt, ScoreModel, SprtConfig, SprtOutcome};

/// Target cycles are scored out-of-fold with this many folds to fit `p1`.
pub const SCORE_FOLDS: usize = 5;
pub const MIN_ENROLL_CYCLES: usize = 10;

/// Everything needed to authenticate one target given the CNN it was
/// enrolled with.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthProfile {
    pub target: String,
    /// Digest of the CNN model file used at enrollment.
    pub cnn_sha256: String,
    pub rows: usize,
    pub n: usize,
    pub osvm: OsvmModel,
    /// Target score density.
    pub p1: ScoreModel,
    /// Impostor score density.
    pub p0: ScoreModel,
    pub sprt: SprtConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrollReport {
    pub target_cycles: usize,
    pub bank_cycles: usize,
    pub support_vectors: usize,
    /// Out-of-fold scores of the target cycles.
    pub target_scores: Vec<f64>,
    pub bank_scores: Vec<f64>,
}

/// PCA to `S` components, then the one-class SVM.
pub fn fit_osvm_model(features: &[Vec<f64>], cfg: &OsvmConfig) -> Result<OsvmModel> {
    let pca = fit_pca(features, cfg.s, cfg.pca_mode)?;
    let projected: Vec<Vec<f64>> = features.iter().map(|f| pca.apply(f)).collect::<Result<_>>()?;
    let svm = train_osvm(&projected, cfg.nu, cfg.gamma)?;
    Ok(OsvmModel { pca, svm })
}

pub fn score_all(model: &OsvmModel, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    features.iter().map(|f| model.score_features(f)).collect()
}

/// Scores every feature vector with a model trained on the other folds.
/// Fold membership is the index modulo `folds`.
pub fn out_of_fold_scores(features: &[Vec<f64>], cfg: &OsvmConfig, folds: usize) -> Result<Vec<f64>> {
    let mut scores = vec![0.0; features.len()];
    for k in 0..folds {
        let train: Vec<Vec<f64>> = features
            .iter()
            .enumerate()
            .filter(|(i, _)| i % folds != k)
            .map(|(_, f)| f.clone())
            .collect();
        let model = fit_osvm_model(&train, cfg)?;
        for (i, f) in features.iter().enumerate().filter(|(i, _)| i % folds == k) {
            scores[i] = model.score_features(f)?;
        }
    }
    Ok(scores)
}

fn check_shapes(cnn: &CnnModel, cycles: &[CycleMatrix]) -> Result<()> {
    if let Some(c) = cycles.iter().find(|c| c.rows != cnn.arch.input_rows || c.n != cnn.arch.n) {
        return Err(GaitError::ShapeMismatch(format!(
            "cycle is {}×{}, network expects {}×{}",
            c.rows, c.n, cnn.arch.input_rows, cnn.arch.n
        )));
    }
    Ok(())
}

/// Trains the target's PCA and OSVM on all its cycles, fits `p1` to
/// out-of-fold target scores and `p0` to the scores of the impostor bank.
pub fn enroll(
    cnn: &CnnModel,
    target: &str,
    target_cycles: &[CycleMatrix],
    bank_cycles: &[CycleMatrix],
    cfg: &PipelineConfig,
    cnn_sha256: &str,
) -> Result<(AuthProfile, EnrollReport)> {
    if target_cycles.len() < MIN_ENROLL_CYCLES {
        return Err(GaitError::InsufficientData(format!(
            "enrollment needs at least {MIN_ENROLL_CYCLES} cycles, got {}",
            target_cycles.len()
        )));
    }
    check_shapes(cnn, target_cycles)?;
    check_shapes(cnn, bank_cycles)?;
    let features = cnn.extract_features_batch(target_cycles)?;
    let bank = cnn.extract_features_batch(bank_cycles)?;
    let osvm = fit_osvm_model(&features, &cfg.osvm)?;
    let target_scores = out_of_fold_scores(&features, &cfg.osvm, SCORE_FOLDS)?;
    let bank_scores = score_all(&osvm, &bank)?;
    let p1 = fit_score_model(&target_scores, cfg.sprt.family)?;
    let p0 = fit_score_model(&bank_scores, cfg.sprt.family)?;
    let report = EnrollReport {
        target_cycles: target_cycles.len(),
        bank_cycles: bank_cycles.len(),
        support_vectors: osvm.svm.alphas.len(),
        target_scores,
        bank_scores,
    };
    let profile = AuthProfile {
        target: target.to_string(),
        cnn_sha256: cnn_sha256.to_string(),
        rows: cnn.arch.input_rows,
        n: cnn.arch.n,
        osvm,
        p1,
        p0,
        sprt: cfg.sprt.config()?,
    };
    Ok((profile, report))
}

impl AuthProfile {
    pub fn validate(&self) -> Result<()> {
        self.osvm.validate()?;
        self.p1.validate()?;
        self.p0.validate()?;
        Ok(())
    }

    pub fn score_cycles(&self, cnn: &CnnModel, cycles: &[CycleMatrix]) -> Result<Vec<f64>> {
        if cnn.arch.input_rows != self.rows || cnn.arch.n != self.n {
            return Err(GaitError::ShapeMismatch(format!(
                "profile expects {}×{} cycles, network takes {}×{}",
                self.rows, self.n, cnn.arch.input_rows, cnn.arch.n
            )));
        }
        check_shapes(cnn, cycles)?;
        score_all(&self.osvm, &cnn.extract_features_batch(cycles)?)
    }

    /// Feeds the cycles in order to the sequential test.
    pub fn authenticate(&self, cnn: &CnnModel, cycles: &[CycleMatrix]) -> Result<SprtOutcome> {
        if cycles.is_empty() {
            return Err(GaitError::NoCycles("no walking cycles to authenticate".into()));
        }
        let scores = self.score_cycles(cnn, cycles)?;
        run_sprt(scores, &self.p0, &self.p1, &self.sprt)
    }
}

/// `2PR / (P + R)` with target acceptance as the positive outcome.
pub fn f_measure(target_scores: &[f64], impostor_scores: &[f64]) -> f64 {
    let tp = target_scores.iter().filter(|s| **s >= 0.0).count() as f64;
    let fn_ = target_scores.len() as f64 - tp;
    let fp = impostor_scores.iter().filter(|s| **s >= 0.0).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    2.0 * tp / (2.0 * tp + fp + fn_)
}
