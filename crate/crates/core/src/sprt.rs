//! Wald's sequential probability ratio test over per-cycle scores.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{GaitError, Result};

/// Per-step log-likelihood ratios are clamped to ±30.
pub const LOG_RATIO_CLAMP: f64 = 30.0;
pub const MIN_SCORES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreFamily {
    #[default]
    Gaussian,
    Kde,
}

impl fmt::Display for ScoreFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreFamily::Gaussian => "gaussian",
            ScoreFamily::Kde => "kde",
        })
    }
}

impl FromStr for ScoreFamily {
    type Err = GaitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(ScoreFamily::Gaussian),
            "kde" => Ok(ScoreFamily::Kde),
            other => Err(GaitError::Parameter(format!("unknown score family {other:?}"))),
        }
    }
}

/// Density of the OSVM scores of one class.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreModel {
    Gaussian { mean: f64, std: f64 },
    /// Gaussian kernels of width `bandwidth` at every sample.
    Kde { bandwidth: f64, samples: Vec<f64> },
}

impl ScoreModel {
    pub fn log_pdf(&self, x: f64) -> f64 {
        match self {
            ScoreModel::Gaussian { mean, std } => {
                let z = (x - mean) / std;
                -0.5 * z * z - std.ln() - 0.5 * (2.0 * PI).ln()
            }
            ScoreModel::Kde { bandwidth, samples } => {
                let terms: Vec<f64> = samples
                    .iter()
                    .map(|s| {
                        let z = (x - s) / bandwidth;
                        -0.5 * z * z
                    })
                    .collect();
                let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
                lse - (samples.len() as f64).ln() - bandwidth.ln() - 0.5 * (2.0 * PI).ln()
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScoreModel::Gaussian { mean, std } if mean.is_finite() && *std > 0.0 && std.is_finite() => Ok(()),
            ScoreModel::Kde { bandwidth, samples }
                if *bandwidth > 0.0 && !samples.is_empty() && samples.iter().all(|s| s.is_finite()) =>
            {
                Ok(())
            }
            _ => Err(GaitError::Validation(format!("invalid score model {self:?}"))),
        }
    }
}

/// Maximum-likelihood Gaussian or Silverman-bandwidth KDE.
pub fn fit_score_model(scores: &[f64], family: ScoreFamily) -> Result<ScoreModel> {
    if scores.len() < MIN_SCORES {
        return Err(GaitError::InsufficientData(format!(
            "score model needs at least {MIN_SCORES} scores, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(GaitError::Validation("scores must be finite".into()));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(std > 0.0) {
        return Err(GaitError::DegenerateInput("scores have zero variance".into()));
    }
    Ok(match family {
        ScoreFamily::Gaussian => ScoreModel::Gaussian { mean, std },
        ScoreFamily::Kde => ScoreModel::Kde {
            bandwidth: 1.06 * std * n.powf(-0.2),
            samples: scores.to_vec(),
        },
    })
}

/// Returns `(p1, p0)` fitted to the target and impostor scores.
pub fn fit_score_models(pos: &[f64], neg: &[f64], family: ScoreFamily) -> Result<(ScoreModel, ScoreModel)> {
    Ok((fit_score_model(pos, family)?, fit_score_model(neg, family)?))
}

/// `A = ln(β/(1−α))`, `B = ln((1−β)/α)`.
pub fn wald_thresholds(alpha_err: f64, beta_err: f64) -> Result<(f64, f64)> {
    let open = |v: f64| v > 0.0 && v < 1.0;
    if !open(alpha_err) || !open(beta_err) || alpha_err + beta_err > 1.0 {
        return Err(GaitError::Parameter(format!(
            "error probabilities α={alpha_err}, β={beta_err} must lie in (0, 1) with α + β ≤ 1"
        )));
    }
    Ok(((beta_err / (1.0 - alpha_err)).ln(), ((1.0 - beta_err) / alpha_err).ln()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprtConfig {
    pub alpha_err: f64,
    pub beta_err: f64,
    pub a: f64,
    pub b: f64,
    pub max_cycles: usize,
}

impl SprtConfig {
    pub fn new(alpha_err: f64, beta_err: f64, max_cycles: usize) -> Result<Self> {
        let (a, b) = wald_thresholds(alpha_err, beta_err)?;
        if max_cycles == 0 {
            return Err(GaitError::Parameter("max_cycles must be at least 1".into()));
        }
        Ok(SprtConfig {
            alpha_err,
            beta_err,
            a,
            b,
            max_cycles,
        })
    }
}

impl Default for SprtConfig {
    fn default() -> Self {
        SprtConfig::new(0.01, 0.01, 30).expect("valid defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Pending,
    /// Target user.
    AcceptH1,
    /// Impostor.
    AcceptH0,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Pending => "pending",
            Decision::AcceptH1 => "accept_H1",
            Decision::AcceptH0 => "accept_H0",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprtState {
    pub lambda: f64,
    pub n: usize,
    pub decision: Decision,
}

impl Default for SprtState {
    fn default() -> Self {
        SprtState {
            lambda: 0.0,
            n: 0,
            decision: Decision::Pending,
        }
    }
}

/// `ln p1(o) − ln p0(o)`, clamped.
pub fn log_ratio(o: f64, p0: &ScoreModel, p1: &ScoreModel) -> f64 {
    let r = p1.log_pdf(o) - p0.log_pdf(o);
    if r.is_nan() {
        0.0
    } else {
        r.clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP)
    }
}

/// Applies one score. At `max_cycles` a pending test is decided by the sign
/// of Λ, ties going to H0.
pub fn sprt_step(state: SprtState, o: f64, p0: &ScoreModel, p1: &ScoreModel, cfg: &SprtConfig) -> Result<SprtState> {
    if state.decision != Decision::Pending {
        return Err(GaitError::Usage(format!("test already decided ({})", state.decision)));
    }
    let lambda = state.lambda + log_ratio(o, p0, p1);
    let n = state.n + 1;
    let decision = if lambda >= cfg.b {
        Decision::AcceptH1
    } else if lambda <= cfg.a {
        Decision::AcceptH0
    } else if n >= cfg.max_cycles {
        if lambda > 0.0 {
            Decision::AcceptH1
        } else {
            Decision::AcceptH0
        }
    } else {
        Decision::Pending
    };
    Ok(SprtState { lambda, n, decision })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SprtOutcome {
    /// `Pending` if the scores ran out before a decision.
    pub decision: Decision,
    pub n_used: usize,
    /// Λ after each consumed score.
    pub trace: Vec<f64>,
}

pub fn run_sprt<I>(scores: I, p0: &ScoreModel, p1: &ScoreModel, cfg: &SprtConfig) -> Result<SprtOutcome>
where
    I: IntoIterator<Item = f64>,
{
    let mut state = SprtState::default();
    let mut trace = Vec::new();
    for o in scores {
        state = sprt_step(state, o, p0, p1, cfg)?;
        trace.push(state.lambda);
        if state.decision != Decision::Pending {
            break;
        }
    }
    if trace.is_empty() {
        return Err(GaitError::InsufficientData("no scores to test".into()));
    }
    Ok(SprtOutcome {
        decision: state.decision,
        n_used: state.n,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gauss(mean: f64, std: f64) -> ScoreModel {
        ScoreModel::Gaussian { mean, std }
    }

    #[test]
    fn thresholds() {
        let (a, b) = wald_thresholds(0.01, 0.01).unwrap();
        assert!((a + 4.59512).abs() < 1e-5 && (b - 4.59512).abs() < 1e-5);
        assert_eq!(wald_thresholds(0.5, 0.5).unwrap(), (0.0, 0.0));
        let (a, b) = wald_thresholds(0.001, 0.1).unwrap();
        assert!((a - (0.1f64 / 0.999).ln()).abs() < 1e-12 && (a + 2.301585).abs() < 1e-5);
        assert!((b - 6.80239).abs() < 1e-5);
        assert!(matches!(wald_thresholds(0.0, 0.1), Err(GaitError::Parameter(_))));
        assert!(matches!(wald_thresholds(0.7, 0.6), Err(GaitError::Parameter(_))));
    }

    #[test]
    fn gaussian_fit_recovers_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let nd = Normal::new(1.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| nd.sample(&mut rng)).collect();
        match fit_score_model(&xs, ScoreFamily::Gaussian).unwrap() {
            ScoreModel::Gaussian { mean, std } => {
                assert!((mean - 1.0).abs() < 0.05 && (std - 1.0).abs() < 0.05);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(fit_score_model(&[2.0; 40], ScoreFamily::Gaussian), Err(GaitError::DegenerateInput(_))));
        assert!(matches!(fit_score_model(&xs[..10], ScoreFamily::Gaussian), Err(GaitError::InsufficientData(_))));
    }

    #[test]
    fn kde_locality_and_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..200).map(|_| nd.sample(&mut rng)).collect();
        let kde = fit_score_model(&xs, ScoreFamily::Kde).unwrap();
        assert!(kde.pdf(xs[0]) >= kde.pdf(xs[0] + 5.0));
        let integral: f64 = (-1000..=1000).map(|i| kde.pdf(i as f64 * 0.01) * 0.01).sum();
        assert!((integral - 1.0).abs() < 1e-3);
        // Far tails stay finite in log space.
        assert!(kde.log_pdf(1e3).is_finite());
    }

    #[test]
    fn indistinguishable_classes_never_move() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let (p1, p0) = fit_score_models(&xs, &xs, ScoreFamily::Kde).unwrap();
        let cfg = SprtConfig::new(0.01, 0.01, 30).unwrap();
        let out = run_sprt(xs.iter().cycle().take(100).cloned(), &p0, &p1, &cfg).unwrap();
        assert!(out.trace.iter().all(|l| *l == 0.0));
        assert_eq!(out.decision, Decision::AcceptH0);
        assert_eq!(out.n_used, 30);
    }

    #[test]
    fn step_examples() {
        // Equal variances: log-ratio at o is (μ1 − μ0)(o − (μ0+μ1)/2)/σ².
        let (p0, p1) = (gauss(-0.5, 1.0), gauss(0.5, 1.0));
        let cfg = SprtConfig::new(0.01, 0.01, 30).unwrap();
        let out = run_sprt(std::iter::repeat(1.0), &p0, &p1, &cfg).unwrap();
        assert_eq!((out.decision, out.n_used), (Decision::AcceptH1, 5));

        let out = run_sprt([-10.0], &p0, &p1, &cfg).unwrap();
        assert_eq!((out.decision, out.n_used), (Decision::AcceptH0, 1));

        let state = sprt_step(SprtState::default(), -10.0, &p0, &p1, &cfg).unwrap();
        assert!(matches!(sprt_step(state, 0.0, &p0, &p1, &cfg), Err(GaitError::Usage(_))));
        assert!(matches!(run_sprt(Vec::new(), &p0, &p1, &cfg), Err(GaitError::InsufficientData(_))));

        let out = run_sprt([0.1, 0.2], &p0, &p1, &cfg).unwrap();
        assert_eq!(out.decision, Decision::Pending);
    }

    #[test]
    fn deterministic_stream_closed_form() {
        let (p0, p1) = (gauss(-1.5, 1.0), gauss(1.5, 1.0));
        let cfg = SprtConfig::new(0.01, 0.01, 30).unwrap();
        // ln p1(1.5) − ln p0(1.5) = (0 − 9)/(−2) = 4.5 per step.
        let expected_n = (cfg.b / 4.5).ceil() as usize;
        let out = run_sprt(std::iter::repeat(1.5), &p0, &p1, &cfg).unwrap();
        assert_eq!((out.decision, out.n_used), (Decision::AcceptH1, expected_n));
    }

    #[test]
    fn clamp_limits_single_outlier() {
        let (p0, p1) = (gauss(0.0, 0.01), gauss(1.0, 0.01));
        assert_eq!(log_ratio(5.0, &p0, &p1), LOG_RATIO_CLAMP);
        assert_eq!(log_ratio(-5.0, &p0, &p1), -LOG_RATIO_CLAMP);
    }

    proptest! {
        #[test]
        fn trace_is_prefix_sum(scores in prop::collection::vec(-3.0f64..3.0, 1..40)) {
            let (p0, p1) = (gauss(-0.2, 1.3), gauss(0.3, 0.9));
            let cfg = SprtConfig::new(0.01, 0.01, 1000).unwrap();
            let out = run_sprt(scores.iter().cloned(), &p0, &p1, &cfg).unwrap();
            let mut acc = 0.0;
            for (o, l) in scores.iter().zip(&out.trace) {
                acc += log_ratio(*o, &p0, &p1);
                prop_assert!((acc - l).abs() < 1e-12);
            }
        }

        #[test]
        fn larger_b_never_decides_h1_sooner(
            scores in prop::collection::vec(-1.0f64..3.0, 60),
            b1 in 0.5f64..5.0,
            extra in 0.0f64..5.0,
        ) {
            let (p0, p1) = (gauss(-1.0, 1.0), gauss(1.0, 1.0));
            let mk = |b: f64| SprtConfig { alpha_err: 0.01, beta_err: 0.01, a: -4.6, b, max_cycles: 1000 };
            let lo = run_sprt(scores.iter().cloned(), &p0, &p1, &mk(b1)).unwrap();
            let hi = run_sprt(scores.iter().cloned(), &p0, &p1, &mk(b1 + extra)).unwrap();
            if hi.decision == Decision::AcceptH1 {
                prop_assert_eq!(lo.decision, Decision::AcceptH1);
                prop_assert!(hi.n_used >= lo.n_used);
            }
        }

        #[test]
        fn thresholds_bracket_zero(a in 0.001f64..0.499, b in 0.001f64..0.499) {
            let (lo, hi) = wald_thresholds(a, b).unwrap();
            prop_assert!(lo < 0.0 && hi > 0.0);
        }
    }
}
