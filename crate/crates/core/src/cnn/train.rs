use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{loss, CnnArchitecture, CnnModel, CnnParams, TrainingMeta};
use crate::error::{GaitError, Result};
use crate::normalize::CycleMatrix;

/// A normalized cycle with its subject and session.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCycle {
    pub subject: String,
    pub session: String,
    pub x: CycleMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub q1: usize,
    pub q2: usize,
    pub features: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Training cycles per subject.
    pub n_train: usize,
    /// Test cycles per subject.
    pub n_test: usize,
    /// Validation cycles per subject, as a fraction of `n_train` (rounded up).
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            q1: 20,
            q2: 40,
            features: 40,
            learning_rate: 0.01,
            batch_size: 32,
            max_epochs: 500,
            patience: 20,
            seed: 0,
            n_train: 40,
            n_test: 100,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 || self.n_train == 0 {
            return Err(GaitError::Parameter(
                "batch_size, patience, max_epochs and n_train must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(GaitError::Parameter(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) || self.validation_fraction == 0.0 {
            return Err(GaitError::Parameter(format!(
                "validation fraction {} must be in (0, 1)",
                self.validation_fraction
            )));
        }
        Ok(())
    }

    pub fn n_validation(&self) -> usize {
        (self.validation_fraction * self.n_train as f64).ceil() as usize
    }
}

/// Indices into the dataset, paired with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub classes: Vec<String>,
    pub train: Vec<(usize, usize)>,
    pub validation: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
}

/// Per subject: shuffle (seeded), then take test, training and validation cycles.
pub fn split_dataset(data: &[LabeledCycle], cfg: &TrainConfig) -> Result<Split> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in data.iter().enumerate() {
        by_class.entry(c.subject.as_str()).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(GaitError::InsufficientData(format!(
            "training needs at least 2 subjects, found {}",
            by_class.len()
        )));
    }
    let n_val = cfg.n_validation();
    let need = cfg.n_test + cfg.n_train + n_val;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut split = Split {
        classes: Vec::new(),
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (label, (name, mut idx)) in by_class.into_iter().enumerate() {
        if idx.len() < need {
            return Err(GaitError::InsufficientData(format!(
                "subject {name} has {} cycles, needs {need} ({} test + {} train + {n_val} validation)",
                idx.len(),
                cfg.n_test,
                cfg.n_train
            )));
        }
        idx.shuffle(&mut rng);
        split.classes.push(name.to_string());
        let (test, rest) = idx.split_at(cfg.n_test);
        let (train, rest) = rest.split_at(cfg.n_train);
        split.test.extend(test.iter().map(|&i| (i, label)));
        split.train.extend(train.iter().map(|&i| (i, label)));
        split.validation.extend(rest[..n_val].iter().map(|&i| (i, label)));
    }
    Ok(split)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-cycle loss accumulated over the epoch's mini-batches.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    /// `None` when no test cycles were requested.
    pub test_accuracy: Option<f64>,
    /// `confusion[true][predicted]` on the test set.
    pub confusion: Vec<Vec<usize>>,
}

fn mean_loss(model: &CnnModel, items: &[(&CycleMatrix, usize)]) -> Result<f64> {
    let xs: Vec<&CycleMatrix> = items.iter().map(|(x, _)| *x).collect();
    let ys = model.predict_batch(&xs)?;
    let total: f64 = ys.iter().zip(items).map(|(y, (_, l))| loss(y, *l)).sum();
    Ok(total / items.len().max(1) as f64)
}

/// Accuracy and `confusion[true][predicted]`.
pub fn evaluate(model: &CnnModel, items: &[(&CycleMatrix, usize)]) -> Result<(f64, Vec<Vec<usize>>)> {
    let k = model.arch.classes;
    let mut confusion = vec![vec![0usize; k]; k];
    let xs: Vec<&CycleMatrix> = items.iter().map(|(x, _)| *x).collect();
    let ys = model.predict_batch(&xs)?;
    let mut correct = 0;
    for (y, (_, label)) in ys.iter().zip(items) {
        let pred = (0..k).fold(0, |b, j| if y[j] > y[b] { j } else { b });
        confusion[*label][pred] += 1;
        correct += usize::from(pred == *label);
    }
    Ok((correct as f64 / items.len().max(1) as f64, confusion))
}

/// Mini-batch SGD with early stopping on the validation loss; returns the
/// weights of the epoch with the lowest validation loss.
pub fn train(data: &[LabeledCycle], cfg: &TrainConfig) -> Result<(CnnModel, TrainReport)> {
    cfg.validate()?;
    let first = data
        .first()
        .ok_or_else(|| GaitError::InsufficientData("empty training set".into()))?;
    let (rows, n) = (first.x.rows, first.x.n);
    if let Some(bad) = data.iter().find(|c| c.x.rows != rows || c.x.n != n) {
        return Err(GaitError::ShapeMismatch(format!(
            "cycle of subject {} is {}×{}, expected {rows}×{n}",
            bad.subject, bad.x.rows, bad.x.n
        )));
    }
    let split = split_dataset(data, cfg)?;
    let arch = CnnArchitecture::new(rows, n, cfg.q1, cfg.q2, cfg.features, split.classes.len())?;
    let mut model = CnnModel::new(arch, CnnParams::glorot(&arch, cfg.seed), split.classes.clone())?;

    let pick = |ids: &[(usize, usize)]| -> Vec<(&CycleMatrix, usize)> {
        ids.iter().map(|&(i, l)| (&data[i].x, l)).collect()
    };
    let validation = pick(&split.validation);
    let mut order = split.train.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    let mut history = Vec::new();
    let mut best = (mean_loss(&model, &validation)?, model.params.clone(), 0usize);
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut running = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = pick(chunk);
            let (l, grad) = model.gradients(&batch)?;
            running += l;
            model.params.add_scaled(&grad, -cfg.learning_rate / batch.len() as f64);
        }
        let train_loss = running / order.len() as f64;
        let val_loss = mean_loss(&model, &validation)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(GaitError::Convergence {
                iterations: epoch,
                violation: f64::INFINITY,
            });
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, model.params.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let final_train_loss = history.last().map_or(f64::NAN, |h| h.train_loss);
    model.params = best.1;
    model.meta = TrainingMeta {
        seed: cfg.seed,
        epochs: history.len(),
        best_epoch: best.2,
        best_val_loss: best.0,
        final_train_loss,
    };
    let test = pick(&split.test);
    let (test_accuracy, confusion) = if test.is_empty() {
        (None, vec![vec![0; arch.classes]; arch.classes])
    } else {
        let (acc, conf) = evaluate(&model, &test)?;
        (Some(acc), conf)
    };
    Ok((
        model,
        TrainReport {
            history,
            best_epoch: best.2,
            test_accuracy,
            confusion,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    /// Two classes whose rows are phase-shifted sinusoids plus noise.
    fn two_class_set(per_class: usize, seed: u64) -> Vec<LabeledCycle> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut out = Vec::new();
        for (c, name) in ["left", "right"].iter().enumerate() {
            for _ in 0..per_class {
                let shift = rng.random_range(-0.2..0.2);
                let data: Vec<f64> = (0..8 * 40)
                    .map(|i| {
                        let (r, t) = (i / 40, (i % 40) as f64);
                        let sign = if c == 0 { 1.0 } else { -1.0 };
                        sign * (0.3 * t + r as f64 + shift).sin() + noise.sample(&mut rng)
                    })
                    .collect();
                out.push(LabeledCycle {
                    subject: name.to_string(),
                    session: "s".into(),
                    x: CycleMatrix::new(8, 40, data).unwrap(),
                });
            }
        }
        out
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            q1: 2,
            q2: 3,
            features: 4,
            learning_rate: 0.05,
            batch_size: 8,
            max_epochs: 200,
            patience: 20,
            seed: 11,
            n_train: 30,
            n_test: 20,
            validation_fraction: 0.2,
        }
    }

    #[test]
    fn separable_classes_are_learned() {
        let data = two_class_set(60, 1);
        let (model, report) = train(&data, &small_cfg()).unwrap();
        assert!(report.test_accuracy.unwrap() >= 0.95, "{report:?}");
        assert_eq!(model.classes, vec!["left".to_string(), "right".to_string()]);
        assert_eq!(report.confusion.iter().flatten().sum::<usize>(), 40);
    }

    #[test]
    fn training_is_deterministic() {
        let data = two_class_set(60, 2);
        let cfg = TrainConfig { max_epochs: 5, ..small_cfg() };
        let (a, ra) = train(&data, &cfg).unwrap();
        let (b, rb) = train(&data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn improving_validation_runs_to_max_epochs() {
        let data = two_class_set(60, 3);
        let cfg = TrainConfig {
            max_epochs: 8,
            learning_rate: 1e-3,
            patience: 1,
            ..small_cfg()
        };
        let (model, report) = train(&data, &cfg).unwrap();
        assert!(report.history.windows(2).all(|w| w[1].val_loss < w[0].val_loss));
        assert_eq!(report.history.len(), 8);
        assert_eq!(model.meta.best_epoch, 8);
    }

    #[test]
    fn small_learning_rate_training_loss_non_increasing() {
        let data = two_class_set(60, 4);
        let cfg = TrainConfig {
            max_epochs: 15,
            learning_rate: 1e-3,
            patience: 100,
            ..small_cfg()
        };
        let (_, report) = train(&data, &cfg).unwrap();
        for w in report.history.windows(2) {
            assert!(w[1].train_loss <= w[0].train_loss * 1.01, "{:?}", report.history);
        }
    }

    #[test]
    fn class_with_too_few_cycles_is_named() {
        let mut data = two_class_set(60, 5);
        data.truncate(60 + 10);
        match train(&data, &small_cfg()) {
            Err(GaitError::InsufficientData(m)) => assert!(m.contains("right"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
        let one_class: Vec<LabeledCycle> = two_class_set(60, 5).into_iter().take(60).collect();
        assert!(matches!(train(&one_class, &small_cfg()), Err(GaitError::InsufficientData(_))));
    }
}
