use proptest::prelude::*;

use gaitkit::cnn::{train, LabeledCycle, TrainConfig};
use gaitkit::config::PipelineConfig;
use gaitkit::container::{read_cnn, read_cycle_dataset, write_cnn, write_cycle_dataset, CycleDataset};
use gaitkit::eval::synth_cycles;
use gaitkit::normalize::CycleMatrix;
use gaitkit::GaitError;

fn small() -> TrainConfig {
    TrainConfig {
        q1: 3,
        q2: 4,
        features: 6,
        n_train: 10,
        n_test: 5,
        max_epochs: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn trained_network_round_trips_and_predicts_identically() {
    let data = synth_cycles(&[1, 2], 0, 1, 30.0, &PipelineConfig::default()).unwrap();
    let (model, _) = train(&data, &small()).unwrap();
    let text = write_cnn(&model).unwrap();
    let back = read_cnn(&text).unwrap();
    assert_eq!(write_cnn(&back).unwrap(), text);
    let x = &data[0].x;
    let (a, b) = (model.extract_features(x).unwrap(), back.extract_features(x).unwrap());
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() <= 1e-7 * u.abs().max(1.0));
    }
}

#[test]
fn seeded_training_is_deterministic() {
    let data = synth_cycles(&[3, 4], 0, 1, 30.0, &PipelineConfig::default()).unwrap();
    let a = write_cnn(&train(&data, &small()).unwrap().0).unwrap();
    let b = write_cnn(&train(&data, &small()).unwrap().0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn future_version_is_rejected() {
    let text = "#gaitkit-cyc v9 rows=4 n=3\n";
    assert!(matches!(read_cycle_dataset(text), Err(GaitError::UnsupportedVersion { .. })));
}

proptest! {
    #[test]
    fn cycle_datasets_round_trip(values in prop::collection::vec(-1e6f64..1e6, 4 * 5 * 3), names in prop::collection::vec("[a-z0-9]{1,6}", 3)) {
        let items: Vec<LabeledCycle> = values
            .chunks(4 * 5)
            .zip(&names)
            .map(|(v, name)| LabeledCycle {
                subject: name.clone(),
                session: "w0".into(),
                x: CycleMatrix::new(4, 5, v.to_vec()).unwrap(),
            })
            .collect();
        let ds = CycleDataset::new(4, 5, items).unwrap();
        let text = write_cycle_dataset(&ds).unwrap();
        let back = read_cycle_dataset(&text).unwrap();
        prop_assert_eq!(write_cycle_dataset(&back).unwrap(), text);
        for (a, b) in ds.items.iter().zip(&back.items) {
            for (u, v) in a.x.data.iter().zip(&b.x.data) {
                prop_assert!((u - v).abs() <= 1e-8 * u.abs().max(1e-300));
            }
        }
    }
}
