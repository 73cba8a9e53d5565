mod common;

use common::*;
use evjrs::scenariogen::micro::micro_instance;
use evjrs::surrogate::{
    calibrate_thresholds, encode_instance, train, ArchConfig, BinaryPredictor, FeatureLayout, FeatureMap, Sample,
    SurrogateError, SurrogateModel, TrainConfig, MODEL_MAGIC,
};

fn small_cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        arch: ArchConfig { conv_channels: vec![4, 4], kernel: 3, pool: 2 },
        epochs,
        batch_size: 4,
        learning_rate: 1e-2,
        seed: 9,
        ..TrainConfig::default()
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let worst = gradient_check(5, 17);
    assert!(worst <= 1e-4, "relative gradient error {worst}");
}

#[test]
fn padding_strips_and_restores() {
    let inst = micro_instance();
    let padded = encode_instance(&inst, 0, 4).unwrap();
    assert_eq!(padded.layout.e_max, 4);
    let rows = padded.layout.channels();
    let real = padded.layout.schedule_row(inst.ev_count());
    assert!(padded.data.slice(ndarray::s![real..rows, ..]).iter().all(|&v| v == 0.0));
    let stripped = padded.strip_padding();
    assert_eq!(stripped.layout.e_max, inst.ev_count());
    assert_eq!(stripped, encode_instance(&inst, 0, inst.ev_count()).unwrap());
    assert_eq!(stripped.pad_to(4).unwrap(), padded);
    assert!(matches!(padded.pad_to(0), Err(SurrogateError::TooManyEvs { .. })));
}

/// Scores each position from the sample's own features so that padded and
/// unpadded encodings give the same real-position outputs.
struct Echo {
    layout: FeatureLayout,
    d_ev: usize,
}

impl BinaryPredictor for Echo {
    fn layout(&self) -> FeatureLayout {
        self.layout
    }
    fn d_ev(&self) -> usize {
        self.d_ev
    }
    fn predict(&self, f: &FeatureMap) -> Result<Vec<f64>, SurrogateError> {
        let mut out = Vec::new();
        for ev in 0..self.layout.e_max {
            for k in 0..self.d_ev {
                if ev < f.ev_count {
                    let node = f.data.row(self.layout.schedule_row(ev)).iter().copied().fold(0.0, f64::max);
                    out.push(if node as usize == k + 1 { 0.8 } else { 0.1 + 0.05 * k as f64 });
                } else {
                    // Padding: confidently wrong, must not move the thresholds.
                    out.push(0.999);
                }
            }
        }
        Ok(out)
    }
}

#[test]
fn calibration_ignores_padded_positions() {
    let tight = synthetic_samples(6, 2, 2, 4);
    let loose: Vec<Sample> = synthetic_samples(6, 2, 5, 4);
    let a = Echo { layout: tight[0].features.layout, d_ev: 4 };
    let b = Echo { layout: loose[0].features.layout, d_ev: 4 };
    let ta = calibrate_thresholds(&a, &tight).unwrap();
    let tb = calibrate_thresholds(&b, &loose).unwrap();
    assert_eq!(ta, tb);
    assert!((ta.p1 - 0.8).abs() < 1e-12);
}

#[test]
fn trained_model_round_trips_through_its_file() {
    let samples = synthetic_samples(12, 2, 3, 1);
    let (mut model, report) = train(&samples, &small_cfg(3)).unwrap();
    assert_eq!(report.history.len(), 3);
    assert_eq!(report.train_indices.len() + report.validation_indices.len(), 12);
    model.thresholds = Some(calibrate_thresholds(&model, &samples).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    model.save(&path).unwrap();
    let back = SurrogateModel::load(&path).unwrap();
    assert_eq!(back, model);
    for s in &samples {
        let p = model.predict(&s.features).unwrap();
        assert_eq!(p, back.predict(&s.features).unwrap());
        assert!(p.iter().all(|&y| y > 0.0 && y < 1.0));
    }

    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.starts_with(MODEL_MAGIC));
    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    assert!(SurrogateModel::read_from(bad.as_slice()).is_err());
    assert!(SurrogateModel::read_from(&bytes[..bytes.len() - 3]).is_err());
}

#[test]
fn one_model_serves_every_ev_count_up_to_capacity() {
    let mut samples = synthetic_samples(6, 1, 3, 2);
    samples.extend(synthetic_samples(6, 3, 3, 3));
    let (model, _) = train(&samples, &small_cfg(2)).unwrap();
    for k in 1..=3 {
        let s = &synthetic_samples(1, k, 3, 40 + k as u64)[0];
        assert_eq!(model.predict(&s.features).unwrap().len(), 3 * 4);
        assert_eq!(model.predict_stripped(&s.features).unwrap().len(), k * 4);
    }
    let over = &synthetic_samples(1, 4, 4, 1)[0];
    assert!(model.predict(&over.features).is_err());
}

#[test]
fn training_reduces_the_loss() {
    let samples = synthetic_samples(16, 2, 2, 5);
    let (_, report) = train(&samples, &small_cfg(25)).unwrap();
    let first = report.history.first().unwrap().train_loss;
    let last = report.history.last().unwrap().train_loss;
    assert!(last < 0.7 * first, "{first} -> {last}");
}
