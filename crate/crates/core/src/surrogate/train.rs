use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureLayout, Normalizer};
use super::model::{check_samples, BinaryPredictor, Sample, SurrogateModel};
use super::net::{Adam, ClassWeights, Layer, Network};
use super::thresholds::{thresholds_from_pairs, Thresholds};
use super::SurrogateError;
use crate::par::{self, Parallelism};
use crate::scenariogen::derive_seed;

/// Convolution stack: one convolution per entry of `conv_channels`, each
/// followed by ReLU, with average pooling after every convolution but the
/// first (skipped once the width would drop below `pool`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub pool: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig { conv_channels: vec![32, 32, 16], kernel: 3, pool: 2 }
    }
}

impl ArchConfig {
    pub fn layers(&self, layout: FeatureLayout, outputs: usize) -> Vec<Layer> {
        let mut layers = Vec::new();
        let (mut c, mut w) = (layout.channels(), layout.timesteps);
        for (i, &cout) in self.conv_channels.iter().enumerate() {
            layers.push(Layer::Conv { cin: c, cout, kernel: self.kernel });
            layers.push(Layer::Relu);
            c = cout;
            if i > 0 && self.pool > 1 && w / self.pool >= 1 {
                layers.push(Layer::AvgPool { factor: self.pool });
                w /= self.pool;
            }
        }
        layers.push(Layer::Dense { inputs: c * w, outputs });
        layers
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassWeighting {
    InverseFrequency,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub arch: ArchConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    pub weighting: ClassWeighting,
    pub seed: u64,
    /// Gradient workers; results do not depend on it.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch: ArchConfig::default(),
            epochs: 40,
            batch_size: 16,
            learning_rate: 1e-3,
            validation_fraction: 0.1,
            weighting: ClassWeighting::InverseFrequency,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
    pub class_weights: ClassWeights,
}

/// Samples per gradient chunk. Chunks are summed in order, so the result is
/// the same for any worker count.
const CHUNK: usize = 4;

/// Trains a fresh model; thresholds are left unset (see
/// [`calibrate_thresholds`]).
pub fn train(samples: &[Sample], cfg: &TrainConfig) -> Result<(SurrogateModel, TrainReport), SurrogateError> {
    let (layout, d_ev) = check_samples(samples)?;
    if cfg.batch_size == 0 || !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(SurrogateError::Shape(format!("training config {cfg:?}")));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "train-split", 0)));
    let n_val = if samples.len() > 1 {
        ((samples.len() as f64 * cfg.validation_fraction).round() as usize).min(samples.len() - 1)
    } else {
        0
    };
    let validation_indices: Vec<usize> = order[..n_val].to_vec();
    let train_indices: Vec<usize> = order[n_val..].to_vec();

    let normalizer = Normalizer::fit(train_indices.iter().map(|&i| &samples[i].features))?;
    let inputs: Vec<_> = samples
        .iter()
        .map(|s| normalizer.apply(&s.features).map(|f| f.data))
        .collect::<Result<_, _>>()?;

    let (ones, total) = train_indices.iter().fold((0, 0), |(o, t), &i| {
        let l = &samples[i].labels;
        (o + l.ones(), t + l.real_len())
    });
    let weights = match cfg.weighting {
        ClassWeighting::InverseFrequency => ClassWeights::inverse_frequency(ones, total),
        ClassWeighting::Uniform => ClassWeights::UNIT,
    };

    let outputs = layout.e_max * d_ev;
    let mut network = Network::new(
        (layout.channels(), layout.timesteps),
        cfg.arch.layers(layout, outputs),
        derive_seed(cfg.seed, "train-init", 0),
    )?;
    if total > 0 {
        let prior = (ones as f64 / total as f64).clamp(1e-4, 1.0 - 1e-4);
        network.set_output_bias((prior / (1.0 - prior)).ln());
    }
    let mut adam = Adam::new(network.param_count(), cfg.learning_rate);
    let mode = Parallelism::from_workers(cfg.workers);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "train-shuffle", 0));
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut batch_order = train_indices.clone();

    for epoch in 0..cfg.epochs {
        batch_order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in batch_order.chunks(cfg.batch_size) {
            let chunks: Vec<&[usize]> = batch.chunks(CHUNK).collect();
            let net = &network;
            let parts = par::with_workers(cfg.workers, || {
                par::map_slice(&chunks, mode, |chunk| {
                    let mut grad = vec![0.0; net.param_count()];
                    let mut loss = 0.0;
                    for &i in *chunk {
                        let l = &samples[i].labels;
                        let (li, gi) = net.loss_and_grad(inputs[i].view(), &l.bits, l.real_len(), weights)?;
                        loss += li;
                        for (g, v) in grad.iter_mut().zip(gi) {
                            *g += v;
                        }
                    }
                    Ok::<_, SurrogateError>((loss, grad))
                })
            });
            let mut grad = vec![0.0; network.param_count()];
            for part in parts {
                let (loss, g) = part?;
                epoch_loss += loss;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.update(&mut network.params, &grad);
        }
        let validation_loss = if validation_indices.is_empty() {
            None
        } else {
            let mut sum = 0.0;
            for &i in &validation_indices {
                let l = &samples[i].labels;
                sum += network.loss(inputs[i].view(), &l.bits, l.real_len(), weights)?;
            }
            Some(sum / validation_indices.len() as f64)
        };
        let stats = EpochStats {
            epoch,
            train_loss: epoch_loss / train_indices.len().max(1) as f64,
            validation_loss,
        };
        log::debug!("epoch {epoch}: train {:.5} validation {:?}", stats.train_loss, stats.validation_loss);
        history.push(stats);
    }

    let model = SurrogateModel { layout, d_ev, normalizer, network, thresholds: None };
    Ok((model, TrainReport { history, train_indices, validation_indices, class_weights: weights }))
}

/// Mean probability of the true class over the real (unpadded) positions of
/// `samples`, per class.
pub fn calibrate_thresholds(model: &dyn BinaryPredictor, samples: &[Sample]) -> Result<Thresholds, SurrogateError> {
    let mut pairs = Vec::new();
    for s in samples {
        let probs = model.predict(&s.features)?;
        let n = s.labels.real_len();
        pairs.extend(probs[..n].iter().copied().zip(s.labels.real().iter().copied()));
    }
    thresholds_from_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenariogen::{JobSchedule, JobTriple, LoadProfiles};
    use crate::surrogate::{encode_features, LabelVector};
    use crate::topology::NodeId;

    fn sample(node: u32, ev_count: usize, e_max: usize, seed: usize) -> Sample {
        let loads = LoadProfiles { p_kw: vec![vec![1.0 + seed as f64; 6]], q_kvar: vec![vec![0.5; 6]] };
        let triples = (0..ev_count).map(|ev| JobTriple { ev, node: NodeId(node), timespan: ev }).collect();
        let features = encode_features(&[0.0, 1.0, 2.0, 2.0, 1.0, 0.0], &loads, &JobSchedule { triples }, ev_count, e_max)
            .unwrap();
        let d_ev = 3;
        let mut bits = vec![0u8; e_max * d_ev];
        for ev in 0..ev_count {
            bits[ev * d_ev + (node as usize % d_ev)] = 1;
        }
        Sample { features, labels: LabelVector { bits, ev_count, e_max, d_ev } }
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            arch: ArchConfig { conv_channels: vec![4, 4], kernel: 3, pool: 2 },
            epochs: 30,
            batch_size: 4,
            learning_rate: 0.01,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn deterministic_for_any_worker_count() {
        let data: Vec<Sample> = (0..10).map(|i| sample(1 + i as u32 % 3, 1 + i % 2, 2, i)).collect();
        let (a, ra) = train(&data, &small_cfg()).unwrap();
        let (b, rb) = train(&data, &TrainConfig { workers: 3, ..small_cfg() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(ra.validation_indices.len(), 1);
    }

    #[test]
    fn single_sample_loss_decreases() {
        let data = vec![sample(2, 1, 2, 0)];
        let cfg = TrainConfig { epochs: 15, learning_rate: 1e-3, ..small_cfg() };
        let (_, report) = train(&data, &cfg).unwrap();
        assert!(report.validation_indices.is_empty());
        for w in report.history.windows(2) {
            assert!(w[1].train_loss < w[0].train_loss, "{:?}", report.history);
        }
    }

    #[test]
    fn all_zero_labels_give_zero_predictions() {
        let mut data: Vec<Sample> = (0..6).map(|i| sample(1, 1, 1, i)).collect();
        for s in &mut data {
            s.labels.bits.fill(0);
        }
        let (model, _) = train(&data, &small_cfg()).unwrap();
        for s in &data {
            assert!(model.predict(&s.features).unwrap().iter().all(|&p| p < 0.5));
        }
    }

    #[test]
    fn inconsistent_shapes_rejected() {
        let data = vec![sample(1, 1, 2, 0), sample(1, 1, 3, 0)];
        assert!(matches!(train(&data, &small_cfg()), Err(SurrogateError::Shape(_))));
        assert!(matches!(train(&[], &small_cfg()), Err(SurrogateError::Empty)));
    }
}
