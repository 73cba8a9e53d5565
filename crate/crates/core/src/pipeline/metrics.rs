use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::surrogate::{BinaryPredictor, Sample};

/// Class-wise accuracies and mean average precision, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionMetrics {
    pub acc0: f64,
    pub acc1: f64,
    pub map: f64,
}

/// Average precision of `scores` for the positives in `positive`, stepping
/// the precision-recall curve at each distinct score (ties share a step).
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let total_pos = positive.iter().filter(|&&p| p).count();
    if total_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut ap, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += usize::from(positive[order[i]]);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
    }
    Some(ap)
}

/// Metrics from `(prediction, label)` pairs.
pub fn metrics_from_pairs(pairs: &[(f64, u8)]) -> Result<PredictionMetrics, PipelineError> {
    let (mut n0, mut ok0, mut n1, mut ok1) = (0usize, 0usize, 0usize, 0usize);
    for &(p, y) in pairs {
        if y == 1 {
            n1 += 1;
            ok1 += usize::from(p >= 0.5);
        } else {
            n0 += 1;
            ok0 += usize::from(p < 0.5);
        }
    }
    if n0 == 0 {
        return Err(PipelineError::ClassAbsent(0));
    }
    if n1 == 0 {
        return Err(PipelineError::ClassAbsent(1));
    }
    let s1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let s0: Vec<f64> = pairs.iter().map(|p| 1.0 - p.0).collect();
    let y1: Vec<bool> = pairs.iter().map(|p| p.1 == 1).collect();
    let y0: Vec<bool> = y1.iter().map(|y| !y).collect();
    let ap1 = average_precision(&s1, &y1).expect("class present");
    let ap0 = average_precision(&s0, &y0).expect("class present");
    Ok(PredictionMetrics {
        acc0: 100.0 * ok0 as f64 / n0 as f64,
        acc1: 100.0 * ok1 as f64 / n1 as f64,
        map: 100.0 * (ap0 + ap1) / 2.0,
    })
}

/// Acc_0, Acc_1 (rounding at 0.5) and mAP over the real positions of a
/// labelled set.
pub fn evaluate_predictions(
    predictor: &dyn BinaryPredictor,
    samples: &[Sample],
) -> Result<PredictionMetrics, PipelineError> {
    let mut pairs = Vec::new();
    for s in samples {
        let probs = predictor.predict(&s.features)?;
        let n = s.labels.real_len();
        pairs.extend(probs[..n].iter().copied().zip(s.labels.real().iter().copied()));
    }
    metrics_from_pairs(&pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_precision_hand_values() {
        // Ranking: +, -, +  -> precision 1 at recall 0.5, 2/3 at recall 1.
        let ap = average_precision(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        // A tie between a positive and a negative is one step.
        let ap = average_precision(&[0.5, 0.5], &[true, false]).unwrap();
        assert!((ap - 0.5).abs() < 1e-12);
        assert_eq!(average_precision(&[0.1], &[false]), None);
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let labels = [0u8, 0, 0, 1, 0, 1];
        let perfect: Vec<_> = labels.iter().map(|&y| (f64::from(y), y)).collect();
        let m = metrics_from_pairs(&perfect).unwrap();
        assert_eq!((m.acc0, m.acc1, m.map), (100.0, 100.0, 100.0));
        let zero: Vec<_> = labels.iter().map(|&y| (0.0, y)).collect();
        let m = metrics_from_pairs(&zero).unwrap();
        assert_eq!((m.acc0, m.acc1), (100.0, 0.0));
        assert!(matches!(metrics_from_pairs(&[(0.2, 0)]), Err(PipelineError::ClassAbsent(1))));
    }
}
