use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::mipcore::PartialAssignment;

/// Step applied to `p1` after an infeasible assisted solve.
pub const BUMP_STEP: f64 = 0.1;

/// Mean probability of the true class, for label-0 (`p0`) and label-1
/// (`p1`) positions. A prediction is fixed to 1 when `yhat >= p1` and to 0
/// when `1 - yhat >= p0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub p0: f64,
    pub p1: f64,
}

impl Thresholds {
    pub fn new(p0: f64, p1: f64) -> Result<Self, SurrogateError> {
        if !(0.0..=1.0).contains(&p0) || !(0.0..=1.0).contains(&p1) {
            return Err(SurrogateError::Thresholds(p0, p1));
        }
        Ok(Thresholds { p0, p1 })
    }
}

/// Thresholds from `(prediction, label)` pairs.
pub fn thresholds_from_pairs(pairs: impl IntoIterator<Item = (f64, u8)>) -> Result<Thresholds, SurrogateError> {
    let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
    for (yhat, y) in pairs {
        if y == 1 {
            s1 += yhat;
            n1 += 1;
        } else {
            s0 += 1.0 - yhat;
            n0 += 1;
        }
    }
    if n0 == 0 {
        return Err(SurrogateError::ClassAbsent(0));
    }
    if n1 == 0 {
        return Err(SurrogateError::ClassAbsent(1));
    }
    Thresholds::new((s0 / n0 as f64).clamp(0.0, 1.0), (s1 / n1 as f64).clamp(0.0, 1.0))
}

/// Fixing decision for one prediction. When both rules fire the more
/// probable class wins, ties going to 1.
pub fn fix_decision(yhat: f64, th: Thresholds) -> Option<bool> {
    let one = yhat >= th.p1;
    let zero = 1.0 - yhat >= th.p0;
    match (one, zero) {
        (true, true) => Some(yhat >= 0.5),
        (true, false) => Some(true),
        (false, true) => Some(false),
        (false, false) => None,
    }
}

/// Keys are positions in `probs`.
pub fn filter_predictions(probs: &[f64], th: Thresholds) -> PartialAssignment {
    let mut a = PartialAssignment::default();
    for (i, &p) in probs.iter().enumerate() {
        if let Some(v) = fix_decision(p, th) {
            a.insert(i, v);
        }
    }
    a
}

/// Raises `p1` by [`BUMP_STEP`], snapping to 1 within rounding error.
pub fn bump_threshold(th: Thresholds) -> Thresholds {
    let p1 = th.p1 + BUMP_STEP;
    Thresholds { p0: th.p0, p1: if p1 >= 1.0 - 1e-9 { 1.0 } else { p1 } }
}

/// Assisted attempts the retry loop may make from `p1`, before fallback.
pub fn max_attempts(p1: f64) -> usize {
    ((1.0 - p1) / BUMP_STEP - 1e-9).ceil().max(0.0) as usize + 1
}
