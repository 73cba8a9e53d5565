use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::mipcore::{Solution, VariableIndex};

/// Binary targets of one deterministic sample, EV-major with stride `d_ev`,
/// padded with zero blocks up to `e_max` EVs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    pub bits: Vec<u8>,
    pub ev_count: usize,
    pub e_max: usize,
    pub d_ev: usize,
}

impl LabelVector {
    /// Number of leading positions that belong to real EVs.
    pub fn real_len(&self) -> usize {
        self.ev_count * self.d_ev
    }

    pub fn real(&self) -> &[u8] {
        &self.bits[..self.real_len()]
    }

    pub fn ones(&self) -> usize {
        self.real().iter().filter(|&&b| b == 1).count()
    }
}

pub fn extract_labels(sol: &Solution, ix: &VariableIndex, e_max: usize) -> Result<LabelVector, SurrogateError> {
    if ix.dims.scenarios != 1 {
        return Err(SurrogateError::NotDeterministic(ix.dims.scenarios));
    }
    if !sol.is_feasible() || sol.values.len() != ix.len() {
        return Err(SurrogateError::NoSolution);
    }
    let evs = ix.dims.evs;
    if evs > e_max {
        return Err(SurrogateError::TooManyEvs { evs, e_max });
    }
    let d_ev = ix.d_ev();
    let mut bits = sol.binaries(ix);
    bits.resize(e_max * d_ev, 0);
    Ok(LabelVector { bits, ev_count: evs, e_max, d_ev })
}
