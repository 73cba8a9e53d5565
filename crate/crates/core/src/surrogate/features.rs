use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::scenariogen::{JobSchedule, LoadProfiles, ProblemInstance};

/// Channel arrangement of a feature map: one solar row, `buses` active-load
/// rows, `buses` reactive-load rows, then `e_max` schedule rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub buses: usize,
    pub e_max: usize,
    pub timesteps: usize,
}

impl FeatureLayout {
    pub fn channels(&self) -> usize {
        1 + 2 * self.buses + self.e_max
    }

    pub fn schedule_row(&self, ev: usize) -> usize {
        1 + 2 * self.buses + ev
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub layout: FeatureLayout,
    /// Real EVs; schedule rows from here on are padding.
    pub ev_count: usize,
    /// `channels × timesteps`.
    pub data: Array2<f64>,
    pub normalized: bool,
}

impl FeatureMap {
    /// The same map with padding rows removed and `e_max` lowered to the
    /// real EV count.
    pub fn strip_padding(&self) -> FeatureMap {
        let layout = FeatureLayout { e_max: self.ev_count, ..self.layout };
        FeatureMap {
            layout,
            ev_count: self.ev_count,
            data: self.data.slice(s![..layout.channels(), ..]).to_owned(),
            normalized: self.normalized,
        }
    }

    /// Re-pads to a larger `e_max` with zero rows.
    pub fn pad_to(&self, e_max: usize) -> Result<FeatureMap, SurrogateError> {
        if e_max < self.ev_count {
            return Err(SurrogateError::TooManyEvs { evs: self.ev_count, e_max });
        }
        let layout = FeatureLayout { e_max, ..self.layout };
        let mut data = Array2::zeros((layout.channels(), layout.timesteps));
        let keep = self.layout.schedule_row(self.ev_count);
        data.slice_mut(s![..keep, ..]).assign(&self.data.slice(s![..keep, ..]));
        Ok(FeatureMap { layout, ev_count: self.ev_count, data, normalized: self.normalized })
    }
}

/// Raw (unnormalised) feature map. `solar` is the aggregate PV availability
/// per timestep; an empty slice means no PV.
pub fn encode_features(
    solar: &[f64],
    loads: &LoadProfiles,
    schedule: &JobSchedule,
    ev_count: usize,
    e_max: usize,
) -> Result<FeatureMap, SurrogateError> {
    if ev_count > e_max {
        return Err(SurrogateError::TooManyEvs { evs: ev_count, e_max });
    }
    let timesteps = loads.timesteps();
    if !solar.is_empty() && solar.len() != timesteps {
        return Err(SurrogateError::Shape(format!("solar has {} points, loads {timesteps}", solar.len())));
    }
    let layout = FeatureLayout { buses: loads.p_kw.len(), e_max, timesteps };
    let mut data = Array2::zeros((layout.channels(), timesteps));
    for (t, &v) in solar.iter().enumerate() {
        data[[0, t]] = v;
    }
    for (b, (p, q)) in loads.p_kw.iter().zip(&loads.q_kvar).enumerate() {
        for t in 0..timesteps {
            data[[1 + b, t]] = p[t];
            data[[1 + layout.buses + b, t]] = q[t];
        }
    }
    for job in &schedule.triples {
        if job.ev >= ev_count {
            return Err(SurrogateError::Shape(format!("schedule names EV {} of {ev_count}", job.ev)));
        }
        if job.timespan >= timesteps {
            return Err(SurrogateError::Shape(format!("schedule timespan {}", job.timespan)));
        }
        data[[layout.schedule_row(job.ev), job.timespan]] = f64::from(job.node.0);
    }
    Ok(FeatureMap { layout, ev_count, data, normalized: false })
}

/// Feature map of one scenario of an instance.
pub fn encode_instance(inst: &ProblemInstance, sc: usize, e_max: usize) -> Result<FeatureMap, SurrogateError> {
    let p = inst.parts();
    if sc >= inst.scenario_count() {
        return Err(SurrogateError::Shape(format!("scenario {sc} of {}", inst.scenario_count())));
    }
    encode_features(&p.scenarios.aggregate(sc), &p.loads, &p.schedule, inst.ev_count(), e_max)
}

/// Per-channel min-max scaling fitted on training maps. Padding rows are
/// ignored when fitting and stay exactly zero when applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit<'a>(maps: impl IntoIterator<Item = &'a FeatureMap>) -> Result<Self, SurrogateError> {
        let mut layout = None;
        let mut min: Vec<f64> = Vec::new();
        let mut max: Vec<f64> = Vec::new();
        for m in maps {
            if m.normalized {
                return Err(SurrogateError::Shape("normalizer fitted on normalized maps".into()));
            }
            match layout {
                None => {
                    layout = Some(m.layout);
                    min = vec![f64::INFINITY; m.layout.channels()];
                    max = vec![f64::NEG_INFINITY; m.layout.channels()];
                }
                Some(l) if l != m.layout => {
                    return Err(SurrogateError::Shape(format!("{:?} vs {l:?}", m.layout)));
                }
                Some(_) => {}
            }
            let real = m.layout.schedule_row(m.ev_count);
            for (c, row) in m.data.rows().into_iter().enumerate().take(real) {
                for &v in row {
                    min[c] = min[c].min(v);
                    max[c] = max[c].max(v);
                }
            }
        }
        if layout.is_none() {
            return Err(SurrogateError::Empty);
        }
        // Channels never seen (padding in every map) map to zero.
        for c in 0..min.len() {
            if !min[c].is_finite() {
                min[c] = 0.0;
                max[c] = 0.0;
            }
        }
        Ok(Normalizer { min, max })
    }

    pub fn apply(&self, map: &FeatureMap) -> Result<FeatureMap, SurrogateError> {
        if map.normalized {
            return Ok(map.clone());
        }
        if map.layout.channels() != self.min.len() {
            return Err(SurrogateError::Shape(format!(
                "{} channels, normalizer has {}",
                map.layout.channels(),
                self.min.len()
            )));
        }
        let mut data = map.data.clone();
        let real = map.layout.schedule_row(map.ev_count);
        for (c, mut row) in data.rows_mut().into_iter().enumerate() {
            if c >= real {
                row.fill(0.0);
                continue;
            }
            let span = self.max[c] - self.min[c];
            let lo = self.min[c];
            row.mapv_inplace(|v| if span > 0.0 { (v - lo) / span } else { v - lo });
        }
        Ok(FeatureMap { data, normalized: true, ..map.clone() })
    }
}
