use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{seeded_rng, ScenarioError};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolarFamily {
    /// Normal per timestep, resampled until it falls inside the clamp bounds.
    #[default]
    TruncatedNormal,
    /// Normal per timestep, clipped to the clamp bounds.
    ClampedNormal,
}

/// Independent per-timestep output distribution of a reference PV panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolarModel {
    pub family: SolarFamily,
    pub mean_kw: Vec<f64>,
    pub spread_kw: Vec<f64>,
    pub panel_max_kw: f64,
}

/// Fits per-timestep sample mean and standard deviation to a
/// `days x timesteps` history matrix in kW.
pub fn fit_solar_model(
    history: &[Vec<f64>],
    panel_max_kw: f64,
    family: SolarFamily,
) -> Result<SolarModel, ScenarioError> {
    let Some(first) = history.first() else {
        return Err(ScenarioError::EmptyHistory);
    };
    if history.len() < 2 || first.is_empty() {
        return Err(ScenarioError::EmptyHistory);
    }
    let width = first.len();
    if history.iter().any(|d| d.len() != width) {
        return Err(ScenarioError::Shape("history rows differ in length".into()));
    }
    if history.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(ScenarioError::Shape("history values must be finite and >= 0".into()));
    }
    let days = history.len() as f64;
    let mut mean_kw = vec![0.0; width];
    let mut spread_kw = vec![0.0; width];
    for t in 0..width {
        let m = history.iter().map(|d| d[t]).sum::<f64>() / days;
        let var = history.iter().map(|d| (d[t] - m).powi(2)).sum::<f64>() / (days - 1.0);
        mean_kw[t] = m;
        spread_kw[t] = var.sqrt();
    }
    Ok(SolarModel { family, mean_kw, spread_kw, panel_max_kw })
}

impl SolarModel {
    pub fn timesteps(&self) -> usize {
        self.mean_kw.len()
    }

    fn draw(&self, t: usize, rng: &mut ChaCha8Rng) -> f64 {
        let (m, s) = (self.mean_kw[t], self.spread_kw[t]);
        let hi = self.panel_max_kw;
        if s <= 0.0 {
            return m.clamp(0.0, hi);
        }
        let normal = Normal::new(m, s).expect("finite spread");
        match self.family {
            SolarFamily::ClampedNormal => normal.sample(rng).clamp(0.0, hi),
            SolarFamily::TruncatedNormal => {
                for _ in 0..256 {
                    let v = normal.sample(rng);
                    if (0.0..=hi).contains(&v) {
                        return v;
                    }
                }
                // mass inside the bounds is negligible; fall back to the nearest bound
                m.clamp(0.0, hi)
            }
        }
    }

    /// Draws `n` independent profiles. Profile `i` depends only on
    /// `(seed, i)`, so the result is identical with or without threads.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        par::map_indexed(n, par::Parallelism::default(), |i| {
            let mut rng = seeded_rng(seed, "solar", i as u64);
            (0..self.timesteps()).map(|t| self.draw(t, &mut rng)).collect()
        })
    }
}

fn clear_sky(t: usize, timesteps: usize, peak_kw: f64) -> f64 {
    let hour = t as f64 * 24.0 / timesteps as f64;
    if (6.0..=18.0).contains(&hour) {
        peak_kw * (std::f64::consts::PI * (hour - 6.0) / 12.0).sin()
    } else {
        0.0
    }
}

/// Parameters of the built-in historical generator: a clear-sky bell peaking
/// at `peak_fraction * panel_max_kw`, multiplied by independent uniform
/// attenuation in `[attenuation_lo, attenuation_hi]` per timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSolar {
    pub panel_max_kw: f64,
    pub peak_fraction: f64,
    pub attenuation_lo: f64,
    pub attenuation_hi: f64,
}

impl Default for SyntheticSolar {
    fn default() -> Self {
        SyntheticSolar {
            panel_max_kw: 400.0,
            peak_fraction: 0.9,
            attenuation_lo: 0.3,
            attenuation_hi: 1.0,
        }
    }
}

impl SyntheticSolar {
    pub fn true_mean(&self, t: usize, timesteps: usize) -> f64 {
        clear_sky(t, timesteps, self.peak_fraction * self.panel_max_kw)
            * 0.5
            * (self.attenuation_lo + self.attenuation_hi)
    }

    pub fn history(&self, days: usize, timesteps: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeded_rng(seed, "solar-history", 0);
        (0..days)
            .map(|_| {
                (0..timesteps)
                    .map(|t| {
                        let a = rng.gen_range(self.attenuation_lo..=self.attenuation_hi);
                        clear_sky(t, timesteps, self.peak_fraction * self.panel_max_kw) * a
                    })
                    .collect()
            })
            .collect()
    }
}

/// Reads a `days x timesteps` history from CSV: one day per line, comma
/// separated kW values, `#` comment lines and blank lines ignored.
pub fn read_history_csv(text: &str) -> Result<Vec<Vec<f64>>, ScenarioError> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ScenarioError::Shape(format!("line {}: {e}", ln + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}
