use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{seeded_rng, span_start_hour, ScenarioError};
use crate::topology::{NodeId, TransportNetwork};

/// EV `ev` must depart from `node` during timespan `timespan`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JobTriple {
    pub ev: usize,
    pub node: NodeId,
    pub timespan: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSchedule {
    pub triples: Vec<JobTriple>,
}

impl JobSchedule {
    pub fn for_ev(&self, ev: usize) -> impl Iterator<Item = &JobTriple> {
        self.triples.iter().filter(move |t| t.ev == ev)
    }

    pub fn validate(
        &self,
        ev_count: usize,
        tn: &TransportNetwork,
        timespans: usize,
    ) -> Result<(), ScenarioError> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.triples {
            if t.ev >= ev_count {
                return Err(ScenarioError::Invalid(format!("schedule names EV {}", t.ev)));
            }
            if tn.node_position(t.node).is_none() {
                return Err(ScenarioError::Invalid(format!("schedule node {} unknown", t.node)));
            }
            if t.timespan >= timespans {
                return Err(ScenarioError::Invalid(format!("schedule timespan {}", t.timespan)));
            }
            if !seen.insert((t.ev, t.timespan)) {
                return Err(ScenarioError::Invalid(format!(
                    "EV {} scheduled twice in timespan {}",
                    t.ev, t.timespan
                )));
            }
        }
        Ok(())
    }
}

/// Shift time windows of the schedule template, in hours of the day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub first_shift: (f64, f64),
    pub second_shift: (f64, f64),
    /// Extra timespans per arc assumed when checking that consecutive jobs are
    /// reachable; matches the congestion delay of the expansion.
    pub worst_case_delay: u32,
    pub max_redraws: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            first_shift: (6.0, 12.0),
            second_shift: (14.0, 22.0),
            worst_case_delay: 1,
            max_redraws: 200,
        }
    }
}

fn window_spans(window: (f64, f64), timesteps: usize) -> Result<Vec<usize>, ScenarioError> {
    if window.1 - window.0 < 24.0 / timesteps as f64 {
        return Err(ScenarioError::EmptyWindow(window));
    }
    let spans: Vec<usize> = (0..timesteps - 1)
        .filter(|&s| {
            let h = span_start_hour(s, timesteps);
            h >= window.0 && h < window.1
        })
        .collect();
    if spans.is_empty() {
        Err(ScenarioError::EmptyWindow(window))
    } else {
        Ok(spans)
    }
}

/// Draws four jobs per EV: start node at the first timespan, one shift in each
/// window, and the destination at the last timespan. Shift times are redrawn
/// until every leg is reachable even if every arc is congested.
pub fn sample_schedules(
    tn: &TransportNetwork,
    ev_count: usize,
    timesteps: usize,
    cfg: &ScheduleConfig,
    seed: u64,
) -> Result<JobSchedule, ScenarioError> {
    let nodes = tn
        .schedule_nodes
        .as_ref()
        .ok_or_else(|| ScenarioError::Invalid("network has no schedule node pools".into()))?;
    if nodes.pairs.is_empty() || nodes.pool_a.is_empty() || nodes.pool_b.is_empty() {
        return Err(ScenarioError::Invalid("empty schedule node pool".into()));
    }
    if timesteps < 2 {
        return Err(ScenarioError::Invalid("horizon too short".into()));
    }
    let first = window_spans(cfg.first_shift, timesteps)?;
    let second = window_spans(cfg.second_shift, timesteps)?;
    let last = timesteps - 2;
    let tt = tn.travel_times(cfg.worst_case_delay);
    let reach = |a: NodeId, b: NodeId| -> Option<usize> {
        let (i, j) = (tn.node_position(a)?, tn.node_position(b)?);
        tt[i][j].map(|v| v as usize)
    };

    let mut triples = Vec::with_capacity(4 * ev_count);
    for ev in 0..ev_count {
        let mut rng = seeded_rng(seed, "schedule", ev as u64);
        let &(start, dest) = nodes.pairs.choose(&mut rng).expect("non-empty");
        let (pool1, pool2) = if nodes.pool_a_starts.contains(&start) {
            (&nodes.pool_a, &nodes.pool_b)
        } else {
            (&nodes.pool_b, &nodes.pool_a)
        };
        let n1 = *pool1.choose(&mut rng).expect("non-empty");
        let n2 = *pool2.choose(&mut rng).expect("non-empty");
        let mut drawn = None;
        for _ in 0..cfg.max_redraws {
            let s1 = first[rng.gen_range(0..first.len())];
            let s2 = second[rng.gen_range(0..second.len())];
            let legs = [(start, n1, 0, s1), (n1, n2, s1, s2), (n2, dest, s2, last)];
            let ok = 0 < s1
                && s1 < s2
                && s2 < last
                && legs
                    .iter()
                    .all(|&(a, b, sa, sb)| reach(a, b).is_some_and(|d| sa + d <= sb));
            if ok {
                drawn = Some((s1, s2));
                break;
            }
        }
        let (s1, s2) = drawn.ok_or(ScenarioError::Unreachable(ev))?;
        triples.push(JobTriple { ev, node: start, timespan: 0 });
        triples.push(JobTriple { ev, node: n1, timespan: s1 });
        triples.push(JobTriple { ev, node: n2, timespan: s2 });
        triples.push(JobTriple { ev, node: dest, timespan: last });
    }
    let schedule = JobSchedule { triples };
    schedule.validate(ev_count, tn, timesteps - 1)?;
    Ok(schedule)
}
