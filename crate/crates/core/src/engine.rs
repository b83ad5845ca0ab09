//! Per-update matchers.
//!
//! `gmomatch` alternates one-to-one assignment with vehicle merging until
//! every request is matched or no request-vehicle edge remains. `baseline`
//! runs a single one-to-one assignment and never merges.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::assignment::{build_bipartite, solve_assignment, FeasibilityIndex};
use crate::model::{Request, RequestId, Vehicle, VehicleId};
use crate::network::{RoadNetwork, Seconds};
use crate::vehicle_graph::{step2_loop, Step2Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matcher {
    Gmomatch,
    Baseline,
}

impl Matcher {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gmomatch => "gmomatch",
            Self::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Matcher {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gmomatch" => Ok(Self::Gmomatch),
            "baseline" => Ok(Self::Baseline),
            other => Err(format!("unknown matcher {other:?} (expected gmomatch or baseline)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateTiming {
    /// Graph construction and insertion pricing.
    pub cost_calculation: Duration,
    /// Assignment and matching solves.
    pub solution: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateOutcome {
    /// Matched requests with the vehicle that finally holds them.
    pub finalized: Vec<(RequestId, VehicleId)>,
    pub deferred: Vec<RequestId>,
    pub expired: Vec<RequestId>,
    /// Main-loop iterations that solved an assignment.
    pub iterations: usize,
    /// One report per vehicle-merging loop run.
    pub step2: Vec<Step2Report>,
    pub timing: UpdateTiming,
}

pub fn gmomatch_update(
    net: &RoadNetwork,
    now: Seconds,
    pending: &[Request],
    fleet: &mut [Vehicle],
) -> UpdateOutcome {
    update(net, now, pending, fleet, true)
}

pub fn baseline_update(
    net: &RoadNetwork,
    now: Seconds,
    pending: &[Request],
    fleet: &mut [Vehicle],
) -> UpdateOutcome {
    update(net, now, pending, fleet, false)
}

pub fn run_update(
    matcher: Matcher,
    net: &RoadNetwork,
    now: Seconds,
    pending: &[Request],
    fleet: &mut [Vehicle],
) -> UpdateOutcome {
    match matcher {
        Matcher::Gmomatch => gmomatch_update(net, now, pending, fleet),
        Matcher::Baseline => baseline_update(net, now, pending, fleet),
    }
}

fn update(
    net: &RoadNetwork,
    now: Seconds,
    pending: &[Request],
    fleet: &mut [Vehicle],
    combine: bool,
) -> UpdateOutcome {
    let mut outcome = UpdateOutcome::default();
    for v in fleet.iter_mut() {
        v.begin_update();
    }
    let pos: HashMap<VehicleId, usize> = fleet.iter().enumerate().map(|(i, v)| (v.id, i)).collect();

    let (expired, mut remaining): (Vec<&Request>, Vec<&Request>) =
        pending.iter().partition(|r| now > r.latest_departure);
    outcome.expired = expired.iter().map(|r| r.id).collect();

    let mut feasibility = FeasibilityIndex::new();
    while !remaining.is_empty() {
        let clock = Instant::now();
        let graph = build_bipartite(net, now, &remaining, fleet);
        outcome.timing.cost_calculation += clock.elapsed();
        if graph.edges.is_empty() {
            break;
        }
        feasibility.extend(graph.feasible.iter().map(|(r, vs)| (*r, vs.clone())));

        let clock = Instant::now();
        let solution = solve_assignment(&graph);
        outcome.timing.solution += clock.elapsed();
        outcome.iterations += 1;

        for m in &solution.matches {
            let edge = &graph.edges[m.edge];
            let v = &mut fleet[pos[&m.vehicle]];
            v.set_tour(edge.tour.clone());
            v.scheduled.insert(m.request);
            v.assigned.insert(m.request);
        }
        remaining.retain(|r| !solution.matches.iter().any(|m| m.request == r.id));

        if !combine {
            break;
        }
        let report = step2_loop(net, now, fleet, &feasibility);
        outcome.timing.cost_calculation += report.pricing_time;
        outcome.timing.solution += report.solving_time;
        outcome.step2.push(report);
    }

    outcome.deferred = remaining.iter().map(|r| r.id).collect();
    outcome.finalized = fleet
        .iter()
        .flat_map(|v| v.assigned.iter().map(move |r| (*r, v.id)))
        .collect();
    outcome.finalized.sort();
    outcome
}
