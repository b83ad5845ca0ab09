//! Combining requests by matching assigned vehicles with each other.
//!
//! Nodes are the vehicles that received requests during the current update.
//! A directed edge `donor -> recipient` means every request the donor was
//! assigned in this update can be moved into the recipient's tour. Only
//! vehicles that were idle when the update started may donate, a donor must
//! not carry more committed passengers than its recipient, and the recipient
//! must have a seat for each moved request. Edges are priced with
//! [`split_merge_cost`] and the cheapest set of disjoint merges is found as a
//! maximum-weight matching.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use crate::assignment::FeasibilityIndex;
use crate::blossom;
use crate::model::{Tour, Vehicle, VehicleId};
use crate::network::{RoadNetwork, Seconds};
use crate::scheduling::split_merge_cost;

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleEdge {
    pub donor: VehicleId,
    pub recipient: VehicleId,
    pub cost: Seconds,
    pub merged_tour: Tour,
    donor_revision: u64,
    recipient_revision: u64,
}

impl VehicleEdge {
    /// An edge not tied to any particular vehicle revision.
    pub fn new(donor: VehicleId, recipient: VehicleId, cost: Seconds, merged_tour: Tour) -> Self {
        Self {
            donor,
            recipient,
            cost,
            merged_tour,
            donor_revision: 0,
            recipient_revision: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VehicleGraph {
    pub nodes: Vec<VehicleId>,
    pub edges: Vec<VehicleEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergePair {
    pub donor: VehicleId,
    pub recipient: VehicleId,
    /// Index into [`VehicleGraph::edges`].
    pub edge: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VehicleMatching {
    pub pairs: Vec<MergePair>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApplyReport {
    pub applied: Vec<(VehicleId, VehicleId)>,
    /// Pairs whose vehicles changed after pricing; they need re-pricing.
    pub stale: Vec<(VehicleId, VehicleId)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Step2Report {
    /// Assigned vehicles when the loop started.
    pub initial_assigned: usize,
    /// Vehicle graphs built, including the final one without edges.
    pub iterations: usize,
    pub merges: usize,
    /// Wall-clock time spent building and pricing vehicle graphs.
    pub pricing_time: Duration,
    /// Wall-clock time spent in the matching solver.
    pub solving_time: Duration,
}

fn candidate_recipients(donor: &Vehicle, feasibility: &FeasibilityIndex) -> BTreeSet<VehicleId> {
    donor
        .assigned
        .iter()
        .filter_map(|r| feasibility.get(r))
        .flatten()
        .copied()
        .filter(|&v| v != donor.id)
        .collect()
}

/// Whether `donor -> recipient` passes the structural merge constraints.
pub fn can_donate(donor: &Vehicle, recipient: &Vehicle) -> bool {
    donor.id != recipient.id
        && !donor.assigned.is_empty()
        && donor.idle_before_update()
        && donor.occupants() <= recipient.occupants()
        && donor.assigned.len() <= recipient.available_capacity()
}

pub fn build_vehicle_graph(
    net: &RoadNetwork,
    now: Seconds,
    fleet: &[Vehicle],
    feasibility: &FeasibilityIndex,
) -> VehicleGraph {
    let assigned: Vec<&Vehicle> = fleet.iter().filter(|v| !v.assigned.is_empty()).collect();
    let mut graph = VehicleGraph {
        nodes: assigned.iter().map(|v| v.id).collect(),
        edges: Vec::new(),
    };
    for donor in &assigned {
        if !donor.idle_before_update() {
            continue;
        }
        let reachable = candidate_recipients(donor, feasibility);
        for recipient in &assigned {
            if !reachable.contains(&recipient.id) || !can_donate(donor, recipient) {
                continue;
            }
            if let Some(ins) = split_merge_cost(net, now, donor, recipient) {
                graph.edges.push(VehicleEdge {
                    donor: donor.id,
                    recipient: recipient.id,
                    cost: ins.cost,
                    merged_tour: ins.tour,
                    donor_revision: donor.revision,
                    recipient_revision: recipient.revision,
                });
            }
        }
    }
    graph
}

/// Picks disjoint merges: as many as possible, and among those the set with
/// the lowest total merged-tour cost.
///
/// Directed edges collapse to one undirected edge per vehicle pair, keeping
/// the cheaper direction (the smaller donor id on ties). Costs become weights
/// `K - cost` with `K` one above the largest cost, and the blossom solver runs
/// in maximum-cardinality mode.
pub fn max_weight_matching(graph: &VehicleGraph) -> VehicleMatching {
    if graph.edges.is_empty() {
        return VehicleMatching::default();
    }
    let index: HashMap<VehicleId, usize> =
        graph.nodes.iter().enumerate().map(|(i, v)| (*v, i)).collect();

    let mut undirected: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (k, e) in graph.edges.iter().enumerate() {
        let (a, b) = (index[&e.donor], index[&e.recipient]);
        let key = (a.min(b), a.max(b));
        undirected
            .entry(key)
            .and_modify(|cur| {
                let c = &graph.edges[*cur];
                if (e.cost, e.donor) < (c.cost, c.donor) {
                    *cur = k;
                }
            })
            .or_insert(k);
    }

    let ceiling = graph.edges.iter().map(|e| e.cost).max().unwrap_or(0) + 1;
    let keys: Vec<((usize, usize), usize)> = undirected.into_iter().collect();
    let weighted: Vec<(usize, usize, i64)> = keys
        .iter()
        .map(|&((a, b), k)| (a, b, ceiling - graph.edges[k].cost))
        .collect();
    let mate = blossom::max_weight_matching(graph.nodes.len(), &weighted, true);

    let mut pairs: Vec<MergePair> = keys
        .iter()
        .filter(|((a, b), _)| mate[*a] == Some(*b))
        .map(|&(_, k)| MergePair {
            donor: graph.edges[k].donor,
            recipient: graph.edges[k].recipient,
            edge: k,
        })
        .collect();
    pairs.sort_by_key(|p| (p.donor, p.recipient));
    VehicleMatching { pairs }
}

/// Moves each donor's assigned requests into its recipient, which adopts the
/// priced merged tour. Donors end idle with nothing assigned.
pub fn apply_matching(
    matching: &VehicleMatching,
    graph: &VehicleGraph,
    fleet: &mut [Vehicle],
) -> ApplyReport {
    let pos: HashMap<VehicleId, usize> = fleet.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
    let mut report = ApplyReport::default();
    for pair in &matching.pairs {
        let edge = &graph.edges[pair.edge];
        let (di, ri) = (pos[&edge.donor], pos[&edge.recipient]);
        if fleet[di].revision != edge.donor_revision || fleet[ri].revision != edge.recipient_revision {
            report.stale.push((edge.donor, edge.recipient));
            continue;
        }
        let moved = std::mem::take(&mut fleet[di].assigned);
        for r in &moved {
            fleet[di].scheduled.remove(r);
        }
        fleet[di].set_tour(Tour::default());

        let recipient = &mut fleet[ri];
        recipient.scheduled.extend(moved.iter().copied());
        recipient.assigned.extend(moved);
        recipient.set_tour(edge.merged_tour.clone());
        report.applied.push((edge.donor, edge.recipient));
    }
    report
}

/// Builds, matches and applies until the vehicle graph has no edges.
pub fn step2_loop(
    net: &RoadNetwork,
    now: Seconds,
    fleet: &mut [Vehicle],
    feasibility: &FeasibilityIndex,
) -> Step2Report {
    let mut report = Step2Report {
        initial_assigned: fleet.iter().filter(|v| !v.assigned.is_empty()).count(),
        ..Default::default()
    };
    if report.initial_assigned == 0 {
        return report;
    }
    loop {
        let clock = Instant::now();
        let graph = build_vehicle_graph(net, now, fleet, feasibility);
        report.pricing_time += clock.elapsed();
        report.iterations += 1;
        if graph.edges.is_empty() {
            break;
        }
        let clock = Instant::now();
        let matching = max_weight_matching(&graph);
        report.solving_time += clock.elapsed();
        if matching.pairs.is_empty() {
            break;
        }
        let applied = apply_matching(&matching, &graph, fleet);
        if applied.applied.is_empty() {
            break;
        }
        report.merges += applied.applied.len();
    }
    report
}
