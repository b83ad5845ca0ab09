//! One-to-one request-vehicle matching.
//!
//! Candidate vehicles for a request are those with a free seat whose travel
//! time to the request origin does not exceed the request's flexibility.
//! Each candidate is priced with [`path_cost`]; feasible insertions become
//! edges of a bipartite graph solved as a linear assignment problem.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::hungarian;
use crate::model::{Request, RequestId, Tour, Vehicle, VehicleId};
use crate::network::{RoadNetwork, Seconds};
use crate::scheduling::path_cost;

/// Candidate vehicle set of every request seen during an update.
pub type FeasibilityIndex = BTreeMap<RequestId, BTreeSet<VehicleId>>;

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteEdge {
    pub request: RequestId,
    pub vehicle: VehicleId,
    pub cost: Seconds,
    pub tour: Tour,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BipartiteGraph {
    pub requests: Vec<RequestId>,
    pub vehicles: Vec<VehicleId>,
    pub edges: Vec<BipartiteEdge>,
    /// Candidate vehicles per request, before pricing.
    pub feasible: FeasibilityIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    pub request: RequestId,
    pub vehicle: VehicleId,
    /// Index into [`BipartiteGraph::edges`].
    pub edge: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssignmentSolution {
    pub matches: Vec<Match>,
    pub total_cost: Seconds,
}

/// Vehicles with a free seat that can reach the request origin within its
/// flexibility.
pub fn feasible_vehicles(
    net: &RoadNetwork,
    request: &Request,
    fleet: &[Vehicle],
) -> Vec<VehicleId> {
    fleet
        .iter()
        .filter(|v| v.available_capacity() >= 1)
        .filter(|v| {
            net.travel_time(v.location, request.origin)
                .is_some_and(|tt| tt <= request.flexibility)
        })
        .map(|v| v.id)
        .collect()
}

pub fn build_bipartite(
    net: &RoadNetwork,
    now: Seconds,
    requests: &[&Request],
    fleet: &[Vehicle],
) -> BipartiteGraph {
    let by_id: HashMap<VehicleId, &Vehicle> = fleet.iter().map(|v| (v.id, v)).collect();
    let mut graph = BipartiteGraph {
        requests: requests.iter().map(|r| r.id).collect(),
        vehicles: fleet.iter().map(|v| v.id).collect(),
        ..Default::default()
    };
    for request in requests {
        let candidates = feasible_vehicles(net, request, fleet);
        for &vid in &candidates {
            if let Some(ins) = path_cost(net, now, by_id[&vid], request) {
                graph.edges.push(BipartiteEdge {
                    request: request.id,
                    vehicle: vid,
                    cost: ins.cost,
                    tour: ins.tour,
                });
            }
        }
        graph.feasible.insert(request.id, candidates.into_iter().collect());
    }
    graph
}

/// Minimum-cost maximum-cardinality matching over the graph's edges.
///
/// The rectangular, sparse problem is padded to a square matrix whose missing
/// cells cost more than every real edge combined, so the solver never trades
/// a real match for a cheaper padded one. Padded pairs are dropped.
pub fn solve_assignment(graph: &BipartiteGraph) -> AssignmentSolution {
    let mut rows: Vec<RequestId> = Vec::new();
    let mut cols: Vec<VehicleId> = Vec::new();
    let mut row_ix = HashMap::new();
    let mut col_ix = HashMap::new();
    for e in &graph.edges {
        row_ix.entry(e.request).or_insert_with(|| {
            rows.push(e.request);
            rows.len() - 1
        });
        col_ix.entry(e.vehicle).or_insert_with(|| {
            cols.push(e.vehicle);
            cols.len() - 1
        });
    }
    let n = rows.len().max(cols.len());
    if n == 0 {
        return AssignmentSolution::default();
    }

    let prohibitive: i64 = graph.edges.iter().map(|e| e.cost).sum::<i64>() + 1;
    let mut cost = vec![vec![prohibitive; n]; n];
    let mut edge_at = vec![vec![None; n]; n];
    for (k, e) in graph.edges.iter().enumerate() {
        let (i, j) = (row_ix[&e.request], col_ix[&e.vehicle]);
        // Keep the first edge if a pair is listed twice with equal cost.
        if edge_at[i][j].is_none() || e.cost < cost[i][j] {
            cost[i][j] = e.cost;
            edge_at[i][j] = Some(k);
        }
    }

    let assignment = hungarian::solve(&cost);
    let mut solution = AssignmentSolution::default();
    for (i, &j) in assignment.iter().enumerate() {
        if let Some(k) = edge_at[i][j] {
            let e = &graph.edges[k];
            solution.matches.push(Match {
                request: e.request,
                vehicle: e.vehicle,
                edge: k,
            });
            solution.total_cost += e.cost;
        }
    }
    solution
}
