mod common;

use std::collections::BTreeSet;

use common::*;
use ridematch::model::{RequestId, StopKind, Tour, Vehicle, VehicleId};
use ridematch::network::{NodeId, RoadNetwork};
use ridematch::scheduling::{
    exhaustive_insert, heuristic_insert, path_cost, price_insertion, split_merge_cost, split_index, PlanStart,
};

#[test]
fn insertion_modes_agree_with_oracles() {
    let mut rng = rng(30);
    for case in 0..300 {
        let requests = case % 5;
        let c = insertion_case(&mut rng, requests);
        let d = Distances::of(&c.net);
        let start = OracleStart::of(&c.vehicle, c.now);
        let plan = PlanStart::of(&c.vehicle, c.now);
        let tour = &c.vehicle.tour;

        let mut all = tour.stops.clone();
        all.extend([c.pickup, c.dropoff]);
        let full = best_permutation(&d, start, &all, &c.vehicle.onboard);
        let positional = position_insertions(&tour.stops, c.pickup, c.dropoff)
            .iter()
            .filter_map(|t| evaluate(&d, start, t))
            .min();

        let ex = exhaustive_insert(&c.net, &plan, tour, c.pickup, c.dropoff);
        let he = heuristic_insert(&c.net, &plan, tour, c.pickup, c.dropoff);
        assert_eq!(ex.as_ref().map(|i| i.cost), full, "case {case}");
        assert_eq!(he.as_ref().map(|i| i.cost), positional, "case {case}");
        // Re-ordering can only help.
        if let (Some(f), Some(p)) = (full, positional) {
            assert!(f <= p);
        }
        let chosen = price_insertion(&c.net, c.now, &c.vehicle, c.pickup, c.dropoff);
        if c.vehicle.available_capacity() == 0 {
            assert!(chosen.is_none());
        } else if requests <= 2 {
            assert_eq!(chosen, ex);
        } else {
            assert_eq!(chosen, he);
        }
    }
}

#[test]
fn merges_agree_with_oracle() {
    let mut rng = rng(31);
    for case in 0..300 {
        let c = merge_case(&mut rng);
        let d = Distances::of(&c.net);
        let start = OracleStart::of(&c.recipient, c.now);
        let donor = &c.donor.tour.stops;
        let (a, b) = donor.split_at(split_index(donor.len()));
        let want = block_interleavings(&c.recipient.tour.stops, a, b)
            .iter()
            .filter_map(|t| evaluate(&d, start, t))
            .min();
        let got = split_merge_cost(&c.net, c.now, &c.donor, &c.recipient);
        assert_eq!(got.as_ref().map(|i| i.cost), want, "case {case}");
        if let Some(ins) = got {
            assert_eq!(evaluate(&d, start, &ins.tour.stops), Some(ins.cost));
            assert!(precedence_ok(&ins.tour.stops, &c.recipient.onboard));
        }
    }
}

#[test]
fn idle_vehicle_prices_pickup_then_dropoff() {
    // Bidirectional 1x4 line, 60 s per link; vehicle at 0, request 1 -> 3.
    let net = RoadNetwork::grid(1, 4, 100.0, 60);
    let r = request(&net, 1, 0, 1, 3, 300);
    let v = Vehicle::new(VehicleId(0), 4, NodeId(0), 0);
    let ins = path_cost(&net, 0, &v, &r).unwrap();
    assert_eq!(ins.cost, 180);
    assert_eq!(ins.tour, Tour::new(vec![r.pickup(), r.dropoff()]));

    // The pickup deadline is 60 s but the origin is 60 s away: still on time.
    let tight = request(&net, 2, 0, 1, 3, 60);
    assert!(path_cost(&net, 0, &v, &tight).is_some());
    let late = Vehicle::new(VehicleId(1), 4, NodeId(0), 1);
    assert!(path_cost(&net, 0, &late, &tight).is_none());
}

#[test]
fn pooling_on_a_shared_corridor() {
    // Both riders travel 1 -> 3 on the line; one vehicle takes both at once.
    let net = RoadNetwork::grid(1, 4, 100.0, 60);
    let (a, b) = (request(&net, 1, 0, 1, 3, 300), request(&net, 2, 0, 1, 3, 300));
    let mut v = Vehicle::new(VehicleId(0), 4, NodeId(0), 0);
    v.scheduled.insert(a.id);
    v.set_tour(Tour::new(vec![a.pickup(), a.dropoff()]));
    let ins = path_cost(&net, 0, &v, &b).unwrap();
    assert_eq!(ins.cost, 180);
    let kinds: Vec<StopKind> = ins.tour.iter().map(|s| s.kind).collect();
    assert_eq!(kinds, [StopKind::Pickup, StopKind::Pickup, StopKind::Dropoff, StopKind::Dropoff]);
    let requests: BTreeSet<RequestId> = ins.tour.requests();
    assert_eq!(requests, BTreeSet::from([a.id, b.id]));
}
