//! Tour timing, the time-window constraints, and the two insertion routines
//! used to price request-vehicle and vehicle-vehicle matches.
//!
//! Every candidate tour is validated against the pickup deadline of each
//! pickup stop, the dropoff deadline of each dropoff stop, and the vehicle
//! capacity after every stop. The cost of a tour is its total duration from
//! the vehicle's departure.

use thiserror::Error;

use crate::model::{Request, Stop, Tour, Vehicle};
use crate::network::{NodeId, RoadNetwork, Seconds};

/// Tours of vehicles with at most this many distinct requests are re-ordered
/// exhaustively when a new request is inserted.
pub const EXHAUSTIVE_REQUEST_LIMIT: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchedulingError {
    #[error("no path from {from} to {to}")]
    UnreachableLeg { from: NodeId, to: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    /// Arrival time at each stop.
    pub arrivals: Vec<Seconds>,
    pub duration: Seconds,
}

/// Pickup is on time when it happens no later than the latest departure.
pub fn check_z1(pickup_arrival: Seconds, latest_departure: Seconds) -> bool {
    pickup_arrival <= latest_departure
}

/// Dropoff is on time when it happens no later than the latest arrival.
pub fn check_z2(dropoff_arrival: Seconds, latest_arrival: Seconds) -> bool {
    dropoff_arrival <= latest_arrival
}

pub fn tour_schedule(
    net: &RoadNetwork,
    start: NodeId,
    depart: Seconds,
    tour: &Tour,
) -> Result<Schedule, SchedulingError> {
    let mut arrivals = Vec::with_capacity(tour.len());
    let mut at = start;
    let mut clock = depart;
    for stop in tour.iter() {
        let leg = net
            .travel_time(at, stop.node)
            .ok_or(SchedulingError::UnreachableLeg { from: at, to: stop.node })?;
        clock += leg;
        arrivals.push(clock);
        at = stop.node;
    }
    Ok(Schedule {
        arrivals,
        duration: clock - depart,
    })
}

/// Where and when a plan starts, and the load it starts with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanStart {
    pub node: NodeId,
    pub depart: Seconds,
    pub onboard: usize,
    pub capacity: usize,
}

impl PlanStart {
    pub fn of(vehicle: &Vehicle, now: Seconds) -> Self {
        Self {
            node: vehicle.location,
            depart: vehicle.departure(now),
            onboard: vehicle.onboard.len(),
            capacity: vehicle.capacity as usize,
        }
    }
}

/// Duration of `stops` when every deadline and the capacity hold, else `None`.
pub fn feasible_duration(net: &RoadNetwork, start: &PlanStart, stops: &[Stop]) -> Option<Seconds> {
    let mut at = start.node;
    let mut clock = start.depart;
    let mut load = start.onboard;
    if load > start.capacity {
        return None;
    }
    for stop in stops {
        clock += net.travel_time(at, stop.node)?;
        at = stop.node;
        if stop.is_pickup() {
            if !check_z1(clock, stop.deadline) {
                return None;
            }
            load += 1;
            if load > start.capacity {
                return None;
            }
        } else {
            if !check_z2(clock, stop.deadline) {
                return None;
            }
            load = load.checked_sub(1)?;
        }
    }
    Some(clock - start.depart)
}

/// A priced, feasible tour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Insertion {
    pub cost: Seconds,
    pub tour: Tour,
}

#[derive(Default)]
struct Best(Option<Insertion>);

impl Best {
    fn offer(&mut self, cost: Seconds, stops: &[Stop]) {
        if self.0.as_ref().is_none_or(|b| cost < b.cost) {
            self.0 = Some(Insertion {
                cost,
                tour: Tour::new(stops.to_vec()),
            });
        }
    }
}

/// Cheapest feasible tour serving the vehicle's current stops plus `request`.
///
/// Vehicles with at most [`EXHAUSTIVE_REQUEST_LIMIT`] requests in their tour
/// are re-planned over every precedence-valid ordering; larger tours keep
/// their order and only the new pickup and dropoff positions are searched.
pub fn path_cost(
    net: &RoadNetwork,
    now: Seconds,
    vehicle: &Vehicle,
    request: &Request,
) -> Option<Insertion> {
    price_insertion(net, now, vehicle, request.pickup(), request.dropoff())
}

/// [`path_cost`] for an explicit pickup/dropoff pair.
pub fn price_insertion(
    net: &RoadNetwork,
    now: Seconds,
    vehicle: &Vehicle,
    pickup: Stop,
    dropoff: Stop,
) -> Option<Insertion> {
    if vehicle.available_capacity() == 0 {
        return None;
    }
    let start = PlanStart::of(vehicle, now);
    if vehicle.tour.requests().len() <= EXHAUSTIVE_REQUEST_LIMIT {
        exhaustive_insert(net, &start, &vehicle.tour, pickup, dropoff)
    } else {
        heuristic_insert(net, &start, &vehicle.tour, pickup, dropoff)
    }
}

/// Order-preserving insertion: the pickup goes before position `i`, the
/// dropoff after it, scanning `i` then the dropoff position ascending. The
/// first minimum in that scan order wins ties.
pub fn heuristic_insert(
    net: &RoadNetwork,
    start: &PlanStart,
    tour: &Tour,
    pickup: Stop,
    dropoff: Stop,
) -> Option<Insertion> {
    let n = tour.len();
    let mut best = Best::default();
    let mut buf = Vec::with_capacity(n + 2);
    for i in 0..=n {
        for j in i + 1..=n + 1 {
            buf.clear();
            buf.extend_from_slice(&tour.stops[..i]);
            buf.push(pickup);
            buf.extend_from_slice(&tour.stops[i..j - 1]);
            buf.push(dropoff);
            buf.extend_from_slice(&tour.stops[j - 1..]);
            if let Some(cost) = feasible_duration(net, start, &buf) {
                best.offer(cost, &buf);
            }
        }
    }
    best.0
}

/// Full re-ordering of the current stops plus the new pickup and dropoff,
/// subject only to each pickup preceding its own dropoff.
pub fn exhaustive_insert(
    net: &RoadNetwork,
    start: &PlanStart,
    tour: &Tour,
    pickup: Stop,
    dropoff: Stop,
) -> Option<Insertion> {
    let mut items = tour.stops.clone();
    items.push(pickup);
    items.push(dropoff);
    // predecessor[k]: index of the pickup that must be served before item k.
    let predecessor: Vec<Option<usize>> = items
        .iter()
        .map(|s| {
            if s.is_pickup() {
                None
            } else {
                items
                    .iter()
                    .position(|p| p.is_pickup() && p.request == s.request)
            }
        })
        .collect();

    let mut best = Best::default();
    let mut used = vec![false; items.len()];
    let mut seq = Vec::with_capacity(items.len());
    permute(net, start, &items, &predecessor, &mut used, &mut seq, &mut best);
    best.0
}

fn permute(
    net: &RoadNetwork,
    start: &PlanStart,
    items: &[Stop],
    predecessor: &[Option<usize>],
    used: &mut [bool],
    seq: &mut Vec<Stop>,
    best: &mut Best,
) {
    if seq.len() == items.len() {
        if let Some(cost) = feasible_duration(net, start, seq) {
            best.offer(cost, seq);
        }
        return;
    }
    for k in 0..items.len() {
        if used[k] || predecessor[k].is_some_and(|p| !used[p]) {
            continue;
        }
        used[k] = true;
        seq.push(items[k]);
        permute(net, start, items, predecessor, used, seq, best);
        seq.pop();
        used[k] = false;
    }
}

/// Index at which a donor tour is cut; odd lengths give the extra stop to the
/// first part.
pub fn split_index(len: usize) -> usize {
    len.div_ceil(2)
}

/// Prices moving all of `donor`'s stops into `recipient`'s tour.
///
/// The donor tour is cut in two. The first part is inserted as a block at
/// every position of the recipient tour, then the second part as a block at
/// every position after the end of the first, keeping the internal order of
/// all three pieces.
pub fn split_merge_cost(
    net: &RoadNetwork,
    now: Seconds,
    donor: &Vehicle,
    recipient: &Vehicle,
) -> Option<Insertion> {
    let start = PlanStart::of(recipient, now);
    split_merge(net, &start, &donor.tour, &recipient.tour)
}

pub fn split_merge(
    net: &RoadNetwork,
    start: &PlanStart,
    donor: &Tour,
    recipient: &Tour,
) -> Option<Insertion> {
    let (first, second) = donor.stops.split_at(split_index(donor.len()));
    let n = recipient.len();
    let mut best = Best::default();
    let mut merged = Vec::with_capacity(n + first.len());
    let mut buf = Vec::with_capacity(n + donor.len());
    for i in 0..=n {
        merged.clear();
        merged.extend_from_slice(&recipient.stops[..i]);
        merged.extend_from_slice(first);
        merged.extend_from_slice(&recipient.stops[i..]);
        for j in i + first.len()..=merged.len() {
            buf.clear();
            buf.extend_from_slice(&merged[..j]);
            buf.extend_from_slice(second);
            buf.extend_from_slice(&merged[j..]);
            if let Some(cost) = feasible_duration(net, start, &buf) {
                best.offer(cost, &buf);
            }
        }
    }
    best.0
}
