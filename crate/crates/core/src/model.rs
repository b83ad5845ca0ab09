//! Requests, stops, tours and vehicles.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NodeId, RoadNetwork, Seconds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("origin {0} cannot reach destination {1}")]
    Unreachable(NodeId, NodeId),
    #[error("node {0} is not part of the network")]
    UnknownNode(NodeId),
    #[error("origin and destination coincide at {0}")]
    SameOriginDestination(NodeId),
    #[error("negative flexibility {0}s: latest arrival leaves no room for the direct trip")]
    Infeasible(Seconds),
    #[error("request {id}: illegal status transition {from:?} -> {to:?}")]
    IllegalTransition {
        id: RequestId,
        from: RequestStatus,
        to: RequestStatus,
    },
}

/// Flexibility, latest departure and the direct travel time of an OD pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Windows {
    pub flexibility: Seconds,
    pub latest_departure: Seconds,
    pub direct_time: Seconds,
}

/// Derives `f = l - e - H(O, D)` and `q = e + f`.
pub fn derive_windows(
    earliest_departure: Seconds,
    latest_arrival: Seconds,
    origin: NodeId,
    destination: NodeId,
    net: &RoadNetwork,
) -> Result<Windows, ModelError> {
    let direct = direct_time(origin, destination, net)?;
    let flexibility = latest_arrival - earliest_departure - direct;
    if flexibility < 0 {
        return Err(ModelError::Infeasible(flexibility));
    }
    Ok(Windows {
        flexibility,
        latest_departure: earliest_departure + flexibility,
        direct_time: direct,
    })
}

fn direct_time(origin: NodeId, destination: NodeId, net: &RoadNetwork) -> Result<Seconds, ModelError> {
    for n in [origin, destination] {
        if !net.contains(n) {
            return Err(ModelError::UnknownNode(n));
        }
    }
    if origin == destination {
        return Err(ModelError::SameOriginDestination(origin));
    }
    net.travel_time(origin, destination)
        .ok_or(ModelError::Unreachable(origin, destination))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestStatus {
    Pending,
    Assigned,
    Onboard,
    Served,
    Expired,
}

impl RequestStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pending => "pending",
            Self::Assigned => "assigned",
            Self::Onboard => "onboard",
            Self::Served => "served",
            Self::Expired => "expired",
        }
    }

    fn can_become(self, next: Self) -> bool {
        use RequestStatus::*;
        matches!(
            (self, next),
            (Pending, Assigned) | (Assigned, Onboard) | (Onboard, Served) | (Pending, Expired)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: RequestId,
    /// Request time, equal to the earliest departure.
    pub request_time: Seconds,
    pub latest_arrival: Seconds,
    pub origin: NodeId,
    pub destination: NodeId,
    pub flexibility: Seconds,
    pub latest_departure: Seconds,
    /// Direct shortest travel time between origin and destination.
    pub direct_time: Seconds,
    pub status: RequestStatus,
}

impl Request {
    /// Builds a request from its latest arrival time.
    pub fn new(
        id: RequestId,
        request_time: Seconds,
        origin: NodeId,
        destination: NodeId,
        latest_arrival: Seconds,
        net: &RoadNetwork,
    ) -> Result<Self, ModelError> {
        let w = derive_windows(request_time, latest_arrival, origin, destination, net)?;
        Ok(Self {
            id,
            request_time,
            latest_arrival,
            origin,
            destination,
            flexibility: w.flexibility,
            latest_departure: w.latest_departure,
            direct_time: w.direct_time,
            status: RequestStatus::Pending,
        })
    }

    /// Builds a request from a flexibility, setting `l = e + f + H(O, D)`.
    pub fn with_flexibility(
        id: RequestId,
        request_time: Seconds,
        origin: NodeId,
        destination: NodeId,
        flexibility: Seconds,
        net: &RoadNetwork,
    ) -> Result<Self, ModelError> {
        if flexibility < 0 {
            return Err(ModelError::Infeasible(flexibility));
        }
        let direct = direct_time(origin, destination, net)?;
        Self::new(id, request_time, origin, destination, request_time + flexibility + direct, net)
    }

    pub fn earliest_departure(&self) -> Seconds {
        self.request_time
    }

    pub fn pickup(&self) -> Stop {
        Stop {
            kind: StopKind::Pickup,
            request: self.id,
            node: self.origin,
            deadline: self.latest_departure,
        }
    }

    pub fn dropoff(&self) -> Stop {
        Stop {
            kind: StopKind::Dropoff,
            request: self.id,
            node: self.destination,
            deadline: self.latest_arrival,
        }
    }

    pub fn transition(&mut self, next: RequestStatus) -> Result<(), ModelError> {
        if !self.status.can_become(next) {
            return Err(ModelError::IllegalTransition {
                id: self.id,
                from: self.status,
                to: next,
            });
        }
        self.status = next;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopKind {
    Pickup,
    Dropoff,
}

/// A pickup or dropoff. The deadline is `q_r` for pickups and `l_r` for
/// dropoffs, carried along so tours can be validated without the request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stop {
    pub kind: StopKind,
    pub request: RequestId,
    pub node: NodeId,
    pub deadline: Seconds,
}

impl Stop {
    pub fn is_pickup(&self) -> bool {
        self.kind == StopKind::Pickup
    }
}

impl fmt::Display for Stop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.is_pickup() { '+' } else { '-' };
        write!(f, "{sign}{}@{}", self.request, self.node)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Tour {
    pub stops: Vec<Stop>,
}

impl Tour {
    pub fn new(stops: Vec<Stop>) -> Self {
        Self { stops }
    }

    pub fn len(&self) -> usize {
        self.stops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stops.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Stop> {
        self.stops.iter()
    }

    /// Distinct requests with at least one stop in the tour.
    pub fn requests(&self) -> BTreeSet<RequestId> {
        self.stops.iter().map(|s| s.request).collect()
    }

    /// Each request appears at most once per kind, and a pickup is always
    /// followed by its dropoff.
    pub fn is_well_formed(&self) -> bool {
        let mut picked = BTreeSet::new();
        let mut dropped = BTreeSet::new();
        for s in &self.stops {
            match s.kind {
                StopKind::Pickup => {
                    if dropped.contains(&s.request) || !picked.insert(s.request) {
                        return false;
                    }
                }
                StopKind::Dropoff => {
                    if !dropped.insert(s.request) {
                        return false;
                    }
                }
            }
        }
        picked.is_subset(&dropped)
    }

    /// Copy of the tour with every stop of `request` removed.
    pub fn without_request(&self, request: RequestId) -> Tour {
        Tour::new(self.stops.iter().filter(|s| s.request != request).copied().collect())
    }
}

impl fmt::Display for Tour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.stops.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

/// Passengers on board after serving the first `prefix` stops.
pub fn occupancy_at(tour: &Tour, onboard: usize, prefix: usize) -> i64 {
    tour.stops[..prefix].iter().fold(onboard as i64, |acc, s| {
        acc + if s.is_pickup() { 1 } else { -1 }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleState {
    Idle,
    Enroute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub capacity: u32,
    /// Current node, or the node the vehicle reaches next when it is between
    /// nodes.
    pub location: NodeId,
    /// When the vehicle is (or will be) at `location` and free to continue.
    pub ready_at: Seconds,
    pub tour: Tour,
    pub onboard: BTreeSet<RequestId>,
    /// Assigned but not yet picked up.
    pub scheduled: BTreeSet<RequestId>,
    /// Requests assigned during the current update time.
    pub assigned: BTreeSet<RequestId>,
    /// Bumped on every tour change; lets priced merges detect staleness.
    pub revision: u64,
}

impl Vehicle {
    pub fn new(id: VehicleId, capacity: u32, location: NodeId, ready_at: Seconds) -> Self {
        Self {
            id,
            capacity,
            location,
            ready_at,
            tour: Tour::default(),
            onboard: BTreeSet::new(),
            scheduled: BTreeSet::new(),
            assigned: BTreeSet::new(),
            revision: 0,
        }
    }

    pub fn state(&self) -> VehicleState {
        if self.tour.is_empty() {
            VehicleState::Idle
        } else {
            VehicleState::Enroute
        }
    }

    /// Committed passengers: on board plus scheduled.
    pub fn occupants(&self) -> usize {
        self.onboard.len() + self.scheduled.len()
    }

    pub fn available_capacity(&self) -> usize {
        (self.capacity as usize).saturating_sub(self.occupants())
    }

    /// True when every commitment of the vehicle was made during the current
    /// update, i.e. it was idle when the update began and may donate its
    /// assigned requests to another vehicle.
    pub fn idle_before_update(&self) -> bool {
        self.onboard.is_empty() && self.scheduled == self.assigned
    }

    /// Time at which a new plan for this vehicle starts.
    pub fn departure(&self, now: Seconds) -> Seconds {
        self.ready_at.max(now)
    }

    pub fn begin_update(&mut self) {
        self.assigned.clear();
    }

    pub fn set_tour(&mut self, tour: Tour) {
        self.tour = tour;
        self.revision += 1;
    }
}
