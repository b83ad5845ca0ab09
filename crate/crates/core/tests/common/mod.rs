//! Independent reference implementations and instance generators shared by
//! the integration and acceptance tests. Nothing here calls the solvers or
//! the schedule evaluator under test.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use itertools::Itertools;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ridematch::model::{Request, RequestId, Stop, StopKind, Tour, Vehicle, VehicleId};
use ridematch::network::{Link, NodeId, RoadNetwork, Seconds};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random directed network on `n` nodes: a ring for strong connectivity plus
/// random chords.
pub fn random_network(rng: &mut impl Rng, n: usize, extra: usize) -> RoadNetwork {
    let mut seen = BTreeSet::new();
    let mut links = Vec::new();
    let mut add = |from: usize, to: usize, rng: &mut dyn rand::RngCore| {
        if from != to && seen.insert((from, to)) {
            links.push(Link {
                from: NodeId(from as u32),
                to: NodeId(to as u32),
                length_m: rng.random_range(50..1000) as f64,
                travel_time_s: rng.random_range(10..=120),
            });
        }
    };
    if n > 1 {
        for i in 0..n {
            add(i, (i + 1) % n, rng);
        }
    }
    for _ in 0..extra {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        add(a, b, rng);
    }
    RoadNetwork::new((0..n as u32).map(NodeId).collect(), links).unwrap()
}

/// All-pairs travel times by Bellman-Ford from every source.
pub struct Distances {
    index: HashMap<NodeId, usize>,
    dist: Vec<Vec<Option<Seconds>>>,
}

impl Distances {
    pub fn of(net: &RoadNetwork) -> Self {
        let nodes = net.nodes();
        let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let dist = (0..nodes.len())
            .map(|s| bellman_ford(nodes.len(), net.links(), &index, s))
            .collect();
        Self { index, dist }
    }

    pub fn get(&self, a: NodeId, b: NodeId) -> Option<Seconds> {
        self.dist[self.index[&a]][self.index[&b]]
    }
}

pub fn bellman_ford(
    n: usize,
    links: &[Link],
    index: &HashMap<NodeId, usize>,
    source: usize,
) -> Vec<Option<Seconds>> {
    let mut d = vec![None; n];
    d[source] = Some(0);
    for _ in 0..n {
        let mut changed = false;
        for l in links {
            let (u, v) = (index[&l.from], index[&l.to]);
            if let Some(du) = d[u] {
                let cand = du + l.travel_time_s;
                if d[v].is_none_or(|dv| cand < dv) {
                    d[v] = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    d
}

/// Start of a plan as the oracle sees it.
#[derive(Debug, Clone, Copy)]
pub struct OracleStart {
    pub node: NodeId,
    pub depart: Seconds,
    pub onboard: usize,
    pub capacity: usize,
}

impl OracleStart {
    pub fn of(v: &Vehicle, now: Seconds) -> Self {
        Self {
            node: v.location,
            depart: v.ready_at.max(now),
            onboard: v.onboard.len(),
            capacity: v.capacity as usize,
        }
    }
}

/// Duration of a stop sequence if every deadline and the capacity hold.
pub fn evaluate(d: &Distances, start: OracleStart, stops: &[Stop]) -> Option<Seconds> {
    let mut t = start.depart;
    let mut at = start.node;
    let mut load = start.onboard as i64;
    if load > start.capacity as i64 {
        return None;
    }
    for s in stops {
        t += d.get(at, s.node)?;
        at = s.node;
        if t > s.deadline {
            return None;
        }
        load += if s.kind == StopKind::Pickup { 1 } else { -1 };
        if load < 0 || load > start.capacity as i64 {
            return None;
        }
    }
    Some(t - start.depart)
}

/// Pickups precede their dropoffs; dropoffs without a pickup must belong to
/// `onboard`.
pub fn precedence_ok(stops: &[Stop], onboard: &BTreeSet<RequestId>) -> bool {
    let mut picked = BTreeSet::new();
    for s in stops {
        match s.kind {
            StopKind::Pickup => {
                if !picked.insert(s.request) {
                    return false;
                }
            }
            StopKind::Dropoff => {
                if !picked.contains(&s.request) && !onboard.contains(&s.request) {
                    return false;
                }
            }
        }
    }
    true
}

/// Cheapest feasible ordering over every permutation of `stops`.
pub fn best_permutation(d: &Distances, start: OracleStart, stops: &[Stop], onboard: &BTreeSet<RequestId>) -> Option<Seconds> {
    stops
        .iter()
        .copied()
        .permutations(stops.len())
        .filter(|p| precedence_ok(p, onboard))
        .filter_map(|p| evaluate(d, start, &p))
        .min()
}

/// Every tour obtained by placing `pickup` and `dropoff` into `tour` with
/// the pickup first and the existing order kept.
pub fn position_insertions(tour: &[Stop], pickup: Stop, dropoff: Stop) -> Vec<Vec<Stop>> {
    let mut out = Vec::new();
    for p in 0..=tour.len() {
        for q in p + 1..=tour.len() + 1 {
            let mut v = tour.to_vec();
            v.insert(p, pickup);
            v.insert(q, dropoff);
            out.push(v);
        }
    }
    out
}

/// Every tour made of the recipient stops with the two donor parts inserted
/// as contiguous blocks, the first part ahead of the second.
pub fn block_interleavings(recipient: &[Stop], first: &[Stop], second: &[Stop]) -> Vec<Vec<Stop>> {
    let mut out = Vec::new();
    for a in 0..=recipient.len() {
        for b in a..=recipient.len() {
            let mut v = recipient[..a].to_vec();
            v.extend_from_slice(first);
            v.extend_from_slice(&recipient[a..b]);
            v.extend_from_slice(second);
            v.extend_from_slice(&recipient[b..]);
            out.push(v);
        }
    }
    out
}

/// Removes every stop of `requests` from a tour.
pub fn strip(stops: &[Stop], requests: &BTreeSet<RequestId>) -> Vec<Stop> {
    stops.iter().filter(|s| !requests.contains(&s.request)).copied().collect()
}

/// Minimum over all permutations of the assignment cost, by enumeration.
pub fn brute_assignment(cost: &[Vec<i64>]) -> i64 {
    let n = cost.len();
    (0..n)
        .permutations(n)
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum())
        .min()
        .unwrap_or(0)
}

/// Best `(cardinality, weight)` over all matchings: by weight alone, or
/// cardinality first when `max_cardinality`.
pub fn brute_matching(n: usize, edges: &[(usize, usize, i64)], max_cardinality: bool) -> (usize, i64) {
    let mut w = vec![vec![None; n]; n];
    for &(a, b, x) in edges {
        w[a][b] = Some(x);
        w[b][a] = Some(x);
    }
    fn go(i: usize, used: &mut Vec<bool>, w: &[Vec<Option<i64>>], card: bool) -> (usize, i64) {
        let n = used.len();
        let Some(i) = (i..n).find(|&k| !used[k]) else {
            return (0, 0);
        };
        used[i] = true;
        let mut best = go(i + 1, used, w, card);
        for j in i + 1..n {
            if let (false, Some(x)) = (used[j], w[i][j]) {
                used[j] = true;
                let (c, s) = go(i + 1, used, w, card);
                used[j] = false;
                let cand = (c + 1, s + x);
                let better = if card { cand > best } else { cand.1 > best.1 };
                if better {
                    best = cand;
                }
            }
        }
        used[i] = false;
        best
    }
    go(0, &mut vec![false; n], &w, max_cardinality)
}

pub fn random_graph(rng: &mut impl Rng, max_n: usize) -> (usize, Vec<(usize, usize, i64)>) {
    let n = rng.random_range(1..=max_n);
    let p = rng.random_range(0.2..0.9);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b, rng.random_range(-20..=100)));
            }
        }
    }
    (n, edges)
}

fn stop(kind: StopKind, r: u64, node: NodeId) -> Stop {
    Stop {
        kind,
        request: RequestId(r),
        node,
        deadline: Seconds::MAX,
    }
}

fn random_od(rng: &mut impl Rng, net: &RoadNetwork) -> (NodeId, NodeId) {
    let nodes = net.nodes();
    loop {
        let (a, b) = (*nodes.choose(rng).unwrap(), *nodes.choose(rng).unwrap());
        if a != b {
            return (a, b);
        }
    }
}

/// Random precedence-valid order of `onboard` dropoffs and `scheduled`
/// pickup/dropoff pairs.
fn random_order(rng: &mut impl Rng, net: &RoadNetwork, first_id: u64, onboard: usize, scheduled: usize) -> Vec<Stop> {
    let mut pending: Vec<Stop> = Vec::new();
    let mut later: HashMap<RequestId, Stop> = HashMap::new();
    for k in 0..onboard as u64 {
        let (_, d) = random_od(rng, net);
        pending.push(stop(StopKind::Dropoff, first_id + k, d));
    }
    for k in 0..scheduled as u64 {
        let id = first_id + onboard as u64 + k;
        let (o, d) = random_od(rng, net);
        pending.push(stop(StopKind::Pickup, id, o));
        later.insert(RequestId(id), stop(StopKind::Dropoff, id, d));
    }
    let mut out = Vec::new();
    while !pending.is_empty() {
        let s = pending.swap_remove(rng.random_range(0..pending.len()));
        if s.kind == StopKind::Pickup {
            pending.push(later.remove(&s.request).unwrap());
        }
        out.push(s);
    }
    out
}

/// Sets each deadline to the stop's arrival along `stops` plus random slack,
/// which keeps the given order feasible.
fn stamp_deadlines(rng: &mut impl Rng, d: &Distances, from: NodeId, depart: Seconds, stops: &mut [Stop], slack: Seconds) {
    let (mut t, mut at) = (depart, from);
    for s in stops.iter_mut() {
        t += d.get(at, s.node).unwrap();
        at = s.node;
        s.deadline = t + rng.random_range(0..=slack);
    }
}

fn max_load(onboard: usize, stops: &[Stop]) -> usize {
    let mut load = onboard as i64;
    let mut peak = load;
    for s in stops {
        load += if s.kind == StopKind::Pickup { 1 } else { -1 };
        peak = peak.max(load);
    }
    peak as usize
}

pub struct InsertionCase {
    pub net: RoadNetwork,
    pub now: Seconds,
    pub vehicle: Vehicle,
    pub pickup: Stop,
    pub dropoff: Stop,
}

/// A vehicle with `requests` requests in its tour (some possibly on board)
/// and a new request to insert.
pub fn insertion_case(rng: &mut impl Rng, requests: usize) -> InsertionCase {
    let n = rng.random_range(4..=9);
    let extra = rng.random_range(n..3 * n);
    let net = random_network(rng, n, extra);
    let d = Distances::of(&net);
    let now = 30;
    let onboard = rng.random_range(0..=requests);
    let scheduled = requests - onboard;
    let mut stops = random_order(rng, &net, 1, onboard, scheduled);
    let location = *net.nodes().choose(rng).unwrap();
    let ready_at = rng.random_range(0..=90);
    stamp_deadlines(rng, &d, location, ready_at.max(now), &mut stops, 400);

    let occupants = onboard + scheduled;
    let peak = max_load(onboard, &stops);
    let capacity = (peak.max(occupants) + rng.random_range(0..=4)).max(1) as u32;
    let mut vehicle = Vehicle::new(VehicleId(0), capacity, location, ready_at);
    vehicle.onboard = (1..=onboard as u64).map(RequestId).collect();
    vehicle.scheduled = (onboard as u64 + 1..=requests as u64).map(RequestId).collect();
    vehicle.set_tour(Tour::new(stops));

    let new_id = 100;
    let (o, dest) = random_od(rng, &net);
    let h = d.get(o, dest).unwrap();
    let q = now + rng.random_range(0..=600);
    let pickup = Stop { kind: StopKind::Pickup, request: RequestId(new_id), node: o, deadline: q };
    let dropoff = Stop { kind: StopKind::Dropoff, request: RequestId(new_id), node: dest, deadline: q + h + rng.random_range(0..=600) };
    InsertionCase { net, now, vehicle, pickup, dropoff }
}

pub struct MergeCase {
    pub net: RoadNetwork,
    pub now: Seconds,
    pub donor: Vehicle,
    pub recipient: Vehicle,
}

/// An idle-before-update donor with 1-2 requests and a recipient with up to
/// three requests, some possibly on board.
pub fn merge_case(rng: &mut impl Rng) -> MergeCase {
    let n = rng.random_range(4..=9);
    let extra = rng.random_range(n..3 * n);
    let net = random_network(rng, n, extra);
    let d = Distances::of(&net);
    let now = 60;

    let donor_requests = rng.random_range(1..=2);
    let mut donor_stops = random_order(rng, &net, 1, 0, donor_requests);
    let donor_at = *net.nodes().choose(rng).unwrap();
    stamp_deadlines(rng, &d, donor_at, now, &mut donor_stops, 900);
    let mut donor = Vehicle::new(VehicleId(1), 4, donor_at, now);
    donor.scheduled = (1..=donor_requests as u64).map(RequestId).collect();
    donor.assigned = donor.scheduled.clone();
    donor.set_tour(Tour::new(donor_stops.clone()));

    let rec_requests = rng.random_range(0..=3);
    let onboard = rng.random_range(0..=rec_requests);
    let mut rec_stops = random_order(rng, &net, 10, onboard, rec_requests - onboard);
    let rec_at = *net.nodes().choose(rng).unwrap();
    let ready_at = rng.random_range(0..=120);
    stamp_deadlines(rng, &d, rec_at, ready_at.max(now), &mut rec_stops, 600);
    // Loosen donor deadlines by the recipient's lead time so merges are often
    // feasible without being guaranteed.
    let lead = d.get(rec_at, donor_at).unwrap() + ready_at.max(now) - now;
    for s in donor.tour.stops.iter_mut() {
        s.deadline += rng.random_range(0..=lead + 300);
    }
    let capacity = (max_load(onboard, &rec_stops) + donor_requests + rng.random_range(0..=1)) as u32;
    let mut recipient = Vehicle::new(VehicleId(2), capacity, rec_at, ready_at);
    recipient.onboard = (10..10 + onboard as u64).map(RequestId).collect();
    recipient.scheduled = (10 + onboard as u64..10 + rec_requests as u64).map(RequestId).collect();
    recipient.set_tour(Tour::new(rec_stops));
    MergeCase { net, now, donor, recipient }
}

/// Builds a request on `net` with flexibility `f`.
pub fn request(net: &RoadNetwork, id: u64, t: Seconds, o: u32, d: u32, f: Seconds) -> Request {
    Request::with_flexibility(RequestId(id), t, NodeId(o), NodeId(d), f, net).unwrap()
}
