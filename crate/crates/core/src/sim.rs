//! Rolling-horizon fleet simulator.
//!
//! Matchers run at every multiple of the update interval. Between updates
//! vehicles follow their tours link by link along time-shortest paths. A
//! vehicle between nodes is represented by the node it reaches next and the
//! time it gets there.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_update, Matcher, UpdateTiming};
use crate::model::{ModelError, Request, RequestId, RequestStatus, Vehicle, VehicleId};
use crate::network::{bundled, NetworkError, NodeId, RoadNetwork, Seconds};
use crate::vehicle_graph::Step2Report;

const BUNDLED_PREFIX: &str = "bundled:";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed scenario config {path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("unknown bundled network {0:?}")]
    UnknownBundled(String),
    #[error("invalid scenario config: {0}")]
    Invalid(String),
    #[error("request file {path}: {message}")]
    RequestFile { path: String, message: String },
    #[error("request {id}: {source}")]
    Request {
        id: RequestId,
        #[source]
        source: ModelError,
    },
    #[error("simulation did not settle by t={0}s")]
    Stalled(Seconds),
}

/// Hourly rate of one origin-destination stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdRate {
    pub origin: NodeId,
    pub destination: NodeId,
    pub per_hour: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DemandModel {
    /// One Poisson stream whose arrivals pick a uniformly random OD pair.
    Uniform { requests_per_hour: f64 },
    /// An independent Poisson stream per OD pair.
    Od { rates: Vec<OdRate> },
    /// Explicit requests: CSV with columns `id,t_r,origin,destination,l_r`.
    File { path: PathBuf },
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `bundled:<name>` or a network file path, relative to the config file.
    pub network: String,
    pub demand: DemandModel,
    /// Multiplier on every Poisson rate.
    #[serde(default = "default_scale")]
    pub demand_scale: f64,
    pub loading_period_s: Seconds,
    pub fleet_size: u32,
    pub capacity: u32,
    pub flexibility_s: Seconds,
    pub update_interval_s: Seconds,
    pub matcher: Matcher,
    pub seed: u64,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, SimError> {
        Self::parse(text, "<inline>", base_dir)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let dir = path.parent().unwrap_or(Path::new(""));
        Self::parse(&read(path)?, &path.display().to_string(), dir)
    }

    fn parse(text: &str, label: &str, base_dir: &Path) -> Result<Self, SimError> {
        let mut config: Self = toml::from_str(text).map_err(|e| SimError::Parse {
            path: label.to_string(),
            message: e.to_string(),
        })?;
        config.base_dir = base_dir.to_path_buf();
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Same scenario with every file path made absolute, so the config no
    /// longer depends on where it was read from.
    pub fn with_absolute_paths(&self) -> Self {
        let mut out = self.clone();
        if !self.network.starts_with(BUNDLED_PREFIX) {
            let p = self.resolve(Path::new(&self.network));
            out.network = absolute(&p).display().to_string();
        }
        if let DemandModel::File { path } = &self.demand {
            out.demand = DemandModel::File {
                path: absolute(&self.resolve(path)),
            };
        }
        out.base_dir = PathBuf::new();
        out
    }

    pub fn load_network(&self) -> Result<RoadNetwork, SimError> {
        match self.network.strip_prefix(BUNDLED_PREFIX) {
            Some(name) => bundled(name).ok_or_else(|| SimError::UnknownBundled(name.to_string())),
            None => Ok(RoadNetwork::load(&self.resolve(Path::new(&self.network)))?),
        }
    }

    /// Checks the scalar fields and the demand model against the network.
    pub fn validate(&self, net: &RoadNetwork) -> Result<(), SimError> {
        let invalid = |m: String| Err(SimError::Invalid(m));
        if self.update_interval_s <= 0 {
            return invalid(format!("update_interval_s must be positive, got {}", self.update_interval_s));
        }
        if self.capacity < 1 {
            return invalid("capacity must be at least 1".into());
        }
        if self.flexibility_s < 0 {
            return invalid(format!("flexibility_s must be non-negative, got {}", self.flexibility_s));
        }
        if self.fleet_size < 1 {
            return invalid("fleet_size must be at least 1".into());
        }
        if self.loading_period_s < 0 {
            return invalid(format!("loading_period_s must be non-negative, got {}", self.loading_period_s));
        }
        if !(self.demand_scale.is_finite() && self.demand_scale >= 0.0) {
            return invalid(format!("demand_scale must be a non-negative number, got {}", self.demand_scale));
        }
        if net.nodes().is_empty() {
            return invalid("network has no nodes".into());
        }
        match &self.demand {
            DemandModel::Uniform { requests_per_hour } => {
                check_rate(*requests_per_hour)?;
                if *requests_per_hour > 0.0 {
                    if net.nodes().len() < 2 {
                        return invalid("uniform demand needs at least two nodes".into());
                    }
                    if !strongly_connected(net) {
                        return invalid("uniform demand needs every node pair to be mutually reachable".into());
                    }
                }
            }
            DemandModel::Od { rates } => {
                for rate in rates {
                    check_rate(rate.per_hour)?;
                    for node in [rate.origin, rate.destination] {
                        if !net.contains(node) {
                            return invalid(format!("demand references unknown node {node}"));
                        }
                    }
                    if rate.origin == rate.destination {
                        return invalid(format!("demand pair {0} -> {0} has no trip", rate.origin));
                    }
                    if net.travel_time(rate.origin, rate.destination).is_none() {
                        return invalid(format!(
                            "demand pair {} -> {} is unreachable",
                            rate.origin, rate.destination
                        ));
                    }
                }
            }
            DemandModel::File { .. } => {
                if self.demand_scale != 1.0 {
                    return invalid("demand_scale must be 1 for file demand".into());
                }
            }
        }
        Ok(())
    }
}

fn check_rate(rate: f64) -> Result<(), SimError> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(SimError::Invalid(format!("demand rate must be a non-negative number, got {rate}")))
    }
}

fn strongly_connected(net: &RoadNetwork) -> bool {
    let root = net.nodes()[0];
    net.nodes()
        .iter()
        .all(|&n| net.travel_time(root, n).is_some() && net.travel_time(n, root).is_some())
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

fn read(path: &Path) -> Result<String, SimError> {
    fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Poisson arrival instants on `[0, horizon)`, floored to whole seconds.
fn poisson_arrivals<R: Rng>(per_hour: f64, horizon: Seconds, rng: &mut R) -> Vec<Seconds> {
    if per_hour <= 0.0 || horizon <= 0 {
        return Vec::new();
    }
    let gap = Exp::new(per_hour / 3600.0).expect("positive rate");
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t >= horizon as f64 {
            return out;
        }
        out.push(t.floor() as Seconds);
    }
}

/// Draws the scenario's requests. Ids follow arrival order.
pub fn generate_demand<R: Rng>(
    config: &ScenarioConfig,
    net: &RoadNetwork,
    rng: &mut R,
) -> Result<Vec<Request>, SimError> {
    let horizon = config.loading_period_s;
    let mut trips: Vec<(Seconds, NodeId, NodeId)> = Vec::new();
    match &config.demand {
        DemandModel::Uniform { requests_per_hour } => {
            let nodes = net.nodes();
            for t in poisson_arrivals(requests_per_hour * config.demand_scale, horizon, rng) {
                let o = rng.random_range(0..nodes.len());
                let mut d = rng.random_range(0..nodes.len() - 1);
                if d >= o {
                    d += 1;
                }
                trips.push((t, nodes[o], nodes[d]));
            }
        }
        DemandModel::Od { rates } => {
            for rate in rates {
                for t in poisson_arrivals(rate.per_hour * config.demand_scale, horizon, rng) {
                    trips.push((t, rate.origin, rate.destination));
                }
            }
        }
        DemandModel::File { path } => return read_request_file(&config.resolve(path), net),
    }
    trips.sort_by_key(|&(t, _, _)| t);
    trips
        .into_iter()
        .enumerate()
        .map(|(i, (t, o, d))| {
            let id = RequestId(i as u64);
            Request::with_flexibility(id, t, o, d, config.flexibility_s, net)
                .map_err(|source| SimError::Request { id, source })
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct RequestRow {
    id: u64,
    t_r: Seconds,
    origin: u32,
    destination: u32,
    l_r: Seconds,
}

/// Reads explicit requests, sorted by request time then id.
pub fn read_request_file(path: &Path, net: &RoadNetwork) -> Result<Vec<Request>, SimError> {
    let file_err = |message: String| SimError::RequestFile {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| file_err(e.to_string()))?;
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in reader.deserialize::<RequestRow>() {
        let row = row.map_err(|e| file_err(e.to_string()))?;
        let id = RequestId(row.id);
        if !seen.insert(id) {
            return Err(file_err(format!("duplicate request id {id}")));
        }
        let req = Request::new(id, row.t_r, NodeId(row.origin), NodeId(row.destination), row.l_r, net)
            .map_err(|source| SimError::Request { id, source })?;
        out.push(req);
    }
    out.sort_by_key(|r| (r.request_time, r.id));
    Ok(out)
}

/// Places vehicles at nodes drawn in proportion to origin demand, or
/// uniformly when there is no demand.
pub fn initialize_fleet<R: Rng>(
    config: &ScenarioConfig,
    net: &RoadNetwork,
    demand: &[Request],
    rng: &mut R,
) -> Vec<Vehicle> {
    let nodes = net.nodes();
    let mut counts: HashMap<NodeId, u64> = HashMap::new();
    for r in demand {
        *counts.entry(r.origin).or_default() += 1;
    }
    let weights: Vec<u64> = nodes.iter().map(|n| counts.get(n).copied().unwrap_or(0)).collect();
    let picker = WeightedIndex::new(&weights).ok();
    (0..config.fleet_size)
        .map(|i| {
            let at = match &picker {
                Some(w) => nodes[w.sample(rng)],
                None => nodes[rng.random_range(0..nodes.len())],
            };
            Vehicle::new(VehicleId(i), config.capacity, at, 0)
        })
        .collect()
}

/// Lifecycle of one request.
#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub request: Request,
    pub vehicle: Option<VehicleId>,
    pub assign_t: Option<Seconds>,
    pub pickup_t: Option<Seconds>,
    pub dropoff_t: Option<Seconds>,
}

impl TripRecord {
    pub fn status(&self) -> RequestStatus {
        self.request.status
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VehicleRecord {
    pub odometer_m: f64,
    /// Time spent traversing links.
    pub moving_s: Seconds,
    pub peak_onboard: usize,
    /// Requests this vehicle dropped off.
    pub served: usize,
}

/// Instrumentation of one update call.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    pub time: Seconds,
    pub pending: usize,
    pub finalized: usize,
    pub iterations: usize,
    pub step2: Vec<Step2Report>,
    pub timing: UpdateTiming,
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    pub clock: Seconds,
    pub fleet: Vec<Vehicle>,
    pub vehicles: Vec<VehicleRecord>,
    pub trips: Vec<TripRecord>,
    /// Released, unmatched requests, as indices into `trips`.
    pub pending: Vec<usize>,
    index: HashMap<RequestId, usize>,
    released: usize,
}

impl SimulationState {
    /// `demand` must be sorted by request time.
    pub fn new(demand: Vec<Request>, fleet: Vec<Vehicle>) -> Self {
        let index = demand.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        Self {
            clock: 0,
            vehicles: vec![VehicleRecord::default(); fleet.len()],
            fleet,
            trips: demand
                .into_iter()
                .map(|request| TripRecord {
                    request,
                    vehicle: None,
                    assign_t: None,
                    pickup_t: None,
                    dropoff_t: None,
                })
                .collect(),
            pending: Vec::new(),
            index,
            released: 0,
        }
    }

    pub fn trip(&self, id: RequestId) -> Option<&TripRecord> {
        self.index.get(&id).map(|&i| &self.trips[i])
    }

    /// Moves every vehicle along its tour up to `until`.
    pub fn advance(&mut self, net: &RoadNetwork, until: Seconds) {
        assert!(until >= self.clock, "clock cannot go backwards");
        for (vi, v) in self.fleet.iter_mut().enumerate() {
            let rec = &mut self.vehicles[vi];
            while let Some(stop) = v.tour.stops.first().copied() {
                if v.location == stop.node {
                    if v.ready_at > until {
                        break;
                    }
                    v.tour.stops.remove(0);
                    let trip = &mut self.trips[self.index[&stop.request]];
                    if stop.is_pickup() {
                        v.scheduled.remove(&stop.request);
                        v.onboard.insert(stop.request);
                        rec.peak_onboard = rec.peak_onboard.max(v.onboard.len());
                        trip.pickup_t = Some(v.ready_at);
                        trip.request
                            .transition(RequestStatus::Onboard)
                            .expect("only assigned requests are picked up");
                    } else {
                        v.onboard.remove(&stop.request);
                        trip.dropoff_t = Some(v.ready_at);
                        trip.request
                            .transition(RequestStatus::Served)
                            .expect("only onboard requests are dropped off");
                        rec.served += 1;
                    }
                    continue;
                }
                if v.ready_at >= until {
                    break;
                }
                let link = net
                    .next_hop(v.location, stop.node)
                    .expect("tour nodes belong to the network")
                    .expect("tour stops are reachable");
                rec.odometer_m += link.length_m;
                rec.moving_s += link.travel_time_s;
                v.ready_at += link.travel_time_s;
                v.location = link.to;
            }
            if v.tour.is_empty() && v.ready_at < until {
                v.ready_at = until;
            }
        }
        self.clock = until;
    }

    /// Moves requests with `t_r <= now` into the pending set.
    pub fn release(&mut self, now: Seconds) {
        while self.released < self.trips.len() && self.trips[self.released].request.request_time <= now {
            self.pending.push(self.released);
            self.released += 1;
        }
    }

    pub fn all_released(&self) -> bool {
        self.released == self.trips.len()
    }

    pub fn quiescent(&self) -> bool {
        self.all_released() && self.pending.is_empty() && self.fleet.iter().all(|v| v.tour.is_empty())
    }

    /// Runs one matcher call at the current clock and commits its outcome.
    pub fn update(&mut self, net: &RoadNetwork, matcher: Matcher) -> UpdateRecord {
        let now = self.clock;
        let requests: Vec<Request> = self.pending.iter().map(|&i| self.trips[i].request.clone()).collect();
        let outcome = run_update(matcher, net, now, &requests, &mut self.fleet);
        for &(rid, vid) in &outcome.finalized {
            let trip = &mut self.trips[self.index[&rid]];
            trip.request
                .transition(RequestStatus::Assigned)
                .expect("finalized requests were pending");
            trip.vehicle = Some(vid);
            trip.assign_t = Some(now);
        }
        for rid in &outcome.expired {
            self.trips[self.index[rid]]
                .request
                .transition(RequestStatus::Expired)
                .expect("expired requests were pending");
        }
        self.pending = outcome.deferred.iter().map(|r| self.index[r]).collect();
        UpdateRecord {
            time: now,
            pending: requests.len(),
            finalized: outcome.finalized.len(),
            iterations: outcome.iterations,
            step2: outcome.step2,
            timing: outcome.timing,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub trips: Vec<TripRecord>,
    pub vehicles: Vec<VehicleRecord>,
    pub fleet: Vec<Vehicle>,
    pub updates: Vec<UpdateRecord>,
    pub end_time: Seconds,
}

impl ScenarioResult {
    pub fn trip_log_csv(&self) -> String {
        trip_log_csv(&self.trips)
    }
}

/// Generates demand and fleet from the config seed and simulates to
/// quiescence.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult, SimError> {
    let net = config.load_network()?;
    run_scenario_on(config, &net)
}

pub fn run_scenario_on(config: &ScenarioConfig, net: &RoadNetwork) -> Result<ScenarioResult, SimError> {
    config.validate(net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let demand = generate_demand(config, net, &mut rng)?;
    let fleet = initialize_fleet(config, net, &demand, &mut rng);
    simulate(config, net, demand, fleet)
}

/// Simulates the given demand and fleet under the config's matcher and
/// update interval.
pub fn simulate(
    config: &ScenarioConfig,
    net: &RoadNetwork,
    demand: Vec<Request>,
    fleet: Vec<Vehicle>,
) -> Result<ScenarioResult, SimError> {
    let dt = config.update_interval_s;
    // Every request expires or is delivered by its latest arrival.
    let settle_by = demand.iter().map(|r| r.latest_arrival).max().unwrap_or(0).max(config.loading_period_s) + 2 * dt;
    let mut state = SimulationState::new(demand, fleet);
    let mut updates = Vec::new();
    let mut k: i64 = 0;
    loop {
        let now = k * dt;
        state.advance(net, now);
        state.release(now);
        updates.push(state.update(net, config.matcher));
        if now >= config.loading_period_s && state.quiescent() {
            break;
        }
        if now > settle_by {
            return Err(SimError::Stalled(now));
        }
        k += 1;
    }
    Ok(ScenarioResult {
        end_time: state.clock,
        trips: state.trips,
        vehicles: state.vehicles,
        fleet: state.fleet,
        updates,
    })
}

pub const TRIP_LOG_HEADER: [&str; 12] = [
    "request_id", "t_r", "O", "D", "q_r", "l_r", "vehicle_id", "assign_t", "pickup_t", "dropoff_t",
    "H", "status",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trip_log_csv(trips: &[TripRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIP_LOG_HEADER).expect("in-memory write");
    for t in trips {
        let r = &t.request;
        w.write_record([
            r.id.to_string(),
            r.request_time.to_string(),
            r.origin.to_string(),
            r.destination.to_string(),
            r.latest_departure.to_string(),
            r.latest_arrival.to_string(),
            opt(t.vehicle),
            opt(t.assign_t),
            opt(t.pickup_t),
            opt(t.dropoff_t),
            r.direct_time.to_string(),
            r.status.as_str().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
