//! Dynamic many-to-one ride matching.
//!
//! At every update time the GMOMatch matcher assigns pending requests to
//! vehicles one-to-one, then merges the requests of lightly used vehicles
//! into others, and repeats while requests and feasible vehicles remain. A
//! one-to-one baseline and a rolling-horizon fleet simulator are included for
//! comparison.
//!
//! ```
//! use ridematch::engine::gmomatch_update;
//! use ridematch::model::{Request, RequestId, Vehicle, VehicleId};
//! use ridematch::network::{NodeId, RoadNetwork};
//!
//! let net = RoadNetwork::grid(3, 3, 400.0, 60);
//! let requests: Vec<Request> = (0..3)
//!     .map(|i| Request::with_flexibility(RequestId(i), 0, NodeId(1), NodeId(7), 300, &net).unwrap())
//!     .collect();
//! let mut fleet = vec![Vehicle::new(VehicleId(0), 4, NodeId(0), 0)];
//! let outcome = gmomatch_update(&net, 0, &requests, &mut fleet);
//! assert_eq!(outcome.finalized.len(), 3);
//! ```

pub mod assignment;
pub mod blossom;
pub mod cli;
pub mod engine;
pub mod hungarian;
pub mod metrics;
pub mod model;
pub mod network;
pub mod scheduling;
pub mod sim;
pub mod vehicle_graph;

pub use engine::{baseline_update, gmomatch_update, Matcher, UpdateOutcome};
pub use metrics::{compute_metrics, MetricsReport};
pub use model::{Request, RequestId, Stop, StopKind, Tour, Vehicle, VehicleId};
pub use network::{NodeId, RoadNetwork, Seconds};
pub use sim::{run_scenario, ScenarioConfig, ScenarioResult};
