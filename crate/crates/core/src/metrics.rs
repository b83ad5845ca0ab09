//! Scenario indicators computed from trip logs and update records.
//!
//! Travel time and speed cover the shared fleet only: the simulator has no
//! background traffic.

use std::fmt;

use crate::model::RequestStatus;
use crate::sim::{TripRecord, UpdateRecord, VehicleRecord};

/// Bumped whenever the CSV columns change.
pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// Written in place of the service rate when no request was generated.
pub const NO_REQUESTS: &str = "NA";

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricsReport {
    pub generated: usize,
    pub served: usize,
    pub expired: usize,
    pub fleet_size: usize,
    pub updates: usize,
    /// Percent of generated requests served; `None` without requests.
    pub service_rate: Option<f64>,
    /// Kilometres per vehicle.
    pub avg_vkt_km: f64,
    /// Minutes per served request.
    pub avg_detour_min: f64,
    /// Minutes per served request, from request time to pickup.
    pub avg_wait_min: f64,
    /// Minutes of link traversal per vehicle that moved.
    pub avg_shared_vehicle_travel_time_min: f64,
    /// Distance over moving time, pooled across vehicles that moved.
    pub avg_shared_vehicle_speed_kmh: f64,
    /// Served requests per vehicle.
    pub avg_assignments: f64,
    /// Seconds per update call.
    pub avg_cost_calculation_s: f64,
    pub avg_solution_s: f64,
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn compute_metrics(
    trips: &[TripRecord],
    vehicles: &[VehicleRecord],
    updates: &[UpdateRecord],
) -> MetricsReport {
    let served: Vec<&TripRecord> = trips
        .iter()
        .filter(|t| t.status() == RequestStatus::Served)
        .collect();
    let expired = trips.iter().filter(|t| t.status() == RequestStatus::Expired).count();

    let detour: i64 = served
        .iter()
        .map(|t| t.dropoff_t.unwrap() - t.pickup_t.unwrap() - t.request.direct_time)
        .sum();
    let wait: i64 = served
        .iter()
        .map(|t| t.pickup_t.unwrap() - t.request.request_time)
        .sum();

    let moving: Vec<&VehicleRecord> = vehicles.iter().filter(|v| v.moving_s > 0).collect();
    let moving_s: i64 = moving.iter().map(|v| v.moving_s).sum();
    let moving_km: f64 = moving.iter().map(|v| v.odometer_m).sum::<f64>() / 1000.0;
    let total_km: f64 = vehicles.iter().map(|v| v.odometer_m).sum::<f64>() / 1000.0;

    let cost_s: f64 = updates.iter().map(|u| u.timing.cost_calculation.as_secs_f64()).sum();
    let solve_s: f64 = updates.iter().map(|u| u.timing.solution.as_secs_f64()).sum();

    MetricsReport {
        generated: trips.len(),
        served: served.len(),
        expired,
        fleet_size: vehicles.len(),
        updates: updates.len(),
        service_rate: (!trips.is_empty()).then(|| 100.0 * served.len() as f64 / trips.len() as f64),
        avg_vkt_km: mean(total_km, vehicles.len()),
        avg_detour_min: mean(detour as f64 / 60.0, served.len()),
        avg_wait_min: mean(wait as f64 / 60.0, served.len()),
        avg_shared_vehicle_travel_time_min: mean(moving_s as f64 / 60.0, moving.len()),
        avg_shared_vehicle_speed_kmh: if moving_s > 0 {
            moving_km / (moving_s as f64 / 3600.0)
        } else {
            0.0
        },
        avg_assignments: mean(served.len() as f64, vehicles.len()),
        avg_cost_calculation_s: mean(cost_s, updates.len()),
        avg_solution_s: mean(solve_s, updates.len()),
    }
}

impl MetricsReport {
    pub const CSV_HEADER: [&'static str; 15] = [
        "schema_version",
        "generated",
        "served",
        "expired",
        "fleet_size",
        "updates",
        "service_rate_pct",
        "avg_vkt_km",
        "avg_detour_min",
        "avg_wait_min",
        "avg_shared_vehicle_travel_time_min",
        "avg_shared_vehicle_speed_kmh",
        "avg_assignments",
        "avg_cost_calculation_s",
        "avg_solution_s",
    ];

    pub fn csv_values(&self) -> Vec<String> {
        let f = |x: f64| format!("{x:.6}");
        vec![
            METRICS_SCHEMA_VERSION.to_string(),
            self.generated.to_string(),
            self.served.to_string(),
            self.expired.to_string(),
            self.fleet_size.to_string(),
            self.updates.to_string(),
            self.service_rate.map(f).unwrap_or_else(|| NO_REQUESTS.to_string()),
            f(self.avg_vkt_km),
            f(self.avg_detour_min),
            f(self.avg_wait_min),
            f(self.avg_shared_vehicle_travel_time_min),
            f(self.avg_shared_vehicle_speed_kmh),
            f(self.avg_assignments),
            format!("{:.9}", self.avg_cost_calculation_s),
            format!("{:.9}", self.avg_solution_s),
        ]
    }

    /// Header plus one row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER).expect("in-memory write");
        w.write_record(self.csv_values()).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.service_rate {
            Some(sr) => writeln!(f, "service rate        {sr:.2}% ({} of {} served, {} expired)", self.served, self.generated, self.expired)?,
            None => writeln!(f, "service rate        n/a (no requests)")?,
        }
        writeln!(f, "avg VKT             {:.3} km/vehicle", self.avg_vkt_km)?;
        writeln!(f, "avg detour          {:.3} min", self.avg_detour_min)?;
        writeln!(f, "avg wait            {:.3} min", self.avg_wait_min)?;
        writeln!(f, "fleet travel time   {:.3} min (shared vehicles only)", self.avg_shared_vehicle_travel_time_min)?;
        writeln!(f, "fleet speed         {:.3} km/h (shared vehicles only)", self.avg_shared_vehicle_speed_kmh)?;
        writeln!(f, "assignments         {:.3} requests/vehicle", self.avg_assignments)?;
        write!(
            f,
            "compute per update  {:.6} s cost + {:.6} s solution over {} updates",
            self.avg_cost_calculation_s, self.avg_solution_s, self.updates
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Request, RequestId, VehicleId};
    use crate::network::{NodeId, RoadNetwork, Seconds};

    fn trip(net: &RoadNetwork, id: u64, t: Seconds, o: u32, d: u32, times: Option<(Seconds, Seconds)>) -> TripRecord {
        let mut request = Request::with_flexibility(RequestId(id), t, NodeId(o), NodeId(d), 300, net).unwrap();
        let (pickup_t, dropoff_t) = match times {
            Some((p, q)) => {
                for s in [RequestStatus::Assigned, RequestStatus::Onboard, RequestStatus::Served] {
                    request.transition(s).unwrap();
                }
                (Some(p), Some(q))
            }
            None => {
                request.transition(RequestStatus::Expired).unwrap();
                (None, None)
            }
        };
        TripRecord {
            request,
            vehicle: times.map(|_| VehicleId(0)),
            assign_t: times.map(|_| t),
            pickup_t,
            dropoff_t,
        }
    }

    #[test]
    fn ratio_and_direct_trip() {
        let net = RoadNetwork::grid(1, 3, 500.0, 60);
        let trips = vec![
            trip(&net, 0, 0, 0, 1, Some((0, 60))),
            trip(&net, 1, 0, 0, 2, Some((30, 150))),
            trip(&net, 2, 0, 1, 2, Some((60, 120))),
            trip(&net, 3, 0, 2, 0, None),
        ];
        let v = VehicleRecord { odometer_m: 3000.0, moving_s: 360, peak_onboard: 2, served: 3 };
        let m = compute_metrics(&trips, &[v, VehicleRecord::default()], &[]);
        assert_eq!(m.service_rate, Some(75.0));
        assert_eq!(m.expired, 1);
        // Ride times 60, 120, 60 against direct 60, 120, 60.
        assert_eq!(m.avg_detour_min, 0.0);
        assert_eq!(m.avg_wait_min, 0.5);
        assert_eq!(m.avg_vkt_km, 1.5);
        assert_eq!(m.avg_shared_vehicle_travel_time_min, 6.0);
        assert_eq!(m.avg_shared_vehicle_speed_kmh, 30.0);
        assert_eq!(m.avg_assignments, 1.5);
    }

    #[test]
    fn empty_log_is_sentinel() {
        let m = compute_metrics(&[], &[VehicleRecord::default()], &[]);
        assert_eq!(m.service_rate, None);
        assert_eq!(m.csv_values()[6], NO_REQUESTS);
        assert_eq!(m.avg_detour_min, 0.0);
        assert!(m.to_string().contains("no requests"));
    }

    #[test]
    fn csv_has_matching_header() {
        let m = MetricsReport::default();
        let text = m.to_csv();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
        assert!(lines[1].starts_with(&METRICS_SCHEMA_VERSION.to_string()));
    }
}
