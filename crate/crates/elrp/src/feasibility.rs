//! Model-free solution verification and a tiny-instance exact oracle.
//!
//! The checker recomputes load and battery traces from scratch using only
//! the instance data and the recharge map, so it shares no code with the
//! MILP encoding it cross-validates. The exact solver enumerates station
//! subsets, customer-to-vehicle partitions, and stop permutations with
//! bounded station insertions; it is the ground truth that heuristics and
//! external solvers are measured against.

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::soc::ChargingModel;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Absolute tolerance for all checker comparisons (km and weight units).
pub const CHECK_TOL: f64 = 1e-6;

/// Which recharge rule a model or check applies at opened stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// Fixed recharge: every station visit tops up to `soc_full`.
    Ev,
    /// Affine temperature-dependent recharge `mu1 * soc + mu2`.
    Evl,
}

/// One vehicle's tour: depot, stops, depot copy, with recomputed traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub vehicle: usize,
    pub stops: Vec<usize>,
    /// Deliverable load still on board after each stop.
    pub load_trace: Vec<f64>,
    /// (arrival range, departure range) in km at each stop.
    pub battery_trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub station_cost: f64,
    pub routing_cost: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Opened station node ids, sorted ascending.
    pub opened: Vec<usize>,
    pub routes: Vec<Route>,
    pub objective: ObjectiveBreakdown,
}

impl Solution {
    pub fn empty() -> Self {
        Self {
            opened: Vec::new(),
            routes: Vec::new(),
            objective: ObjectiveBreakdown {
                station_cost: 0.0,
                routing_cost: 0.0,
                total: 0.0,
            },
        }
    }

    /// Assembles a solution from raw stop sequences: recomputes traces with
    /// the given recharge map and fills in the objective decomposition.
    pub fn from_stop_lists(
        instance: &Instance,
        charging: &ChargingModel,
        opened: Vec<usize>,
        stop_lists: Vec<(usize, Vec<usize>)>,
    ) -> Self {
        let mut opened = opened;
        opened.sort_unstable();
        opened.dedup();
        let routes = stop_lists
            .into_iter()
            .map(|(vehicle, stops)| {
                let sim = simulate_route(instance, charging, &opened, &stops);
                Route {
                    vehicle,
                    stops,
                    load_trace: sim.load_trace,
                    battery_trace: sim.battery_trace,
                }
            })
            .collect();
        let mut solution = Self {
            opened,
            routes,
            objective: ObjectiveBreakdown {
                station_cost: 0.0,
                routing_cost: 0.0,
                total: 0.0,
            },
        };
        solution.objective = objective(instance, &solution);
        solution
    }

    /// Deterministic comparison key: objective, then opened set, then route
    /// encodings. Used to break exact-solver ties.
    fn tie_key(&self) -> (Vec<usize>, Vec<Vec<usize>>) {
        (
            self.opened.clone(),
            self.routes.iter().map(|r| r.stops.clone()).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Route does not run from the depot to the depot copy.
    RouteEndpoints,
    /// Two consecutive identical stops.
    ConsecutiveDuplicate,
    /// Stop references a depot in the middle of a route or an unknown node.
    InvalidStop,
    /// Route references a vehicle not in the fleet, or a vehicle twice.
    VehicleUse,
    /// A customer is visited zero times or more than once.
    CustomerVisitCount,
    /// A route visits a station that is not opened.
    UnopenedStation,
    /// Route demand exceeds the vehicle's weight capacity.
    CapacityExceeded,
    /// Driving range goes negative along an arc.
    BatteryDepleted,
    /// Claimed objective decomposition does not match recomputation.
    ObjectiveMismatch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: String,
    /// Violation size in native units (km for battery, weight for load).
    pub magnitude: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:?} at {} (magnitude {:.6})",
            self.kind, self.location, self.magnitude
        )
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, location: impl Into<String>, magnitude: f64) {
        self.violations.push(Violation {
            kind,
            location: location.into(),
            magnitude,
        });
    }
}

impl std::fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "solution is feasible (no violations)")
        } else {
            writeln!(f, "{} violation(s):", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  - {v}")?;
            }
            Ok(())
        }
    }
}

/// Result of replaying a stop sequence: canonical traces plus the first
/// range deficit, if any.
pub struct RouteSim {
    pub load_trace: Vec<f64>,
    pub battery_trace: Vec<(f64, f64)>,
    /// `(arc index, deficit km)` of the first arc where range went negative.
    pub battery_fail: Option<(usize, f64)>,
    pub total_demand: f64,
    pub length_km: f64,
}

/// Replays a route from scratch: full initial range at the depot, range
/// decreases by arc length, recharges at opened stations using the maximum
/// the recharge map allows, and load drops by each customer's demand.
pub fn simulate_route(
    instance: &Instance,
    charging: &ChargingModel,
    opened: &[usize],
    stops: &[usize],
) -> RouteSim {
    let phi = instance.phi;
    let total_demand: f64 = stops.iter().map(|&n| instance.demand_of(n)).sum();
    let mut load = total_demand;
    let mut load_trace = Vec::with_capacity(stops.len());
    let mut battery_trace = Vec::with_capacity(stops.len());
    let mut battery_fail = None;
    let mut length_km = 0.0;

    let mut range = instance.initial_range();
    if let Some(&first) = stops.first() {
        load_trace.push(load);
        battery_trace.push((range, range));
        let mut prev = first;
        for (arc_idx, &stop) in stops.iter().enumerate().skip(1) {
            let d = instance.dist(prev, stop);
            length_km += d;
            range -= d;
            if range < -CHECK_TOL && battery_fail.is_none() {
                battery_fail = Some((arc_idx - 1, -range));
            }
            let arrival = range;
            let clamped = arrival.max(0.0);
            let departure = if instance.is_station(stop) && opened.contains(&stop) {
                charging.range_after(clamped, phi)
            } else {
                clamped
            };
            range = departure;
            if instance.is_customer(stop) {
                load -= instance.demand_of(stop);
            }
            load_trace.push(load);
            battery_trace.push((arrival, departure));
            prev = stop;
        }
    }

    RouteSim {
        load_trace,
        battery_trace,
        battery_fail,
        total_demand,
        length_km,
    }
}

/// Verifies a solution against the problem semantics. Violations are data,
/// not errors: the report is empty iff every constraint holds.
pub fn check_solution(
    instance: &Instance,
    charging: &ChargingModel,
    solution: &Solution,
) -> ViolationReport {
    let mut report = ViolationReport::default();
    let o = instance.depot();
    let oc = instance.depot_copy();
    let n = instance.nodes.len();

    let mut vehicles_seen = Vec::new();
    let mut visit_counts: BTreeMap<usize, usize> = BTreeMap::new();

    for (ridx, route) in solution.routes.iter().enumerate() {
        let loc = |detail: &str| format!("route {ridx} (vehicle {}): {detail}", route.vehicle);

        let vehicle = instance.fleet.iter().find(|v| v.id == route.vehicle);
        if vehicle.is_none() {
            report.push(ViolationKind::VehicleUse, loc("unknown vehicle"), 1.0);
        }
        if vehicles_seen.contains(&route.vehicle) {
            report.push(ViolationKind::VehicleUse, loc("vehicle used twice"), 1.0);
        }
        vehicles_seen.push(route.vehicle);

        if route.stops.len() < 2
            || route.stops.first() != Some(&o)
            || route.stops.last() != Some(&oc)
        {
            report.push(
                ViolationKind::RouteEndpoints,
                loc("must start at the depot and end at its copy"),
                1.0,
            );
            continue;
        }
        let mut structurally_ok = true;
        for window in route.stops.windows(2) {
            if window[0] == window[1] {
                report.push(
                    ViolationKind::ConsecutiveDuplicate,
                    loc(&format!("stop {} repeated", window[0])),
                    1.0,
                );
                structurally_ok = false;
            }
        }
        for &stop in &route.stops[1..route.stops.len() - 1] {
            if stop >= n || stop == o || stop == oc {
                report.push(
                    ViolationKind::InvalidStop,
                    loc(&format!("interior stop {stop}")),
                    1.0,
                );
                structurally_ok = false;
            } else if instance.is_customer(stop) {
                *visit_counts.entry(stop).or_insert(0) += 1;
            } else if instance.is_station(stop) && !solution.opened.contains(&stop) {
                report.push(
                    ViolationKind::UnopenedStation,
                    loc(&format!("station {stop} is not opened")),
                    1.0,
                );
            }
        }
        if !structurally_ok {
            continue;
        }

        let sim = simulate_route(instance, charging, &solution.opened, &route.stops);
        if let Some(v) = vehicle {
            if sim.total_demand > v.capacity + CHECK_TOL {
                report.push(
                    ViolationKind::CapacityExceeded,
                    loc(&format!(
                        "demand {} exceeds capacity {}",
                        sim.total_demand, v.capacity
                    )),
                    sim.total_demand - v.capacity,
                );
            }
        }
        if let Some((arc, deficit)) = sim.battery_fail {
            report.push(
                ViolationKind::BatteryDepleted,
                loc(&format!(
                    "arc {} -> {}",
                    route.stops[arc],
                    route.stops[arc + 1]
                )),
                deficit,
            );
        }
    }

    for customer in &instance.customers {
        let count = visit_counts.get(&customer.node).copied().unwrap_or(0);
        if count != 1 {
            report.push(
                ViolationKind::CustomerVisitCount,
                format!("customer {} visited {count} times", customer.node),
                (count as f64 - 1.0).abs(),
            );
        }
    }

    let recomputed = objective(instance, solution);
    for (name, claimed, actual) in [
        (
            "station_cost",
            solution.objective.station_cost,
            recomputed.station_cost,
        ),
        (
            "routing_cost",
            solution.objective.routing_cost,
            recomputed.routing_cost,
        ),
        ("total", solution.objective.total, recomputed.total),
    ] {
        if (claimed - actual).abs() > CHECK_TOL {
            report.push(
                ViolationKind::ObjectiveMismatch,
                format!("{name}: claimed {claimed}, recomputed {actual}"),
                (claimed - actual).abs(),
            );
        }
    }

    report
}

/// Objective decomposition: fixed costs of opened stations plus per-km
/// shipping costs over all route arcs.
pub fn objective(instance: &Instance, solution: &Solution) -> ObjectiveBreakdown {
    let station_cost: f64 = solution
        .opened
        .iter()
        .map(|&j| instance.station_cost(j))
        .sum();
    let mut routing_cost = 0.0;
    for route in &solution.routes {
        let rate = instance
            .fleet
            .iter()
            .find(|v| v.id == route.vehicle)
            .map(|v| v.cost_rate)
            .unwrap_or(0.0);
        for window in route.stops.windows(2) {
            routing_cost += rate * instance.dist(window[0], window[1]);
        }
    }
    ObjectiveBreakdown {
        station_cost,
        routing_cost,
        total: station_cost + routing_cost,
    }
}

/// Enumeration budget for the exact oracle.
const MAX_TINY_CUSTOMERS: usize = 6;
const MAX_TINY_STATIONS: usize = 3;
const MAX_TINY_VEHICLES: usize = 2;

/// Exhaustive optimizer for tiny instances: all station subsets, all
/// customer-to-vehicle assignments, all stop permutations, and station
/// insertions with at most one charging stop between consecutive customer
/// visits and at most `|J|` charging stops per route.
pub fn exact_solve_tiny(
    instance: &Instance,
    charging: &ChargingModel,
    variant: ModelVariant,
) -> Result<Solution> {
    let n_customers = instance.customers.len();
    let n_stations = instance.stations.len();
    let n_vehicles = instance.fleet.len();
    if n_customers > MAX_TINY_CUSTOMERS
        || n_stations > MAX_TINY_STATIONS
        || n_vehicles > MAX_TINY_VEHICLES
    {
        return Err(Error::TooLarge(format!(
            "budget is |I| <= {MAX_TINY_CUSTOMERS}, |J| <= {MAX_TINY_STATIONS}, \
             |E| <= {MAX_TINY_VEHICLES}; got ({n_customers}, {n_stations}, {n_vehicles})"
        )));
    }
    let effective = effective_charging(instance, charging, variant);
    let customers = instance.customer_nodes();
    let stations = instance.station_nodes();

    let mut best: Option<Solution> = None;
    for mask in 0u32..(1 << n_stations) {
        let opened: Vec<usize> = stations
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, &j)| j)
            .collect();
        let station_cost: f64 = opened.iter().map(|&j| instance.station_cost(j)).sum();
        if let Some(b) = &best {
            if station_cost > b.objective.total + CHECK_TOL {
                continue;
            }
        }
        for assignment in 0..(n_vehicles as u64).pow(n_customers as u32).max(1) {
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_vehicles];
            let mut code = assignment;
            for &cust in &customers {
                groups[(code % n_vehicles as u64) as usize].push(cust);
                code /= n_vehicles as u64;
            }
            let mut routing_cost = 0.0;
            let mut stop_lists = Vec::new();
            let mut feasible = true;
            for (vi, group) in groups.iter().enumerate() {
                if group.is_empty() {
                    continue;
                }
                let vehicle = &instance.fleet[vi];
                match best_route_for_group(instance, &effective, &opened, vehicle, group) {
                    Some((cost, stops)) => {
                        routing_cost += cost;
                        stop_lists.push((vehicle.id, stops));
                    }
                    None => {
                        feasible = false;
                        break;
                    }
                }
            }
            if !feasible {
                continue;
            }
            let total = station_cost + routing_cost;
            let better = match &best {
                None => true,
                Some(b) => {
                    total < b.objective.total - CHECK_TOL
                        || ((total - b.objective.total).abs() <= CHECK_TOL
                            && candidate_key(&opened, &stop_lists) < b.tie_key())
                }
            };
            if better {
                best = Some(Solution::from_stop_lists(
                    instance,
                    &effective,
                    opened.clone(),
                    stop_lists,
                ));
            }
        }
    }

    best.ok_or(Error::Infeasible {
        unserved: Vec::new(),
    })
}

/// Picks the recharge map the given model variant implies.
pub fn effective_charging(
    instance: &Instance,
    charging: &ChargingModel,
    variant: ModelVariant,
) -> ChargingModel {
    match variant {
        ModelVariant::Ev => ChargingModel::full_recharge(instance.soc_full),
        ModelVariant::Evl => charging.clone(),
    }
}

fn candidate_key(opened: &[usize], stop_lists: &[(usize, Vec<usize>)]) -> (Vec<usize>, Vec<Vec<usize>>) {
    (
        opened.to_vec(),
        stop_lists.iter().map(|(_, s)| s.clone()).collect(),
    )
}

/// Cheapest feasible route serving `group` with vehicle `vehicle`, or None.
fn best_route_for_group(
    instance: &Instance,
    charging: &ChargingModel,
    opened: &[usize],
    vehicle: &crate::instance::Vehicle,
    group: &[usize],
) -> Option<(f64, Vec<usize>)> {
    let demand: f64 = group.iter().map(|&c| instance.demand_of(c)).sum();
    if demand > vehicle.capacity + CHECK_TOL {
        return None;
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut perm: Vec<usize> = group.to_vec();
    permute(&mut perm, 0, &mut |order| {
        enumerate_insertions(
            instance,
            charging,
            opened,
            vehicle,
            order,
            instance.stations.len(),
            &mut best,
        );
    });
    best
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Tries every placement of at most one opened station per gap (and at most
/// `max_stops` station visits per route) around the fixed customer order.
fn enumerate_insertions(
    instance: &Instance,
    charging: &ChargingModel,
    opened: &[usize],
    vehicle: &crate::instance::Vehicle,
    order: &[usize],
    max_stops: usize,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    let gaps = order.len() + 1;
    // Mixed-radix counter: digit g in 0..=|opened| selects no station or
    // opened[g-1] in gap g.
    let radix = opened.len() + 1;
    let mut digits = vec![0usize; gaps];
    loop {
        let used = digits.iter().filter(|&&d| d != 0).count();
        if used <= max_stops {
            let mut stops = Vec::with_capacity(order.len() + used + 2);
            stops.push(instance.depot());
            for (g, &digit) in digits.iter().enumerate() {
                if digit != 0 {
                    stops.push(opened[digit - 1]);
                }
                if g < order.len() {
                    stops.push(order[g]);
                }
            }
            stops.push(instance.depot_copy());
            let mut valid = true;
            for w in stops.windows(2) {
                if w[0] == w[1] {
                    valid = false;
                    break;
                }
            }
            if valid {
                let sim = simulate_route(instance, charging, opened, &stops);
                if sim.battery_fail.is_none() {
                    let cost = vehicle.cost_rate * sim.length_km;
                    let better = match best {
                        None => true,
                        Some((bc, bs)) => {
                            cost < *bc - CHECK_TOL
                                || ((cost - *bc).abs() <= CHECK_TOL && stops < *bs)
                        }
                    };
                    if better {
                        *best = Some((cost, stops));
                    }
                }
            }
        }
        // advance counter
        let mut i = 0;
        loop {
            if i == gaps {
                return;
            }
            digits[i] += 1;
            if digits[i] < radix {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

pub fn solution_to_json(solution: &Solution) -> Result<String> {
    Ok(serde_json::to_string_pretty(solution)?)
}

pub fn solution_from_json(text: &str) -> Result<Solution> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        context: "solution file".into(),
        message: e.to_string(),
    })
}

pub fn save_solution(solution: &Solution, path: &Path) -> Result<()> {
    std::fs::write(path, solution_to_json(solution)?)?;
    Ok(())
}

pub fn load_solution(path: &Path) -> Result<Solution> {
    solution_from_json(&std::fs::read_to_string(path)?)
}
