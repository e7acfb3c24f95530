//! Battery-feasibility repair by station insertion.
//!
//! Shared by the construction heuristics: given a stop sequence and a set
//! of usable stations, repeatedly insert the cheapest-detour station into
//! the first range-violating arc until the route becomes feasible or no
//! insertion helps.

use crate::feasibility::simulate_route;
use crate::instance::Instance;
use crate::soc::ChargingModel;

/// Stops with all station visits removed (customer order preserved).
pub fn strip_stations(instance: &Instance, stops: &[usize]) -> Vec<usize> {
    stops
        .iter()
        .copied()
        .filter(|&s| !instance.is_station(s))
        .collect()
}

/// Customers visited by a stop sequence, in order.
pub fn customers_of(instance: &Instance, stops: &[usize]) -> Vec<usize> {
    stops
        .iter()
        .copied()
        .filter(|&s| instance.is_customer(s))
        .collect()
}

/// Station nodes appearing in any of the given stop lists, sorted.
pub fn used_stations(instance: &Instance, stop_lists: &[(usize, Vec<usize>)]) -> Vec<usize> {
    let mut used: Vec<usize> = stop_lists
        .iter()
        .flat_map(|(_, stops)| stops.iter().copied())
        .filter(|&s| instance.is_station(s))
        .collect();
    used.sort_unstable();
    used.dedup();
    used
}

pub fn route_length(instance: &Instance, stops: &[usize]) -> f64 {
    stops.windows(2).map(|w| instance.dist(w[0], w[1])).sum()
}

/// Makes a route battery-feasible by inserting stations from `available`,
/// cheapest detour first. Each round targets the first range-violating arc;
/// if no insertion there helps (the vehicle ran too low too early), the
/// scan walks backward over earlier arcs so a charge can happen before the
/// depletion point. A candidate insertion must strictly advance the
/// failure point to be kept. Returns the repaired stop list, or None when
/// no sequence of insertions fixes the route.
pub fn repair_route(
    instance: &Instance,
    charging: &ChargingModel,
    available: &[usize],
    stops: &[usize],
) -> Option<Vec<usize>> {
    let mut current = stops.to_vec();
    let budget = current.len() + 2 * available.len() + 4;
    for _ in 0..budget {
        let sim = simulate_route(instance, charging, available, &current);
        let (fail_arc, _) = match sim.battery_fail {
            None => return Some(current),
            Some(f) => f,
        };
        let progress = progress_before(instance, &current, fail_arc);

        let mut inserted = false;
        'arcs: for arc in (0..=fail_arc).rev() {
            let prev = current[arc];
            let next = current[arc + 1];
            // Only stations reachable with the charge held when leaving
            // `prev` can possibly help on this arc.
            let departure_range = sim.battery_trace[arc].1;
            let mut candidates: Vec<(f64, usize)> = available
                .iter()
                .copied()
                .filter(|&s| {
                    s != prev && s != next && instance.dist(prev, s) <= departure_range + 1e-9
                })
                .map(|s| {
                    let detour = instance.dist(prev, s) + instance.dist(s, next)
                        - instance.dist(prev, next);
                    (detour, s)
                })
                .collect();
            candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite detours"));
            for (_, station) in candidates {
                let mut trial = current.clone();
                trial.insert(arc + 1, station);
                let trial_sim = simulate_route(instance, charging, available, &trial);
                let advanced = match trial_sim.battery_fail {
                    None => true,
                    Some((a, _)) => progress_before(instance, &trial, a) > progress,
                };
                if advanced {
                    current = trial;
                    inserted = true;
                    break 'arcs;
                }
            }
        }
        if !inserted {
            return None;
        }
    }
    None
}

/// Length of the repaired route minus the length of the bare route: the
/// detour price of making `stops` battery-feasible with `available`.
pub fn repair_cost(
    instance: &Instance,
    charging: &ChargingModel,
    available: &[usize],
    stops: &[usize],
) -> Option<f64> {
    let repaired = repair_route(instance, charging, available, stops)?;
    Some(route_length(instance, &repaired) - route_length(instance, stops))
}

// Customers completed before the failing arc; insertion indices shift, so
// failure positions are compared in customer progress, not arc index.
fn progress_before(instance: &Instance, stops: &[usize], fail_arc: usize) -> usize {
    stops[..=fail_arc]
        .iter()
        .filter(|&&s| instance.is_customer(s))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Customer, Instance, Meta, Node, NodeKind, StationCandidate, Vehicle};
    use crate::soc;

    fn line_instance(customer_x: f64, station_xs: &[f64]) -> Instance {
        let mut nodes = vec![
            Node { id: 0, kind: NodeKind::Depot, x: 0.0, y: 0.0 },
            Node { id: 1, kind: NodeKind::DepotCopy, x: 0.0, y: 0.0 },
            Node { id: 2, kind: NodeKind::Customer, x: customer_x, y: 0.0 },
        ];
        let mut stations = Vec::new();
        for (k, &x) in station_xs.iter().enumerate() {
            let id = 3 + k;
            nodes.push(Node { id, kind: NodeKind::StationCandidate, x, y: 0.0 });
            stations.push(StationCandidate { node: id, fixed_cost: 1000.0 });
        }
        Instance::new(
            Meta { seed: 0, version: 1 },
            nodes,
            vec![Customer { node: 2, demand: 1.0 }],
            stations,
            vec![Vehicle { id: 0, capacity: 100.0, cost_rate: 1.0 }],
            2.0,
            90.0,
            90.0,
            None,
        )
        .unwrap()
    }

    #[test]
    fn feasible_route_is_untouched() {
        let inst = line_instance(50.0, &[40.0]);
        let charging = soc::default_calibration(10.0, 80.0);
        let repaired = repair_route(&inst, &charging, &[3], &[0, 2, 1]).unwrap();
        assert_eq!(repaired, vec![0, 2, 1]);
    }

    #[test]
    fn inserts_station_on_failing_return_leg() {
        // 120 km out: reaches the customer (range 180), fails on the return.
        let inst = line_instance(120.0, &[60.0]);
        let charging = soc::default_calibration(10.0, 80.0);
        let repaired = repair_route(&inst, &charging, &[3], &[0, 2, 1]).unwrap();
        assert_eq!(repaired, vec![0, 2, 3, 1]);
        assert!(simulate_route(&inst, &charging, &[3], &repaired)
            .battery_fail
            .is_none());
    }

    #[test]
    fn picks_cheaper_detour_station() {
        let inst = line_instance(120.0, &[60.0, 58.0]);
        let charging = soc::default_calibration(10.0, 80.0);
        let repaired = repair_route(&inst, &charging, &[3, 4], &[0, 2, 1]).unwrap();
        // Both stations lie on the segment, so the detour is zero for each;
        // ties resolve toward the first in detour-then-id order.
        assert_eq!(repaired.len(), 4);
        assert!(repaired.contains(&3) || repaired.contains(&4));
    }

    #[test]
    fn unrepairable_route_returns_none() {
        let inst = line_instance(120.0, &[]);
        let charging = soc::default_calibration(10.0, 80.0);
        assert!(repair_route(&inst, &charging, &[], &[0, 2, 1]).is_none());
    }

    #[test]
    fn strip_and_customers_helpers() {
        let inst = line_instance(50.0, &[40.0]);
        assert_eq!(strip_stations(&inst, &[0, 3, 2, 1]), vec![0, 2, 1]);
        assert_eq!(customers_of(&inst, &[0, 3, 2, 1]), vec![2]);
        assert_eq!(used_stations(&inst, &[(0, vec![0, 3, 2, 1])]), vec![3]);
    }
}
