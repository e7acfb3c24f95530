//! MILP builders for the base and linearized-recharge formulations, plus
//! LP-format export for external exact solvers.
//!
//! Both models share the location-routing core: binary station-opening
//! variables, binary arc variables per vehicle, load flows on arcs, and
//! per-node arrival/departure driving ranges. The base variant recharges
//! visited stations to a fixed level; the linearized variant bounds the
//! departure range by the affine recharge map, using auxiliary products
//! `z = b1 * x` made linear by four bounding rows.
//!
//! Self-loop arcs, arcs into the depot, and arcs out of the depot copy are
//! excluded from the arc set, as is the direct depot-to-copy arc.

use crate::error::{Error, Result};
use crate::feasibility::{ModelVariant, ObjectiveBreakdown, Route, Solution};
use crate::instance::Instance;
use crate::soc::ChargingModel;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Tolerance for binary rounding in decode and for constraint checking.
pub const MILP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    /// `(variable index, coefficient)` pairs; every index is declared.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Typed identity of a variable, independent of its printable name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarKey {
    X { station: usize },
    Y { from: usize, to: usize, vehicle: usize },
    R { from: usize, to: usize, vehicle: usize },
    B1 { node: usize, vehicle: usize },
    B2 { node: usize, vehicle: usize },
    Z { station: usize, vehicle: usize },
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub variant: ModelVariant,
    pub variables: Vec<Variable>,
    pub keys: Vec<VarKey>,
    pub constraints: Vec<Constraint>,
    /// Minimization objective as `(variable index, coefficient)` pairs.
    pub objective: Vec<(usize, f64)>,
    /// Recharge map baked into the model: `(mu1, mu2)`; the base variant is
    /// `(0, soc_full)`.
    pub recharge: (f64, f64),
    name_index: BTreeMap<String, usize>,
}

impl MilpModel {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.name_index.get(name).copied()
    }

    pub fn key_index(&self, key: VarKey) -> Option<usize> {
        // Keys are few enough that a scan keeps the struct lean.
        self.keys.iter().position(|&k| k == key)
    }

    /// Objective value at an assignment (missing variables read as zero).
    pub fn evaluate_objective(&self, assignment: &BTreeMap<String, f64>) -> f64 {
        self.objective
            .iter()
            .map(|&(idx, coef)| coef * assignment.get(&self.variables[idx].name).copied().unwrap_or(0.0))
            .sum()
    }

    /// Names of violated rows and variable bounds at an assignment,
    /// evaluated with absolute tolerance [`MILP_TOL`].
    pub fn check_assignment(&self, assignment: &BTreeMap<String, f64>) -> Vec<String> {
        let mut violated = Vec::new();
        let value = |idx: usize| {
            assignment
                .get(&self.variables[idx].name)
                .copied()
                .unwrap_or(0.0)
        };
        for (idx, var) in self.variables.iter().enumerate() {
            let v = value(idx);
            if v < var.lower - MILP_TOL || v > var.upper + MILP_TOL {
                violated.push(format!("bound {}", var.name));
            } else if var.kind == VarKind::Binary
                && v.abs() > MILP_TOL
                && (v - 1.0).abs() > MILP_TOL
            {
                violated.push(format!("integrality {}", var.name));
            }
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(idx, coef)| coef * value(idx)).sum();
            let ok = match c.sense {
                Sense::Le => lhs <= c.rhs + MILP_TOL,
                Sense::Ge => lhs >= c.rhs - MILP_TOL,
                Sense::Eq => (lhs - c.rhs).abs() <= MILP_TOL,
            };
            if !ok {
                violated.push(c.name.clone());
            }
        }
        violated
    }
}

struct ModelBuilder {
    variables: Vec<Variable>,
    keys: Vec<VarKey>,
    constraints: Vec<Constraint>,
    objective: Vec<(usize, f64)>,
    name_index: BTreeMap<String, usize>,
}

impl ModelBuilder {
    fn new() -> Self {
        Self {
            variables: Vec::new(),
            keys: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            name_index: BTreeMap::new(),
        }
    }

    fn var(&mut self, key: VarKey, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        let idx = self.variables.len();
        let previous = self.name_index.insert(name.clone(), idx);
        assert!(previous.is_none(), "duplicate variable name {name}");
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        self.keys.push(key);
        idx
    }

    fn row(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint {
            name,
            terms,
            sense,
            rhs,
        });
    }

    fn finish(self, variant: ModelVariant, recharge: (f64, f64)) -> MilpModel {
        MilpModel {
            variant,
            variables: self.variables,
            keys: self.keys,
            constraints: self.constraints,
            objective: self.objective,
            recharge,
            name_index: self.name_index,
        }
    }
}

/// Directed arcs in deterministic `(from, to)` order: no self-loops, no
/// arcs into the depot, none out of the depot copy, and no direct
/// depot-to-copy arc.
pub fn arc_set(instance: &Instance) -> Vec<(usize, usize)> {
    let o = instance.depot();
    let oc = instance.depot_copy();
    let n = instance.nodes.len();
    let mut arcs = Vec::new();
    for from in 0..n {
        if from == oc {
            continue;
        }
        for to in 0..n {
            if to == o || to == from || (from == o && to == oc) {
                continue;
            }
            arcs.push((from, to));
        }
    }
    arcs
}

/// Base model: fixed recharge to `soc_full` at opened stations.
pub fn build_ev_model(instance: &Instance) -> MilpModel {
    build(instance, ModelVariant::Ev, (0.0, instance.soc_full))
}

/// Linearized model: departure range at an opened station is bounded by
/// the affine recharge map evaluated at the arrival range.
pub fn build_evl_model(instance: &Instance, charging: &ChargingModel) -> MilpModel {
    build(instance, ModelVariant::Evl, (charging.mu1, charging.mu2))
}

fn build(instance: &Instance, variant: ModelVariant, recharge: (f64, f64)) -> MilpModel {
    let mut b = ModelBuilder::new();
    let o = instance.depot();
    let oc = instance.depot_copy();
    let customers = instance.customer_nodes();
    let stations = instance.station_nodes();
    let arcs = arc_set(instance);
    let d_max = instance.d_max();
    let phi = instance.phi;
    let big_m = (instance.fleet.len() * (customers.len() + stations.len())).max(1) as f64;
    let (mu1, mu2) = recharge;

    // Variables, ordered by symbol then index.
    let mut x = BTreeMap::new();
    for &j in &stations {
        x.insert(j, b.var(
            VarKey::X { station: j },
            format!("x_{j}"),
            VarKind::Binary,
            0.0,
            1.0,
        ));
    }
    let mut y = BTreeMap::new();
    for &(from, to) in &arcs {
        for vehicle in &instance.fleet {
            let e = vehicle.id;
            y.insert((from, to, e), b.var(
                VarKey::Y { from, to, vehicle: e },
                format!("y_{from}_{to}_e{e}"),
                VarKind::Binary,
                0.0,
                1.0,
            ));
        }
    }
    let mut r = BTreeMap::new();
    for &(from, to) in &arcs {
        for vehicle in &instance.fleet {
            let e = vehicle.id;
            r.insert((from, to, e), b.var(
                VarKey::R { from, to, vehicle: e },
                format!("r_{from}_{to}_e{e}"),
                VarKind::Continuous,
                0.0,
                vehicle.capacity,
            ));
        }
    }
    let mut b1 = BTreeMap::new();
    let mut b2 = BTreeMap::new();
    for node in 0..instance.nodes.len() {
        for vehicle in &instance.fleet {
            let e = vehicle.id;
            b1.insert((node, e), b.var(
                VarKey::B1 { node, vehicle: e },
                format!("b1_{node}_e{e}"),
                VarKind::Continuous,
                0.0,
                d_max,
            ));
        }
    }
    for node in 0..instance.nodes.len() {
        for vehicle in &instance.fleet {
            let e = vehicle.id;
            b2.insert((node, e), b.var(
                VarKey::B2 { node, vehicle: e },
                format!("b2_{node}_e{e}"),
                VarKind::Continuous,
                0.0,
                d_max,
            ));
        }
    }
    let mut z = BTreeMap::new();
    if variant == ModelVariant::Evl {
        for &j in &stations {
            for vehicle in &instance.fleet {
                let e = vehicle.id;
                z.insert((j, e), b.var(
                    VarKey::Z { station: j, vehicle: e },
                    format!("z_{j}_e{e}"),
                    VarKind::Continuous,
                    0.0,
                    d_max,
                ));
            }
        }
    }

    // Objective: station fixed costs plus per-km shipping costs.
    for &j in &stations {
        b.objective.push((x[&j], instance.station_cost(j)));
    }
    for &(from, to) in &arcs {
        let d = instance.dist(from, to);
        for vehicle in &instance.fleet {
            let coef = vehicle.cost_rate * d;
            if coef != 0.0 {
                b.objective.push((y[&(from, to, vehicle.id)], coef));
            }
        }
    }

    let in_arcs = |node: usize| -> Vec<(usize, usize)> {
        arcs.iter().copied().filter(|&(_, to)| to == node).collect()
    };
    let out_arcs = |node: usize| -> Vec<(usize, usize)> {
        arcs.iter().copied().filter(|&(from, _)| from == node).collect()
    };

    // Each customer is entered exactly once, by exactly one vehicle.
    for &i in &customers {
        let mut terms = Vec::new();
        for &(from, to) in &in_arcs(i) {
            for vehicle in &instance.fleet {
                terms.push((y[&(from, to, vehicle.id)], 1.0));
            }
        }
        b.row(format!("visit_{i}"), terms, Sense::Eq, 1.0);
    }

    // Arcs may enter a station only when it is opened.
    for &j in &stations {
        let mut terms = Vec::new();
        for &(from, to) in &in_arcs(j) {
            for vehicle in &instance.fleet {
                terms.push((y[&(from, to, vehicle.id)], 1.0));
            }
        }
        terms.push((x[&j], -big_m));
        b.row(format!("station_link_{j}"), terms, Sense::Le, 0.0);
    }

    // Flow balance at customers and stations, per vehicle.
    for node in customers.iter().chain(stations.iter()).copied() {
        for vehicle in &instance.fleet {
            let e = vehicle.id;
            let mut terms: Vec<(usize, f64)> = out_arcs(node)
                .iter()
                .map(|&(from, to)| (y[&(from, to, e)], 1.0))
                .collect();
            terms.extend(in_arcs(node).iter().map(|&(from, to)| (y[&(from, to, e)], -1.0)));
            b.row(format!("flow_{node}_e{e}"), terms, Sense::Eq, 0.0);
        }
    }

    // A vehicle that leaves the depot must reach the depot copy, and may
    // depart at most once.
    for vehicle in &instance.fleet {
        let e = vehicle.id;
        let mut terms: Vec<(usize, f64)> = out_arcs(o)
            .iter()
            .map(|&(from, to)| (y[&(from, to, e)], 1.0))
            .collect();
        terms.extend(in_arcs(oc).iter().map(|&(from, to)| (y[&(from, to, e)], -1.0)));
        b.row(format!("depot_return_e{e}"), terms, Sense::Eq, 0.0);

        let depart: Vec<(usize, f64)> = out_arcs(o)
            .iter()
            .map(|&(from, to)| (y[&(from, to, e)], 1.0))
            .collect();
        b.row(format!("depot_depart_e{e}"), depart, Sense::Le, 1.0);
    }

    // Load is conserved through stations.
    for &j in &stations {
        for vehicle in &instance.fleet {
            let e = vehicle.id;
            let mut terms: Vec<(usize, f64)> = in_arcs(j)
                .iter()
                .map(|&(from, to)| (r[&(from, to, e)], 1.0))
                .collect();
            terms.extend(out_arcs(j).iter().map(|&(from, to)| (r[&(from, to, e)], -1.0)));
            b.row(format!("load_conserve_{j}_e{e}"), terms, Sense::Eq, 0.0);
        }
    }

    // Load drops by the demand when a vehicle serves a customer:
    // out - in + (w_i + k_e) * visited <= k_e.
    for &i in &customers {
        let w = instance.demand_of(i);
        for vehicle in &instance.fleet {
            let e = vehicle.id;
            let mut terms: Vec<(usize, f64)> = out_arcs(i)
                .iter()
                .map(|&(from, to)| (r[&(from, to, e)], 1.0))
                .collect();
            terms.extend(in_arcs(i).iter().map(|&(from, to)| (r[&(from, to, e)], -1.0)));
            terms.extend(
                in_arcs(i)
                    .iter()
                    .map(|&(from, to)| (y[&(from, to, e)], w + vehicle.capacity)),
            );
            b.row(format!("load_update_{i}_e{e}"), terms, Sense::Le, vehicle.capacity);
        }
    }

    // Load may flow on an arc only when the arc is used.
    for &(from, to) in &arcs {
        for vehicle in &instance.fleet {
            let e = vehicle.id;
            b.row(
                format!("load_cap_{from}_{to}_e{e}"),
                vec![(r[&(from, to, e)], 1.0), (y[&(from, to, e)], -vehicle.capacity)],
                Sense::Le,
                0.0,
            );
        }
    }

    // Range propagation along used arcs: equality via a big-M pair.
    for &(from, to) in &arcs {
        let d = instance.dist(from, to);
        for vehicle in &instance.fleet {
            let e = vehicle.id;
            b.row(
                format!("range_ub_{from}_{to}_e{e}"),
                vec![
                    (b1[&(to, e)], 1.0),
                    (b2[&(from, e)], -1.0),
                    (y[&(from, to, e)], d + d_max),
                ],
                Sense::Le,
                d_max,
            );
            b.row(
                format!("range_lb_{from}_{to}_e{e}"),
                vec![
                    (b1[&(to, e)], 1.0),
                    (b2[&(from, e)], -1.0),
                    (y[&(from, to, e)], d - d_max),
                ],
                Sense::Ge,
                -d_max,
            );
        }
    }

    // Departure range at the depot is the initial charge.
    for vehicle in &instance.fleet {
        let e = vehicle.id;
        b.row(
            format!("depot_range_e{e}"),
            vec![(b2[&(o, e)], 1.0)],
            Sense::Eq,
            phi * instance.soc0,
        );
    }

    match variant {
        ModelVariant::Ev => {
            // Departure range at a station is capped by the fixed
            // post-charge level, and forced to zero when unopened.
            for &j in &stations {
                for vehicle in &instance.fleet {
                    let e = vehicle.id;
                    b.row(
                        format!("recharge_{j}_e{e}"),
                        vec![(b2[&(j, e)], 1.0), (x[&j], -phi * instance.soc_full)],
                        Sense::Le,
                        0.0,
                    );
                }
            }
        }
        ModelVariant::Evl => {
            // b2 <= mu1 * z + mu2 * phi * x with z linearizing b1 * x.
            for &j in &stations {
                for vehicle in &instance.fleet {
                    let e = vehicle.id;
                    b.row(
                        format!("recharge_{j}_e{e}"),
                        vec![
                            (b2[&(j, e)], 1.0),
                            (z[&(j, e)], -mu1),
                            (x[&j], -mu2 * phi),
                        ],
                        Sense::Le,
                        0.0,
                    );
                    b.row(
                        format!("z_cap_{j}_e{e}"),
                        vec![(z[&(j, e)], 1.0), (x[&j], -d_max)],
                        Sense::Le,
                        0.0,
                    );
                    b.row(
                        format!("z_le_range_{j}_e{e}"),
                        vec![(z[&(j, e)], 1.0), (b1[&(j, e)], -1.0)],
                        Sense::Le,
                        0.0,
                    );
                    b.row(
                        format!("z_ge_range_{j}_e{e}"),
                        vec![
                            (z[&(j, e)], 1.0),
                            (b1[&(j, e)], -1.0),
                            (x[&j], -d_max),
                        ],
                        Sense::Ge,
                        -d_max,
                    );
                }
            }
        }
    }

    // Range is unchanged across a customer visit.
    for &i in &customers {
        for vehicle in &instance.fleet {
            let e = vehicle.id;
            b.row(
                format!("customer_range_{i}_e{e}"),
                vec![(b1[&(i, e)], 1.0), (b2[&(i, e)], -1.0)],
                Sense::Eq,
                0.0,
            );
        }
    }

    b.finish(variant, recharge)
}

fn push_term(out: &mut String, first: bool, coef: f64, name: &str) {
    if first {
        if coef < 0.0 {
            let _ = write!(out, "- {} {name}", -coef);
        } else {
            let _ = write!(out, "{coef} {name}");
        }
    } else if coef < 0.0 {
        let _ = write!(out, " - {} {name}", -coef);
    } else {
        let _ = write!(out, " + {coef} {name}");
    }
}

fn wrap_line(out: &mut String, line: &str) {
    // CPLEX-style wrapping: break long rows on term boundaries.
    const WIDTH: usize = 200;
    let mut remaining = line;
    let mut first = true;
    while remaining.len() > WIDTH {
        let cut = remaining[..WIDTH]
            .rfind(" + ")
            .or_else(|| remaining[..WIDTH].rfind(" - "))
            .unwrap_or(WIDTH);
        out.push_str(if first { " " } else { "   " });
        out.push_str(&remaining[..cut]);
        out.push('\n');
        remaining = &remaining[cut..];
        first = false;
    }
    out.push_str(if first { " " } else { "   " });
    out.push_str(remaining);
    out.push('\n');
}

/// Serializes the model to LP format with deterministic ordering: the same
/// model always produces byte-identical output.
pub fn lp_string(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ LP export\n");
    out.push_str("Minimize\n");
    let mut obj = String::from("obj: ");
    if model.objective.is_empty() {
        obj.push('0');
    }
    for (k, &(idx, coef)) in model.objective.iter().enumerate() {
        push_term(&mut obj, k == 0, coef, &model.variables[idx].name);
    }
    wrap_line(&mut out, &obj);

    out.push_str("Subject To\n");
    for c in &model.constraints {
        let mut row = format!("{}: ", c.name);
        if c.terms.is_empty() {
            row.push('0');
        }
        for (k, &(idx, coef)) in c.terms.iter().enumerate() {
            push_term(&mut row, k == 0, coef, &model.variables[idx].name);
        }
        let sense = match c.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = write!(row, " {sense} {}", c.rhs);
        wrap_line(&mut out, &row);
    }

    out.push_str("Bounds\n");
    for var in &model.variables {
        if var.kind == VarKind::Continuous {
            let _ = writeln!(out, " {} <= {} <= {}", var.lower, var.name, var.upper);
        }
    }

    out.push_str("Binaries\n");
    let mut line = String::new();
    for var in &model.variables {
        if var.kind == VarKind::Binary {
            if line.len() + var.name.len() + 1 > 200 {
                let _ = writeln!(out, " {line}");
                line.clear();
            }
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(&var.name);
        }
    }
    if !line.is_empty() {
        let _ = writeln!(out, " {line}");
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(model: &MilpModel, path: &Path) -> Result<()> {
    std::fs::write(path, lp_string(model))?;
    Ok(())
}

/// Reconstructs a [`Solution`] from a solved assignment: opened stations
/// from `x`, one route per vehicle by following its `y` arcs from the depot
/// to the depot copy, and traces from `r`, `b1`, `b2`.
pub fn decode_solution(
    instance: &Instance,
    model: &MilpModel,
    assignment: &BTreeMap<String, f64>,
) -> Result<Solution> {
    let value = |name: &str| assignment.get(name).copied().unwrap_or(0.0);
    let as_bool = |name: &str| -> Result<bool> {
        let v = value(name);
        if (v - 1.0).abs() <= MILP_TOL {
            Ok(true)
        } else if v.abs() <= MILP_TOL {
            Ok(false)
        } else {
            Err(Error::Decode(format!("{name} = {v} is not within 1e-6 of 0 or 1")))
        }
    };

    let mut opened = Vec::new();
    for &j in &instance.station_nodes() {
        if as_bool(&format!("x_{j}"))? {
            opened.push(j);
        }
    }

    let o = instance.depot();
    let oc = instance.depot_copy();
    let arcs = arc_set(instance);
    let mut routes = Vec::new();
    for vehicle in &instance.fleet {
        let e = vehicle.id;
        let mut successors: BTreeMap<usize, usize> = BTreeMap::new();
        let mut arc_count = 0usize;
        for &(from, to) in &arcs {
            if as_bool(&format!("y_{from}_{to}_e{e}"))? {
                if successors.insert(from, to).is_some() {
                    return Err(Error::Decode(format!(
                        "vehicle {e}: node {from} has two outgoing arcs"
                    )));
                }
                arc_count += 1;
            }
        }
        if arc_count == 0 {
            continue;
        }
        let mut stops = vec![o];
        let mut consumed = 0usize;
        let mut node = o;
        while node != oc {
            let Some(&next) = successors.get(&node) else {
                return Err(Error::Decode(format!(
                    "vehicle {e}: path from the depot dead-ends at node {node}"
                )));
            };
            stops.push(next);
            consumed += 1;
            node = next;
            if consumed > arc_count {
                return Err(Error::Decode(format!(
                    "vehicle {e}: path from the depot does not terminate"
                )));
            }
        }
        if consumed != arc_count {
            let leftover: Vec<usize> = successors
                .keys()
                .copied()
                .filter(|k| !stops.contains(k))
                .collect();
            return Err(Error::Decode(format!(
                "vehicle {e}: arcs form a cycle disconnected from the depot \
                 through nodes {leftover:?}"
            )));
        }

        let mut load_trace = Vec::with_capacity(stops.len());
        let mut battery_trace = Vec::with_capacity(stops.len());
        for (k, &stop) in stops.iter().enumerate() {
            let load = if k + 1 < stops.len() {
                value(&format!("r_{}_{}_e{e}", stop, stops[k + 1]))
            } else {
                0.0
            };
            load_trace.push(load);
            battery_trace.push((
                value(&format!("b1_{stop}_e{e}")),
                value(&format!("b2_{stop}_e{e}")),
            ));
        }
        routes.push(Route {
            vehicle: e,
            stops,
            load_trace,
            battery_trace,
        });
    }

    let mut solution = Solution {
        opened,
        routes,
        objective: ObjectiveBreakdown {
            station_cost: 0.0,
            routing_cost: 0.0,
            total: 0.0,
        },
    };
    solution.objective = crate::feasibility::objective(instance, &solution);
    let _ = model; // the model fixes the name scheme; kept for signature clarity
    Ok(solution)
}

/// Canonical assignment for a structured solution: arc and opening binaries
/// from the routes, load flows from the delivery schedule, and ranges from
/// a replay of the recharge map baked into the model. The inverse of
/// [`decode_solution`] for simple tours.
pub fn encode_solution(
    instance: &Instance,
    model: &MilpModel,
    solution: &Solution,
) -> BTreeMap<String, f64> {
    let mut assignment = BTreeMap::new();
    for var in &model.variables {
        assignment.insert(var.name.clone(), 0.0);
    }
    let (mu1, mu2) = model.recharge;
    let phi = instance.phi;
    let d_max = instance.d_max();
    let o = instance.depot();

    for &j in &solution.opened {
        assignment.insert(format!("x_{j}"), 1.0);
    }
    // Every vehicle leaves the depot fully charged, used or not.
    for vehicle in &instance.fleet {
        assignment.insert(format!("b2_{o}_e{}", vehicle.id), phi * instance.soc0);
        assignment.insert(format!("b1_{o}_e{}", vehicle.id), phi * instance.soc0);
    }

    for route in &solution.routes {
        let e = route.vehicle;
        let mut remaining: f64 = route
            .stops
            .iter()
            .map(|&s| instance.demand_of(s))
            .sum();
        let mut range = phi * instance.soc0;
        for window in route.stops.windows(2) {
            let (from, to) = (window[0], window[1]);
            assignment.insert(format!("y_{from}_{to}_e{e}"), 1.0);
            assignment.insert(format!("r_{from}_{to}_e{e}"), remaining);
            range -= instance.dist(from, to);
            assignment.insert(format!("b1_{to}_e{e}"), range);
            let departure = if instance.is_station(to) && solution.opened.contains(&to) {
                if model.variant == ModelVariant::Evl {
                    assignment.insert(format!("z_{to}_e{e}"), range);
                }
                (mu1 * range + mu2 * phi).min(d_max)
            } else {
                range
            };
            if to != *route.stops.last().unwrap() {
                assignment.insert(format!("b2_{to}_e{e}"), departure);
            } else {
                assignment.insert(format!("b2_{to}_e{e}"), departure.clamp(0.0, d_max));
            }
            range = departure;
            remaining -= instance.demand_of(to);
        }
    }
    // Products for opened stations a vehicle never visits stay at zero,
    // which satisfies the bounding rows since their b1 is zero too.
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::{check_solution, tests::build_instance};
    use crate::instance::{self, Meta, Node, NodeKind, Vehicle};
    use crate::soc;

    fn one_one_one() -> Instance {
        build_instance(
            &[(10.0, 0.0, 5.0)],
            &[(20.0, 5.0, 1000.0)],
            &[(100.0, 1.0)],
            2.0,
            90.0,
        )
    }

    #[test]
    fn ev_counts_match_hand_enumeration() {
        // |I| = |J| = |E| = 1: nodes {o, o', i, j}, arcs
        // {o->i, o->j, i->j, i->o', j->i, j->o'}.
        let model = build_ev_model(&one_one_one());
        assert_eq!(arc_set(&one_one_one()).len(), 6);
        // x:1, y:6, r:6, b1:4, b2:4 = 21 variables
        assert_eq!(model.variables.len(), 21);
        // visit:1 station_link:1 flow:2 depot_return:1 depot_depart:1
        // load_conserve:1 load_update:1 load_cap:6 range_ub:6 range_lb:6
        // depot_range:1 recharge:1 customer_range:1 = 29 rows
        assert_eq!(model.constraints.len(), 29);
    }

    #[test]
    fn evl_adds_z_family() {
        let inst = one_one_one();
        let charging = soc::default_calibration(10.0, 80.0);
        let model = build_evl_model(&inst, &charging);
        // one z variable, and rows 29 - recharge + (recharge', 18, 19, 20)
        assert_eq!(model.variables.len(), 22);
        assert_eq!(model.constraints.len(), 32);
        let z_count = model
            .keys
            .iter()
            .filter(|k| matches!(k, VarKey::Z { .. }))
            .count();
        assert_eq!(
            z_count,
            inst.stations.len() * inst.fleet.len(),
            "exactly |J| * |E| products"
        );
    }

    #[test]
    fn no_stations_means_no_x_rows() {
        let inst = build_instance(&[(10.0, 0.0, 5.0)], &[], &[(100.0, 1.0)], 2.0, 90.0);
        let model = build_ev_model(&inst);
        assert!(!model.variables.iter().any(|v| v.name.starts_with("x_")));
        assert!(!model
            .constraints
            .iter()
            .any(|c| c.name.starts_with("station_link") || c.name.starts_with("recharge")));
    }

    #[test]
    fn every_constraint_references_declared_variables() {
        let inst = instance::generate_instance(7, 5, 3, 60.0, 2).unwrap();
        let charging = soc::default_calibration(10.0, 80.0);
        for model in [build_ev_model(&inst), build_evl_model(&inst, &charging)] {
            for c in &model.constraints {
                for &(idx, _) in &c.terms {
                    assert!(idx < model.variables.len(), "{} out of range", c.name);
                }
            }
        }
    }

    #[test]
    fn export_is_byte_identical() {
        let inst = instance::generate_instance(7, 4, 2, 60.0, 2).unwrap();
        let charging = soc::default_calibration(10.0, 80.0);
        let a = lp_string(&build_evl_model(&inst, &charging));
        let b = lp_string(&build_evl_model(&inst, &charging));
        assert_eq!(a, b);
        assert!(a.starts_with("\\ LP export\nMinimize\n"));
        assert!(a.ends_with("End\n"));
    }

    #[test]
    fn empty_fleet_model_has_station_only_objective() {
        let nodes = vec![
            Node { id: 0, kind: NodeKind::Depot, x: 0.0, y: 0.0 },
            Node { id: 1, kind: NodeKind::DepotCopy, x: 0.0, y: 0.0 },
            Node { id: 2, kind: NodeKind::StationCandidate, x: 3.0, y: 0.0 },
        ];
        let inst = Instance::new(
            Meta { seed: 0, version: 1 },
            nodes,
            vec![],
            vec![crate::instance::StationCandidate { node: 2, fixed_cost: 700.0 }],
            vec![],
            2.0,
            90.0,
            90.0,
            None,
        )
        .unwrap();
        let model = build_ev_model(&inst);
        assert_eq!(model.objective.len(), 1);
        let lp = lp_string(&model);
        assert!(lp.contains("700 x_2"));
    }

    #[test]
    fn decode_zero_assignment_on_customerless_instance() {
        let nodes = vec![
            Node { id: 0, kind: NodeKind::Depot, x: 0.0, y: 0.0 },
            Node { id: 1, kind: NodeKind::DepotCopy, x: 0.0, y: 0.0 },
        ];
        let inst = Instance::new(
            Meta { seed: 0, version: 1 },
            nodes,
            vec![],
            vec![],
            vec![Vehicle { id: 0, capacity: 10.0, cost_rate: 1.0 }],
            2.0,
            90.0,
            90.0,
            None,
        )
        .unwrap();
        let model = build_ev_model(&inst);
        let assignment = BTreeMap::new();
        let sol = decode_solution(&inst, &model, &assignment).unwrap();
        assert!(sol.routes.is_empty());
        assert_eq!(sol.objective.total, 0.0);
    }

    #[test]
    fn decode_hand_built_single_route() {
        let inst = one_one_one();
        let model = build_ev_model(&inst);
        let mut assignment = BTreeMap::new();
        assignment.insert("y_0_2_e0".into(), 1.0);
        assignment.insert("y_2_1_e0".into(), 1.0);
        let sol = decode_solution(&inst, &model, &assignment).unwrap();
        assert_eq!(sol.routes.len(), 1);
        assert_eq!(sol.routes[0].stops, vec![0, 2, 1]);
        assert!(sol.opened.is_empty());
    }

    #[test]
    fn decode_rejects_disconnected_cycle() {
        // Two stations cycling between each other, disconnected from o.
        let inst = build_instance(
            &[(10.0, 0.0, 5.0)],
            &[(20.0, 5.0, 1000.0), (25.0, 5.0, 1000.0)],
            &[(100.0, 1.0)],
            2.0,
            90.0,
        );
        let model = build_ev_model(&inst);
        let mut assignment = BTreeMap::new();
        assignment.insert("y_0_2_e0".into(), 1.0);
        assignment.insert("y_2_1_e0".into(), 1.0);
        assignment.insert("y_3_4_e0".into(), 1.0);
        assignment.insert("y_4_3_e0".into(), 1.0);
        let err = decode_solution(&inst, &model, &assignment).unwrap_err();
        assert!(err.to_string().contains("cycle"), "got: {err}");
    }

    #[test]
    fn decode_rejects_fractional_binaries() {
        let inst = one_one_one();
        let model = build_ev_model(&inst);
        let mut assignment = BTreeMap::new();
        assignment.insert("y_0_2_e0".into(), 0.5);
        assert!(decode_solution(&inst, &model, &assignment).is_err());
    }

    #[test]
    fn encode_then_check_assignment_on_feasible_solution() {
        let inst = build_instance(
            &[(120.0, 0.0, 5.0)],
            &[(60.0, 0.0, 900.0)],
            &[(100.0, 1.0)],
            2.0,
            90.0,
        );
        let charging = soc::default_calibration(10.0, 80.0);
        let model = build_evl_model(&inst, &charging);
        let sol = Solution::from_stop_lists(
            &inst,
            &charging,
            vec![3],
            vec![(0, vec![0, 2, 3, 1])],
        );
        assert!(check_solution(&inst, &charging, &sol).is_clean());
        let assignment = encode_solution(&inst, &model, &sol);
        let violated = model.check_assignment(&assignment);
        assert!(violated.is_empty(), "violated: {violated:?}");
        // Objective agreement between the model and the decoded solution.
        let decoded = decode_solution(&inst, &model, &assignment).unwrap();
        assert!((model.evaluate_objective(&assignment) - decoded.objective.total).abs() < 1e-6);
    }

    #[test]
    fn encode_infeasible_solution_violates_model() {
        // Out-of-range pendulum: checker and model must both reject it.
        let inst = build_instance(&[(120.0, 0.0, 5.0)], &[], &[(100.0, 1.0)], 2.0, 90.0);
        let charging = soc::default_calibration(10.0, 80.0);
        let model = build_evl_model(&inst, &charging);
        let sol = Solution::from_stop_lists(&inst, &charging, vec![], vec![(0, vec![0, 2, 1])]);
        assert!(!check_solution(&inst, &charging, &sol).is_clean());
        let assignment = encode_solution(&inst, &model, &sol);
        assert!(!model.check_assignment(&assignment).is_empty());
    }
}
