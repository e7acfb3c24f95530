//! Sweep-based iterated greedy + adaptive large neighborhood search.
//!
//! One run follows the loop: build an initial plan with a modified sweep
//! (stations inserted on demand as battery repair); then on every
//! iteration copy the current plan, relocate stations by destruct/greedy
//! reconstruction (iterated greedy), improve the routing with one ALNS
//! destroy/repair step, and accept the candidate under a simulated-
//! annealing criterion with auto-calibrated initial temperature and
//! geometric cooling.
//!
//! Operator choice is a roulette wheel over adaptive weights, smoothed per
//! segment with reaction factor `rho`; new-best, improving, and merely
//! accepted candidates reward their operators with `sigma1 >= sigma2 >=
//! sigma3`.

use crate::error::{Error, Result};
use crate::feasibility::Solution;
use crate::instance::Instance;
use crate::repair::{customers_of, repair_route, route_length, used_stations};
use crate::soc::ChargingModel;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Plan-level cost standing in for an unrepairable route while customers
/// are being reinserted; any insertion that repairs the route beats it.
const BROKEN_ROUTE_COST: f64 = 1e9;

#[derive(Debug, Clone)]
pub struct SigalnsParams {
    /// Outer iterations (the loop runs while `iter < iter_max`).
    pub iter_max: usize,
    /// Fraction of customers removed per ALNS step (at least one).
    pub destroy_fraction: f64,
    /// Stations removed per iterated-greedy step; None removes all of them.
    pub ig_destruct_d: Option<usize>,
    /// Rewards for new-best / improving / accepted candidates.
    pub operator_scores: (f64, f64, f64),
    /// Weight smoothing factor in (0, 1).
    pub reaction_factor: f64,
    /// Iterations between weight updates.
    pub segment_length: usize,
    /// Probability of accepting an average early worsening candidate.
    pub sa_start_accept_prob: f64,
    /// Geometric cooling rate in (0, 1).
    pub sa_cooling: f64,
    pub seed: u64,
}

impl Default for SigalnsParams {
    fn default() -> Self {
        Self {
            iter_max: 200,
            destroy_fraction: 0.15,
            ig_destruct_d: None,
            operator_scores: (10.0, 5.0, 2.0),
            reaction_factor: 0.2,
            segment_length: 20,
            sa_start_accept_prob: 0.5,
            sa_cooling: 0.995,
            seed: 0,
        }
    }
}

impl SigalnsParams {
    fn validate(&self) -> Result<()> {
        let (s1, s2, s3) = self.operator_scores;
        if !(self.destroy_fraction > 0.0 && self.destroy_fraction < 1.0) {
            return Err(Error::InvalidArgument(
                "destroy_fraction must be in (0, 1)".into(),
            ));
        }
        if !(self.reaction_factor > 0.0 && self.reaction_factor < 1.0) {
            return Err(Error::InvalidArgument(
                "reaction_factor must be in (0, 1)".into(),
            ));
        }
        if !(self.sa_cooling > 0.0 && self.sa_cooling < 1.0) {
            return Err(Error::InvalidArgument("sa_cooling must be in (0, 1)".into()));
        }
        if !(self.sa_start_accept_prob > 0.0 && self.sa_start_accept_prob < 1.0) {
            return Err(Error::InvalidArgument(
                "sa_start_accept_prob must be in (0, 1)".into(),
            ));
        }
        if !(s1 >= s2 && s2 >= s3 && s3 >= 0.0) {
            return Err(Error::InvalidArgument(
                "operator scores must satisfy sigma1 >= sigma2 >= sigma3 >= 0".into(),
            ));
        }
        if self.segment_length == 0 {
            return Err(Error::InvalidArgument("segment_length must be positive".into()));
        }
        Ok(())
    }
}

pub const REMOVAL_OPERATORS: [&str; 3] = ["random_removal", "worst_removal", "related_removal"];
pub const INSERTION_OPERATORS: [&str; 2] = ["greedy_insertion", "regret2_insertion"];

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorWeights {
    pub removal: [f64; 3],
    pub insertion: [f64; 2],
}

impl Default for OperatorWeights {
    fn default() -> Self {
        Self {
            removal: [1.0; 3],
            insertion: [1.0; 2],
        }
    }
}

/// Per-segment operator statistics: accumulated scores and use counts.
#[derive(Debug, Clone, Default)]
pub struct SegmentStats {
    pub removal_score: [f64; 3],
    pub removal_uses: [u32; 3],
    pub insertion_score: [f64; 2],
    pub insertion_uses: [u32; 2],
}

/// Segment weight update: `w <- (1 - rho) * w + rho * score/uses` for every
/// operator used this segment; unused operators keep their weight.
pub fn update_weights(
    weights: &OperatorWeights,
    outcomes: &SegmentStats,
    params: &SigalnsParams,
) -> OperatorWeights {
    let rho = params.reaction_factor;
    let mut next = weights.clone();
    for k in 0..3 {
        if outcomes.removal_uses[k] > 0 {
            let avg = outcomes.removal_score[k] / outcomes.removal_uses[k] as f64;
            next.removal[k] = (1.0 - rho) * next.removal[k] + rho * avg;
        }
    }
    for k in 0..2 {
        if outcomes.insertion_uses[k] > 0 {
            let avg = outcomes.insertion_score[k] / outcomes.insertion_uses[k] as f64;
            next.insertion[k] = (1.0 - rho) * next.insertion[k] + rho * avg;
        }
    }
    next
}

/// Roulette-wheel draw: selection probability equals normalized weight.
pub fn roulette(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if x < w {
            return k;
        }
        x -= w;
    }
    weights.len() - 1
}

/// Route skeleton during search: vehicle plus customer visit order; station
/// stops are re-derived by battery repair whenever a plan is evaluated.
#[derive(Debug, Clone)]
struct Plan {
    routes: Vec<(usize, Vec<usize>)>,
}

impl Plan {
    fn of(instance: &Instance, solution: &Solution) -> Self {
        Self {
            routes: solution
                .routes
                .iter()
                .map(|r| (r.vehicle, customers_of(instance, &r.stops)))
                .collect(),
        }
    }

    fn customer_count(&self) -> usize {
        self.routes.iter().map(|(_, seq)| seq.len()).sum()
    }
}

fn bare_stops(instance: &Instance, seq: &[usize]) -> Vec<usize> {
    let mut stops = Vec::with_capacity(seq.len() + 2);
    stops.push(instance.depot());
    stops.extend_from_slice(seq);
    stops.push(instance.depot_copy());
    stops
}

/// Repairs every route against the opened pool and assembles a solution
/// whose opened set is exactly the stations the routes use.
fn assemble(
    instance: &Instance,
    charging: &ChargingModel,
    opened_pool: &[usize],
    plan: &Plan,
) -> Option<Solution> {
    let mut stop_lists = Vec::with_capacity(plan.routes.len());
    for (vehicle, seq) in &plan.routes {
        if seq.is_empty() {
            continue;
        }
        let stops = repair_route(instance, charging, opened_pool, &bare_stops(instance, seq))?;
        stop_lists.push((*vehicle, stops));
    }
    stop_lists.sort_by_key(|(vehicle, _)| *vehicle);
    let opened = used_stations(instance, &stop_lists);
    Some(Solution::from_stop_lists(
        instance,
        charging,
        opened,
        stop_lists,
    ))
}

/// Modified sweep construction: customers sorted by polar angle around the
/// depot fill a route until capacity or battery repair fails, then the next
/// vehicle starts. Stations inserted during repair are thereby opened.
pub fn modified_sweep(instance: &Instance, charging: &ChargingModel) -> Result<Solution> {
    let depot = instance.depot();
    let (ox, oy) = (instance.nodes[depot].x, instance.nodes[depot].y);
    let mut order: Vec<usize> = instance.customer_nodes();
    order.sort_by(|&a, &b| {
        let na = &instance.nodes[a];
        let nb = &instance.nodes[b];
        let aa = (na.y - oy).atan2(na.x - ox);
        let ab = (nb.y - oy).atan2(nb.x - ox);
        aa.total_cmp(&ab).then(a.cmp(&b))
    });

    let pool = instance.station_nodes();
    let mut vehicles = instance.fleet.iter();
    let mut current_vehicle = match vehicles.next() {
        Some(v) => v,
        None => {
            return Err(Error::Infeasible {
                unserved: instance.customer_nodes(),
            })
        }
    };
    let mut plan = Plan { routes: Vec::new() };
    let mut seq: Vec<usize> = Vec::new();
    let mut load = 0.0;

    for &c in &order {
        let demand = instance.demand_of(c);
        let mut extended = seq.clone();
        extended.push(c);
        let fits = load + demand <= current_vehicle.capacity + 1e-9
            && repair_route(instance, charging, &pool, &bare_stops(instance, &extended)).is_some();
        if fits {
            seq = extended;
            load += demand;
            continue;
        }
        if !seq.is_empty() {
            plan.routes.push((current_vehicle.id, std::mem::take(&mut seq)));
            current_vehicle = match vehicles.next() {
                Some(v) => v,
                None => {
                    let mut unserved = vec![c];
                    unserved.extend(order.iter().copied().skip_while(|&x| x != c).skip(1));
                    return Err(Error::Infeasible { unserved });
                }
            };
        }
        let pendulum_ok = demand <= current_vehicle.capacity + 1e-9
            && repair_route(instance, charging, &pool, &bare_stops(instance, &[c])).is_some();
        if pendulum_ok {
            seq.push(c);
            load = demand;
        } else {
            return Err(Error::Infeasible { unserved: vec![c] });
        }
    }
    if !seq.is_empty() {
        plan.routes.push((current_vehicle.id, seq));
    }

    assemble(instance, charging, &pool, &plan).ok_or(Error::Infeasible {
        unserved: instance.customer_nodes(),
    })
}

/// Iterated-greedy station relocation: destroy (by default all) opened
/// stations, then re-add the station minimizing `fixed cost + estimated
/// repair detour` until every route is battery-repairable.
pub fn ig_relocate_stations(
    instance: &Instance,
    charging: &ChargingModel,
    current: &Solution,
    destruct_d: Option<usize>,
) -> Result<Vec<usize>> {
    let plan = Plan::of(instance, current);
    ig_relocate(instance, charging, &plan, &current.opened, destruct_d)
}

fn ig_relocate(
    instance: &Instance,
    charging: &ChargingModel,
    plan: &Plan,
    current_opened: &[usize],
    destruct_d: Option<usize>,
) -> Result<Vec<usize>> {
    let mut opened: Vec<usize> = match destruct_d {
        None => Vec::new(),
        Some(d) => {
            // Partial variant: drop the d most expensive opened stations.
            let mut kept: Vec<usize> = current_opened.to_vec();
            kept.sort_by(|&a, &b| {
                instance
                    .station_cost(b)
                    .partial_cmp(&instance.station_cost(a))
                    .expect("finite costs")
                    .then(a.cmp(&b))
            });
            kept.drain(..d.min(kept.len()));
            kept.sort_unstable();
            kept
        }
    };
    let all = instance.station_nodes();
    let bares: Vec<(f64, Vec<usize>)> = plan
        .routes
        .iter()
        .filter(|(_, seq)| !seq.is_empty())
        .map(|(vehicle, seq)| {
            let rate = instance
                .fleet
                .iter()
                .find(|v| v.id == *vehicle)
                .map(|v| v.cost_rate)
                .unwrap_or(0.0);
            (rate, bare_stops(instance, seq))
        })
        .collect();

    loop {
        let broken: Vec<usize> = bares
            .iter()
            .enumerate()
            .filter(|(_, (_, bare))| repair_route(instance, charging, &opened, bare).is_none())
            .map(|(k, _)| k)
            .collect();
        if broken.is_empty() {
            opened.sort_unstable();
            return Ok(opened);
        }
        let mut best: Option<(f64, usize)> = None;
        for &j in &all {
            if opened.contains(&j) {
                continue;
            }
            let mut trial = opened.clone();
            trial.push(j);
            let mut score = instance.station_cost(j);
            for &k in &broken {
                let (rate, bare) = &bares[k];
                match repair_route(instance, charging, &trial, bare) {
                    Some(stops) => {
                        score += rate * (route_length(instance, &stops) - route_length(instance, bare));
                    }
                    None => score += BROKEN_ROUTE_COST,
                }
            }
            let better = match best {
                None => true,
                Some((bs, bj)) => score < bs - 1e-9 || ((score - bs).abs() <= 1e-9 && j < bj),
            };
            if better {
                best = Some((score, j));
            }
        }
        match best {
            Some((_, j)) => opened.push(j),
            None => {
                // Every station is opened and some route is still broken.
                return Err(Error::Infeasible {
                    unserved: broken
                        .iter()
                        .flat_map(|&k| customers_of(instance, &bares[k].1))
                        .collect(),
                });
            }
        }
    }
}

fn vehicle_capacity(instance: &Instance, vehicle: usize) -> f64 {
    instance
        .fleet
        .iter()
        .find(|v| v.id == vehicle)
        .map(|v| v.capacity)
        .unwrap_or(0.0)
}

fn vehicle_rate(instance: &Instance, vehicle: usize) -> f64 {
    instance
        .fleet
        .iter()
        .find(|v| v.id == vehicle)
        .map(|v| v.cost_rate)
        .unwrap_or(0.0)
}

/// Detour saved by removing `seq[pos]` from a route (computed on the bare
/// customer sequence anchored at the depots).
fn removal_gain(instance: &Instance, seq: &[usize], pos: usize) -> f64 {
    let prev = if pos == 0 {
        instance.depot()
    } else {
        seq[pos - 1]
    };
    let next = if pos + 1 == seq.len() {
        instance.depot_copy()
    } else {
        seq[pos + 1]
    };
    let c = seq[pos];
    instance.dist(prev, c) + instance.dist(c, next) - instance.dist(prev, next)
}

fn apply_removal(
    instance: &Instance,
    plan: &mut Plan,
    op: usize,
    q: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut removed = Vec::with_capacity(q);
    match op {
        // random removal
        0 => {
            for _ in 0..q {
                let total = plan.customer_count();
                if total == 0 {
                    break;
                }
                let mut pick = rng.gen_range(0..total);
                'outer: for (_, seq) in plan.routes.iter_mut() {
                    if pick < seq.len() {
                        removed.push(seq.remove(pick));
                        break 'outer;
                    }
                    pick -= seq.len();
                }
            }
        }
        // worst removal: biggest detour first, recomputed after each removal
        1 => {
            for _ in 0..q {
                let mut worst: Option<(f64, usize, usize)> = None;
                for (ridx, (_, seq)) in plan.routes.iter().enumerate() {
                    for pos in 0..seq.len() {
                        let gain = removal_gain(instance, seq, pos);
                        let better = match worst {
                            None => true,
                            Some((wg, _, _)) => {
                                gain > wg + 1e-12
                                    || ((gain - wg).abs() <= 1e-12
                                        && seq[pos]
                                            < plan.routes[worst.unwrap().1].1[worst.unwrap().2])
                            }
                        };
                        if better {
                            worst = Some((gain, ridx, pos));
                        }
                    }
                }
                match worst {
                    Some((_, ridx, pos)) => removed.push(plan.routes[ridx].1.remove(pos)),
                    None => break,
                }
            }
        }
        // related removal: Shaw relatedness on location + demand
        _ => {
            let mut pool: Vec<usize> = plan
                .routes
                .iter()
                .flat_map(|(_, seq)| seq.iter().copied())
                .collect();
            pool.sort_unstable();
            if pool.is_empty() {
                return removed;
            }
            let seed_customer = pool[rng.gen_range(0..pool.len())];
            let d_norm = pool
                .iter()
                .flat_map(|&a| pool.iter().map(move |&b| instance.dist(a, b)))
                .fold(0.0_f64, f64::max)
                .max(1e-9);
            let w_norm = pool
                .iter()
                .map(|&c| instance.demand_of(c))
                .fold(0.0_f64, f64::max)
                .max(1e-9);
            let mut scored: Vec<(f64, usize)> = pool
                .iter()
                .filter(|&&c| c != seed_customer)
                .map(|&c| {
                    let related = instance.dist(seed_customer, c) / d_norm
                        + (instance.demand_of(seed_customer) - instance.demand_of(c)).abs()
                            / w_norm;
                    (related, c)
                })
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut targets = vec![seed_customer];
            targets.extend(scored.iter().take(q.saturating_sub(1)).map(|&(_, c)| c));
            for (_, seq) in plan.routes.iter_mut() {
                seq.retain(|c| {
                    let hit = targets.contains(c);
                    if hit {
                        removed.push(*c);
                    }
                    !hit
                });
            }
        }
    }
    plan.routes.retain(|(_, seq)| !seq.is_empty());
    removed
}

fn stations_in(instance: &Instance, stops: &[usize]) -> Vec<usize> {
    let mut used: Vec<usize> = stops
        .iter()
        .copied()
        .filter(|&s| instance.is_station(s))
        .collect();
    used.sort_unstable();
    used.dedup();
    used
}

/// Repaired state of one route during reinsertion.
#[derive(Debug, Clone)]
struct RouteState {
    vehicle: usize,
    seq: Vec<usize>,
    demand: f64,
    /// None when the bare route is unrepairable with the opened pool.
    repaired: Option<Vec<usize>>,
}

impl RouteState {
    fn new(
        instance: &Instance,
        charging: &ChargingModel,
        pool: &[usize],
        vehicle: usize,
        seq: Vec<usize>,
    ) -> Self {
        let demand = seq.iter().map(|&c| instance.demand_of(c)).sum();
        let repaired = repair_route(instance, charging, pool, &bare_stops(instance, &seq));
        Self {
            vehicle,
            seq,
            demand,
            repaired,
        }
    }

    fn length_cost(&self, instance: &Instance) -> f64 {
        match &self.repaired {
            Some(stops) => vehicle_rate(instance, self.vehicle) * route_length(instance, stops),
            None => BROKEN_ROUTE_COST,
        }
    }

    fn used(&self, instance: &Instance) -> Vec<usize> {
        self.repaired
            .as_ref()
            .map(|stops| stations_in(instance, stops))
            .unwrap_or_default()
    }
}

/// Plan-cost change of inserting `customer` at `gap` of `base`: length
/// delta plus fixed costs of stations this route starts or stops using
/// exclusively. Returns `(delta, new state)` or None when infeasible.
fn insertion_delta(
    instance: &Instance,
    charging: &ChargingModel,
    pool: &[usize],
    base: &RouteState,
    customer: usize,
    gap: usize,
    used_elsewhere: &[usize],
) -> Option<(f64, RouteState)> {
    if base.demand + instance.demand_of(customer)
        > vehicle_capacity(instance, base.vehicle) + 1e-9
    {
        return None;
    }
    let mut seq = base.seq.clone();
    seq.insert(gap, customer);
    let trial = RouteState::new(instance, charging, pool, base.vehicle, seq);
    trial.repaired.as_ref()?;
    let mut delta = trial.length_cost(instance) - base.length_cost(instance);
    let base_used = base.used(instance);
    for s in trial.used(instance) {
        if !base_used.contains(&s) && !used_elsewhere.contains(&s) {
            delta += instance.station_cost(s);
        }
    }
    let trial_used = trial.used(instance);
    for s in base_used {
        if !trial_used.contains(&s) && !used_elsewhere.contains(&s) {
            delta -= instance.station_cost(s);
        }
    }
    Some((delta, trial))
}

/// Best gap for one customer in one route.
fn best_offer_in_route(
    instance: &Instance,
    charging: &ChargingModel,
    pool: &[usize],
    base: &RouteState,
    customer: usize,
    used_elsewhere: &[usize],
) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for gap in 0..=base.seq.len() {
        if let Some((delta, _)) =
            insertion_delta(instance, charging, pool, base, customer, gap, used_elsewhere)
        {
            let better = match best {
                None => true,
                Some((bd, _)) => delta < bd - 1e-12,
            };
            if better {
                best = Some((delta, gap));
            }
        }
    }
    best
}

/// One destroy/repair step. Returns the candidate (the unchanged input when
/// reinsertion fails), the chosen removal and insertion operator indices,
/// and whether the candidate is feasible.
pub fn alns_step(
    instance: &Instance,
    charging: &ChargingModel,
    current: &Solution,
    opened_pool: &[usize],
    params: &SigalnsParams,
    weights: &OperatorWeights,
    rng: &mut ChaCha8Rng,
) -> (Solution, usize, usize, bool) {
    let removal_op = roulette(rng, &weights.removal);
    let insertion_op = roulette(rng, &weights.insertion);
    let mut plan = Plan::of(instance, current);
    let total_customers = plan.customer_count();
    if total_customers == 0 {
        return (current.clone(), removal_op, insertion_op, true);
    }
    let q = ((params.destroy_fraction * total_customers as f64).ceil() as usize)
        .clamp(1, total_customers);
    let mut pending = apply_removal(instance, &mut plan, removal_op, q, rng);
    pending.sort_unstable();

    let mut states: Vec<RouteState> = plan
        .routes
        .iter()
        .map(|(v, seq)| RouteState::new(instance, charging, opened_pool, *v, seq.clone()))
        .collect();

    // Offer cache: per pending customer, the best (delta, gap) per route.
    // A None entry means "not computed yet"; Some(None) means infeasible.
    let mut offers: Vec<Vec<Option<Option<(f64, usize)>>>> =
        vec![vec![None; states.len()]; pending.len()];

    while !pending.is_empty() {
        let used_vehicles: Vec<usize> = states.iter().map(|s| s.vehicle).collect();
        let spare_vehicle = instance
            .fleet
            .iter()
            .find(|v| !used_vehicles.contains(&v.id));
        let all_used: Vec<Vec<usize>> = states.iter().map(|s| s.used(instance)).collect();

        #[derive(Clone)]
        struct Offer {
            customer_pos: usize,
            delta: f64,
            second: f64,
            target: Option<(usize, usize)>, // (route, gap); None = new route
        }
        let mut chosen_offers: Vec<Offer> = Vec::new();
        for (cpos, &c) in pending.iter().enumerate() {
            let mut options: Vec<(f64, Option<(usize, usize)>)> = Vec::new();
            for (ridx, state) in states.iter().enumerate() {
                if offers[cpos][ridx].is_none() {
                    let mut used_elsewhere: Vec<usize> = Vec::new();
                    for (other, used) in all_used.iter().enumerate() {
                        if other != ridx {
                            used_elsewhere.extend(used.iter().copied());
                        }
                    }
                    offers[cpos][ridx] = Some(best_offer_in_route(
                        instance,
                        charging,
                        opened_pool,
                        state,
                        c,
                        &used_elsewhere,
                    ));
                }
                if let Some(Some((delta, gap))) = offers[cpos][ridx] {
                    options.push((delta, Some((ridx, gap))));
                }
            }
            if let Some(v) = spare_vehicle {
                if instance.demand_of(c) <= v.capacity + 1e-9 {
                    let pendulum =
                        RouteState::new(instance, charging, opened_pool, v.id, vec![c]);
                    if pendulum.repaired.is_some() {
                        let mut delta = pendulum.length_cost(instance);
                        let used_elsewhere: Vec<usize> =
                            all_used.iter().flatten().copied().collect();
                        for s in pendulum.used(instance) {
                            if !used_elsewhere.contains(&s) {
                                delta += instance.station_cost(s);
                            }
                        }
                        options.push((delta, None));
                    }
                }
            }
            options.sort_by(|a, b| a.0.total_cmp(&b.0));
            let Some(&(delta, target)) = options.first() else {
                // No feasible position anywhere: reject the whole candidate.
                return (current.clone(), removal_op, insertion_op, false);
            };
            let second = options.get(1).map(|o| o.0).unwrap_or(f64::INFINITY);
            chosen_offers.push(Offer {
                customer_pos: cpos,
                delta,
                second,
                target,
            });
        }

        let chosen = match insertion_op {
            // greedy: cheapest insertion over all pending customers
            0 => chosen_offers
                .iter()
                .min_by(|a, b| {
                    a.delta
                        .total_cmp(&b.delta)
                        .then(pending[a.customer_pos].cmp(&pending[b.customer_pos]))
                })
                .cloned(),
            // regret-2: largest gap between best and second-best position
            _ => chosen_offers
                .iter()
                .max_by(|a, b| {
                    let ra = regret_of(a.delta, a.second);
                    let rb = regret_of(b.delta, b.second);
                    ra.total_cmp(&rb)
                        .then(pending[b.customer_pos].cmp(&pending[a.customer_pos]))
                })
                .cloned(),
        };
        let Some(offer) = chosen else {
            return (current.clone(), removal_op, insertion_op, false);
        };
        let customer = pending[offer.customer_pos];
        let (changed_route, stations_changed) = match offer.target {
            Some((ridx, gap)) => {
                let before_used = states[ridx].used(instance);
                let mut seq = states[ridx].seq.clone();
                seq.insert(gap, customer);
                states[ridx] = RouteState::new(
                    instance,
                    charging,
                    opened_pool,
                    states[ridx].vehicle,
                    seq,
                );
                (ridx, states[ridx].used(instance) != before_used)
            }
            None => {
                let vehicle = spare_vehicle.expect("offer with new-route target");
                states.push(RouteState::new(
                    instance,
                    charging,
                    opened_pool,
                    vehicle.id,
                    vec![customer],
                ));
                (states.len() - 1, true)
            }
        };
        pending.remove(offer.customer_pos);
        offers.remove(offer.customer_pos);
        if stations_changed {
            // Station usage shifted (or a route appeared), which moves the
            // fixed-cost deltas of every cached offer: recompute all.
            offers = vec![vec![None; states.len()]; pending.len()];
        } else {
            for row in offers.iter_mut() {
                row[changed_route] = None;
            }
        }
    }

    plan.routes = states
        .iter()
        .map(|s| (s.vehicle, s.seq.clone()))
        .collect();
    match assemble(instance, charging, opened_pool, &plan) {
        Some(candidate) => (candidate, removal_op, insertion_op, true),
        None => (current.clone(), removal_op, insertion_op, false),
    }
}

fn regret_of(best: f64, second: f64) -> f64 {
    if second.is_finite() {
        second - best
    } else {
        // A customer with a single feasible position is maximally urgent.
        f64::MAX
    }
}

/// Full run: sweep construction, then `iter_max - 1` iterations of station
/// relocation + ALNS routing under simulated-annealing acceptance. Returns
/// the best solution found.
pub fn sigalns(
    instance: &Instance,
    charging: &ChargingModel,
    params: &SigalnsParams,
) -> Result<Solution> {
    params.validate()?;
    let s0 = modified_sweep(instance, charging)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut weights = OperatorWeights::default();
    let mut stats = SegmentStats::default();
    let mut current = s0.clone();
    let mut best = s0;
    let mut temperature: Option<f64> = None;
    let mut rejected_worsenings: Vec<f64> = Vec::new();
    let (sigma1, sigma2, sigma3) = params.operator_scores;

    let mut iter = 1;
    while iter < params.iter_max {
        if let Ok(opened) =
            ig_relocate_stations(instance, charging, &current, params.ig_destruct_d)
        {
            let (candidate, removal_op, insertion_op, feasible) =
                alns_step(instance, charging, &current, &opened, params, &weights, &mut rng);
            let mut score = 0.0;
            if feasible {
                let delta = candidate.objective.total - current.objective.total;
                let accept = if delta <= 1e-9 {
                    true
                } else {
                    let p = match temperature {
                        Some(t) => (-delta / t).exp(),
                        None => params.sa_start_accept_prob,
                    };
                    let accepted = rng.gen::<f64>() < p;
                    if !accepted && temperature.is_none() {
                        rejected_worsenings.push(delta);
                    }
                    accepted
                };
                if accept {
                    score = if candidate.objective.total < best.objective.total - 1e-9 {
                        sigma1
                    } else if delta < -1e-9 {
                        sigma2
                    } else {
                        sigma3
                    };
                    current = candidate;
                    if current.objective.total < best.objective.total - 1e-9 {
                        best = current.clone();
                    }
                }
            }
            stats.removal_score[removal_op] += score;
            stats.removal_uses[removal_op] += 1;
            stats.insertion_score[insertion_op] += score;
            stats.insertion_uses[insertion_op] += 1;
        }

        if iter % params.segment_length == 0 {
            weights = update_weights(&weights, &stats, params);
            stats = SegmentStats::default();
            if temperature.is_none() {
                temperature = Some(calibrate_temperature(
                    &rejected_worsenings,
                    params.sa_start_accept_prob,
                    best.objective.total,
                ));
            }
        }
        if let Some(t) = temperature {
            temperature = Some(t * params.sa_cooling);
        }
        iter += 1;
    }
    Ok(best)
}

/// Initial temperature such that the mean early worsening would be accepted
/// with probability `p0`; falls back to a small fraction of the incumbent
/// objective when the first segment rejected nothing.
fn calibrate_temperature(rejected: &[f64], p0: f64, scale: f64) -> f64 {
    let mean = if rejected.is_empty() {
        (0.01 * scale.abs()).max(1e-6)
    } else {
        rejected.iter().sum::<f64>() / rejected.len() as f64
    };
    mean / -p0.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::{check_solution, exact_solve_tiny, ModelVariant};
    use crate::feasibility::tests::build_instance;
    use crate::instance;
    use crate::soc;

    fn charging() -> ChargingModel {
        soc::default_calibration(10.0, 80.0)
    }

    #[test]
    fn sweep_groups_ring_customers_contiguously() {
        // Four customers on a ring, capacity for two each: the sweep must
        // produce angularly contiguous pairs.
        let inst = build_instance(
            &[(20.0, 0.0, 10.0), (0.0, 20.0, 10.0), (-20.0, 0.0, 10.0), (0.0, -20.0, 10.0)],
            &[],
            &[(20.0, 1.0), (20.0, 1.0)],
            2.0,
            90.0,
        );
        let sol = modified_sweep(&inst, &charging()).unwrap();
        assert_eq!(sol.routes.len(), 2);
        for route in &sol.routes {
            assert_eq!(route.stops.len(), 4); // depot, two customers, copy
        }
        assert!(check_solution(&inst, &charging(), &sol).is_clean());
    }

    #[test]
    fn sweep_with_unit_capacity_builds_pendulums() {
        let inst = build_instance(
            &[(10.0, 0.0, 1.0), (0.0, 10.0, 1.0), (-10.0, 0.0, 1.0)],
            &[],
            &[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)],
            2.0,
            90.0,
        );
        let sol = modified_sweep(&inst, &charging()).unwrap();
        assert_eq!(sol.routes.len(), 3);
        for route in &sol.routes {
            assert_eq!(route.stops.len(), 3);
        }
    }

    #[test]
    fn sweep_reports_unservable_customer() {
        let inst = build_instance(
            &[(150.0, 0.0, 1.0)],
            &[],
            &[(10.0, 1.0)],
            2.0,
            90.0,
        );
        let err = modified_sweep(&inst, &charging()).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }

    #[test]
    fn ig_returns_empty_set_when_routes_need_no_stations() {
        let inst = build_instance(
            &[(10.0, 0.0, 1.0), (0.0, 10.0, 1.0)],
            &[(30.0, 30.0, 900.0)],
            &[(100.0, 1.0)],
            2.0,
            90.0,
        );
        let sol = modified_sweep(&inst, &charging()).unwrap();
        let opened = ig_relocate_stations(&inst, &charging(), &sol, None).unwrap();
        assert!(opened.is_empty());
    }

    #[test]
    fn ig_picks_the_only_repairing_station() {
        let inst = build_instance(
            &[(120.0, 0.0, 1.0)],
            &[(60.0, 0.0, 900.0), (0.0, 60.0, 100.0)],
            &[(100.0, 1.0)],
            2.0,
            90.0,
        );
        let sol = modified_sweep(&inst, &charging()).unwrap();
        let opened = ig_relocate_stations(&inst, &charging(), &sol, None).unwrap();
        assert_eq!(opened, vec![3], "only the on-path station repairs the route");
    }

    #[test]
    fn alns_step_preserves_single_customer_structure() {
        let inst = build_instance(&[(10.0, 0.0, 1.0)], &[], &[(100.0, 1.0)], 2.0, 90.0);
        let sol = modified_sweep(&inst, &charging()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let weights = OperatorWeights::default();
        let (cand, _, _, ok) = alns_step(
            &inst,
            &charging(),
            &sol,
            &[],
            &SigalnsParams::default(),
            &weights,
            &mut rng,
        );
        assert!(ok);
        assert_eq!(cand.routes.len(), 1);
        assert_eq!(cand.routes[0].stops, vec![0, 2, 1]);
    }

    #[test]
    fn worst_removal_takes_planted_outlier_first() {
        // Three clustered customers plus one far outlier.
        let inst = build_instance(
            &[(10.0, 0.0, 1.0), (11.0, 1.0, 1.0), (10.0, 2.0, 1.0), (40.0, 40.0, 1.0)],
            &[],
            &[(100.0, 1.0)],
            2.0,
            90.0,
        );
        let sol = modified_sweep(&inst, &charging()).unwrap();
        let mut plan = Plan::of(&inst, &sol);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let removed = apply_removal(&inst, &mut plan, 1, 1, &mut rng);
        // Verify against explicitly computed detour costs.
        assert_eq!(removed, vec![5], "outlier (node 5) has the largest detour");
    }

    #[test]
    fn alns_candidates_are_checker_clean() {
        let inst = instance::generate_instance(21, 10, 4, 60.0, 3).unwrap();
        let sol = modified_sweep(&inst, &charging()).unwrap();
        let opened = ig_relocate_stations(&inst, &charging(), &sol, None).unwrap();
        let repaired = {
            let plan = Plan::of(&inst, &sol);
            assemble(&inst, &charging(), &opened, &plan).unwrap()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let weights = OperatorWeights::default();
        let mut current = repaired;
        for step in 0..1000 {
            let (cand, _, _, ok) = alns_step(
                &inst,
                &charging(),
                &current,
                &opened,
                &SigalnsParams::default(),
                &weights,
                &mut rng,
            );
            if ok {
                let report = check_solution(&inst, &charging(), &cand);
                assert!(report.is_clean(), "step {step}: {report}");
                current = cand;
            }
        }
    }

    #[test]
    fn update_weights_identity_and_ordering() {
        let weights = OperatorWeights::default();
        let mut stats = SegmentStats::default();
        stats.removal_score[0] = 30.0; // three new-best hits
        stats.removal_uses[0] = 3;
        stats.removal_score[1] = 6.0; // three merely-accepted hits
        stats.removal_uses[1] = 3;

        let mut params = SigalnsParams::default();
        let updated = update_weights(&weights, &stats, &params);
        assert!(updated.removal[0] > updated.removal[1]);
        assert_eq!(updated.removal[2], 1.0, "unused operator keeps its weight");
        assert_eq!(updated.insertion, [1.0, 1.0]);

        // rho -> 0 is the identity in the limit; validate() forbids 0, so
        // check a tiny rho stays close.
        params.reaction_factor = 1e-12;
        let near_identity = update_weights(&weights, &stats, &params);
        assert!((near_identity.removal[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn weights_stay_positive_over_many_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = SigalnsParams::default();
        let mut weights = OperatorWeights::default();
        for _ in 0..10_000 {
            let mut stats = SegmentStats::default();
            for k in 0..3 {
                stats.removal_uses[k] = rng.gen_range(0..5);
                if stats.removal_uses[k] > 0 {
                    stats.removal_score[k] =
                        rng.gen_range(0.0..10.0) * stats.removal_uses[k] as f64;
                }
            }
            for k in 0..2 {
                stats.insertion_uses[k] = rng.gen_range(0..5);
                if stats.insertion_uses[k] > 0 {
                    stats.insertion_score[k] =
                        rng.gen_range(0.0..10.0) * stats.insertion_uses[k] as f64;
                }
            }
            weights = update_weights(&weights, &stats, &params);
            for w in weights.removal.iter().chain(weights.insertion.iter()) {
                assert!(*w > 0.0);
            }
        }
    }

    #[test]
    fn roulette_matches_weights_chi_square() {
        // 1e5 draws over fixed weights; chi-square at 1% significance with
        // df = 2 has critical value 9.210.
        let weights = [4.0, 1.0, 0.5];
        let total: f64 = weights.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 100_000usize;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            counts[roulette(&mut rng, &weights)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(weights.iter())
            .map(|(&obs, &w)| {
                let expect = draws as f64 * w / total;
                (obs as f64 - expect).powi(2) / expect
            })
            .sum();
        assert!(chi2 < 9.210, "chi2 = {chi2}");
    }

    #[test]
    fn zero_iterations_returns_sweep_solution() {
        let inst = instance::generate_instance(5, 6, 3, 60.0, 2).unwrap();
        let sweep = modified_sweep(&inst, &charging()).unwrap();
        let mut params = SigalnsParams::default();
        params.iter_max = 0;
        let sol = sigalns(&inst, &charging(), &params).unwrap();
        assert_eq!(sol, sweep);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let inst = instance::generate_instance(5, 8, 3, 60.0, 2).unwrap();
        let mut params = SigalnsParams::default();
        params.iter_max = 60;
        params.seed = 7;
        let a = sigalns(&inst, &charging(), &params).unwrap();
        let b = sigalns(&inst, &charging(), &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn solutions_are_checker_clean_and_never_beat_exact() {
        for seed in [31, 32, 33] {
            let inst = instance::generate_instance(seed, 4, 2, 50.0, 2).unwrap();
            let exact = exact_solve_tiny(&inst, &charging(), ModelVariant::Evl).unwrap();
            let mut params = SigalnsParams::default();
            params.seed = seed;
            let sol = sigalns(&inst, &charging(), &params).unwrap();
            let report = check_solution(&inst, &charging(), &sol);
            assert!(report.is_clean(), "seed {seed}: {report}");
            assert!(sol.objective.total >= exact.objective.total - 1e-6);
        }
    }
}
