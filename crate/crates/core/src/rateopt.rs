//! Error-probability / code-rate allocation on one transmitter's outgoing
//! links, with a grid brute-force oracle.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};

/// Flows below this are treated as zero when routing.
const FLOW_EPS: f64 = 1e-12;

/// Which way the rate variable `Q = max_a h_ja` is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum RateDirection {
    /// Push the binding link to its largest feasible flow.
    #[default]
    MaximizeRate,
    /// Minimize `𝒢` literally: the smallest feasible largest outflow.
    MinimizeObjective,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateInstance {
    /// `capacity[v][a]` is `R_va`; zero means no link.
    pub capacity: Vec<Vec<f64>>,
    /// Meters.
    pub distance: Vec<Vec<f64>>,
    /// Net outflow `ψ_v` required at every node.
    pub psi: Vec<f64>,
    /// Remaining energy `ℰ_v`.
    pub energy: Vec<f64>,
    /// Transmission range `r_v`, meters.
    pub range: Vec<f64>,
    pub r_max: f64,
    pub nu: f64,
    /// Transmitter `j` whose rate is optimized.
    pub source: usize,
    /// Gateway `i` the objective is measured against.
    pub sink: usize,
}

impl RateInstance {
    pub fn num_nodes(&self) -> usize {
        self.psi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if self.capacity.len() != n
            || self.distance.len() != n
            || self.energy.len() != n
            || self.range.len() != n
            || self.capacity.iter().chain(&self.distance).any(|row| row.len() != n)
        {
            return bad("capacity", format!("all tables must be sized for {n} nodes"));
        }
        if self.source >= n || self.sink >= n {
            return bad(
                "source",
                format!("source {} or sink {} out of range", self.source, self.sink),
            );
        }
        if let Some((v, a)) = self.pairs().find(|&(v, a)| !(self.capacity[v][a] >= 0.0)) {
            return bad("capacity", format!("R[{v}][{a}] = {} is negative", self.capacity[v][a]));
        }
        if let Some(v) = (0..n).find(|&v| !(self.range[v] > 0.0 && self.range[v] <= self.r_max)) {
            return bad(
                "range",
                format!("r[{v}] = {} outside (0, {}]", self.range[v], self.r_max),
            );
        }
        if !(self.nu > 0.0) {
            return bad("nu", "must be positive".into());
        }
        Ok(())
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.num_nodes();
        (0..n).flat_map(move |v| (0..n).filter(move |&a| a != v).map(move |a| (v, a)))
    }

    /// Usable links: positive capacity within the transmitter's range.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.pairs()
            .filter(|&(v, a)| self.capacity[v][a] > 0.0 && self.distance[v][a] <= self.range[v])
            .collect()
    }
}

/// `[r^ν/ℰ + d^ν] · Q`.
pub fn objective_g(q: f64, r: f64, energy: f64, d: f64, nu: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::DepletedEnergy { energy });
    }
    Ok((r.powf(nu) / energy + d.powf(nu)) * q)
}

/// Lagrange multipliers of the binding link at the returned point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktMultipliers {
    /// Multiplier of `Q = max_a h_ja`: minus the objective coefficient.
    pub rate: f64,
    /// Multiplier of `h ≤ R` on the binding link; positive only when saturated.
    pub upper_bound: f64,
    /// Multiplier of the binding node's flow balance.
    pub balance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSolution {
    pub q: f64,
    pub flows: BTreeMap<(usize, usize), f64>,
    /// Outgoing link of the source carrying `Q`; `None` when it has no link.
    pub binding: Option<(usize, usize)>,
    pub objective: f64,
    pub multipliers: KktMultipliers,
}

#[derive(Debug, Clone)]
struct FlowArc {
    from: usize,
    to: usize,
    cap: f64,
    flow: f64,
}

/// Residual network over the instance arcs plus a super source and sink.
#[derive(Clone)]
struct FlowNetwork {
    nodes: usize,
    arcs: Vec<FlowArc>,
    adjacency: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            nodes,
            arcs: Vec::new(),
            adjacency: vec![Vec::new(); nodes],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: f64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(FlowArc {
            from,
            to,
            cap,
            flow: 0.0,
        });
        self.adjacency[from].push(id);
        self.adjacency[to].push(id);
        id
    }

    fn residual(&self, arc: usize, from: usize) -> f64 {
        let a = &self.arcs[arc];
        if a.from == from {
            a.cap - a.flow
        } else {
            a.flow
        }
    }

    /// Breadth-first augmenting path; `skip` arcs are invisible.
    fn augmenting_path(&self, s: usize, t: usize, skip: &[usize]) -> Option<Vec<(usize, usize)>> {
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.nodes];
        let mut seen = vec![false; self.nodes];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for &arc in &self.adjacency[u] {
                if skip.contains(&arc) || self.residual(arc, u) <= FLOW_EPS {
                    continue;
                }
                let a = &self.arcs[arc];
                let v = if a.from == u { a.to } else { a.from };
                if !seen[v] {
                    seen[v] = true;
                    prev[v] = Some((arc, u));
                    queue.push_back(v);
                }
            }
        }
        if !seen[t] {
            return None;
        }
        let mut path = Vec::new();
        let mut v = t;
        while let Some((arc, u)) = prev[v] {
            path.push((arc, u));
            v = u;
        }
        path.reverse();
        Some(path)
    }

    fn push(&mut self, path: &[(usize, usize)], amount: f64) {
        for &(arc, u) in path {
            if self.arcs[arc].from == u {
                self.arcs[arc].flow += amount;
            } else {
                self.arcs[arc].flow -= amount;
            }
        }
    }

    fn max_flow(&mut self, s: usize, t: usize, limit: f64, skip: &[usize]) -> f64 {
        let mut total = 0.0;
        while total < limit {
            let Some(path) = self.augmenting_path(s, t, skip) else {
                break;
            };
            let bottleneck = path
                .iter()
                .map(|&(arc, u)| self.residual(arc, u))
                .fold(limit - total, f64::min);
            self.push(&path, bottleneck);
            total += bottleneck;
        }
        total
    }
}

/// A conserving flow within the capacities.
#[derive(Clone)]
struct Routed {
    net: FlowNetwork,
    /// Instance arc list, parallel to the first `arcs.len()` network arcs.
    arcs: Vec<(usize, usize)>,
}

fn route(instance: &RateInstance, source_cap: Option<f64>) -> Result<Routed> {
    let n = instance.num_nodes();
    let arcs = instance.arcs();
    let (s, t) = (n, n + 1);
    let mut net = FlowNetwork::new(n + 2);
    for &(v, a) in &arcs {
        let mut cap = instance.capacity[v][a];
        if v == instance.source {
            if let Some(c) = source_cap {
                cap = cap.min(c);
            }
        }
        net.add(v, a, cap);
    }
    let mut supply = 0.0;
    let mut terminals = Vec::new();
    for (v, &psi) in instance.psi.iter().enumerate() {
        if psi > 0.0 {
            terminals.push((v, net.add(s, v, psi)));
            supply += psi;
        } else if psi < 0.0 {
            terminals.push((v, net.add(v, t, -psi)));
        }
    }
    let demand: f64 = instance.psi.iter().filter(|&&p| p < 0.0).map(|p| -p).sum();
    if (supply - demand).abs() > 1e-9 {
        let node = instance.psi.iter().position(|&p| p != 0.0).unwrap_or(0);
        return Err(Error::InfeasibleFlow {
            node,
            violation: supply - demand,
        });
    }
    net.max_flow(s, t, supply, &[]);
    for &(v, arc) in &terminals {
        let short = net.arcs[arc].cap - net.arcs[arc].flow;
        if short > 1e-14 * supply.max(1.0) {
            return Err(Error::InfeasibleFlow {
                node: v,
                violation: short,
            });
        }
    }
    Ok(Routed { net, arcs })
}

impl Routed {
    fn flows(&self) -> BTreeMap<(usize, usize), f64> {
        self.arcs
            .iter()
            .enumerate()
            .map(|(k, &pair)| (pair, self.net.arcs[k].flow.max(0.0)))
            .collect()
    }

    /// Raises the flow on arc `k` as far as rerouting the rest allows.
    fn maximize_arc(&mut self, k: usize) {
        let (from, to) = self.arcs[k];
        let room = self.net.arcs[k].cap - self.net.arcs[k].flow;
        let extra = self.net.max_flow(to, from, room, &[k]);
        self.net.arcs[k].flow += extra;
    }

    fn source_max(&self, source: usize) -> (f64, Option<usize>) {
        let mut best = (0.0, None);
        for (k, &(v, _)) in self.arcs.iter().enumerate() {
            if v == source && (best.1.is_none() || self.net.arcs[k].flow > best.0) {
                best = (self.net.arcs[k].flow, Some(k));
            }
        }
        best
    }
}

fn finish(instance: &RateInstance, routed: &Routed, direction: RateDirection) -> Result<RateSolution> {
    let j = instance.source;
    let coef = objective_g(
        1.0,
        instance.range[j],
        instance.energy[j],
        instance.distance[j][instance.sink],
        instance.nu,
    )?;
    let (q, binding) = routed.source_max(j);
    let binding = binding.map(|k| routed.arcs[k]);
    let saturated = binding.is_some_and(|(v, a)| (instance.capacity[v][a] - q).abs() <= 1e-9);
    let (upper_bound, balance) = match (binding, direction, saturated) {
        (None, _, _) => (0.0, 0.0),
        (Some(_), RateDirection::MaximizeRate, true) => (coef, 0.0),
        (Some(_), _, _) => (0.0, coef),
    };
    Ok(RateSolution {
        q,
        flows: routed.flows(),
        binding,
        objective: coef * q,
        multipliers: KktMultipliers {
            rate: -coef,
            upper_bound,
            balance,
        },
    })
}

/// Closed-form allocation: the source's binding link is pushed to its
/// largest feasible flow (capacity, when the balances allow it) and every
/// other flow is filled in by augmenting paths.
pub fn solve_rate_allocation(instance: &RateInstance) -> Result<RateSolution> {
    solve_rate_allocation_with(instance, RateDirection::default())
}

pub fn solve_rate_allocation_with(instance: &RateInstance, direction: RateDirection) -> Result<RateSolution> {
    instance.validate()?;
    let j = instance.source;
    match direction {
        RateDirection::MaximizeRate => {
            let base = route(instance, None)?;
            let mut best: Option<Routed> = None;
            for k in 0..base.arcs.len() {
                if base.arcs[k].0 != j {
                    continue;
                }
                let mut trial = base.clone();
                trial.maximize_arc(k);
                let better = match &best {
                    None => true,
                    Some(b) => trial.net.arcs[k].flow > b.source_max(j).0 + FLOW_EPS,
                };
                if better {
                    best = Some(trial);
                }
            }
            finish(instance, best.as_ref().unwrap_or(&base), direction)
        }
        RateDirection::MinimizeObjective => {
            let top = instance
                .arcs()
                .iter()
                .filter(|&&(v, _)| v == j)
                .map(|&(v, a)| instance.capacity[v][a])
                .fold(0.0, f64::max);
            // Feasibility is monotone in the cap on the source's links.
            let mut routed = route(instance, Some(top))?;
            let (mut lo, mut hi) = (0.0, top);
            if let Ok(r) = route(instance, Some(0.0)) {
                routed = r;
                hi = 0.0;
            }
            while hi - lo > 1e-12 * top.max(1.0) {
                let mid = 0.5 * (lo + hi);
                match route(instance, Some(mid)) {
                    Ok(r) => {
                        routed = r;
                        hi = mid;
                    }
                    Err(_) => lo = mid,
                }
            }
            finish(instance, &routed, direction)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceRate {
    pub q: f64,
    pub objective: f64,
    pub flows: BTreeMap<(usize, usize), f64>,
    pub evaluated: u64,
}

/// Exhaustive search over flows on multiples of `step`. Balances must lie on
/// the grid; conservation is checked in integer units.
pub fn brute_force_rate(instance: &RateInstance, step: f64, direction: RateDirection) -> Result<BruteForceRate> {
    instance.validate()?;
    let units = |x: f64| (x / step + 1e-9).floor() as i64;
    let psi: Vec<i64> = instance.psi.iter().map(|&p| (p / step).round() as i64).collect();
    if let Some(v) = (0..psi.len()).find(|&v| (psi[v] as f64 * step - instance.psi[v]).abs() > 1e-9) {
        return Err(Error::InvalidParameter {
            name: "psi",
            reason: format!("psi[{v}] = {} is not a multiple of {step}", instance.psi[v]),
        });
    }
    let arcs = instance.arcs();
    let caps: Vec<i64> = arcs.iter().map(|&(v, a)| units(instance.capacity[v][a])).collect();
    let j = instance.source;
    let coef = objective_g(
        1.0,
        instance.range[j],
        instance.energy[j],
        instance.distance[j][instance.sink],
        instance.nu,
    )?;

    let mut h = vec![0i64; arcs.len()];
    let mut evaluated = 0u64;
    let mut best: Option<(i64, Vec<i64>)> = None;
    loop {
        evaluated += 1;
        let mut balance = vec![0i64; psi.len()];
        for (&(v, a), &f) in arcs.iter().zip(&h) {
            balance[v] += f;
            balance[a] -= f;
        }
        if balance == psi {
            let q = arcs
                .iter()
                .zip(&h)
                .filter(|((v, _), _)| *v == j)
                .map(|(_, &f)| f)
                .max()
                .unwrap_or(0);
            let better = match (&best, direction) {
                (None, _) => true,
                (Some((b, _)), RateDirection::MinimizeObjective) => q < *b,
                (Some((b, _)), RateDirection::MaximizeRate) => q > *b,
            };
            if better {
                best = Some((q, h.clone()));
            }
        }
        // Odometer increment.
        let mut k = 0;
        while k < h.len() && h[k] == caps[k] {
            h[k] = 0;
            k += 1;
        }
        if k == h.len() {
            break;
        }
        h[k] += 1;
    }
    let Some((q, h)) = best else {
        return Err(Error::InfeasibleFlow {
            node: instance.psi.iter().position(|&p| p != 0.0).unwrap_or(0),
            violation: f64::NAN,
        });
    };
    let q = q as f64 * step;
    Ok(BruteForceRate {
        q,
        objective: coef * q,
        flows: arcs.iter().zip(&h).map(|(&pair, &f)| (pair, f as f64 * step)).collect(),
        evaluated,
    })
}

/// Capacity-gap error proxy: 1 above `log₂(1 + snr)`, otherwise
/// `exp(-c (log₂(1 + snr) - rate))`.
pub fn error_probability_proxy(snr: f64, rate: f64, c: f64) -> f64 {
    let capacity = (1.0 + snr).log2();
    if rate > capacity {
        1.0
    } else {
        (-c * (capacity - rate)).exp()
    }
}

/// Block code summary behind the proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelProxy {
    pub block_length: u32,
    /// `⌈2^{n̄ ℛ}⌉`.
    pub messages: f64,
    pub rate: f64,
    pub error_probability: f64,
}

impl ChannelProxy {
    pub fn new(snr: f64, rate: f64, block_length: u32, c: f64) -> Self {
        Self {
            block_length,
            messages: (block_length as f64 * rate).exp2().ceil(),
            rate,
            error_probability: error_probability_proxy(snr, rate, c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_node(capacity: f64, psi: f64) -> RateInstance {
        RateInstance {
            capacity: vec![vec![0.0, capacity], vec![0.0, 0.0]],
            distance: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            psi: vec![psi, -psi],
            energy: vec![1.0, 1.0],
            range: vec![1.0, 1.0],
            r_max: 1.0,
            nu: 2.0,
            source: 0,
            sink: 1,
        }
    }

    /// Flows on a 0.05 grid are checked for conservation in integer units.
    fn assert_conserving(instance: &RateInstance, flows: &BTreeMap<(usize, usize), f64>) {
        let mut balance = vec![0.0; instance.num_nodes()];
        for (&(v, a), &f) in flows {
            assert!(
                f >= -1e-12 && f <= instance.capacity[v][a] + 1e-12,
                "flow {f} on ({v},{a})"
            );
            balance[v] += f;
            balance[a] -= f;
        }
        for (b, p) in balance.iter().zip(&instance.psi) {
            assert!((b - p).abs() < 1e-9, "balance {b} vs psi {p}");
        }
    }

    pub(crate) fn random_instance(rng: &mut ChaCha8Rng, max_nodes: usize, max_arcs: usize) -> RateInstance {
        let n = rng.random_range(2..=max_nodes);
        let mut pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|v| (0..n).filter(move |&a| a != v).map(move |a| (v, a)))
            .collect();
        // Keep a random subset of at most `max_arcs` links, always including one out of the source.
        for k in (1..pairs.len()).rev() {
            pairs.swap(k, rng.random_range(0..=k));
        }
        let first_out = pairs.iter().position(|&(v, _)| v == 0).unwrap();
        pairs.swap(0, first_out);
        pairs.truncate(rng.random_range(1..=max_arcs.min(pairs.len())));
        let mut capacity = vec![vec![0.0; n]; n];
        let mut flow0 = vec![vec![0i64; n]; n];
        for &(v, a) in &pairs {
            let cap = rng.random_range(1..=4i64);
            capacity[v][a] = cap as f64 * 0.05;
            flow0[v][a] = rng.random_range(0..=cap);
        }
        let mut psi = vec![0.0; n];
        for v in 0..n {
            for a in 0..n {
                psi[v] += flow0[v][a] as f64 * 0.05;
                psi[a] -= flow0[v][a] as f64 * 0.05;
            }
        }
        let mut distance = vec![vec![0.0; n]; n];
        for v in 0..n {
            for a in v + 1..n {
                let d = rng.random_range(1.0..10.0);
                distance[v][a] = d;
                distance[a][v] = d;
            }
        }
        let range: Vec<f64> = distance
            .iter()
            .map(|row| row.iter().cloned().fold(0.0, f64::max))
            .collect();
        RateInstance {
            capacity,
            distance,
            psi,
            energy: (0..n).map(|_| rng.random_range(0.5..2.0)).collect(),
            r_max: range.iter().cloned().fold(0.0, f64::max),
            range,
            nu: 2.0,
            source: 0,
            sink: n - 1,
        }
    }

    #[test]
    fn zero_capacity_link() {
        let sol = solve_rate_allocation(&two_node(0.0, 0.0)).unwrap();
        assert_eq!(sol.q, 0.0);
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.binding, None);
    }

    #[test]
    fn single_gateway_link() {
        for dir in [RateDirection::MaximizeRate, RateDirection::MinimizeObjective] {
            let sol = solve_rate_allocation_with(&two_node(2.0, 2.0), dir).unwrap();
            assert!((sol.q - 2.0).abs() < 1e-9, "{dir:?} {}", sol.q);
            assert!((sol.objective - 4.0).abs() < 1e-9);
            assert_eq!(sol.binding, Some((0, 1)));
        }
    }

    #[test]
    fn objective_values() {
        assert_eq!(objective_g(0.0, 3.0, 1.0, 2.0, 2.0).unwrap(), 0.0);
        assert!((objective_g(1.0, 1.0, 2.0, 1.0, 2.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(
            objective_g(1.0, 1.0, 0.0, 1.0, 2.0),
            Err(Error::DepletedEnergy { energy: 0.0 })
        );
    }

    #[test]
    fn maximizing_saturates_the_binding_link() {
        // 0 → 1 → 2 with a return link 1 → 0 lets flow circulate up to capacity.
        let inst = RateInstance {
            capacity: vec![vec![0.0, 0.4, 0.0], vec![0.25, 0.0, 0.3], vec![0.0, 0.0, 0.0]],
            distance: vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]],
            psi: vec![0.1, 0.0, -0.1],
            energy: vec![1.0; 3],
            range: vec![2.0; 3],
            r_max: 2.0,
            nu: 2.0,
            source: 0,
            sink: 2,
        };
        let sol = solve_rate_allocation(&inst).unwrap();
        assert!((sol.q - 0.35).abs() < 1e-12, "{}", sol.q);
        assert_conserving(&inst, &sol.flows);
        let low = solve_rate_allocation_with(&inst, RateDirection::MinimizeObjective).unwrap();
        assert!((low.q - 0.1).abs() < 1e-9);
        assert_conserving(&inst, &low.flows);
    }

    #[test]
    fn infeasible_balance_is_reported() {
        match solve_rate_allocation(&two_node(1.0, 2.0)) {
            Err(Error::InfeasibleFlow { node, violation }) => {
                assert_eq!(node, 0);
                assert!((violation - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn three_node_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 20 {
            let inst = random_instance(&mut rng, 3, 6);
            if inst.num_nodes() != 3 {
                continue;
            }
            checked += 1;
            for dir in [RateDirection::MinimizeObjective, RateDirection::MaximizeRate] {
                let kkt = solve_rate_allocation_with(&inst, dir).unwrap();
                let bf = brute_force_rate(&inst, 0.05, dir).unwrap();
                match dir {
                    RateDirection::MinimizeObjective => assert!(kkt.objective <= bf.objective + 1e-9),
                    RateDirection::MaximizeRate => {
                        // Grid capacities make the largest rate a grid point.
                        assert!(kkt.objective >= bf.objective - 1e-9);
                        assert!((kkt.q - bf.q).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn brute_force_counts_grid_points() {
        let bf = brute_force_rate(&two_node(0.1, 0.1), 0.05, RateDirection::MaximizeRate).unwrap();
        assert_eq!(bf.evaluated, 3);
        assert!((bf.q - 0.1).abs() < 1e-12);
    }

    #[test]
    fn proxy_limits() {
        assert_eq!(error_probability_proxy(1.0, 2.0, 1.0), 1.0);
        assert!(error_probability_proxy(1e12, 0.5, 1.0) < 1e-10);
        assert_eq!(error_probability_proxy(0.0, 0.0, 1.0), 1.0);
        let mut last = 1.0;
        for k in 1..100 {
            let phi = error_probability_proxy(k as f64 * 0.1, 0.05, 1.0);
            assert!(phi < last);
            last = phi;
        }
    }

    #[test]
    fn channel_proxy_message_count() {
        let c = ChannelProxy::new(3.0, 0.5, 10, 1.0);
        assert_eq!(c.messages, 32.0);
        assert!((c.error_probability - (-1.5f64).exp()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn returned_flows_conserve_and_respect_boxes(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = random_instance(&mut rng, 4, 6);
            for dir in [RateDirection::MaximizeRate, RateDirection::MinimizeObjective] {
                let sol = solve_rate_allocation_with(&inst, dir).unwrap();
                assert_conserving(&inst, &sol.flows);
                // Complementary slackness and dual feasibility on the binding link.
                let m = sol.multipliers;
                prop_assert!(m.upper_bound >= 0.0 && m.balance >= 0.0 && m.rate <= 0.0);
                if m.upper_bound > 0.0 {
                    let (v, a) = sol.binding.unwrap();
                    prop_assert!((sol.flows[&(v, a)] - inst.capacity[v][a]).abs() < 1e-9);
                }
                if let Some(b) = sol.binding {
                    prop_assert!((sol.flows[&b] - sol.q).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn objective_is_monotone(q in 0.01f64..10.0, r in 0.1f64..10.0, e in 0.1f64..10.0, d in 0.1f64..10.0, dq in 0.01f64..1.0) {
            let g = objective_g(q, r, e, d, 2.0).unwrap();
            prop_assert!(objective_g(q + dq, r, e, d, 2.0).unwrap() > g);
            prop_assert!(objective_g(q, r, e, d + dq, 2.0).unwrap() > g);
            prop_assert!(objective_g(q, r, e + dq, d, 2.0).unwrap() < g);
        }
    }
}
