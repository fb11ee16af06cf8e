//! Topology extraction (IoTNTop): SNR-ordered sewing of components into a
//! spanning forest, then power reduction monitored by a Lyapunov value.
//! Brute-force and local-MST baselines share the same link model.
//!
//! Node ids follow the crate convention: end-nodes `0..l`, gateways after.
//! Only end-nodes transmit. An end-node pair is a link in both directions,
//! an end-node and gateway pair only uplink, and gateway pairs are never
//! links.

use std::io::Write;

use nalgebra::Point2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::UnionFind;
use crate::model::Network;
use crate::power::{dbm_to_mw, initial_power_for, link_snr, mw_to_dbm, PowerConfig};
use crate::rateopt::error_probability_proxy;
use crate::NodeId;

/// Node positions, end-nodes first.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub positions: Vec<Point2<f64>>,
    pub num_end_nodes: usize,
}

impl Layout {
    pub fn new(end_nodes: &[Point2<f64>], gateways: &[Point2<f64>]) -> Self {
        Self {
            positions: end_nodes.iter().chain(gateways).copied().collect(),
            num_end_nodes: end_nodes.len(),
        }
    }

    pub fn from_network(network: &Network) -> Self {
        Self::new(&network.end_nodes, &network.gateways)
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn end_nodes(&self) -> &[Point2<f64>] {
        &self.positions[..self.num_end_nodes]
    }

    pub fn gateways(&self) -> &[Point2<f64>] {
        &self.positions[self.num_end_nodes..]
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        (self.positions[a] - self.positions[b]).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub distance: f64,
}

impl CandidateEdge {
    /// `(transmitter, receiver)` pairs carried by the edge.
    fn links(&self, l: usize) -> impl Iterator<Item = (NodeId, NodeId)> {
        let (a, b) = (self.a, self.b);
        [(a < l).then_some((a, b)), (b < l).then_some((b, a))]
            .into_iter()
            .flatten()
    }
}

/// Pairs that can reach SNR ζ in every direction at maximum power.
pub fn range_graph(layout: &Layout, cfg: &PowerConfig) -> Vec<CandidateEdge> {
    let l = layout.num_end_nodes;
    let mut out = Vec::new();
    for a in 0..l.min(layout.num_nodes()) {
        for b in a + 1..layout.num_nodes() {
            let d = layout.distance(a, b);
            if d > 0.0 && cfg.link_feasible(d) {
                out.push(CandidateEdge { a, b, distance: d });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TopologyEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub distance: f64,
    /// Linear SNR of `a → b`; `None` when `a` is a gateway.
    pub snr_ab: Option<f64>,
    pub snr_ba: Option<f64>,
}

impl TopologyEdge {
    /// The weaker direction.
    pub fn snr(&self) -> f64 {
        match (self.snr_ab, self.snr_ba) {
            (Some(x), Some(y)) => x.min(y),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    pub num_end_nodes: usize,
    pub edges: Vec<TopologyEdge>,
    /// Transmit power per end-node, dBm.
    pub power_dbm: Vec<f64>,
    pub components: Vec<Vec<NodeId>>,
}

impl Topology {
    pub fn total_power_mw(&self) -> f64 {
        self.power_dbm.iter().map(|&p| dbm_to_mw(p)).sum()
    }

    /// Linear SNR of every active directed link.
    pub fn link_qualities(&self) -> Vec<f64> {
        self.edges
            .iter()
            .flat_map(|e| e.snr_ab.into_iter().chain(e.snr_ba))
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        self.components.len() <= 1
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            a: NodeId,
            b: NodeId,
            distance_m: f64,
            snr_db: f64,
            power_a_dbm: Option<f64>,
        }
        let mut w = csv::Writer::from_writer(out);
        for e in &self.edges {
            w.serialize(Row {
                a: e.a,
                b: e.b,
                distance_m: e.distance,
                snr_db: mw_to_dbm(e.snr()),
                power_a_dbm: self.power_dbm.get(e.a).copied(),
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

fn build_topology(layout: &Layout, cfg: &PowerConfig, edges: &[CandidateEdge], power_dbm: Vec<f64>) -> Topology {
    let l = layout.num_end_nodes;
    let snr = |tx: NodeId, d: f64| (tx < l).then(|| link_snr(dbm_to_mw(power_dbm[tx]), d, cfg));
    let out: Vec<TopologyEdge> = edges
        .iter()
        .map(|e| TopologyEdge {
            a: e.a,
            b: e.b,
            distance: e.distance,
            snr_ab: snr(e.a, e.distance),
            snr_ba: snr(e.b, e.distance),
        })
        .collect();
    let components = crate::graph::components(layout.num_nodes(), out.iter().map(|e| (e.a, e.b)));
    Topology {
        num_end_nodes: l,
        edges: out,
        power_dbm,
        components,
    }
}

/// Smallest powers keeping every link of `edges` at SNR ζ; nodes without a
/// link get `p_tmin_dbm`.
pub fn minimal_powers(layout: &Layout, cfg: &PowerConfig, edges: &[CandidateEdge]) -> Vec<f64> {
    let l = layout.num_end_nodes;
    let mut need = vec![dbm_to_mw(cfg.p_tmin_dbm); l];
    for e in edges {
        for (tx, _) in e.links(l) {
            need[tx] = need[tx].max(cfg.link_power_mw(e.distance));
        }
    }
    need.iter()
        .map(|&p| mw_to_dbm(p).clamp(cfg.p_tmin_dbm, cfg.rho_tmax_dbm))
        .collect()
}

/// `(1/N_links) Σ Q`; zero without links.
pub fn topology_metric(qualities: &[f64]) -> f64 {
    if qualities.is_empty() {
        0.0
    } else {
        qualities.iter().sum::<f64>() / qualities.len() as f64
    }
}

/// `Φ + β M(top)`.
pub fn lyapunov_value(phi: f64, m_top: f64, beta: f64) -> f64 {
    phi + beta * m_top
}

/// Worst error-probability proxy over the links; zero without links.
pub fn network_phi(qualities: &[f64], rate: f64, c: f64) -> f64 {
    qualities
        .iter()
        .map(|&q| error_probability_proxy(q, rate, c))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IoTNTopOptions {
    /// Power reduction per step ς, dB.
    pub step_db: f64,
    /// Stop once the normalized SNR change per round falls to this.
    pub epsilon: f64,
    /// Code rate fed to the error proxy, bits per symbol.
    pub code_rate: f64,
    pub proxy_c: f64,
    pub max_rounds: usize,
    /// Redo the sewing at the refined powers until the edge set is stable.
    pub reextract: bool,
    /// Fraction of the non-tree candidates, best SNR first, added back after sewing.
    pub augment_fraction: f64,
}

impl Default for IoTNTopOptions {
    fn default() -> Self {
        Self {
            step_db: 0.5,
            epsilon: 1e-3,
            code_rate: 0.0,
            proxy_c: 1.0,
            max_rounds: 10_000,
            reextract: false,
            augment_fraction: 0.0,
        }
    }
}

impl IoTNTopOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.step_db > 0.0) {
            return bad("step_db", "must be positive");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.augment_fraction) {
            return bad("augment_fraction", "must lie in [0, 1]");
        }
        if !(self.code_rate >= 0.0) || !(self.proxy_c > 0.0) {
            return bad("code_rate", "rate must be non-negative and proxy constant positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    /// Refinement round within the pass; 0 is the state after sewing.
    pub iteration: usize,
    /// Sewing pass; above 0 only with re-extraction.
    pub pass: usize,
    pub lyapunov: f64,
    pub phi: f64,
    pub m_top: f64,
    pub delta: f64,
    pub total_power_mw: f64,
    pub accepted_steps: usize,
    pub powers_dbm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct IoTNTopTrace {
    pub records: Vec<TraceRecord>,
    /// Edges in the order they were sewn, per pass.
    pub sew_order: Vec<Vec<(NodeId, NodeId)>>,
}

impl IoTNTopTrace {
    /// Refinement rounds run, over all passes.
    pub fn iterations(&self) -> usize {
        self.records.iter().filter(|r| r.iteration > 0).count()
    }

    pub fn final_delta(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.delta)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            iter: usize,
            pass: usize,
            v: f64,
            phi: f64,
            m_top: f64,
            delta: f64,
            total_power_dbm: f64,
            accepted_steps: usize,
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(Row {
                iter: r.iteration,
                pass: r.pass,
                v: r.lyapunov,
                phi: r.phi,
                m_top: r.m_top,
                delta: r.delta,
                total_power_dbm: mw_to_dbm(r.total_power_mw),
                accepted_steps: r.accepted_steps,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Candidates sorted by decreasing SNR at `power_dbm` (compared on a 1e-9 dB
/// grid), ties by shorter distance, then by id pair.
pub fn sort_by_snr(
    layout: &Layout,
    cfg: &PowerConfig,
    candidates: &[CandidateEdge],
    power_dbm: &[f64],
) -> Vec<(CandidateEdge, f64)> {
    let l = layout.num_end_nodes;
    let mut out: Vec<(CandidateEdge, f64)> = candidates
        .iter()
        .map(|e| {
            let q = e
                .links(l)
                .map(|(tx, _)| link_snr(dbm_to_mw(power_dbm[tx]), e.distance, cfg))
                .fold(f64::INFINITY, f64::min);
            (*e, q)
        })
        .collect();
    // SNRs equal up to rounding count as ties.
    let level = |q: f64| (mw_to_dbm(q) * 1e9).round() as i64;
    out.sort_by(|(x, qx), (y, qy)| {
        level(*qy)
            .cmp(&level(*qx))
            .then(x.distance.total_cmp(&y.distance))
            .then((x.a, x.b).cmp(&(y.a, y.b)))
    });
    out
}

/// Greedy sewing: an edge joins the topology when its ends lie in different
/// components.
fn sew(n: usize, sorted: &[(CandidateEdge, f64)], augment_fraction: f64) -> Vec<CandidateEdge> {
    let mut uf = UnionFind::new(n);
    let mut tree = Vec::new();
    let mut rest = Vec::new();
    for (e, _) in sorted {
        if uf.union(e.a, e.b) {
            tree.push(*e);
        } else {
            rest.push(*e);
        }
    }
    let extra = (augment_fraction * rest.len() as f64).ceil() as usize;
    tree.extend(rest.into_iter().take(extra));
    tree
}

/// Directed link table of an edge set: `(transmitter, distance)`.
fn directed_links(l: usize, edges: &[CandidateEdge]) -> Vec<(NodeId, f64)> {
    edges
        .iter()
        .flat_map(|e| e.links(l).map(move |(tx, _)| (tx, e.distance)))
        .collect()
}

struct Evaluator<'a> {
    cfg: &'a PowerConfig,
    opts: &'a IoTNTopOptions,
    links: Vec<(NodeId, f64)>,
}

impl Evaluator<'_> {
    fn qualities(&self, power_dbm: &[f64]) -> Vec<f64> {
        self.links
            .iter()
            .map(|&(tx, d)| link_snr(dbm_to_mw(power_dbm[tx]), d, self.cfg))
            .collect()
    }

    /// `(V, Φ, M)`.
    fn lyapunov(&self, qualities: &[f64]) -> (f64, f64, f64) {
        let phi = network_phi(qualities, self.opts.code_rate, self.opts.proxy_c);
        let m = topology_metric(qualities);
        (lyapunov_value(phi, m, self.cfg.beta), phi, m)
    }
}

fn record(
    eval: &Evaluator,
    iteration: usize,
    pass: usize,
    delta: f64,
    accepted_steps: usize,
    power_dbm: &[f64],
) -> TraceRecord {
    let (lyapunov, phi, m_top) = eval.lyapunov(&eval.qualities(power_dbm));
    TraceRecord {
        iteration,
        pass,
        lyapunov,
        phi,
        m_top,
        delta,
        total_power_mw: power_dbm.iter().map(|&p| dbm_to_mw(p)).sum(),
        accepted_steps,
        powers_dbm: power_dbm.to_vec(),
    }
}

/// Rounds of single-node power cuts of `step_db`. A cut is kept when every
/// link of the node stays at SNR ζ and the Lyapunov value strictly drops.
fn refine(eval: &Evaluator, l: usize, power_dbm: &mut [f64], pass: usize, trace: &mut IoTNTopTrace) {
    let cfg = eval.cfg;
    let mut by_node: Vec<Vec<usize>> = vec![Vec::new(); l];
    for (k, &(tx, _)) in eval.links.iter().enumerate() {
        by_node[tx].push(k);
    }
    let snr_db = |q: &[f64]| q.iter().map(|&x| mw_to_dbm(x)).collect::<Vec<f64>>();
    let mut q = eval.qualities(power_dbm);
    let (mut v, _, _) = eval.lyapunov(&q);
    let mut first_change: Option<f64> = None;
    for round in 1..=eval.opts.max_rounds {
        let before = snr_db(&q);
        let mut accepted = 0;
        for j in 0..l {
            if by_node[j].is_empty() {
                continue;
            }
            let p = (power_dbm[j] - eval.opts.step_db).max(cfg.p_tmin_dbm);
            if p >= power_dbm[j] {
                continue;
            }
            let mut trial = q.clone();
            let p_mw = dbm_to_mw(p);
            for &k in &by_node[j] {
                trial[k] = link_snr(p_mw, eval.links[k].1, cfg);
            }
            if by_node[j].iter().any(|&k| trial[k] < cfg.zeta) {
                continue;
            }
            let (v_new, _, _) = eval.lyapunov(&trial);
            if v_new < v {
                power_dbm[j] = p;
                q = trial;
                v = v_new;
                accepted += 1;
            }
        }
        let change = before
            .iter()
            .zip(snr_db(&q))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = *first_change.get_or_insert(change);
        let delta = if scale > 0.0 { change / scale } else { 0.0 };
        trace
            .records
            .push(record(eval, round, pass, delta, accepted, power_dbm));
        if accepted == 0 || delta <= eval.opts.epsilon {
            break;
        }
    }
}

const MAX_PASSES: usize = 16;

/// Extracts a topology from node positions (true or estimated).
///
/// Powers start at the initial assignment towards the nearest gateway, or
/// at `rho_tmax_dbm` when there is none. Sewing runs over every pair
/// feasible at maximum power, ordered by SNR at those powers; sewn links
/// below ζ get their transmitters raised just enough. Refinement then cuts
/// powers as described at [`refine`]. Pairs that cannot be joined even at
/// maximum power leave several components, reported in
/// [`Topology::components`].
pub fn iotntop(layout: &Layout, cfg: &PowerConfig, opts: &IoTNTopOptions) -> Result<(Topology, IoTNTopTrace)> {
    cfg.validate()?;
    opts.validate()?;
    let l = layout.num_end_nodes;
    let n = layout.num_nodes();
    let mut power_dbm = if layout.gateways().is_empty() {
        vec![cfg.rho_tmax_dbm; l]
    } else {
        initial_power_for(layout.end_nodes(), layout.gateways(), cfg)?.power_dbm
    };
    let candidates = range_graph(layout, cfg);
    let mut trace = IoTNTopTrace::default();
    let mut edges: Vec<CandidateEdge> = Vec::new();

    for pass in 0..MAX_PASSES {
        let sorted = sort_by_snr(layout, cfg, &candidates, &power_dbm);
        let sewn = sew(n, &sorted, opts.augment_fraction);
        if pass > 0 && same_edges(&sewn, &edges) {
            break;
        }
        edges = sewn;
        trace.sew_order.push(edges.iter().map(|e| (e.a, e.b)).collect());

        let floor = minimal_powers(layout, cfg, &edges);
        let linked: Vec<bool> = {
            let mut v = vec![false; l];
            for e in &edges {
                for (tx, _) in e.links(l) {
                    v[tx] = true;
                }
            }
            v
        };
        for j in 0..l {
            power_dbm[j] = if linked[j] {
                power_dbm[j].max(floor[j]).min(cfg.rho_tmax_dbm)
            } else {
                cfg.p_tmin_dbm
            };
        }
        let eval = Evaluator {
            cfg,
            opts,
            links: directed_links(l, &edges),
        };
        trace.records.push(record(&eval, 0, pass, 1.0, 0, &power_dbm));
        refine(&eval, l, &mut power_dbm, pass, &mut trace);
        if !opts.reextract {
            break;
        }
    }

    let topology = build_topology(layout, cfg, &edges, power_dbm);
    if !topology.is_connected() {
        log::warn!(
            "topology is disconnected at maximum power; components {:?}",
            topology.components
        );
    }
    Ok((topology, trace))
}

fn same_edges(a: &[CandidateEdge], b: &[CandidateEdge]) -> bool {
    let key = |s: &[CandidateEdge]| {
        let mut k: Vec<(NodeId, NodeId)> = s.iter().map(|e| (e.a, e.b)).collect();
        k.sort_unstable();
        k
    };
    key(a) == key(b)
}

/// Per end-node power levels at which some link first reaches ζ, plus
/// `p_tmin_dbm`. Searching over these loses nothing: lowering any power to
/// the next level below keeps the same links alive.
pub fn candidate_levels(layout: &Layout, cfg: &PowerConfig) -> Vec<Vec<f64>> {
    let l = layout.num_end_nodes;
    let mut levels: Vec<Vec<f64>> = vec![vec![cfg.p_tmin_dbm]; l];
    for e in range_graph(layout, cfg) {
        for (tx, _) in e.links(l) {
            levels[tx].push(mw_to_dbm(cfg.link_power_mw(e.distance)).max(cfg.p_tmin_dbm));
        }
    }
    for lv in &mut levels {
        lv.sort_by(f64::total_cmp);
        lv.dedup();
    }
    levels
}

/// Evenly spaced levels from `p_tmin_dbm` to `rho_tmax_dbm` for every end-node.
pub fn uniform_levels(layout: &Layout, cfg: &PowerConfig, count: usize) -> Vec<Vec<f64>> {
    let count = count.max(1);
    let span = cfg.rho_tmax_dbm - cfg.p_tmin_dbm;
    let row: Vec<f64> = (0..count)
        .map(|k| {
            if count == 1 {
                cfg.rho_tmax_dbm
            } else {
                cfg.p_tmin_dbm + span * k as f64 / (count - 1) as f64
            }
        })
        .collect();
    vec![row; layout.num_end_nodes]
}

/// Number of assignments an exhaustive search over `levels` visits.
pub fn configuration_count(levels: &[Vec<f64>]) -> f64 {
    levels.iter().map(|lv| lv.len() as f64).product()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceOutcome {
    pub topology: Topology,
    pub lyapunov: f64,
    pub evaluated: u64,
}

/// Scores every power assignment drawn from `levels` by component count,
/// then total power, then Lyapunov value; the first best assignment wins.
pub fn brute_force_power(
    layout: &Layout,
    cfg: &PowerConfig,
    opts: &IoTNTopOptions,
    levels: &[Vec<f64>],
    budget: u64,
) -> Result<BruteForceOutcome> {
    cfg.validate()?;
    let l = layout.num_end_nodes;
    if levels.len() != l || levels.iter().any(|lv| lv.is_empty()) {
        return Err(Error::InvalidParameter {
            name: "levels",
            reason: format!("need a non-empty level list for each of {l} end-nodes"),
        });
    }
    let required = configuration_count(levels);
    if required > budget as f64 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let candidates = range_graph(layout, cfg);
    let mut pick = vec![0usize; l];
    let mut power = vec![0.0; l];
    let mut evaluated = 0u64;
    let mut best: Option<((usize, f64, f64), Vec<f64>)> = None;
    loop {
        evaluated += 1;
        for j in 0..l {
            power[j] = levels[j][pick[j]];
        }
        let active: Vec<CandidateEdge> = candidates
            .iter()
            .filter(|e| {
                e.links(l)
                    .all(|(tx, _)| link_snr(dbm_to_mw(power[tx]), e.distance, cfg) >= cfg.zeta)
            })
            .copied()
            .collect();
        let mut uf = UnionFind::new(layout.num_nodes());
        let mut comps = layout.num_nodes();
        for e in &active {
            if uf.union(e.a, e.b) {
                comps -= 1;
            }
        }
        let total: f64 = power.iter().map(|&p| dbm_to_mw(p)).sum();
        let score = match &best {
            Some(((bc, bt, _), _)) if (comps, total) > (*bc, *bt) => None,
            Some(((bc, bt, _), _)) if (comps, total) == (*bc, *bt) => {
                Some((comps, total, lyapunov_of(&active, l, &power, cfg, opts)))
            }
            _ => Some((comps, total, lyapunov_of(&active, l, &power, cfg, opts))),
        };
        if let Some(s) = score {
            let better = best
                .as_ref()
                .is_none_or(|(b, _)| s.0 < b.0 || (s.0 == b.0 && (s.1 < b.1 || (s.1 == b.1 && s.2 < b.2))));
            if better {
                best = Some((s, power.clone()));
            }
        }
        let mut k = 0;
        while k < l && pick[k] + 1 == levels[k].len() {
            pick[k] = 0;
            k += 1;
        }
        if k == l {
            break;
        }
        pick[k] += 1;
    }
    let ((_, _, lyapunov), power) = best.expect("at least one configuration is evaluated");
    let active: Vec<CandidateEdge> = candidates
        .iter()
        .filter(|e| {
            e.links(l)
                .all(|(tx, _)| link_snr(dbm_to_mw(power[tx]), e.distance, cfg) >= cfg.zeta)
        })
        .copied()
        .collect();
    Ok(BruteForceOutcome {
        topology: build_topology(layout, cfg, &active, power),
        lyapunov,
        evaluated,
    })
}

fn lyapunov_of(active: &[CandidateEdge], l: usize, power: &[f64], cfg: &PowerConfig, opts: &IoTNTopOptions) -> f64 {
    let q: Vec<f64> = directed_links(l, active)
        .iter()
        .map(|&(tx, d)| link_snr(dbm_to_mw(power[tx]), d, cfg))
        .collect();
    lyapunov_value(
        network_phi(&q, opts.code_rate, opts.proxy_c),
        topology_metric(&q),
        cfg.beta,
    )
}

/// Local minimum spanning tree selection. Every node builds the MST of the
/// edges among itself and its neighbors (weights compared by distance, then
/// id pair) and keeps its incident tree edges; an edge survives when both
/// ends keep it.
pub fn lmst_edges(n: usize, edges: &[CandidateEdge]) -> Vec<CandidateEdge> {
    let mut sorted = edges.to_vec();
    sorted.sort_by(|x, y| x.distance.total_cmp(&y.distance).then((x.a, x.b).cmp(&(y.a, y.b))));
    let mut neighbors = vec![vec![false; n]; n];
    for e in edges {
        neighbors[e.a][e.b] = true;
        neighbors[e.b][e.a] = true;
    }
    let mut chosen = vec![vec![false; n]; n];
    for u in 0..n {
        let local = |v: usize| v == u || neighbors[u][v];
        let mut uf = UnionFind::new(n);
        for e in sorted.iter().filter(|e| local(e.a) && local(e.b)) {
            if uf.union(e.a, e.b) && (e.a == u || e.b == u) {
                chosen[u][e.a + e.b - u] = true;
            }
        }
    }
    sorted.sort_by_key(|e| (e.a, e.b));
    sorted
        .into_iter()
        .filter(|e| chosen[e.a][e.b] && chosen[e.b][e.a])
        .collect()
}

/// LMST over the maximum-power range graph, each end-node at the smallest
/// power serving its kept links.
pub fn lmst_topology(layout: &Layout, cfg: &PowerConfig) -> Result<Topology> {
    cfg.validate()?;
    let edges = lmst_edges(layout.num_nodes(), &range_graph(layout, cfg));
    let power = minimal_powers(layout, cfg, &edges);
    Ok(build_topology(layout, cfg, &edges, power))
}
