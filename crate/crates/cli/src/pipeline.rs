//! One run per (node count, noise factor, seed): generate, perturb, localize,
//! extract topologies, write CSVs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use nalgebra::Point2;
use serde::Serialize;

use netweave_core::metrics::{localization_error, procrustes_align};
use netweave_core::power::{friis_received_dbm, mw_to_dbm};
use netweave_core::rateopt::error_probability_proxy;
use netweave_core::topology::{
    candidate_levels, configuration_count, lyapunov_value, network_phi, topology_metric, uniform_levels,
};
use netweave_core::{
    brute_force_power, generate_network, iotntop, lmst_topology, localize, perturb_distances, DistanceMeasurements,
    Error as CoreError, IoTNTopTrace, Layout, LocalizeOptions, Network, PowerConfig, Topology,
};

use crate::config::{Algorithm, BruteLevels, ExperimentConfig, Frames};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate,
    Localize,
    Topology,
}

/// What to do when brute force would exceed its budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetPolicy {
    Fail,
    /// Record the configuration count without searching.
    CountOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunKey {
    pub nodes: usize,
    pub eta: f64,
    pub seed: u64,
}

impl RunKey {
    pub fn dir_name(&self, gateways: usize) -> String {
        format!("n{}_s{}_eta{}_seed{}", self.nodes, gateways, self.eta, self.seed)
    }
}

/// Runs in output order: node count, then noise factor, then seed.
pub fn run_keys(cfg: &ExperimentConfig) -> Vec<RunKey> {
    let mut keys = Vec::new();
    for &nodes in &cfg.nodes {
        for &eta in &cfg.etas {
            for &seed in &cfg.seeds {
                keys.push(RunKey { nodes, eta, seed });
            }
        }
    }
    keys
}

/// Per end-node quantities for the summary tables, in the frame the
/// algorithm saw.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSample {
    pub power_dbm: f64,
    pub range_m: f64,
    /// At the nearest gateway; `None` without gateways.
    pub received_dbm: Option<f64>,
    pub remaining_mj: f64,
    /// Worst error-probability proxy over the node's links; `None` when it has none.
    pub phi: Option<f64>,
    /// `log2(1 + Q)` of the node's weakest link.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    /// `None` when brute force only counted configurations.
    pub topology: Option<Topology>,
    pub trace: Option<IoTNTopTrace>,
    pub iterations: f64,
    /// Brute force only: configurations in the search space.
    pub configurations: Option<f64>,
    pub exhaustive: bool,
    pub phi: Option<f64>,
    pub m_top: Option<f64>,
    pub lyapunov: Option<f64>,
    pub samples: Vec<NodeSample>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub key: RunKey,
    pub network: Network,
    pub measurements: DistanceMeasurements,
    /// End-node estimates in the gateway frame.
    pub estimate: Option<Vec<Point2<f64>>>,
    pub a_e: Option<f64>,
    pub rms_m: Option<f64>,
    pub algorithms: Vec<AlgorithmRun>,
    /// Wall time of the run; never written to disk.
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub seed: u64,
    pub nodes: usize,
    pub gateways: usize,
    pub eta: f64,
    pub algorithm: String,
    pub frames: String,
    pub a_e: Option<f64>,
    pub rms_m: Option<f64>,
    pub iterations: Option<f64>,
    pub configurations: Option<f64>,
    pub exhaustive: Option<bool>,
    pub total_power_dbm: Option<f64>,
    pub edges: Option<usize>,
    pub components: Option<usize>,
    pub phi: Option<f64>,
    pub m_top: Option<f64>,
    pub lyapunov: Option<f64>,
    pub mean_rate: Option<f64>,
}

pub fn execute(cfg: &ExperimentConfig, key: RunKey, stage: Stage, policy: BudgetPolicy) -> Result<RunResult> {
    let started = Instant::now();
    let spec = cfg.network_spec(key.nodes, key.seed);
    let network = generate_network(&spec)?;
    let measurements = perturb_distances(&network, key.eta, key.seed)?;
    let mut out = RunResult {
        key,
        network,
        measurements,
        estimate: None,
        a_e: None,
        rms_m: None,
        algorithms: Vec::new(),
        elapsed: Duration::ZERO,
    };
    if stage == Stage::Generate {
        out.elapsed = started.elapsed();
        return Ok(out);
    }

    let loc = localize(&out.network, &out.measurements, &LocalizeOptions::default())?;
    out.a_e = Some(localization_error(&out.network.end_nodes, &loc.coords)?);
    out.rms_m = Some(procrustes_align(&out.network.end_nodes, &loc.coords)?.rms);
    out.estimate = Some(loc.coords);
    if stage == Stage::Localize {
        out.elapsed = started.elapsed();
        return Ok(out);
    }

    let layout = match cfg.frames {
        Frames::Truth => Layout::from_network(&out.network),
        Frames::Estimated => Layout::new(out.estimate.as_deref().unwrap_or_default(), &out.network.gateways),
    };
    let power = cfg.power_config();
    for &algorithm in &cfg.algorithms {
        let run = run_algorithm(cfg, &layout, &power, algorithm, policy)
            .with_context(|| format!("{algorithm} on {}", key.dir_name(cfg.gateways)))?;
        out.algorithms.push(run);
    }
    out.elapsed = started.elapsed();
    Ok(out)
}

fn run_algorithm(
    cfg: &ExperimentConfig,
    layout: &Layout,
    power: &PowerConfig,
    algorithm: Algorithm,
    policy: BudgetPolicy,
) -> Result<AlgorithmRun> {
    let (topology, trace, iterations, configurations, exhaustive) = match algorithm {
        Algorithm::IoTNTop => {
            let (topology, trace) = iotntop(layout, power, &cfg.iotntop)?;
            let iterations = trace.iterations() as f64;
            (Some(topology), Some(trace), iterations, None, true)
        }
        Algorithm::Lmst => (
            Some(lmst_topology(layout, power)?),
            None,
            layout.num_nodes() as f64,
            None,
            true,
        ),
        Algorithm::BruteForce => {
            let levels = match cfg.brute_force_levels {
                BruteLevels::Candidate => candidate_levels(layout, power),
                BruteLevels::Uniform(n) => uniform_levels(layout, power, n),
            };
            let count = configuration_count(&levels);
            match brute_force_power(layout, power, &cfg.iotntop, &levels, cfg.brute_force_budget) {
                Ok(bf) => (Some(bf.topology), None, bf.evaluated as f64, Some(count), true),
                Err(CoreError::BudgetExceeded { .. }) if policy == BudgetPolicy::CountOnly => {
                    log::info!("brute force over budget: {count:.3e} configurations counted, not searched");
                    (None, None, count, Some(count), false)
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    let mut run = AlgorithmRun {
        algorithm,
        topology: None,
        trace,
        iterations,
        configurations,
        exhaustive,
        phi: None,
        m_top: None,
        lyapunov: None,
        samples: Vec::new(),
    };
    if let Some(topology) = topology {
        let q = topology.link_qualities();
        let phi = network_phi(&q, cfg.iotntop.code_rate, cfg.iotntop.proxy_c);
        let m_top = topology_metric(&q);
        run.phi = Some(phi);
        run.m_top = Some(m_top);
        run.lyapunov = Some(lyapunov_value(phi, m_top, power.beta));
        run.samples = node_samples(cfg, layout, power, &topology);
        run.topology = Some(topology);
    }
    Ok(run)
}

fn node_samples(cfg: &ExperimentConfig, layout: &Layout, power: &PowerConfig, topology: &Topology) -> Vec<NodeSample> {
    let l = layout.num_end_nodes;
    let mut links: Vec<Vec<f64>> = vec![Vec::new(); l];
    for e in &topology.edges {
        if let Some(q) = e.snr_ab {
            links[e.a].push(q);
        }
        if let Some(q) = e.snr_ba {
            links[e.b].push(q);
        }
    }
    (0..l)
        .map(|j| {
            let p = topology.power_dbm[j];
            let p_mw = netweave_core::power::dbm_to_mw(p);
            let nearest = (l..layout.num_nodes())
                .map(|g| layout.distance(j, g))
                .min_by(f64::total_cmp);
            let weakest = links[j].iter().copied().min_by(f64::total_cmp);
            NodeSample {
                power_dbm: p,
                range_m: power.range_m(p_mw),
                received_dbm: nearest.map(|d| friis_received_dbm(p, d, power)),
                remaining_mj: cfg.initial_energy_mj - p_mw * cfg.frame_s,
                phi: links[j]
                    .iter()
                    .map(|&q| error_probability_proxy(q, cfg.iotntop.code_rate, cfg.iotntop.proxy_c))
                    .reduce(f64::max),
                rate: weakest.map(|q| (1.0 + q).log2()),
            }
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn metrics_rows(cfg: &ExperimentConfig, run: &RunResult) -> Vec<MetricsRow> {
    let base = MetricsRow {
        scenario: cfg.scenario.clone(),
        seed: run.key.seed,
        nodes: run.key.nodes,
        gateways: run.network.num_gateways(),
        eta: run.key.eta,
        algorithm: String::new(),
        frames: cfg.frames.name().to_string(),
        a_e: run.a_e,
        rms_m: run.rms_m,
        iterations: None,
        configurations: None,
        exhaustive: None,
        total_power_dbm: None,
        edges: None,
        components: None,
        phi: None,
        m_top: None,
        lyapunov: None,
        mean_rate: None,
    };
    if run.algorithms.is_empty() {
        return vec![base];
    }
    run.algorithms
        .iter()
        .map(|a| {
            let t = a.topology.as_ref();
            MetricsRow {
                algorithm: a.algorithm.name().to_string(),
                iterations: Some(a.iterations),
                configurations: a.configurations,
                exhaustive: Some(a.exhaustive),
                total_power_dbm: t.map(|t| mw_to_dbm(t.total_power_mw())),
                edges: t.map(|t| t.edges.len()),
                components: t.map(|t| t.components.len()),
                phi: a.phi,
                m_top: a.m_top,
                lyapunov: a.lyapunov,
                mean_rate: mean(a.samples.iter().filter_map(|s| s.rate)),
                ..base.clone()
            }
        })
        .collect()
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

#[derive(Serialize)]
struct NodeRow {
    id: usize,
    kind: &'static str,
    x_m: f64,
    y_m: f64,
    est_x_m: Option<f64>,
    est_y_m: Option<f64>,
}

#[derive(Serialize)]
struct EdgeRow {
    a: usize,
    b: usize,
    true_m: f64,
    measured_m: Option<f64>,
}

/// Writes the per-run CSVs into `dir`.
pub fn write_run(cfg: &ExperimentConfig, run: &RunResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let net = &run.network;
    let l = net.num_end_nodes();
    let nodes: Vec<NodeRow> = (0..net.num_nodes())
        .map(|id| {
            let p = net.position(id);
            let est = if id < l {
                run.estimate.as_ref().map(|e| e[id])
            } else {
                Some(p)
            };
            NodeRow {
                id,
                kind: if id < l { "end" } else { "gateway" },
                x_m: p.x,
                y_m: p.y,
                est_x_m: est.map(|e| e.x),
                est_y_m: est.map(|e| e.y),
            }
        })
        .collect();
    write_atomic(&dir.join("nodes.csv"), &csv_bytes(&nodes)?)?;
    let edges: Vec<EdgeRow> = net
        .edges
        .iter()
        .map(|(&(a, b), &d)| EdgeRow {
            a,
            b,
            true_m: d,
            measured_m: run.measurements.get(a, b),
        })
        .collect();
    write_atomic(&dir.join("edges.csv"), &csv_bytes(&edges)?)?;

    for a in &run.algorithms {
        if let Some(t) = &a.topology {
            let mut buf = Vec::new();
            t.write_csv(&mut buf)?;
            write_atomic(&dir.join(format!("topology_{}.csv", a.algorithm)), &buf)?;
        }
        if let Some(trace) = &a.trace {
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            write_atomic(&dir.join(format!("trace_{}.csv", a.algorithm)), &buf)?;
        }
    }
    if run.estimate.is_some() {
        write_atomic(&dir.join("metrics.csv"), &csv_bytes(&metrics_rows(cfg, run))?)?;
    }
    Ok(())
}

/// Runs every key of `cfg`, writing one directory per run plus the
/// aggregated `metrics.csv`. Returns the results in run order.
pub fn run_all(cfg: &ExperimentConfig, stage: Stage, policy: BudgetPolicy) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    let root = cfg.scenario_dir();
    fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    let mut results = Vec::new();
    for key in run_keys(cfg) {
        let name = key.dir_name(cfg.gateways);
        log::info!("run {name}");
        let run = execute(cfg, key, stage, policy).with_context(|| format!("run {name}"))?;
        write_run(cfg, &run, &root.join(&name))?;
        results.push(run);
    }
    if stage != Stage::Generate {
        let rows: Vec<MetricsRow> = results.iter().flat_map(|r| metrics_rows(cfg, r)).collect();
        write_atomic(&root.join("metrics.csv"), &csv_bytes(&rows)?)?;
    }
    Ok(results)
}

pub fn run_dir(cfg: &ExperimentConfig, key: &RunKey) -> PathBuf {
    cfg.scenario_dir().join(key.dir_name(cfg.gateways))
}
