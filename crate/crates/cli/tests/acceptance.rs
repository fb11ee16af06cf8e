//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. The noise grid is computed once and shared by criteria 5, 7 and 10.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netweave_cli::pipeline::{execute, BudgetPolicy, RunKey, RunResult, Stage};
use netweave_cli::summary::iterations_table;
use netweave_cli::{sweep, Algorithm, ExperimentConfig, Frames};
use netweave_core::anchored::{build_chi_problem, solve_sdp_feasibility, SdpOptions};
use netweave_core::graph::{components, ordered};
use netweave_core::localize_patch::{classical_mds, refine_majorization, PatchDistanceMatrix};
use netweave_core::patches::{extract_patches, patch_alignment_graph};
use netweave_core::rateopt::{brute_force_rate, solve_rate_allocation_with};
use netweave_core::sync::{
    build_reflection_matrix, build_rotation_matrix, mirror_patch, solve_reflection_sync, solve_rotation_sync,
    SyncOptions,
};
use netweave_core::topology::{candidate_levels, range_graph};
use netweave_core::{
    brute_force_power, iotntop, lmst_topology, DistanceMeasurements, IoTNTopOptions, Layout, Network, PowerConfig,
    RateDirection, RateInstance,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, side: f64) -> Vec<Point2<f64>> {
    (0..n)
        .map(|_| Point2::new(rng.random_range(0.0..side), rng.random_range(0.0..side)))
        .collect()
}

fn criterion_1() -> Outcome {
    let cfg = ExperimentConfig {
        nodes: vec![20],
        gateways: 3,
        ..ExperimentConfig::default()
    };
    let started = Instant::now();
    let run = execute(
        &cfg,
        RunKey {
            nodes: 20,
            eta: 0.0,
            seed: 42,
        },
        Stage::Localize,
        BudgetPolicy::Fail,
    )
    .map_err(|e| format!("{e:#}"))?;
    let elapsed = started.elapsed();
    let (rms, a_e) = (run.rms_m.unwrap_or(f64::NAN), run.a_e.unwrap_or(f64::NAN));
    check(
        rms < 1e-6 && a_e < 1e-6 && elapsed < Duration::from_secs(5),
        format!("rms {rms:.3e} m, A_e {a_e:.3e}, {:.2} s", elapsed.as_secs_f64()),
    )
}

/// Signs agree with the planted flips up to one global sign, and phases with
/// the planted rotations up to one global angle.
fn plant_and_recover(seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Resample until the patch graph is connected; separate components
    // carry independent gauges.
    let (pts, mut set, graph) = loop {
        let pts = random_points(&mut rng, 50, 100.0);
        let mut edges = Vec::new();
        for a in 0..50 {
            for b in a + 1..50 {
                if (pts[a] - pts[b]).norm() < 35.0 {
                    edges.push((a, b));
                }
            }
        }
        let set = extract_patches(50, edges);
        let graph = patch_alignment_graph(&set, 2);
        if components(graph.num_patches, graph.pairs()).len() == 1 {
            break (pts, set, graph);
        }
    };
    let mut flips = Vec::new();
    let mut angles = Vec::new();
    for p in &mut set.patches {
        let flip = rng.random::<bool>();
        let theta = rng.random_range(0.0..TAU);
        let shift = Vector2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let (s, c) = theta.sin_cos();
        p.local_coords = Some(
            p.members
                .iter()
                .map(|&m| {
                    let x = if flip { -pts[m].x } else { pts[m].x };
                    Point2::new(c * x - s * pts[m].y, s * x + c * pts[m].y) + shift
                })
                .collect(),
        );
        flips.push(if flip { -1i8 } else { 1 });
        angles.push(theta);
    }
    let opts = SyncOptions::default();
    let reflection = build_reflection_matrix(&set, &graph, opts.pearson_threshold);
    let signs = solve_reflection_sync(&reflection, opts.eig_tol, opts.eig_max_iter);
    if signs.components.len() != 1 {
        return Err(format!("seed {seed}: {} reflection components", signs.components.len()));
    }
    let global = signs.signs[0] * flips[0];
    if signs.signs.iter().zip(&flips).any(|(s, f)| s * f != global) {
        return Err(format!("seed {seed}: sign mismatch"));
    }
    // Mirroring conjugates the planted rotation.
    let mut aligned = set.clone();
    let mut planted = Vec::new();
    for ((p, &s), &theta) in aligned.patches.iter_mut().zip(&signs.signs).zip(&angles) {
        if s < 0 {
            mirror_patch(p);
            planted.push(-theta);
        } else {
            planted.push(theta);
        }
    }
    let rotation = build_rotation_matrix(&aligned, &graph);
    let phases = solve_rotation_sync(&rotation, opts.eig_tol, opts.eig_max_iter);
    let total: Vec<f64> = phases.phases.iter().zip(&planted).map(|(a, b)| a + b).collect();
    let worst = total
        .iter()
        .map(|t| {
            let d = (t - total[0]).rem_euclid(TAU);
            d.min(TAU - d)
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for seed in 0..100 {
        match plant_and_recover(seed) {
            Ok(w) if w < 1e-6 => worst = worst.max(w),
            Ok(w) => failures.push(format!("seed {seed}: phase error {w:.3e}")),
            Err(e) => failures.push(e),
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{}/100 seeds recovered, worst phase error {worst:.3e} rad{}",
            100 - failures.len(),
            failures.first().map(|f| format!("; {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut violations = 0;
    for _ in 0..100 {
        let n = rng.random_range(3..30);
        let pts: Vec<Point2<f64>> = (0..n)
            .map(|_| Point2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
            .collect();
        let exact = DMatrix::from_fn(n, n, |i, j| (pts[i] - pts[j]).norm());
        let emb = classical_mds(&PatchDistanceMatrix::from_measured((0..n).collect(), exact.clone()));
        for i in 0..n {
            for j in 0..n {
                worst = worst.max(((emb.coords[i] - emb.coords[j]).norm() - exact[(i, j)]).abs());
            }
        }
        let eta = rng.random_range(0.01..0.3);
        let mut noisy = exact.clone();
        for i in 0..n {
            for j in i + 1..n {
                let d = exact[(i, j)] * (1.0 + eta * rng.random_range(-1.0..1.0));
                noisy[(i, j)] = d;
                noisy[(j, i)] = d;
            }
        }
        let matrix = PatchDistanceMatrix::from_measured((0..n).collect(), noisy);
        let refined = refine_majorization(&classical_mds(&matrix), &matrix, 200, 0.0);
        violations += refined.stress_trace.windows(2).filter(|w| w[1] > w[0]).count();
    }
    check(
        worst < 1e-9 && violations == 0,
        format!("max MDS distance error {worst:.3e}, {violations} stress increases over 100 instances"),
    )
}

fn exact_measurements(
    nodes: &[Point2<f64>],
    gateways: &[Point2<f64>],
    pairs: &[(usize, usize)],
) -> (Network, DistanceMeasurements) {
    let l = nodes.len();
    let at = |k: usize| if k < l { nodes[k] } else { gateways[k - l] };
    let network = Network::from_coords(nodes.to_vec(), gateways.to_vec(), f64::INFINITY, f64::INFINITY);
    let values = pairs
        .iter()
        .map(|&(a, b)| (ordered(a, b), (at(a) - at(b)).norm()))
        .collect();
    (
        network,
        DistanceMeasurements {
            values,
            noise_factor: 0.0,
        },
    )
}

fn trilaterate(g: &[Point2<f64>], d: &[f64]) -> Point2<f64> {
    let row = |k: usize| {
        (
            2.0 * (g[k].x - g[0].x),
            2.0 * (g[k].y - g[0].y),
            d[0] * d[0] - d[k] * d[k] + g[k].coords.norm_squared() - g[0].coords.norm_squared(),
        )
    };
    let (a, b, e) = row(1);
    let (c, dd, f) = row(2);
    let det = a * dd - b * c;
    Point2::new((e * dd - b * f) / det, (a * f - e * c) / det)
}

fn criterion_4() -> Outcome {
    let sdp = |net: &Network, meas: &DistanceMeasurements| {
        build_chi_problem(net, meas)
            .and_then(|p| solve_sdp_feasibility(&p, SdpOptions::default()))
            .map_err(|e| e.to_string())
    };
    let g = [
        Point2::new(0.0, 0.0),
        Point2::new(900.0, 100.0),
        Point2::new(300.0, 800.0),
    ];
    let truth = Point2::new(410.0, 260.0);
    let (net, meas) = exact_measurements(&[truth], &g, &[(0, 1), (0, 2), (0, 3)]);
    let sol = sdp(&net, &meas)?;
    let d: Vec<f64> = g.iter().map(|q| (q - truth).norm()).collect();
    let err = (sol.coords[0] - trilaterate(&g, &d)).norm();

    let g2 = [
        Point2::new(0.0, 0.0),
        Point2::new(1000.0, 0.0),
        Point2::new(500.0, 900.0),
    ];
    let nodes = [
        Point2::new(200.0, 150.0),
        Point2::new(640.0, 300.0),
        Point2::new(480.0, 610.0),
        Point2::new(820.0, 90.0),
    ];
    let mut pairs: Vec<(usize, usize)> = (0..4).flat_map(|i| (4..7).map(move |k| (i, k))).collect();
    pairs.extend([(0, 1), (1, 2), (2, 3)]);
    let (net2, meas2) = exact_measurements(&nodes, &g2, &pairs);
    let sol2 = sdp(&net2, &meas2)?;
    let omega = sol.omega.iter().chain(&sol2.omega).fold(0.0f64, |m, &w| m.max(w));
    check(
        err < 1e-4 && omega < 1e-5,
        format!("trilateration gap {err:.3e} m, max omega {omega:.3e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..50 {
        let inst = random_rate_instance(&mut rng);
        for dir in [RateDirection::MaximizeRate, RateDirection::MinimizeObjective] {
            let kkt = solve_rate_allocation_with(&inst, dir).map_err(|e| format!("instance {k}: {e}"))?;
            let bf = brute_force_rate(&inst, 0.05, dir).map_err(|e| format!("instance {k}: {e}"))?;
            // Positive means exhaustive search found something better.
            let margin = match dir {
                RateDirection::MaximizeRate => bf.objective - kkt.objective,
                RateDirection::MinimizeObjective => kkt.objective - bf.objective,
            };
            worst = worst.max(margin);
        }
    }
    check(
        worst <= 1e-9,
        format!("50 instances, both directions, best brute-force margin {worst:.3e}"),
    )
}

fn random_rate_instance(rng: &mut ChaCha8Rng) -> RateInstance {
    let n = rng.random_range(2..=4);
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|v| (0..n).filter(move |&a| a != v).map(move |a| (v, a)))
        .collect();
    for k in (1..pairs.len()).rev() {
        pairs.swap(k, rng.random_range(0..=k));
    }
    let first_out = pairs.iter().position(|&(v, _)| v == 0).expect("source has an out-arc");
    pairs.swap(0, first_out);
    pairs.truncate(rng.random_range(1..=pairs.len().min(5)));
    let mut capacity = vec![vec![0.0; n]; n];
    let mut psi = vec![0.0; n];
    for &(v, a) in &pairs {
        let cap = rng.random_range(1..=4i64);
        let flow = rng.random_range(0..=cap) as f64 * 0.05;
        capacity[v][a] = cap as f64 * 0.05;
        psi[v] += flow;
        psi[a] -= flow;
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

fn grid_config(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        scenario: "noise_grid".into(),
        nodes: vec![20, 50, 100],
        etas: vec![0.0, 0.1, 0.3, 0.5, 0.7],
        seeds: (0..5).collect(),
        algorithms: vec![Algorithm::IoTNTop, Algorithm::Lmst, Algorithm::BruteForce],
        frames: Frames::Estimated,
        out: out.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

fn criterion_5(cfg: &ExperimentConfig, grid: &[RunResult]) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    if let Some(r) = grid.iter().find(|r| !r.a_e.is_some_and(f64::is_finite)) {
        ok = false;
        notes.push(format!("non-finite A_e at {:?}", r.key));
    }
    for &n in &cfg.nodes {
        let means: Vec<f64> = cfg
            .etas
            .iter()
            .map(|&eta| {
                let v: Vec<f64> = grid
                    .iter()
                    .filter(|r| r.key.nodes == n && r.key.eta == eta)
                    .filter_map(|r| r.a_e)
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect();
        let min = means.iter().cloned().fold(f64::INFINITY, f64::min);
        ok &= means[0] <= min;
        notes.push(format!(
            "n={n}: A_e {}",
            means.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join("/")
        ));
    }
    let slice: Duration = grid.iter().filter(|r| r.key.nodes == 100).map(|r| r.elapsed).sum();
    let longest = grid
        .iter()
        .filter(|r| r.key.nodes == 100)
        .map(|r| r.elapsed)
        .max()
        .unwrap_or_default();
    ok &= slice < Duration::from_secs(60);
    notes.push(format!(
        "n=100 grid slice {:.1} s (longest run {:.2} s)",
        slice.as_secs_f64(),
        longest.as_secs_f64()
    ));
    check(ok, notes.join("; "))
}

fn criterion_7(cfg: &ExperimentConfig, grid: &[RunResult]) -> Outcome {
    let power = cfg.power_config();
    let mut traces = 0;
    let mut problems = Vec::new();
    for r in grid {
        for a in r.algorithms.iter().filter(|a| a.algorithm == Algorithm::IoTNTop) {
            let (Some(trace), Some(top)) = (&a.trace, &a.topology) else {
                problems.push(format!("{:?}: missing trace", r.key));
                continue;
            };
            traces += 1;
            for w in trace.records.windows(2) {
                if w[1].pass == w[0].pass && w[1].accepted_steps > 0 && !(w[1].lyapunov < w[0].lyapunov) {
                    problems.push(format!("{:?}: V did not drop at round {}", r.key, w[1].iteration));
                }
            }
            if !(trace.final_delta() <= cfg.iotntop.epsilon) {
                problems.push(format!("{:?}: terminal delta {}", r.key, trace.final_delta()));
            }
            if top.link_qualities().iter().any(|&q| q < power.zeta) {
                problems.push(format!("{:?}: link below zeta", r.key));
            }
            if top
                .power_dbm
                .iter()
                .any(|&p| p < power.p_tmin_dbm || p > power.rho_tmax_dbm)
            {
                problems.push(format!("{:?}: power outside bounds", r.key));
            }
        }
    }
    check(
        problems.is_empty() && traces == grid.len(),
        format!(
            "{traces} traces checked{}",
            problems.first().map(|p| format!("; {p}")).unwrap_or_default()
        ),
    )
}

fn criterion_8(out: &Path) -> Outcome {
    let cfg = ExperimentConfig {
        scenario: "iterations".into(),
        nodes: vec![20, 50, 100],
        seeds: (0..10).collect(),
        algorithms: vec![Algorithm::IoTNTop, Algorithm::BruteForce],
        out: out.to_path_buf(),
        ..ExperimentConfig::default()
    };
    let results = sweep(&cfg).map_err(|e| format!("{e:#}"))?;
    let table = iterations_table(&cfg, &results);
    let mut ok = true;
    let mut notes = Vec::new();
    for &n in &cfg.nodes {
        let get = |alg| {
            table
                .iter()
                .find(|r| r.algorithm == alg && r.nodes == n)
                .map(|r| r.mean)
        };
        match (get(Algorithm::IoTNTop), get(Algorithm::BruteForce)) {
            (Some(it), Some(bf)) => {
                ok &= it < bf;
                notes.push(format!("n={n}: {it:.1} vs {bf:.3e}"));
            }
            _ => {
                ok = false;
                notes.push(format!("n={n}: missing row"));
            }
        }
    }
    check(
        ok,
        format!(
            "IoTNTop iterations vs brute-force configurations, 10 seeds: {}",
            notes.join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = PowerConfig {
        r_max_m: 400.0,
        ..PowerConfig::default()
    };
    for k in 0..50 {
        let l = rng.random_range(5..30);
        let s = rng.random_range(1..=3);
        let layout = Layout::new(&random_points(&mut rng, l, 1000.0), &random_points(&mut rng, s, 1000.0));
        let range: Vec<(usize, usize)> = range_graph(&layout, &cfg).iter().map(|e| (e.a, e.b)).collect();
        let lmst = lmst_topology(&layout, &cfg).map_err(|e| e.to_string())?;
        if let Some(e) = lmst.edges.iter().find(|e| !range.contains(&(e.a, e.b))) {
            return Err(format!("instance {k}: LMST edge {:?} outside range graph", (e.a, e.b)));
        }
        if lmst.components.len() != components(layout.num_nodes(), range.iter().copied()).len() {
            return Err(format!("instance {k}: LMST changed connectivity"));
        }
    }
    let opts = IoTNTopOptions::default();
    let free = PowerConfig::default();
    let mut worst = f64::INFINITY;
    for k in 0..50 {
        let l = rng.random_range(1..=4);
        let s = rng.random_range(1..=5 - l);
        let layout = Layout::new(&random_points(&mut rng, l, 2000.0), &random_points(&mut rng, s, 2000.0));
        let (top, _) = iotntop(&layout, &free, &opts).map_err(|e| e.to_string())?;
        let bf = brute_force_power(&layout, &free, &opts, &candidate_levels(&layout, &free), 1_000_000)
            .map_err(|e| e.to_string())?;
        let margin = top.total_power_mw() - bf.topology.total_power_mw();
        if margin < -1e-12 * bf.topology.total_power_mw() {
            return Err(format!("instance {k}: IoTNTop {} mW below brute force", -margin));
        }
        worst = worst.min(margin);
    }
    Ok(format!(
        "LMST subgraph and connectivity on 50 instances; IoTNTop minus brute-force power >= {worst:.3e} mW on 50 instances"
    ))
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_10(first: &Path, second: &Path) -> Outcome {
    let cfg = grid_config(second);
    sweep(&cfg).map_err(|e| format!("{e:#}"))?;
    let (a, b) = (files_under(first), files_under(second));
    if a != b {
        return Err(format!("file sets differ: {} vs {}", a.len(), b.len()));
    }
    for f in &a {
        let x = std::fs::read(first.join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(second.join(f)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{} differs", f.display()));
        }
    }
    check(!a.is_empty(), format!("{} CSV files byte-identical", a.len()))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let cfg = grid_config(&first);
    let grid = sweep(&cfg).map_err(|e| format!("{e:#}"));

    let from_grid = |f: &dyn Fn(&[RunResult]) -> Outcome| match &grid {
        Ok(g) => f(g),
        Err(e) => Err(format!("grid failed: {e}")),
    };
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "zero-noise end-to-end recovery", criterion_1()),
        (2, "synchronization plant-and-recover", criterion_2()),
        (3, "MDS and majorization", criterion_3()),
        (4, "SDP anchoring", criterion_4()),
        (5, "noise sweep", from_grid(&|g| criterion_5(&cfg, g))),
        (6, "KKT vs brute force", criterion_6()),
        (7, "IoTNTop convergence", from_grid(&|g| criterion_7(&cfg, g))),
        (8, "iteration ordering", criterion_8(&tmp.path().join("iterations"))),
        (9, "baseline sanity", criterion_9()),
        (10, "determinism", from_grid(&|_| criterion_10(&first, &second))),
    ];
    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n:>2} ({name}): {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
