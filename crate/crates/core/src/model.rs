//! Synthetic networks: node placement, range graphs and measurement noise.
//!
//! Node ids are global: end-nodes occupy `0..l` and gateways `l..l+s`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::ordered;
use crate::NodeId;

/// Deployment region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// Axis-aligned rectangle `[0, width] x [0, height]`.
    Rect { width: f64, height: f64 },
    /// Annulus centred on the origin, sampled uniformly in area. The first
    /// gateway sits at the centre.
    Annulus { inner: f64, outer: f64 },
}

impl Region {
    pub fn square(side: f64) -> Self {
        Region::Rect {
            width: side,
            height: side,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Region::Rect { width, height } => width > 0.0 && height > 0.0,
            Region::Annulus { inner, outer } => inner >= 0.0 && outer > inner,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("region {self:?} has zero area")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point2<f64> {
        match *self {
            Region::Rect { width, height } => Point2::new(rng.random::<f64>() * width, rng.random::<f64>() * height),
            Region::Annulus { inner, outer } => {
                let u: f64 = rng.random();
                let r = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                Point2::new(r * theta.cos(), r * theta.sin())
            }
        }
    }
}

/// How the end-node communication range is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommRange {
    /// A fixed range in meters (`f64::INFINITY` links every pair).
    Fixed(f64),
    /// The range whose end-node graph has a mean degree inside `[min, max]`.
    MeanDegree { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub num_end_nodes: usize,
    pub num_gateways: usize,
    pub region: Region,
    pub comm_range: CommRange,
    /// Range for any pair involving a gateway; `None` reuses the end-node range.
    pub gateway_range: Option<f64>,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_end_nodes == 0 {
            return Err(Error::InvalidSpec("at least one end-node is required".into()));
        }
        self.region.validate()?;
        match self.comm_range {
            CommRange::Fixed(r) if !(r > 0.0) => {
                return Err(Error::InvalidSpec(format!("comm range {r} must be positive")))
            }
            CommRange::MeanDegree { min, max } if !(min > 0.0 && max >= min) => {
                return Err(Error::InvalidSpec(format!("degree band [{min}, {max}] is empty")))
            }
            _ => {}
        }
        if let Some(g) = self.gateway_range {
            if !(g > 0.0) {
                return Err(Error::InvalidSpec(format!("gateway range {g} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub end_nodes: Vec<Point2<f64>>,
    pub gateways: Vec<Point2<f64>>,
    pub comm_range: f64,
    pub gateway_range: f64,
    /// True distances keyed by ordered id pair.
    pub edges: BTreeMap<(NodeId, NodeId), f64>,
}

impl Network {
    /// Builds the edge set from explicit coordinates and ranges.
    pub fn from_coords(
        end_nodes: Vec<Point2<f64>>,
        gateways: Vec<Point2<f64>>,
        comm_range: f64,
        gateway_range: f64,
    ) -> Self {
        let l = end_nodes.len();
        let all: Vec<Point2<f64>> = end_nodes.iter().chain(gateways.iter()).copied().collect();
        let reach = comm_range.max(gateway_range);
        let mut edges = BTreeMap::new();
        for (a, b) in build_edges(&all, reach) {
            let d = (all[a] - all[b]).norm();
            let limit = if a < l && b < l { comm_range } else { gateway_range };
            if d <= limit {
                edges.insert((a, b), d);
            }
        }
        Network {
            end_nodes,
            gateways,
            comm_range,
            gateway_range,
            edges,
        }
    }

    pub fn num_end_nodes(&self) -> usize {
        self.end_nodes.len()
    }

    pub fn num_gateways(&self) -> usize {
        self.gateways.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.end_nodes.len() + self.gateways.len()
    }

    pub fn is_gateway(&self, id: NodeId) -> bool {
        id >= self.end_nodes.len()
    }

    pub fn position(&self, id: NodeId) -> Point2<f64> {
        let l = self.end_nodes.len();
        if id < l {
            self.end_nodes[id]
        } else {
            self.gateways[id - l]
        }
    }

    /// All node positions, end-nodes first.
    pub fn positions(&self) -> Vec<Point2<f64>> {
        self.end_nodes.iter().chain(self.gateways.iter()).copied().collect()
    }

    pub fn true_distance(&self, a: NodeId, b: NodeId) -> Option<f64> {
        self.edges.get(&ordered(a, b)).copied()
    }

    /// Mean degree of the end-node subgraph.
    pub fn mean_end_degree(&self) -> f64 {
        let l = self.end_nodes.len();
        let m = self.edges.keys().filter(|&&(a, b)| a < l && b < l).count();
        2.0 * m as f64 / l as f64
    }
}

/// Places nodes and builds the range graph.
pub fn generate_network(spec: &NetworkSpec) -> Result<Network> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let end_nodes: Vec<Point2<f64>> = (0..spec.num_end_nodes).map(|_| spec.region.sample(&mut rng)).collect();
    let gateways: Vec<Point2<f64>> = (0..spec.num_gateways)
        .map(|g| match spec.region {
            Region::Annulus { .. } if g == 0 => Point2::origin(),
            _ => spec.region.sample(&mut rng),
        })
        .collect();
    let comm_range = match spec.comm_range {
        CommRange::Fixed(r) => r,
        CommRange::MeanDegree { min, max } => range_for_mean_degree(&end_nodes, min, max),
    };
    let gateway_range = spec.gateway_range.unwrap_or(comm_range);
    Ok(Network::from_coords(end_nodes, gateways, comm_range, gateway_range))
}

/// Smallest range whose unit-disk graph over `points` has a mean degree at the
/// centre of `[min, max]`.
///
/// Mean degree is a step function of the range with jumps at the pairwise
/// distances, so the answer is an order statistic of the sorted distances.
/// When even the complete graph falls short, the largest distance is returned.
pub fn range_for_mean_degree(points: &[Point2<f64>], min: f64, max: f64) -> f64 {
    let n = points.len();
    let mut dists: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            dists.push((points[a] - points[b]).norm());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let target = 0.5 * (min + max);
    let want = ((target * n as f64 / 2.0).round() as usize).clamp(1, dists.len());
    dists[want - 1]
}

/// Pairs `(a, b)`, `a < b`, whose distance is at most `range`.
///
/// Uses a uniform grid with cell size `range`, so only neighbouring cells are
/// compared. Infinite ranges return every pair.
pub fn build_edges(points: &[Point2<f64>], range: f64) -> BTreeSet<(NodeId, NodeId)> {
    let n = points.len();
    let mut out = BTreeSet::new();
    if !range.is_finite() {
        for a in 0..n {
            for b in a + 1..n {
                out.insert((a, b));
            }
        }
        return out;
    }
    if range <= 0.0 || n < 2 {
        return out;
    }
    let cell = |p: &Point2<f64>| ((p.x / range).floor() as i64, (p.y / range).floor() as i64);
    let mut grid: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    for (i, p) in points.iter().enumerate() {
        let (cx, cy) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(cx + dx, cy + dy)) {
                    for &j in bucket {
                        if j > i && (points[j] - p).norm() <= range {
                            out.insert((i, j));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Noisy distances `d = δ + ε` with `ε ~ U[-ηδ, ηδ]`, one draw per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMeasurements {
    pub values: BTreeMap<(NodeId, NodeId), f64>,
    pub noise_factor: f64,
}

impl DistanceMeasurements {
    pub fn get(&self, a: NodeId, b: NodeId) -> Option<f64> {
        self.values.get(&ordered(a, b)).copied()
    }

    pub fn contains(&self, a: NodeId, b: NodeId) -> bool {
        self.values.contains_key(&ordered(a, b))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn perturb_distances(network: &Network, eta: f64, seed: u64) -> Result<DistanceMeasurements> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: format!("{eta} is outside [0, 1]"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = network
        .edges
        .iter()
        .map(|(&pair, &delta)| {
            let u: f64 = rng.random_range(-1.0..=1.0);
            (pair, delta + eta * u * delta)
        })
        .collect();
    Ok(DistanceMeasurements {
        values,
        noise_factor: eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(l: usize, s: usize, seed: u64) -> NetworkSpec {
        NetworkSpec {
            num_end_nodes: l,
            num_gateways: s,
            region: Region::square(4000.0),
            comm_range: CommRange::MeanDegree { min: 14.0, max: 20.0 },
            gateway_range: None,
            seed,
        }
    }

    #[test]
    fn full_scale_network_places_all_nodes() {
        let net = generate_network(&spec(100, 6, 1)).unwrap();
        assert_eq!(net.num_nodes(), 106);
        for p in net.positions() {
            assert!((0.0..=4000.0).contains(&p.x) && (0.0..=4000.0).contains(&p.y));
        }
        let deg = net.mean_end_degree();
        assert!((14.0..=20.0).contains(&deg), "mean degree {deg}");
    }

    #[test]
    fn single_pair_with_infinite_range() {
        let s = NetworkSpec {
            num_end_nodes: 1,
            num_gateways: 1,
            region: Region::square(10.0),
            comm_range: CommRange::Fixed(f64::INFINITY),
            gateway_range: None,
            seed: 3,
        };
        let net = generate_network(&s).unwrap();
        assert_eq!(net.edges.len(), 1);
        let d = (net.end_nodes[0] - net.gateways[0]).norm();
        assert_eq!(net.true_distance(0, 1), Some(d));
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate_network(&spec(30, 3, 9)).unwrap();
        let b = generate_network(&spec(30, 3, 9)).unwrap();
        assert_eq!(a, b);
        let c = generate_network(&spec(30, 3, 10)).unwrap();
        assert_ne!(a.end_nodes, c.end_nodes);
    }

    #[test]
    fn zero_area_is_rejected() {
        let mut s = spec(5, 1, 0);
        s.region = Region::Rect {
            width: 0.0,
            height: 5.0,
        };
        assert!(matches!(generate_network(&s), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn annulus_points_stay_in_ring() {
        let s = NetworkSpec {
            region: Region::Annulus {
                inner: 100.0,
                outer: 300.0,
            },
            ..spec(200, 2, 4)
        };
        let net = generate_network(&s).unwrap();
        assert_eq!(net.gateways[0], Point2::origin());
        for p in &net.end_nodes {
            let r = p.coords.norm();
            assert!((100.0..=300.0 + 1e-9).contains(&r));
        }
    }

    #[test]
    fn range_threshold_is_inclusive() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)];
        assert!(build_edges(&pts, 2.0).contains(&(0, 1)));
        assert!(build_edges(&pts, 1.0).contains(&(0, 1)));
        assert!(build_edges(&pts, 0.5).is_empty());
    }

    #[test]
    fn edges_match_exhaustive_scan() {
        let net = generate_network(&spec(20, 0, 77)).unwrap();
        for range in [50.0, 400.0, 1200.0, 3000.0] {
            let fast = build_edges(&net.end_nodes, range);
            let mut slow = BTreeSet::new();
            for a in 0..20 {
                for b in a + 1..20 {
                    let dx = net.end_nodes[a].x - net.end_nodes[b].x;
                    let dy = net.end_nodes[a].y - net.end_nodes[b].y;
                    if (dx * dx + dy * dy).sqrt() <= range {
                        slow.insert((a, b));
                    }
                }
            }
            assert_eq!(fast, slow, "range {range}");
        }
    }

    #[test]
    fn zero_noise_is_exact() {
        let net = generate_network(&spec(40, 4, 2)).unwrap();
        let m = perturb_distances(&net, 0.0, 5).unwrap();
        for (k, d) in &m.values {
            assert_eq!(*d, net.edges[k]);
        }
    }

    #[test]
    fn noise_respects_bound() {
        let net = generate_network(&spec(60, 4, 2)).unwrap();
        let m = perturb_distances(&net, 0.7, 5).unwrap();
        for (k, d) in &m.values {
            let delta = net.edges[k];
            assert!((d - delta).abs() <= 0.7 * delta * (1.0 + 1e-12));
            assert!(*d > 0.0);
        }
        assert_eq!(m.get(3, 1), m.get(1, 3));
    }

    #[test]
    fn noise_outside_unit_interval_is_rejected() {
        let net = generate_network(&spec(5, 1, 2)).unwrap();
        assert!(perturb_distances(&net, 1.2, 0).is_err());
        assert!(perturb_distances(&net, -0.1, 0).is_err());
    }

    #[test]
    fn noise_is_unbiased() {
        // One unit-length edge resampled with independent seeds: the mean of
        // epsilon should sit within three standard errors of zero.
        let net = Network::from_coords(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)], vec![], 2.0, 2.0);
        let eta = 0.3;
        let n = 10_000;
        let samples: Vec<f64> = (0..n)
            .map(|s| perturb_distances(&net, eta, s).unwrap().get(0, 1).unwrap() - 1.0)
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
    }
}
