//! One-hop patches over end-nodes and the graph of alignable patch pairs.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::Point2;

use crate::error::Result;
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub anchor: NodeId,
    /// Sorted, distinct; always contains `anchor`.
    pub members: Vec<NodeId>,
    /// One point per member, in the patch's own frame.
    pub local_coords: Option<Vec<Point2<f64>>>,
}

impl Patch {
    pub fn position_of(&self, node: NodeId) -> Option<usize> {
        self.members.binary_search(&node).ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Local coordinate of `node`, if both the member and the embedding exist.
    pub fn local(&self, node: NodeId) -> Option<Point2<f64>> {
        let idx = self.position_of(node)?;
        self.local_coords.as_ref().map(|c| c[idx])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    /// Patch `i` is anchored at end-node `i`.
    pub patches: Vec<Patch>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchGraph {
    pub num_patches: usize,
    pub min_overlap: usize,
    /// Shared members keyed by ordered patch pair `(a, j)`, `a < j`.
    pub adjacency: BTreeMap<(usize, usize), Vec<NodeId>>,
}

impl PatchGraph {
    pub fn shared(&self, a: usize, j: usize) -> Option<&[NodeId]> {
        let key = if a < j { (a, j) } else { (j, a) };
        self.adjacency.get(&key).map(Vec::as_slice)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.keys().copied()
    }

    /// Writes `a,j,shared` rows.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "a,j,shared")?;
        for (&(a, j), shared) in &self.adjacency {
            writeln!(out, "{a},{j},{}", shared.len())?;
        }
        Ok(())
    }
}

/// One patch per node in `0..num_nodes`: the node plus its neighbours.
pub fn extract_patches(num_nodes: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> PatchSet {
    let mut members: Vec<Vec<NodeId>> = (0..num_nodes).map(|i| vec![i]).collect();
    for (a, b) in edges {
        if a == b || a >= num_nodes || b >= num_nodes {
            continue;
        }
        members[a].push(b);
        members[b].push(a);
    }
    let patches = members
        .into_iter()
        .enumerate()
        .map(|(anchor, mut m)| {
            m.sort_unstable();
            m.dedup();
            Patch {
                anchor,
                members: m,
                local_coords: None,
            }
        })
        .collect();
    PatchSet { patches }
}

/// Sorted intersection of the two member lists.
pub fn shared_nodes(a: &Patch, b: &Patch) -> Vec<NodeId> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.members.len() && j < b.members.len() {
        match a.members[i].cmp(&b.members[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a.members[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Links every pair of patches sharing more than `k` members.
///
/// Co-membership is counted through a node-to-patch index, so only pairs that
/// share at least one node are ever visited.
pub fn patch_alignment_graph(set: &PatchSet, k: usize) -> PatchGraph {
    let mut containing: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (p, patch) in set.patches.iter().enumerate() {
        for &m in &patch.members {
            containing.entry(m).or_default().push(p);
        }
    }
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for holders in containing.values() {
        for (x, &a) in holders.iter().enumerate() {
            for &j in &holders[x + 1..] {
                *counts.entry((a, j)).or_default() += 1;
            }
        }
    }
    let adjacency = counts
        .into_iter()
        .filter(|&(_, c)| c > k)
        .map(|((a, j), _)| ((a, j), shared_nodes(&set.patches[a], &set.patches[j])))
        .collect();
    PatchGraph {
        num_patches: set.patches.len(),
        min_overlap: k,
        adjacency,
    }
}
