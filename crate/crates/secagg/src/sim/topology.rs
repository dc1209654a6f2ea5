//! Disc-radio network topology over uniformly placed nodes.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::config::ScenarioConfig;
use crate::protocol::NodeId;

/// Node positions and the symmetric adjacency induced by the transmission
/// range. Connectivity is reported, not enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<(f64, f64)>,
    tx_range_m: f64,
    neighbors: Vec<BTreeSet<NodeId>>,
}

impl Topology {
    /// Builds the adjacency for explicit positions: nodes are linked when
    /// their Euclidean distance is at most `tx_range_m`.
    pub fn from_positions(positions: Vec<(f64, f64)>, tx_range_m: f64) -> Self {
        let n = positions.len();
        let mut neighbors = vec![BTreeSet::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = positions[i].0 - positions[j].0;
                let dy = positions[i].1 - positions[j].1;
                if (dx * dx + dy * dy).sqrt() <= tx_range_m {
                    neighbors[i].insert(NodeId(j as u32));
                    neighbors[j].insert(NodeId(i as u32));
                }
            }
        }
        Self { positions, tx_range_m, neighbors }
    }

    /// Samples node positions i.i.d. uniform over the area.
    pub fn generate(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Self {
        let positions = (0..cfg.n_nodes)
            .map(|_| {
                (
                    rng.random::<f64>() * cfg.area_width_m,
                    rng.random::<f64>() * cfg.area_height_m,
                )
            })
            .collect();
        Self::from_positions(positions, cfg.tx_range_m)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, id: NodeId) -> (f64, f64) {
        self.positions[id.index()]
    }

    pub fn tx_range_m(&self) -> f64 {
        self.tx_range_m
    }

    pub fn neighbors(&self, id: NodeId) -> &BTreeSet<NodeId> {
        &self.neighbors[id.index()]
    }

    /// Two-hop table for one node: every neighbor mapped to that neighbor's
    /// own one-hop set, as handed to the node at startup.
    pub fn two_hop_map(&self, id: NodeId) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
        self.neighbors[id.index()]
            .iter()
            .map(|n| (*n, self.neighbors[n.index()].clone()))
            .collect()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.positions.is_empty() {
            return 0.0;
        }
        self.neighbors.iter().map(|n| n.len()).sum::<usize>() as f64 / self.positions.len() as f64
    }

    /// Connected component sizes, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let n = self.positions.len();
        let mut seen = vec![false; n];
        let mut sizes = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut size = 0;
            while let Some(v) = stack.pop() {
                size += 1;
                for nb in &self.neighbors[v] {
                    if !seen[nb.index()] {
                        seen[nb.index()] = true;
                        stack.push(nb.index());
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    pub fn largest_component_fraction(&self) -> f64 {
        match self.component_sizes().first() {
            Some(largest) => *largest as f64 / self.positions.len() as f64,
            None => 0.0,
        }
    }
}
