use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

const DEFAULT_RGG_RETRIES: usize = 200;

/// How to build an agent graph. Agents are indexed from 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    Edges {
        n: usize,
        edges: Vec<(usize, usize)>,
    },
    Ring {
        n: usize,
    },
    Full {
        n: usize,
    },
    /// Points uniform in the unit square, linked when closer than `radius`.
    /// Redrawn until the graph is connected or `max_retries` is exhausted.
    RandomGeometric {
        n: usize,
        radius: f64,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_retries: Option<usize>,
    },
}

impl TopologySpec {
    pub fn n_agents(&self) -> usize {
        match *self {
            TopologySpec::Edges { n, .. }
            | TopologySpec::Ring { n }
            | TopologySpec::Full { n }
            | TopologySpec::RandomGeometric { n, .. } => n,
        }
    }

    pub fn build(&self) -> Result<Topology> {
        match self {
            TopologySpec::Edges { n, edges } => Topology::from_edges(*n, edges),
            TopologySpec::Ring { n } => Topology::ring(*n),
            TopologySpec::Full { n } => Topology::full(*n),
            TopologySpec::RandomGeometric {
                n,
                radius,
                seed,
                max_retries,
            } => Topology::random_geometric(*n, *radius, *seed, max_retries.unwrap_or(DEFAULT_RGG_RETRIES)),
        }
    }
}

/// Undirected connected graph with self-inclusive neighborhoods.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Topology {
    n_agents: usize,
    /// Sorted, always contains the agent itself.
    neighborhoods: Vec<Vec<usize>>,
    /// Undirected edges `(a, b)` with `a < b`, sorted.
    edges: Vec<(usize, usize)>,
    /// Node positions when generated geometrically.
    #[serde(skip_serializing_if = "Option::is_none")]
    positions: Option<Vec<(f64, f64)>>,
}

impl Topology {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyNetwork);
        }
        let mut undirected = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidTopology(format!(
                    "edge ({a}, {b}) references an agent outside 0..{n}"
                )));
            }
            if a != b {
                undirected.push((a.min(b), a.max(b)));
            }
        }
        undirected.sort_unstable();
        undirected.dedup();

        let mut neighborhoods: Vec<Vec<usize>> = (0..n).map(|k| vec![k]).collect();
        for &(a, b) in &undirected {
            neighborhoods[a].push(b);
            neighborhoods[b].push(a);
        }
        for nb in &mut neighborhoods {
            nb.sort_unstable();
        }
        let topo = Self {
            n_agents: n,
            neighborhoods,
            edges: undirected,
            positions: None,
        };
        if !topo.is_connected() {
            return Err(Error::UnconnectedTopology(format!(
                "{} agents, {} edges",
                n,
                topo.edges.len()
            )));
        }
        Ok(topo)
    }

    pub fn ring(n: usize) -> Result<Self> {
        let edges: Vec<_> = match n {
            0 | 1 => Vec::new(),
            _ => (0..n).map(|k| (k, (k + 1) % n)).collect(),
        };
        Self::from_edges(n, &edges)
    }

    pub fn full(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.push((a, b));
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn random_geometric(n: usize, radius: f64, seed: u64, max_retries: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyNetwork);
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidTopology(format!("radius must be positive, got {radius}")));
        }
        let mut rng = rng::stream(seed, 0, Purpose::Topology);
        for _ in 0..max_retries.max(1) {
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    let dx = pts[a].0 - pts[b].0;
                    let dy = pts[a].1 - pts[b].1;
                    if dx * dx + dy * dy <= radius * radius {
                        edges.push((a, b));
                    }
                }
            }
            match Self::from_edges(n, &edges) {
                Ok(mut topo) => {
                    topo.positions = Some(pts);
                    return Ok(topo);
                }
                Err(Error::UnconnectedTopology(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::UnconnectedTopology(format!(
            "no connected geometric graph with n = {n}, radius = {radius} after {max_retries} draws"
        )))
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// `𝒩_k`, sorted and including `k`.
    pub fn neighborhood(&self, k: usize) -> &[usize] {
        &self.neighborhoods[k]
    }

    /// `|𝒩_k|`.
    pub fn degree(&self, k: usize) -> usize {
        self.neighborhoods[k].len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn positions(&self) -> Option<&[(f64, f64)]> {
        self.positions.as_deref()
    }

    pub fn contains(&self, l: usize, k: usize) -> bool {
        self.neighborhoods[k].binary_search(&l).is_ok()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_agents];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(k) = queue.pop_front() {
            for &l in &self.neighborhoods[k] {
                if !seen[l] {
                    seen[l] = true;
                    count += 1;
                    queue.push_back(l);
                }
            }
        }
        count == self.n_agents
    }
}
