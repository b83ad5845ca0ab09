//! Road network and the routing agent.
//!
//! Travel times are static per scenario, so shortest-path rows are computed
//! lazily with Dijkstra and cached for the lifetime of the network. The cache
//! is invisible to callers: every query returns the same answer whether or not
//! the row was already computed.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer seconds. All scheduling arithmetic is done in this unit.
pub type Seconds = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    pub length_m: f64,
    pub travel_time_s: Seconds,
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("failed to read network file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed network document: {0}")]
    Parse(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("link {from} -> {to} references unknown node {missing}")]
    DanglingEndpoint {
        from: NodeId,
        to: NodeId,
        missing: NodeId,
    },
    #[error("link {from} -> {to} has non-positive travel time {travel_time_s}")]
    NonPositiveTravelTime {
        from: NodeId,
        to: NodeId,
        travel_time_s: Seconds,
    },
    #[error("link {from} -> {to} has non-positive length {length_m}")]
    NonPositiveLength { from: NodeId, to: NodeId, length_m: f64 },
    #[error("link {0} -> {0} is a self loop")]
    SelfLoop(NodeId),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
}

/// On-disk layout of a network document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub links: Vec<Link>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: NodeId,
}

type DistRow = Vec<Option<Seconds>>;

#[derive(Debug)]
pub struct RoadNetwork {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    links: Vec<Link>,
    // Outgoing/incoming link indices per dense node index, sorted by the far
    // endpoint id so iteration order is deterministic.
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    from_rows: Vec<OnceLock<DistRow>>,
    to_rows: Vec<OnceLock<DistRow>>,
}

impl RoadNetwork {
    pub fn new(node_ids: Vec<NodeId>, links: Vec<Link>) -> Result<Self, NetworkError> {
        let mut seen = BTreeSet::new();
        for id in &node_ids {
            if !seen.insert(*id) {
                return Err(NetworkError::DuplicateNode(*id));
            }
        }
        let nodes: Vec<NodeId> = seen.into_iter().collect();
        let index: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, id)| (*id, i)).collect();

        for link in &links {
            for end in [link.from, link.to] {
                if !index.contains_key(&end) {
                    return Err(NetworkError::DanglingEndpoint {
                        from: link.from,
                        to: link.to,
                        missing: end,
                    });
                }
            }
            if link.from == link.to {
                return Err(NetworkError::SelfLoop(link.from));
            }
            if link.travel_time_s <= 0 {
                return Err(NetworkError::NonPositiveTravelTime {
                    from: link.from,
                    to: link.to,
                    travel_time_s: link.travel_time_s,
                });
            }
            if link.length_m.is_nan() || link.length_m <= 0.0 {
                return Err(NetworkError::NonPositiveLength {
                    from: link.from,
                    to: link.to,
                    length_m: link.length_m,
                });
            }
        }

        let n = nodes.len();
        let mut outgoing = vec![Vec::new(); n];
        let mut incoming = vec![Vec::new(); n];
        for (k, link) in links.iter().enumerate() {
            outgoing[index[&link.from]].push(k);
            incoming[index[&link.to]].push(k);
        }
        for list in &mut outgoing {
            list.sort_by_key(|&k| (links[k].to, links[k].travel_time_s, k));
        }
        for list in &mut incoming {
            list.sort_by_key(|&k| (links[k].from, links[k].travel_time_s, k));
        }

        Ok(Self {
            nodes,
            index,
            links,
            outgoing,
            incoming,
            from_rows: (0..n).map(|_| OnceLock::new()).collect(),
            to_rows: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn from_document(doc: NetworkDocument) -> Result<Self, NetworkError> {
        Self::new(doc.nodes.into_iter().map(|n| n.id).collect(), doc.links)
    }

    /// Parses a TOML network document.
    pub fn from_toml_str(text: &str) -> Result<Self, NetworkError> {
        let doc: NetworkDocument =
            toml::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path).map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            nodes: self.nodes.iter().map(|&id| NodeRecord { id }).collect(),
            links: self.links.clone(),
        }
    }

    /// A `rows` x `cols` grid with a pair of opposing links between every two
    /// orthogonal neighbours. Node ids are `row * cols + col`.
    pub fn grid(rows: u32, cols: u32, link_length_m: f64, link_time_s: Seconds) -> Self {
        let id = |r: u32, c: u32| NodeId(r * cols + c);
        let nodes = (0..rows * cols).map(NodeId).collect();
        let mut links = Vec::new();
        let mut both = |a: NodeId, b: NodeId| {
            for (from, to) in [(a, b), (b, a)] {
                links.push(Link {
                    from,
                    to,
                    length_m: link_length_m,
                    travel_time_s: link_time_s,
                });
            }
        };
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    both(id(r, c), id(r, c + 1));
                }
                if r + 1 < rows {
                    both(id(r, c), id(r + 1, c));
                }
            }
        }
        Self::new(nodes, links).expect("grid construction is always valid")
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.index.contains_key(&node)
    }

    fn idx(&self, node: NodeId) -> Result<usize, NetworkError> {
        self.index
            .get(&node)
            .copied()
            .ok_or(NetworkError::UnknownNode(node))
    }

    fn row_from(&self, src: usize) -> &DistRow {
        self.from_rows[src].get_or_init(|| self.dijkstra(src, true))
    }

    fn row_to(&self, dst: usize) -> &DistRow {
        self.to_rows[dst].get_or_init(|| self.dijkstra(dst, false))
    }

    fn dijkstra(&self, root: usize, forward: bool) -> DistRow {
        let mut dist: DistRow = vec![None; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[root] = Some(0);
        heap.push(Reverse((0, root)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if dist[u].is_some_and(|best| d > best) {
                continue;
            }
            let adj = if forward { &self.outgoing[u] } else { &self.incoming[u] };
            for &k in adj {
                let link = &self.links[k];
                let v = self.index[&if forward { link.to } else { link.from }];
                let nd = d + link.travel_time_s;
                if dist[v].is_none_or(|cur| nd < cur) {
                    dist[v] = Some(nd);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist
    }

    /// Minimal travel time from `from` to `to`, `None` when unreachable.
    pub fn shortest_travel_time(
        &self,
        from: NodeId,
        to: NodeId,
    ) -> Result<Option<Seconds>, NetworkError> {
        let (a, b) = (self.idx(from)?, self.idx(to)?);
        Ok(self.row_from(a)[b])
    }

    /// Travel time for nodes already known to belong to the network.
    ///
    /// # Panics
    /// If either node is not part of the network.
    pub fn travel_time(&self, from: NodeId, to: NodeId) -> Option<Seconds> {
        self.shortest_travel_time(from, to)
            .unwrap_or_else(|e| panic!("{e}"))
    }

    /// The cheapest direct link between two adjacent nodes.
    pub fn link_between(&self, from: NodeId, to: NodeId) -> Option<&Link> {
        let a = *self.index.get(&from)?;
        self.outgoing[a]
            .iter()
            .map(|&k| &self.links[k])
            .filter(|l| l.to == to)
            .min_by_key(|l| l.travel_time_s)
    }

    /// First link on the shortest path from `from` to `to`. Among equally
    /// short continuations the one leading to the smallest node id wins.
    pub fn next_hop(&self, from: NodeId, to: NodeId) -> Result<Option<&Link>, NetworkError> {
        let (a, b) = (self.idx(from)?, self.idx(to)?);
        if a == b {
            return Ok(None);
        }
        let to_row = self.row_to(b);
        let Some(remaining) = to_row[a] else {
            return Ok(None);
        };
        for &k in &self.outgoing[a] {
            let link = &self.links[k];
            let v = self.index[&link.to];
            if let Some(rest) = to_row[v] {
                if link.travel_time_s + rest == remaining {
                    return Ok(Some(link));
                }
            }
        }
        unreachable!("distance row inconsistent with adjacency")
    }

    /// Node sequence of the shortest path, `None` when unreachable.
    pub fn shortest_path(
        &self,
        from: NodeId,
        to: NodeId,
    ) -> Result<Option<Vec<NodeId>>, NetworkError> {
        if self.shortest_travel_time(from, to)?.is_none() {
            return Ok(None);
        }
        let mut path = vec![from];
        let mut cur = from;
        while cur != to {
            let link = self.next_hop(cur, to)?.expect("reachable target");
            cur = link.to;
            path.push(cur);
        }
        Ok(Some(path))
    }

    /// Sum of link travel times along a node sequence.
    pub fn path_travel_time(&self, path: &[NodeId]) -> Option<Seconds> {
        path.windows(2)
            .map(|w| self.link_between(w[0], w[1]).map(|l| l.travel_time_s))
            .sum()
    }

    /// Sum of link lengths along a node sequence.
    pub fn path_length_m(&self, path: &[NodeId]) -> Option<f64> {
        path.windows(2)
            .map(|w| self.link_between(w[0], w[1]).map(|l| l.length_m))
            .sum()
    }
}

/// Bundled networks shipped with the crate, addressable as `bundled:<name>`.
pub fn bundled(name: &str) -> Option<RoadNetwork> {
    match name {
        "grid" => Some(
            RoadNetwork::from_toml_str(include_str!("../data/grid_8x8.toml"))
                .expect("bundled network is valid"),
        ),
        _ => None,
    }
}
