//! Overlay topologies for the emulated nodes.
//!
//! Generators are pure functions of their parameters and seed. Randomness
//! comes from `ChaCha8Rng::seed_from_u64(seed)` (rand_chacha 0.9), so other
//! implementations can reproduce the same statistics; exact edge sets are
//! not a compatibility promise.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Attempts made by [`random_graph`] before giving up on connectivity.
pub const MAX_ATTEMPTS: u32 = 100;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("invalid topology parameters: {0}")]
    Config(String),
    #[error("no connected graph found after {attempts} attempts")]
    RetryExhausted { attempts: u32 },
}

fn config(msg: impl Into<String>) -> TopologyError {
    TopologyError::Config(msg.into())
}

/// Undirected simple graph on `0..n`. Edges are stored as `(lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, TopologyError> {
        let mut g = Graph::empty(n);
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(config(format!("edge {a}-{b} out of range for {n} nodes")));
            }
            if a == b {
                return Err(config(format!("self-loop on {a}")));
            }
            if !g.add_edge(a, b) {
                return Err(config(format!("duplicate edge {a}-{b}")));
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    fn add_edge(&mut self, a: usize, b: usize) -> bool {
        debug_assert!(a != b && a < self.n && b < self.n);
        self.edges.insert((a.min(b), a.max(b)))
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    /// True for `n <= 1`.
    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// One `i j` line per edge, ascending.
    pub fn to_edge_list(&self) -> String {
        self.edges.iter().map(|(a, b)| format!("{a} {b}\n")).collect()
    }

    /// Inverse of [`Graph::to_edge_list`]; blank and `#` lines are skipped.
    pub fn from_edge_list(n: usize, text: &str) -> Result<Self, TopologyError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| config(format!("line {}: expected two node indices", i + 1)))?;
            match nums.as_slice() {
                [a, b] => pairs.push((*a, *b)),
                _ => return Err(config(format!("line {}: expected two node indices", i + 1))),
            }
        }
        Graph::from_edges(n, pairs)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "graph({} nodes, {} edges)", self.n, self.edges.len())
    }
}

/// Ring lattice where every node links to its `k` nearest ring neighbours,
/// plus, for each lattice edge `(u, v)` and with probability `p`, a shortcut
/// from `u` to a uniformly chosen node not yet adjacent to it. Lattice edges
/// are never removed, so the result is connected.
pub fn nws_graph(n: usize, k: usize, p: f64, seed: u64) -> Result<Graph, TopologyError> {
    if k < 2 || !k.is_multiple_of(2) {
        return Err(config(format!("k must be even and at least 2, got {k}")));
    }
    if n <= k {
        return Err(config(format!("need more nodes than k ({n} <= {k})")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(config(format!("p must lie in [0, 1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut lattice = Vec::with_capacity(n * k / 2);
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            g.add_edge(u, v);
            adj[u].insert(v);
            adj[v].insert(u);
            lattice.push(u);
        }
    }
    for u in lattice {
        if rng.random::<f64>() >= p {
            continue;
        }
        if adj[u].len() >= n - 1 {
            continue;
        }
        let w = loop {
            let w = rng.random_range(0..n);
            if w != u && !adj[u].contains(&w) {
                break w;
            }
        };
        g.add_edge(u, w);
        adj[u].insert(w);
        adj[w].insert(u);
    }
    Ok(g)
}

/// Random `degree`-regular graph by stub pairing: stubs are shuffled and
/// paired, unusable pairs are returned to the pool, and the attempt restarts
/// when no usable pair is left. Disconnected results are discarded.
pub fn random_graph(n: usize, degree: usize, seed: u64) -> Result<Graph, TopologyError> {
    if n == 0 {
        return Err(config("need at least one node"));
    }
    if degree >= n {
        return Err(config(format!("degree {degree} must be below node count {n}")));
    }
    if !(n * degree).is_multiple_of(2) {
        return Err(config(format!("n * degree must be even ({n} * {degree})")));
    }
    if n > 1 && degree == 0 {
        return Err(config("degree 0 cannot connect more than one node"));
    }
    if n > 2 && degree == 1 {
        return Err(config("degree 1 cannot connect more than two nodes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(g) = try_pairing(n, degree, &mut rng) {
            if g.is_connected() {
                return Ok(g);
            }
        }
    }
    Err(TopologyError::RetryExhausted { attempts: MAX_ATTEMPTS })
}

fn try_pairing(n: usize, degree: usize, rng: &mut ChaCha8Rng) -> Option<Graph> {
    let mut g = Graph::empty(n);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    while !stubs.is_empty() {
        let mut leftover: BTreeMap<usize, usize> = BTreeMap::new();
        stubs.shuffle(rng);
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || !g.add_edge(a, b) {
                *leftover.entry(a).or_default() += 1;
                *leftover.entry(b).or_default() += 1;
            }
        }
        let pool: Vec<usize> = leftover.keys().copied().collect();
        let usable = pool
            .iter()
            .enumerate()
            .any(|(i, &a)| pool[i + 1..].iter().any(|&b| !g.has_edge(a, b)));
        if !pool.is_empty() && !usable {
            return None;
        }
        stubs = leftover
            .into_iter()
            .flat_map(|(v, c)| std::iter::repeat_n(v, c))
            .collect();
    }
    Some(g)
}

/// Adjacency keyed by node identifier; `ids[i]` names node `i`. Each list is
/// sorted.
pub fn neighbor_lists<S: AsRef<str>>(g: &Graph, ids: &[S]) -> Result<BTreeMap<String, Vec<String>>, TopologyError> {
    if ids.len() < g.n() {
        return Err(config(format!("no identifier for node {}", ids.len())));
    }
    let names: Vec<&str> = ids[..g.n()].iter().map(AsRef::as_ref).collect();
    let distinct: BTreeSet<&str> = names.iter().copied().collect();
    if distinct.len() != names.len() {
        return Err(config("node identifiers are not unique"));
    }
    Ok(g.adjacency()
        .into_iter()
        .enumerate()
        .map(|(i, adj)| {
            let mut l: Vec<String> = adj.into_iter().map(|j| names[j].to_string()).collect();
            l.sort();
            (names[i].to_string(), l)
        })
        .collect())
}

/// Topology parameters as they appear in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologySpec {
    Nws { k: usize, p: f64, seed: u64 },
    Random { degree: usize, seed: u64 },
}

impl TopologySpec {
    pub fn generate(&self, n: usize) -> Result<Graph, TopologyError> {
        match *self {
            TopologySpec::Nws { k, p, seed } => nws_graph(n, k, p, seed),
            TopologySpec::Random { degree, seed } => random_graph(n, degree, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_ring() {
        let g = nws_graph(4, 2, 0.0, 9).unwrap();
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.to_edge_list(), "0 1\n0 3\n1 2\n2 3\n");
    }

    #[test]
    fn lattice_degree() {
        let g = nws_graph(6, 4, 0.0, 1).unwrap();
        assert_eq!(g.edge_count(), 12);
        assert!(g.degrees().iter().all(|&d| d == 4));
    }

    #[test]
    fn full_shortcut_probability() {
        let g = nws_graph(100, 2, 1.0, 5).unwrap();
        assert!((100..=200).contains(&g.edge_count()), "{}", g.edge_count());
        assert!(g.is_connected());
    }

    #[test]
    fn nws_rejects_bad_parameters() {
        assert!(nws_graph(4, 3, 0.0, 0).is_err());
        assert!(nws_graph(4, 4, 0.0, 0).is_err());
        assert!(nws_graph(10, 2, 1.5, 0).is_err());
        assert!(nws_graph(10, 0, 0.5, 0).is_err());
    }

    #[test]
    fn random_graph_cases() {
        let g = random_graph(2, 1, 3).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), [(0, 1)]);
        assert_eq!(random_graph(10, 3, 7).unwrap(), random_graph(10, 3, 7).unwrap());
        let g = random_graph(10, 3, 7).unwrap();
        assert!(g.degrees().iter().all(|&d| d == 3));
        assert!(g.is_connected());
        assert!(matches!(random_graph(5, 5, 0), Err(TopologyError::Config(_))));
        assert!(matches!(random_graph(5, 3, 0), Err(TopologyError::Config(_))));
        assert!(matches!(random_graph(4, 1, 0), Err(TopologyError::Config(_))));
        assert_eq!(random_graph(1, 0, 0).unwrap().edge_count(), 0);
    }

    #[test]
    fn neighbor_list_cases() {
        let g = nws_graph(4, 2, 0.0, 0).unwrap();
        let l = neighbor_lists(&g, &["a", "b", "c", "d"]).unwrap();
        assert_eq!(l["a"], ["b", "d"]);
        let l = neighbor_lists(&Graph::empty(1), &["a"]).unwrap();
        assert!(l["a"].is_empty());
        assert!(neighbor_lists(&g, &["a", "b"]).is_err());
        assert!(neighbor_lists(&g, &["a", "a", "c", "d"]).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = nws_graph(30, 4, 0.3, 11).unwrap();
        assert_eq!(Graph::from_edge_list(30, &g.to_edge_list()).unwrap(), g);
        assert!(Graph::from_edge_list(3, "0 0\n").is_err());
        assert!(Graph::from_edge_list(3, "0 1\n1 0\n").is_err());
        assert!(Graph::from_edge_list(3, "0 7\n").is_err());
        assert!(Graph::from_edge_list(3, "0\n").is_err());
    }

    #[test]
    fn spec_serde() {
        let s: TopologySpec = serde_json::from_str(r#"{"model":"nws","k":4,"p":0.1,"seed":3}"#).unwrap();
        assert_eq!(s.generate(20).unwrap(), nws_graph(20, 4, 0.1, 3).unwrap());
    }
}
