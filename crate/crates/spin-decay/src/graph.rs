//! Graph model, edge-list parsing, regime classification, color swap.
//!
//! Vertices are `u32` ids, always compacted to `0..n` in ascending numeric
//! order of the input ids. Neighbor lists are kept sorted ascending; that
//! order is the total order used everywhere downstream (walk-tree child
//! order, cycle-closing leaf colors, telescoping order), so parsing is the
//! single point that fixes determinism.

use crate::{thresholds, Error, Result};
use std::collections::BTreeMap;
use std::fmt;

// ===========================================================================
// Core types
// ===========================================================================

/// Vertex color: `Blue` is state 0 (edge weight `beta` when both endpoints
/// are blue), `Green` is state 1 (edge weight `gamma`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Color {
    Blue,
    Green,
}

impl Color {
    pub fn flipped(self) -> Color {
        match self {
            Color::Blue => Color::Green,
            Color::Green => Color::Blue,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Blue => "blue",
            Color::Green => "green",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Simple undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    m: usize,
    adj: Vec<Vec<u32>>,
}

impl Graph {
    /// Builds a graph on vertices `0..n` from an edge list, validating
    /// simplicity. Edges may be given in either orientation.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Graph> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at vertex {u}")));
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for (v, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput(format!("duplicate edge at vertex {v}")));
            }
        }
        Ok(Graph { n, m: edges.len(), adj })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edge list with `u < v`, ascending.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.m);
        for u in 0..self.n as u32 {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Connected components, each sorted ascending, ordered by minimum id.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s as u32];
            seen[s] = true;
            let mut queue = vec![s as u32];
            while let Some(v) = queue.pop() {
                for &u in self.neighbors(v) {
                    if !seen[u as usize] {
                        seen[u as usize] = true;
                        comp.push(u);
                        queue.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    // =======================================================================
    // Fixtures
    // =======================================================================

    pub fn edgeless(n: usize) -> Graph {
        Graph { n, m: 0, adj: vec![Vec::new(); n] }
    }

    pub fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n as u32).map(|v| (v - 1, v)).collect();
        Graph::from_edges(n, &edges).expect("path is simple")
    }

    pub fn cycle(n: usize) -> Graph {
        assert!(n >= 3, "cycle needs at least 3 vertices");
        let mut edges: Vec<_> = (1..n as u32).map(|v| (v - 1, v)).collect();
        edges.push((0, n as u32 - 1));
        Graph::from_edges(n, &edges).expect("cycle is simple")
    }

    pub fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n as u32 {
            for v in (u + 1)..n as u32 {
                edges.push((u, v));
            }
        }
        Graph::from_edges(n, &edges).expect("clique is simple")
    }

    /// Star with center 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves as u32).map(|v| (0, v)).collect();
        Graph::from_edges(leaves + 1, &edges).expect("star is simple")
    }

    /// Complete binary tree: root 0, vertex `i` has children `2i+1`, `2i+2`;
    /// `depth` 0 is a single vertex.
    pub fn complete_binary_tree(depth: u32) -> Graph {
        let n = (1usize << (depth + 1)) - 1;
        let mut edges = Vec::with_capacity(n - 1);
        for i in 0..n {
            for c in [2 * i + 1, 2 * i + 2] {
                if c < n {
                    edges.push((i as u32, c as u32));
                }
            }
        }
        Graph::from_edges(n, &edges).expect("tree is simple")
    }
}

// ===========================================================================
// Edge-list text format
// ===========================================================================

/// Parse result that remembers the original (pre-compaction) vertex ids,
/// for front ends that let users name vertices by input id.
#[derive(Debug, Clone)]
pub struct GraphDocument {
    pub graph: Graph,
    /// `original_ids[c]` is the input id of canonical vertex `c`; sorted
    /// ascending because compaction preserves numeric order.
    pub original_ids: Vec<u64>,
}

impl GraphDocument {
    /// Canonical id for an input-file id.
    pub fn canonical(&self, original: u64) -> Option<u32> {
        self.original_ids.binary_search(&original).ok().map(|i| i as u32)
    }
}

/// Parses edge-list text: one edge per line as two whitespace-separated
/// nonnegative integers, `#` comment lines, and optional `v <id>` lines
/// declaring isolated vertices. Vertex ids are compacted to `0..n`
/// preserving numeric order. Rejects self-loops, duplicate edges, and
/// malformed lines, naming the offending line.
pub fn parse_graph_document(text: &str) -> Result<GraphDocument> {
    let mut ids: Vec<u64> = Vec::new();
    let mut raw_edges: Vec<(u64, u64, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let first = tok.next().expect("non-empty line has a token");
        if first == "v" {
            let id = match (tok.next(), tok.next()) {
                (Some(s), None) => parse_id(s, lineno)?,
                _ => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "vertex line must be `v <id>`".into(),
                    })
                }
            };
            ids.push(id);
            continue;
        }
        let u = parse_id(first, lineno)?;
        let v = match (tok.next(), tok.next()) {
            (Some(s), None) => parse_id(s, lineno)?,
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "edge line must be two vertex ids".into(),
                })
            }
        };
        if u == v {
            return Err(Error::Parse { line: lineno, msg: format!("self-loop at vertex {u}") });
        }
        ids.push(u);
        ids.push(v);
        raw_edges.push((u, v, lineno));
    }
    ids.sort_unstable();
    ids.dedup();
    let lookup = |id: u64| ids.binary_search(&id).expect("id was collected") as u32;
    let n = ids.len();
    let mut edges = Vec::with_capacity(raw_edges.len());
    let mut seen = std::collections::HashSet::with_capacity(raw_edges.len());
    for (u, v, lineno) in raw_edges {
        let (a, b) = (lookup(u).min(lookup(v)), lookup(u).max(lookup(v)));
        if !seen.insert((a, b)) {
            return Err(Error::Parse { line: lineno, msg: format!("duplicate edge {u} {v}") });
        }
        edges.push((a, b));
    }
    let graph = Graph::from_edges(n, &edges)?;
    Ok(GraphDocument { graph, original_ids: ids })
}

/// [`parse_graph_document`] without the id table.
pub fn parse_graph(text: &str) -> Result<Graph> {
    Ok(parse_graph_document(text)?.graph)
}

fn parse_id(s: &str, lineno: usize) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|_| Error::Parse { line: lineno, msg: format!("`{s}` is not a vertex id") })
}

/// Canonical edge-list text: edges `u v` with `u < v` ascending, then one
/// `v <id>` line per isolated vertex. `parse_graph(serialize_graph(g)) == g`.
pub fn serialize_graph(g: &Graph) -> String {
    let mut out = String::new();
    for (u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    for v in 0..g.n() as u32 {
        if g.degree(v) == 0 {
            out.push_str(&format!("v {v}\n"));
        }
    }
    out
}

// ===========================================================================
// Spin parameters, pins, regimes
// ===========================================================================

/// Edge interaction weights: `beta` for a blue-blue edge, `gamma` for
/// green-green; mixed edges weigh 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinParams {
    pub beta: f64,
    pub gamma: f64,
}

impl SpinParams {
    pub fn new(beta: f64, gamma: f64) -> SpinParams {
        SpinParams { beta, gamma }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || !self.gamma.is_finite() || self.beta < 0.0 || self.gamma < 0.0
        {
            return Err(Error::InvalidInput(format!(
                "spin parameters must be finite and nonnegative, got beta={}, gamma={}",
                self.beta, self.gamma
            )));
        }
        Ok(())
    }

    pub fn swapped(&self) -> SpinParams {
        SpinParams { beta: self.gamma, gamma: self.beta }
    }
}

/// Partial configuration: a map from pinned vertices to colors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PinSet {
    map: BTreeMap<u32, Color>,
}

impl PinSet {
    pub fn new() -> PinSet {
        PinSet::default()
    }

    pub fn from_pairs(pairs: &[(u32, Color)]) -> PinSet {
        PinSet { map: pairs.iter().copied().collect() }
    }

    pub fn insert(&mut self, v: u32, color: Color) {
        self.map.insert(v, color);
    }

    pub fn get(&self, v: u32) -> Option<Color> {
        self.map.get(&v).copied()
    }

    pub fn is_pinned(&self, v: u32) -> bool {
        self.map.contains_key(&v)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, Color)> + '_ {
        self.map.iter().map(|(&v, &c)| (v, c))
    }

    /// All pins flipped blue<->green.
    pub fn flipped(&self) -> PinSet {
        PinSet { map: self.map.iter().map(|(&v, &c)| (v, c.flipped())).collect() }
    }

    /// Errors unless every pinned vertex exists in `g`.
    pub fn validate_for(&self, g: &Graph) -> Result<()> {
        if let Some((&v, _)) = self.map.iter().next_back() {
            if v as usize >= g.n() {
                return Err(Error::InvalidInput(format!(
                    "pin on vertex {v} but the graph has {} vertices",
                    g.n()
                )));
            }
        }
        Ok(())
    }

    /// Dense lookup table indexed by vertex id.
    pub fn to_dense(&self, n: usize) -> Vec<Option<Color>> {
        let mut dense = vec![None; n];
        for (v, c) in self.iter() {
            if (v as usize) < n {
                dense[v as usize] = Some(c);
            }
        }
        dense
    }
}

/// Swaps the roles of the two colors: `beta` and `gamma` exchange and every
/// pin flips. The partition function is invariant; marginals map p -> 1-p.
pub fn swap_colors(params: SpinParams, pins: &PinSet) -> (SpinParams, PinSet) {
    (params.swapped(), pins.flipped())
}

/// Which correctness regime the parameters fall in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Guaranteed,
    GuaranteedAfterSwap,
    Unguaranteed,
    Degenerate,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Guaranteed => "guaranteed",
            Regime::GuaranteedAfterSwap => "guaranteed-after-swap",
            Regime::Unguaranteed => "unguaranteed",
            Regime::Degenerate => "degenerate",
        }
    }
}

/// Classification outcome. `threshold_used` is the critical gamma the
/// decision compared against (when one is defined for these parameters).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub swap_applied: bool,
    pub threshold_used: Option<f64>,
}

/// Margin added to the critical gamma so root-finding tolerance can never
/// flip a borderline classification to "guaranteed".
pub const REGIME_MARGIN: f64 = 1e-9;

/// Decides whether the decay machinery is certified for these parameters.
///
/// `guaranteed` means `0 <= beta < 1`, `beta*gamma < 1`, and gamma clears the
/// critical threshold with margin; `guaranteed-after-swap` is the mirrored
/// condition; `degenerate` covers `beta*gamma == 1` (edge weights factorize,
/// correlations vanish but the telescoping denominator degenerates) and
/// `beta == gamma == 0`.
pub fn classify_regime(params: SpinParams) -> Result<RegimeReport> {
    params.validate()?;
    let SpinParams { beta, gamma } = params;
    if beta * gamma == 1.0 || (beta == 0.0 && gamma == 0.0) {
        return Ok(RegimeReport { regime: Regime::Degenerate, swap_applied: false, threshold_used: None });
    }
    let mut threshold_used = None;
    if beta < 1.0 && beta * gamma < 1.0 {
        let crit = thresholds::big_gamma(beta)?;
        threshold_used = Some(crit.gamma);
        if gamma >= crit.gamma + REGIME_MARGIN {
            return Ok(RegimeReport {
                regime: Regime::Guaranteed,
                swap_applied: false,
                threshold_used,
            });
        }
    }
    if gamma < 1.0 && beta * gamma < 1.0 {
        let crit = thresholds::big_gamma(gamma)?;
        if threshold_used.is_none() {
            threshold_used = Some(crit.gamma);
        }
        if beta >= crit.gamma + REGIME_MARGIN {
            return Ok(RegimeReport {
                regime: Regime::GuaranteedAfterSwap,
                swap_applied: true,
                threshold_used: Some(crit.gamma),
            });
        }
    }
    Ok(RegimeReport { regime: Regime::Unguaranteed, swap_applied: false, threshold_used })
}

// ===========================================================================
