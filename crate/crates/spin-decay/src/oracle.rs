//! Exact reference computations by exhaustive enumeration, plus the
//! instrumented full-depth and per-level walk-tree evaluations used to
//! cross-check the truncated estimator.
//!
//! Enumeration walks a binary-reflected Gray code over the free vertices so
//! each step flips one vertex and updates the two monochromatic edge counts
//! incrementally. Partition values are accumulated in compensated sums; the
//! log-partition value is recovered separately from a count table over
//! `(blue-blue, green-green)` edge profiles through a max-shifted
//! log-sum-exp, so it stays accurate when the plain value over- or
//! underflows.

use crate::estimator::{ceil_log, edge_factor, ExtRatio, RatioProduct};
use crate::graph::{Color, Graph, PinSet, Regime, SpinParams};
use crate::sawtree::{self, WalkNode};
use crate::thresholds;
use crate::{Error, Result};

/// Hard cap on enumerable graphs.
const MAX_ENUM_VERTICES: usize = 26;
/// Smaller cap for the mixing probe, which enumerates twice per call.
const MAX_PROBE_VERTICES: usize = 20;

#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
        // Saturation: inf - inf would poison the carry with NaN on the next
        // add, so park it at zero and let the sum stay infinite.
        if !self.sum.is_finite() {
            self.carry = 0.0;
        }
    }
}

/// Exact partition data. `z` is the compensated direct sum (may overflow to
/// infinity for extreme parameters); `log_z` is computed independently and
/// is `-inf` when every configuration has weight zero, in which case the
/// free-vertex marginals are NaN (0/0).
#[derive(Debug, Clone)]
pub struct ExactResult {
    pub log_z: f64,
    pub marginals: Vec<f64>,
    pub z: f64,
}

struct EnumState<'a> {
    graph: &'a Graph,
    colors: Vec<Color>,
    free: Vec<u32>,
    e_bb: u32,
    e_gg: u32,
}

impl<'a> EnumState<'a> {
    fn new(graph: &'a Graph, pins: &PinSet) -> EnumState<'a> {
        let n = graph.n();
        let mut colors = vec![Color::Green; n];
        for (v, c) in pins.iter() {
            colors[v as usize] = c;
        }
        let free: Vec<u32> = (0..n as u32).filter(|&v| !pins.is_pinned(v)).collect();
        let mut e_bb = 0u32;
        let mut e_gg = 0u32;
        for (u, v) in graph.edges() {
            match (colors[u as usize], colors[v as usize]) {
                (Color::Blue, Color::Blue) => e_bb += 1,
                (Color::Green, Color::Green) => e_gg += 1,
                _ => {}
            }
        }
        EnumState { graph, colors, free, e_bb, e_gg }
    }

    /// Flips free vertex with index `j`, updating monochromatic edge counts.
    fn flip(&mut self, j: usize) {
        let v = self.free[j];
        let old = self.colors[v as usize];
        for &u in self.graph.neighbors(v) {
            match (old, self.colors[u as usize]) {
                (Color::Blue, Color::Blue) => self.e_bb -= 1,
                (Color::Green, Color::Green) => self.e_gg -= 1,
                _ => {}
            }
        }
        self.colors[v as usize] = old.flipped();
        let new = self.colors[v as usize];
        for &u in self.graph.neighbors(v) {
            match (new, self.colors[u as usize]) {
                (Color::Blue, Color::Blue) => self.e_bb += 1,
                (Color::Green, Color::Green) => self.e_gg += 1,
                _ => {}
            }
        }
    }
}

fn validate_enum(graph: &Graph, params: &SpinParams, pins: &PinSet, cap: usize) -> Result<()> {
    params.validate()?;
    pins.validate_for(graph)?;
    if graph.n() > cap {
        return Err(Error::Size(format!(
            "exact enumeration is capped at {cap} vertices, got {}",
            graph.n()
        )));
    }
    Ok(())
}

fn log_weight(e_bb: u32, e_gg: u32, params: &SpinParams) -> Option<f64> {
    let mut lw = 0.0;
    if e_bb > 0 {
        if params.beta == 0.0 {
            return None;
        }
        lw += e_bb as f64 * params.beta.ln();
    }
    if e_gg > 0 {
        if params.gamma == 0.0 {
            return None;
        }
        lw += e_gg as f64 * params.gamma.ln();
    }
    Some(lw)
}

fn log_z_from_table(table: &[u64], m: usize, params: &SpinParams) -> f64 {
    let mut entries: Vec<(f64, u64)> = Vec::new();
    for e_bb in 0..=m {
        for e_gg in 0..=m {
            let count = table[e_bb * (m + 1) + e_gg];
            if count == 0 {
                continue;
            }
            if let Some(lw) = log_weight(e_bb as u32, e_gg as u32, params) {
                entries.push((lw, count));
            }
        }
    }
    if entries.is_empty() {
        return f64::NEG_INFINITY;
    }
    let max = entries.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let mut acc = Kahan::default();
    for (lw, count) in entries {
        acc.add(count as f64 * (lw - max).exp());
    }
    max + acc.sum.ln()
}

fn enumerate(
    graph: &Graph,
    params: &SpinParams,
    pins: &PinSet,
    with_marginals: bool,
) -> Result<ExactResult> {
    validate_enum(graph, params, pins, MAX_ENUM_VERTICES)?;
    let n = graph.n();
    let m = graph.m();
    let mut pow_b = vec![1.0f64; m + 1];
    let mut pow_g = vec![1.0f64; m + 1];
    for k in 1..=m {
        pow_b[k] = pow_b[k - 1] * params.beta;
        pow_g[k] = pow_g[k - 1] * params.gamma;
    }
    let mut state = EnumState::new(graph, pins);
    let mut table = vec![0u64; (m + 1) * (m + 1)];
    let mut z = Kahan::default();
    let mut blue = vec![Kahan::default(); if with_marginals { n } else { 0 }];
    let configs: u64 = 1u64 << state.free.len();
    for k in 0..configs {
        if k > 0 {
            state.flip(k.trailing_zeros() as usize);
        }
        let w = pow_b[state.e_bb as usize] * pow_g[state.e_gg as usize];
        z.add(w);
        table[state.e_bb as usize * (m + 1) + state.e_gg as usize] += 1;
        if with_marginals && w != 0.0 {
            for v in 0..n {
                if state.colors[v] == Color::Blue {
                    blue[v].add(w);
                }
            }
        }
    }
    let log_z = log_z_from_table(&table, m, params);
    let marginals = if with_marginals {
        (0..n)
            .map(|v| match pins.get(v as u32) {
                Some(Color::Blue) => 1.0,
                Some(Color::Green) => 0.0,
                None => blue[v].sum / z.sum,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ExactResult { log_z, marginals, z: z.sum })
}

/// Exact partition value, log-partition value, and per-vertex
/// blue-probabilities under the given pins.
pub fn exact_partition(graph: &Graph, params: &SpinParams, pins: &PinSet) -> Result<ExactResult> {
    enumerate(graph, params, pins, true)
}

/// Exact log-partition value only; skips marginal accumulation so each
/// enumeration step costs O(degree of the flipped vertex).
pub fn exact_log_z(graph: &Graph, params: &SpinParams, pins: &PinSet) -> Result<f64> {
    Ok(enumerate(graph, params, pins, false)?.log_z)
}

/// Exact blue-probability of a single free vertex under the given pins.
pub fn exact_marginal(graph: &Graph, params: &SpinParams, pins: &PinSet, v: u32) -> Result<f64> {
    if v >= graph.n() as u32 {
        return Err(Error::InvalidInput(format!(
            "vertex {v} out of range for a graph on {} vertices",
            graph.n()
        )));
    }
    if pins.is_pinned(v) {
        return Err(Error::InvalidQuery(format!(
            "vertex {v} is pinned; its marginal is fixed by the pin"
        )));
    }
    Ok(exact_partition(graph, params, pins)?.marginals[v as usize])
}

// ===========================================================================
// Full-depth walk-tree evaluation
// ===========================================================================

fn tree_rec(
    graph: &Graph,
    pins: &PinSet,
    params: &SpinParams,
    node: &WalkNode,
    remaining: &mut u64,
) -> Result<ExtRatio> {
    if *remaining == 0 {
        return Err(Error::Size(
            "walk tree exceeded the node budget for exact evaluation".into(),
        ));
    }
    *remaining -= 1;
    match node.status() {
        sawtree::NodeStatus::FixedBlue => return Ok(ExtRatio::Infinite),
        sawtree::NodeStatus::FixedGreen => return Ok(ExtRatio::Zero),
        sawtree::NodeStatus::Free => {}
    }
    let kids = sawtree::expand(graph, pins, node);
    let mut product = RatioProduct::default();
    for _ in 0..kids.fixed_blue {
        product.push(edge_factor(ExtRatio::Infinite, params));
    }
    for _ in 0..kids.fixed_green {
        product.push(edge_factor(ExtRatio::Zero, params));
    }
    for child in &kids.free {
        let r = tree_rec(graph, pins, params, child, remaining)?;
        product.push(edge_factor(r, params));
    }
    product.finish()
}

/// Evaluates the walk tree at `v` without truncation. `node_budget` caps the
/// number of tree nodes (free and terminal) evaluated; the tree of a dense
/// graph grows factorially, so exceeding the cap is a size error.
pub fn exact_tree_r(
    graph: &Graph,
    pins: &PinSet,
    params: &SpinParams,
    v: u32,
    node_budget: u64,
) -> Result<ExtRatio> {
    params.validate()?;
    pins.validate_for(graph)?;
    let root = sawtree::root(graph, pins, v)?;
    let mut remaining = node_budget;
    tree_rec(graph, pins, params, &root, &mut remaining)
}

/// Structural statistics of the full walk tree at `v` under base `m`: the
/// largest cumulative depth charge any free node carries (a truncated run
/// with budget at least this value is exact) and the number of free nodes.
#[derive(Debug, Clone, Copy)]
pub struct SawTreeStats {
    pub max_needed_level: u32,
    pub free_nodes: u64,
}

fn stats_rec(
    graph: &Graph,
    pins: &PinSet,
    node: &WalkNode,
    cum: u32,
    d_parent: u32,
    m: u32,
    remaining: &mut u64,
    out: &mut SawTreeStats,
) -> Result<()> {
    if !node.is_free() {
        return Ok(());
    }
    if *remaining == 0 {
        return Err(Error::Size("walk tree exceeded the node budget for statistics".into()));
    }
    *remaining -= 1;
    out.free_nodes += 1;
    out.max_needed_level = out.max_needed_level.max(cum);
    let kids = sawtree::expand(graph, pins, node);
    let child_cum = cum + ceil_log(m, d_parent as u64 + 1);
    for child in &kids.free {
        stats_rec(graph, pins, child, child_cum, kids.total(), m, remaining, out)?;
    }
    Ok(())
}

/// Walks the full tree at `v` and reports how much budget an exact
/// truncated evaluation needs. Costs one full traversal; `node_budget` caps
/// the free-node count.
pub fn saw_tree_stats(
    graph: &Graph,
    pins: &PinSet,
    v: u32,
    m: u32,
    node_budget: u64,
) -> Result<SawTreeStats> {
    pins.validate_for(graph)?;
    if m < 2 {
        return Err(Error::InvalidInput(format!("branching base must be at least 2, got {m}")));
    }
    let root = sawtree::root(graph, pins, v)?;
    let mut out = SawTreeStats { max_needed_level: 0, free_nodes: 0 };
    let mut remaining = node_budget;
    stats_rec(graph, pins, &root, 0, 0, m, &mut remaining, &mut out)?;
    Ok(out)
}

// ===========================================================================
// Strong-spatial-mixing probe
// ===========================================================================

/// Compares the exact marginal of `v` under two pin assignments on the same
/// vertex set and returns the absolute gap. Enumeration-backed, so the
/// graph is capped at 20 vertices; the two pin sets must cover identical
/// vertex sets (their colors may differ arbitrarily).
pub fn ssm_probe(
    graph: &Graph,
    params: &SpinParams,
    pins_a: &PinSet,
    pins_b: &PinSet,
    v: u32,
) -> Result<f64> {
    validate_enum(graph, params, pins_a, MAX_PROBE_VERTICES)?;
    pins_b.validate_for(graph)?;
    let dom_a: Vec<u32> = pins_a.iter().map(|(u, _)| u).collect();
    let dom_b: Vec<u32> = pins_b.iter().map(|(u, _)| u).collect();
    if dom_a != dom_b {
        return Err(Error::InvalidInput(
            "mixing probe needs both pin assignments on the same vertex set".into(),
        ));
    }
    let p_a = exact_marginal(graph, params, pins_a, v)?;
    let p_b = exact_marginal(graph, params, pins_b, v)?;
    if p_a.is_nan() || p_b.is_nan() {
        return Err(Error::Numeric(
            "a pin assignment has zero total weight; the conditional marginal is undefined".into(),
        ));
    }
    Ok((p_a - p_b).abs())
}

// ===========================================================================
// Per-level decay traces
// ===========================================================================

/// Amortized-metric measurements for one structurally evaluated free node of
/// a truncated run.
#[derive(Debug, Clone, Copy)]
pub struct NodeRecord {
    /// True when every free child was itself structurally evaluated (no
    /// frontier replacement among the children).
    pub all_children_measured: bool,
    /// Depth charge of this node's own child set, `ceil_log_m(d_total + 1)`.
    pub charge: u32,
    /// Green-fixed children (factor `1/gamma` each).
    pub d0: u32,
    /// Blue-fixed children (factor `beta` each).
    pub d1: u32,
    pub d_free: u32,
    pub depth: u32,
    /// Potential-metric gap `phi(hi) - phi(lo)` at this node.
    pub eps: f64,
    pub hi: f64,
    pub lo: f64,
    /// Largest `eps` among measured free children (0 when there are none).
    pub max_child_eps: f64,
}

/// Decay of the sandwich width with the depth budget at one vertex.
#[derive(Debug, Clone)]
pub struct DecayTrace {
    pub alpha: f64,
    /// `p_hi - p_lo` for each budget `0..=l_max`.
    pub deltas: Vec<f64>,
    pub m: u32,
    /// Per-node measurements from the `l_max` run.
    pub nodes: Vec<NodeRecord>,
    /// Structurally evaluated free nodes per budget.
    pub nodes_visited: Vec<u64>,
    /// Least-squares slope of `ln delta` against the budget over the levels
    /// with `delta > 1e-12`; absent with fewer than two usable levels.
    pub slope: Option<f64>,
}

struct PairOutcome {
    lo: ExtRatio,
    hi: ExtRatio,
    eps: f64,
    measured: bool,
}

#[allow(clippy::too_many_arguments)]
fn pair_rec(
    graph: &Graph,
    pins: &PinSet,
    params: &SpinParams,
    big_d: f64,
    node: &WalkNode,
    budget: i64,
    d_parent: u32,
    m: u32,
    visited: &mut u64,
    records: Option<&mut Vec<NodeRecord>>,
) -> Result<PairOutcome> {
    match node.status() {
        sawtree::NodeStatus::FixedBlue => {
            return Ok(PairOutcome {
                lo: ExtRatio::Infinite,
                hi: ExtRatio::Infinite,
                eps: 0.0,
                measured: true,
            })
        }
        sawtree::NodeStatus::FixedGreen => {
            return Ok(PairOutcome { lo: ExtRatio::Zero, hi: ExtRatio::Zero, eps: 0.0, measured: true })
        }
        sawtree::NodeStatus::Free => {}
    }
    if budget < 0 {
        return Ok(PairOutcome {
            lo: ExtRatio::Zero,
            hi: ExtRatio::Infinite,
            eps: f64::INFINITY,
            measured: false,
        });
    }
    *visited += 1;
    let kids = sawtree::expand(graph, pins, node);
    let child_budget = budget - ceil_log(m, d_parent as u64 + 1) as i64;
    let d_total = kids.total();
    let mut lo_prod = RatioProduct::default();
    let mut hi_prod = RatioProduct::default();
    for _ in 0..kids.fixed_blue {
        lo_prod.push(edge_factor(ExtRatio::Infinite, params));
        hi_prod.push(edge_factor(ExtRatio::Infinite, params));
    }
    for _ in 0..kids.fixed_green {
        lo_prod.push(edge_factor(ExtRatio::Zero, params));
        hi_prod.push(edge_factor(ExtRatio::Zero, params));
    }
    let mut all_measured = true;
    let mut max_child_eps = 0.0f64;
    let mut recs = records;
    for child in &kids.free {
        let sub = pair_rec(
            graph,
            pins,
            params,
            big_d,
            child,
            child_budget,
            d_total,
            m,
            visited,
            recs.as_deref_mut(),
        )?;
        if sub.measured {
            max_child_eps = max_child_eps.max(sub.eps);
        } else {
            all_measured = false;
        }
        // The edge factor is decreasing, so the node's low end comes from
        // the children's high ends and vice versa.
        lo_prod.push(edge_factor(sub.hi, params));
        hi_prod.push(edge_factor(sub.lo, params));
    }
    let lo = lo_prod.finish()?;
    let hi = hi_prod.finish()?;
    let eps = thresholds::potential_transform(hi.value(), params.beta, big_d)
        - thresholds::potential_transform(lo.value(), params.beta, big_d);
    if let Some(recs) = recs {
        recs.push(NodeRecord {
            all_children_measured: all_measured,
            charge: ceil_log(m, d_total as u64 + 1),
            d0: kids.fixed_green,
            d1: kids.fixed_blue,
            d_free: kids.free.len() as u32,
            depth: node.depth() as u32,
            eps,
            hi: hi.value(),
            lo: lo.value(),
            max_child_eps,
        });
    }
    Ok(PairOutcome { lo, hi, eps, measured: true })
}

/// Runs the sandwich at every budget `0..=l_max` for a free vertex in the
/// guaranteed regime (colors are swapped internally when the mirror
/// orientation is the guaranteed one; widths are invariant under the swap).
/// The final budget's run also records per-node potential-metric data.
pub fn decay_profile(
    graph: &Graph,
    params: &SpinParams,
    pins: &PinSet,
    v: u32,
    l_max: u32,
) -> Result<DecayTrace> {
    let report = crate::graph::classify_regime(*params)?;
    let (work_params, work_pins) = match report.regime {
        Regime::Guaranteed => (*params, pins.clone()),
        Regime::GuaranteedAfterSwap => crate::graph::swap_colors(*params, pins),
        _ => {
            return Err(Error::Regime(format!(
                "decay profiling needs the guaranteed regime; classification was {}",
                report.regime.name()
            )))
        }
    };
    work_pins.validate_for(graph)?;
    if work_pins.is_pinned(v) {
        return Err(Error::InvalidQuery(format!(
            "vertex {v} is pinned; decay is profiled at free vertices"
        )));
    }
    let prof = thresholds::profile(work_params.beta, work_params.gamma)?;
    let big_d = prof.critical.d;
    let mut deltas = Vec::with_capacity(l_max as usize + 1);
    let mut nodes_visited = Vec::with_capacity(l_max as usize + 1);
    let mut nodes = Vec::new();
    for level in 0..=l_max {
        let root = sawtree::root(graph, &work_pins, v)?;
        let mut visited = 0u64;
        let records = if level == l_max { Some(&mut nodes) } else { None };
        let top = pair_rec(
            graph,
            &work_pins,
            &work_params,
            big_d,
            &root,
            level as i64,
            0,
            prof.m,
            &mut visited,
            records,
        )?;
        deltas.push(top.hi.prob() - top.lo.prob());
        nodes_visited.push(visited);
    }
    let usable: Vec<(f64, f64)> = deltas
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 1e-12)
        .map(|(l, &d)| (l as f64, d.ln()))
        .collect();
    let slope = if usable.len() >= 2 {
        let n = usable.len() as f64;
        let mean_x = usable.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = usable.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
        let var: f64 = usable.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
        if var > 0.0 {
            Some(cov / var)
        } else {
            None
        }
    } else {
        None
    };
    Ok(DecayTrace { alpha: prof.alpha, deltas, m: prof.m, nodes, nodes_visited, slope })
}

// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Color, Graph, PinSet, SpinParams};

    fn params(beta: f64, gamma: f64) -> SpinParams {
        SpinParams::new(beta, gamma)
    }

    fn no_pins() -> PinSet {
        PinSet::new()
    }

    #[test]
    fn reference_partition_values() {
        let p = params(0.0, 2.0);
        let path = exact_partition(&Graph::path(3), &p, &no_pins()).unwrap();
        assert!((path.z - 10.0).abs() <= 1e-12);
        assert!((path.log_z - 10f64.ln()).abs() <= 1e-12);
        assert!((path.marginals[0] - 0.3).abs() <= 1e-12);
        assert!((path.marginals[1] - 0.1).abs() <= 1e-12);

        let tri = exact_partition(&Graph::complete(3), &p, &no_pins()).unwrap();
        assert!((tri.z - 14.0).abs() <= 1e-12);
        for v in 0..3 {
            assert!((tri.marginals[v] - 1.0 / 7.0).abs() <= 1e-12);
        }

        assert!((exact_partition(&Graph::path(2), &p, &no_pins()).unwrap().z - 4.0).abs() <= 1e-12);
        assert!(
            (exact_partition(&Graph::edgeless(5), &p, &no_pins()).unwrap().z - 32.0).abs() <= 1e-12
        );
        let is_count = exact_partition(&Graph::complete(3), &params(0.0, 1.0), &no_pins()).unwrap();
        assert!((is_count.z - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn pinned_partition_and_marginals() {
        let p = params(0.0, 2.0);
        let pins = PinSet::from_pairs(&[(0, Color::Blue)]);
        let r = exact_partition(&Graph::path(3), &p, &pins).unwrap();
        assert!((r.z - 3.0).abs() <= 1e-12);
        assert_eq!(r.marginals[0], 1.0);
        assert!((r.marginals[1] - 0.0).abs() <= 1e-12);
        assert!((r.marginals[2] - 1.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_weight_conditioning_gives_nan_marginals() {
        let p = params(0.0, 2.0);
        let pins = PinSet::from_pairs(&[(0, Color::Blue), (1, Color::Blue)]);
        let r = exact_partition(&Graph::complete(3), &p, &pins).unwrap();
        assert_eq!(r.z, 0.0);
        assert_eq!(r.log_z, f64::NEG_INFINITY);
        assert!(r.marginals[2].is_nan());
    }

    #[test]
    fn swap_invariance_of_the_partition_value() {
        let g = Graph::cycle(5);
        let a = exact_partition(&g, &params(0.3, 2.0), &no_pins()).unwrap();
        let b = exact_partition(&g, &params(2.0, 0.3), &no_pins()).unwrap();
        assert!((a.z - b.z).abs() <= 1e-12 * a.z);
        // Marginals flip to their complements.
        for v in 0..5 {
            assert!((a.marginals[v] - (1.0 - b.marginals[v])).abs() <= 1e-12);
        }
    }

    #[test]
    fn log_z_survives_scales_where_z_is_extreme() {
        let g = Graph::complete(6);
        let p = params(0.0, 1e40);
        let r = exact_partition(&g, &p, &no_pins()).unwrap();
        assert!(r.z.is_infinite());
        // All-green dominates: log z close to m * ln gamma.
        assert!((r.log_z - 15.0 * 1e40f64.ln()).abs() <= 1e-6);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let g = Graph::edgeless(27);
        assert!(matches!(
            exact_partition(&g, &params(0.0, 2.0), &no_pins()),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn tree_evaluation_matches_enumeration_on_the_triangle() {
        let g = Graph::complete(3);
        let p = params(0.0, 2.0);
        let r = exact_tree_r(&g, &no_pins(), &p, 0, 1 << 20).unwrap();
        assert!((r.value() - 1.0 / 6.0).abs() <= 1e-15);
        let marg = exact_marginal(&g, &p, &no_pins(), 0).unwrap();
        assert!((r.prob() - marg).abs() <= 1e-12);
    }

    #[test]
    fn tree_evaluation_respects_the_node_budget() {
        let g = Graph::complete(6);
        assert!(matches!(
            exact_tree_r(&g, &no_pins(), &params(0.0, 2.0), 0, 10),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn tree_stats_reference_values() {
        let g = Graph::complete(3);
        let s2 = saw_tree_stats(&g, &no_pins(), 0, 2, 1 << 20).unwrap();
        assert_eq!(s2.max_needed_level, 2); // ceil(log2 3) charged once
        assert_eq!(s2.free_nodes, 5);
        let s3 = saw_tree_stats(&g, &no_pins(), 0, 3, 1 << 20).unwrap();
        assert_eq!(s3.max_needed_level, 1);

        let path = Graph::path(3);
        let center = saw_tree_stats(&path, &no_pins(), 1, 2, 1 << 20).unwrap();
        assert_eq!(center.max_needed_level, 0);
        let end = saw_tree_stats(&path, &no_pins(), 0, 2, 1 << 20).unwrap();
        assert_eq!(end.max_needed_level, 1);
    }

    #[test]
    fn stats_agree_with_bitwise_exactness() {
        let g = Graph::cycle(5);
        let p = params(0.0, 2.0);
        let stats = saw_tree_stats(&g, &no_pins(), 0, 2, 1 << 20).unwrap();
        let exact = exact_marginal(&g, &p, &no_pins(), 0).unwrap();
        let fit = crate::estimator::marginal_bounds(
            &g,
            &no_pins(),
            &p,
            0,
            stats.max_needed_level,
            2,
        )
        .unwrap();
        assert_eq!(fit.r_lo, fit.r_hi);
        assert!((fit.p_lo - exact).abs() <= 1e-12);
        if stats.max_needed_level > 0 {
            let truncated = crate::estimator::marginal_bounds(
                &g,
                &no_pins(),
                &p,
                0,
                stats.max_needed_level - 1,
                2,
            )
            .unwrap();
            assert!(truncated.p_lo < truncated.p_hi);
        }
    }

    #[test]
    fn mixing_probe_shrinks_along_a_path() {
        let g = Graph::path(11);
        let p = params(0.0, 2.0);
        let gap_at = |d: u32| {
            let a = PinSet::from_pairs(&[(5 - d, Color::Blue), (5 + d, Color::Blue)]);
            let b = PinSet::from_pairs(&[(5 - d, Color::Green), (5 + d, Color::Green)]);
            ssm_probe(&g, &p, &a, &b, 5).unwrap()
        };
        // Stride two keeps the boundary parity fixed.
        let (g1, g3, g5) = (gap_at(1), gap_at(3), gap_at(5));
        assert!(g1 > g3 && g3 > g5, "gaps {g1} {g3} {g5}");
    }

    #[test]
    fn mixing_probe_rejects_mismatched_domains() {
        let g = Graph::path(5);
        let a = PinSet::from_pairs(&[(0, Color::Blue)]);
        let b = PinSet::from_pairs(&[(4, Color::Green)]);
        assert!(matches!(
            ssm_probe(&g, &params(0.0, 2.0), &a, &b, 2),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn decay_trace_shrinks_and_records_nodes() {
        let g = Graph::complete_binary_tree(4);
        let p = params(0.0, 2.0);
        let trace = decay_profile(&g, &p, &no_pins(), 0, 4).unwrap();
        assert_eq!(trace.deltas.len(), 5);
        assert!(trace.deltas[0] > trace.deltas[4]);
        assert!(!trace.nodes.is_empty());
        for rec in &trace.nodes {
            assert!(rec.lo <= rec.hi);
            assert!(rec.eps >= 0.0);
            if rec.d_free == 0 && rec.d0 + rec.d1 == 0 {
                assert_eq!(rec.eps, 0.0, "leaves are exact");
            }
        }
    }

    #[test]
    fn decay_profile_requires_the_guaranteed_regime() {
        let g = Graph::path(3);
        assert!(matches!(
            decay_profile(&g, &params(0.0, 1.05), &no_pins(), 0, 3),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn decay_profile_swaps_internally() {
        let g = Graph::path(4);
        let direct = decay_profile(&g, &params(0.0, 2.0), &no_pins(), 0, 3).unwrap();
        let mirrored = decay_profile(&g, &params(2.0, 0.0), &no_pins(), 0, 3).unwrap();
        for (a, b) in direct.deltas.iter().zip(&mirrored.deltas) {
            assert!((a - b).abs() <= 1e-15);
        }
    }
}
