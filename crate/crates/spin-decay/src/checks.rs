//! Self-validation battery.
//!
//! Nine checks exercise the numeric core, the walk-tree machinery, and the
//! end-to-end estimator against exact enumeration and against the
//! contraction guarantees the certified regime promises. Each check is
//! deterministic given its seed and reports a pass flag plus a short
//! human-readable detail line; internal wall-clock limits mark a check
//! failed when it finishes over budget even if every assertion held.

use crate::estimator::{self, ExtRatio};
use crate::graph::{Color, Graph, PinSet, SpinParams};
use crate::{fptas, oracle, thresholds};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Result of one check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckOutcome {
    pub detail: String,
    pub name: String,
    pub passed: bool,
    pub seconds: f64,
}

fn run_check(
    name: &str,
    limit_seconds: Option<f64>,
    body: impl FnOnce() -> std::result::Result<String, String>,
) -> CheckOutcome {
    let start = Instant::now();
    let (mut passed, mut detail) = match body() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    let seconds = start.elapsed().as_secs_f64();
    if passed {
        if let Some(limit) = limit_seconds {
            if seconds > limit {
                passed = false;
                detail = format!("finished in {seconds:.1}s, over the {limit}s budget ({detail})");
            }
        }
    }
    CheckOutcome { detail, name: name.to_string(), passed, seconds }
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

// ===========================================================================
// Random instance generators
// ===========================================================================

/// Uniform-attachment tree with a degree cap (cap at least 2, so a valid
/// attachment point always exists).
fn random_tree(n: u32, max_deg: usize, rng: &mut ChaCha8Rng) -> Graph {
    assert!(max_deg >= 2);
    let mut deg = vec![0usize; n as usize];
    let mut edges = Vec::new();
    for i in 1..n {
        let j = loop {
            let j = rng.gen_range(0..i);
            if deg[j as usize] < max_deg {
                break j;
            }
        };
        deg[j as usize] += 1;
        deg[i as usize] += 1;
        edges.push((j, i));
    }
    Graph::from_edges(n as usize, &edges).expect("attachment edges are valid")
}

/// Connected graph: a degree-capped tree plus up to `extra` additional
/// edges (attempts that would break the cap or duplicate an edge are
/// dropped).
fn random_connected_graph(n: u32, extra: u32, max_deg: usize, rng: &mut ChaCha8Rng) -> Graph {
    let tree = random_tree(n, max_deg, rng);
    let mut deg: Vec<usize> = (0..n).map(|v| tree.degree(v)).collect();
    let mut edges = tree.edges();
    let mut present: std::collections::HashSet<(u32, u32)> = edges.iter().copied().collect();
    if n >= 2 {
        for _ in 0..extra {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a == b {
                continue;
            }
            let (u, v) = (a.min(b), a.max(b));
            if present.contains(&(u, v)) || deg[u as usize] >= max_deg || deg[v as usize] >= max_deg
            {
                continue;
            }
            present.insert((u, v));
            deg[u as usize] += 1;
            deg[v as usize] += 1;
            edges.push((u, v));
        }
    }
    Graph::from_edges(n as usize, &edges).expect("edge additions stay valid")
}

fn random_pins(n: u32, k: u32, rng: &mut ChaCha8Rng) -> PinSet {
    let mut pins = PinSet::new();
    for _ in 0..k {
        let v = rng.gen_range(0..n);
        let c = if rng.gen_bool(0.5) { Color::Blue } else { Color::Green };
        pins.insert(v, c);
    }
    pins
}

/// Pins with strictly positive conditional partition value (resampled on
/// zero-weight assignments, which arise from adjacent blue pins at
/// `beta = 0`).
fn viable_pins(
    graph: &Graph,
    params: &SpinParams,
    k: u32,
    rng: &mut ChaCha8Rng,
) -> (PinSet, oracle::ExactResult) {
    for attempt in 0..64 {
        let pins = random_pins(graph.n() as u32, if attempt < 48 { k } else { 1 }, rng);
        let exact = oracle::exact_partition(graph, params, &pins).expect("within the size cap");
        if exact.z > 0.0 {
            return (pins, exact);
        }
    }
    let pins = PinSet::new();
    let exact = oracle::exact_partition(graph, params, &pins).expect("within the size cap");
    (pins, exact)
}

// ===========================================================================
// Criterion bodies
// ===========================================================================

fn criterion_1_inner() -> std::result::Result<String, String> {
    let (gamma_star, d_star) = thresholds::big_gamma_integer_beta0();
    let closed_form = 10.0 * 11f64.powf(-11.0 / 12.0);
    if (gamma_star - closed_form).abs() > 1e-9 {
        return Err(format!(
            "integer-degree optimum {gamma_star:.12} differs from the closed form \
             {closed_form:.12} by more than 1e-9"
        ));
    }
    if d_star != 11 {
        return Err(format!("integer-degree optimum sits at degree {d_star}, expected 11"));
    }
    let cp = thresholds::big_gamma(0.0).map_err(|e| e.to_string())?;
    if (cp.gamma - 1.1101715).abs() > 1e-6 {
        return Err(format!(
            "continuous optimum {:.9} differs from 1.1101715 by more than 1e-6",
            cp.gamma
        ));
    }
    Ok(format!(
        "integer optimum {gamma_star:.12} at degree {d_star}; continuous optimum {:.9} at \
         degree {:.4}",
        cp.gamma, cp.d
    ))
}

pub fn criterion_1(_seed: u64) -> CheckOutcome {
    run_check("critical points at beta zero", Some(5.0), criterion_1_inner)
}

fn criterion_2_inner() -> std::result::Result<String, String> {
    let mut worst = 0.0f64;
    for beta in [0.0, 0.1, 0.3, 0.5] {
        let cp = thresholds::big_gamma(beta).map_err(|e| e.to_string())?;
        let x = thresholds::fixed_point_x(beta, cp.gamma, cp.d).map_err(|e| e.to_string())?.x;
        let a = thresholds::alpha_sym(beta, cp.gamma, cp.d, cp.d, x);
        if (a - 1.0).abs() > 1e-6 {
            return Err(format!(
                "contraction value {a:.9} at the critical point for beta = {beta} is not 1 \
                 within 1e-6"
            ));
        }
        worst = worst.max((a - 1.0).abs());
    }
    let (gamma_star, d_star) = thresholds::big_gamma_integer_beta0();
    let d = f64::from(d_star);
    let x = thresholds::fixed_point_x(0.0, gamma_star, d).map_err(|e| e.to_string())?.x;
    let a = thresholds::alpha_sym(0.0, gamma_star, d, d, x);
    if (a - 1.0).abs() > 1e-6 {
        return Err(format!(
            "contraction value {a:.9} at the integer-degree critical point is not 1 within 1e-6"
        ));
    }
    worst = worst.max((a - 1.0).abs());
    Ok(format!("largest |alpha - 1| at a critical point: {worst:.2e}"))
}

pub fn criterion_2(_seed: u64) -> CheckOutcome {
    run_check("contraction is tight at criticality", Some(10.0), criterion_2_inner)
}

fn criterion_3_inner() -> std::result::Result<String, String> {
    let mut worst = 0.0f64;
    for i in 0..=9u32 {
        let beta = f64::from(i) / 10.0;
        let rep = thresholds::check_fixed_point_identities(beta).map_err(|e| e.to_string())?;
        for (label, r) in [
            ("log-derivative identity", rep.log_identity_residual),
            ("alternative form", rep.log_identity_alt_residual),
            ("fixed-point equation", rep.defining_residual),
            ("ratio ordering", rep.ordering_residual),
        ] {
            if r > 1e-6 {
                return Err(format!("{label} residual {r:.3e} at beta = {beta} exceeds 1e-6"));
            }
            worst = worst.max(r);
        }
    }
    Ok(format!("largest identity residual over beta in 0..0.9: {worst:.2e}"))
}

pub fn criterion_3(_seed: u64) -> CheckOutcome {
    run_check("critical fixed-point identities", None, criterion_3_inner)
}

fn criterion_4_sized(seed: u64, target_graphs: usize) -> CheckOutcome {
    run_check("walk-tree marginals match enumeration", Some(60.0), || {
        let mut rng = rng_for(seed, 4);
        let params_pool =
            [SpinParams::new(0.0, 2.0), SpinParams::new(0.1, 2.5), SpinParams::new(0.3, 1.6)];
        let mut graphs: Vec<Graph> = Vec::new();
        for n in 2..=8usize {
            graphs.push(Graph::path(n));
        }
        for n in 3..=8usize {
            graphs.push(Graph::cycle(n));
        }
        for n in 3..=7usize {
            graphs.push(Graph::complete(n));
        }
        for leaves in 3..=7usize {
            graphs.push(Graph::star(leaves));
        }
        while graphs.len() < target_graphs {
            let n = rng.gen_range(4..=8u32);
            let extra = rng.gen_range(0..=3u32);
            graphs.push(random_connected_graph(n, extra, 7, &mut rng));
        }
        let mut scenarios = 0usize;
        let mut queries = 0usize;
        let mut worst = 0.0f64;
        for (gi, g) in graphs.iter().enumerate() {
            let params = params_pool[gi % params_pool.len()];
            let mut pin_sets = vec![(PinSet::new(), None)];
            for k in [1u32, 2] {
                let (pins, exact) = viable_pins(g, &params, k, &mut rng);
                pin_sets.push((pins, Some(exact)));
            }
            for (pins, cached) in pin_sets {
                let exact = match cached {
                    Some(e) => e,
                    None => oracle::exact_partition(g, &params, &pins)
                        .map_err(|e| e.to_string())?,
                };
                scenarios += 1;
                for v in 0..g.n() as u32 {
                    if pins.is_pinned(v) {
                        continue;
                    }
                    let p = exact.marginals[v as usize];
                    let r_true = p / (1.0 - p);
                    let r_tree = oracle::exact_tree_r(g, &pins, &params, v, 5_000_000)
                        .map_err(|e| e.to_string())?
                        .value();
                    let gap = (r_tree - r_true).abs();
                    if gap > 1e-9 {
                        return Err(format!(
                            "walk-tree ratio {r_tree:.12} vs enumerated {r_true:.12} at \
                             vertex {v} (n = {}, gap {gap:.3e})",
                            g.n()
                        ));
                    }
                    worst = worst.max(gap);
                    queries += 1;
                }
            }
        }
        Ok(format!(
            "{} graphs, {scenarios} pin scenarios, {queries} vertex queries, \
             largest ratio gap {worst:.2e}",
            graphs.len()
        ))
    })
}

pub fn criterion_4(seed: u64) -> CheckOutcome {
    criterion_4_sized(seed, 50)
}

fn ext_eq(a: ExtRatio, b: ExtRatio) -> bool {
    match (a, b) {
        (ExtRatio::Zero, ExtRatio::Zero) | (ExtRatio::Infinite, ExtRatio::Infinite) => true,
        (ExtRatio::Finite(x), ExtRatio::Finite(y)) => x.to_bits() == y.to_bits(),
        _ => false,
    }
}

fn criterion_5_sized(seed: u64, instances: usize) -> CheckOutcome {
    run_check("truncated bounds sandwich the truth", None, || {
        let mut rng = rng_for(seed, 5);
        let params_pool = [SpinParams::new(0.0, 2.0), SpinParams::new(0.2, 2.2)];
        let m_pool = [2u32, 3, 18];
        let mut exact_hits = 0usize;
        let mut nesting_checks = 0usize;
        for i in 0..instances {
            let n = rng.gen_range(3..=14u32);
            let g = if rng.gen_bool(0.3) {
                random_tree(n, 8, &mut rng)
            } else {
                random_connected_graph(n, rng.gen_range(0..=3), 8, &mut rng)
            };
            let params = params_pool[i % params_pool.len()];
            let m = m_pool[i % m_pool.len()];
            let k = rng.gen_range(0..=2u32);
            let (pins, exact) = viable_pins(&g, &params, k, &mut rng);
            let free: Vec<u32> = (0..n).filter(|&v| !pins.is_pinned(v)).collect();
            if free.is_empty() {
                continue;
            }
            let v = free[rng.gen_range(0..free.len())];
            let p_true = exact.marginals[v as usize];
            let l_top = rng.gen_range(4..=8u32);
            let mut runs = Vec::new();
            for l in 0..=l_top {
                runs.push(
                    estimator::marginal_bounds(&g, &pins, &params, v, l, m)
                        .map_err(|e| e.to_string())?,
                );
            }
            for (l, b) in runs.iter().enumerate() {
                if !(b.p_lo - 1e-12 <= p_true && p_true <= b.p_hi + 1e-12) {
                    return Err(format!(
                        "bounds [{:.12}, {:.12}] at budget {l} miss the exact marginal \
                         {p_true:.12} (n = {n}, m = {m})",
                        b.p_lo, b.p_hi
                    ));
                }
            }
            for w in runs.windows(2) {
                let (outer, inner) = (&w[0], &w[1]);
                if !(outer.r_lo.le(inner.r_lo) && inner.r_hi.le(outer.r_hi)) {
                    return Err(format!(
                        "deeper bounds are not nested at n = {n}, m = {m}, vertex {v}"
                    ));
                }
                nesting_checks += 1;
            }
            if let Ok(stats) = oracle::saw_tree_stats(&g, &pins, v, m, 200_000) {
                if stats.max_needed_level <= l_top {
                    let last = &runs[stats.max_needed_level as usize];
                    if !ext_eq(last.r_lo, last.r_hi) || last.p_lo != last.p_hi {
                        return Err(format!(
                            "budget {} should evaluate the whole walk tree exactly at n = {n}, \
                             m = {m}, vertex {v}",
                            stats.max_needed_level
                        ));
                    }
                    exact_hits += 1;
                }
            }
        }
        Ok(format!(
            "{instances} instances, {nesting_checks} nesting checks, \
             {exact_hits} exact full-tree evaluations"
        ))
    })
}

pub fn criterion_5(seed: u64) -> CheckOutcome {
    criterion_5_sized(seed, 100)
}

fn criterion_6_sized(seed: u64, random_instances: usize) -> CheckOutcome {
    run_check("sandwich width decays geometrically", None, || {
        let mut rng = rng_for(seed, 6);
        let params = SpinParams::new(0.0, 2.0);
        let pins = PinSet::new();
        let mut cases: Vec<(Graph, u32, u32)> = vec![(Graph::complete_binary_tree(12), 0, 12)];
        for _ in 0..random_instances {
            let n = rng.gen_range(5..=14u32);
            let g = random_connected_graph(n, rng.gen_range(0..=2), 6, &mut rng);
            let v = rng.gen_range(0..n);
            cases.push((g, v, 8));
        }
        let mut slopes = 0usize;
        let mut worst_margin = f64::NEG_INFINITY;
        for (g, v, l_max) in &cases {
            let trace =
                oracle::decay_profile(g, &params, &pins, *v, *l_max).map_err(|e| e.to_string())?;
            let alpha = trace.alpha;
            let m = f64::from(trace.m);
            for (l, &delta) in trace.deltas.iter().enumerate() {
                let bound = 2.0 * m * alpha.powi(l as i32 - 1);
                if delta > bound * (1.0 + 1e-9) + 1e-15 {
                    return Err(format!(
                        "width {delta:.3e} at budget {l} exceeds the decay envelope \
                         {bound:.3e} (n = {})",
                        g.n()
                    ));
                }
            }
            // The rate cap is a regression claim, so it is asserted only when
            // the trace supports a regression: with fewer than four
            // finite-width budgets the "slope" is a one- or two-step secant,
            // and a single step may contract slower than alpha without
            // contradicting the envelope above, which is what the theory
            // actually bounds.
            let points = trace.deltas.iter().filter(|&&d| d > 1e-12).count();
            if let Some(slope) = trace.slope.filter(|_| points >= 4) {
                let cap = alpha.ln() + 0.05;
                if slope > cap {
                    return Err(format!(
                        "log-width slope {slope:.4} exceeds ln(alpha) + 0.05 = {cap:.4} \
                         (n = {})",
                        g.n()
                    ));
                }
                worst_margin = worst_margin.max(slope - alpha.ln());
                slopes += 1;
            }
        }
        Ok(format!(
            "{} traces, {slopes} regression slopes within the cap, worst slope excess \
             over ln(alpha): {worst_margin:.3}",
            cases.len()
        ))
    })
}

pub fn criterion_6(seed: u64) -> CheckOutcome {
    criterion_6_sized(seed, 10)
}

fn criterion_7_sized(seed: u64, instances: usize) -> CheckOutcome {
    run_check("estimates meet the error budget", Some(600.0), || {
        let mut rng = rng_for(seed, 7);
        let params = SpinParams::new(0.0, 2.0);
        let eps = 0.05;
        let mut worst = 0.0f64;
        let mut largest = 0usize;
        for i in 0..instances {
            let n = if i < 3 { 18 - i as u32 } else { rng.gen_range(2..=18u32) };
            let extra = rng.gen_range(0..=n / 3);
            let g = random_connected_graph(n, extra, 6, &mut rng);
            largest = largest.max(g.n());
            let est = fptas::estimate_partition(&g, &params, eps).map_err(|e| e.to_string())?;
            if !est.certified {
                return Err("estimate in the guaranteed regime lost certification".into());
            }
            let exact =
                oracle::exact_log_z(&g, &params, &PinSet::new()).map_err(|e| e.to_string())?;
            let rel = (est.log_z - exact).exp() - 1.0;
            if rel.abs() > eps {
                return Err(format!(
                    "relative error {rel:.4} exceeds epsilon = {eps} on n = {n}, \
                     {} edges",
                    g.m()
                ));
            }
            worst = worst.max(rel.abs());
        }
        Ok(format!(
            "{instances} graphs up to {largest} vertices, worst relative error {worst:.2e} \
             against the {eps} budget"
        ))
    })
}

pub fn criterion_7(seed: u64) -> CheckOutcome {
    criterion_7_sized(seed, 100)
}

fn criterion_8_sized(seed: u64, instances: usize) -> CheckOutcome {
    run_check("per-node contraction bookkeeping", None, || {
        let mut rng = rng_for(seed, 8);
        let params = SpinParams::new(0.0, 2.0);
        let mut records = 0usize;
        let mut steps = 0usize;
        for _ in 0..instances {
            let n = rng.gen_range(5..=40u32);
            let g = random_tree(n, 8, &mut rng);
            let k = rng.gen_range(0..=2u32);
            let pins = random_pins(n, k, &mut rng);
            let free: Vec<u32> = (0..n).filter(|&v| !pins.is_pinned(v)).collect();
            let v = free[rng.gen_range(0..free.len())];
            let l_max = rng.gen_range(6..=10u32);
            let trace =
                oracle::decay_profile(&g, &params, &pins, v, l_max).map_err(|e| e.to_string())?;
            let alpha = trace.alpha;
            let m = f64::from(trace.m);
            for rec in &trace.nodes {
                let basis = m * alpha.powi(rec.charge as i32 - 1);
                if rec.eps > basis * (1.0 + 1e-9) + 1e-15 {
                    return Err(format!(
                        "node gap {:.3e} at depth {} exceeds the basis bound {basis:.3e} \
                         (charge {})",
                        rec.eps, rec.depth, rec.charge
                    ));
                }
                records += 1;
                if rec.all_children_measured {
                    let step = alpha.powi(rec.charge as i32) * rec.max_child_eps;
                    if rec.eps > step * (1.0 + 1e-9) + 1e-15 {
                        return Err(format!(
                            "node gap {:.3e} at depth {} exceeds the one-step bound \
                             {step:.3e} (charge {}, child gap {:.3e})",
                            rec.eps, rec.depth, rec.charge, rec.max_child_eps
                        ));
                    }
                    steps += 1;
                }
            }
        }
        Ok(format!(
            "{instances} trees, {records} node records within the basis bound, \
             {steps} within the one-step bound"
        ))
    })
}

pub fn criterion_8(seed: u64) -> CheckOutcome {
    criterion_8_sized(seed, 20)
}

fn criterion_9_inner(seed: u64) -> std::result::Result<String, String> {
    let mut rng = rng_for(seed, 9);
    let params = SpinParams::new(0.0, 2.0);
    let pins = PinSet::new();
    let mut pool: Vec<Graph> = Vec::new();
    for n in 2..=10usize {
        pool.push(Graph::path(n));
    }
    for n in 3..=9usize {
        pool.push(Graph::cycle(n));
        pool.push(Graph::complete(n));
    }
    for leaves in 2..=9usize {
        pool.push(Graph::star(leaves));
    }
    for depth in 1..=4u32 {
        pool.push(Graph::complete_binary_tree(depth));
    }
    for _ in 0..5 {
        let n = rng.gen_range(4..=10u32);
        pool.push(random_connected_graph(n, rng.gen_range(0..=4), 9, &mut rng));
    }
    let mut checks = 0usize;
    let mut equalities = 0usize;
    for g in &pool {
        let n = g.n() as u64;
        for &m in &[2u32, 3, 5, 17] {
            for l in 0..=5u32 {
                for v in [0, g.n() as u32 - 1] {
                    let b = estimator::marginal_bounds(g, &pins, &params, v, l, m)
                        .map_err(|e| e.to_string())?;
                    let cap = u128::from(n) * u128::from(m).pow(l);
                    if u128::from(b.nodes_visited) > cap {
                        return Err(format!(
                            "visited {} nodes, over the n * m^l cap {cap} (n = {n}, m = {m}, \
                             l = {l})",
                            b.nodes_visited
                        ));
                    }
                    if u128::from(b.nodes_visited) == cap {
                        equalities += 1;
                    }
                    checks += 1;
                }
            }
        }
    }
    // The cap is attained: a star queried at its center with no budget
    // visits every vertex.
    let star = Graph::star(9);
    let b = estimator::marginal_bounds(&star, &pins, &params, 0, 0, 2)
        .map_err(|e| e.to_string())?;
    if b.nodes_visited != 10 {
        return Err(format!(
            "star center with zero budget visited {} nodes, expected exactly 10",
            b.nodes_visited
        ));
    }
    let k4 = Graph::complete(4);
    let b = estimator::marginal_bounds(&k4, &pins, &params, 0, 0, 2).map_err(|e| e.to_string())?;
    if b.nodes_visited != 4 {
        return Err(format!(
            "complete-graph root with zero budget visited {} nodes, expected exactly 4",
            b.nodes_visited
        ));
    }
    Ok(format!("{checks} (graph, m, l, vertex) combinations, {equalities} met the cap exactly"))
}

pub fn criterion_9(seed: u64) -> CheckOutcome {
    run_check("visit counts respect the work cap", None, || criterion_9_inner(seed))
}

/// Runs the whole battery. `quick` shrinks the randomized sample sizes for
/// interactive use; the seeds and logic are identical.
pub fn run_all(quick: bool, seed: u64) -> Vec<CheckOutcome> {
    if quick {
        vec![
            criterion_1(seed),
            criterion_2(seed),
            criterion_3(seed),
            criterion_4_sized(seed, 12),
            criterion_5_sized(seed, 20),
            criterion_6_sized(seed, 3),
            criterion_7_sized(seed, 10),
            criterion_8_sized(seed, 5),
            criterion_9(seed),
        ]
    } else {
        vec![
            criterion_1(seed),
            criterion_2(seed),
            criterion_3(seed),
            criterion_4(seed),
            criterion_5(seed),
            criterion_6(seed),
            criterion_7(seed),
            criterion_8(seed),
            criterion_9(seed),
        ]
    }
}

// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_respect_their_contracts() {
        let mut rng = rng_for(7, 1);
        for _ in 0..20 {
            let n = rng.gen_range(2..=12u32);
            let g = random_tree(n, 3, &mut rng);
            assert_eq!(g.m(), n as usize - 1);
            assert!(g.max_degree() <= 3);
            assert_eq!(g.components().len(), 1);
            let h = random_connected_graph(n, 4, 4, &mut rng);
            assert!(h.max_degree() <= 4);
            assert_eq!(h.components().len(), 1);
            assert!(h.m() >= n as usize - 1);
        }
    }

    #[test]
    fn viable_pins_avoid_zero_weight_assignments() {
        let mut rng = rng_for(11, 2);
        let g = Graph::complete(4);
        let params = SpinParams::new(0.0, 2.0);
        for _ in 0..10 {
            let (pins, exact) = viable_pins(&g, &params, 2, &mut rng);
            assert!(exact.z > 0.0);
            assert!(pins.len() <= 2);
        }
    }

    #[test]
    fn quick_battery_passes() {
        for outcome in run_all(true, 0xC0FFEE) {
            assert!(outcome.passed, "{}: {}", outcome.name, outcome.detail);
        }
    }

    /// Diagnostic behind the >= 4 finite-width-budget rule in the decay
    /// criterion: over 20k traces (2000 seeds x 10 graphs) the fitted slope
    /// never comes within 0.19 of ln(alpha) once a trace has four usable
    /// points, while one- and two-step secants breach the cap routinely.
    /// Run with: cargo test --release scan_slope_fits -- --ignored --nocapture
    #[test]
    #[ignore]
    fn scan_slope_fits_across_seeds() {
        let params = SpinParams::new(0.0, 2.0);
        let pins = PinSet::new();
        let mut breaches_by_points = std::collections::BTreeMap::<usize, usize>::new();
        let mut worst_by_points = std::collections::BTreeMap::<usize, f64>::new();
        let mut traces = 0usize;
        for seed in 0..2000u64 {
            let mut rng = rng_for(seed, 6);
            for _ in 0..10 {
                let n = rng.gen_range(5..=14u32);
                let g = random_connected_graph(n, rng.gen_range(0..=2), 6, &mut rng);
                let v = rng.gen_range(0..n);
                let trace = crate::oracle::decay_profile(&g, &params, &pins, v, 8).unwrap();
                traces += 1;
                let points = trace.deltas.iter().filter(|&&d| d > 1e-12).count();
                if let Some(slope) = trace.slope {
                    let cap = trace.alpha.ln() + 0.05;
                    let w = worst_by_points.entry(points).or_insert(f64::NEG_INFINITY);
                    *w = w.max(slope - trace.alpha.ln());
                    if slope > cap {
                        *breaches_by_points.entry(points).or_insert(0) += 1;
                    }
                }
            }
        }
        println!("{traces} traces scanned");
        println!("worst slope excess over ln(alpha) by usable-point count:");
        for (points, worst) in &worst_by_points {
            println!(
                "  {points} points: worst {worst:+.4}, breaches {}",
                breaches_by_points.get(points).copied().unwrap_or(0)
            );
        }
    }
}
