//! Partition-value estimation with certified relative error.
//!
//! The estimate telescopes per connected component: vertices are taken in
//! ascending order, each free vertex's blue-probability is sandwiched by
//! the truncated walk-tree recursion conditioned on all earlier free
//! vertices in its component held green (in the working color orientation),
//! and the component's partition value is the base weight of the all-green
//! extension of the pins divided by the product of green-probabilities.
//! Components multiply, so their log-values add in component order; the
//! whole pipeline is deterministic bitwise, independent of thread count,
//! because queries are independent and combined in a fixed order.
//!
//! In the guaranteed regime the depth budget grows like `log(M n / eps)`,
//! which keeps the per-query work polynomial (at most `n * M^L` structural
//! evaluations) while the sandwich width shrinks below `eps / (8 n)` per
//! vertex; outside it the caller must force explicit contraction
//! parameters and the result carries `certified: false`.

use crate::estimator;
use crate::graph::{
    classify_regime, Color, Graph, PinSet, Regime, RegimeReport, SpinParams,
};
use crate::thresholds;
use crate::{Error, Result};
use rayon::prelude::*;

/// Optional overrides for one estimation run. Any override on guaranteed
/// parameters drops certification; unguaranteed parameters additionally
/// require `force` together with explicit `alpha` and `m`.
#[derive(Debug, Clone, Copy, Default)]
pub struct EstimateOptions {
    pub alpha: Option<f64>,
    pub force: bool,
    pub l: Option<u32>,
    pub m: Option<u32>,
}

/// One telescoping step, reported in the original color orientation:
/// bounds on the blue-probability of `vertex` conditioned on the earlier
/// free vertices of its component being held at the orientation's
/// conditioning color.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MarginalRecord {
    pub p_hi: f64,
    pub p_lo: f64,
    pub p_mid: f64,
    pub vertex: u32,
}

/// Result of a full partition estimation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PartitionEstimate {
    pub alpha_used: f64,
    pub certified: bool,
    pub epsilon: f64,
    pub l_used: u32,
    pub log_z: f64,
    pub m_used: u32,
    pub marginals: Vec<MarginalRecord>,
    pub nodes_visited_max_query: u64,
    pub nodes_visited_total: u64,
    pub regime: RegimeReport,
    /// `exp(log_z)` when it fits in an f64, absent on overflow.
    pub z: Option<f64>,
}

/// Result of a single marginal query.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MarginalEstimate {
    pub alpha_used: f64,
    pub certified: bool,
    pub epsilon: f64,
    pub l_used: u32,
    pub m_used: u32,
    pub nodes_visited: u64,
    pub p_hi: f64,
    pub p_lo: f64,
    pub p_mid: f64,
    pub regime: RegimeReport,
    pub vertex: u32,
}

/// Depth budget that drives every per-vertex sandwich below `eps / (8 M n)`:
/// `ceil(ln(8 M n / eps) / ln(1/alpha)) + 1`.
pub fn choose_budget(n: usize, eps: f64, alpha: f64, m: u32) -> Result<u32> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if m < 2 {
        return Err(Error::InvalidInput(format!("branching base must be at least 2, got {m}")));
    }
    let n = n.max(1) as f64;
    let l = ((8.0 * m as f64 * n / eps).ln() / (1.0 / alpha).ln()).ceil() + 1.0;
    Ok(l.max(0.0) as u32)
}

struct WorkSetup {
    params: SpinParams,
    swapped: bool,
    report: RegimeReport,
    alpha: f64,
    m: u32,
    certified: bool,
}

fn resolve(params: &SpinParams, opts: &EstimateOptions) -> Result<WorkSetup> {
    params.validate()?;
    if let Some(a) = opts.alpha {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidInput(format!("alpha override must lie in (0, 1), got {a}")));
        }
    }
    if let Some(m) = opts.m {
        if m < 2 {
            return Err(Error::InvalidInput(format!(
                "branching base override must be at least 2, got {m}"
            )));
        }
    }
    let report = classify_regime(*params)?;
    match report.regime {
        Regime::Degenerate => Err(Error::Regime(format!(
            "degenerate parameters beta={}, gamma={}: the telescoping denominators are not \
             defined here, with or without forcing",
            params.beta, params.gamma
        ))),
        Regime::Guaranteed | Regime::GuaranteedAfterSwap => {
            let swapped = report.regime == Regime::GuaranteedAfterSwap;
            let wp = if swapped { params.swapped() } else { *params };
            let prof = thresholds::profile(wp.beta, wp.gamma)?;
            let overridden = opts.alpha.is_some() || opts.m.is_some() || opts.l.is_some();
            Ok(WorkSetup {
                params: wp,
                swapped,
                report,
                alpha: opts.alpha.unwrap_or(prof.alpha),
                m: opts.m.unwrap_or(prof.m),
                certified: !overridden,
            })
        }
        Regime::Unguaranteed => {
            if !(opts.force && opts.alpha.is_some() && opts.m.is_some()) {
                let hint = report
                    .threshold_used
                    .map(|t| format!(" (certified above gamma = {t:.7})"))
                    .unwrap_or_default();
                return Err(Error::Regime(format!(
                    "parameters beta={}, gamma={} fall outside the certified regime{hint}; \
                     forcing an uncertified run requires explicit alpha and branching base",
                    params.beta, params.gamma
                )));
            }
            let swapped = params.gamma < params.beta;
            let wp = if swapped { params.swapped() } else { *params };
            Ok(WorkSetup {
                params: wp,
                swapped,
                report,
                alpha: opts.alpha.expect("checked above"),
                m: opts.m.expect("checked above"),
                certified: false,
            })
        }
    }
}

struct Query {
    v: u32,
    pins: PinSet,
}

/// Log base weight of `pins` extended all-green over the edges inside one
/// component; `None` when some pinned blue-blue edge kills every consistent
/// configuration at `beta = 0` (so the conditional value is exactly zero).
fn component_base_weight(
    graph: &Graph,
    comp: &[u32],
    pins: &PinSet,
    params: &SpinParams,
) -> Option<f64> {
    // Components are closed under adjacency, so every neighbor is inside.
    let mut ln_w = 0.0;
    for &u in comp {
        for &v in graph.neighbors(u) {
            if u < v {
                let cu = pins.get(u).unwrap_or(Color::Green);
                let cv = pins.get(v).unwrap_or(Color::Green);
                match (cu, cv) {
                    (Color::Blue, Color::Blue) => {
                        if params.beta == 0.0 {
                            return None;
                        }
                        ln_w += params.beta.ln();
                    }
                    (Color::Green, Color::Green) => {
                        if params.gamma == 0.0 {
                            return None;
                        }
                        ln_w += params.gamma.ln();
                    }
                    _ => {}
                }
            }
        }
    }
    Some(ln_w)
}

/// Estimates the (optionally pinned) partition value to relative error
/// `eps` in the guaranteed regime. See the module docs for the telescoping
/// scheme and [`EstimateOptions`] for override semantics.
pub fn estimate_partition_with(
    graph: &Graph,
    params: &SpinParams,
    eps: f64,
    user_pins: &PinSet,
    opts: &EstimateOptions,
) -> Result<PartitionEstimate> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    user_pins.validate_for(graph)?;
    let setup = resolve(params, opts)?;
    let wp = setup.params;
    let pins = if setup.swapped { user_pins.flipped() } else { user_pins.clone() };
    let l = match opts.l {
        Some(l) => l,
        None => choose_budget(graph.n(), eps, setup.alpha, setup.m)?,
    };

    let comps = graph.components();
    let mut queries: Vec<Query> = Vec::new();
    // Per component: query range plus base weight (None marks exact zero).
    let mut spans: Vec<(usize, usize, Option<f64>)> = Vec::new();
    for comp in &comps {
        let start = queries.len();
        let base = component_base_weight(graph, comp, &pins, &wp);
        let mut prefix = pins.clone();
        for &v in comp {
            if !prefix.is_pinned(v) {
                queries.push(Query { v, pins: prefix.clone() });
                prefix.insert(v, Color::Green);
            }
        }
        spans.push((start, queries.len(), base));
    }

    let results: Result<Vec<estimator::MarginalBounds>> = queries
        .par_iter()
        .map(|q| estimator::marginal_bounds(graph, &q.pins, &wp, q.v, l, setup.m))
        .collect();
    let results = results?;

    let mut log_z = 0.0f64;
    for &(start, end, base) in &spans {
        match base {
            None => log_z += f64::NEG_INFINITY,
            Some(ln_w0) => {
                let mut comp_log = ln_w0;
                for r in &results[start..end] {
                    let p_mid = 0.5 * (r.p_lo + r.p_hi);
                    comp_log -= (-p_mid).ln_1p();
                }
                log_z += comp_log;
            }
        }
    }

    let nodes_visited_total: u64 = results.iter().map(|r| r.nodes_visited).sum();
    let nodes_visited_max_query = results.iter().map(|r| r.nodes_visited).max().unwrap_or(0);
    let marginals: Vec<MarginalRecord> = queries
        .iter()
        .zip(&results)
        .map(|(q, r)| {
            let (p_lo, p_hi) = if setup.swapped {
                (1.0 - r.p_hi, 1.0 - r.p_lo)
            } else {
                (r.p_lo, r.p_hi)
            };
            MarginalRecord { p_hi, p_lo, p_mid: 0.5 * (p_lo + p_hi), vertex: q.v }
        })
        .collect();
    let z = log_z.exp();
    Ok(PartitionEstimate {
        alpha_used: setup.alpha,
        certified: setup.certified,
        epsilon: eps,
        l_used: l,
        log_z,
        m_used: setup.m,
        marginals,
        nodes_visited_max_query,
        nodes_visited_total,
        regime: setup.report,
        z: z.is_finite().then_some(z),
    })
}

/// [`estimate_partition_with`] with no pins and default options.
pub fn estimate_partition(graph: &Graph, params: &SpinParams, eps: f64) -> Result<PartitionEstimate> {
    estimate_partition_with(graph, params, eps, &PinSet::new(), &EstimateOptions::default())
}

/// Sandwiches the blue-probability of one free vertex under `user_pins`,
/// in the original color orientation.
pub fn marginal(
    graph: &Graph,
    params: &SpinParams,
    user_pins: &PinSet,
    v: u32,
    eps: f64,
    opts: &EstimateOptions,
) -> Result<MarginalEstimate> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    user_pins.validate_for(graph)?;
    if user_pins.is_pinned(v) {
        return Err(Error::InvalidQuery(format!(
            "vertex {v} is pinned; its marginal is fixed by the pin"
        )));
    }
    let setup = resolve(params, opts)?;
    let wp = setup.params;
    let pins = if setup.swapped { user_pins.flipped() } else { user_pins.clone() };
    let l = match opts.l {
        Some(l) => l,
        None => choose_budget(graph.n(), eps, setup.alpha, setup.m)?,
    };
    let b = estimator::marginal_bounds(graph, &pins, &wp, v, l, setup.m)?;
    let (p_lo, p_hi) =
        if setup.swapped { (1.0 - b.p_hi, 1.0 - b.p_lo) } else { (b.p_lo, b.p_hi) };
    Ok(MarginalEstimate {
        alpha_used: setup.alpha,
        certified: setup.certified,
        epsilon: eps,
        l_used: l,
        m_used: setup.m,
        nodes_visited: b.nodes_visited,
        p_hi,
        p_lo,
        p_mid: 0.5 * (p_lo + p_hi),
        regime: setup.report,
        vertex: v,
    })
}

// ===========================================================================
