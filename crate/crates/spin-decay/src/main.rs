//! Command-line front end.
//!
//! Subcommands wrap the library operations one-to-one: `partition` runs the
//! certified estimator, `threshold` reports the critical-point numerics,
//! `oracle` enumerates small instances exactly, `decay` traces the sandwich
//! width against the depth budget, and `check` runs the self-validation
//! battery. All reports are emitted on stdout, as JSON with `--json`;
//! identical inputs produce byte-identical JSON regardless of `--threads`.
//! Wall time goes to stderr so it never perturbs the output bytes.
//!
//! Exit codes: 0 success, 2 invalid input (including unreadable or
//! malformed graph files), 3 regime refusal, 4 numeric failure; `check`
//! exits 1 when a criterion fails.

use clap::{Args, Parser, Subcommand};
use spin_decay::graph::{
    parse_graph_document, Color, GraphDocument, PinSet, RegimeReport, SpinParams,
};
use spin_decay::{checks, fptas, oracle, thresholds, Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "spin-decay",
    version,
    about = "Deterministic partition-value estimation for two-state spin systems",
    after_help = "Graph files list one edge per line as two whitespace-separated vertex ids; \
                  `v <id>` lines declare isolated vertices and `#` starts a comment. Vertex ids \
                  in flags refer to the ids used in the file."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate log Z (or one marginal with --vertex) with certified error.
    Partition(PartitionArgs),
    /// Critical threshold, contraction supremum, and branching base.
    Threshold(ThresholdArgs),
    /// Exact partition value and marginals by enumeration (small graphs).
    Oracle(OracleArgs),
    /// Sandwich-width decay against the depth budget at one vertex.
    Decay(DecayArgs),
    /// Run the self-validation battery.
    Check(CheckArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Graph file (edge list; see --help for the format).
    #[arg(long)]
    graph: PathBuf,
    /// Weight of a blue-blue edge.
    #[arg(long)]
    beta: f64,
    /// Weight of a green-green edge.
    #[arg(long)]
    gamma: f64,
    /// Pin a vertex, as `ID:blue` or `ID:green` (repeatable).
    #[arg(long = "pin", value_name = "ID:COLOR", value_parser = parse_pin)]
    pins: Vec<(u64, Color)>,
    /// Worker threads (default: the SPIN_DECAY_THREADS variable, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Emit the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    common: InstanceArgs,
    /// Target relative error, in (0, 1).
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Query a single vertex's marginal instead of the partition value.
    #[arg(long)]
    vertex: Option<u64>,
    /// Depth-budget override (voids certification).
    #[arg(long = "L")]
    l: Option<u32>,
    /// Branching-base override (voids certification).
    #[arg(long = "M")]
    m: Option<u32>,
    /// Contraction-rate override (voids certification).
    #[arg(long)]
    alpha: Option<f64>,
    /// Run outside the certified regime; requires --alpha and --M.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Blue-blue edge weight, in [0, 1).
    #[arg(long)]
    beta: f64,
    /// Also report the contraction supremum and branching base at this gamma.
    #[arg(long)]
    gamma: Option<f64>,
    /// Emit the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: InstanceArgs,
    /// Report only this vertex's marginal.
    #[arg(long)]
    vertex: Option<u64>,
}

#[derive(Args)]
struct DecayArgs {
    #[command(flatten)]
    common: InstanceArgs,
    /// Vertex whose sandwich is traced.
    #[arg(long)]
    vertex: u64,
    /// Largest depth budget in the trace.
    #[arg(long = "Lmax", default_value_t = 12)]
    l_max: u32,
}

#[derive(Args)]
struct CheckArgs {
    /// Smaller randomized samples (same logic, faster).
    #[arg(long)]
    quick: bool,
    /// Seed for the randomized instance generators.
    #[arg(long, default_value_t = 2026)]
    seed: u64,
    /// Worker threads (default: the SPIN_DECAY_THREADS variable, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Emit the report as JSON.
    #[arg(long)]
    json: bool,
}

fn parse_pin(s: &str) -> std::result::Result<(u64, Color), String> {
    let (id, color) = s
        .split_once(':')
        .ok_or_else(|| format!("`{s}` is not of the form ID:blue or ID:green"))?;
    let id = id
        .trim()
        .parse::<u64>()
        .map_err(|_| format!("`{}` is not a vertex id", id.trim()))?;
    let color = match color.trim().to_ascii_lowercase().as_str() {
        "blue" | "b" => Color::Blue,
        "green" | "g" => Color::Green,
        other => return Err(format!("`{other}` is not a color (blue or green)")),
    };
    Ok((id, color))
}

fn set_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("SPIN_DECAY_THREADS").ok().and_then(|s| s.trim().parse().ok())
    });
    if let Some(n) = n {
        if n >= 1 {
            // A second build attempt in one process is harmless.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn load_graph(path: &Path) -> Result<GraphDocument> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    parse_graph_document(&text)
}

fn canonical_vertex(doc: &GraphDocument, id: u64) -> Result<u32> {
    doc.canonical(id)
        .ok_or_else(|| Error::InvalidInput(format!("vertex {id} does not appear in the graph file")))
}

fn map_pins(doc: &GraphDocument, pins: &[(u64, Color)]) -> Result<PinSet> {
    let mut set = PinSet::new();
    for &(id, color) in pins {
        set.insert(canonical_vertex(doc, id)?, color);
    }
    Ok(set)
}

fn emit<T: serde::Serialize>(json: bool, report: &T, human: String) {
    if json {
        println!("{}", serde_json::to_string(report).expect("reports serialize"));
    } else {
        print!("{human}");
    }
}

fn describe_regime(r: &RegimeReport) -> String {
    let mut s = r.regime.name().to_string();
    if r.swap_applied {
        s.push_str(" (colors swapped internally)");
    }
    if let Some(t) = r.threshold_used {
        s.push_str(&format!(", threshold {t}"));
    }
    s
}

// ===========================================================================
// Reports (fields in alphabetical order; vertex ids are the file's ids)
// ===========================================================================

#[derive(serde::Serialize)]
struct MarginalOut {
    p_hi: f64,
    p_lo: f64,
    p_mid: f64,
    vertex: u64,
}

#[derive(serde::Serialize)]
struct PartitionReport {
    alpha_used: f64,
    certified: bool,
    edges: usize,
    epsilon: f64,
    l_used: u32,
    log_z: f64,
    m_used: u32,
    marginals: Vec<MarginalOut>,
    n: usize,
    nodes_visited_max_query: u64,
    nodes_visited_total: u64,
    regime: RegimeReport,
    z: Option<f64>,
}

#[derive(serde::Serialize)]
struct MarginalReport {
    alpha_used: f64,
    certified: bool,
    epsilon: f64,
    l_used: u32,
    m_used: u32,
    nodes_visited: u64,
    p_hi: f64,
    p_lo: f64,
    p_mid: f64,
    regime: RegimeReport,
    vertex: u64,
}

#[derive(serde::Serialize)]
struct IntegerCritical {
    d: u32,
    gamma: f64,
}

#[derive(serde::Serialize)]
struct ThresholdReport {
    alpha_at_gamma: Option<f64>,
    beta: f64,
    critical: thresholds::CriticalPoint,
    gamma: Option<f64>,
    identities: thresholds::IdentityReport,
    integer_critical: Option<IntegerCritical>,
    m_at_gamma: Option<u32>,
}

#[derive(serde::Serialize)]
struct OracleMarginal {
    p: f64,
    vertex: u64,
}

#[derive(serde::Serialize)]
struct OracleReport {
    log_z: f64,
    marginals: Vec<OracleMarginal>,
    n: usize,
    z: f64,
}

#[derive(serde::Serialize)]
struct DecayReport {
    alpha: f64,
    deltas: Vec<f64>,
    l_max: u32,
    ln_alpha: f64,
    m: u32,
    nodes_visited: Vec<u64>,
    slope: Option<f64>,
    vertex: u64,
}

#[derive(serde::Serialize)]
struct CheckReport {
    failed: usize,
    outcomes: Vec<checks::CheckOutcome>,
    passed: usize,
    quick: bool,
    seed: u64,
}

// ===========================================================================
// Subcommands
// ===========================================================================

fn cmd_partition(args: PartitionArgs) -> Result<ExitCode> {
    set_threads(args.common.threads);
    let doc = load_graph(&args.common.graph)?;
    let params = SpinParams::new(args.common.beta, args.common.gamma);
    let pins = map_pins(&doc, &args.common.pins)?;
    let opts =
        fptas::EstimateOptions { alpha: args.alpha, force: args.force, l: args.l, m: args.m };

    if let Some(vid) = args.vertex {
        let v = canonical_vertex(&doc, vid)?;
        let est = fptas::marginal(&doc.graph, &params, &pins, v, args.eps, &opts)?;
        let report = MarginalReport {
            alpha_used: est.alpha_used,
            certified: est.certified,
            epsilon: est.epsilon,
            l_used: est.l_used,
            m_used: est.m_used,
            nodes_visited: est.nodes_visited,
            p_hi: est.p_hi,
            p_lo: est.p_lo,
            p_mid: est.p_mid,
            regime: est.regime,
            vertex: vid,
        };
        let human = format!(
            "vertex {vid}: blue probability in [{}, {}], midpoint {}\n\
             regime: {}\ncertified: {}\n\
             alpha = {}, M = {}, L = {}, eps = {}\nnodes visited: {}\n",
            report.p_lo,
            report.p_hi,
            report.p_mid,
            describe_regime(&report.regime),
            report.certified,
            report.alpha_used,
            report.m_used,
            report.l_used,
            report.epsilon,
            report.nodes_visited
        );
        emit(args.common.json, &report, human);
        return Ok(ExitCode::SUCCESS);
    }

    let est = fptas::estimate_partition_with(&doc.graph, &params, args.eps, &pins, &opts)?;
    let report = PartitionReport {
        alpha_used: est.alpha_used,
        certified: est.certified,
        edges: doc.graph.m(),
        epsilon: est.epsilon,
        l_used: est.l_used,
        log_z: est.log_z,
        m_used: est.m_used,
        marginals: est
            .marginals
            .iter()
            .map(|r| MarginalOut {
                p_hi: r.p_hi,
                p_lo: r.p_lo,
                p_mid: r.p_mid,
                vertex: doc.original_ids[r.vertex as usize],
            })
            .collect(),
        n: doc.graph.n(),
        nodes_visited_max_query: est.nodes_visited_max_query,
        nodes_visited_total: est.nodes_visited_total,
        regime: est.regime,
        z: est.z,
    };
    let mut human = format!(
        "graph: {} vertices, {} edges\nregime: {}\ncertified: {}\n\
         alpha = {}, M = {}, L = {}, eps = {}\nlog Z = {}\n",
        report.n,
        report.edges,
        describe_regime(&report.regime),
        report.certified,
        report.alpha_used,
        report.m_used,
        report.l_used,
        report.epsilon,
        report.log_z
    );
    match report.z {
        Some(z) => human.push_str(&format!("Z = {z}\n")),
        None => human.push_str("Z overflows an f64; use log Z\n"),
    }
    human.push_str(&format!(
        "nodes visited: {} total, {} in the largest query\n",
        report.nodes_visited_total, report.nodes_visited_max_query
    ));
    human.push_str("telescoping marginals (blue probability, conditioned upstream):\n");
    for rec in &report.marginals {
        human.push_str(&format!(
            "  vertex {}: [{}, {}] mid {}\n",
            rec.vertex, rec.p_lo, rec.p_hi, rec.p_mid
        ));
    }
    emit(args.common.json, &report, human);
    Ok(ExitCode::SUCCESS)
}

fn cmd_threshold(args: ThresholdArgs) -> Result<ExitCode> {
    let critical = thresholds::big_gamma(args.beta)?;
    let identities = thresholds::check_fixed_point_identities(args.beta)?;
    let integer_critical = if args.beta == 0.0 {
        let (gamma, d) = thresholds::big_gamma_integer_beta0();
        Some(IntegerCritical { d, gamma })
    } else {
        None
    };
    let (alpha_at_gamma, m_at_gamma) = match args.gamma {
        Some(g) => {
            let a = thresholds::sup_alpha(args.beta, g)?;
            let m = thresholds::choose_m(args.beta, g, a, critical.d)?;
            (Some(a), Some(m))
        }
        None => (None, None),
    };
    let report = ThresholdReport {
        alpha_at_gamma,
        beta: args.beta,
        critical,
        gamma: args.gamma,
        identities,
        integer_critical,
        m_at_gamma,
    };
    let mut human = format!(
        "beta = {}\ncritical gamma = {} (maximizing arity {}, fixed point x = {})\n",
        report.beta, report.critical.gamma, report.critical.d, report.critical.x
    );
    if let Some(ic) = &report.integer_critical {
        human.push_str(&format!(
            "integer-arity critical gamma = {} at degree {}\n",
            ic.gamma, ic.d
        ));
    }
    if let (Some(a), Some(m)) = (report.alpha_at_gamma, report.m_at_gamma) {
        human.push_str(&format!(
            "at gamma = {}: contraction supremum alpha = {}, branching base M = {}\n",
            args.gamma.expect("set together with alpha"),
            a,
            m
        ));
    }
    human.push_str(&format!(
        "identity residuals: defining {:.3e}, logarithmic {:.3e}, alternative {:.3e}, \
         ordering {:.3e}\n",
        report.identities.defining_residual,
        report.identities.log_identity_residual,
        report.identities.log_identity_alt_residual,
        report.identities.ordering_residual
    ));
    emit(args.json, &report, human);
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: OracleArgs) -> Result<ExitCode> {
    set_threads(args.common.threads);
    let doc = load_graph(&args.common.graph)?;
    let params = SpinParams::new(args.common.beta, args.common.gamma);
    let pins = map_pins(&doc, &args.common.pins)?;
    let exact = oracle::exact_partition(&doc.graph, &params, &pins)?;
    let keep = match args.vertex {
        Some(vid) => Some(canonical_vertex(&doc, vid)?),
        None => None,
    };
    let marginals: Vec<OracleMarginal> = exact
        .marginals
        .iter()
        .enumerate()
        .filter(|(v, _)| keep.map_or(true, |k| k as usize == *v))
        .map(|(v, &p)| OracleMarginal { p, vertex: doc.original_ids[v] })
        .collect();
    let report =
        OracleReport { log_z: exact.log_z, marginals, n: doc.graph.n(), z: exact.z };
    let mut human = format!(
        "graph: {} vertices, {} edges\nZ = {}\nlog Z = {}\nblue-probability marginals:\n",
        report.n,
        doc.graph.m(),
        report.z,
        report.log_z
    );
    for m in &report.marginals {
        human.push_str(&format!("  vertex {}: {}\n", m.vertex, m.p));
    }
    emit(args.common.json, &report, human);
    Ok(ExitCode::SUCCESS)
}

fn cmd_decay(args: DecayArgs) -> Result<ExitCode> {
    set_threads(args.common.threads);
    let doc = load_graph(&args.common.graph)?;
    let params = SpinParams::new(args.common.beta, args.common.gamma);
    let pins = map_pins(&doc, &args.common.pins)?;
    let v = canonical_vertex(&doc, args.vertex)?;
    let trace = oracle::decay_profile(&doc.graph, &params, &pins, v, args.l_max)?;
    let report = DecayReport {
        alpha: trace.alpha,
        deltas: trace.deltas.clone(),
        l_max: args.l_max,
        ln_alpha: trace.alpha.ln(),
        m: trace.m,
        nodes_visited: trace.nodes_visited.clone(),
        slope: trace.slope,
        vertex: args.vertex,
    };
    let mut human = format!(
        "vertex {} on {} vertices: alpha = {}, M = {}\n\
         budget  width          nodes\n",
        args.vertex,
        doc.graph.n(),
        report.alpha,
        report.m
    );
    for (l, (delta, nodes)) in report.deltas.iter().zip(&report.nodes_visited).enumerate() {
        human.push_str(&format!("{l:>6}  {delta:<13.6e}  {nodes}\n"));
    }
    match report.slope {
        Some(s) => human.push_str(&format!(
            "fitted log-width slope {s:.4} against ln(alpha) = {:.4}\n",
            report.ln_alpha
        )),
        None => human.push_str("too few usable widths to fit a slope\n"),
    }
    emit(args.common.json, &report, human);
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode> {
    set_threads(args.threads);
    let outcomes = checks::run_all(args.quick, args.seed);
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let failed = outcomes.len() - passed;
    let report = CheckReport { failed, outcomes, passed, quick: args.quick, seed: args.seed };
    let mut human = String::new();
    for (i, o) in report.outcomes.iter().enumerate() {
        human.push_str(&format!(
            "criterion {} ({}): {} [{:.2}s] {}\n",
            i + 1,
            o.name,
            if o.passed { "PASS" } else { "FAIL" },
            o.seconds,
            o.detail
        ));
    }
    human.push_str(&format!("{} passed, {} failed\n", report.passed, report.failed));
    emit(args.json, &report, human);
    Ok(if report.failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let code = match cli.command {
        Command::Partition(a) => cmd_partition(a),
        Command::Threshold(a) => cmd_threshold(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Decay(a) => cmd_decay(a),
        Command::Check(a) => cmd_check(a),
    }
    .unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code())
    });
    eprintln!("elapsed_seconds: {:.3}", start.elapsed().as_secs_f64());
    code
}
