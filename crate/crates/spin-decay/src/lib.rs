//! Deterministic approximate counting for two-state spin systems.
//!
//! A spin system on a simple undirected graph `G = (V, E)` assigns one of two
//! colors (blue or green) to every vertex; a configuration's weight is the
//! product over edges of `beta` (both endpoints blue), `gamma` (both green),
//! or 1 (mixed). The partition function `Z` sums these weights over all
//! configurations, and the engine here approximates `Z` deterministically to
//! any relative accuracy `eps` in the parameter regime where marginal
//! correlations decay with distance.
//!
//! The pipeline:
//!
//! * [`graph`] — graph model, edge-list parsing, regime classification, and
//!   the blue/green swap symmetry.
//! * [`sawtree`] — lazy self-avoiding-walk tree expansion with deterministic
//!   cycle-closing leaf colors.
//! * [`estimator`] — truncated two-sided evaluation of the marginal odds
//!   ratio over a depth-budgeted ball of the walk tree.
//! * [`thresholds`] — the critical-curve numerics: per-arity fixed points,
//!   the decay threshold, the amortized contraction rate, and the branching
//!   base used by the truncation.
//! * [`fptas`] — the end-to-end estimator: budget selection, telescoping
//!   product over pinned marginals, per-component assembly.
//! * [`oracle`] — exact brute-force ground truth (Gray-code enumeration),
//!   untruncated tree recursion, spatial-mixing probes, and per-node decay
//!   traces.
//! * [`checks`] — the self-test suite backing `spin-decay check`.

pub mod checks;
pub mod estimator;
pub mod fptas;
pub mod graph;
pub mod oracle;
pub mod sawtree;
pub mod thresholds;

use std::fmt;

/// Error taxonomy shared by every module.
///
/// The CLI maps these onto its exit-code contract: input-class errors
/// (`Parse`, `InvalidInput`, `InvalidQuery`, `Size`) exit 2, `Regime` exits 3,
/// `Numeric` exits 4.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed edge-list text; `line` is 1-based.
    Parse { line: usize, msg: String },
    /// A parameter violates an operation's precondition.
    InvalidInput(String),
    /// A query names a vertex the operation cannot serve (e.g. a pinned root).
    InvalidQuery(String),
    /// Parameters outside the regime where the method is certified.
    Regime(String),
    /// An internal solver failed to converge or verify.
    Numeric(String),
    /// Instance too large for an enumeration-backed operation.
    Size(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::InvalidQuery(msg) => write!(f, "invalid query: {msg}"),
            Error::Regime(msg) => write!(f, "regime refusal: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::Size(msg) => write!(f, "instance too large: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit-code class for the CLI: 2 input, 3 regime, 4 numeric.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Parse { .. } | Error::InvalidInput(_) | Error::InvalidQuery(_) | Error::Size(_) => 2,
            Error::Regime(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}
