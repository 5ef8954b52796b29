//! Critical-curve numerics for the two-spin decay machinery.
//!
//! Everything here is a pure function of `(beta, gamma)` and an arity `d`:
//! the per-arity fixed point `x(gamma, d)` of the symmetric tree recursion,
//! the per-arity critical curve `gamma_of_d`, its supremum `big_gamma` with
//! maximizing arity `D` and fixed point `X`, the potential `Phi` and its
//! antiderivative transform, the amortized one-level contraction `alpha`,
//! its supremum over arities and marginal values, and the branching base `M`
//! the truncated estimator uses.
//!
//! Root finding is bisection throughout: every solved map is strictly
//! monotone in the solved variable, and robustness near the critical point
//! matters more than iteration count. All comparisons use absolute
//! tolerance 1e-6 unless a function documents a tighter one.

use crate::estimator::ceil_log;
use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Residual tolerance for fixed-point solves.
pub const FIXED_POINT_TOL: f64 = 1e-12;

/// Largest arity grid the optimizers will extend to before declaring the
/// maximizer unreachable.
const D_GRID_CAP: f64 = 131_072.0;

// ===========================================================================
// Per-arity fixed point and uniqueness quantity
// ===========================================================================

/// A solved symmetric fixed point: `x` satisfies
/// `x = ((beta*x + 1) / (x + gamma))^d` with `|residual| <= 1e-12`.
#[derive(Debug, Clone, Copy)]
pub struct FixedPoint {
    pub beta: f64,
    pub gamma: f64,
    pub d: f64,
    pub x: f64,
    pub residual: f64,
}

fn validate_fixed_point_inputs(beta: f64, gamma: f64, d: f64) -> Result<()> {
    let ok = beta.is_finite()
        && gamma.is_finite()
        && d.is_finite()
        && beta >= 0.0
        && gamma >= 1.0
        && beta * gamma < 1.0
        && d >= 1.0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "fixed point needs beta >= 0, gamma >= 1, beta*gamma < 1, d >= 1; \
             got beta={beta}, gamma={gamma}, d={d}"
        )))
    }
}

/// Solves `x = ((beta*x + 1)/(x + gamma))^d` for the unique root in (0, 1).
///
/// The map `f(x) - x` is strictly decreasing with `f(0) > 0 > f(1) - 1`, so
/// plain bisection converges unconditionally.
pub fn fixed_point_x(beta: f64, gamma: f64, d: f64) -> Result<FixedPoint> {
    validate_fixed_point_inputs(beta, gamma, d)?;
    let f = |x: f64| (d * ((beta * x + 1.0).ln() - (x + gamma).ln())).exp();
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    let residual = (f(x) - x).abs();
    if !(x > 0.0 && x < 1.0) || residual > FIXED_POINT_TOL {
        return Err(Error::Numeric(format!(
            "fixed-point bisection left residual {residual:.3e} at (beta={beta}, gamma={gamma}, d={d})"
        )));
    }
    Ok(FixedPoint { beta, gamma, d, x, residual })
}

/// The contraction magnitude of the symmetric recursion at its fixed point:
/// `d (1 - beta*gamma) x / ((beta*x + 1)(x + gamma))`. The recursion is
/// uniquely rooted (uniqueness regime) exactly when this is at most 1.
pub fn uniqueness_lhs(beta: f64, gamma: f64, d: f64) -> Result<f64> {
    let fp = fixed_point_x(beta, gamma, d)?;
    Ok(d * (1.0 - beta * gamma) * fp.x / ((beta * fp.x + 1.0) * (fp.x + gamma)))
}

// ===========================================================================
// Critical curve gamma(d) and its supremum
// ===========================================================================

/// The critical gamma for arity `d`: the unique `gamma > 1` where the
/// contraction magnitude crosses 1, or exactly 1 by convention when the
/// crossing sits at or below 1. The convention value is returned as a plain
/// 1.0 so callers can distinguish "solved" from "below range".
pub fn gamma_of_d(beta: f64, d: f64) -> Result<f64> {
    if !beta.is_finite() || beta < 0.0 || !d.is_finite() || d < 1.0 {
        return Err(Error::InvalidInput(format!(
            "critical curve needs beta >= 0 and d >= 1, got beta={beta}, d={d}"
        )));
    }
    // Admissible gamma range: above 1, below 1/beta; the curve is also known
    // to stay below d^{1/(d+1)}, which gives the beta = 0 cap.
    let cap = if beta > 0.0 {
        1.0 / beta - 1e-9
    } else {
        (d.powf(1.0 / (d + 1.0)) + 0.1).max(2.0)
    };
    if cap <= 1.0 {
        return Ok(1.0);
    }
    let excess = |gamma: f64| -> Result<f64> { Ok(uniqueness_lhs(beta, gamma, d)? - 1.0) };
    if excess(1.0)? <= 0.0 {
        return Ok(1.0);
    }
    if excess(cap)? > 0.0 {
        return Err(Error::Numeric(format!(
            "contraction magnitude stays above 1 up to gamma={cap} at (beta={beta}, d={d})"
        )));
    }
    // excess is strictly decreasing in gamma.
    let (mut lo, mut hi) = (1.0_f64, cap);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The critical point: `gamma` is the supremum of [`gamma_of_d`] over real
/// arities, `d` its maximizer, `x` the fixed point there.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CriticalPoint {
    pub d: f64,
    pub gamma: f64,
    pub x: f64,
}

fn golden_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..100 {
        if b - a <= 1e-9 * b.abs().max(1.0) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn big_gamma_uncached(beta: f64) -> Result<CriticalPoint> {
    if !beta.is_finite() || !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidInput(format!(
            "critical point defined for 0 <= beta < 1, got {beta}"
        )));
    }
    // Geometric arity grid, extended whenever the maximum lands on the right
    // boundary (the maximizing arity grows without bound as beta approaches 1).
    const RATIO: f64 = 1.03;
    let mut ds: Vec<f64> = vec![1.0];
    let mut vals: Vec<f64> = vec![gamma_of_d(beta, 1.0)?];
    let mut d_cap = 200.0;
    loop {
        while *ds.last().expect("grid nonempty") < d_cap {
            let next = (ds.last().unwrap() * RATIO).min(d_cap);
            ds.push(next);
            vals.push(gamma_of_d(beta, next)?);
        }
        let best = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("grid nonempty");
        if best + 2 < ds.len() {
            break;
        }
        if d_cap >= D_GRID_CAP {
            return Err(Error::Numeric(format!(
                "maximizing arity still at the grid boundary d={d_cap} for beta={beta}"
            )));
        }
        d_cap = (d_cap * 2.0).min(D_GRID_CAP);
    }
    let best = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("grid nonempty");
    let a = if best == 0 { ds[0] } else { ds[best - 1] };
    let b = ds[best + 1];
    let mut failure: Option<Error> = None;
    let (d_star, _) = golden_max(
        |d| match gamma_of_d(beta, d) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        a,
        b,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let gamma = gamma_of_d(beta, d_star)?;
    // Stationarity: the curve is flat to second order at the maximizer.
    let h = 1e-3;
    for side in [d_star - h, d_star + h] {
        let g = gamma_of_d(beta, side)?;
        if g > gamma + 1e-12 || (g - gamma).abs() > h * h + 1e-11 {
            return Err(Error::Numeric(format!(
                "critical curve not stationary at d={d_star} for beta={beta}: \
                 gamma({side}) = {g}, gamma({d_star}) = {gamma}"
            )));
        }
    }
    if gamma <= 1.0 || (beta > 0.0 && gamma >= 1.0 / beta) {
        return Err(Error::Numeric(format!(
            "critical gamma {gamma} escaped (1, 1/beta) for beta={beta}"
        )));
    }
    let x = fixed_point_x(beta, gamma, d_star)?.x;
    Ok(CriticalPoint { gamma, d: d_star, x })
}

/// Cached [`big_gamma_uncached`]: the critical point is a pure function of
/// `beta` and is re-requested constantly by regime classification.
pub fn big_gamma(beta: f64) -> Result<CriticalPoint> {
    static CACHE: OnceLock<Mutex<HashMap<u64, CriticalPoint>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().expect("cache lock").get(&beta.to_bits()) {
        return Ok(*hit);
    }
    let point = big_gamma_uncached(beta)?;
    cache.lock().expect("cache lock").insert(beta.to_bits(), point);
    Ok(point)
}

/// Integer-arity critical value for `beta = 0`, by maximizing the closed
/// form `(d-1) d^{-d/(d+1)}` over integer `d <= 200`. Returns the value and
/// its maximizer.
pub fn big_gamma_integer_beta0() -> (f64, u32) {
    let mut best = (f64::NEG_INFINITY, 1);
    for d in 1..=200u32 {
        let df = d as f64;
        let v = (df - 1.0) * df.powf(-df / (df + 1.0));
        if v > best.0 {
            best = (v, d);
        }
    }
    best
}

// ===========================================================================
// Potential function and its transform
// ===========================================================================

/// The potential `Phi(R) = R^{(D+1)/(2D)} (beta R + 1)` used to amortize the
/// one-level decay; `big_d` is the critical arity.
pub fn potential(r: f64, beta: f64, big_d: f64) -> f64 {
    debug_assert!(r >= 0.0 && big_d > 1.0);
    r.powf((big_d + 1.0) / (2.0 * big_d)) * (beta * r + 1.0)
}

/// Antiderivative of `1/Phi` with `phi(0) = 0`, so gaps of marginal ratios
/// can be measured in the amortized metric `eps = phi(hi) - phi(lo)`.
///
/// For `beta = 0` the closed form `(2D/(D-1)) R^{(D-1)/(2D)}` is used.
/// Otherwise the substitution `t = s^{2D/(D-1)}` turns the integrand into the
/// smooth `(2D/(D-1)) / (1 + beta s^{2D/(D-1)})`, integrated by adaptive
/// Simpson quadrature to absolute tolerance 1e-10.
pub fn potential_transform(r: f64, beta: f64, big_d: f64) -> f64 {
    debug_assert!(r >= 0.0 && big_d > 1.0);
    let e = (big_d - 1.0) / (2.0 * big_d);
    let scale = 1.0 / e;
    let u = r.powf(e);
    if beta == 0.0 || u == 0.0 {
        return scale * u;
    }
    let p = 1.0 / e;
    let f = |s: f64| scale / (1.0 + beta * s.powf(p));
    adaptive_simpson(&f, 0.0, u, 1e-10, 40)
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let whole = simpson(f, a, b);
    let halves = simpson(f, a, mid) + simpson(f, mid, b);
    if depth == 0 || (halves - whole).abs() <= 15.0 * tol {
        halves + (halves - whole) / 15.0
    } else {
        adaptive_simpson(f, a, mid, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, mid, b, 0.5 * tol, depth - 1)
    }
}

// ===========================================================================
// Amortized one-level contraction
// ===========================================================================

/// Amortized contraction of one recursion level at a node whose free
/// children carry ratio surrogates `xs` and which has `d0` green-pinned and
/// `d1` blue-pinned children. `big_d` is the critical arity driving the
/// potential exponents. With `d0 = d1 = 0` this is the plain vectorized
/// contraction; pinned children enter only through the node's output ratio
/// `F` via their constant factors `beta^{d1} gamma^{-d0}`.
pub fn alpha_vec(beta: f64, gamma: f64, big_d: f64, d0: u32, d1: u32, xs: &[f64]) -> f64 {
    debug_assert!(big_d > 1.0 && gamma > 0.0 && beta >= 0.0);
    debug_assert!(xs.iter().all(|&x| x > 0.0 && x <= 1.0));
    if beta == 0.0 && d1 > 0 {
        return 0.0;
    }
    let mut ln_f = -(d0 as f64) * gamma.ln();
    if d1 > 0 {
        ln_f += d1 as f64 * beta.ln();
    }
    let mut sum = 0.0;
    let up = (big_d + 1.0) / (2.0 * big_d);
    for &x in xs {
        ln_f += (beta * x + 1.0).ln() - (x + gamma).ln();
        sum += x.powf(up) / (x + gamma);
    }
    let c = (big_d - 1.0) / (2.0 * big_d);
    (1.0 - beta * gamma) * (c * ln_f).exp() / (beta * ln_f.exp() + 1.0) * sum
}

/// [`alpha_vec`] with all `d` free children at the same surrogate `x`, no
/// pinned children, and real-valued `d` (the optimizers scan real arities).
pub fn alpha_sym(beta: f64, gamma: f64, big_d: f64, d: f64, x: f64) -> f64 {
    debug_assert!(big_d > 1.0 && gamma > 0.0 && beta >= 0.0);
    debug_assert!(d >= 1.0 && x > 0.0 && x <= 1.0);
    let ln_f = d * ((beta * x + 1.0).ln() - (x + gamma).ln());
    let c = (big_d - 1.0) / (2.0 * big_d);
    let up = (big_d + 1.0) / (2.0 * big_d);
    (1.0 - beta * gamma) * (c * ln_f).exp() / (beta * ln_f.exp() + 1.0) * d * x.powf(up)
        / (x + gamma)
}

fn sup_alpha_uncached(beta: f64, gamma: f64) -> Result<f64> {
    let crit = big_gamma(beta)?;
    if !gamma.is_finite() || gamma < crit.gamma + crate::graph::REGIME_MARGIN || beta * gamma >= 1.0
    {
        return Err(Error::Regime(format!(
            "contraction supremum defined only above the critical curve: \
             gamma={gamma} vs threshold {:.9} at beta={beta}",
            crit.gamma
        )));
    }
    let big_d = crit.d;
    // Base grid: arity step 0.25 up to 200, geometric extension beyond while
    // the maximum sits at the boundary; surrogate grid x = i/512.
    let xs: Vec<f64> = (1..=512).map(|i| i as f64 / 512.0).collect();
    let scan_d = |d: f64, best: &mut (f64, f64, f64)| {
        for &x in &xs {
            let v = alpha_sym(beta, gamma, big_d, d, x);
            if v > best.0 {
                *best = (v, d, x);
            }
        }
    };
    let mut best = (f64::NEG_INFINITY, 1.0, xs[0]);
    let mut d = 1.0;
    while d <= 200.0 {
        scan_d(d, &mut best);
        d += 0.25;
    }
    let mut d_hi = 200.0;
    let mut gap = 0.25;
    while best.1 >= d_hi - 2.0 * gap {
        if d_hi >= D_GRID_CAP {
            return Err(Error::Numeric(format!(
                "contraction maximizer still at the arity boundary {d_hi} \
                 for (beta={beta}, gamma={gamma})"
            )));
        }
        let stop = (d_hi * 2.0).min(D_GRID_CAP);
        let mut d = d_hi;
        while d < stop {
            gap = d * 0.02;
            d = (d + gap).min(stop);
            scan_d(d, &mut best);
        }
        d_hi = stop;
    }
    // Local refinement: alternate golden sections in x and d around the grid
    // maximum; windows are one grid cell wide on each side.
    let (_, d0, x0) = best;
    let mut d_lo = (d0 - gap).max(1.0);
    let mut d_hi2 = d0 + gap;
    let mut x_lo = (x0 - 1.0 / 512.0).max(1e-9);
    let mut x_hi = (x0 + 1.0 / 512.0).min(1.0);
    let mut d_cur = d0;
    let (mut x_cur, v_seed) = golden_max(|x| alpha_sym(beta, gamma, big_d, d_cur, x), x_lo, x_hi);
    let mut refined = best.0.max(v_seed);
    for _ in 0..4 {
        let (d_new, vd) = golden_max(|d| alpha_sym(beta, gamma, big_d, d, x_cur), d_lo, d_hi2);
        d_cur = d_new;
        refined = refined.max(vd);
        let (x_new, vx) = golden_max(|x| alpha_sym(beta, gamma, big_d, d_cur, x), x_lo, x_hi);
        x_cur = x_new;
        refined = refined.max(vx);
        let dw = 0.25 * (d_hi2 - d_lo);
        let xw = 0.25 * (x_hi - x_lo);
        d_lo = (d_cur - dw).max(1.0);
        d_hi2 = d_cur + dw;
        x_lo = (x_cur - xw).max(1e-9);
        x_hi = (x_cur + xw).min(1.0);
    }
    if refined >= 1.0 {
        return Err(Error::Regime(format!(
            "amortized contraction reaches {refined} >= 1 at (beta={beta}, gamma={gamma}); \
             parameters are effectively at or below the critical curve"
        )));
    }
    Ok(refined)
}

/// Supremum over arities `d >= 1` and surrogates `x` in (0, 1] of the
/// symmetric amortized contraction at the working `(beta, gamma)`. Errors
/// with a regime refusal unless gamma clears the critical curve. Cached.
pub fn sup_alpha(beta: f64, gamma: f64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (beta.to_bits(), gamma.to_bits());
    if let Some(hit) = cache.lock().expect("cache lock").get(&key) {
        return Ok(*hit);
    }
    let v = sup_alpha_uncached(beta, gamma)?;
    cache.lock().expect("cache lock").insert(key, v);
    Ok(v)
}

// ===========================================================================
// Branching base M
// ===========================================================================

/// Smallest integer base `M >= 2` such that
/// `k / gamma^{k (D-1)/(2D)} <= alpha^{ceil(log_M k)}` for every `k >= M`.
///
/// The inequality is verified exactly for integer `k` up to a horizon `K`,
/// and for the tail `k > K` via the smooth majorant
/// `ln k - k c ln gamma + (log_M k + 1)(-ln alpha)`, which dominates the
/// exact log-gap and is decreasing beyond its single knee; `K` is grown
/// until it passes the knee with the majorant nonpositive.
pub fn choose_m(beta: f64, gamma: f64, alpha: f64, big_d: f64) -> Result<u32> {
    if !(alpha > 0.0 && alpha < 1.0) || !(gamma > 1.0) || !(big_d > 1.0) {
        return Err(Error::InvalidInput(format!(
            "base selection needs alpha in (0,1), gamma > 1, D > 1; \
             got alpha={alpha}, gamma={gamma}, D={big_d} (beta={beta})"
        )));
    }
    let c = (big_d - 1.0) / (2.0 * big_d);
    let ln_g = gamma.ln();
    let ln_a = alpha.ln();
    'bases: for m in 2..=(1u32 << 20) {
        let ln_m = (m as f64).ln();
        let knee = (1.0 + (-ln_a) / ln_m) / (c * ln_g);
        let majorant = |k: f64| k.ln() - k * c * ln_g + (k.ln() / ln_m + 1.0) * (-ln_a);
        let mut horizon = (4 * m as u64).max(2 * (knee.ceil() as u64 + 1));
        while (horizon as f64) < knee || majorant(horizon as f64) > 0.0 {
            horizon = horizon.saturating_mul(2);
            if horizon > 1 << 40 {
                continue 'bases;
            }
        }
        let ok = (m as u64..=horizon).all(|k| {
            let levels = ceil_log(m, k);
            (k as f64).ln() - (k as f64) * c * ln_g - levels as f64 * ln_a <= 1e-12
        });
        if ok {
            return Ok(m);
        }
    }
    Err(Error::Numeric(format!(
        "no branching base below 2^20 satisfies the decay inequality at \
         (beta={beta}, gamma={gamma}, alpha={alpha})"
    )))
}

// ===========================================================================
// Critical-point identity report
// ===========================================================================

/// Numeric residuals of the identities that pin down the critical point
/// `(Gamma, D, X)`. `ordering_residual` measures violation of
/// `beta/Gamma <= sqrt(beta*Gamma) < (D-1)/(D+1)` (zero when it holds);
/// `log_identity_residual` measures
/// `ln((beta X + 1)/(X + Gamma)) = 2(beta X + 1)/((D+1)(beta X + 1) - 2D)`;
/// the remaining fields are equivalent diagnostic forms.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct IdentityReport {
    pub beta: f64,
    pub d: f64,
    pub defining_residual: f64,
    pub gamma: f64,
    pub log_identity_alt_residual: f64,
    pub log_identity_residual: f64,
    pub ordering_residual: f64,
    pub x: f64,
}

/// Evaluates the critical-point identities at the computed `(Gamma, D, X)`.
pub fn check_fixed_point_identities(beta: f64) -> Result<IdentityReport> {
    let crit = big_gamma(beta)?;
    let (g, d, x) = (crit.gamma, crit.d, crit.x);
    let root = (beta * g).sqrt();
    let ordering_residual = (beta / g - root).max(root - (d - 1.0) / (d + 1.0)).max(0.0);
    let lhs = ((beta * x + 1.0) / (x + g)).ln();
    let rhs = 2.0 * (beta * x + 1.0) / ((d + 1.0) * (beta * x + 1.0) - 2.0 * d);
    let rhs_alt = 2.0 * d * (1.0 - beta * g) * x
        / ((beta * x + 1.0) * (2.0 * d * x - (d + 1.0) * (x + g)));
    let defining_residual =
        (d * (1.0 - beta * g) * x - (beta * x + 1.0) * (x + g)).abs();
    Ok(IdentityReport {
        beta,
        d,
        defining_residual,
        gamma: g,
        log_identity_alt_residual: (lhs - rhs_alt).abs(),
        log_identity_residual: (lhs - rhs).abs(),
        ordering_residual,
        x,
    })
}

// ===========================================================================
// Bundled profile
// ===========================================================================

/// Everything the end-to-end estimator needs at a working `(beta, gamma)`.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdProfile {
    pub beta: f64,
    pub gamma: f64,
    pub critical: CriticalPoint,
    pub alpha: f64,
    pub m: u32,
}

/// Computes (and caches) the critical point, contraction supremum, and
/// branching base for a guaranteed-regime `(beta, gamma)`.
pub fn profile(beta: f64, gamma: f64) -> Result<ThresholdProfile> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), ThresholdProfile>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (beta.to_bits(), gamma.to_bits());
    if let Some(hit) = cache.lock().expect("cache lock").get(&key) {
        return Ok(*hit);
    }
    let critical = big_gamma(beta)?;
    let alpha = sup_alpha(beta, gamma)?;
    let m = choose_m(beta, gamma, alpha, critical.d)?;
    let p = ThresholdProfile { beta, gamma, critical, alpha, m };
    cache.lock().expect("cache lock").insert(key, p);
    Ok(p)
}

// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA_STAR: f64 = 1.1101714093745398; // 10 * 11^(-11/12)

    #[test]
    fn fixed_point_matches_quadratic_roots() {
        // x = 1/(x+1) -> golden ratio conjugate; x = 1/(x+2) -> sqrt(2)-1.
        let a = fixed_point_x(0.0, 1.0, 1.0).unwrap();
        assert!((a.x - (5f64.sqrt() - 1.0) / 2.0).abs() <= 1e-12, "x={}", a.x);
        let b = fixed_point_x(0.0, 2.0, 1.0).unwrap();
        assert!((b.x - (2f64.sqrt() - 1.0)).abs() <= 1e-12, "x={}", b.x);
    }

    #[test]
    fn fixed_point_residual_and_range() {
        let fp = fixed_point_x(0.1, 3.0, 2.0).unwrap();
        assert!(fp.residual <= 1e-12);
        assert!(fp.x > 0.0 && fp.x < 1.0);
    }

    #[test]
    fn fixed_point_rejects_out_of_range_parameters() {
        assert!(fixed_point_x(-0.1, 2.0, 1.0).is_err());
        assert!(fixed_point_x(0.0, 0.9, 1.0).is_err());
        assert!(fixed_point_x(0.6, 2.0, 1.0).is_err()); // beta*gamma >= 1
        assert!(fixed_point_x(0.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn uniqueness_lhs_hits_one_at_integer_threshold() {
        let v = uniqueness_lhs(0.0, GAMMA_STAR, 11.0).unwrap();
        assert!((v - 1.0).abs() <= 1e-6, "lhs={v}");
        assert!(uniqueness_lhs(0.0, 2.0, 11.0).unwrap() < 1.0);
    }

    #[test]
    fn uniqueness_lhs_decreases_in_gamma() {
        let grid = [1.2, 1.5, 2.0, 3.0];
        for d in [2.0, 5.0, 11.0] {
            let vals: Vec<f64> =
                grid.iter().map(|&g| uniqueness_lhs(0.0, g, d).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[0] > w[1]), "d={d}: {vals:?}");
        }
    }

    #[test]
    fn gamma_of_d_matches_closed_form_at_beta0() {
        assert_eq!(gamma_of_d(0.0, 2.0).unwrap(), 1.0); // closed form ~0.63 < 1
        let g11 = gamma_of_d(0.0, 11.0).unwrap();
        assert!((g11 - GAMMA_STAR).abs() <= 1e-8, "gamma(11)={g11}");
        let g12 = gamma_of_d(0.0, 12.0).unwrap();
        let closed12 = 11.0 * 12f64.powf(-12.0 / 13.0);
        assert!((g12 - closed12).abs() <= 1e-8, "gamma(12)={g12} vs {closed12}");
    }

    #[test]
    fn big_gamma_beta0_matches_reference_values() {
        let crit = big_gamma(0.0).unwrap();
        assert!((crit.gamma - 1.1101715).abs() <= 1e-6, "Gamma={}", crit.gamma);
        assert!(crit.d > 11.0 && crit.d < 12.0, "D={}", crit.d);
        // At beta=0 the fixed point at the critical curve is Gamma/(D-1).
        assert!((crit.x - crit.gamma / (crit.d - 1.0)).abs() <= 1e-9);
        let (g_int, d_int) = big_gamma_integer_beta0();
        assert_eq!(d_int, 11);
        assert!((g_int - GAMMA_STAR).abs() <= 1e-12);
        assert!(g_int < crit.gamma);
    }

    #[test]
    fn big_gamma_stays_inside_open_interval() {
        for beta in [0.0, 0.2, 0.5] {
            let crit = big_gamma(beta).unwrap();
            assert!(crit.gamma > 1.0);
            if beta > 0.0 {
                assert!(crit.gamma < 1.0 / beta);
            }
        }
    }

    #[test]
    fn potential_basic_values() {
        assert_eq!(potential(0.0, 0.3, 11.0), 0.0);
        let beta = 0.25;
        assert!((potential(1.0, beta, 7.0) - (1.0 + beta)).abs() <= 1e-15);
        let phi_half = potential(0.5, 0.0, 11.0);
        assert!((phi_half - 0.5f64.powf(6.0 / 11.0)).abs() <= 1e-15);
    }

    #[test]
    fn potential_transform_closed_form_beta0() {
        let d = 11.0f64;
        let r = 0.37f64;
        let expect = (2.0 * d / (d - 1.0)) * r.powf((d - 1.0) / (2.0 * d));
        assert!((potential_transform(r, 0.0, d) - expect).abs() <= 1e-12);
        assert_eq!(potential_transform(0.0, 0.4, d), 0.0);
    }

    #[test]
    fn potential_transform_derivative_is_reciprocal_potential() {
        let (beta, d) = (0.3, 9.0);
        for r in [0.05, 0.3, 0.8, 1.0] {
            let h = 1e-5;
            let num = (potential_transform(r + h, beta, d) - potential_transform(r - h, beta, d))
                / (2.0 * h);
            let expect = 1.0 / potential(r, beta, d);
            assert!((num - expect).abs() <= 1e-5 * expect, "r={r}: {num} vs {expect}");
        }
    }

    #[test]
    fn alpha_sym_matches_integer_closed_form_at_beta0() {
        // At beta=0, D=11: alpha = d x^{6/11} / (x+gamma)^{1 + 5d/11}.
        for (d, x, g) in [(3.0f64, 0.2f64, 2.0f64), (11.0, 0.5, 1.3), (7.0, 1.0, 2.5)] {
            let closed = d * x.powf(6.0 / 11.0) / (x + g).powf(1.0 + 5.0 * d / 11.0);
            let v = alpha_sym(0.0, g, 11.0, d, x);
            assert!((v - closed).abs() <= 1e-12, "({d},{x},{g}): {v} vs {closed}");
        }
    }

    #[test]
    fn alpha_reaches_one_exactly_at_the_critical_point() {
        let crit = big_gamma(0.0).unwrap();
        let v = alpha_sym(0.0, crit.gamma, crit.d, crit.d, crit.x);
        assert!((v - 1.0).abs() <= 1e-6, "alpha(D,X)={v}");
        // Integer form at the integer threshold.
        let (g_star, _) = big_gamma_integer_beta0();
        let vi = alpha_sym(0.0, g_star, 11.0, 11.0, g_star / 10.0);
        assert!((vi - 1.0).abs() <= 1e-6, "integer alpha={vi}");
    }

    #[test]
    fn alpha_vec_agrees_with_sym_and_handles_pins() {
        let (beta, gamma, big_d) = (0.2, 2.2, 9.5);
        let xs = [0.4; 5];
        let v = alpha_vec(beta, gamma, big_d, 0, 0, &xs);
        let s = alpha_sym(beta, gamma, big_d, 5.0, 0.4);
        assert!((v - s).abs() <= 1e-12);
        assert_eq!(alpha_vec(0.0, 2.0, 11.0, 0, 3, &xs), 0.0);
        assert!(alpha_vec(0.0, 2.0, 11.0, 2, 0, &xs) > 0.0);
    }

    #[test]
    fn alpha_sym_decreases_in_gamma() {
        let crit = big_gamma(0.0).unwrap();
        let grid = [1.2, 1.6, 2.0, 2.5];
        let vals: Vec<f64> =
            grid.iter().map(|&g| alpha_sym(0.0, g, crit.d, 5.0, 0.4)).collect();
        assert!(vals.windows(2).all(|w| w[0] > w[1]), "{vals:?}");
    }

    #[test]
    fn sup_alpha_reference_behavior() {
        let a = sup_alpha(0.0, 2.0).unwrap();
        assert!(a < 1.0 && a > 0.1, "sup_alpha(0,2)={a}");
        let tighter = sup_alpha(0.0, 1.5).unwrap();
        assert!(tighter > a, "monotone: {tighter} vs {a}");
    }

    #[test]
    fn sup_alpha_near_critical_is_just_below_one() {
        let crit = big_gamma(0.0).unwrap();
        let a = sup_alpha(0.0, crit.gamma + 1e-6).unwrap();
        assert!(a < 1.0 && a > 0.999, "near-critical sup alpha = {a}");
    }

    #[test]
    fn sup_alpha_refuses_below_threshold() {
        assert!(matches!(sup_alpha(0.0, 1.05), Err(Error::Regime(_))));
    }

    #[test]
    fn choose_m_satisfies_inequality_on_long_scan() {
        let crit = big_gamma(0.0).unwrap();
        let alpha = sup_alpha(0.0, 2.0).unwrap();
        let m = choose_m(0.0, 2.0, alpha, crit.d).unwrap();
        assert!(m >= 2);
        let c = (crit.d - 1.0) / (2.0 * crit.d);
        for k in m as u64..=10_000 {
            let lhs = k as f64 / 2f64.powf(k as f64 * c);
            let rhs = alpha.powi(ceil_log(m, k) as i32);
            assert!(lhs <= rhs * (1.0 + 1e-12), "k={k}: {lhs} > {rhs}");
        }
        // One base smaller must fail somewhere on the same scan.
        let m_prev = m - 1;
        let fails = (m_prev as u64..=10_000).any(|k| {
            let lhs = k as f64 / 2f64.powf(k as f64 * c);
            let rhs = alpha.powi(ceil_log(m_prev, k) as i32);
            lhs > rhs * (1.0 + 1e-12)
        });
        assert!(fails, "base {m_prev} should not satisfy the inequality");
    }

    #[test]
    fn choose_m_does_not_shrink_closer_to_threshold() {
        let crit = big_gamma(0.0).unwrap();
        let m_far = choose_m(0.0, 2.0, sup_alpha(0.0, 2.0).unwrap(), crit.d).unwrap();
        let m_near = choose_m(0.0, 1.2, sup_alpha(0.0, 1.2).unwrap(), crit.d).unwrap();
        assert!(m_near >= m_far, "near={m_near} far={m_far}");
    }

    #[test]
    fn identities_hold_at_beta0_and_beta03() {
        for beta in [0.0, 0.3] {
            let rep = check_fixed_point_identities(beta).unwrap();
            assert!(rep.ordering_residual <= 1e-6, "beta={beta}: {rep:?}");
            assert!(rep.log_identity_residual <= 1e-6, "beta={beta}: {rep:?}");
            assert!(rep.log_identity_alt_residual <= 1e-6, "beta={beta}: {rep:?}");
            assert!(rep.defining_residual <= 1e-6, "beta={beta}: {rep:?}");
        }
    }

    #[test]
    fn profile_bundles_consistent_values() {
        let p = profile(0.0, 2.0).unwrap();
        assert_eq!(p.m, choose_m(0.0, 2.0, p.alpha, p.critical.d).unwrap());
        assert!(p.alpha < 1.0);
    }
}
