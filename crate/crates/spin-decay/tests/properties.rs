//! Property and invariant suites: randomized structural laws that must hold
//! for every instance, plus dense deterministic grids over the numeric core.

use proptest::prelude::*;
use spin_decay::estimator;
use spin_decay::graph::{
    classify_regime, parse_graph, serialize_graph, Color, Graph, PinSet, Regime, SpinParams,
};
use spin_decay::oracle;
use spin_decay::thresholds;

// ===========================================================================
// Instance strategies
// ===========================================================================

/// Graph on `n` vertices whose edge set is selected by the mask bits, in
/// the fixed (u, v) pair order.
fn graph_from_mask(n: usize, mask: u128) -> Graph {
    let mut edges = Vec::new();
    let mut bit = 0usize;
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            if mask >> (bit % 128) & 1 == 1 {
                edges.push((u, v));
            }
            bit += 1;
        }
    }
    Graph::from_edges(n, &edges).expect("mask edges are valid")
}

fn pins_from_masks(n: usize, pin_mask: u16, color_mask: u16) -> PinSet {
    let mut pins = PinSet::new();
    for v in 0..n.min(16) as u32 {
        if pin_mask >> v & 1 == 1 {
            let c = if color_mask >> v & 1 == 1 { Color::Blue } else { Color::Green };
            pins.insert(v, c);
        }
    }
    pins
}

/// Edge weights in the antiferromagnetic work range: `beta < 1 <= gamma`,
/// `beta * gamma < 1`.
fn work_params() -> impl Strategy<Value = SpinParams> {
    (0.0..0.9f64, 1.0..3.0f64)
        .prop_filter("need beta * gamma < 1", |(b, g)| b * g < 0.98)
        .prop_map(|(b, g)| SpinParams::new(b, g))
}

/// Direct sum over all assignments, recomputing every edge weight from
/// scratch: the slowest possible oracle, used to cross-check the
/// incremental one.
fn naive_z(g: &Graph, params: &SpinParams, pins: &PinSet) -> f64 {
    let n = g.n();
    let mut z = 0.0f64;
    for assign in 0u32..1 << n {
        let color =
            |v: u32| if assign >> v & 1 == 1 { Color::Blue } else { Color::Green };
        if pins.iter().any(|(v, c)| color(v) != c) {
            continue;
        }
        let mut w = 1.0f64;
        for (u, v) in g.edges() {
            match (color(u), color(v)) {
                (Color::Blue, Color::Blue) => w *= params.beta,
                (Color::Green, Color::Green) => w *= params.gamma,
                _ => {}
            }
        }
        z += w;
    }
    z
}

// ===========================================================================
// Graph serialization and enumeration laws
// ===========================================================================

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn serialize_then_parse_is_identity(n in 0usize..=12, mask in any::<u128>()) {
        let g = graph_from_mask(n, mask);
        let round = parse_graph(&serialize_graph(&g)).expect("serialized text parses");
        prop_assert_eq!(&g, &round);
    }

    #[test]
    fn enumeration_matches_naive_product_sum(
        n in 1usize..=6,
        mask in any::<u128>(),
        pin_mask in any::<u16>(),
        color_mask in any::<u16>(),
        beta in 0.0..2.0f64,
        gamma in 0.0..2.5f64,
    ) {
        let g = graph_from_mask(n, mask);
        let pins = pins_from_masks(n, pin_mask, color_mask);
        let params = SpinParams::new(beta, gamma);
        let z_naive = naive_z(&g, &params, &pins);
        let z = oracle::exact_partition(&g, &params, &pins).unwrap().z;
        prop_assert!(
            (z - z_naive).abs() <= 1e-12 * z_naive.max(1.0),
            "incremental {} vs naive {}", z, z_naive
        );
    }

    #[test]
    fn swapping_colors_preserves_the_partition_value(
        n in 1usize..=8,
        mask in any::<u128>(),
        pin_mask in any::<u16>(),
        color_mask in any::<u16>(),
        beta in 0.0..2.0f64,
        gamma in 0.0..2.0f64,
    ) {
        let g = graph_from_mask(n, mask);
        let pins = pins_from_masks(n, pin_mask, color_mask);
        let params = SpinParams::new(beta, gamma);
        let a = oracle::exact_partition(&g, &params, &pins).unwrap().z;
        let b = oracle::exact_partition(&g, &params.swapped(), &pins.flipped()).unwrap().z;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(b).max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn conditioning_on_a_free_vertex_splits_the_sum(
        n in 1usize..=8,
        mask in any::<u128>(),
        pin_mask in any::<u16>(),
        color_mask in any::<u16>(),
        beta in 0.0..1.5f64,
        gamma in 0.0..2.5f64,
        pick in any::<u32>(),
    ) {
        let g = graph_from_mask(n, mask);
        let pins = pins_from_masks(n, pin_mask, color_mask);
        let params = SpinParams::new(beta, gamma);
        let free: Vec<u32> = (0..n as u32).filter(|&v| !pins.is_pinned(v)).collect();
        prop_assume!(!free.is_empty());
        let v = free[pick as usize % free.len()];
        let whole = oracle::exact_partition(&g, &params, &pins).unwrap().z;
        let mut blue = pins.clone();
        blue.insert(v, Color::Blue);
        let mut green = pins.clone();
        green.insert(v, Color::Green);
        let split = oracle::exact_partition(&g, &params, &blue).unwrap().z
            + oracle::exact_partition(&g, &params, &green).unwrap().z;
        prop_assert!(
            (whole - split).abs() <= 1e-12 * whole.max(1.0),
            "whole {} vs split {}", whole, split
        );
    }

    #[test]
    fn regime_classification_is_swap_symmetric(
        beta in 0.0..2.5f64,
        gamma in 0.0..2.5f64,
    ) {
        let p = SpinParams::new(beta, gamma);
        let direct = classify_regime(p).unwrap();
        let mirrored = classify_regime(p.swapped()).unwrap();
        let expected = match direct.regime {
            Regime::Guaranteed => Regime::GuaranteedAfterSwap,
            Regime::GuaranteedAfterSwap => Regime::Guaranteed,
            other => other,
        };
        prop_assert_eq!(mirrored.regime, expected);
    }
}

// ===========================================================================
// Sandwich laws against enumeration
// ===========================================================================

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn truncated_bounds_contain_nest_and_stay_cheap(
        n in 2usize..=10,
        mask in any::<u128>(),
        pin_mask in any::<u16>(),
        color_mask in any::<u16>(),
        params in work_params(),
        m in prop::sample::select(vec![2u32, 3, 5]),
        l_top in 1u32..=5,
        pick in any::<u32>(),
    ) {
        let g = graph_from_mask(n, mask);
        let pins = pins_from_masks(n, pin_mask, color_mask);
        let free: Vec<u32> = (0..n as u32).filter(|&v| !pins.is_pinned(v)).collect();
        prop_assume!(!free.is_empty());
        let v = free[pick as usize % free.len()];
        let exact = oracle::exact_partition(&g, &params, &pins).unwrap();
        prop_assume!(exact.z > 0.0);
        let p_true = exact.marginals[v as usize];

        let mut prev: Option<estimator::MarginalBounds> = None;
        for l in 0..=l_top {
            let b = estimator::marginal_bounds(&g, &pins, &params, v, l, m).unwrap();
            // Containment of the enumerated truth.
            prop_assert!(
                b.p_lo - 1e-12 <= p_true && p_true <= b.p_hi + 1e-12,
                "budget {}: [{}, {}] misses {}", l, b.p_lo, b.p_hi, p_true
            );
            // The probability interval is never wider than the ratio interval.
            if let (estimator::ExtRatio::Finite(_), estimator::ExtRatio::Finite(_)) =
                (b.r_lo, b.r_hi)
            {
                let r_width = b.r_hi.value() - b.r_lo.value();
                prop_assert!(b.p_hi - b.p_lo <= r_width + 1e-15);
            }
            // Deeper budgets nest inside shallower ones.
            if let Some(p) = &prev {
                prop_assert!(p.r_lo.le(b.r_lo) && b.r_hi.le(p.r_hi), "not nested at {}", l);
            }
            // Work cap.
            prop_assert!(
                u128::from(b.nodes_visited)
                    <= u128::from(n as u64) * u128::from(m).pow(l),
                "visited {} at budget {}", b.nodes_visited, l
            );
            prev = Some(b);
        }
    }
}

// ===========================================================================
// Numeric-core grids
// ===========================================================================

#[test]
fn fixed_point_residuals_stay_tiny_on_a_dense_grid() {
    let mut count = 0usize;
    for bi in 0..6 {
        let beta = f64::from(bi) * 0.1;
        for gi in 0..20 {
            let gamma = 1.05 + f64::from(gi) * 0.15;
            if beta * gamma >= 0.99 {
                continue;
            }
            for di in 1..=12 {
                let d = f64::from(di * 4);
                let fp = thresholds::fixed_point_x(beta, gamma, d).unwrap();
                assert!(fp.residual <= 1e-12, "residual {} at ({beta},{gamma},{d})", fp.residual);
                count += 1;
            }
        }
    }
    assert!(count >= 1000, "grid covered only {count} points");
}

#[test]
fn critical_curve_matches_its_closed_form_at_beta_zero() {
    for di in 2..=50u32 {
        let d = f64::from(di);
        let closed = (d - 1.0) * d.powf(-d / (d + 1.0));
        let got = thresholds::gamma_of_d(0.0, d).unwrap();
        if closed <= 1.0 {
            assert_eq!(got, 1.0, "d={d}: expected the below-range convention");
        } else {
            assert!((got - closed).abs() <= 1e-8, "d={d}: {got} vs {closed}");
        }
    }
}

#[test]
fn contraction_is_stationary_at_the_critical_point() {
    for beta in [0.0, 0.3] {
        let cp = thresholds::big_gamma(beta).unwrap();
        let h = 1e-4;
        let f = |d: f64, x: f64| thresholds::alpha_sym(beta, cp.gamma, cp.d, d, x);
        let dd = (f(cp.d + h, cp.x) - f(cp.d - h, cp.x)) / (2.0 * h);
        let dx = (f(cp.d, cp.x + h) - f(cp.d, cp.x - h)) / (2.0 * h);
        assert!(dd.abs() <= 1e-4, "beta={beta}: d-partial {dd}");
        assert!(dx.abs() <= 1e-4, "beta={beta}: x-partial {dx}");
    }
}

#[test]
fn vector_contraction_never_beats_the_symmetric_supremum() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(97);
    for (beta, gamma) in [(0.0, 2.0), (0.2, 2.2)] {
        let profile = thresholds::profile(beta, gamma).unwrap();
        let sup = profile.alpha;
        let big_d = profile.critical.d;
        for _ in 0..5000 {
            let d_free = rng.gen_range(0..=12usize);
            let d0 = rng.gen_range(0..=3u32);
            let d1 = rng.gen_range(0..=3u32);
            if d_free == 0 && d0 == 0 && d1 == 0 {
                continue;
            }
            let xs: Vec<f64> = (0..d_free).map(|_| rng.gen_range(1e-6..=1.0)).collect();
            let a = thresholds::alpha_vec(beta, gamma, big_d, d0, d1, &xs);
            assert!(
                a <= sup + 1e-9,
                "alpha {a} beats supremum {sup} at (d0={d0}, d1={d1}, xs={xs:?})"
            );
        }
    }
}

#[test]
fn symmetric_contraction_scan_stays_below_the_supremum() {
    let profile = thresholds::profile(0.0, 2.0).unwrap();
    let sup = profile.alpha;
    let big_d = profile.critical.d;
    let mut worst = f64::NEG_INFINITY;
    for di in 0..1000 {
        let d = 1.0 + f64::from(di) * 0.2;
        for xi in 1..=1000 {
            let x = f64::from(xi) / 1000.0;
            worst = worst.max(thresholds::alpha_sym(0.0, 2.0, big_d, d, x));
        }
    }
    assert!(worst <= sup + 1e-9, "dense scan found {worst} above supremum {sup}");
    assert!(worst > 0.5 * sup, "dense scan never came near the supremum ({worst} vs {sup})");
}

#[test]
fn near_critical_supremum_approaches_one_from_below() {
    let cp = thresholds::big_gamma(0.0).unwrap();
    let sup = thresholds::sup_alpha(0.0, cp.gamma + 1e-6).unwrap();
    assert!(sup > 0.999 && sup < 1.0, "sup alpha just above the threshold: {sup}");
}

#[test]
fn supremum_decreases_as_gamma_grows() {
    let vals: Vec<f64> = [1.5, 2.0, 3.0, 5.0]
        .iter()
        .map(|&g| thresholds::sup_alpha(0.0, g).unwrap())
        .collect();
    assert!(vals.windows(2).all(|w| w[0] > w[1]), "{vals:?}");
    assert!(vals.iter().all(|&a| a > 0.0 && a < 1.0));
}

#[test]
fn branching_base_survives_an_independent_scan() {
    let profile = thresholds::profile(0.0, 2.0).unwrap();
    let m = profile.m;
    let alpha = profile.alpha;
    let big_d = profile.critical.d;
    let c = (big_d - 1.0) / (2.0 * big_d);
    let ln_gamma = 2.0f64.ln();
    for k in u64::from(m)..=10_000 {
        let lhs = (k as f64).ln() - (k as f64) * c * ln_gamma
            - f64::from(estimator::ceil_log(m, k)) * alpha.ln();
        assert!(lhs <= 1e-12, "depth-charge inequality fails at k = {k}: {lhs}");
    }
}

// ===========================================================================
// Mixing-rate probes
// ===========================================================================

#[test]
fn boundary_influence_decays_with_distance_on_paths() {
    // Pins at distance d from the center on both sides; the influence gap
    // must not grow as the pins move away (strides of 2 keep parity fixed).
    for (beta, gamma) in [(0.0, 2.0), (0.1, 2.5)] {
        let params = SpinParams::new(beta, gamma);
        let g = Graph::path(13);
        let center = 6u32;
        let mut gaps = Vec::new();
        for dist in [2u32, 4, 6] {
            let blue = PinSet::from_pairs(&[
                (center - dist, Color::Blue),
                (center + dist, Color::Blue),
            ]);
            let green = PinSet::from_pairs(&[
                (center - dist, Color::Green),
                (center + dist, Color::Green),
            ]);
            gaps.push(oracle::ssm_probe(&g, &params, &blue, &green, center).unwrap());
        }
        assert!(
            gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "({beta},{gamma}): gaps {gaps:?}"
        );
        assert!(gaps[0] > gaps[2], "({beta},{gamma}): no decay at all: {gaps:?}");
    }
}
