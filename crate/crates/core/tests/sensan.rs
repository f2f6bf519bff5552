mod common;

use common::rng;
use proptest::prelude::*;
use rand::Rng;
use reqvar_core::seeds::derive_seed;
use reqvar_core::sensan::*;
use reqvar_core::weather::{build_sample_plan, SamplePlan};

/// Unit-variance uniform value for weather group `slot` of a plan row.
fn unit(seeds: &[u64; 6], slot: usize) -> f64 {
    let seed = derive_seed("test-group", &[seeds[slot], slot as u64]);
    ((seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 12f64.sqrt()
}

/// Paired outputs of `f(x1, x2)` for the block that freezes group 1.
fn two_group(n: usize, seed: u64, f: impl Fn(f64, f64) -> f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let (mut ya, mut yc1, mut yc2) = (vec![], vec![], vec![]);
    for _ in 0..n {
        let (a1, a2, b1, b2): (f64, f64, f64, f64) = (
            r.random_range(-1.0..1.0) * 3f64.sqrt(),
            r.random_range(-1.0..1.0) * 3f64.sqrt(),
            r.random_range(-1.0..1.0) * 3f64.sqrt(),
            r.random_range(-1.0..1.0) * 3f64.sqrt(),
        );
        ya.push(f(a1, a2));
        yc1.push(f(a1, b2));
        yc2.push(f(b1, a2));
    }
    (ya, yc1, yc2)
}

#[test]
fn additive_two_group_function_splits_evenly() {
    let (ya, yc1, yc2) = two_group(1024, 3, |x1, x2| x1 + x2);
    let s1 = first_order_group_index(&ya, &yc1, 1).unwrap();
    let s2 = first_order_group_index(&ya, &yc2, 2).unwrap();
    assert!((s1.s1 - 0.5).abs() <= 0.05, "{}", s1.s1);
    assert!((s2.s1 - 0.5).abs() <= 0.05, "{}", s2.s1);
    assert!((s1.s1 + s2.s1 - 1.0).abs() <= 0.1);
}

#[test]
fn single_factor_function_gives_exact_unit_index() {
    let (ya, yc1, yc2) = two_group(256, 4, |x1, _| x1 * x1 + 0.3 * x1);
    assert_eq!(first_order_group_index(&ya, &yc1, 1).unwrap().s1, 1.0);
    let other = first_order_group_index(&ya, &yc2, 1).unwrap();
    assert!(other.s1.abs() <= 3.0 * other.se, "{other:?}");
}

#[test]
fn undefined_and_short_inputs() {
    assert_eq!(first_order_group_index(&[2.0; 10], &[2.0; 10], 0), Err(SensanError::ZeroVariance));
    assert!(matches!(
        first_order_group_index(&[1.0, 2.0], &[1.0, 2.0], 0),
        Err(SensanError::InsufficientData(_))
    ));
    assert!(first_order_group_index(&[1.0; 9], &[1.0; 8], 0).is_err());
    let mut bad: Vec<f64> = (0..10).map(|k| k as f64).collect();
    bad[3] = f64::NAN;
    assert!(first_order_group_index(&bad, &bad, 0).is_err());
}

fn plan_outputs(plan: &SamplePlan, f: impl Fn(&[u64; 6]) -> f64) -> Vec<Option<f64>> {
    plan.rows.iter().map(|row| Some(f(&row.group_seeds))).collect()
}

#[test]
fn plan_driven_single_factor() {
    let plan = build_sample_plan(64, 8).unwrap();
    let outputs = plan_outputs(&plan, |s| 5.0 + 0.3 * unit(s, 0));
    let report = run_sensitivity(&outputs, &plan, 11.0, 1).unwrap();
    assert!((report.groups[0].s1 - 1.0).abs() < 1e-12);
    for g in &report.groups[1..] {
        assert!(g.s1.abs() <= 3.0 * g.se + 0.05, "{g:?}");
    }
    assert!(!report.unreliable);
    assert_eq!(report.n_effective, 64);
}

#[test]
fn plan_driven_additive_function_sums_to_one() {
    let plan = build_sample_plan(2048, 9).unwrap();
    let weights = [1.0, 0.5, 0.8, 0.2, 1.2, 0.1];
    let outputs = plan_outputs(&plan, |s| (0..6).map(|i| weights[i] * unit(s, i)).sum());
    let report = run_sensitivity(&outputs, &plan, 11.0, 2).unwrap();
    let sum: f64 = report.groups.iter().map(|g| g.s1).sum();
    assert!((sum - 1.0).abs() <= 0.1, "{sum}");
    assert!((report.unattributed - (1.0 - sum)).abs() < 1e-12);
    let total_w: f64 = weights.iter().map(|w| w * w).sum();
    for (g, w) in report.groups.iter().zip(weights) {
        assert!((g.s1 - w * w / total_w).abs() < 4.0 * g.se + 0.02, "{g:?}");
        assert!((g.partial_variance - g.s1 * report.total_variance).abs() < 1e-15);
    }
}

#[test]
fn constant_outputs_surface_an_error() {
    let plan = build_sample_plan(16, 1).unwrap();
    let outputs = vec![Some(5.0); plan.rows.len()];
    assert_eq!(run_sensitivity(&outputs, &plan, 2.0, 0), Err(SensanError::ZeroVariance));
}

#[test]
fn failed_rows_are_excluded_pairwise() {
    let plan = build_sample_plan(40, 2).unwrap();
    let mut outputs = plan_outputs(&plan, |s| unit(s, 0) + unit(s, 4));
    // Base rows 0..5 lose one partner each; row 5 loses its A output.
    for r in 0..5 {
        outputs[plan.n * (r % 6 + 1) + r] = None;
    }
    outputs[5] = None;
    let report = run_sensitivity(&outputs, &plan, 5.0, 3).unwrap();
    assert_eq!(report.n_effective, 34);
    assert_eq!(report.failed_rows, 6);
    assert!(!report.unreliable);
    for r in 6..15 {
        outputs[r] = None;
    }
    let report = run_sensitivity(&outputs, &plan, 5.0, 3).unwrap();
    assert_eq!(report.n_effective, 25);
    assert!(report.unreliable);
    assert!(run_sensitivity(&outputs[1..], &plan, 5.0, 3).is_err());
}

#[test]
fn bootstrap_error_shrinks_with_sample_size() {
    let mut ratios = Vec::new();
    for trial in 0..10 {
        let f = |x1: f64, x2: f64| x1 + 0.7 * x2 + 0.2 * x1 * x2;
        let (ya, yc, _) = two_group(200, 100 + trial, f);
        let (yb, yd, _) = two_group(400, 200 + trial, f);
        let small = first_order_group_index(&ya, &yc, trial).unwrap().se;
        let large = first_order_group_index(&yb, &yd, trial).unwrap().se;
        ratios.push(large / small);
    }
    ratios.sort_by(f64::total_cmp);
    let median = 0.5 * (ratios[4] + ratios[5]);
    assert!(median <= 0.8, "{median}");
}

#[test]
fn variability_summary_basics() {
    let values: Vec<(f64, f64)> = (0..20).map(|k| (5.0 + 0.01 * k as f64, if k < 15 { 0.7 } else { 0.2 })).collect();
    let s = summarize_variability(&values, 8.0).unwrap();
    assert_eq!(s.count, 20);
    assert!((s.median - 5.095).abs() < 1e-12);
    assert_eq!(s.fraction_within_10pct_of_median, 1.0);
    assert_eq!(s.fraction_interpretability_ge_05, 0.75);
    assert!(s.q05 <= s.median && s.median <= s.q95);
    assert!(summarize_variability(&values[..7], 8.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_is_affine_invariant(seed in 0u64..1000, a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0], b in -100.0f64..100.0) {
        let (ya, yc, _) = two_group(64, seed, |x1, x2| x1 + 0.5 * x2 * x2);
        let base = first_order_group_index(&ya, &yc, 1).unwrap().s1;
        let ta: Vec<f64> = ya.iter().map(|v| a * v + b).collect();
        let tc: Vec<f64> = yc.iter().map(|v| a * v + b).collect();
        let moved = first_order_group_index(&ta, &tc, 1).unwrap().s1;
        prop_assert!((base - moved).abs() < 1e-9);
    }

    #[test]
    fn index_is_symmetric_in_blocks(seed in 0u64..1000) {
        let (ya, yc, _) = two_group(32, seed, |x1, x2| x1 * x2 + x1);
        let ab = first_order_group_index(&ya, &yc, 1).unwrap().s1;
        let ba = first_order_group_index(&yc, &ya, 1).unwrap().s1;
        prop_assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn report_bookkeeping_is_consistent(seed in 0u64..200, w in 0.0f64..2.0) {
        let plan = build_sample_plan(32, seed).unwrap();
        let outputs = plan_outputs(&plan, |s| unit(s, 0) + w * unit(s, 1) + 0.2 * unit(s, 5));
        let report = run_sensitivity(&outputs, &plan, 3.0, seed).unwrap();
        let sum: f64 = report.groups.iter().map(|g| g.s1).sum();
        prop_assert!((report.unattributed - (1.0 - sum)).abs() < 1e-12);
        prop_assert!(report.total_variance > 0.0);
        for g in &report.groups {
            prop_assert!((g.partial_variance - g.s1 * report.total_variance).abs() <= 1e-12 * report.total_variance);
            prop_assert_eq!(g.significant, g.s1 >= SIGNIFICANCE_FLOOR);
            prop_assert!(g.se >= 0.0);
        }
    }

    #[test]
    fn summary_quantiles_are_ordered(values in prop::collection::vec((0.001f64..0.02, 0.0f64..1.0), 8..60)) {
        let s = summarize_variability(&values, 3.0).unwrap();
        prop_assert!(s.q05 <= s.median && s.median <= s.q95);
        prop_assert!((0.0..=1.0).contains(&s.fraction_within_10pct_of_median));
        prop_assert!((0.0..=1.0).contains(&s.fraction_interpretability_ge_05));
    }
}
