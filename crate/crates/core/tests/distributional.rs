//! Monte Carlo behavior checks that cut across modules.

mod common;

use common::two_mc_se;
use spiketail::diagnostics::{diagnose, select_cutpoint};
use spiketail::perm::SeedSpec;
use spiketail::simgen::{generate_trial, ScenarioKind, ScenarioSpec, TailDist};
use spiketail::twostep::{estimate_component_correlation, two_step};

fn spec(kind: ScenarioKind, n: usize, pi0: f64, delta: f64, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        kind,
        n,
        pi0,
        tail_dist: TailDist::Uniform01,
        delta,
        delta_a: 0.0,
        delta_b: 0.0,
        k_scale: 0.0,
        seed: SeedSpec::new(seed, 0),
    }
}

#[test]
fn component_correlation_is_near_zero_under_the_null() {
    let mut sum = 0.0;
    let reps = 20;
    for i in 0..reps {
        let ds = generate_trial(&spec(ScenarioKind::Null, 90, 0.3, 0.0, 300 + i)).unwrap();
        sum += estimate_component_correlation(&ds, 300, SeedSpec::new(400 + i, 0)).unwrap();
    }
    let mean = sum / reps as f64;
    assert!(mean.abs() < 0.15, "mean null correlation estimate {mean}");
}

#[test]
fn null_rejection_rate_is_near_nominal() {
    let reps = 200;
    let mut fisher_rej = 0;
    let mut brown_rej = 0;
    for i in 0..reps {
        let ds = generate_trial(&spec(ScenarioKind::Null, 60, 0.4, 0.0, 500 + i)).unwrap();
        let r = two_step(&ds, 400, SeedSpec::new(700 + i, 0)).unwrap();
        if r.p_fisher < 0.05 {
            fisher_rej += 1;
        }
        if r.p_brown < 0.05 {
            brown_rej += 1;
        }
    }
    let fisher_rate = fisher_rej as f64 / reps as f64;
    let brown_rate = brown_rej as f64 / reps as f64;
    assert!((fisher_rate - 0.05).abs() <= 0.04, "fisher null rate {fisher_rate}");
    assert!(brown_rate <= 0.05 + 0.04, "brown null rate {brown_rate}");
}

#[test]
fn centering_removes_a_pure_main_effect_but_not_an_interaction() {
    // Pure main effect: after centering, the interaction-only p-value
    // should look null, while the raw main-effect p-value is small.
    let reps = 15;
    let mut interaction_p_sum = 0.0;
    for i in 0..reps {
        let mut ds = generate_trial(&spec(ScenarioKind::Null, 80, 0.3, 0.0, 900 + i)).unwrap();
        for j in 0..ds.len() {
            if ds.t[j] == 1 {
                ds.y[j] += 2.0;
            }
        }
        let rep = diagnose(&ds, 300, 30, SeedSpec::new(1000 + i, 0)).unwrap();
        assert!(rep.p_main < 0.01, "main effect should be detected, got {}", rep.p_main);
        interaction_p_sum += rep.p_interaction_only_fisher;
    }
    let mean_p = interaction_p_sum / reps as f64;
    assert!(mean_p > 0.25, "interaction-only p should be roughly uniform, mean {mean_p}");

    // Tail-only interaction survives centering.
    let ds = generate_trial(&spec(ScenarioKind::TailOnly, 120, 0.2, 5.0, 77)).unwrap();
    let rep = diagnose(&ds, 400, 30, SeedSpec::new(78, 0)).unwrap();
    assert!(
        rep.p_interaction_only_fisher < 0.05,
        "predictive signal lost after centering: p = {}",
        rep.p_interaction_only_fisher
    );
}

#[test]
fn cutpoint_selection_is_calibrated_under_the_null() {
    // The selection-adjusted permutation p-value should not over-reject
    // even though tau is optimized.
    let reps = 40;
    let mut rejections = 0;
    for i in 0..reps {
        let ds = generate_trial(&spec(ScenarioKind::Null, 40, 0.0, 0.0, 1200 + i)).unwrap();
        let r = select_cutpoint(&ds, 5, 200, 20, SeedSpec::new(1300 + i, 0)).unwrap();
        if r.p_perm < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    assert!(
        rate <= 0.05 + two_mc_se(0.05, reps as usize) + 0.05,
        "selection-adjusted null rejection rate {rate}"
    );
}
