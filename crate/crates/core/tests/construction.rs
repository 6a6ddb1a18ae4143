use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_lab::construction::engine::{first_level, ConstructionParams};
use spectral_lab::construction::layer::max_shift_gap;
use spectral_lab::construction::{
    apply_layer, direct_integral_gap, init, run, shift_values, verify_step, Budgets,
    ComposedSampler, ShiftLayer,
};
use spectral_lab::dynamics::RotationSystem;
use spectral_lab::dynamics::System;
use spectral_lab::measures::{kernel_eval, EnergyGrid};
use spectral_lab::operator::empirical_dos;
use spectral_lab::sampler::{BaseSampler, Sampler};
use spectral_lab::LabError;

fn small_params() -> ConstructionParams {
    ConstructionParams {
        n: 400,
        m: 8,
        grid_size: 801,
        columns_max: 8,
        level_escalations: 1,
        halvings: 0,
        ..ConstructionParams::default()
    }
}

#[test]
fn quantile_shifts_match_monte_carlo() {
    let eps = 0.2;
    let s = shift_values(eps, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let peak = kernel_eval(eps, 0.0, 0).unwrap();
    let mut draws = Vec::new();
    while draws.len() < 1_000_000 {
        let x: f64 = rng.gen_range(-eps..eps);
        if rng.gen::<f64>() * peak < kernel_eval(eps, x, 0).unwrap() {
            draws.push(x);
        }
    }
    draws.sort_by(f64::total_cmp);
    let q = draws[draws.len() / 4];
    assert!((s[0] - q).abs() < 2e-3, "{} vs {q}", s[0]);
    assert_eq!(s[0], -s[1]);
}

#[test]
fn quantile_shifts_are_dense_up_to_32_columns() {
    for k in [8, 16, 32] {
        let s = shift_values(0.2, k).unwrap();
        assert!(s.iter().all(|x| x.abs() < 0.2));
        assert!(max_shift_gap(&s, 0.2) <= 8.0 * 0.2 / k as f64, "K'={k}");
    }
}

#[test]
fn windows_through_a_column_see_one_shift() {
    let sys = RotationSystem::golden();
    let layer = ShiftLayer::build(&sys, 8, shift_values(0.2, 16).unwrap()).unwrap();
    let t = &layer.tower;
    assert_eq!(t.height, 89);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 1000;
    let mut broken = 0;
    for _ in 0..trials {
        let x0 = t.base_arc.left + rng.gen::<f64>() * t.base_arc.len;
        let first = layer.shift_at(sys.point_at(x0, 0));
        if (1..t.height).any(|j| layer.shift_at(sys.point_at(x0, j)) != first) {
            broken += 1;
        }
    }
    assert!(broken as f64 / trials as f64 <= 2.0 / 16.0, "{broken}");
}

#[test]
fn layer_increment_is_below_previous_smoothing() {
    let sys = RotationSystem::golden();
    let base = ComposedSampler::new(sys.alpha, BaseSampler::cosine(3.0));
    let layer = ShiftLayer::build(&sys, 9, shift_values(0.05, 32).unwrap()).unwrap();
    let next = base.with_layer(layer);
    let sup = (0..20_000)
        .map(|i| {
            let x = i as f64 / 20_000.0;
            (next.eval(x) - base.eval(x)).abs()
        })
        .fold(0.0, f64::max);
    assert!(sup < 0.05);
}

#[test]
fn first_level_reaches_height_64() {
    let sys = RotationSystem::golden();
    let k = first_level(&sys, 64).unwrap();
    assert_eq!(sys.cf.terms[k + 1].q, 89);
    assert!(sys.cf.terms[k].q < 64);
}

#[test]
fn cosine_seed_is_accepted_without_perturbation() {
    let sys = RotationSystem::golden();
    let p = small_params();
    let state = init(&BaseSampler::cosine(3.0), 0.5, &sys, &p).unwrap();
    assert_eq!(state.ledger.seed_delta, 0.0);
    assert!(state.ledger.l0 >= 0.35, "{}", state.ledger.l0);
    let row = &state.ledger.rows[0];
    assert!(row.pass);
    assert_eq!(
        row.smoothing,
        Budgets::new(0.5).unwrap().initial_smoothing()
    );
}

#[test]
fn zero_target_fails_to_seed() {
    let sys = RotationSystem::golden();
    let p = small_params();
    match init(&BaseSampler::Zero, 0.5, &sys, &p) {
        Err(LabError::Seeding(msg)) => assert!(msg.contains("δ=")),
        other => panic!("expected a seeding failure, got {other:?}"),
    }
}

#[test]
fn rational_rotation_is_rejected() {
    let sys = RotationSystem::new(0.25, 8).unwrap();
    assert!(init(&BaseSampler::cosine(3.0), 0.5, &sys, &small_params()).is_err());
}

#[test]
fn oversized_smoothing_is_rejected_before_evaluation() {
    let sys = RotationSystem::golden();
    let state = init(&BaseSampler::cosine(3.0), 0.5, &sys, &small_params()).unwrap();
    let cand = apply_layer(&state, 8, 8).unwrap();
    let bad = 10.0 * state.budgets.eps_n(2);
    assert!(matches!(
        verify_step(&state, &cand, bad),
        Err(LabError::InvalidParameter { .. })
    ));
}

#[test]
fn identity_layer_only_changes_the_mollifier() {
    let sys = RotationSystem::golden();
    let p = ConstructionParams {
        m: 50,
        ..small_params()
    };
    let state = init(&BaseSampler::cosine(3.0), 0.5, &sys, &p).unwrap();
    let layer = ShiftLayer::build(&sys, 8, vec![0.0]).unwrap();
    let cand = state.current.sampler.with_layer(layer);
    let eps = state.current.smoothing * (1.0 - 1e-9);
    let (row, snap) = verify_step(&state, &cand, eps).unwrap();
    assert_eq!(row.increment, 0.0);
    assert!(
        row.increment_ok && row.bands_ok,
        "{:?}",
        row.failed_conditions()
    );
    assert_eq!(snap.dos, state.current.dos);
    assert!(row.covering_radius <= state.current.smoothing + 1e-12);
    assert!(row.cinf_dist > 0.0 && row.cinf_dist < 2.0);
}

#[test]
fn zero_steps_return_the_seed() {
    let sys = RotationSystem::golden();
    let out = run(&BaseSampler::cosine(3.0), 0.5, 0, &sys, &small_params()).unwrap();
    assert!(out.failure.is_none());
    assert_eq!(out.snapshots.len(), 1);
    assert_eq!(out.ledger.rows.len(), 1);
    assert!(out.ledger.budget_safe());
}

#[test]
fn capped_run_reports_the_failing_step() {
    let sys = RotationSystem::golden();
    let out = run(&BaseSampler::cosine(3.0), 0.5, 2, &sys, &small_params()).unwrap();
    assert!(out.ledger.budget_safe());
    let accepted = out.snapshots.len() - 1;
    let passed = out
        .ledger
        .rows
        .iter()
        .filter(|r| r.step > 0 && r.pass)
        .count();
    assert_eq!(accepted, passed);
    if let Some(f) = &out.failure {
        assert_eq!(f.step, accepted + 1);
        let best = f.best.as_ref().unwrap();
        assert!(!best.pass);
        assert!(f
            .to_string()
            .contains(&best.failed_conditions()[0].to_string()));
    }
    for r in out.ledger.rows.iter().filter(|r| r.pass && r.step > 0) {
        assert!(r.le_floor >= r.le_bound && r.le_bound > 0.0);
        assert!(r.smoothing < Budgets::new(0.5).unwrap().eps_n(r.step + 1));
    }
}

#[test]
fn direct_integral_matches_mollified_ids() {
    let sys = System::Rotation(RotationSystem::golden());
    let nu = empirical_dos(&BaseSampler::cosine(3.0), &sys, 500, 10, 2).unwrap();
    let grid = EnergyGrid::linspace(-5.5, 5.5, 1101).unwrap();
    let gap = direct_integral_gap(&nu, 0.2, 64, &grid).unwrap();
    assert!(gap <= 0.01, "{gap}");
}
