use cegal_core::cex::CexOptions;
use cegal_core::checker::{verify, StateFormula, Verdict};
use cegal_core::expert::expert_rule;
use cegal_core::learner::{
    al_step, cegal_run, initial_safe_rule, run_al, Candidate, LearnerParams, LearnerState, Termination,
};
use cegal_core::model::{build_grid_world, Cell, FeatureMap, GridWorldSpec};
use cegal_core::solve::feature_expectations_exact;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_layout(rng: &mut impl Rng, side: usize) -> GridWorldSpec {
    let mut spec = GridWorldSpec::parametric(side, 1);
    let cells: Vec<Cell> = (0..side * side)
        .map(|i| Cell(i / side, i % side))
        .filter(|&c| c != spec.init && !spec.goal.contains(&c))
        .collect();
    spec.unsafe_cells = cells.into_iter().filter(|_| rng.gen_bool(0.3)).collect();
    spec.rewards = (0..side)
        .map(|_| (0..side).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    spec.discount = 0.9;
    spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// The returned rule always verifies, and the bracket `inf <= k <= 1`
    /// holds with `inf` nondecreasing.
    #[test]
    fn cegal_output_is_safe_and_bracket_is_monotone(seed in any::<u64>(), bound in 0.0f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_layout(&mut rng, 4);
        let game = build_grid_world(&spec).unwrap();
        let phi = StateFormula::safety("unsafe", bound, 16).unwrap();
        let Ok(initial) = initial_safe_rule(&game, &phi) else {
            // the layout forces unsafe visits beyond the bound
            return Ok(());
        };
        let f = FeatureMap::one_hot(game.n_states());
        let expert = expert_rule(&game, &spec.joint_reward(&game)).unwrap();
        let mu_e = feature_expectations_exact(&game, &expert, &f).unwrap();
        let params = LearnerParams { epsilon: 0.05, max_iter: 30, ..LearnerParams::default() };
        let out = cegal_run(&game, &f, &mu_e, &phi, &params, &CexOptions::default(), initial).unwrap();

        let safe = matches!(verify(&game, &out.rule, &phi).unwrap(), Verdict::Satisfy { .. });
        prop_assert!(safe);
        prop_assert!(out.probability <= bound + 1e-12);
        let mut last_inf = 0.0;
        for r in &out.log {
            prop_assert!(r.inf >= last_inf);
            prop_assert!(0.0 <= r.inf && r.inf <= r.k + 1e-15 && r.k <= 1.0);
            last_inf = r.inf;
        }
        for c in &out.state.candidates {
            let safe = matches!(verify(&game, &c.rule, &phi).unwrap(), Verdict::Satisfy { .. });
            prop_assert!(safe);
        }
        if out.termination != Termination::EpsilonClose && out.termination != Termination::InitialClose {
            let best = out.state.closest(&mu_e);
            prop_assert_eq!(&out.mu, &out.state.candidates[best].mu);
        }
    }
}

/// With a bound of one every rule verifies, so the guided loop visits the
/// same candidates as plain apprenticeship learning.
#[test]
fn trivial_bound_reduces_to_plain_learning() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let spec = random_layout(&mut rng, 4);
    let game = build_grid_world(&spec).unwrap();
    let f = FeatureMap::one_hot(game.n_states());
    let expert = expert_rule(&game, &spec.joint_reward(&game)).unwrap();
    let mu_e = feature_expectations_exact(&game, &expert, &f).unwrap();
    let phi = StateFormula::safety("unsafe", 1.0, 16).unwrap();
    let initial = initial_safe_rule(&game, &phi).unwrap();
    let params = LearnerParams {
        epsilon: 1e-3,
        max_iter: 6,
        ..LearnerParams::default()
    };
    let guided = cegal_run(&game, &f, &mu_e, &phi, &params, &CexOptions::default(), initial.clone()).unwrap();
    let plain = run_al(&game, &f, &mu_e, initial, &params).unwrap();
    assert!(guided.log.iter().all(|r| r.status == "satisfy"));
    assert!(guided.state.cex.is_empty());
    let n = guided.state.candidates.len().min(plain.state.candidates.len());
    assert!(n >= 3);
    for (a, b) in guided.state.candidates[..n].iter().zip(&plain.state.candidates[..n]) {
        assert_eq!(a.mu, b.mu);
    }
}

#[test]
fn zero_discount_features_sit_at_the_initial_state() {
    let mut spec = GridWorldSpec::parametric(3, 1);
    spec.discount = 0.0;
    let game = build_grid_world(&spec).unwrap();
    let f = FeatureMap::one_hot(9);
    let s0 = game.initial_state();
    let initial = expert_rule(&game, &spec.joint_reward(&game)).unwrap();
    let mut state = LearnerState::new(Candidate::evaluate(&game, &f, initial).unwrap());
    let mut e = vec![0.0; 9];
    e[s0] = 1.0;
    assert_eq!(state.candidates[0].mu.0, e);

    // an expert elsewhere: the margin is the distance between the two spikes
    let mut mu_e = vec![0.0; 9];
    mu_e[(s0 + 1) % 9] = 1.0;
    let mu_e = cegal_core::model::FeatureExpectation(mu_e);
    let (mm, done) = al_step(&game, &f, &mu_e, &mut state, 0.5).unwrap();
    assert!(!done);
    assert!((mm.delta - 2f64.sqrt()).abs() <= 1e-9);
    assert_eq!(state.candidates[1].mu.0, e);

    let (mm, done) = al_step(
        &game,
        &f,
        &cegal_core::model::FeatureExpectation(e.clone()),
        &mut state,
        0.5,
    )
    .unwrap();
    assert!(done);
    assert_eq!(mm.delta, 0.0);
}
