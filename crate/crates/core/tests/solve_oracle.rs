mod support;

use cegal_core::dtmc::induce_dtmc;
use cegal_core::expert::{estimate_mu_e, estimate_mu_e_with_errors, expert_rule, generate_demos, DemoSet, Trajectory};
use cegal_core::model::{
    build_grid_world, DecisionRule, FeatureMap, GridWorldSpec, JointIndexer, Labels, MarkovGame, WeightVector,
};
use cegal_core::solve::{
    default_horizon, feature_expectations_exact, feature_expectations_mc, feature_expectations_mc_sequential,
    value_iteration,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::{discounted_features, random_rows, Rows};

struct RandomGame {
    game: MarkovGame,
    rule: DecisionRule,
    features: Vec<Vec<f64>>,
}

fn random_game(rng: &mut impl Rng, n: usize, na: usize, gamma: f64) -> RandomGame {
    let rows: Rows = (0..n * na).map(|_| random_rows(rng, n, false).swap_remove(0)).collect();
    let game = MarkovGame::new(
        JointIndexer::new(n, 1).unwrap(),
        JointIndexer::new(na, 1).unwrap(),
        rows,
        gamma,
        0,
        Labels::new(),
    )
    .unwrap();
    let rule_rows = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..na).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().enumerate().map(|(a, x)| (a, x / total)).collect()
        })
        .collect();
    let rule = DecisionRule::new(na, rule_rows).unwrap();
    let features = (0..n)
        .map(|_| (0..3).map(|_| rng.gen_range(0.0..=1.0)).collect())
        .collect();
    RandomGame { game, rule, features }
}

fn chain_rows(g: &RandomGame) -> Rows {
    induce_dtmc(&g.game, &g.rule).unwrap().rows()
}

#[test]
fn exact_and_monte_carlo_agree_on_random_games() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..20 {
        let n = rng.gen_range(2..=6);
        let g = random_game(&mut rng, n, 3, 0.9);
        let f = FeatureMap::dense(g.features.clone()).unwrap();
        let exact = feature_expectations_exact(&g.game, &g.rule, &f).unwrap();
        let oracle = discounted_features(&chain_rows(&g), &g.features, 0.9, 0);
        for (a, b) in exact.0.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8, "case {case}: exact {a} vs linear solve {b}");
        }
        let horizon = default_horizon(0.9, 1e-6);
        let mc = feature_expectations_mc(&g.game, &g.rule, &f, 100_000, horizon, case).unwrap();
        // truncation after `horizon` steps biases each coordinate by at most this
        let tail = 0.9f64.powi(horizon as i32 + 1) / (1.0 - 0.9);
        for j in 0..3 {
            let err = (mc.mean.0[j] - exact.0[j]).abs();
            assert!(
                err <= 3.0 * mc.std_err[j] + tail,
                "case {case} feature {j}: |{} - {}| > 3 x {}",
                mc.mean.0[j],
                exact.0[j],
                mc.std_err[j]
            );
        }
    }
}

#[test]
fn closed_forms_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = random_game(&mut rng, 4, 2, 0.0);
    let f = FeatureMap::dense(g.features.clone()).unwrap();
    let mu = feature_expectations_exact(&g.game, &g.rule, &f).unwrap();
    for (a, b) in mu.0.iter().zip(&g.features[0]) {
        assert!((a - b).abs() <= 1e-12);
    }

    // absorbing initial state
    let gamma = 0.95;
    let rows = vec![vec![(0, 1.0)], vec![(0, 0.5), (1, 0.5)]];
    let game = MarkovGame::new(
        JointIndexer::new(2, 1).unwrap(),
        JointIndexer::new(1, 1).unwrap(),
        rows,
        gamma,
        0,
        Labels::new(),
    )
    .unwrap();
    let rule = DecisionRule::deterministic(1, &[0, 0]).unwrap();
    let mu = feature_expectations_exact(&game, &rule, &FeatureMap::one_hot(2)).unwrap();
    assert!((mu.0[0] - 1.0 / (1.0 - gamma)).abs() <= 1e-12);
    assert_eq!(mu.0[1], 0.0);
}

#[test]
fn monte_carlo_is_exact_without_randomness() {
    // deterministic cycle 0 -> 1 -> 2 -> 0
    let rows = vec![vec![(1, 1.0)], vec![(2, 1.0)], vec![(0, 1.0)]];
    let game = MarkovGame::new(
        JointIndexer::new(3, 1).unwrap(),
        JointIndexer::new(1, 1).unwrap(),
        rows,
        0.9,
        0,
        Labels::new(),
    )
    .unwrap();
    let rule = DecisionRule::deterministic(1, &[0, 0, 0]).unwrap();
    let f = FeatureMap::one_hot(3);
    let exact = feature_expectations_exact(&game, &rule, &f).unwrap();
    let horizon = default_horizon(0.9, 1e-6);
    let mc = feature_expectations_mc(&game, &rule, &f, 3, horizon, 0).unwrap();
    for (a, b) in mc.mean.0.iter().zip(&exact.0) {
        assert!((a - b).abs() <= 1e-5);
    }
    // identical rollouts: only rounding in the variance remains
    assert!(mc.std_err.iter().all(|&s| s <= 1e-6));
}

#[test]
fn monte_carlo_error_shrinks_with_rollouts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = random_game(&mut rng, 5, 2, 0.8);
    let f = FeatureMap::dense(g.features.clone()).unwrap();
    let exact = feature_expectations_exact(&g.game, &g.rule, &f).unwrap();
    let horizon = default_horizon(0.8, 1e-8);
    // mean squared error over seeds at m and 16 m: the ratio should be ~16
    let mse = |m: usize| -> f64 {
        (0..40u64)
            .map(|seed| {
                let mc = feature_expectations_mc(&g.game, &g.rule, &f, m, horizon, 1000 + seed).unwrap();
                mc.mean.distance(&exact).powi(2)
            })
            .sum::<f64>()
            / 40.0
    };
    let ratio = mse(100) / mse(1600);
    assert!((6.0..40.0).contains(&ratio), "mse ratio {ratio}");
}

#[test]
fn parallel_and_sequential_rollouts_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_game(&mut rng, 6, 3, 0.9);
    let f = FeatureMap::dense(g.features.clone()).unwrap();
    let a = feature_expectations_mc(&g.game, &g.rule, &f, 5000, 200, 9).unwrap();
    let b = feature_expectations_mc_sequential(&g.game, &g.rule, &f, 5000, 200, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn value_iteration_examples() {
    // two-state chain 0 -> 1 (absorbing), rewards (0, 1), gamma 0.5
    let game = MarkovGame::new(
        JointIndexer::new(2, 1).unwrap(),
        JointIndexer::new(1, 1).unwrap(),
        vec![vec![(1, 1.0)], vec![(1, 1.0)]],
        0.5,
        0,
        Labels::new(),
    )
    .unwrap();
    let (_, vt) = value_iteration(&game, &[0.0, 1.0]).unwrap();
    assert!((vt.v[1] - 2.0).abs() < 1e-7);
    assert!((vt.v[0] - 1.0).abs() < 1e-7);

    let grid = build_grid_world(&GridWorldSpec::parametric(3, 1)).unwrap();
    let (rule, vt) = value_iteration(&grid, &vec![0.0; grid.n_states()]).unwrap();
    assert!(vt.v.iter().all(|&v| v == 0.0));
    assert!((0..grid.n_states()).all(|s| rule.action(s) == Some(0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// `V = max_a Q`, and the greedy rule's return is at least that of 100
    /// random rules.
    #[test]
    fn greedy_rule_beats_random_rules(seed in any::<u64>(), n in 2usize..=6, na in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_game(&mut rng, n, na, 0.9);
        let reward: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (rule, vt) = value_iteration(&g.game, &reward).unwrap();
        for s in 0..n {
            let m = vt.q_row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((vt.v[s] - m).abs() <= 1e-7);
        }
        let f = FeatureMap::one_hot(n);
        let w = WeightVector(reward.clone());
        let best = w.value_of(&feature_expectations_exact(&g.game, &rule, &f).unwrap());
        for _ in 0..100 {
            let other = random_game(&mut rng, n, na, 0.9).rule;
            let v = w.value_of(&feature_expectations_exact(&g.game, &other, &f).unwrap());
            prop_assert!(best >= v - 1e-6, "greedy {} < random {}", best, v);
        }
    }
}

#[test]
fn demo_examples() {
    let mut spec = GridWorldSpec::parametric(3, 1);
    spec.move_success_prob = 1.0;
    let game = build_grid_world(&spec).unwrap();
    let gt = spec.joint_reward(&game);
    let demos = generate_demos(&game, &gt, 5, 10, 1).unwrap();
    assert!(demos.trajectories.windows(2).all(|w| w[0] == w[1]));

    let one = generate_demos(&game, &gt, 1, 1, 1).unwrap();
    let expert = expert_rule(&game, &gt).unwrap();
    let s0 = game.initial_state();
    assert_eq!(one.trajectories[0].0, vec![(s0, expert.action(s0).unwrap())]);

    let f = FeatureMap::one_hot(game.n_states());
    let mu = estimate_mu_e(&one, &f, 0.99).unwrap();
    assert_eq!(mu.0[s0], 1.0);
    assert!(estimate_mu_e(&DemoSet { trajectories: vec![] }, &f, 0.99).is_err());
    let mu0 = estimate_mu_e(&demos, &f, 0.0).unwrap();
    assert_eq!(mu0.0[s0], 1.0);
    assert_eq!(mu0.0.iter().sum::<f64>(), 1.0);
    let _ = Trajectory(vec![]);
}

/// Expert feature expectation on the default layout, estimated from 10^4
/// demonstrations, lies within three standard errors of the exact value.
/// Checked on scalar features (the ground-truth reward and two random state
/// features) rather than the one-hot map, whose thousands of correlated
/// coordinates would turn one test into many.
#[test]
fn expert_estimate_matches_exact_expectation() {
    let spec = GridWorldSpec::default_config();
    let game = build_grid_world(&spec).unwrap();
    let gt = spec.joint_reward(&game);
    let horizon = default_horizon(game.discount(), 1e-6);
    let demos = generate_demos(&game, &gt, 10_000, horizon, 17).unwrap();
    assert!(demos
        .trajectories
        .iter()
        .all(|t| t.is_consistent(&game) && t.len() == horizon));
    assert!(demos.trajectories.iter().all(|t| t.0[0].0 == game.initial_state()));
    let goal = game.label("goal").unwrap();
    assert!(demos.trajectories.iter().any(|t| t.states().any(|s| goal.contains(&s))));

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (lo, hi) = gt
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    // features must lie in [0, 1]: rescale the reward affinely
    let rows = (0..game.n_states())
        .map(|s| {
            vec![
                (gt[s] - lo) / (hi - lo),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
            ]
        })
        .collect();
    let f = FeatureMap::dense(rows).unwrap();
    let est = estimate_mu_e_with_errors(&demos, &f, game.discount()).unwrap();
    let exact = feature_expectations_exact(&game, &expert_rule(&game, &gt).unwrap(), &f).unwrap();
    let tail = game.discount().powi(horizon as i32) / (1.0 - game.discount());
    for j in 0..3 {
        assert!(est.std_err[j] > 0.0);
        let err = (est.mean.0[j] - exact.0[j]).abs();
        assert!(
            err <= 3.0 * est.std_err[j] + tail,
            "feature {j}: |{} - {}| > 3 x {}",
            est.mean.0[j],
            exact.0[j],
            est.std_err[j]
        );
    }
}
