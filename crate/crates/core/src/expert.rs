//! Synthetic expert demonstrations and the expert feature expectation.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecisionRule, FeatureExpectation, FeatureMap, MarkovGame};
use crate::solve::{chunked_moments, rollout_rng, sample, sample_successor, value_iteration, McEstimate};

pub const DEFAULT_DEMOS: usize = 1000;

/// `(joint state, joint action)` pairs of one joint trajectory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory(pub Vec<(usize, usize)>);

impl Trajectory {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&(s, _)| s)
    }

    /// Agent `agent`'s `(local state, local action)` view.
    pub fn project(&self, game: &MarkovGame, agent: usize) -> Vec<(usize, usize)> {
        self.0
            .iter()
            .map(|&(s, a)| {
                (
                    game.state_index().component(s, agent),
                    game.action_index().component(a, agent),
                )
            })
            .collect()
    }

    /// Every step has positive probability in `game` (the last action is
    /// not checked since its outcome is not recorded).
    pub fn is_consistent(&self, game: &MarkovGame) -> bool {
        self.0
            .windows(2)
            .all(|w| game.transition_prob(w[0].0, w[0].1, w[1].0) > 0.0)
    }
}

/// Joint demonstrations, one trajectory per JSON line.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DemoSet {
    pub trajectories: Vec<Trajectory>,
}

impl DemoSet {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for t in &self.trajectories {
            let _ = writeln!(out, "{}", serde_json::to_string(t)?);
        }
        Ok(out)
    }

    pub fn from_json_lines(text: &str) -> Result<Self> {
        let trajectories = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<Trajectory>, _>>()?;
        Ok(Self { trajectories })
    }
}

/// The expert's decision rule: optimal for the ground-truth reward. With a
/// shared reward and independent agents this is the identical-interest
/// equilibrium rule.
pub fn expert_rule(game: &MarkovGame, ground_truth: &[f64]) -> Result<DecisionRule> {
    Ok(value_iteration(game, ground_truth)?.0)
}

/// Rolls out `m` trajectories of `horizon` steps under `rule`.
pub fn rollout_demos(game: &MarkovGame, rule: &DecisionRule, m: usize, horizon: usize, seed: u64) -> Result<DemoSet> {
    rule.check_against(game)?;
    if m == 0 || horizon == 0 {
        return Err(Error::Empty("demonstrations"));
    }
    let trajectories = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = rollout_rng(seed, i);
            let mut s = game.initial_state();
            let mut steps = Vec::with_capacity(horizon);
            for t in 0..horizon {
                let a = sample(rule.row(s), &mut rng);
                steps.push((s, a));
                if t + 1 < horizon {
                    s = sample_successor(game, s, a, &mut rng);
                }
            }
            Trajectory(steps)
        })
        .collect();
    Ok(DemoSet { trajectories })
}

/// Demonstrations of the optimal rule for `ground_truth`.
pub fn generate_demos(game: &MarkovGame, ground_truth: &[f64], m: usize, horizon: usize, seed: u64) -> Result<DemoSet> {
    let rule = expert_rule(game, ground_truth)?;
    rollout_demos(game, &rule, m, horizon, seed)
}

/// `mu_E = 1/m sum_tau sum_t gamma^t f(s_t)` with per-feature standard errors.
pub fn estimate_mu_e_with_errors(demos: &DemoSet, features: &FeatureMap, discount: f64) -> Result<McEstimate> {
    if demos.is_empty() {
        return Err(Error::Empty("demonstrations"));
    }
    if let Some(&bad) = demos
        .trajectories
        .iter()
        .flat_map(|t| t.states())
        .find(|&s| s >= features.n_states())
        .as_ref()
    {
        return Err(Error::InvalidModel(format!("demo visits unknown state {bad}")));
    }
    Ok(chunked_moments(features, demos.len(), true, |i, m| {
        let mut scale = 1.0;
        for s in demos.trajectories[i].states() {
            m.add(features, s, scale);
            scale *= discount;
        }
    }))
}

pub fn estimate_mu_e(demos: &DemoSet, features: &FeatureMap, discount: f64) -> Result<FeatureExpectation> {
    Ok(estimate_mu_e_with_errors(demos, features, discount)?.mean)
}
