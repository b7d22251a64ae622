//! Tabular Nash-Q learning for identical-interest Markov games.
//!
//! Every agent keeps a Q-table for every agent over (joint state, joint
//! action). With a shared reward the stage games are identical-interest,
//! so the equilibrium joint action at a state is the joint argmax of the
//! tables and each agent's Nash value is its table entry at that action.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::expectation::{rollout_rng, sample_successor};
use super::value::argmax;
use crate::error::{Error, Result};
use crate::model::{DecisionRule, MarkovGame};

/// Learning-rate schedule as a function of the visit count of `(s, a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSchedule {
    /// `1 / (1 + visits)`
    Harmonic,
    /// `(1 + visits)^-exponent`
    Polynomial {
        exponent: f64,
    },
    Constant {
        alpha: f64,
    },
}

impl AlphaSchedule {
    /// Rate for the update that follows `visits` earlier updates.
    pub fn rate(&self, visits: u64) -> f64 {
        match *self {
            AlphaSchedule::Harmonic => 1.0 / (1.0 + visits as f64),
            AlphaSchedule::Polynomial { exponent } => (1.0 + visits as f64).powf(-exponent),
            AlphaSchedule::Constant { alpha } => alpha,
        }
    }
}

/// Shared reward signal observed by all agents.
#[derive(Clone, Copy, Debug)]
pub enum Reward<'a> {
    /// `r(s)` of the state the action is taken in.
    State(&'a [f64]),
    /// `r(s, a)`, row-major over joint actions.
    StateAction(&'a [f64]),
}

impl Reward<'_> {
    #[inline]
    fn at(&self, state: usize, action: usize, n_actions: usize) -> f64 {
        match self {
            Reward::State(r) => r[state],
            Reward::StateAction(r) => r[state * n_actions + action],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NashQParams {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub alpha: AlphaSchedule,
    /// Per-agent exploration probability.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for NashQParams {
    fn default() -> Self {
        Self {
            episodes: 1000,
            steps_per_episode: 100,
            alpha: AlphaSchedule::Harmonic,
            epsilon: 0.1,
            seed: 0,
        }
    }
}

/// One Q-table per agent over `(joint state, joint action)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTableSet {
    pub n_states: usize,
    pub n_actions: usize,
    pub tables: Vec<Vec<f64>>,
}

impl QTableSet {
    pub fn new(n_agents: usize, n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            tables: vec![vec![0.0; n_states * n_actions]; n_agents],
        }
    }

    pub fn q(&self, agent: usize, state: usize, action: usize) -> f64 {
        self.tables[agent][state * self.n_actions + action]
    }

    /// Equilibrium joint action of the identical-interest stage game at
    /// `state`: the argmax of the summed tables, lowest index on ties.
    pub fn equilibrium(&self, state: usize) -> usize {
        let lo = state * self.n_actions;
        let joint: Vec<f64> = (0..self.n_actions)
            .map(|a| self.tables.iter().map(|t| t[lo + a]).sum())
            .collect();
        argmax(&joint)
    }

    pub fn nash_value(&self, agent: usize, state: usize) -> f64 {
        self.q(agent, state, self.equilibrium(state))
    }

    pub fn greedy_rule(&self) -> Result<DecisionRule> {
        let actions: Vec<usize> = (0..self.n_states).map(|s| self.equilibrium(s)).collect();
        DecisionRule::deterministic(self.n_actions, &actions)
    }
}

pub fn nash_q_learning(
    game: &MarkovGame,
    reward: Reward<'_>,
    params: &NashQParams,
) -> Result<(QTableSet, DecisionRule)> {
    let n = game.n_states();
    let na = game.n_actions();
    let expected = match reward {
        Reward::State(_) => n,
        Reward::StateAction(_) => n * na,
    };
    let actual = match reward {
        Reward::State(r) | Reward::StateAction(r) => r.len(),
    };
    if actual != expected {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    let gamma = game.discount();
    let actions = game.action_index();
    let per_agent = game.per_agent_actions();
    let agents = game.n_agents();

    let mut q = QTableSet::new(agents, n, na);
    let mut visits = vec![0u64; n * na];
    let mut rng = rollout_rng(params.seed, 0);
    let mut parts = vec![0usize; agents];

    for _ in 0..params.episodes {
        let mut s = game.initial_state();
        for _ in 0..params.steps_per_episode {
            let greedy = actions.decode(q.equilibrium(s));
            for (i, slot) in parts.iter_mut().enumerate() {
                *slot = if rng.gen::<f64>() < params.epsilon {
                    rng.gen_range(0..per_agent)
                } else {
                    greedy[i]
                };
            }
            let a = actions.encode(&parts);
            let next = sample_successor(game, s, a, &mut rng);
            let r = reward.at(s, a, na);
            let idx = s * na + a;
            let alpha = params.alpha.rate(visits[idx]);
            visits[idx] += 1;
            let eq = q.equilibrium(next);
            for table in q.tables.iter_mut() {
                let target = r + gamma * table[next * na + eq];
                table[idx] = (1.0 - alpha) * table[idx] + alpha * target;
            }
            s = next;
        }
    }
    let rule = q.greedy_rule()?;
    Ok((q, rule))
}
