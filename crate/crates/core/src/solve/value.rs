use crate::error::{Error, Result};
use crate::model::{DecisionRule, MarkovGame};

pub const VALUE_TOL: f64 = 1e-8;
pub const VALUE_MAX_SWEEPS: usize = 100_000;

/// State values and joint-action values of a solved game.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub v: Vec<f64>,
    /// Row-major `q[s * n_actions + a]`.
    pub q: Vec<f64>,
    pub n_actions: usize,
    pub sweeps: usize,
}

impl ValueTable {
    pub fn q(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.n_actions + action]
    }

    pub fn q_row(&self, state: usize) -> &[f64] {
        &self.q[state * self.n_actions..(state + 1) * self.n_actions]
    }
}

#[inline]
fn backup(game: &MarkovGame, v: &[f64], s: usize, a: usize) -> f64 {
    let (succ, prob) = game.successors(s, a);
    succ.iter().zip(prob).map(|(&t, p)| p * v[t as usize]).sum()
}

/// First index of the maximum; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x > values[best] {
            best = i;
        }
    }
    best
}

/// Optimal values for the state reward `reward` and the greedy
/// deterministic rule (ties to the lowest joint action).
pub fn value_iteration(game: &MarkovGame, reward: &[f64]) -> Result<(DecisionRule, ValueTable)> {
    value_iteration_with(game, reward, VALUE_TOL, VALUE_MAX_SWEEPS)
}

pub fn value_iteration_with(
    game: &MarkovGame,
    reward: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<(DecisionRule, ValueTable)> {
    let n = game.n_states();
    let na = game.n_actions();
    if reward.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: reward.len(),
        });
    }
    let gamma = game.discount();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut sweeps = 0;
    loop {
        let mut residual: f64 = 0.0;
        for s in 0..n {
            let best = (0..na)
                .map(|a| backup(game, &v, s, a))
                .fold(f64::NEG_INFINITY, f64::max);
            next[s] = reward[s] + gamma * best;
            residual = residual.max((next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        sweeps += 1;
        if residual < tol {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(Error::NotConverged {
                what: "value iteration",
                iterations: sweeps,
                residual,
                last: v,
            });
        }
    }

    let mut q = vec![0.0; n * na];
    let mut actions = Vec::with_capacity(n);
    for s in 0..n {
        let row = &mut q[s * na..(s + 1) * na];
        for (a, slot) in row.iter_mut().enumerate() {
            *slot = reward[s] + gamma * backup(game, &v, s, a);
        }
        actions.push(argmax(row));
    }
    let rule = DecisionRule::deterministic(na, &actions)?;
    Ok((
        rule,
        ValueTable {
            v,
            q,
            n_actions: na,
            sweeps,
        },
    ))
}
