use serde::{Deserialize, Serialize};

use super::{MarkovGame, STOCHASTIC_TOL};
use crate::error::{Error, Result};

/// Stationary joint decision rule: a distribution over joint actions for
/// every joint state. Rows are sparse `(action, probability)` lists sorted
/// by action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    n_actions: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl DecisionRule {
    pub fn new(n_actions: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut rows = rows;
        for (s, row) in rows.iter_mut().enumerate() {
            row.retain(|&(_, p)| p != 0.0);
            row.sort_by_key(|&(a, _)| a);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidRule(format!("state {s} repeats an action")));
            }
            let mut sum = 0.0;
            for &(a, p) in row.iter() {
                if a >= n_actions {
                    return Err(Error::InvalidRule(format!("state {s} uses action {a} out of range")));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidRule(format!(
                        "state {s} has probability {p} outside [0,1]"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidRule(format!("state {s} sums to {sum}")));
            }
        }
        Ok(Self { n_actions, rows })
    }

    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        Self::new(n_actions, actions.iter().map(|&a| vec![(a, 1.0)]).collect())
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        let row: Vec<_> = (0..n_actions).map(|a| (a, p)).collect();
        Self {
            n_actions,
            rows: vec![row; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[state]
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.rows[state]
            .iter()
            .find(|&&(a, _)| a == action)
            .map_or(0.0, |&(_, p)| p)
    }

    /// The single action at `state` if the row is deterministic.
    pub fn action(&self, state: usize) -> Option<usize> {
        match self.rows[state].as_slice() {
            [(a, _)] => Some(*a),
            _ => None,
        }
    }

    /// `alpha * self + (1 - alpha) * other`, row by row.
    pub fn mix(&self, other: &DecisionRule, alpha: f64) -> Result<Self> {
        if self.n_actions != other.n_actions || self.n_states() != other.n_states() {
            return Err(Error::InvalidRule("cannot mix rules of different shapes".into()));
        }
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let mut dense = vec![0.0; self.n_actions];
                for &(act, p) in a {
                    dense[act] += alpha * p;
                }
                for &(act, p) in b {
                    dense[act] += (1.0 - alpha) * p;
                }
                dense.into_iter().enumerate().filter(|&(_, p)| p > 0.0).collect()
            })
            .collect();
        Ok(Self {
            n_actions: self.n_actions,
            rows,
        })
    }

    pub fn check_against(&self, game: &MarkovGame) -> Result<()> {
        if self.n_states() != game.n_states() {
            return Err(Error::InvalidRule(format!(
                "rule covers {} states, game has {}",
                self.n_states(),
                game.n_states()
            )));
        }
        if self.n_actions != game.n_actions() {
            return Err(Error::InvalidRule(format!(
                "rule has {} actions, game has {}",
                self.n_actions,
                game.n_actions()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: DecisionRule = serde_json::from_str(text)?;
        Self::new(raw.n_actions, raw.rows)
    }
}
