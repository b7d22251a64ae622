//! Markov games over packed joint states and joint actions.
//!
//! A joint state of `N` agents, each living in `Q` local states, is packed as a
//! mixed-radix integer with agent 0 as the most significant digit. Joint
//! actions use the same packing over the per-agent action count.

mod features;
mod grid;
mod rule;

pub use features::{reward_from_weights, FeatureExpectation, FeatureMap, WeightVector};
pub use grid::{build_grid_world, Cell, GridAction, GridWorldSpec};
pub use rule::DecisionRule;

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Tolerance on the row sums of stochastic tables.
pub const STOCHASTIC_TOL: f64 = 1e-12;

pub type Labels = BTreeMap<String, BTreeSet<usize>>;

/// Mixed-radix packing of per-agent digits into a flat index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JointIndexer {
    radix: usize,
    digits: usize,
    size: usize,
}

impl JointIndexer {
    pub fn new(radix: usize, digits: usize) -> Result<Self> {
        if radix == 0 || digits == 0 {
            return Err(Error::InvalidModel(format!(
                "joint index space needs positive radix and digit count (got {radix}, {digits})"
            )));
        }
        let size = u32::try_from(digits)
            .ok()
            .and_then(|d| radix.checked_pow(d))
            .ok_or_else(|| Error::InvalidModel(format!("{radix}^{digits} overflows")))?;
        Ok(Self { radix, digits, size })
    }

    pub fn radix(&self) -> usize {
        self.radix
    }

    pub fn digits(&self) -> usize {
        self.digits
    }

    /// Number of joint indices, `radix^digits`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn encode(&self, parts: &[usize]) -> usize {
        debug_assert_eq!(parts.len(), self.digits);
        parts.iter().fold(0, |acc, &p| {
            debug_assert!(p < self.radix);
            acc * self.radix + p
        })
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        debug_assert!(index < self.size);
        let mut parts = vec![0; self.digits];
        for slot in parts.iter_mut().rev() {
            *slot = index % self.radix;
            index /= self.radix;
        }
        parts
    }

    /// Digit of `agent` in `index` without decoding the whole tuple.
    pub fn component(&self, index: usize, agent: usize) -> usize {
        let shift = self.digits - 1 - agent;
        (index / self.radix.pow(shift as u32)) % self.radix
    }
}

/// An `N`-agent Markov game with sparse joint transitions.
///
/// Transition rows are stored in compressed form: row `s * n_actions + a`
/// lists the successors of joint state `s` under joint action `a`.
#[derive(Clone, Debug)]
pub struct MarkovGame {
    states: JointIndexer,
    actions: JointIndexer,
    row_start: Vec<usize>,
    succ: Vec<u32>,
    prob: Vec<f64>,
    discount: f64,
    initial_state: usize,
    labels: Labels,
}

impl MarkovGame {
    /// Builds a game from dense-per-row successor lists indexed by
    /// `s * n_actions + a`. Duplicate successors within a row are merged.
    pub fn new(
        states: JointIndexer,
        actions: JointIndexer,
        rows: Vec<Vec<(usize, f64)>>,
        discount: f64,
        initial_state: usize,
        labels: Labels,
    ) -> Result<Self> {
        let n = states.size();
        let na = actions.size();
        if states.digits() != actions.digits() {
            return Err(Error::InvalidModel(
                "state and action spaces disagree on the number of agents".into(),
            ));
        }
        if rows.len() != n * na {
            return Err(Error::InvalidModel(format!(
                "expected {} transition rows, got {}",
                n * na,
                rows.len()
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidModel(format!(
                "discount must lie in [0,1), got {discount}"
            )));
        }
        if initial_state >= n {
            return Err(Error::InvalidModel(format!(
                "initial state {initial_state} out of range"
            )));
        }
        for (name, set) in &labels {
            if let Some(&bad) = set.iter().find(|&&s| s >= n) {
                return Err(Error::InvalidModel(format!(
                    "label {name:?} references state {bad} out of range"
                )));
            }
        }

        let mut row_start = Vec::with_capacity(rows.len() + 1);
        let mut succ = Vec::new();
        let mut prob = Vec::new();
        row_start.push(0);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(t, _)| t);
            row.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
            let mut sum = 0.0;
            for &(t, p) in &row {
                if t >= n {
                    return Err(Error::InvalidModel(format!("row {r} has successor {t} out of range")));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidModel(format!(
                        "row {r} has probability {p} outside [0,1]"
                    )));
                }
                sum += p;
                if p > 0.0 {
                    succ.push(t as u32);
                    prob.push(p);
                }
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidModel(format!(
                    "row (s={}, a={}) sums to {sum}",
                    r / na,
                    r % na
                )));
            }
            row_start.push(succ.len());
        }

        Ok(Self {
            states,
            actions,
            row_start,
            succ,
            prob,
            discount,
            initial_state,
            labels,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.states.digits()
    }

    pub fn per_agent_states(&self) -> usize {
        self.states.radix()
    }

    pub fn per_agent_actions(&self) -> usize {
        self.actions.radix()
    }

    pub fn n_states(&self) -> usize {
        self.states.size()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.size()
    }

    pub fn state_index(&self) -> &JointIndexer {
        &self.states
    }

    pub fn action_index(&self) -> &JointIndexer {
        &self.actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Same game with a different discount factor.
    pub fn with_discount(mut self, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidModel(format!(
                "discount must lie in [0,1), got {discount}"
            )));
        }
        self.discount = discount;
        Ok(self)
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&BTreeSet<usize>> {
        self.labels.get(name)
    }

    /// Successors of `(state, action)` as parallel slices.
    #[inline]
    pub fn successors(&self, state: usize, action: usize) -> (&[u32], &[f64]) {
        let r = state * self.n_actions() + action;
        let (lo, hi) = (self.row_start[r], self.row_start[r + 1]);
        (&self.succ[lo..hi], &self.prob[lo..hi])
    }

    /// `P(next | state, action)`; zero when `next` is not a successor.
    pub fn transition_prob(&self, state: usize, action: usize, next: usize) -> f64 {
        let (succ, prob) = self.successors(state, action);
        succ.iter().position(|&t| t as usize == next).map_or(0.0, |i| prob[i])
    }

    pub fn n_transitions(&self) -> usize {
        self.succ.len()
    }
}
