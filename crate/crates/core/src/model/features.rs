use serde::{Deserialize, Serialize};

use super::MarkovGame;
use crate::error::{Error, Result};

/// State features `f(s)` with entries in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureMap {
    /// Indicator of the joint state; `dim == n_states`.
    OneHot { n_states: usize },
    /// Explicit per-state feature rows.
    Dense { rows: Vec<Vec<f64>> },
}

impl FeatureMap {
    pub fn one_hot(n_states: usize) -> Self {
        FeatureMap::OneHot { n_states }
    }

    pub fn dense(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::Empty("feature rows"));
        }
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            if row.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidModel("feature entries must lie in [0,1]".into()));
            }
        }
        Ok(FeatureMap::Dense { rows })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::OneHot { n_states } => *n_states,
            FeatureMap::Dense { rows } => rows[0].len(),
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            FeatureMap::OneHot { n_states } => *n_states,
            FeatureMap::Dense { rows } => rows.len(),
        }
    }

    pub fn vector(&self, state: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.accumulate(state, 1.0, &mut v);
        v
    }

    /// `out += scale * f(state)`
    #[inline]
    pub fn accumulate(&self, state: usize, scale: f64, out: &mut [f64]) {
        match self {
            FeatureMap::OneHot { .. } => out[state] += scale,
            FeatureMap::Dense { rows } => {
                for (o, f) in out.iter_mut().zip(&rows[state]) {
                    *o += scale * f;
                }
            }
        }
    }

    #[inline]
    pub fn dot(&self, state: usize, weights: &[f64]) -> f64 {
        match self {
            FeatureMap::OneHot { .. } => weights[state],
            FeatureMap::Dense { rows } => rows[state].iter().zip(weights).map(|(f, w)| f * w).sum(),
        }
    }
}

/// Expected discounted feature sum `E[sum_t gamma^t f(s_t)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureExpectation(pub Vec<f64>);

impl FeatureExpectation {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &FeatureExpectation) -> f64 {
        crate::linalg::distance(&self.0, &other.0)
    }
}

/// Linear reward weights over the feature index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.0)
    }

    /// `w . mu`, the linear return of a feature expectation.
    pub fn value_of(&self, mu: &FeatureExpectation) -> f64 {
        crate::linalg::dot(&self.0, &mu.0)
    }
}

/// Per-joint-state reward `R(s) = w . f(s)`.
pub fn reward_from_weights(game: &MarkovGame, features: &FeatureMap, weights: &WeightVector) -> Result<Vec<f64>> {
    if weights.dim() != features.dim() {
        return Err(Error::DimensionMismatch {
            expected: features.dim(),
            actual: weights.dim(),
        });
    }
    if features.n_states() != game.n_states() {
        return Err(Error::DimensionMismatch {
            expected: game.n_states(),
            actual: features.n_states(),
        });
    }
    Ok((0..game.n_states())
        .map(|s| features.dot(s, weights.as_slice()))
        .collect())
}
