//! Apprenticeship learning: max-margin weights, the plain loop, and the
//! counterexample-guided safety-aware loop.

mod al;
mod cegal;
mod maxmargin;

pub use al::{al_step, run_al, AlOutcome, AlRecord};
pub use cegal::{cegal_run, initial_safe_rule, CegalOutcome, CegalRecord, Termination};
pub use maxmargin::{
    combined_weight_update, hull_distance_fw, max_margin_weights, min_norm_point, CombinedSet, LinearOracle, MaxMargin,
    MinNorm, PointSet,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{reward_from_weights, DecisionRule, FeatureExpectation, FeatureMap, MarkovGame, WeightVector};
use crate::solve::{feature_expectations_exact, value_iteration};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerParams {
    /// Feature-expectation distance at which a rule counts as expert-like.
    pub epsilon: f64,
    /// Termination tolerance on `|k - inf|`.
    pub sigma: f64,
    /// Step length of the adaptive weight update.
    pub alpha: f64,
    pub max_iter: usize,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self {
            epsilon: 10.0,
            sigma: 1e-5,
            alpha: 0.5,
            max_iter: 200,
        }
    }
}

impl LearnerParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0 && self.sigma > 0.0 && self.alpha > 0.0 && self.alpha < 1.0 && self.max_iter > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("invalid learner parameters {self:?}")))
        }
    }
}

/// A rule together with its exact feature expectation.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub rule: DecisionRule,
    pub mu: FeatureExpectation,
    /// Reward weights the rule is optimal for, if it was learned.
    pub weights: Option<WeightVector>,
}

impl Candidate {
    pub fn evaluate(game: &MarkovGame, features: &FeatureMap, rule: DecisionRule) -> Result<Self> {
        let mu = feature_expectations_exact(game, &rule, features)?;
        Ok(Self {
            rule,
            mu,
            weights: None,
        })
    }

    /// Optimal rule for the reward `w . f(s)`.
    pub fn from_weights(game: &MarkovGame, features: &FeatureMap, weights: &WeightVector) -> Result<Self> {
        let reward = reward_from_weights(game, features, weights)?;
        let (rule, _) = value_iteration(game, &reward)?;
        Ok(Self {
            weights: Some(weights.clone()),
            ..Self::evaluate(game, features, rule)?
        })
    }
}

/// Search state shared by both loops.
#[derive(Clone, Debug)]
pub struct LearnerState {
    /// Plain AL: every candidate; guided loop: the verified-safe rules.
    pub candidates: Vec<Candidate>,
    /// Feature expectations of the counterexamples found so far.
    pub cex: Vec<FeatureExpectation>,
    pub inf: f64,
    pub sup: f64,
    pub k: f64,
    pub iteration: usize,
}

impl LearnerState {
    pub fn new(initial: Candidate) -> Self {
        Self {
            candidates: vec![initial],
            cex: Vec::new(),
            inf: 0.0,
            sup: 1.0,
            k: 1.0,
            iteration: 0,
        }
    }

    pub fn candidate_mus(&self) -> Vec<FeatureExpectation> {
        self.candidates.iter().map(|c| c.mu.clone()).collect()
    }

    /// Index of the candidate closest to `mu_e` (first on ties).
    pub fn closest(&self, mu_e: &FeatureExpectation) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.candidates.iter().enumerate() {
            let d = c.mu.distance(mu_e);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}
