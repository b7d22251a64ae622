use serde::{Deserialize, Serialize};

use super::{max_margin_weights, Candidate, LearnerParams, LearnerState, MaxMargin};
use crate::error::Result;
use crate::model::{DecisionRule, FeatureExpectation, FeatureMap, MarkovGame, WeightVector};

/// One iteration of the plain loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlRecord {
    pub iteration: usize,
    pub delta: f64,
    /// `||mu_E - mu||` of the rule added this iteration (absent once converged).
    pub distance: Option<f64>,
    pub best_distance: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct AlOutcome {
    /// Candidate closest to the expert in feature expectation.
    pub rule: DecisionRule,
    pub mu: FeatureExpectation,
    pub weights: Option<WeightVector>,
    pub converged: bool,
    pub iterations: usize,
    pub log: Vec<AlRecord>,
    pub state: LearnerState,
}

/// Computes max-margin weights against all candidates; unless the margin is
/// already below `epsilon`, adds the optimal rule for those weights.
/// Returns the weight solution and whether the loop has converged.
pub fn al_step(
    game: &MarkovGame,
    features: &FeatureMap,
    mu_e: &FeatureExpectation,
    state: &mut LearnerState,
    epsilon: f64,
) -> Result<(MaxMargin, bool)> {
    let mm = max_margin_weights(mu_e, &state.candidate_mus());
    state.iteration += 1;
    if mm.delta < epsilon {
        return Ok((mm, true));
    }
    let next = Candidate::from_weights(game, features, &mm.weights)?;
    state.candidates.push(next);
    Ok((mm, false))
}

/// Max-margin apprenticeship learning from `initial` for at most
/// `params.max_iter` iterations.
pub fn run_al(
    game: &MarkovGame,
    features: &FeatureMap,
    mu_e: &FeatureExpectation,
    initial: DecisionRule,
    params: &LearnerParams,
) -> Result<AlOutcome> {
    params.validate()?;
    let mut state = LearnerState::new(Candidate::evaluate(game, features, initial)?);
    let mut log = Vec::new();
    let mut converged = false;
    while state.iteration < params.max_iter {
        let (mm, done) = al_step(game, features, mu_e, &mut state, params.epsilon)?;
        let best = state.closest(mu_e);
        log.push(AlRecord {
            iteration: state.iteration,
            delta: mm.delta,
            distance: (!done).then(|| state.candidates.last().unwrap().mu.distance(mu_e)),
            best_distance: state.candidates[best].mu.distance(mu_e),
            converged: done,
        });
        if done {
            converged = true;
            break;
        }
    }
    let best = state.closest(mu_e);
    Ok(AlOutcome {
        rule: state.candidates[best].rule.clone(),
        mu: state.candidates[best].mu.clone(),
        weights: state.candidates[best].weights.clone(),
        converged,
        iterations: state.iteration,
        log,
        state,
    })
}
