use serde::{Deserialize, Serialize};

use super::{combined_weight_update, Candidate, LearnerParams, LearnerState, MaxMargin};
use crate::cex::{counterexample_features, counterexample_for, CexError, CexOptions};
use crate::checker::{verify, verify_dtmc, StateFormula, Verdict};
use crate::dtmc::induce_dtmc;
use crate::error::{Error, Result};
use crate::model::{DecisionRule, FeatureExpectation, FeatureMap, MarkovGame, WeightVector};
use crate::solve::value_iteration;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The initial safe rule was already close to the expert.
    InitialClose,
    /// A verified rule came within `epsilon` of the expert.
    EpsilonClose,
    /// `k` collapsed onto its lower bracket; the closest safe rule is returned.
    KConverged,
    /// Iteration budget exhausted; the closest safe rule is returned.
    MaxIter,
}

/// One verifier/learner round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CegalRecord {
    pub iteration: usize,
    pub status: String,
    /// Checked probability of the path formula for this iteration's rule.
    pub probability: f64,
    /// `||mu_E - mu||` of this iteration's rule.
    pub distance: f64,
    pub inf: f64,
    /// Adaptive weight used for the next weight update.
    pub k: f64,
    /// Margin of the next weight update; absent when the loop stops.
    pub delta: Option<f64>,
    pub cex_paths: Option<usize>,
    pub cex_probability: Option<f64>,
    pub cex_truncated: Option<bool>,
    pub safe_rules: usize,
    pub counterexamples: usize,
}

#[derive(Clone, Debug)]
pub struct CegalOutcome {
    pub rule: DecisionRule,
    pub mu: FeatureExpectation,
    pub weights: Option<WeightVector>,
    /// Checked probability of the returned rule.
    pub probability: f64,
    pub termination: Termination,
    pub iterations: usize,
    pub log: Vec<CegalRecord>,
    pub state: LearnerState,
}

/// Rule that heads for the goal while avoiding unsafe states: optimal for
/// `-1` on `unsafe`, `+1` on `goal` and `0` elsewhere. Fails unless it
/// verifies against `phi`.
pub fn initial_safe_rule(game: &MarkovGame, phi: &StateFormula) -> Result<DecisionRule> {
    let mut reward = vec![0.0; game.n_states()];
    for &s in game.label("goal").into_iter().flatten() {
        reward[s] = 1.0;
    }
    for &s in game.label("unsafe").into_iter().flatten() {
        reward[s] = -1.0;
    }
    let (rule, _) = value_iteration(game, &reward)?;
    match verify(game, &rule, phi)? {
        Verdict::Satisfy { .. } => Ok(rule),
        Verdict::Unsatisfy { probability } => Err(Error::UnsafeInitialRule { probability }),
    }
}

fn finish(
    state: LearnerState,
    chosen: usize,
    probability: f64,
    termination: Termination,
    log: Vec<CegalRecord>,
) -> CegalOutcome {
    let c = &state.candidates[chosen];
    CegalOutcome {
        rule: c.rule.clone(),
        mu: c.mu.clone(),
        weights: c.weights.clone(),
        probability,
        termination,
        iterations: state.iteration,
        log,
        state,
    }
}

/// Counterexample-guided apprenticeship learning.
///
/// `initial` must satisfy `phi`. Each round verifies the current rule; safe
/// rules join the candidate set and reset the adaptive weight `k` to 1,
/// unsafe rules contribute a counterexample and pull `k` towards the last
/// safe value. Weights then maximise the combined margin. The returned rule
/// always satisfies `phi`.
pub fn cegal_run(
    game: &MarkovGame,
    features: &FeatureMap,
    mu_e: &FeatureExpectation,
    phi: &StateFormula,
    params: &LearnerParams,
    cex_opts: &CexOptions,
    initial: DecisionRule,
) -> Result<CegalOutcome> {
    params.validate()?;
    let p0 = match verify(game, &initial, phi)? {
        Verdict::Satisfy { probability } => probability,
        Verdict::Unsatisfy { probability } => return Err(Error::UnsafeInitialRule { probability }),
    };
    let first = Candidate::evaluate(game, features, initial)?;
    let mut state = LearnerState::new(first);
    let mut log = Vec::new();
    // probabilities of the rules in the safe set, for reporting
    let mut safe_probs = vec![p0];
    if state.candidates[0].mu.distance(mu_e) <= params.epsilon {
        return Ok(finish(state, 0, p0, Termination::InitialClose, log));
    }

    let mm = combined_weight_update(mu_e, &state.candidate_mus(), &[], state.k);
    let mut current = Candidate::from_weights(game, features, &mm.weights)?;

    while state.iteration < params.max_iter {
        state.iteration += 1;
        let dtmc = induce_dtmc(game, &current.rule)?;
        let verdict = verify_dtmc(&dtmc, phi)?;
        let distance = current.mu.distance(mu_e);
        let mut rec = CegalRecord {
            iteration: state.iteration,
            status: String::new(),
            probability: verdict.probability(),
            distance,
            inf: state.inf,
            k: state.k,
            delta: None,
            cex_paths: None,
            cex_probability: None,
            cex_truncated: None,
            safe_rules: state.candidates.len(),
            counterexamples: state.cex.len(),
        };

        match verdict {
            Verdict::Satisfy { probability } => {
                rec.status = "satisfy".into();
                state.candidates.push(current.clone());
                safe_probs.push(probability);
                rec.safe_rules = state.candidates.len();
                if distance <= params.epsilon {
                    log.push(rec);
                    let last = state.candidates.len() - 1;
                    return Ok(finish(state, last, probability, Termination::EpsilonClose, log));
                }
                state.inf = state.k;
                state.k = state.sup;
            }
            Verdict::Unsatisfy { .. } => {
                rec.status = "unsatisfy".into();
                let (cex, truncated) = match counterexample_for(&dtmc, phi, cex_opts) {
                    Ok(c) => (Some(c), false),
                    Err(CexError::Truncated(c)) => (Some(c), true),
                    // the checker and the enumeration disagree only at the
                    // rounding level; nothing to learn from
                    Err(CexError::NoCounterexample { .. }) => (None, false),
                    Err(CexError::Model(e)) => return Err(e),
                };
                if let Some(cex) = cex.filter(|c| !c.is_empty()) {
                    rec.cex_paths = Some(cex.len());
                    rec.cex_probability = Some(cex.total);
                    rec.cex_truncated = Some(truncated);
                    state
                        .cex
                        .push(counterexample_features(&cex, features, game.discount())?);
                    rec.counterexamples = state.cex.len();
                }
                if (state.k - state.inf).abs() <= params.sigma {
                    log.push(rec);
                    let best = state.closest(mu_e);
                    let p = safe_probs[best];
                    return Ok(finish(state, best, p, Termination::KConverged, log));
                }
                state.k = params.alpha * state.inf + (1.0 - params.alpha) * state.k;
            }
        }
        rec.inf = state.inf;
        rec.k = state.k;

        let mm: MaxMargin = combined_weight_update(mu_e, &state.candidate_mus(), &state.cex, state.k);
        rec.delta = Some(mm.delta);
        log.push(rec);
        current = Candidate::from_weights(game, features, &mm.weights)?;
    }
    let best = state.closest(mu_e);
    let p = safe_probs[best];
    Ok(finish(state, best, p, Termination::MaxIter, log))
}
