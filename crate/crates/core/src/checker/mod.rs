//! PCTL model checking on explicit DTMCs.

mod formula;

pub use formula::{Comparator, PathFormula, StateFormula};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dtmc::{induce_dtmc, Dtmc};
use crate::error::{Error, Result};
use crate::model::{DecisionRule, MarkovGame};

/// Sweep cap for unbounded until.
pub const UNTIL_MAX_SWEEPS: usize = 1_000_000;
/// Convergence threshold (sup-norm between sweeps) for unbounded until.
pub const UNTIL_TOL: f64 = 1e-12;

/// Outcome of checking an upper-bounded safety property.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Verdict {
    Satisfy { probability: f64 },
    Unsatisfy { probability: f64 },
}

impl Verdict {
    pub fn probability(&self) -> f64 {
        match *self {
            Verdict::Satisfy { probability } | Verdict::Unsatisfy { probability } => probability,
        }
    }

    pub fn is_satisfied(&self) -> bool {
        matches!(self, Verdict::Satisfy { .. })
    }
}

/// Satisfaction mask of a state formula.
pub fn sat(dtmc: &Dtmc, phi: &StateFormula) -> Result<Vec<bool>> {
    let n = dtmc.n_states();
    Ok(match phi {
        StateFormula::True => vec![true; n],
        StateFormula::Label(name) => {
            let set = dtmc.label(name).ok_or_else(|| Error::UnknownLabel(name.clone()))?;
            let mut mask = vec![false; n];
            for &s in set {
                mask[s] = true;
            }
            mask
        }
        StateFormula::Not(inner) => sat(dtmc, inner)?.into_iter().map(|b| !b).collect(),
        StateFormula::And(a, b) => {
            let a = sat(dtmc, a)?;
            let b = sat(dtmc, b)?;
            a.into_iter().zip(b).map(|(x, y)| x && y).collect()
        }
        StateFormula::Prob { cmp, bound, path } => path_probabilities(dtmc, path)?
            .into_iter()
            .map(|p| cmp.holds(p, *bound))
            .collect(),
    })
}

/// The set of states satisfying `phi`.
pub fn eval_state_set(dtmc: &Dtmc, phi: &StateFormula) -> Result<BTreeSet<usize>> {
    Ok(sat(dtmc, phi)?
        .into_iter()
        .enumerate()
        .filter_map(|(s, b)| b.then_some(s))
        .collect())
}

/// Probability of the path formula from every state.
pub fn path_probabilities(dtmc: &Dtmc, psi: &PathFormula) -> Result<Vec<f64>> {
    match psi {
        PathFormula::Next(phi) => {
            let target = sat(dtmc, phi)?;
            Ok((0..dtmc.n_states())
                .map(|s| {
                    let (succ, prob) = dtmc.row(s);
                    succ.iter()
                        .zip(prob)
                        .filter(|(&t, _)| target[t as usize])
                        .map(|(_, p)| p)
                        .sum()
                })
                .collect())
        }
        PathFormula::BoundedUntil { left, right, hops } => {
            let left = sat(dtmc, left)?;
            let right = sat(dtmc, right)?;
            Ok(bounded_until(dtmc, &left, &right, *hops))
        }
        PathFormula::Until { left, right } => {
            let left = sat(dtmc, left)?;
            let right = sat(dtmc, right)?;
            until(dtmc, &left, &right, UNTIL_MAX_SWEEPS)
        }
    }
}

pub fn path_probability(dtmc: &Dtmc, psi: &PathFormula, state: usize) -> Result<f64> {
    if state >= dtmc.n_states() {
        return Err(Error::InvalidModel(format!("state {state} out of range")));
    }
    Ok(path_probabilities(dtmc, psi)?[state])
}

/// Step of the until recurrence: 1 on `right`, 0 outside `left | right`,
/// expected next value otherwise.
fn until_sweep(dtmc: &Dtmc, left: &[bool], right: &[bool], x: &[f64], next: &mut [f64]) {
    for (s, out) in next.iter_mut().enumerate() {
        *out = if right[s] {
            1.0
        } else if !left[s] {
            0.0
        } else {
            let (succ, prob) = dtmc.row(s);
            succ.iter().zip(prob).map(|(&t, p)| p * x[t as usize]).sum()
        };
    }
}

/// `x_h` of the bounded-until recurrence, for all states.
pub fn bounded_until(dtmc: &Dtmc, left: &[bool], right: &[bool], hops: usize) -> Vec<f64> {
    let mut x: Vec<f64> = right.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let mut next = vec![0.0; x.len()];
    for _ in 0..hops {
        until_sweep(dtmc, left, right, &x, &mut next);
        if next == x {
            // fixed point reached exactly; later sweeps change nothing
            break;
        }
        std::mem::swap(&mut x, &mut next);
    }
    x
}

/// Least fixed point of the until recurrence by iteration.
pub fn until(dtmc: &Dtmc, left: &[bool], right: &[bool], max_sweeps: usize) -> Result<Vec<f64>> {
    let mut x: Vec<f64> = right.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let mut next = vec![0.0; x.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        until_sweep(dtmc, left, right, &x, &mut next);
        residual = crate::linalg::sup_distance(&x, &next);
        std::mem::swap(&mut x, &mut next);
        if residual < UNTIL_TOL {
            return Ok(x);
        }
    }
    Err(Error::NotConverged {
        what: "until",
        iterations: max_sweeps,
        residual,
        last: x,
    })
}

/// Checks an upper-bounded `P<=p [psi]` / `P<p [psi]` at the initial state.
pub fn verify_dtmc(dtmc: &Dtmc, phi: &StateFormula) -> Result<Verdict> {
    let StateFormula::Prob { cmp, bound, path } = phi else {
        return Err(Error::UnsupportedSpec(
            "top-level formula must be a probability operator".into(),
        ));
    };
    if !cmp.is_upper_bound() {
        return Err(Error::UnsupportedSpec(
            "only upper-bounded probability operators are supported".into(),
        ));
    }
    let probability = path_probability(dtmc, path, dtmc.initial())?;
    Ok(if cmp.holds(probability, *bound) {
        Verdict::Satisfy { probability }
    } else {
        Verdict::Unsatisfy { probability }
    })
}

/// `Pr(true U<=hops "label")` from the initial state; an unknown label is
/// an error.
pub fn reach_probability(dtmc: &Dtmc, label: &str, hops: usize) -> Result<f64> {
    let target = dtmc
        .label(label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
    let right: Vec<bool> = (0..dtmc.n_states()).map(|s| target.contains(&s)).collect();
    let left = vec![true; dtmc.n_states()];
    Ok(bounded_until(dtmc, &left, &right, hops)[dtmc.initial()])
}

/// Induces the DTMC of `rule` and checks `phi` at the initial state.
pub fn verify(game: &MarkovGame, rule: &DecisionRule, phi: &StateFormula) -> Result<Verdict> {
    let dtmc = induce_dtmc(game, rule)?;
    verify_dtmc(&dtmc, phi)
}
