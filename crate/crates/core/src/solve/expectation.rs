use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dtmc::{induce_dtmc, Dtmc};
use crate::error::{Error, Result};
use crate::model::{DecisionRule, FeatureExpectation, FeatureMap, MarkovGame};

/// Bound on the sup-norm error of the occupancy measure at termination.
pub const OCCUPANCY_TOL: f64 = 1e-12;
pub const OCCUPANCY_MAX_SWEEPS: usize = 1_000_000;
/// Rollouts per deterministic work unit; fixed so results do not depend on
/// the thread count.
const CHUNK: usize = 256;

/// Discounted state occupancy `rho = sum_t gamma^t Pr(s_t = s)` from the
/// chain's initial state.
pub fn discounted_occupancy(dtmc: &Dtmc, discount: f64) -> Result<Vec<f64>> {
    let n = dtmc.n_states();
    let start = dtmc.initial();
    let mut rho = vec![0.0; n];
    rho[start] = 1.0;
    let mut next = vec![0.0; n];
    for _ in 0..OCCUPANCY_MAX_SWEEPS {
        next.iter_mut().for_each(|x| *x = 0.0);
        next[start] = 1.0;
        for (s, &mass) in rho.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let (succ, prob) = dtmc.row(s);
            for (&t, &p) in succ.iter().zip(prob) {
                next[t as usize] += discount * p * mass;
            }
        }
        let residual = crate::linalg::sup_distance(&rho, &next);
        std::mem::swap(&mut rho, &mut next);
        // the remaining error is at most residual * gamma / (1 - gamma); below
        // a few ulps of the largest entry the sweeps only shuffle rounding
        let scale = rho.iter().fold(0.0_f64, |m, &x| m.max(x));
        if residual * discount <= OCCUPANCY_TOL * (1.0 - discount) || residual <= 8.0 * f64::EPSILON * scale {
            return Ok(rho);
        }
    }
    Err(Error::NotConverged {
        what: "discounted occupancy",
        iterations: OCCUPANCY_MAX_SWEEPS,
        residual: f64::NAN,
        last: rho,
    })
}

/// `mu = E[sum_t gamma^t f(s_t)]` under `rule`, from the occupancy measure.
pub fn feature_expectations_exact(
    game: &MarkovGame,
    rule: &DecisionRule,
    features: &FeatureMap,
) -> Result<FeatureExpectation> {
    if features.n_states() != game.n_states() {
        return Err(Error::DimensionMismatch {
            expected: game.n_states(),
            actual: features.n_states(),
        });
    }
    let dtmc = induce_dtmc(game, rule)?;
    let rho = discounted_occupancy(&dtmc, game.discount())?;
    let mut mu = vec![0.0; features.dim()];
    for (s, &mass) in rho.iter().enumerate() {
        if mass != 0.0 {
            features.accumulate(s, mass, &mut mu);
        }
    }
    Ok(FeatureExpectation(mu))
}

/// Horizon `T` with `gamma^T < tol`.
pub fn default_horizon(discount: f64, tol: f64) -> usize {
    if discount <= 0.0 {
        return 1;
    }
    ((tol.ln() / discount.ln()).ceil() as usize).max(1)
}

/// Draws an index from a sparse distribution.
#[inline]
pub(crate) fn sample<T: Copy>(items: &[(T, f64)], rng: &mut impl Rng) -> T {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(x, p) in items {
        acc += p;
        if u < acc {
            return x;
        }
    }
    items.last().expect("nonempty distribution").0
}

#[inline]
pub(crate) fn sample_successor(game: &MarkovGame, state: usize, action: usize, rng: &mut impl Rng) -> usize {
    let (succ, prob) = game.successors(state, action);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (&t, &p) in succ.iter().zip(prob) {
        acc += p;
        if u < acc {
            return t as usize;
        }
    }
    *succ.last().expect("stochastic row") as usize
}

/// Generator for rollout `index` of a run seeded with `seed`.
pub(crate) fn rollout_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Monte-Carlo feature expectation with per-feature standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: FeatureExpectation,
    pub std_err: Vec<f64>,
    pub rollouts: usize,
}

/// Running first and second moments of per-sample feature vectors.
pub(crate) struct Moments {
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
    buf: Vec<f64>,
    touched: Vec<usize>,
    dense: bool,
}

impl Moments {
    pub fn new(features: &FeatureMap) -> Self {
        let d = features.dim();
        Self {
            sum: vec![0.0; d],
            sum_sq: vec![0.0; d],
            buf: vec![0.0; d],
            touched: Vec::new(),
            dense: matches!(features, FeatureMap::Dense { .. }),
        }
    }

    #[inline]
    pub fn add(&mut self, features: &FeatureMap, state: usize, scale: f64) {
        if !self.dense && self.buf[state] == 0.0 {
            self.touched.push(state);
        }
        features.accumulate(state, scale, &mut self.buf);
    }

    /// Closes the current sample.
    pub fn commit(&mut self) {
        if self.dense {
            for i in 0..self.buf.len() {
                let x = std::mem::take(&mut self.buf[i]);
                self.sum[i] += x;
                self.sum_sq[i] += x * x;
            }
        } else {
            for &i in &self.touched {
                let x = std::mem::take(&mut self.buf[i]);
                self.sum[i] += x;
                self.sum_sq[i] += x * x;
            }
            self.touched.clear();
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        crate::linalg::axpy(1.0, &other.sum, &mut self.sum);
        crate::linalg::axpy(1.0, &other.sum_sq, &mut self.sum_sq);
    }

    pub fn finish(self, count: usize) -> McEstimate {
        let m = count as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / m).collect();
        let std_err = if count > 1 {
            self.sum_sq
                .iter()
                .zip(&mean)
                .map(|(sq, mu)| {
                    let var = ((sq - m * mu * mu) / (m - 1.0)).max(0.0);
                    (var / m).sqrt()
                })
                .collect()
        } else {
            vec![f64::INFINITY; mean.len()]
        };
        McEstimate {
            mean: FeatureExpectation(mean),
            std_err,
            rollouts: count,
        }
    }
}

/// Runs `count` indexed jobs in fixed-size chunks, in parallel, and merges
/// the chunk moments in index order.
pub(crate) fn chunked_moments<F>(features: &FeatureMap, count: usize, parallel: bool, job: F) -> McEstimate
where
    F: Fn(usize, &mut Moments) + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let run = |c: usize| {
        let mut m = Moments::new(features);
        for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
            job(i, &mut m);
            m.commit();
        }
        m
    };
    let parts: Vec<Moments> = if parallel {
        (0..chunks).into_par_iter().map(run).collect()
    } else {
        (0..chunks).map(run).collect()
    };
    let mut total = Moments::new(features);
    for p in &parts {
        total.merge(p);
    }
    total.finish(count)
}

/// Empirical mean of `sum_{t=0}^{T} gamma^t f(s_t)` over `rollouts` simulated
/// trajectories of `horizon` steps under `rule`.
pub fn feature_expectations_mc(
    game: &MarkovGame,
    rule: &DecisionRule,
    features: &FeatureMap,
    rollouts: usize,
    horizon: usize,
    seed: u64,
) -> Result<McEstimate> {
    mc_impl(game, rule, features, rollouts, horizon, seed, true)
}

/// Sequential reference of [`feature_expectations_mc`]; same result.
pub fn feature_expectations_mc_sequential(
    game: &MarkovGame,
    rule: &DecisionRule,
    features: &FeatureMap,
    rollouts: usize,
    horizon: usize,
    seed: u64,
) -> Result<McEstimate> {
    mc_impl(game, rule, features, rollouts, horizon, seed, false)
}

fn mc_impl(
    game: &MarkovGame,
    rule: &DecisionRule,
    features: &FeatureMap,
    rollouts: usize,
    horizon: usize,
    seed: u64,
    parallel: bool,
) -> Result<McEstimate> {
    rule.check_against(game)?;
    if rollouts == 0 {
        return Err(Error::Empty("rollouts"));
    }
    let gamma = game.discount();
    Ok(chunked_moments(features, rollouts, parallel, |i, m| {
        let mut rng = rollout_rng(seed, i);
        let mut s = game.initial_state();
        let mut scale = 1.0;
        m.add(features, s, scale);
        for _ in 0..horizon {
            let a = sample(rule.row(s), &mut rng);
            s = sample_successor(game, s, a, &mut rng);
            scale *= gamma;
            m.add(features, s, scale);
        }
    }))
}
