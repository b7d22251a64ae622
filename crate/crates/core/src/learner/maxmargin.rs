//! Max-margin weight search.
//!
//! `max_{||w|| <= 1} min_{d in D} w.d` over a finite difference set `D`
//! equals the Euclidean distance from the origin to `conv(D)`, attained at
//! `w = x*/||x*||` for the min-norm point `x*` of the hull. The min-norm
//! point is computed with Wolfe's algorithm driven by a linear minimisation
//! oracle, so the combined set of the counterexample-guided update (a
//! Minkowski sum whose vertex count is the product of the input sizes) never
//! has to be enumerated.
//!
//! Every result carries a duality certificate: for the returned point `x`
//! and `v = argmin_{d in D} x.d`, every point of the hull lies on the far
//! side of the hyperplane `{y : x.y = x.v}`, so `x.v/||x|| <= dist <= ||x||`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, dot, norm};
use crate::model::{FeatureExpectation, WeightVector};

const MAJOR_CAP: usize = 10_000;
const MINOR_CAP: usize = 10_000;
/// Relative stopping tolerance on the Wolfe gap `x.x - x.v`.
const GAP_TOL: f64 = 1e-13;
/// Barycentric weights below this are treated as zero.
const WEIGHT_FLOOR: f64 = 1e-14;

/// Linear minimisation oracle over a polytope.
pub trait LinearOracle {
    fn dim(&self) -> usize;
    /// A vertex minimising `g . x`; ties resolve deterministically.
    fn minimize(&self, g: &[f64]) -> Vec<f64>;
    /// Any vertex, used as the starting point.
    fn start(&self) -> Vec<f64>;
}

/// Index of the smallest (or with `largest`, the largest) `g . p`; lowest
/// index on ties.
fn extreme(points: &[Vec<f64>], g: &[f64], largest: bool) -> usize {
    let mut best = 0;
    let mut best_val = dot(&points[0], g);
    for (i, p) in points.iter().enumerate().skip(1) {
        let v = dot(p, g);
        if (largest && v > best_val) || (!largest && v < best_val) {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Explicit finite vertex set.
#[derive(Clone, Debug)]
pub struct PointSet {
    pub points: Vec<Vec<f64>>,
}

impl LinearOracle for PointSet {
    fn dim(&self) -> usize {
        self.points[0].len()
    }

    fn minimize(&self, g: &[f64]) -> Vec<f64> {
        self.points[extreme(&self.points, g, false)].clone()
    }

    fn start(&self) -> Vec<f64> {
        // the shortest vertex is a good first guess
        self.points
            .iter()
            .min_by(|a, b| norm(a).total_cmp(&norm(b)))
            .expect("nonempty point set")
            .clone()
    }
}

/// `{ k (mu_E - a) + (1 - k)(b - c) : a, b in safe, c in cex }`.
#[derive(Clone, Debug)]
pub struct CombinedSet<'a> {
    pub expert: &'a [f64],
    pub safe: Vec<Vec<f64>>,
    pub cex: Vec<Vec<f64>>,
    pub k: f64,
}

impl CombinedSet<'_> {
    fn vertex(&self, a: usize, b: usize, c: usize) -> Vec<f64> {
        let k = self.k;
        (0..self.expert.len())
            .map(|i| k * (self.expert[i] - self.safe[a][i]) + (1.0 - k) * (self.safe[b][i] - self.cex[c][i]))
            .collect()
    }
}

impl LinearOracle for CombinedSet<'_> {
    fn dim(&self) -> usize {
        self.expert.len()
    }

    fn minimize(&self, g: &[f64]) -> Vec<f64> {
        let a = extreme(&self.safe, g, true);
        let b = extreme(&self.safe, g, false);
        let c = extreme(&self.cex, g, true);
        self.vertex(a, b, c)
    }

    fn start(&self) -> Vec<f64> {
        self.vertex(0, 0, 0)
    }
}

/// Min-norm point of `conv` of an oracle's polytope with distance bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct MinNorm {
    pub point: Vec<f64>,
    /// Certified lower bound on the distance from the origin.
    pub lower: f64,
    /// `||point||`, an upper bound on the distance.
    pub upper: f64,
    pub iterations: usize,
}

/// Minimiser of `||sum mu_i a_i||` subject to `sum mu_i = 1` (no sign
/// constraint), from the bordered normal equations.
fn affine_minimizer(atoms: &[Vec<f64>]) -> Option<Vec<f64>> {
    let m = atoms.len();
    let mut sys = DMatrix::<f64>::zeros(m + 1, m + 1);
    for i in 0..m {
        for j in i..m {
            let g = dot(&atoms[i], &atoms[j]);
            sys[(i, j)] = g;
            sys[(j, i)] = g;
        }
        sys[(i, m)] = 1.0;
        sys[(m, i)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(m + 1);
    rhs[m] = 1.0;
    let sol = sys.full_piv_lu().solve(&rhs)?;
    let mu: Vec<f64> = sol.iter().take(m).copied().collect();
    mu.iter().all(|x| x.is_finite()).then_some(mu)
}

fn combine(atoms: &[Vec<f64>], weights: &[f64], dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for (a, &w) in atoms.iter().zip(weights) {
        axpy(w, a, &mut x);
    }
    x
}

/// Wolfe's min-norm-point algorithm.
pub fn min_norm_point(oracle: &impl LinearOracle) -> MinNorm {
    let dim = oracle.dim();
    let first = oracle.start();
    let mut scale = dot(&first, &first).max(1e-300);
    let mut x = first.clone();
    let mut atoms = vec![first];
    let mut lambda = vec![1.0];
    let mut iterations = 0;

    while iterations < MAJOR_CAP {
        iterations += 1;
        let v = oracle.minimize(&x);
        scale = scale.max(dot(&v, &v));
        let xx = dot(&x, &x);
        if xx <= 1e-24 * scale || xx - dot(&x, &v) <= GAP_TOL * scale {
            break;
        }
        if atoms.contains(&v) {
            // numerical stall: the oracle returned an active vertex
            break;
        }
        atoms.push(v);
        lambda.push(0.0);

        let mut minor = 0;
        loop {
            minor += 1;
            let Some(mu) = affine_minimizer(&atoms) else {
                // affinely dependent atoms; keep the current iterate
                atoms.pop();
                lambda.pop();
                return certify(oracle, x, iterations);
            };
            if mu.iter().all(|&m| m > WEIGHT_FLOOR) || minor >= MINOR_CAP {
                lambda = mu;
                break;
            }
            let theta = lambda
                .iter()
                .zip(&mu)
                .filter(|(_, &m)| m <= WEIGHT_FLOOR)
                .map(|(&l, &m)| l / (l - m))
                .fold(1.0_f64, f64::min);
            for (l, m) in lambda.iter_mut().zip(&mu) {
                *l = (1.0 - theta) * *l + theta * m;
            }
            let mut i = 0;
            let mut dropped = false;
            while i < atoms.len() {
                if lambda[i] <= WEIGHT_FLOOR {
                    atoms.swap_remove(i);
                    lambda.swap_remove(i);
                    dropped = true;
                } else {
                    i += 1;
                }
            }
            if !dropped {
                // theta landed on a weight just above the floor; drop the smallest
                let j = (0..lambda.len())
                    .min_by(|&a, &b| lambda[a].total_cmp(&lambda[b]))
                    .expect("active set");
                atoms.swap_remove(j);
                lambda.swap_remove(j);
            }
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
        }
        x = combine(&atoms, &lambda, dim);
    }
    certify(oracle, x, iterations)
}

fn certify(oracle: &impl LinearOracle, x: Vec<f64>, iterations: usize) -> MinNorm {
    let upper = norm(&x);
    let lower = if upper > 0.0 {
        (dot(&x, &oracle.minimize(&x)) / upper).max(0.0)
    } else {
        0.0
    };
    MinNorm {
        point: x,
        lower: lower.min(upper),
        upper,
        iterations,
    }
}

/// Pairwise Frank–Wolfe estimate of the distance from `target` to
/// `conv(points)`, returned as certified `(lower, upper)` bounds. Kept
/// independent of Wolfe's method so the two can check each other.
pub fn hull_distance_fw(points: &[Vec<f64>], target: &[f64], tol: f64, max_iter: usize) -> (f64, f64) {
    let diffs: Vec<Vec<f64>> = points
        .iter()
        .map(|p| target.iter().zip(p).map(|(t, q)| t - q).collect())
        .collect();
    let n = diffs.len();
    let mut lambda = vec![0.0; n];
    let start = (0..n)
        .min_by(|&a, &b| norm(&diffs[a]).total_cmp(&norm(&diffs[b])))
        .unwrap_or(0);
    lambda[start] = 1.0;
    let mut x = diffs[start].clone();
    let mut bounds = (0.0, norm(&x));
    for _ in 0..max_iter {
        let scores: Vec<f64> = diffs.iter().map(|d| dot(d, &x)).collect();
        let s = (0..n).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        let upper = norm(&x);
        let lower = if upper > 0.0 { (scores[s] / upper).max(0.0) } else { 0.0 };
        bounds = (lower.min(upper), upper);
        if upper - lower <= tol {
            break;
        }
        let v = (0..n)
            .filter(|&i| lambda[i] > 0.0)
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .unwrap();
        if v == s {
            break;
        }
        let dir: Vec<f64> = diffs[s].iter().zip(&diffs[v]).map(|(a, b)| a - b).collect();
        let dd = dot(&dir, &dir);
        if dd == 0.0 {
            break;
        }
        let step = (-dot(&x, &dir) / dd).clamp(0.0, lambda[v]);
        if step == 0.0 {
            break;
        }
        lambda[s] += step;
        lambda[v] -= step;
        axpy(step, &dir, &mut x);
    }
    bounds
}

/// Weights and margin of a max-margin problem with its certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxMargin {
    pub weights: WeightVector,
    /// Optimal minimum margin, i.e. the hull distance.
    pub delta: f64,
    /// Certified lower bound on the hull distance.
    pub lower_bound: f64,
    pub iterations: usize,
}

impl MaxMargin {
    fn from_min_norm(mn: MinNorm) -> Self {
        let scale = mn.point.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
        let zero = mn.upper <= 1e-12 * scale;
        let weights = if zero {
            WeightVector::zeros(mn.point.len())
        } else {
            WeightVector(mn.point.iter().map(|x| x / mn.upper).collect())
        };
        MaxMargin {
            weights,
            delta: if zero { 0.0 } else { mn.upper },
            lower_bound: mn.lower,
            iterations: mn.iterations,
        }
    }

    /// Width of the certificate interval.
    pub fn gap(&self) -> f64 {
        self.delta - self.lower_bound
    }

    /// `min_i w . (mu_E - mu_i)` for the returned weights.
    pub fn margin(&self, mu_e: &FeatureExpectation, mus: &[FeatureExpectation]) -> f64 {
        mus.iter()
            .map(|m| {
                let d: Vec<f64> = mu_e.0.iter().zip(&m.0).map(|(a, b)| a - b).collect();
                dot(&self.weights.0, &d)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `max_{||w|| <= 1} min_i w . (mu_E - mu_i)`.
///
/// When `mu_E` lies in the hull of `mus` the optimum is zero and is attained
/// only by `w = 0`, which is what is returned.
///
/// # Panics
/// If `mus` is empty or dimensions disagree.
pub fn max_margin_weights(mu_e: &FeatureExpectation, mus: &[FeatureExpectation]) -> MaxMargin {
    assert!(!mus.is_empty(), "max-margin needs at least one candidate");
    let points = mus
        .iter()
        .map(|m| {
            assert_eq!(m.dim(), mu_e.dim(), "feature dimension mismatch");
            mu_e.0.iter().zip(&m.0).map(|(a, b)| a - b).collect()
        })
        .collect();
    MaxMargin::from_min_norm(min_norm_point(&PointSet { points }))
}

/// Weight update of the counterexample-guided loop:
/// `max_{||w|| <= 1} min_{a, b in safe, c in cex} w . [k (mu_E - mu_a) + (1 - k)(mu_b - mu_c)]`.
/// With `k = 1` or no counterexamples this is [`max_margin_weights`].
pub fn combined_weight_update(
    mu_e: &FeatureExpectation,
    safe: &[FeatureExpectation],
    cex: &[FeatureExpectation],
    k: f64,
) -> MaxMargin {
    assert!(!safe.is_empty(), "the safe set is never empty");
    assert!((0.0..=1.0).contains(&k), "k must lie in [0, 1]");
    if cex.is_empty() || k == 1.0 {
        return max_margin_weights(mu_e, safe);
    }
    let set = CombinedSet {
        expert: &mu_e.0,
        safe: safe.iter().map(|m| m.0.clone()).collect(),
        cex: cex.iter().map(|m| m.0.clone()).collect(),
        k,
    };
    MaxMargin::from_min_norm(min_norm_point(&set))
}
