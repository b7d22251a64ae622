//! Evidences and counterexamples for refuted bounded-until properties.
//!
//! Path probabilities become additive edge weights `w(u, v) = ln(1 / P(u, v))`,
//! so the most probable paths are the shortest ones. Paths are restricted to
//! minimally satisfying ones: every state before the last satisfies the left
//! operand and not the right one, the last satisfies the right one. Search runs
//! on the chain in which right-operand states and states violating both
//! operands are absorbing.
//!
//! Enumeration is a best-first search over path prefixes guided by the exact
//! hop-bounded distance-to-target table, which yields complete paths in
//! nondecreasing weight. Paths whose weights tie (up to rounding) are emitted
//! in lexicographic order of their state sequences.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{sat, PathFormula, StateFormula};
use crate::dtmc::Dtmc;
use crate::error::Error;
use crate::model::{FeatureExpectation, FeatureMap};

pub const DEFAULT_K_MAX: usize = 5000;

/// Weights whose difference is below this are treated as ties.
fn tie_tol(weight: f64) -> f64 {
    1e-12 * (1.0 + weight.abs())
}

/// The log-weighted digraph of a DTMC.
#[derive(Clone, Debug)]
pub struct WeightedDigraph {
    row_start: Vec<usize>,
    succ: Vec<u32>,
    weight: Vec<f64>,
}

impl WeightedDigraph {
    pub fn from_dtmc(dtmc: &Dtmc) -> Self {
        Self::with_absorbing(dtmc, |_| false)
    }

    /// Graph of `dtmc` in which every state with `absorbing(s)` only has a
    /// weight-zero self-loop.
    pub fn with_absorbing(dtmc: &Dtmc, absorbing: impl Fn(usize) -> bool) -> Self {
        let n = dtmc.n_states();
        let mut row_start = Vec::with_capacity(n + 1);
        row_start.push(0);
        let mut succ = Vec::with_capacity(dtmc.n_transitions());
        let mut weight = Vec::with_capacity(dtmc.n_transitions());
        for s in 0..n {
            if absorbing(s) {
                succ.push(s as u32);
                weight.push(0.0);
            } else {
                let (ts, ps) = dtmc.row(s);
                succ.extend_from_slice(ts);
                weight.extend(ps.iter().map(|p| -p.ln()));
            }
            row_start.push(succ.len());
        }
        Self {
            row_start,
            succ,
            weight,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.row_start.len() - 1
    }

    #[inline]
    pub fn edges(&self, v: usize) -> (&[u32], &[f64]) {
        let (lo, hi) = (self.row_start[v], self.row_start[v + 1]);
        (&self.succ[lo..hi], &self.weight[lo..hi])
    }

    pub fn edge_weight(&self, from: usize, to: usize) -> Option<f64> {
        let (succ, w) = self.edges(from);
        succ.binary_search(&(to as u32)).ok().map(|i| w[i])
    }

    /// Sum of edge weights along `path`, `None` if an edge is missing.
    pub fn path_weight(&self, path: &[usize]) -> Option<f64> {
        path.windows(2).map(|e| self.edge_weight(e[0], e[1])).sum()
    }
}

/// A finite path that minimally satisfies the path formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub path: Vec<usize>,
    #[serde(rename = "prob")]
    pub probability: f64,
}

/// Evidences in nonincreasing probability whose total exceeds the bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub evidences: Vec<Evidence>,
    pub total: f64,
    pub bound: f64,
    pub hops: usize,
}

impl Counterexample {
    pub fn len(&self) -> usize {
        self.evidences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evidences.is_empty()
    }

    pub fn to_json(&self) -> Result<String, Error> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Error)]
pub enum CexError {
    #[error("no counterexample: evidences within the search depth total {total} (bound {bound})")]
    NoCounterexample { total: f64, bound: f64 },

    #[error("enumeration stopped after {} evidences with total {} <= bound {}", .0.len(), .0.total, .0.bound)]
    Truncated(Counterexample),

    #[error(transparent)]
    Model(#[from] Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CexOptions {
    /// Maximum number of evidences to enumerate.
    pub k_max: usize,
    /// Cap on the path length; `None` means `4 * |S|`.
    pub depth_cap: Option<usize>,
}

impl Default for CexOptions {
    fn default() -> Self {
        Self {
            k_max: DEFAULT_K_MAX,
            depth_cap: None,
        }
    }
}

impl CexOptions {
    pub fn depth(&self, hops: usize, n_states: usize) -> usize {
        hops.min(self.depth_cap.unwrap_or(4 * n_states))
    }
}

/// Search structure shared by strongest-evidence and enumeration queries.
struct SearchSpace<'a> {
    dtmc: &'a Dtmc,
    graph: WeightedDigraph,
    target: Vec<bool>,
    depth: usize,
    /// `layers[r][v]`: least weight from `v` to a target within `r` hops,
    /// stored until the table stops changing.
    layers: Vec<Vec<f64>>,
}

impl<'a> SearchSpace<'a> {
    fn new(dtmc: &'a Dtmc, left: &[bool], right: &[bool], depth: usize) -> Result<Self, Error> {
        let n = dtmc.n_states();
        if left.len() != n || right.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: left.len().min(right.len()),
            });
        }
        let graph = WeightedDigraph::with_absorbing(dtmc, |s| right[s] || !left[s]);

        let mut layers = vec![right
            .iter()
            .map(|&t| if t { 0.0 } else { f64::INFINITY })
            .collect::<Vec<f64>>()];
        while layers.len() <= depth {
            let prev = layers.last().expect("nonempty");
            let next: Vec<f64> = (0..n)
                .map(|v| {
                    if right[v] {
                        0.0
                    } else if !left[v] {
                        f64::INFINITY
                    } else {
                        let (succ, w) = graph.edges(v);
                        succ.iter()
                            .zip(w)
                            .map(|(&u, &w)| w + prev[u as usize])
                            .fold(f64::INFINITY, f64::min)
                    }
                })
                .collect();
            if &next == prev {
                break;
            }
            layers.push(next);
        }
        Ok(Self {
            dtmc,
            graph,
            target: right.to_vec(),
            depth,
            layers,
        })
    }

    #[inline]
    fn dist(&self, v: usize, remaining: usize) -> f64 {
        self.layers[remaining.min(self.layers.len() - 1)][v]
    }

    fn probability(&self, path: &[usize]) -> f64 {
        path.windows(2).map(|e| self.dtmc.prob(e[0], e[1])).product()
    }

    fn strongest(&self) -> Option<Evidence> {
        let start = self.dtmc.initial();
        let mut remaining = self.depth;
        if !self.dist(start, remaining).is_finite() {
            return None;
        }
        let mut path = vec![start];
        let mut v = start;
        while !self.target[v] {
            let best = self.dist(v, remaining);
            let (succ, w) = self.graph.edges(v);
            let next = succ
                .iter()
                .zip(w)
                .find(|(&u, &w)| w + self.dist(u as usize, remaining - 1) <= best + tie_tol(best))
                .map(|(&u, _)| u as usize)
                .expect("a finite distance has a witness successor");
            path.push(next);
            v = next;
            remaining -= 1;
        }
        let probability = self.probability(&path);
        Some(Evidence { path, probability })
    }
}

/// Most probable minimally-satisfying path from the initial state within
/// `hops` steps, or `None` if no such path exists.
pub fn strongest_evidence(dtmc: &Dtmc, left: &[bool], right: &[bool], hops: usize) -> Result<Option<Evidence>, Error> {
    Ok(SearchSpace::new(dtmc, left, right, hops)?.strongest())
}

struct Node {
    state: u32,
    parent: u32,
    len: u32,
    weight: f64,
}

#[derive(PartialEq)]
struct Queued {
    priority: f64,
    node: u32,
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; smallest priority first.
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazily enumerates minimally-satisfying paths in nonincreasing probability.
pub struct PathEnumerator<'a> {
    space: SearchSpace<'a>,
    nodes: Vec<Node>,
    heap: BinaryHeap<Queued>,
    ready: VecDeque<Evidence>,
}

impl<'a> PathEnumerator<'a> {
    pub fn new(dtmc: &'a Dtmc, left: &[bool], right: &[bool], depth: usize) -> Result<Self, Error> {
        let space = SearchSpace::new(dtmc, left, right, depth)?;
        let mut e = Self {
            space,
            nodes: Vec::new(),
            heap: BinaryHeap::new(),
            ready: VecDeque::new(),
        };
        let start = dtmc.initial();
        let h = e.space.dist(start, depth);
        if h.is_finite() {
            e.push(start, u32::MAX, 0, 0.0, h);
        }
        Ok(e)
    }

    fn push(&mut self, state: usize, parent: u32, len: u32, weight: f64, priority: f64) {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            state: state as u32,
            parent,
            len,
            weight,
        });
        self.heap.push(Queued { priority, node: id });
    }

    fn path(&self, mut id: u32) -> Vec<usize> {
        let mut path = Vec::with_capacity(self.nodes[id as usize].len as usize + 1);
        while id != u32::MAX {
            let n = &self.nodes[id as usize];
            path.push(n.state as usize);
            id = n.parent;
        }
        path.reverse();
        path
    }

    /// Pops one queue entry; returns its id if it is a complete path,
    /// otherwise pushes its one-step extensions.
    fn settle(&mut self) -> Option<u32> {
        let Queued { node, .. } = self.heap.pop()?;
        let (v, len, weight) = {
            let n = &self.nodes[node as usize];
            (n.state as usize, n.len as usize, n.weight)
        };
        if self.space.target[v] {
            return Some(node);
        }
        if len >= self.space.depth {
            return None;
        }
        let remaining = self.space.depth - len - 1;
        let (succ, w) = self.space.graph.edges(v);
        let ext: Vec<(usize, f64, f64)> = succ
            .iter()
            .zip(w)
            .filter_map(|(&u, &w)| {
                let h = self.space.dist(u as usize, remaining);
                h.is_finite().then_some((u as usize, weight + w, weight + w + h))
            })
            .collect();
        for (u, g, f) in ext {
            self.push(u, node, len as u32 + 1, g, f);
        }
        None
    }

    fn fill(&mut self) {
        let head = loop {
            match self.heap.peek() {
                None => return,
                Some(_) => {
                    if let Some(id) = self.settle() {
                        break id;
                    }
                }
            }
        };
        let head_weight = self.nodes[head as usize].weight;
        let limit = head_weight + tie_tol(head_weight);
        let mut group = vec![head];
        while self.heap.peek().is_some_and(|q| q.priority <= limit) {
            if let Some(id) = self.settle() {
                group.push(id);
            }
        }
        let mut paths: Vec<Vec<usize>> = group.into_iter().map(|id| self.path(id)).collect();
        paths.sort();
        for path in paths {
            let probability = self.space.probability(&path);
            self.ready.push_back(Evidence { path, probability });
        }
    }
}

impl Iterator for PathEnumerator<'_> {
    type Item = Evidence;

    fn next(&mut self) -> Option<Evidence> {
        if self.ready.is_empty() {
            self.fill();
        }
        self.ready.pop_front()
    }
}

/// Minimal-cardinality set of evidences whose total probability exceeds
/// `bound`, taken greedily in enumeration order.
pub fn smallest_counterexample(
    dtmc: &Dtmc,
    left: &[bool],
    right: &[bool],
    hops: usize,
    bound: f64,
    opts: &CexOptions,
) -> Result<Counterexample, CexError> {
    if bound >= 1.0 {
        return Err(CexError::NoCounterexample { total: 0.0, bound });
    }
    let depth = opts.depth(hops, dtmc.n_states());
    let mut cex = Counterexample {
        evidences: Vec::new(),
        total: 0.0,
        bound,
        hops,
    };
    for ev in PathEnumerator::new(dtmc, left, right, depth)? {
        cex.total += ev.probability;
        cex.evidences.push(ev);
        if cex.total > bound {
            return Ok(cex);
        }
        if cex.evidences.len() >= opts.k_max {
            return Err(CexError::Truncated(cex));
        }
    }
    Err(CexError::NoCounterexample {
        total: cex.total,
        bound,
    })
}

/// Counterexample for a top-level `P<=p [ a U<=h b ]` (or unbounded until,
/// searched up to the depth cap).
pub fn counterexample_for(dtmc: &Dtmc, phi: &StateFormula, opts: &CexOptions) -> Result<Counterexample, CexError> {
    let StateFormula::Prob { cmp, bound, path } = phi else {
        return Err(Error::UnsupportedSpec("expected a probability operator".into()).into());
    };
    if !cmp.is_upper_bound() {
        return Err(Error::UnsupportedSpec("counterexamples need an upper bound".into()).into());
    }
    let (left, right, hops) = match path.as_ref() {
        PathFormula::BoundedUntil { left, right, hops } => (left, right, *hops),
        PathFormula::Until { left, right } => (left, right, usize::MAX),
        PathFormula::Next(_) => {
            return Err(Error::UnsupportedSpec("counterexamples need an until formula".into()).into())
        }
    };
    let left = sat(dtmc, left)?;
    let right = sat(dtmc, right)?;
    smallest_counterexample(dtmc, &left, &right, hops, *bound, opts)
}

/// Probability-weighted discounted feature sum of the evidences,
/// normalised by the counterexample's total probability.
pub fn counterexample_features(
    cex: &Counterexample,
    features: &FeatureMap,
    discount: f64,
) -> Result<FeatureExpectation, Error> {
    if cex.evidences.is_empty() {
        return Err(Error::Empty("counterexample"));
    }
    let total: f64 = cex.evidences.iter().map(|e| e.probability).sum();
    let mut mu = vec![0.0; features.dim()];
    for ev in &cex.evidences {
        let mut scale = ev.probability / total;
        for &s in &ev.path {
            features.accumulate(s, scale, &mut mu);
            scale *= discount;
        }
    }
    Ok(FeatureExpectation(mu))
}
