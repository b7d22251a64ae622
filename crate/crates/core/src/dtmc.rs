//! Labelled discrete-time Markov chains induced by fixing a decision rule.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{DecisionRule, Labels, MarkovGame, STOCHASTIC_TOL};

/// Mixed transition probabilities below this are dropped before the row is
/// renormalised.
pub const DROP_BELOW: f64 = 1e-15;

/// A DTMC with rows in compressed sparse form, successors sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct Dtmc {
    row_start: Vec<usize>,
    succ: Vec<u32>,
    prob: Vec<f64>,
    labels: Labels,
    initial: usize,
}

impl Dtmc {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, labels: Labels, initial: usize) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty("dtmc states"));
        }
        if initial >= n {
            return Err(Error::InvalidModel(format!("initial state {initial} out of range")));
        }
        for (name, set) in &labels {
            if set.iter().any(|&s| s >= n) {
                return Err(Error::InvalidModel(format!("label {name:?} out of range")));
            }
        }
        let mut row_start = vec![0];
        let mut succ = Vec::new();
        let mut prob = Vec::new();
        for (s, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(t, _)| t);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidModel(format!("row {s} repeats a successor")));
            }
            let mut sum = 0.0;
            for (t, p) in row {
                if t >= n || !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidModel(format!("row {s} has bad entry ({t}, {p})")));
                }
                if p > 0.0 {
                    succ.push(t as u32);
                    prob.push(p);
                    sum += p;
                }
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidModel(format!("row {s} sums to {sum}")));
            }
            row_start.push(succ.len());
        }
        Ok(Self {
            row_start,
            succ,
            prob,
            labels,
            initial,
        })
    }

    pub fn n_states(&self) -> usize {
        self.row_start.len() - 1
    }

    pub fn n_transitions(&self) -> usize {
        self.succ.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&BTreeSet<usize>> {
        self.labels.get(name)
    }

    #[inline]
    pub fn row(&self, state: usize) -> (&[u32], &[f64]) {
        let (lo, hi) = (self.row_start[state], self.row_start[state + 1]);
        (&self.succ[lo..hi], &self.prob[lo..hi])
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        let (succ, prob) = self.row(from);
        succ.binary_search(&(to as u32)).map_or(0.0, |i| prob[i])
    }

    pub fn is_absorbing(&self, state: usize) -> bool {
        let (succ, _) = self.row(state);
        succ.len() == 1 && succ[0] as usize == state
    }

    /// Dense rows, mostly for tests and small examples.
    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.n_states())
            .map(|s| {
                let (succ, prob) = self.row(s);
                succ.iter().map(|&t| t as usize).zip(prob.iter().copied()).collect()
            })
            .collect()
    }

    /// Replaces the rows of `states` with probability-one self-loops.
    pub fn make_absorbing(&self, states: &BTreeSet<usize>) -> Result<Dtmc> {
        if let Some(&bad) = states.iter().find(|&&s| s >= self.n_states()) {
            return Err(Error::InvalidModel(format!("state {bad} out of range")));
        }
        let mut row_start = vec![0];
        let mut succ = Vec::with_capacity(self.succ.len());
        let mut prob = Vec::with_capacity(self.prob.len());
        for s in 0..self.n_states() {
            if states.contains(&s) {
                succ.push(s as u32);
                prob.push(1.0);
            } else {
                let (ts, ps) = self.row(s);
                succ.extend_from_slice(ts);
                prob.extend_from_slice(ps);
            }
            row_start.push(succ.len());
        }
        Ok(Dtmc {
            row_start,
            succ,
            prob,
            labels: self.labels.clone(),
            initial: self.initial,
        })
    }
}

/// `P(s, s') = sum_a rule(a | s) * P(s' | s, a)` with the game's labels.
pub fn induce_dtmc(game: &MarkovGame, rule: &DecisionRule) -> Result<Dtmc> {
    rule.check_against(game)?;
    let n = game.n_states();
    let mut row_start = Vec::with_capacity(n + 1);
    let mut succ = Vec::new();
    let mut prob = Vec::new();
    row_start.push(0);
    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    for s in 0..n {
        let choice = rule.row(s);
        if choice.is_empty() {
            return Err(Error::InvalidRule(format!("rule has no action at state {s}")));
        }
        if let [(a, _)] = choice {
            let (ts, ps) = game.successors(s, *a);
            succ.extend_from_slice(ts);
            prob.extend_from_slice(ps);
        } else {
            acc.clear();
            for &(a, pa) in choice {
                let (ts, ps) = game.successors(s, a);
                for (&t, &p) in ts.iter().zip(ps) {
                    *acc.entry(t).or_insert(0.0) += pa * p;
                }
            }
            acc.retain(|_, p| *p >= DROP_BELOW);
            let total: f64 = acc.values().sum();
            for (&t, &p) in &acc {
                succ.push(t);
                prob.push(p / total);
            }
        }
        row_start.push(succ.len());
    }
    Ok(Dtmc {
        row_start,
        succ,
        prob,
        labels: game.labels().clone(),
        initial: game.initial_state(),
    })
}

/// Formats `x` like C's `%.17g`: 17 significant digits, trailing zeros
/// stripped, exponent form outside `[1e-4, 1e17)`.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (16 - exp).max(0) as usize;
    strip_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Explicit-state text of a DTMC: `(transitions, labels)`.
///
/// The transitions text starts with `"<states> <transitions>"` followed by
/// one `"src dst prob"` line per entry in `(src, dst)` order. The labels
/// text starts with a header of `index="name"` pairs and continues with
/// `"state: idx idx ..."` lines for labelled states.
pub fn export_explicit(dtmc: &Dtmc) -> (String, String) {
    let mut tra = format!("{} {}", dtmc.n_states(), dtmc.n_transitions());
    for s in 0..dtmc.n_states() {
        let (ts, ps) = dtmc.row(s);
        for (&t, &p) in ts.iter().zip(ps) {
            let _ = write!(tra, "\n{s} {t} {}", format_g17(p));
        }
    }
    tra.push('\n');

    let names: Vec<&String> = dtmc.labels.keys().collect();
    let header = names
        .iter()
        .enumerate()
        .map(|(i, n)| format!("{i}=\"{n}\""))
        .collect::<Vec<_>>()
        .join(" ");
    let mut per_state: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        for &s in &dtmc.labels[*name] {
            per_state.entry(s).or_default().push(i);
        }
    }
    let mut lab = header;
    lab.push('\n');
    for (s, idx) in per_state {
        let list = idx.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let _ = writeln!(lab, "{s}: {list}");
    }
    (tra, lab)
}

/// Parses the explicit-state format written by [`export_explicit`]. The
/// initial state is the one labelled `init`, or state 0 without such a
/// label.
pub fn parse_explicit(transitions: &str, labels: &str) -> Result<Dtmc> {
    let err = |line: usize, msg: &str| Error::Explicit {
        line,
        msg: msg.to_string(),
    };
    let mut lines = transitions.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
    let mut it = header.split_whitespace();
    let n: usize = it
        .next()
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| err(1, "bad state count"))?;
    let m: usize = it
        .next()
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| err(1, "bad transition count"))?;
    let mut rows = vec![Vec::new(); n];
    let mut count = 0;
    for (i, line) in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [src, dst, p] = parts.as_slice() else {
            return Err(err(i + 1, "expected `src dst prob`"));
        };
        let src: usize = src.parse().map_err(|_| err(i + 1, "bad source"))?;
        let dst: usize = dst.parse().map_err(|_| err(i + 1, "bad target"))?;
        let p: f64 = p.parse().map_err(|_| err(i + 1, "bad probability"))?;
        if src >= n || dst >= n {
            return Err(err(i + 1, "state out of range"));
        }
        rows[src].push((dst, p));
        count += 1;
    }
    if count != m {
        return Err(err(1, &format!("header announces {m} transitions, found {count}")));
    }

    let mut lab_lines = labels.lines().enumerate();
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    if let Some((_, header)) = lab_lines.next() {
        for tok in header.split_whitespace() {
            let (idx, name) = tok.split_once('=').ok_or_else(|| err(1, "bad label header"))?;
            let idx: usize = idx.parse().map_err(|_| err(1, "bad label index"))?;
            let name = name
                .strip_prefix('"')
                .and_then(|x| x.strip_suffix('"'))
                .ok_or_else(|| err(1, "label names must be quoted"))?;
            names.insert(idx, name.to_string());
        }
    }
    let mut label_sets: Labels = names.values().map(|n| (n.clone(), BTreeSet::new())).collect();
    for (i, line) in lab_lines {
        if line.trim().is_empty() {
            continue;
        }
        let (state, rest) = line
            .split_once(':')
            .ok_or_else(|| err(i + 1, "expected `state: ...`"))?;
        let state: usize = state.trim().parse().map_err(|_| err(i + 1, "bad state"))?;
        for tok in rest.split_whitespace() {
            let idx: usize = tok.parse().map_err(|_| err(i + 1, "bad label index"))?;
            let name = names.get(&idx).ok_or_else(|| err(i + 1, "undeclared label"))?;
            label_sets.get_mut(name).expect("declared").insert(state);
        }
    }
    let initial = label_sets
        .get("init")
        .and_then(|s| s.iter().next().copied())
        .unwrap_or(0);
    Dtmc::from_rows(rows, label_sets, initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JointIndexer;

    fn two_state() -> Dtmc {
        Dtmc::from_rows(vec![vec![(1, 1.0)], vec![(1, 1.0)]], Labels::new(), 0).unwrap()
    }

    #[test]
    fn g17_formatting() {
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(0.5), "0.5");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(0.25), "0.25");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(0.0001), "0.0001");
        let x = 1.0 / 3.0;
        assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn export_two_state_chain() {
        let (tra, lab) = export_explicit(&two_state());
        assert_eq!(tra, "2 2\n0 1 1\n1 1 1\n");
        assert_eq!(lab, "\n");
    }

    #[test]
    fn export_with_labels() {
        let labels = Labels::from([
            ("init".to_string(), BTreeSet::from([0])),
            ("unsafe".to_string(), BTreeSet::from([1])),
        ]);
        let d = Dtmc::from_rows(vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]], labels, 0).unwrap();
        let (tra, lab) = export_explicit(&d);
        assert_eq!(tra, "2 3\n0 0 0.5\n0 1 0.5\n1 1 1\n");
        assert_eq!(lab, "0=\"init\" 1=\"unsafe\"\n0: 0\n1: 1\n");
        assert_eq!(parse_explicit(&tra, &lab).unwrap(), d);
    }

    #[test]
    fn absorbing_rows() {
        let d = Dtmc::from_rows(
            vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 1.0)], vec![(2, 1.0)]],
            Labels::new(),
            0,
        )
        .unwrap();
        assert_eq!(d.make_absorbing(&BTreeSet::new()).unwrap(), d);
        let a = d.make_absorbing(&BTreeSet::from([0])).unwrap();
        assert_eq!(a.row(0), (&[0u32][..], &[1.0][..]));
        assert_eq!(a.row(1), d.row(1));
        assert!(a.is_absorbing(0) && a.is_absorbing(2) && !a.is_absorbing(1));
        let all = d.make_absorbing(&BTreeSet::from([0, 1, 2])).unwrap();
        assert!((0..3).all(|s| all.is_absorbing(s)));
        assert!(d.make_absorbing(&BTreeSet::from([7])).is_err());
    }

    #[test]
    fn substochastic_rows_are_rejected() {
        assert!(Dtmc::from_rows(vec![vec![(0, 0.9)]], Labels::new(), 0).is_err());
    }

    fn game_2x2() -> MarkovGame {
        // two states, two actions: action 0 stays, action 1 flips
        let ix = JointIndexer::new(2, 1).unwrap();
        let rows = vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(1, 1.0)], vec![(0, 1.0)]];
        MarkovGame::new(ix, ix, rows, 0.9, 0, Labels::new()).unwrap()
    }

    #[test]
    fn deterministic_induction_has_unit_rows() {
        let g = game_2x2();
        let rule = DecisionRule::deterministic(2, &[1, 0]).unwrap();
        let d = induce_dtmc(&g, &rule).unwrap();
        assert_eq!(d.rows(), vec![vec![(1, 1.0)], vec![(1, 1.0)]]);
    }

    #[test]
    fn mixed_rule_averages_action_rows() {
        let g = game_2x2();
        let rule = DecisionRule::new(2, vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 1.0)]]).unwrap();
        let d = induce_dtmc(&g, &rule).unwrap();
        assert_eq!(d.rows()[0], vec![(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn rule_shape_is_checked() {
        let g = game_2x2();
        let rule = DecisionRule::deterministic(2, &[1]).unwrap();
        assert!(induce_dtmc(&g, &rule).is_err());
    }
}
