//! Grid-world Markov games with independent, non-interacting agents.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{JointIndexer, MarkovGame};
use crate::error::{Error, Result};

/// A grid cell as `[row, col]`, row 0 at the top.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell(pub usize, pub usize);

impl Cell {
    pub fn row(self) -> usize {
        self.0
    }

    pub fn col(self) -> usize {
        self.1
    }
}

/// Per-agent moves. `Down` and `Up` are the stochastic ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(usize)]
pub enum GridAction {
    Stay = 0,
    Left = 1,
    Down = 2,
    Right = 3,
    Up = 4,
}

impl GridAction {
    pub const ALL: [GridAction; 5] = [
        GridAction::Stay,
        GridAction::Left,
        GridAction::Down,
        GridAction::Right,
        GridAction::Up,
    ];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

fn default_success() -> f64 {
    0.5
}

fn default_discount() -> f64 {
    0.99
}

/// Configuration of a square grid world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridWorldSpec {
    pub side: usize,
    pub n_agents: usize,
    #[serde(rename = "unsafe")]
    pub unsafe_cells: Vec<Cell>,
    pub goal: Vec<Cell>,
    pub init: Cell,
    /// Ground-truth reward per cell, `rewards[row][col]`.
    pub rewards: Vec<Vec<f64>>,
    #[serde(default = "default_success")]
    pub move_success_prob: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

impl GridWorldSpec {
    /// The default experiment layout on a `side x side` grid: start in the
    /// top-left corner, two goal cells in the bottom-right corner, and a
    /// block of unsafe cells sitting on the high-reward diagonal corridor.
    pub fn parametric(side: usize, n_agents: usize) -> Self {
        assert!(side >= 3, "parametric layout needs side >= 3");
        let last = side - 1;
        let goal = vec![Cell(last, last), Cell(last, last - 1)];
        let unsafe_cells = unsafe_block(side);

        let mut rewards = vec![vec![0.0; side]; side];
        for (r, row) in rewards.iter_mut().enumerate() {
            for (c, x) in row.iter_mut().enumerate() {
                let progress = (r + c) as f64 / (2 * last) as f64;
                let off_diagonal = r.abs_diff(c) as f64;
                *x = 0.1 + 0.2 * progress + 0.4 * (-off_diagonal * off_diagonal / 2.0).exp();
            }
        }
        rewards[last][last] = 1.0;
        rewards[last][last - 1] = 0.9;

        Self {
            side,
            n_agents,
            unsafe_cells,
            goal,
            init: Cell(0, 0),
            rewards,
            move_success_prob: default_success(),
            discount: default_discount(),
        }
    }

    /// 8x8, two agents: the configuration used by the experiments.
    pub fn default_config() -> Self {
        Self::parametric(8, 2)
    }

    pub fn cells(&self) -> usize {
        self.side * self.side
    }

    pub fn cell_index(&self, cell: Cell) -> usize {
        cell.0 * self.side + cell.1
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell(index / self.side, index % self.side)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGrid(msg));
        if self.side == 0 {
            return bad("side must be positive".into());
        }
        if self.n_agents == 0 {
            return bad("need at least one agent".into());
        }
        if self.rewards.len() != self.side || self.rewards.iter().any(|r| r.len() != self.side) {
            return bad(format!("reward table must be {0}x{0}", self.side));
        }
        if self.rewards.iter().flatten().any(|x| !x.is_finite()) {
            return bad("rewards must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.move_success_prob) {
            return bad(format!("move_success_prob {} outside [0,1]", self.move_success_prob));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad(format!("discount {} outside [0,1)", self.discount));
        }
        let in_range = |c: &Cell| c.0 < self.side && c.1 < self.side;
        for c in self
            .unsafe_cells
            .iter()
            .chain(&self.goal)
            .chain(std::iter::once(&self.init))
        {
            if !in_range(c) {
                return bad(format!("cell {c:?} outside the {0}x{0} grid", self.side));
            }
        }
        if self.goal.is_empty() {
            return bad("at least one goal cell is required".into());
        }
        let unsafe_set: BTreeSet<_> = self.unsafe_cells.iter().collect();
        if self.goal.iter().any(|g| unsafe_set.contains(g)) {
            return bad("goal and unsafe cells overlap".into());
        }
        if unsafe_set.contains(&self.init) || self.goal.contains(&self.init) {
            return bad("init must differ from goal and unsafe cells".into());
        }
        Ok(())
    }

    /// Single-agent outcome distribution of `action` from `cell`.
    pub fn agent_step(&self, cell: usize, action: GridAction) -> Vec<(usize, f64)> {
        let Cell(r, c) = self.cell_at(cell);
        let target = match action {
            GridAction::Stay => None,
            GridAction::Left => c.checked_sub(1).map(|c| Cell(r, c)),
            GridAction::Right => (c + 1 < self.side).then(|| Cell(r, c + 1)),
            GridAction::Down => (r + 1 < self.side).then(|| Cell(r + 1, c)),
            GridAction::Up => r.checked_sub(1).map(|r| Cell(r, c)),
        };
        let Some(target) = target else {
            return vec![(cell, 1.0)];
        };
        let target = self.cell_index(target);
        let p = match action {
            GridAction::Down | GridAction::Up => self.move_success_prob,
            _ => 1.0,
        };
        match (p > 0.0, p < 1.0) {
            (true, true) => vec![(target, p), (cell, 1.0 - p)],
            (true, false) => vec![(target, 1.0)],
            _ => vec![(cell, 1.0)],
        }
    }

    /// Ground-truth joint reward: the sum of the agents' cell rewards.
    pub fn joint_reward(&self, game: &MarkovGame) -> Vec<f64> {
        let ix = game.state_index();
        (0..game.n_states())
            .map(|s| {
                ix.decode(s)
                    .into_iter()
                    .map(|cell| {
                        let Cell(r, c) = self.cell_at(cell);
                        self.rewards[r][c]
                    })
                    .sum()
            })
            .collect()
    }
}

fn unsafe_block(side: usize) -> Vec<Cell> {
    if side < 4 {
        return vec![Cell(1, 1)];
    }
    let m = side / 2;
    vec![Cell(m - 1, m - 1), Cell(m - 1, m), Cell(m, m - 1), Cell(m, m)]
}

/// Builds the joint Markov game of a grid world.
///
/// Labels: `init` (all agents on the init cell), `goal` (all agents on goal
/// cells), `unsafe` (any agent on an unsafe cell) and `unsafe_agent{i}`
/// (agent `i` on an unsafe cell).
pub fn build_grid_world(spec: &GridWorldSpec) -> Result<MarkovGame> {
    spec.validate()?;
    let q = spec.cells();
    let n = spec.n_agents;
    let states = JointIndexer::new(q, n)?;
    let actions = JointIndexer::new(GridAction::ALL.len(), n)?;

    let local: Vec<Vec<Vec<(usize, f64)>>> = (0..q)
        .map(|cell| GridAction::ALL.iter().map(|&a| spec.agent_step(cell, a)).collect())
        .collect();

    let mut rows = Vec::with_capacity(states.size() * actions.size());
    for s in 0..states.size() {
        let cells = states.decode(s);
        for a in 0..actions.size() {
            let acts = actions.decode(a);
            let mut row = vec![(0usize, 1.0f64)];
            for (cell, act) in cells.iter().zip(&acts) {
                let outcomes = &local[*cell][*act];
                row = row
                    .iter()
                    .flat_map(|&(prefix, p)| outcomes.iter().map(move |&(t, q2)| (prefix * q + t, p * q2)))
                    .collect();
            }
            rows.push(row);
        }
    }

    let unsafe_cells: BTreeSet<usize> = spec.unsafe_cells.iter().map(|&c| spec.cell_index(c)).collect();
    let goal_cells: BTreeSet<usize> = spec.goal.iter().map(|&c| spec.cell_index(c)).collect();
    let init_cell = spec.cell_index(spec.init);

    let mut labels: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    let mut any_unsafe = BTreeSet::new();
    let mut goal = BTreeSet::new();
    let mut per_agent = vec![BTreeSet::new(); n];
    for s in 0..states.size() {
        let cells = states.decode(s);
        for (agent, cell) in cells.iter().enumerate() {
            if unsafe_cells.contains(cell) {
                per_agent[agent].insert(s);
                any_unsafe.insert(s);
            }
        }
        if cells.iter().all(|c| goal_cells.contains(c)) {
            goal.insert(s);
        }
    }
    let init = states.encode(&vec![init_cell; n]);
    labels.insert("init".into(), BTreeSet::from([init]));
    labels.insert("goal".into(), goal);
    labels.insert("unsafe".into(), any_unsafe);
    for (agent, set) in per_agent.into_iter().enumerate() {
        labels.insert(format!("unsafe_agent{agent}"), set);
    }

    MarkovGame::new(states, actions, rows, spec.discount, init, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_agents: usize) -> GridWorldSpec {
        GridWorldSpec::parametric(3, n_agents)
    }

    #[test]
    fn joint_state_counts_match_grid_sizes() {
        let g = build_grid_world(&small(2)).unwrap();
        assert_eq!(g.n_states(), 81);
        assert_eq!(g.n_actions(), 25);
        let g = build_grid_world(&GridWorldSpec::parametric(8, 2)).unwrap();
        assert_eq!(g.n_states(), 4096);
    }

    #[test]
    fn single_agent_rows_equal_local_rows() {
        let spec = small(1);
        let g = build_grid_world(&spec).unwrap();
        for s in 0..g.n_states() {
            for a in GridAction::ALL {
                let mut local = spec.agent_step(s, a);
                local.sort_by_key(|x| x.0);
                let (succ, prob) = g.successors(s, a as usize);
                let joint: Vec<_> = succ.iter().map(|&t| t as usize).zip(prob.iter().copied()).collect();
                assert_eq!(joint, local);
            }
        }
    }

    #[test]
    fn stochastic_moves_fail_in_place() {
        let spec = small(1);
        assert_eq!(spec.agent_step(0, GridAction::Down), vec![(3, 0.5), (0, 0.5)]);
        assert_eq!(spec.agent_step(0, GridAction::Up), vec![(0, 1.0)]);
        assert_eq!(spec.agent_step(0, GridAction::Left), vec![(0, 1.0)]);
        assert_eq!(spec.agent_step(0, GridAction::Right), vec![(1, 1.0)]);
        assert_eq!(spec.agent_step(4, GridAction::Stay), vec![(4, 1.0)]);
    }

    #[test]
    fn labels_follow_any_and_all_semantics() {
        let spec = small(2);
        let g = build_grid_world(&spec).unwrap();
        let ix = g.state_index();
        let u = spec.cell_index(spec.unsafe_cells[0]);
        let goal = spec.cell_index(spec.goal[0]);
        let unsafe_set = g.label("unsafe").unwrap();
        assert!(unsafe_set.contains(&ix.encode(&[u, 0])));
        assert!(unsafe_set.contains(&ix.encode(&[0, u])));
        assert!(!unsafe_set.contains(&ix.encode(&[0, 0])));
        let goal_set = g.label("goal").unwrap();
        assert!(goal_set.contains(&ix.encode(&[goal, goal])));
        assert!(!goal_set.contains(&ix.encode(&[goal, 0])));
        assert_eq!(g.label("init").unwrap(), &BTreeSet::from([0]));
        assert!(g.label("unsafe_agent1").unwrap().contains(&ix.encode(&[0, u])));
        assert!(!g.label("unsafe_agent0").unwrap().contains(&ix.encode(&[0, u])));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small(1);
        spec.goal.push(spec.unsafe_cells[0]);
        assert!(build_grid_world(&spec).is_err());

        let mut spec = small(1);
        spec.rewards.pop();
        assert!(build_grid_world(&spec).is_err());

        let mut spec = small(1);
        spec.init = Cell(3, 0);
        assert!(build_grid_world(&spec).is_err());
    }

    #[test]
    fn spec_json_uses_documented_keys() {
        let spec = small(2);
        let v: serde_json::Value = serde_json::to_value(&spec).unwrap();
        for key in [
            "side",
            "n_agents",
            "unsafe",
            "goal",
            "init",
            "rewards",
            "move_success_prob",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: GridWorldSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, spec);
    }
}
