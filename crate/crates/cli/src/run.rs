use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use cegal_core::cex::{counterexample_features, counterexample_for, CexError, CexOptions};
use cegal_core::checker::{reach_probability, verify_dtmc, StateFormula};
use cegal_core::dtmc::{export_explicit, induce_dtmc, Dtmc};
use cegal_core::expert::{estimate_mu_e, expert_rule, rollout_demos, DemoSet};
use cegal_core::learner::{cegal_run, initial_safe_rule, max_margin_weights, run_al, Termination};
use cegal_core::model::{
    build_grid_world, reward_from_weights, DecisionRule, FeatureExpectation, FeatureMap, GridWorldSpec, MarkovGame,
    WeightVector,
};
use cegal_core::solve::{feature_expectations_exact, value_iteration};

use crate::config::ExperimentConfig;

/// Everything derived from the grid part of a configuration.
struct Setup {
    spec: GridWorldSpec,
    game: MarkovGame,
    features: FeatureMap,
    ground_truth: Vec<f64>,
    phi: StateFormula,
    hops: usize,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let spec = cfg.grid_spec();
        let game = build_grid_world(&spec)?;
        let features = FeatureMap::one_hot(game.n_states());
        let ground_truth = spec.joint_reward(&game);
        let phi = cfg.formula(game.n_states())?;
        let hops = cfg.property.hops.unwrap_or(game.n_states());
        Ok(Self {
            spec,
            game,
            features,
            ground_truth,
            phi,
            hops,
        })
    }

    fn expert(&self) -> Result<DecisionRule> {
        Ok(expert_rule(&self.game, &self.ground_truth)?)
    }

    fn ground_truth_return(&self, mu: &FeatureExpectation) -> f64 {
        WeightVector(self.ground_truth.clone()).value_of(mu)
    }

    /// Joint and per-agent probabilities of reaching unsafe cells.
    fn unsafe_report(&self, rule: &DecisionRule) -> Result<(f64, Vec<f64>)> {
        let dtmc = induce_dtmc(&self.game, rule)?;
        let joint = reach_probability(&dtmc, "unsafe", self.hops)?;
        let per_agent = (0..self.game.n_agents())
            .map(|i| reach_probability(&dtmc, &format!("unsafe_agent{i}"), self.hops))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((joint, per_agent))
    }

    /// Learned reward per agent and cell, averaged over the other agents'
    /// positions; one CSV row per grid row.
    fn reward_csv(&self, weights: &WeightVector, agent: usize) -> String {
        let side = self.spec.side;
        let ix = self.game.state_index();
        let mut sum = vec![0.0; side * side];
        let mut count = vec![0usize; side * side];
        for s in 0..self.game.n_states() {
            let cell = ix.component(s, agent);
            sum[cell] += self.features.dot(s, weights.as_slice());
            count[cell] += 1;
        }
        let mut out = String::new();
        for r in 0..side {
            let row: Vec<String> = (0..side)
                .map(|c| {
                    let i = r * side + c;
                    format!("{}", sum[i] / count[i] as f64)
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    Ok(cfg.output_dir.join(name))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn json_lines<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn read_rule(path: &Path) -> Result<DecisionRule> {
    let text = fs::read_to_string(path).with_context(|| format!("reading rule {}", path.display()))?;
    Ok(DecisionRule::from_json(&text)?)
}

fn demos(cfg: &ExperimentConfig, setup: &Setup) -> Result<DemoSet> {
    if let Some(path) = &cfg.demos.path {
        let text = fs::read_to_string(path).with_context(|| format!("reading demos {}", path.display()))?;
        return Ok(DemoSet::from_json_lines(&text)?);
    }
    let expert = setup.expert()?;
    let horizon = cfg.horizon(setup.game.discount());
    Ok(rollout_demos(
        &setup.game,
        &expert,
        cfg.demos.m,
        horizon,
        cfg.demos.seed,
    )?)
}

fn summary(cfg: &ExperimentConfig, mode: &str, value: Value) -> Result<Value> {
    write(
        &out_path(cfg, &format!("{mode}_summary.json"))?,
        &serde_json::to_string_pretty(&value)?,
    )?;
    Ok(value)
}

pub fn demos_mode(cfg: &ExperimentConfig) -> Result<Value> {
    let setup = Setup::new(cfg)?;
    let set = demos(cfg, &setup)?;
    let path = out_path(cfg, "demos.jsonl")?;
    write(&path, &set.to_json_lines()?)?;
    summary(
        cfg,
        "demos",
        json!({
            "mode": "demos",
            "trajectories": set.len(),
            "horizon": set.trajectories.first().map_or(0, |t| t.len()),
            "seed": cfg.demos.seed,
            "path": path,
        }),
    )
}

fn write_rewards(
    cfg: &ExperimentConfig,
    setup: &Setup,
    prefix: &str,
    weights: Option<&WeightVector>,
) -> Result<Vec<PathBuf>> {
    let Some(w) = weights else {
        return Ok(Vec::new());
    };
    (0..setup.game.n_agents())
        .map(|i| {
            let path = out_path(cfg, &format!("{prefix}_reward_agent{i}.csv"))?;
            write(&path, &setup.reward_csv(w, i))?;
            Ok(path)
        })
        .collect()
}

pub fn al_mode(cfg: &ExperimentConfig) -> Result<Value> {
    let setup = Setup::new(cfg)?;
    let set = demos(cfg, &setup)?;
    let mu_e = estimate_mu_e(&set, &setup.features, setup.game.discount())?;
    let stay = DecisionRule::deterministic(setup.game.n_actions(), &vec![0; setup.game.n_states()])?;
    let out = run_al(&setup.game, &setup.features, &mu_e, stay, &cfg.learner)?;

    write(&out_path(cfg, "al_log.jsonl")?, &json_lines(&out.log)?)?;
    write(&out_path(cfg, "al_rule.json")?, &out.rule.to_json()?)?;
    let rewards = write_rewards(cfg, &setup, "al", out.weights.as_ref())?;
    let verdict = verify_dtmc(&induce_dtmc(&setup.game, &out.rule)?, &setup.phi)?;
    let (joint, per_agent) = setup.unsafe_report(&out.rule)?;
    summary(
        cfg,
        "al",
        json!({
            "mode": "al",
            "converged": out.converged,
            "iterations": out.iterations,
            "distance": out.mu.distance(&mu_e),
            "verdict": verdict,
            "unsafe_probability": joint,
            "unsafe_probability_per_agent": per_agent,
            "ground_truth_return": setup.ground_truth_return(&out.mu),
            "reward_grids": rewards,
        }),
    )
}

pub fn cegal_mode(cfg: &ExperimentConfig) -> Result<Value> {
    let setup = Setup::new(cfg)?;
    let set = demos(cfg, &setup)?;
    let mu_e = estimate_mu_e(&set, &setup.features, setup.game.discount())?;
    let initial = match &cfg.initial_rule {
        Some(path) => read_rule(path)?,
        None => initial_safe_rule(&setup.game, &setup.phi)?,
    };
    let initial_mu = feature_expectations_exact(&setup.game, &initial, &setup.features)?;
    let out = cegal_run(
        &setup.game,
        &setup.features,
        &mu_e,
        &setup.phi,
        &cfg.learner,
        &cfg.cex,
        initial,
    )?;

    let mut log = json_lines(&out.log)?;
    log.push_str(&serde_json::to_string(&json!({
        "termination": out.termination,
        "iterations": out.iterations,
        "probability": out.probability,
    }))?);
    log.push('\n');
    write(&out_path(cfg, "cegal_log.jsonl")?, &log)?;
    write(&out_path(cfg, "cegal_rule.json")?, &out.rule.to_json()?)?;
    let rewards = write_rewards(cfg, &setup, "cegal", out.weights.as_ref())?;
    let (joint, per_agent) = setup.unsafe_report(&out.rule)?;
    let initial_return = setup.ground_truth_return(&initial_mu);
    let final_return = setup.ground_truth_return(&out.mu);
    summary(
        cfg,
        "cegal",
        json!({
            "mode": "cegal",
            "termination": out.termination,
            "max_iter_reached": out.termination == Termination::MaxIter,
            "iterations": out.iterations,
            "distance": out.mu.distance(&mu_e),
            "probability": out.probability,
            "unsafe_probability": joint,
            "unsafe_probability_per_agent": per_agent,
            "initial_return": initial_return,
            "ground_truth_return": final_return,
            "reward_grids": rewards,
        }),
    )
}

fn chosen_rule(cfg: &ExperimentConfig, setup: &Setup) -> Result<DecisionRule> {
    match &cfg.rule {
        Some(path) => read_rule(path),
        None => setup.expert(),
    }
}

pub fn verify_mode(cfg: &ExperimentConfig) -> Result<Value> {
    let setup = Setup::new(cfg)?;
    let rule = chosen_rule(cfg, &setup)?;
    rule.check_against(&setup.game)?;
    let verdict = verify_dtmc(&induce_dtmc(&setup.game, &rule)?, &setup.phi)?;
    let (_, per_agent) = setup.unsafe_report(&rule)?;
    Ok(json!({
        "mode": "verify",
        "formula": setup.phi.to_string(),
        "status": verdict,
        "unsafe_probability_per_agent": per_agent,
    }))
}

pub fn export_mode(cfg: &ExperimentConfig) -> Result<Value> {
    let setup = Setup::new(cfg)?;
    let rule = chosen_rule(cfg, &setup)?;
    let dtmc = induce_dtmc(&setup.game, &rule)?;
    let (tra, lab) = export_explicit(&dtmc);
    let tra_path = out_path(cfg, "model.tra")?;
    let lab_path = out_path(cfg, "model.lab")?;
    write(&tra_path, &tra)?;
    write(&lab_path, &lab)?;
    Ok(json!({
        "mode": "export",
        "states": dtmc.n_states(),
        "transitions": dtmc.n_transitions(),
        "transitions_file": tra_path,
        "labels_file": lab_path,
    }))
}

/// Mean wall-clock seconds of the four stages of one learning iteration on
/// one grid size.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub side: usize,
    pub joint_states: usize,
    pub rule_seconds: f64,
    pub feature_seconds: f64,
    pub check_seconds: f64,
    /// Absent when neither the learned nor the expert rule violates the
    /// property.
    pub cex_seconds: Option<f64>,
}

/// Timing batches per stage and size. Batches of all sizes are interleaved
/// so that the sizes are measured under the same machine load, and the
/// fastest batch is reported.
const BENCH_BATCHES: usize = 5;

/// Seconds per call of one batch: `f` repeated until it has run
/// `min_calls` times and for at least `min_seconds`.
fn time_batch(min_calls: usize, min_seconds: f64, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let start = Instant::now();
    let mut calls = 0usize;
    loop {
        f()?;
        calls += 1;
        let elapsed = start.elapsed().as_secs_f64();
        if calls >= min_calls && elapsed >= min_seconds {
            return Ok(elapsed / calls as f64);
        }
    }
}

/// Inputs of the first learning iteration after the initial safe rule on
/// one grid size: the max-margin weights against the initial rule and the
/// rule they produce. The counterexample stage runs on that rule, or on the
/// expert rule when the learned one is safe.
struct BenchWorkload {
    setup: Setup,
    weights: WeightVector,
    rule: DecisionRule,
    /// Chain violating the property, if any.
    violating: Option<Dtmc>,
}

impl BenchWorkload {
    fn new(cfg: &ExperimentConfig, side: usize) -> Result<Self> {
        let sized = ExperimentConfig {
            side,
            grid: None,
            property: crate::config::PropertyConfig {
                hops: None,
                formula: None,
                ..cfg.property.clone()
            },
            ..cfg.clone()
        };
        let setup = Setup::new(&sized)?;
        let set = demos(&sized, &setup)?;
        let (game, features) = (&setup.game, &setup.features);
        let mu_e = estimate_mu_e(&set, features, game.discount())?;
        let initial = initial_safe_rule(game, &setup.phi)?;
        let mu0 = feature_expectations_exact(game, &initial, features)?;
        let weights = max_margin_weights(&mu_e, &[mu0]).weights;
        let rule = value_iteration(game, &reward_from_weights(game, features, &weights)?)?.0;
        let mut violating = None;
        for r in [rule.clone(), setup.expert()?] {
            let dtmc = induce_dtmc(game, &r)?;
            if !verify_dtmc(&dtmc, &setup.phi)?.is_satisfied() {
                violating = Some(dtmc);
                break;
            }
        }
        Ok(Self {
            setup,
            weights,
            rule,
            violating,
        })
    }

    /// Runs stage `i`: 0 rule, 1 feature expectation, 2 model check,
    /// 3 counterexample. `false` when the stage does not apply.
    fn run(&self, stage: usize, cex: &CexOptions) -> Result<bool> {
        let (game, features, phi) = (&self.setup.game, &self.setup.features, &self.setup.phi);
        match stage {
            0 => {
                value_iteration(game, &reward_from_weights(game, features, &self.weights)?)?;
            }
            1 => {
                feature_expectations_exact(game, &self.rule, features)?;
            }
            2 => {
                verify_dtmc(&induce_dtmc(game, &self.rule)?, phi)?;
            }
            _ => {
                let Some(dtmc) = &self.violating else {
                    return Ok(false);
                };
                let c = match counterexample_for(dtmc, phi, cex) {
                    Ok(c) | Err(CexError::Truncated(c)) => c,
                    Err(e) => return Err(e.into()),
                };
                counterexample_features(&c, features, game.discount())?;
            }
        }
        Ok(true)
    }
}

/// Per-call seconds of the four stages per size, fastest of the
/// interleaved batches.
fn bench_sizes(cfg: &ExperimentConfig, sides: &[usize]) -> Result<Vec<BenchRow>> {
    let loads = sides
        .iter()
        .map(|&side| BenchWorkload::new(cfg, side))
        .collect::<Result<Vec<_>>>()?;
    let mut best = vec![[None::<f64>; 4]; loads.len()];
    for _ in 0..BENCH_BATCHES {
        for (load, best) in loads.iter().zip(&mut best) {
            for (stage, slot) in best.iter_mut().enumerate() {
                if !load.run(stage, &cfg.cex)? {
                    continue;
                }
                let t = time_batch(cfg.bench.repeats, cfg.bench.min_seconds, || {
                    load.run(stage, &cfg.cex).map(drop)
                })?;
                *slot = Some(slot.map_or(t, |b| b.min(t)));
            }
        }
    }
    Ok(sides
        .iter()
        .zip(&loads)
        .zip(best)
        .map(|((&side, load), [rule, feature, check, cex])| BenchRow {
            side,
            joint_states: load.setup.game.n_states(),
            rule_seconds: rule.unwrap_or(0.0),
            feature_seconds: feature.unwrap_or(0.0),
            check_seconds: check.unwrap_or(0.0),
            cex_seconds: cex,
        })
        .collect())
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut out = String::from("side,joint_states,rule_seconds,feature_seconds,check_seconds,cex_seconds\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.side,
            r.joint_states,
            r.rule_seconds,
            r.feature_seconds,
            r.check_seconds,
            r.cex_seconds.map_or(String::new(), |x| x.to_string())
        );
    }
    out
}

pub fn bench_mode(cfg: &ExperimentConfig) -> Result<Value> {
    let mut sides = cfg.bench.sides.clone();
    if cfg.bench.include_16 && !sides.contains(&16) {
        sides.push(16);
    }
    let rows = bench_sizes(cfg, &sides)?;
    let path = out_path(cfg, "bench.csv")?;
    write(&path, &bench_table(&rows))?;
    eprintln!(
        "{:>6} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "grid", "joint", "rule (s)", "feature (s)", "check (s)", "cex (s)"
    );
    for r in &rows {
        eprintln!(
            "{:>6} {:>12} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            format!("{0}x{0}", r.side),
            r.joint_states,
            r.rule_seconds,
            r.feature_seconds,
            r.check_seconds,
            r.cex_seconds.unwrap_or(f64::NAN)
        );
    }
    Ok(json!({ "mode": "bench", "rows": rows, "table": path }))
}
