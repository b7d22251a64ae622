//! Experiment configuration: one JSON document, defaults merged under the
//! file, `--set key.path=value` overrides merged on top.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use cegal_core::cex::CexOptions;
use cegal_core::checker::StateFormula;
use cegal_core::learner::LearnerParams;
use cegal_core::model::GridWorldSpec;
use cegal_core::solve::default_horizon;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Side of the built-in layout, used when `grid` is absent.
    pub side: usize,
    /// Agent count of the built-in layout, used when `grid` is absent.
    pub agents: usize,
    /// Explicit grid world; replaces the built-in layout.
    pub grid: Option<GridWorldSpec>,
    pub learner: LearnerParams,
    pub property: PropertyConfig,
    pub demos: DemoConfig,
    pub cex: CexOptions,
    /// Rule file for `verify` and `export`; the expert rule when absent.
    pub rule: Option<PathBuf>,
    /// Initial safe rule for `cegal`; synthesised when absent.
    pub initial_rule: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub bench: BenchConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            side: 8,
            agents: 2,
            grid: None,
            learner: LearnerParams::default(),
            property: PropertyConfig::default(),
            demos: DemoConfig::default(),
            cex: CexOptions::default(),
            rule: None,
            initial_rule: None,
            output_dir: PathBuf::from("out"),
            bench: BenchConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertyConfig {
    /// Upper bound `p*` on the probability of reaching `label`.
    pub bound: f64,
    /// Step bound; the number of joint states when absent.
    pub hops: Option<usize>,
    pub label: String,
    /// Full PCTL text; replaces `bound`/`hops`/`label` when present.
    pub formula: Option<String>,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        Self {
            bound: 0.25,
            hops: None,
            label: "unsafe".into(),
            formula: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub m: usize,
    /// Trajectory length; `gamma^T < 1e-6` when absent.
    pub horizon: Option<usize>,
    pub seed: u64,
    /// Read demonstrations from this file instead of generating them.
    pub path: Option<PathBuf>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            horizon: None,
            seed: 0,
            path: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub sides: Vec<usize>,
    /// Adds the 16x16 layout (very slow with two agents).
    pub include_16: bool,
    /// Minimum calls per timing batch.
    pub repeats: usize,
    /// Minimum wall-clock time per timing batch; short stages are repeated
    /// until it is reached.
    pub min_seconds: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sides: vec![3, 8],
            include_16: false,
            repeats: 1,
            min_seconds: 0.02,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut doc = serde_json::to_value(Self::default())?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let file: Value =
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            merge(&mut doc, file);
        }
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        let cfg: Self = serde_json::from_value(doc).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.property.bound) {
            bail!("property.bound must lie in [0, 1], got {}", self.property.bound);
        }
        if self.demos.m == 0 {
            bail!("demos.m must be positive");
        }
        if self.bench.repeats == 0 || self.bench.min_seconds.is_nan() || self.bench.min_seconds < 0.0 {
            bail!("bench.repeats must be positive and bench.min_seconds non-negative");
        }
        for path in [&self.rule, &self.initial_rule, &self.demos.path].into_iter().flatten() {
            if !path.exists() {
                bail!("referenced file {} does not exist", path.display());
            }
        }
        self.learner.validate()?;
        Ok(())
    }

    pub fn grid_spec(&self) -> GridWorldSpec {
        self.grid
            .clone()
            .unwrap_or_else(|| GridWorldSpec::parametric(self.side, self.agents))
    }

    pub fn formula(&self, n_states: usize) -> Result<StateFormula> {
        let text = match &self.property.formula {
            Some(f) => f.clone(),
            None => format!(
                "P<={} [ true U<={} \"{}\" ]",
                self.property.bound,
                self.property.hops.unwrap_or(n_states),
                self.property.label
            ),
        };
        Ok(StateFormula::parse(&text)?)
    }

    pub fn horizon(&self, discount: f64) -> usize {
        self.demos.horizon.unwrap_or_else(|| default_horizon(discount, 1e-6))
    }
}

/// Recursive object merge; non-objects in `patch` replace.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if v.is_object() && slot.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// `a.b.c=value`: the value is parsed as JSON, falling back to a string.
fn apply_override(doc: &mut Value, item: &str) -> Result<()> {
    let Some((key, raw)) = item.split_once('=') else {
        bail!("override {item:?} is not of the form key=value");
    };
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = doc;
    for part in key.split('.') {
        if part.is_empty() {
            bail!("override key {key:?} has an empty component");
        }
        if !slot.is_object() {
            *slot = Value::Object(Default::default());
        }
        slot = slot
            .as_object_mut()
            .expect("object")
            .entry(part.to_string())
            .or_insert(Value::Null);
    }
    *slot = value;
    Ok(())
}
