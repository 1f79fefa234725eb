//! Experiment configuration files (TOML).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, StopRule};
use crate::selectors::{ProbeConfig, TaskId};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Maze,
    Gridworld,
    Cartpole,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SelectorKind {
    Baseline,
    Rmgs,
    Ltms,
    ActiveRmgs,
    ActiveLtms,
    Fixed(Vec<TaskId>),
}

impl SelectorKind {
    pub fn is_active(&self) -> bool {
        matches!(self, SelectorKind::ActiveRmgs | SelectorKind::ActiveLtms)
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectorKind::Baseline => f.write_str("baseline"),
            SelectorKind::Rmgs => f.write_str("rmgs"),
            SelectorKind::Ltms => f.write_str("ltms"),
            SelectorKind::ActiveRmgs => f.write_str("active_rmgs"),
            SelectorKind::ActiveLtms => f.write_str("active_ltms"),
            SelectorKind::Fixed(p) => write!(f, "fixed:{}", format_permutation(p)),
        }
    }
}

impl FromStr for SelectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "baseline" => SelectorKind::Baseline,
            "rmgs" => SelectorKind::Rmgs,
            "ltms" => SelectorKind::Ltms,
            "active_rmgs" => SelectorKind::ActiveRmgs,
            "active_ltms" => SelectorKind::ActiveLtms,
            _ => match s.strip_prefix("fixed:") {
                Some(rest) => SelectorKind::Fixed(parse_permutation(rest)?),
                None => return Err(format!("unknown selector `{s}`")),
            },
        })
    }
}

impl TryFrom<String> for SelectorKind {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SelectorKind> for String {
    fn from(k: SelectorKind) -> Self {
        k.to_string()
    }
}

/// `0-1-2-3`.
pub fn format_permutation(p: &[TaskId]) -> String {
    p.iter().map(|t| t.to_string()).collect::<Vec<_>>().join("-")
}

pub fn parse_permutation(s: &str) -> Result<Vec<TaskId>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split('-')
        .map(|t| t.parse::<TaskId>().map_err(|_| format!("bad task id `{t}` in `{s}`")))
        .collect()
}

/// Serializable form of a training stop rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleConfig {
    Convergence { max_steps: u64 },
    Fixed { steps: u64 },
    Episodes { episodes: u64, max_steps: u64 },
    /// Whatever is left of the total budget.
    Remaining,
}

impl RuleConfig {
    pub fn to_rule(self) -> StopRule {
        match self {
            RuleConfig::Convergence { max_steps } => StopRule::UntilConvergence { max_steps },
            RuleConfig::Fixed { steps } => StopRule::FixedSteps(steps),
            RuleConfig::Episodes { episodes, max_steps } => StopRule::Episodes { episodes, max_steps },
            RuleConfig::Remaining => StopRule::FixedSteps(u64::MAX),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    /// Total step budget T; absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<u64>,
    pub stage: RuleConfig,
    pub target: RuleConfig,
    /// Episode count for the total-reward criterion.
    #[serde(default = "default_reward_episodes")]
    pub reward_episodes: usize,
}

fn default_reward_episodes() -> usize {
    220
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveConfig {
    /// Measurements per Active-RMGS decision (b).
    #[serde(default = "default_per_step")]
    pub per_step: usize,
    /// Measured pairs for Active-LTMS (p).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    /// Active-RMGS prune threshold (rho).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune_below: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversity: Option<f64>,
    #[serde(default = "default_feature_epsilon")]
    pub feature_epsilon: f64,
}

fn default_per_step() -> usize {
    1
}

fn default_feature_epsilon() -> f64 {
    1e-6
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self {
            per_step: default_per_step(),
            pairs: None,
            prune_below: None,
            diversity: None,
            feature_epsilon: default_feature_epsilon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    pub evaluate_steps: u64,
    pub measure_steps: u64,
    #[serde(default = "default_source_cap")]
    pub source_cap: u64,
}

fn default_source_cap() -> u64 {
    20_000
}

impl ProbeSettings {
    pub fn to_probe(&self) -> ProbeConfig {
        ProbeConfig {
            evaluate_steps: self.evaluate_steps,
            measure_steps: self.measure_steps,
            source_cap: self.source_cap,
        }
    }
}

/// A grid source: its own layout file, a kept region of the target, or the
/// target with another start cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GridSource {
    Layout { layout: PathBuf },
    /// `[top, left, bottom, right]`, inclusive.
    Keep { keep: [usize; 4] },
    Start { start: [usize; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDomain {
    pub target: PathBuf,
    pub sources: Vec<GridSource>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub x_bound: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartPoleDomain {
    pub target: Bounds,
    pub sources: Vec<Bounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<[usize; 4]>,
    /// Half-widths of the discretized box for (x, v, theta, omega).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub selectors: Vec<SelectorKind>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_enumerate_cap")]
    pub enumerate_cap: usize,
    #[serde(default)]
    pub agent: AgentConfig,
    pub probe: ProbeSettings,
    pub budget: BudgetConfig,
    #[serde(default)]
    pub active: ActiveConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maze: Option<GridDomain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gridworld: Option<GridDomain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cartpole: Option<CartPoleDomain>,
    /// Directory relative paths are resolved against; set by `load`.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_runs() -> usize {
    30
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_enumerate_cap() -> usize {
    6
}

fn invalid(field: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: field.to_string(),
        message: msg.into(),
    }
}

impl ExperimentConfig {
    /// Parses and validates a config without touching the file system.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, parses and validates a config file; relative paths inside it
    /// are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.check_files()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    pub fn source_count(&self) -> usize {
        match self.domain {
            Domain::Maze => self.maze.as_ref().map_or(0, |g| g.sources.len()),
            Domain::Gridworld => self.gridworld.as_ref().map_or(0, |g| g.sources.len()),
            Domain::Cartpole => self.cartpole.as_ref().map_or(0, |c| c.sources.len()),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.runs == 0 {
            return Err(invalid("runs", "must be at least 1"));
        }
        if self.selectors.is_empty() {
            return Err(invalid("selectors", "must list at least one selector"));
        }
        self.agent.validate().map_err(|e| invalid("agent", e.to_string()))?;
        if self.probe.evaluate_steps == 0 || self.probe.measure_steps == 0 {
            return Err(invalid("probe", "step counts must be positive"));
        }
        if self.budget.total == Some(0) {
            return Err(invalid("budget.total", "must be positive when given"));
        }
        for (name, rule) in [("budget.stage", self.budget.stage), ("budget.target", self.budget.target)] {
            match rule {
                RuleConfig::Remaining if self.budget.total.is_none() => {
                    return Err(invalid(name, "`remaining` needs budget.total"));
                }
                RuleConfig::Convergence { max_steps: 0 }
                | RuleConfig::Fixed { steps: 0 }
                | RuleConfig::Episodes { max_steps: 0, .. } => {
                    return Err(invalid(name, "step limit must be positive"));
                }
                _ => {}
            }
        }
        if self.active.per_step == 0 {
            return Err(invalid("active.per_step", "must be at least 1"));
        }
        if !(self.active.feature_epsilon > 0.0) {
            return Err(invalid("active.feature_epsilon", "must be positive"));
        }
        let domain_present = match self.domain {
            Domain::Maze => self.maze.is_some(),
            Domain::Gridworld => self.gridworld.is_some(),
            Domain::Cartpole => self.cartpole.is_some(),
        };
        if !domain_present {
            let name = format!("{:?}", self.domain).to_lowercase();
            return Err(invalid(&name, "section required for this domain"));
        }
        let k = self.source_count();
        for s in &self.selectors {
            match s {
                SelectorKind::ActiveLtms => {
                    let p = self.active.pairs.ok_or_else(|| invalid("active.pairs", "required by active_ltms"))?;
                    if p > k * k {
                        return Err(invalid("active.pairs", format!("at most {} pairs exist", k * k)));
                    }
                }
                SelectorKind::Fixed(perm) => {
                    let mut seen = vec![false; k];
                    for &t in perm {
                        if t >= k || seen[t] {
                            return Err(invalid("selectors", format!("`{s}` is not a valid curriculum over {k} tasks")));
                        }
                        seen[t] = true;
                    }
                }
                _ => {}
            }
            if (s.is_active() || matches!(s, SelectorKind::Rmgs | SelectorKind::Ltms)) && k == 0 {
                return Err(invalid("sources", format!("`{s}` needs at least one source task")));
            }
        }
        if let Some(c) = &self.cartpole {
            for b in std::iter::once(&c.target).chain(&c.sources) {
                if !(b.x_bound > 0.0 && b.angle_deg > 0.0 && b.angle_deg < 90.0) {
                    return Err(invalid("cartpole", "bounds must be positive, angles below 90 degrees"));
                }
            }
        }
        Ok(())
    }

    fn check_files(&self) -> Result<(), HarnessError> {
        let grid = match self.domain {
            Domain::Maze => self.maze.as_ref(),
            Domain::Gridworld => self.gridworld.as_ref(),
            Domain::Cartpole => None,
        };
        if let Some(g) = grid {
            let mut paths = vec![g.target.clone()];
            paths.extend(g.sources.iter().filter_map(|s| match s {
                GridSource::Layout { layout } => Some(layout.clone()),
                _ => None,
            }));
            for p in paths {
                let full = self.resolve(&p);
                if !full.is_file() {
                    return Err(invalid("layout", format!("{} does not exist", full.display())));
                }
            }
        }
        Ok(())
    }

    pub fn run_config(&self) -> crate::orchestrator::RunConfig {
        crate::orchestrator::RunConfig {
            stage_rule: self.budget.stage.to_rule(),
            target_rule: self.budget.target.to_rule(),
            total_budget: self.budget.total,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
domain = "maze"
selectors = ["baseline", "rmgs"]

[probe]
evaluate_steps = 200
measure_steps = 300

[budget]
stage = { kind = "convergence", max_steps = 100000 }
target = { kind = "convergence", max_steps = 100000 }

[maze]
target = "target.txt"
sources = [{ keep = [0, 0, 3, 3] }, { layout = "a.txt" }]
"#;

    #[test]
    fn defaults_filled() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.runs, 30);
        assert_eq!(c.agent.discount, 0.9);
        assert_eq!(c.agent.learning_rate, 0.6);
        assert_eq!(c.agent.convergence_window, 5);
        assert_eq!(c.probe.source_cap, 20_000);
        assert_eq!(c.active.per_step, 1);
        assert_eq!(c.budget.reward_episodes, 220);
        assert_eq!(c.source_count(), 2);
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        let again = ExperimentConfig::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_bad_fields() {
        let zero = MINIMAL.replace("selectors", "runs = 0\nselectors");
        match ExperimentConfig::parse(&zero) {
            Err(HarnessError::Config { field, .. }) => assert_eq!(field, "runs"),
            other => panic!("{other:?}"),
        }
        let fixed = MINIMAL.replace("\"rmgs\"", "\"fixed:0-0\"");
        assert!(ExperimentConfig::parse(&fixed).is_err());
        let active = MINIMAL.replace("\"rmgs\"", "\"active_ltms\"");
        assert!(ExperimentConfig::parse(&active).is_err());
        let typo = MINIMAL.replace("runs", "rnus");
        let typo = typo.replace("selectors =", "rnus = 3\nselectors =");
        assert!(matches!(ExperimentConfig::parse(&typo), Err(HarnessError::Parse(_))));
    }

    #[test]
    fn selector_names() {
        for s in ["baseline", "rmgs", "ltms", "active_rmgs", "active_ltms", "fixed:2-0-1"] {
            assert_eq!(s.parse::<SelectorKind>().unwrap().to_string(), s);
        }
        assert!("greedy".parse::<SelectorKind>().is_err());
        assert!("fixed:1-x".parse::<SelectorKind>().is_err());
    }
}
