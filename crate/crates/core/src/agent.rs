//! Tabular Q-learning agent with epsilon-greedy exploration, Q-function
//! transfer between tasks, and the three training/probing oracles used by
//! the curriculum selectors.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{ActionId, Environment, MdpError, Rng, StateId};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("action counts differ: source {source_actions}, target {target_actions}")]
    IncompatibleActions {
        source_actions: usize,
        target_actions: usize,
    },
    #[error("invalid agent config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("q-table csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("q-table csv: {0}")]
    Format(String),
}

/// Dense action-value table, zero-initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            values: vec![0.0; states * actions],
        }
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.values[s * self.actions + a]
    }

    pub fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        self.values[s * self.actions + a] = v;
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.values[s * self.actions..(s + 1) * self.actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self, s: StateId) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action, ties to the lowest index.
    pub fn argmax(&self, s: StateId) -> ActionId {
        let row = self.row(s);
        let mut best = 0;
        for a in 1..row.len() {
            if row[a] > row[best] {
                best = a;
            }
        }
        best
    }

    /// Writes `state,action,value` rows.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), AgentError> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["state", "action", "value"])?;
        for s in 0..self.states {
            for a in 0..self.actions {
                out.write_record([s.to_string(), a.to_string(), self.get(s, a).to_string()])?;
            }
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a table written by [`QTable::write_csv`] with the given shape.
    pub fn read_csv<R: io::Read>(r: R, states: usize, actions: usize) -> Result<Self, AgentError> {
        let mut q = Self::zeros(states, actions);
        let mut rd = csv::Reader::from_reader(r);
        if rd.headers()?.iter().collect::<Vec<_>>() != ["state", "action", "value"] {
            return Err(AgentError::Format("expected header state,action,value".into()));
        }
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| rec.get(i).ok_or_else(|| AgentError::Format("short row".into()));
            let s: usize = parse(0)?.parse().map_err(|_| AgentError::Format("bad state".into()))?;
            let a: usize = parse(1)?.parse().map_err(|_| AgentError::Format("bad action".into()))?;
            let v: f64 = parse(2)?.parse().map_err(|_| AgentError::Format("bad value".into()))?;
            if s >= states || a >= actions {
                return Err(AgentError::Format(format!("entry ({s}, {a}) out of range")));
            }
            q.set(s, a, v);
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    /// Multiplier applied to epsilon after every completed episode.
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    /// Consecutive quiet episodes needed to declare convergence.
    pub convergence_window: usize,
    /// Largest per-episode |dQ| that counts as "unchanged".
    pub convergence_tolerance: f64,
    /// Restart exploration at `epsilon_start` whenever the agent moves to
    /// another task; otherwise epsilon keeps decaying across tasks.
    pub reset_epsilon: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.6,
            discount: 0.9,
            epsilon_start: 1.0,
            epsilon_decay: 0.99,
            epsilon_floor: 0.01,
            convergence_window: 5,
            convergence_tolerance: 1e-4,
            reset_epsilon: true,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        use AgentError::InvalidConfig as E;
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(E("learning_rate must lie in (0, 1]"));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(E("discount must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_floor) {
            return Err(E("epsilon_start and epsilon_floor must lie in [0, 1]"));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return Err(E("epsilon_decay must lie in (0, 1]"));
        }
        if self.convergence_window == 0 {
            return Err(E("convergence_window must be at least 1"));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(E("convergence_tolerance must be positive"));
        }
        Ok(())
    }
}

/// Declares convergence after `window` consecutive episodes that reached a
/// natural end (not the step cap) with every |dQ| below the tolerance.
/// Capped episodes reset the streak: an episode that never sees reward
/// leaves a zero-initialized table untouched without having learned anything.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceMonitor {
    window: usize,
    tolerance: f64,
    streak: usize,
}

impl ConvergenceMonitor {
    pub fn new(window: usize, tolerance: f64) -> Self {
        Self {
            window,
            tolerance,
            streak: 0,
        }
    }

    pub fn reset(&mut self) {
        self.streak = 0;
    }

    pub fn record(&mut self, max_delta: f64, natural_end: bool) -> bool {
        if natural_end && max_delta < self.tolerance {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        self.converged()
    }

    pub fn converged(&self) -> bool {
        self.streak >= self.window
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Train until the convergence monitor fires, or `max_steps` is reached.
    UntilConvergence { max_steps: u64 },
    /// Train for exactly this many steps, cutting the last episode short.
    FixedSteps(u64),
    /// Train for this many episodes, or until `max_steps`.
    Episodes { episodes: u64, max_steps: u64 },
}

impl StopRule {
    pub fn max_steps(&self) -> u64 {
        match *self {
            StopRule::UntilConvergence { max_steps } => max_steps,
            StopRule::FixedSteps(n) => n,
            StopRule::Episodes { max_steps, .. } => max_steps,
        }
    }

    /// Same rule with its step limit lowered to at most `limit`.
    pub fn capped(self, limit: u64) -> Self {
        match self {
            StopRule::UntilConvergence { max_steps } => StopRule::UntilConvergence {
                max_steps: max_steps.min(limit),
            },
            StopRule::FixedSteps(n) => StopRule::FixedSteps(n.min(limit)),
            StopRule::Episodes {
                episodes,
                max_steps,
            } => StopRule::Episodes {
                episodes,
                max_steps: max_steps.min(limit),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub steps: u64,
    pub reward: f64,
    /// Ended inside the MDP (goal or failure), not by the step cap or a budget cut.
    pub natural_end: bool,
    /// Cut short by the training budget.
    pub cut: bool,
    pub max_delta: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub reward: f64,
    pub steps: u64,
    pub episodes: Vec<EpisodeSummary>,
    pub converged: bool,
}

/// The learner: Q table, exploration state and step counter. `Clone` gives a
/// fully independent copy.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub q: QTable,
    pub config: AgentConfig,
    pub monitor: ConvergenceMonitor,
    epsilon: f64,
    steps: u64,
    episodes: u64,
}

impl Agent {
    pub fn new(config: AgentConfig, states: usize, actions: usize) -> Self {
        Self {
            q: QTable::zeros(states, actions),
            monitor: ConvergenceMonitor::new(config.convergence_window, config.convergence_tolerance),
            epsilon: config.epsilon_start,
            config,
            steps: 0,
            episodes: 0,
        }
    }

    pub fn for_env(config: AgentConfig, env: &dyn Environment) -> Self {
        Self::new(config, env.state_count(), env.action_count())
    }

    /// Current exploration rate before the floor is applied.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, eps: f64) {
        self.epsilon = eps.clamp(0.0, 1.0);
    }

    /// Total environment steps this agent has trained for.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Epsilon-greedy action with the configured floor.
    pub fn select_action(&self, s: StateId, rng: &mut Rng) -> ActionId {
        self.select_with(s, self.epsilon.max(self.config.epsilon_floor), rng)
    }

    fn select_with(&self, s: StateId, eps: f64, rng: &mut Rng) -> ActionId {
        if eps > 0.0 && rng.uniform() < eps {
            rng.below(self.q.action_count())
        } else {
            self.q.argmax(s)
        }
    }

    /// One Q-learning backup; returns |dQ|.
    pub fn q_update(&mut self, t: &crate::mdp::Transition) -> f64 {
        let future = if t.absorbing() {
            0.0
        } else {
            self.config.discount * self.q.max_value(t.next_state)
        };
        let old = self.q.get(t.state, t.action);
        let delta = self.config.learning_rate * (t.reward + future - old);
        self.q.set(t.state, t.action, old + delta);
        delta.abs()
    }

    /// Prepares the Q table for training on `to`, transferring values from
    /// the task the agent last trained on (`from`).
    pub fn enter_task(
        &mut self,
        from: Option<&dyn Environment>,
        to: &dyn Environment,
    ) -> Result<(), AgentError> {
        if self.config.reset_epsilon {
            self.epsilon = self.config.epsilon_start;
        }
        match from {
            Some(src) => self.q = transfer_q(&self.q, src, to)?,
            None => {
                if self.q.state_count() != to.state_count() || self.q.action_count() != to.action_count() {
                    self.q = QTable::zeros(to.state_count(), to.action_count());
                }
            }
        }
        Ok(())
    }

    /// Trains on `env` until `stop` fires. The agent is updated in place.
    pub fn tlearn(
        &mut self,
        env: &mut dyn Environment,
        stop: StopRule,
        rng: &mut Rng,
    ) -> Result<TrainReport, AgentError> {
        let mut report = TrainReport::default();
        let limit = stop.max_steps();
        if limit == 0 {
            return Ok(report);
        }
        let (floor, convergence) = match stop {
            StopRule::UntilConvergence { .. } => (0.0, true),
            _ => (self.config.epsilon_floor, false),
        };
        let episode_limit = match stop {
            StopRule::Episodes { episodes, .. } => episodes,
            _ => u64::MAX,
        };
        if episode_limit == 0 {
            return Ok(report);
        }
        self.monitor.reset();
        'episodes: loop {
            let mut s = env.reset(rng);
            let mut ep = EpisodeSummary {
                steps: 0,
                reward: 0.0,
                natural_end: false,
                cut: false,
                max_delta: 0.0,
            };
            let eps = self.epsilon.max(floor);
            loop {
                if report.steps == limit {
                    ep.cut = true;
                    report.episodes.push(ep);
                    break 'episodes;
                }
                let a = self.select_with(s, eps, rng);
                let t = env.step(a, rng)?;
                let d = self.q_update(&t);
                report.steps += 1;
                self.steps += 1;
                report.reward += t.reward;
                ep.steps += 1;
                ep.reward += t.reward;
                ep.max_delta = ep.max_delta.max(d);
                if t.terminal {
                    ep.natural_end = !t.truncated;
                    break;
                }
                s = t.next_state;
            }
            report.episodes.push(ep);
            self.episodes += 1;
            self.epsilon *= self.config.epsilon_decay;
            if convergence && self.monitor.record(ep.max_delta, ep.natural_end) {
                report.converged = true;
                break;
            }
            if report.episodes.len() as u64 >= episode_limit || report.steps == limit {
                break;
            }
        }
        Ok(report)
    }
}

/// Builds a Q table for `target_env` from one learned on `source_env`:
/// entries whose state label exists in both tasks are copied, the rest are 0.
pub fn transfer_q(
    source: &QTable,
    source_env: &dyn Environment,
    target_env: &dyn Environment,
) -> Result<QTable, AgentError> {
    if source.action_count() != target_env.action_count() {
        return Err(AgentError::IncompatibleActions {
            source_actions: source.action_count(),
            target_actions: target_env.action_count(),
        });
    }
    let mut out = QTable::zeros(target_env.state_count(), target_env.action_count());
    for s in 0..target_env.state_count() {
        let label = target_env.label(s);
        if target_env.locate(&label) != Some(s) {
            continue;
        }
        if let Some(src) = source_env.locate(&label) {
            if src < source.state_count() {
                for a in 0..out.action_count() {
                    out.set(s, a, source.get(src, a));
                }
            }
        }
    }
    Ok(out)
}

/// Probe: trains a clone on `env` for `eval_steps` and reports what it
/// collected. `from` is the task the clone's knowledge belongs to.
pub fn evaluate_task(
    clone: &mut Agent,
    from: Option<&dyn Environment>,
    env: &mut dyn Environment,
    eval_steps: u64,
    rng: &mut Rng,
) -> Result<TrainReport, AgentError> {
    clone.enter_task(from, env)?;
    clone.tlearn(env, StopRule::FixedSteps(eval_steps), rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    /// Reward collected on the second task.
    pub reward: f64,
    /// All steps the probe consumed on both tasks.
    pub steps: u64,
}

/// Transfer probe: the clone learns `task_i` (until convergence, at most
/// `source_cap` steps), transfers to `task_j` and trains `measure_steps`
/// there. Both phases together never exceed `limit` steps. Returns the
/// reward on `task_j` and the total steps.
#[allow(clippy::too_many_arguments)]
pub fn transfer_measure(
    clone: &mut Agent,
    from: Option<&dyn Environment>,
    task_i: &mut dyn Environment,
    task_j: &mut dyn Environment,
    source_cap: u64,
    measure_steps: u64,
    limit: u64,
    rng: &mut Rng,
) -> Result<ProbeResult, AgentError> {
    clone.enter_task(from, task_i)?;
    let first_rule = StopRule::UntilConvergence { max_steps: source_cap }.capped(limit);
    let first = clone.tlearn(task_i, first_rule, rng)?;
    clone.enter_task(Some(&*task_i), task_j)?;
    let second_rule = StopRule::FixedSteps(measure_steps).capped(limit - first.steps);
    let second = clone.tlearn(task_j, second_rule, rng)?;
    Ok(ProbeResult {
        reward: second.reward,
        steps: first.steps + second.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{parse_grid_layout, make_maze_env, TableEnv};
    use crate::mdp::Transition;

    fn agent(states: usize, actions: usize) -> Agent {
        Agent::new(AgentConfig::default(), states, actions)
    }

    #[test]
    fn greedy_and_tie_rule() {
        let mut a = agent(1, 3);
        a.config.epsilon_floor = 0.0;
        a.set_epsilon(0.0);
        let mut rng = Rng::new(0);
        assert_eq!(a.select_action(0, &mut rng), 0);
        a.q.set(0, 1, 3.0);
        a.q.set(0, 2, 1.0);
        assert_eq!(a.select_action(0, &mut rng), 1);
    }

    #[test]
    fn update_arithmetic() {
        let mut a = agent(2, 1);
        let t = Transition {
            state: 0,
            action: 0,
            reward: 1.0,
            next_state: 1,
            terminal: true,
            truncated: false,
        };
        assert!((a.q_update(&t) - 0.6).abs() < 1e-15);
        assert!((a.q.get(0, 0) - 0.6).abs() < 1e-15);
        let z = Transition {
            reward: 0.0,
            state: 1,
            next_state: 1,
            terminal: false,
            ..t
        };
        assert_eq!(a.q_update(&z), 0.0);
        assert_eq!(a.q.get(1, 0), 0.0);
    }

    #[test]
    fn truncated_step_bootstraps() {
        let mut a = agent(2, 1);
        a.q.set(1, 0, 1.0);
        let t = Transition {
            state: 0,
            action: 0,
            reward: 0.0,
            next_state: 1,
            terminal: true,
            truncated: true,
        };
        a.q_update(&t);
        assert!((a.q.get(0, 0) - 0.6 * 0.9).abs() < 1e-15);
    }

    #[test]
    fn clone_is_isolated() {
        let a = agent(3, 2);
        let mut b = a.clone();
        assert_eq!(a, b);
        b.q.set(0, 0, 5.0);
        assert_eq!(a.q.get(0, 0), 0.0);
    }

    #[test]
    fn zero_budget_is_a_no_op() {
        let mut env = TableEnv::corridor(3, 50);
        let mut a = Agent::for_env(AgentConfig::default(), &env);
        let before = a.clone();
        let r = a.tlearn(&mut env, StopRule::FixedSteps(0), &mut Rng::new(0)).unwrap();
        assert_eq!((r.reward, r.steps), (0.0, 0));
        assert_eq!(a, before);
    }

    #[test]
    fn fixed_steps_is_exact() {
        let mut env = TableEnv::corridor(4, 50);
        let mut a = Agent::for_env(AgentConfig::default(), &env);
        let r = a.tlearn(&mut env, StopRule::FixedSteps(137), &mut Rng::new(2)).unwrap();
        assert_eq!(r.steps, 137);
        assert_eq!(r.episodes.iter().map(|e| e.steps).sum::<u64>(), 137);
        assert_eq!(a.steps(), 137);
    }

    #[test]
    fn converges_on_two_cell_corridor() {
        let mut env = TableEnv::corridor(2, 20);
        let mut a = Agent::for_env(AgentConfig::default(), &env);
        let r = a
            .tlearn(&mut env, StopRule::UntilConvergence { max_steps: 100_000 }, &mut Rng::new(4))
            .unwrap();
        assert!(r.converged);
        assert_eq!(a.q.argmax(1), 0);
    }

    #[test]
    fn transfer_identity_and_disjoint() {
        let l = parse_grid_layout("G..\n...").unwrap();
        let env = make_maze_env(l.clone());
        let mut q = QTable::zeros(6, 4);
        for i in 0..24 {
            q.values[i] = i as f64;
        }
        assert_eq!(transfer_q(&q, &env, &env).unwrap(), q);

        let left = make_maze_env(parse_grid_layout("G.#\n###").unwrap());
        let right = make_maze_env(parse_grid_layout("##.\nG..").unwrap());
        let moved = transfer_q(&q, &left, &right).unwrap();
        assert!(moved.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transfer_rejects_action_mismatch() {
        let q = QTable::zeros(3, 2);
        let env = make_maze_env(parse_grid_layout("G..").unwrap());
        assert!(matches!(
            transfer_q(&q, &env, &env),
            Err(AgentError::IncompatibleActions { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let mut q = QTable::zeros(2, 2);
        q.set(1, 0, 0.25);
        q.set(0, 1, -3.5);
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"state,action,value\n"));
        assert_eq!(QTable::read_csv(&buf[..], 2, 2).unwrap(), q);
    }
}
