//! The curriculum loop: preprocess, then alternate selection and training
//! on source tasks, then train on the target with whatever budget is left.

use thiserror::Error;

use crate::agent::{Agent, AgentError, StopRule, TrainReport};
use crate::mdp::{Environment, Rng};
use crate::selectors::{SelectCtx, SelectError, Selector, StepBudget, TaskId, TransferMatrix};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Select(#[from] SelectError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    /// Training rule for each curriculum stage.
    pub stage_rule: StopRule,
    /// Training rule for the target phase.
    pub target_rule: StopRule,
    /// Total step budget T shared by probes and training; `None` is unbounded.
    pub total_budget: Option<u64>,
}

/// Step accounting for one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BudgetLedger {
    pub total: Option<u64>,
    pub preprocess: u64,
    /// Probe steps of each selection step.
    pub selection: Vec<u64>,
    /// Training steps of each selection step (0 when nothing was chosen).
    pub training: Vec<u64>,
    pub target: u64,
}

impl BudgetLedger {
    /// Steps spent before the target phase, g(T).
    pub fn curriculum_cost(&self) -> u64 {
        self.preprocess + self.selection.iter().sum::<u64>() + self.training.iter().sum::<u64>()
    }

    pub fn total_spent(&self) -> u64 {
        self.curriculum_cost() + self.target
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    /// Chosen task, or `None` when the step only pruned candidates.
    pub task: Option<TaskId>,
    pub skipped: Vec<TaskId>,
    pub selection_steps: u64,
    pub training: TrainReport,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub agent: Agent,
    pub curriculum: Vec<TaskId>,
    pub stages: Vec<Stage>,
    pub ledger: BudgetLedger,
    /// Target-phase training; `None` when the budget ran out first.
    pub target: Option<TrainReport>,
    pub budget_exhausted: bool,
    pub matrix: Option<TransferMatrix>,
}

impl RunResult {
    pub fn target_converged(&self) -> bool {
        self.target.as_ref().is_some_and(|t| t.converged)
    }
}

/// Runs one curriculum over `sources` followed by the target phase.
pub fn run_active_simulators(
    mut agent: Agent,
    sources: &[Box<dyn Environment>],
    target: &dyn Environment,
    selector: &mut dyn Selector,
    config: &RunConfig,
    rng: &mut Rng,
) -> Result<RunResult, RunError> {
    let mut budget = StepBudget::new(config.total_budget);
    let mut ledger = BudgetLedger {
        total: config.total_budget,
        ..BudgetLedger::default()
    };
    let mut remaining: Vec<TaskId> = (0..sources.len()).collect();
    let mut curriculum: Vec<TaskId> = Vec::new();
    let mut stages = Vec::new();
    let mut current: Option<TaskId> = None;
    let mut exhausted = false;

    let env_of = |t: Option<TaskId>| t.map(|k| sources[k].as_ref());

    if !remaining.is_empty() {
        let mut ctx = SelectCtx {
            agent: &agent,
            current: None,
            sources,
            target,
            remaining: &remaining,
            curriculum: &curriculum,
            budget: &mut budget,
            rng,
        };
        ledger.preprocess = selector.preprocess(&mut ctx)?;
    }

    while !remaining.is_empty() {
        if budget.exhausted() {
            exhausted = true;
            break;
        }
        let sel = {
            let mut ctx = SelectCtx {
                agent: &agent,
                current: env_of(current),
                sources,
                target,
                remaining: &remaining,
                curriculum: &curriculum,
                budget: &mut budget,
                rng,
            };
            selector.select(&mut ctx)?
        };
        remaining.retain(|k| !sel.skipped.contains(k));
        ledger.selection.push(sel.steps);
        let training = match sel.task {
            Some(k) => {
                let rule = config.stage_rule.capped(budget.allow(u64::MAX));
                let mut env = sources[k].box_clone();
                agent.enter_task(env_of(current), env.as_ref())?;
                let rep = agent.tlearn(env.as_mut(), rule, rng)?;
                budget.spend(rep.steps);
                current = Some(k);
                curriculum.push(k);
                remaining.retain(|&r| r != k);
                rep
            }
            None => TrainReport::default(),
        };
        ledger.training.push(training.steps);
        let stalled = sel.task.is_none() && sel.skipped.is_empty();
        stages.push(Stage {
            task: sel.task,
            skipped: sel.skipped,
            selection_steps: sel.steps,
            training,
        });
        if stalled {
            break;
        }
    }

    let mut target_report = None;
    if exhausted || budget.exhausted() {
        exhausted = true;
    } else {
        let rule = config.target_rule.capped(budget.allow(u64::MAX));
        let mut env = target.box_clone();
        agent.enter_task(env_of(current), env.as_ref())?;
        let rep = agent.tlearn(env.as_mut(), rule, rng)?;
        budget.spend(rep.steps);
        ledger.target = rep.steps;
        target_report = Some(rep);
    }

    Ok(RunResult {
        agent,
        curriculum,
        stages,
        ledger,
        target: target_report,
        budget_exhausted: exhausted,
        matrix: selector.transfer_matrix().cloned(),
    })
}

/// Total steps to reach target convergence, curriculum cost included.
/// `None` when the target never converged.
pub fn time_to_threshold(result: &RunResult) -> Option<u64> {
    let t = result.target.as_ref()?;
    t.converged.then(|| result.ledger.curriculum_cost() + t.steps)
}

/// Reward over the first `episodes` target episodes. The flag is false when
/// fewer episodes were run.
pub fn total_reward(result: &RunResult, episodes: usize) -> (f64, bool) {
    let Some(t) = result.target.as_ref() else {
        return (0.0, episodes == 0);
    };
    let sum = t.episodes.iter().take(episodes).map(|e| e.reward).sum();
    (sum, t.episodes.len() >= episodes)
}
