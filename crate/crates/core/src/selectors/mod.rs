//! Strategies for choosing the next training task of a curriculum.
//!
//! Every probe runs on a clone of the agent and a copy of the task, so the
//! master agent is never disturbed. Each probe draws its own random stream,
//! derived from one fork of the caller's stream and the probe's identity,
//! which keeps probe outcomes independent of the order they are run in.

pub mod features;
pub mod matrix;

use thiserror::Error;

use crate::agent::{evaluate_task, transfer_measure, Agent, AgentError, ProbeResult};
use crate::mdp::{Environment, Rng};
use crate::regression::{cold_start_pick, select_sample, DesignState, RegressionError};

pub use features::{
    diversity_keep, diversity_score, gridworld_task_feature, maze_task_feature, pair_feature,
    sequence_feature, sequence_task_feature, TaskFeatures,
};
pub use matrix::{ltms_chain, Provenance, TransferMatrix};

/// Index of a source task; the target uses index K.
pub type TaskId = usize;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error("features: {0}")]
    Features(String),
    #[error("curriculum plan exhausted")]
    PlanExhausted,
    #[error("pair budget {budget} is below the feature dimension {dim}")]
    PairBudget { budget: usize, dim: usize },
    #[error("no remaining tasks to select from")]
    NothingToSelect,
}

/// Step counts used by the probing oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    /// Steps per reward-maximizing probe.
    pub evaluate_steps: u64,
    /// Steps on the second task of a transfer probe.
    pub measure_steps: u64,
    /// Cap on learning the first task of a transfer probe.
    pub source_cap: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            evaluate_steps: 200,
            measure_steps: 300,
            source_cap: 20_000,
        }
    }
}

/// Remaining step allowance shared by probes and training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBudget {
    remaining: Option<u64>,
}

impl StepBudget {
    pub fn new(total: Option<u64>) -> Self {
        Self { remaining: total }
    }

    pub fn unbounded() -> Self {
        Self { remaining: None }
    }

    pub fn remaining(&self) -> Option<u64> {
        self.remaining
    }

    pub fn exhausted(&self) -> bool {
        self.remaining == Some(0)
    }

    /// How much of a request of `n` steps may be granted.
    pub fn allow(&self, n: u64) -> u64 {
        self.remaining.map_or(n, |r| r.min(n))
    }

    pub fn spend(&mut self, n: u64) {
        if let Some(r) = &mut self.remaining {
            *r = r.saturating_sub(n);
        }
    }
}

/// What a selector sees at a decision point.
pub struct SelectCtx<'a> {
    pub agent: &'a Agent,
    /// Task the agent last trained on; probes transfer from it.
    pub current: Option<&'a dyn Environment>,
    pub sources: &'a [Box<dyn Environment>],
    pub target: &'a dyn Environment,
    pub remaining: &'a [TaskId],
    pub curriculum: &'a [TaskId],
    pub budget: &'a mut StepBudget,
    pub rng: &'a mut Rng,
}

impl SelectCtx<'_> {
    fn env(&self, j: TaskId) -> &dyn Environment {
        if j == self.sources.len() {
            self.target
        } else {
            self.sources[j].as_ref()
        }
    }

    /// Reward-maximizing probe of task `k` on a fresh clone.
    pub fn probe_evaluate(&mut self, k: TaskId, steps: u64, rng: &mut Rng) -> Result<(f64, u64), SelectError> {
        let mut clone = self.agent.clone();
        let mut env = self.env(k).box_clone();
        let grant = self.budget.allow(steps);
        let rep = evaluate_task(&mut clone, self.current, env.as_mut(), grant, rng)?;
        self.budget.spend(rep.steps);
        Ok((rep.reward, rep.steps))
    }

    /// Transfer probe from source `i` into task `j` on a fresh clone.
    pub fn probe_transfer(
        &mut self,
        i: TaskId,
        j: TaskId,
        probe: &ProbeConfig,
        rng: &mut Rng,
    ) -> Result<ProbeResult, SelectError> {
        let mut clone = self.agent.clone();
        let mut env_i = self.env(i).box_clone();
        let mut env_j = self.env(j).box_clone();
        let limit = self.budget.allow(u64::MAX);
        let r = transfer_measure(
            &mut clone,
            self.current,
            env_i.as_mut(),
            env_j.as_mut(),
            probe.source_cap,
            probe.measure_steps,
            limit,
            rng,
        )?;
        self.budget.spend(r.steps);
        Ok(r)
    }
}

/// Outcome of one selection step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Selection {
    /// Task to train on next, or `None` when every candidate was pruned.
    pub task: Option<TaskId>,
    /// Tasks removed from consideration for good.
    pub skipped: Vec<TaskId>,
    /// Environment steps spent by probes.
    pub steps: u64,
}

pub trait Selector: Send {
    fn name(&self) -> &str;

    /// One-off work before the curriculum loop; returns steps spent.
    fn preprocess(&mut self, _ctx: &mut SelectCtx<'_>) -> Result<u64, SelectError> {
        Ok(0)
    }

    fn select(&mut self, ctx: &mut SelectCtx<'_>) -> Result<Selection, SelectError>;

    fn transfer_matrix(&self) -> Option<&TransferMatrix> {
        None
    }
}

fn argmax_first(values: &[(TaskId, f64)]) -> Option<TaskId> {
    let mut best: Option<(TaskId, f64)> = None;
    for &(k, v) in values {
        match best {
            Some((bk, bv)) if v < bv || (v == bv && k > bk) => {}
            _ => best = Some((k, v)),
        }
    }
    best.map(|(k, _)| k)
}

fn sorted(ids: &[TaskId]) -> Vec<TaskId> {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v
}

/// Probes every remaining task on a clone and returns the task with the
/// highest reward (ties to the lowest id) together with all rewards.
pub fn rmgs_select(ctx: &mut SelectCtx<'_>, probe: &ProbeConfig) -> Result<(Selection, Vec<(TaskId, f64)>), SelectError> {
    let remaining = sorted(ctx.remaining);
    if remaining.is_empty() {
        return Err(SelectError::NothingToSelect);
    }
    let base = ctx.rng.fork().seed();
    let mut steps = 0;
    let mut rewards = Vec::with_capacity(remaining.len());
    for &k in &remaining {
        let mut rng = Rng::child(base, k as u64);
        let (r, s) = ctx.probe_evaluate(k, probe.evaluate_steps, &mut rng)?;
        steps += s;
        rewards.push((k, r));
    }
    let sel = Selection {
        task: argmax_first(&rewards),
        skipped: Vec::new(),
        steps,
    };
    Ok((sel, rewards))
}

/// Reward Maximizing Greedy Selector.
#[derive(Debug, Clone)]
pub struct Rmgs {
    probe: ProbeConfig,
}

impl Rmgs {
    pub fn new(probe: ProbeConfig) -> Self {
        Self { probe }
    }
}

impl Selector for Rmgs {
    fn name(&self) -> &str {
        "rmgs"
    }

    fn select(&mut self, ctx: &mut SelectCtx<'_>) -> Result<Selection, SelectError> {
        Ok(rmgs_select(ctx, &self.probe)?.0)
    }
}

fn cell_seed(k: usize, i: TaskId, j: TaskId) -> u64 {
    (i * (k + 1) + j) as u64
}

/// Measures every off-diagonal entry of the transferability matrix with
/// transfer probes from clones of the current agent.
pub fn ltms_preprocess(ctx: &mut SelectCtx<'_>, probe: &ProbeConfig) -> Result<(TransferMatrix, u64), SelectError> {
    let k = ctx.sources.len();
    let mut f = TransferMatrix::new(k);
    let base = ctx.rng.fork().seed();
    let mut steps = 0;
    for (i, j) in f.cells() {
        let mut rng = Rng::child(base, cell_seed(k, i, j));
        let r = ctx.probe_transfer(i, j, probe, &mut rng)?;
        f.set(i, j, r.reward, Provenance::Measured);
        steps += r.steps;
    }
    Ok((f, steps))
}

/// Serves a precomputed curriculum one task at a time, skipping entries
/// that are no longer remaining.
#[derive(Debug, Clone, Default)]
struct Plan {
    order: Option<Vec<TaskId>>,
    cursor: usize,
}

impl Plan {
    fn next(&mut self, remaining: &[TaskId]) -> Result<TaskId, SelectError> {
        let order = self.order.as_ref().ok_or(SelectError::PlanExhausted)?;
        while self.cursor < order.len() {
            let t = order[self.cursor];
            self.cursor += 1;
            if remaining.contains(&t) {
                return Ok(t);
            }
        }
        Err(SelectError::PlanExhausted)
    }
}

/// Local Transfer Maximizing Selector.
#[derive(Debug, Clone)]
pub struct Ltms {
    probe: ProbeConfig,
    matrix: Option<TransferMatrix>,
    plan: Plan,
}

impl Ltms {
    pub fn new(probe: ProbeConfig) -> Self {
        Self {
            probe,
            matrix: None,
            plan: Plan::default(),
        }
    }

    /// Selector over an already-known matrix (no preprocessing cost).
    pub fn with_matrix(f: TransferMatrix) -> Self {
        Self {
            probe: ProbeConfig::default(),
            matrix: Some(f),
            plan: Plan::default(),
        }
    }
}

impl Selector for Ltms {
    fn name(&self) -> &str {
        "ltms"
    }

    fn preprocess(&mut self, ctx: &mut SelectCtx<'_>) -> Result<u64, SelectError> {
        if self.matrix.is_some() {
            return Ok(0);
        }
        let (f, steps) = ltms_preprocess(ctx, &self.probe)?;
        self.matrix = Some(f);
        Ok(steps)
    }

    fn select(&mut self, ctx: &mut SelectCtx<'_>) -> Result<Selection, SelectError> {
        if self.plan.order.is_none() {
            let f = self.matrix.as_ref().ok_or(SelectError::PlanExhausted)?;
            self.plan.order = Some(ltms_chain(f, ctx.remaining));
        }
        Ok(Selection {
            task: Some(self.plan.next(ctx.remaining)?),
            skipped: Vec::new(),
            steps: 0,
        })
    }

    fn transfer_matrix(&self) -> Option<&TransferMatrix> {
        self.matrix.as_ref()
    }
}

/// Chooses up to `budget` of `vectors` to measure, one at a time: the
/// candidate with the largest trace gain once `(XᵀX)⁻¹` exists, before that
/// the largest-norm candidate that raises the design's rank. Each
/// measurement is appended to `design`. Returns the measured values by
/// candidate index.
pub fn active_acquire<M>(
    design: &mut DesignState,
    vectors: &[Vec<f64>],
    budget: usize,
    mut measure: M,
) -> Result<Vec<Option<f64>>, SelectError>
where
    M: FnMut(usize) -> Result<f64, SelectError>,
{
    let mut measured: Vec<Option<f64>> = vec![None; vectors.len()];
    for _ in 0..budget.min(vectors.len()) {
        let open: Vec<usize> = (0..vectors.len()).filter(|&i| measured[i].is_none()).collect();
        let cands: Vec<Vec<f64>> = open.iter().map(|&i| vectors[i].clone()).collect();
        let pick = match design.inverse() {
            Some(a) => select_sample(a, &cands)?,
            None => cold_start_pick(design.rows(), &cands).unwrap_or_else(|| largest_norm(&cands)),
        };
        let idx = open[pick];
        let y = measure(idx)?;
        design.push(vectors[idx].clone(), y)?;
        measured[idx] = Some(y);
    }
    Ok(measured)
}

fn largest_norm(cands: &[Vec<f64>]) -> usize {
    let norm = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>();
    let mut best = 0;
    for i in 1..cands.len() {
        if norm(&cands[i]) > norm(&cands[best]) {
            best = i;
        }
    }
    best
}

/// Active Reward Maximizing Greedy Selector: measures only `per_step`
/// sequence-task pairs per decision and predicts the rest with a linear
/// model that is refit after every measurement.
#[derive(Debug, Clone)]
pub struct ActiveRmgs {
    probe: ProbeConfig,
    features: TaskFeatures,
    design: DesignState,
    per_step: usize,
    prune_below: Option<f64>,
    diversity: Option<f64>,
}

impl ActiveRmgs {
    pub fn new(probe: ProbeConfig, features: TaskFeatures, per_step: usize) -> Self {
        let dim = features.raw_dim() + 1;
        Self {
            probe,
            features,
            design: DesignState::new(dim),
            per_step: per_step.max(1),
            prune_below: None,
            diversity: None,
        }
    }

    /// Tasks whose measured or predicted value falls below `rho` are dropped.
    pub fn with_prune_threshold(mut self, rho: Option<f64>) -> Self {
        self.prune_below = rho;
        self
    }

    pub fn with_diversity_threshold(mut self, t: Option<f64>) -> Self {
        self.diversity = t;
        self
    }

    pub fn design(&self) -> &DesignState {
        &self.design
    }
}

fn diversity_split(
    features: &TaskFeatures,
    candidates: &[TaskId],
    curriculum: &[TaskId],
    threshold: Option<f64>,
) -> (Vec<TaskId>, Vec<TaskId>) {
    let Some(t) = threshold else {
        return (candidates.to_vec(), Vec::new());
    };
    let members: Vec<&[f64]> = curriculum.iter().map(|&c| features.raw(c)).collect();
    candidates
        .iter()
        .partition(|&&k| diversity_keep(features.raw(k), &members, t))
}

impl Selector for ActiveRmgs {
    fn name(&self) -> &str {
        "active_rmgs"
    }

    fn select(&mut self, ctx: &mut SelectCtx<'_>) -> Result<Selection, SelectError> {
        let remaining = sorted(ctx.remaining);
        if remaining.is_empty() {
            return Err(SelectError::NothingToSelect);
        }
        let (open, mut skipped) = diversity_split(&self.features, &remaining, ctx.curriculum, self.diversity);

        let mut steps = 0;
        let mut values: Vec<(TaskId, f64)> = Vec::new();
        if ctx.curriculum.is_empty() {
            let (sel, rewards) = rmgs_select(ctx, &self.probe)?;
            steps += sel.steps;
            values = rewards.into_iter().filter(|(k, _)| open.contains(k)).collect();
        } else if !open.is_empty() {
            let vectors = open
                .iter()
                .map(|&k| self.features.sequence_task(ctx.curriculum, k))
                .collect::<Result<Vec<_>, _>>()?;
            let base = ctx.rng.fork().seed();
            let probe = self.probe;
            let measured = active_acquire(&mut self.design, &vectors, self.per_step, |idx| {
                let k = open[idx];
                let mut rng = Rng::child(base, k as u64);
                let (r, s) = ctx.probe_evaluate(k, probe.evaluate_steps, &mut rng)?;
                steps += s;
                Ok(r)
            })?;
            let predictive = self.design.len() >= self.design.dim();
            for (idx, &k) in open.iter().enumerate() {
                match measured[idx] {
                    Some(y) => values.push((k, y)),
                    None if predictive => values.push((k, self.design.predict(&vectors[idx])?)),
                    None => {}
                }
            }
        }

        if let Some(rho) = self.prune_below {
            let (keep, drop): (Vec<_>, Vec<_>) = values.into_iter().partition(|&(_, v)| v >= rho);
            skipped.extend(drop.into_iter().map(|(k, _)| k));
            values = keep;
        }
        skipped.sort_unstable();
        Ok(Selection {
            task: argmax_first(&values),
            skipped,
            steps,
        })
    }
}

/// Estimates the transferability matrix from `pairs` measured entries: the
/// pairs are chosen by A-optimal active learning over pair features, the
/// rest are predicted by the fitted linear model.
pub fn active_ltms_estimate(
    ctx: &mut SelectCtx<'_>,
    probe: &ProbeConfig,
    features: &TaskFeatures,
    pairs: usize,
) -> Result<(TransferMatrix, u64, bool), SelectError> {
    let k = ctx.sources.len();
    let mut f = TransferMatrix::new(k);
    let cells = f.cells();
    let dim = features.pair_dim();
    if pairs < dim {
        return Err(SelectError::PairBudget { budget: pairs, dim });
    }
    let vectors: Vec<Vec<f64>> = cells.iter().map(|&(i, j)| features.pair(i, j).to_vec()).collect();
    let base = ctx.rng.fork().seed();
    let mut design = DesignState::new(dim);
    let mut steps = 0;
    let measured = active_acquire(&mut design, &vectors, pairs, |idx| {
        let (i, j) = cells[idx];
        let mut rng = Rng::child(base, cell_seed(k, i, j));
        let r = ctx.probe_transfer(i, j, probe, &mut rng)?;
        steps += r.steps;
        Ok(r.reward)
    })?;
    for (idx, &(i, j)) in cells.iter().enumerate() {
        match measured[idx] {
            Some(y) => f.set(i, j, y, Provenance::Measured),
            None => f.set(i, j, design.predict(&vectors[idx])?, Provenance::Predicted),
        }
    }
    Ok((f, steps, design.used_ridge()))
}

/// Active Local Transfer Maximizing Selector.
#[derive(Debug, Clone)]
pub struct ActiveLtms {
    probe: ProbeConfig,
    features: TaskFeatures,
    pairs: usize,
    diversity: Option<f64>,
    matrix: Option<TransferMatrix>,
    ridge: bool,
    plan: Plan,
}

impl ActiveLtms {
    pub fn new(probe: ProbeConfig, features: TaskFeatures, pairs: usize) -> Self {
        Self {
            probe,
            features,
            pairs,
            diversity: None,
            matrix: None,
            ridge: false,
            plan: Plan::default(),
        }
    }

    pub fn with_diversity_threshold(mut self, t: Option<f64>) -> Self {
        self.diversity = t;
        self
    }

    /// True when the model had to be fit with the ridge fallback.
    pub fn used_ridge(&self) -> bool {
        self.ridge
    }
}

impl Selector for ActiveLtms {
    fn name(&self) -> &str {
        "active_ltms"
    }

    fn preprocess(&mut self, ctx: &mut SelectCtx<'_>) -> Result<u64, SelectError> {
        let (f, steps, ridge) = active_ltms_estimate(ctx, &self.probe, &self.features, self.pairs)?;
        self.matrix = Some(f);
        self.ridge = ridge;
        Ok(steps)
    }

    fn select(&mut self, ctx: &mut SelectCtx<'_>) -> Result<Selection, SelectError> {
        if self.plan.order.is_none() {
            let f = self.matrix.as_ref().ok_or(SelectError::PlanExhausted)?;
            self.plan.order = Some(ltms_chain(f, ctx.remaining));
        }
        let task = self.plan.next(ctx.remaining)?;
        let (keep, skipped) = diversity_split(&self.features, &[task], ctx.curriculum, self.diversity);
        Ok(Selection {
            task: keep.first().copied(),
            skipped,
            steps: 0,
        })
    }

    fn transfer_matrix(&self) -> Option<&TransferMatrix> {
        self.matrix.as_ref()
    }
}

/// Serves a fixed curriculum.
#[derive(Debug, Clone)]
pub struct Fixed {
    plan: Plan,
}

impl Fixed {
    pub fn new(order: Vec<TaskId>) -> Self {
        Self {
            plan: Plan {
                order: Some(order),
                cursor: 0,
            },
        }
    }
}

impl Selector for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }

    fn select(&mut self, ctx: &mut SelectCtx<'_>) -> Result<Selection, SelectError> {
        match self.plan.next(ctx.remaining) {
            Ok(t) => Ok(Selection {
                task: Some(t),
                ..Selection::default()
            }),
            // Tasks outside the fixed order are dropped.
            Err(_) => Ok(Selection {
                task: None,
                skipped: sorted(ctx.remaining),
                steps: 0,
            }),
        }
    }
}
