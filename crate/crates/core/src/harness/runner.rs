//! Monte Carlo execution of configured selectors and the CSV outputs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;

use crate::agent::Agent;
use crate::mdp::Rng;
use crate::orchestrator::{run_active_simulators, time_to_threshold, total_reward, RunResult};
use crate::selectors::{Provenance, TaskId, TransferMatrix};

use super::config::{format_permutation, ExperimentConfig, SelectorKind};
use super::experiment::{build_experiment, make_selector, Experiment};
use super::{csv_writer, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Preprocess,
    Probe,
    Curriculum,
    Target,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Preprocess => "preprocess",
            Phase::Probe => "probe",
            Phase::Curriculum => "curriculum",
            Phase::Target => "target",
        })
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "preprocess" => Phase::Preprocess,
            "probe" => Phase::Probe,
            "curriculum" => Phase::Curriculum,
            "target" => Phase::Target,
            _ => return Err(format!("unknown phase `{s}`")),
        })
    }
}

/// One row of `runs_<selector>.csv`. Episode rows carry the episode's
/// reward; preprocess and probe rows mark phase boundaries. The cumulative
/// reward counts target-task reward only.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: usize,
    pub seed: u64,
    pub selector: String,
    pub phase: Phase,
    pub stage: usize,
    pub cumulative_steps: u64,
    pub episode_index: usize,
    pub episode_reward: f64,
    pub cumulative_reward: f64,
    pub converged: bool,
}

pub const RUN_HEADER: [&str; 10] = [
    "run_id",
    "seed",
    "selector",
    "phase",
    "stage",
    "cumulative_steps",
    "episode_index",
    "episode_reward",
    "cumulative_reward",
    "converged",
];

impl RunRecord {
    fn fields(&self) -> [String; 10] {
        [
            self.run_id.to_string(),
            self.seed.to_string(),
            self.selector.clone(),
            self.phase.to_string(),
            self.stage.to_string(),
            self.cumulative_steps.to_string(),
            self.episode_index.to_string(),
            self.episode_reward.to_string(),
            self.cumulative_reward.to_string(),
            self.converged.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub selector: String,
    pub run_id: usize,
    pub seed: u64,
    pub curriculum: Vec<TaskId>,
    pub preprocess_steps: u64,
    pub selection_steps: u64,
    pub training_steps: u64,
    pub target_steps: u64,
    /// `None` when the target never converged.
    pub time_to_threshold: Option<u64>,
    pub total_reward: f64,
    pub reward_complete: bool,
    pub budget_exhausted: bool,
    pub measured_pairs: usize,
    pub predicted_pairs: usize,
}

impl RunSummary {
    pub fn curriculum_cost(&self) -> u64 {
        self.preprocess_steps + self.selection_steps + self.training_steps
    }

    pub fn total_steps(&self) -> u64 {
        self.curriculum_cost() + self.target_steps
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub records: Vec<RunRecord>,
    pub matrix: Option<TransferMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub selector: String,
    pub run_id: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct MonteCarloReport {
    /// Sorted by selector (config order), then run id.
    pub outcomes: Vec<RunOutcome>,
    pub failures: Vec<RunFailure>,
}

impl MonteCarloReport {
    pub fn summaries<'a>(&'a self, selector: &'a str) -> impl Iterator<Item = &'a RunSummary> + 'a {
        self.outcomes
            .iter()
            .map(|o| &o.summary)
            .filter(move |s| s.selector == selector)
    }
}

/// Seed of run `run_id` under `master`; shared by all selectors so runs
/// are paired.
pub fn run_seed(master: u64, run_id: usize) -> u64 {
    Rng::child(master, run_id as u64).seed()
}

/// Flattens a run into CSV records.
pub fn run_records(result: &RunResult, run_id: usize, seed: u64, selector: &str) -> Vec<RunRecord> {
    let mut out = Vec::new();
    let mut steps = result.ledger.preprocess;
    let row = |phase, stage, steps, episode_index, episode_reward, cumulative_reward, converged| RunRecord {
        run_id,
        seed,
        selector: selector.to_string(),
        phase,
        stage,
        cumulative_steps: steps,
        episode_index,
        episode_reward,
        cumulative_reward,
        converged,
    };
    if result.ledger.preprocess > 0 {
        out.push(row(Phase::Preprocess, 0, steps, 0, 0.0, 0.0, false));
    }
    for (s, stage) in result.stages.iter().enumerate() {
        if stage.selection_steps > 0 {
            steps += stage.selection_steps;
            out.push(row(Phase::Probe, s + 1, steps, 0, 0.0, 0.0, false));
        }
        let n = stage.training.episodes.len();
        for (e, ep) in stage.training.episodes.iter().enumerate() {
            steps += ep.steps;
            let converged = stage.training.converged && e + 1 == n;
            out.push(row(Phase::Curriculum, s + 1, steps, e, ep.reward, 0.0, converged));
        }
    }
    if let Some(t) = &result.target {
        let stage = result.stages.len() + 1;
        let mut cum = 0.0;
        let n = t.episodes.len();
        for (e, ep) in t.episodes.iter().enumerate() {
            steps += ep.steps;
            cum += ep.reward;
            out.push(row(Phase::Target, stage, steps, e, ep.reward, cum, t.converged && e + 1 == n));
        }
    }
    out
}

/// Executes run `run_id` of `kind`.
pub fn execute_run(
    cfg: &ExperimentConfig,
    exp: &Experiment,
    kind: &SelectorKind,
    run_id: usize,
) -> Result<RunOutcome, HarnessError> {
    let seed = run_seed(cfg.seed, run_id);
    let mut rng = Rng::new(seed);
    let agent = Agent::for_env(cfg.agent, exp.target.as_ref());
    let mut selector = make_selector(kind, cfg, exp.features.as_ref())?;
    let sources: &[Box<dyn crate::mdp::Environment>] = match kind {
        SelectorKind::Baseline => &[],
        _ => &exp.sources,
    };
    let result = run_active_simulators(
        agent,
        sources,
        exp.target.as_ref(),
        selector.as_mut(),
        &cfg.run_config(),
        &mut rng,
    )?;
    let name = kind.to_string();
    let records = run_records(&result, run_id, seed, &name);
    let (reward, complete) = total_reward(&result, cfg.budget.reward_episodes);
    let (measured, predicted) = result.matrix.as_ref().map_or((0, 0), |m| {
        (m.count(Provenance::Measured), m.count(Provenance::Predicted))
    });
    let summary = RunSummary {
        selector: name,
        run_id,
        seed,
        curriculum: result.curriculum.clone(),
        preprocess_steps: result.ledger.preprocess,
        selection_steps: result.ledger.selection.iter().sum(),
        training_steps: result.ledger.training.iter().sum(),
        target_steps: result.ledger.target,
        time_to_threshold: time_to_threshold(&result),
        total_reward: reward,
        reward_complete: complete,
        budget_exhausted: result.budget_exhausted,
        measured_pairs: measured,
        predicted_pairs: predicted,
    };
    Ok(RunOutcome {
        summary,
        records,
        matrix: result.matrix,
    })
}

pub(crate) fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Domain(e.to_string()))
}

/// Runs every (selector, run) pair of `selectors` in a worker pool. Results
/// come back in (selector, run) order regardless of scheduling.
pub fn run_selectors(
    cfg: &ExperimentConfig,
    exp: &Experiment,
    selectors: &[SelectorKind],
    jobs: Option<usize>,
    keep_records: bool,
) -> Result<MonteCarloReport, HarnessError> {
    let jobs_list: Vec<(usize, usize)> = (0..selectors.len())
        .flat_map(|s| (0..cfg.runs).map(move |r| (s, r)))
        .collect();
    let pool = thread_pool(jobs)?;
    let results: Vec<(usize, usize, Result<RunOutcome, HarnessError>)> = pool.install(|| {
        jobs_list
            .par_iter()
            .map(|&(s, r)| {
                let mut res = execute_run(cfg, exp, &selectors[s], r);
                if let (false, Ok(o)) = (keep_records, &mut res) {
                    o.records = Vec::new();
                }
                (s, r, res)
            })
            .collect()
    });
    let mut report = MonteCarloReport::default();
    for (s, r, res) in results {
        match res {
            Ok(o) => report.outcomes.push(o),
            Err(e) => report.failures.push(RunFailure {
                selector: selectors[s].to_string(),
                run_id: r,
                seed: run_seed(cfg.seed, r),
                message: e.to_string(),
            }),
        }
    }
    Ok(report)
}

/// Runs all configured selectors `cfg.runs` times.
pub fn monte_carlo(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<MonteCarloReport, HarnessError> {
    let exp = build_experiment(cfg)?;
    run_selectors(cfg, &exp, &cfg.selectors, jobs, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatePoint {
    pub step: u64,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

/// Mean and sample standard deviation of cumulative reward across runs on
/// the union of the runs' step checkpoints, each run forward-filled.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregatePoint> {
    let mut runs: BTreeMap<usize, Vec<(u64, f64)>> = BTreeMap::new();
    for r in records {
        runs.entry(r.run_id).or_default().push((r.cumulative_steps, r.cumulative_reward));
    }
    let mut grid: Vec<u64> = records.iter().map(|r| r.cumulative_steps).collect();
    grid.sort_unstable();
    grid.dedup();
    let curves: Vec<Vec<(u64, f64)>> = runs.into_values().collect();
    let mut cursors = vec![0usize; curves.len()];
    let mut current = vec![0.0f64; curves.len()];
    let n = curves.len();
    let mut out = Vec::with_capacity(grid.len());
    for &step in &grid {
        for (i, curve) in curves.iter().enumerate() {
            while cursors[i] < curve.len() && curve[cursors[i]].0 <= step {
                current[i] = curve[cursors[i]].1;
                cursors[i] += 1;
            }
        }
        let mean = current.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (current.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        out.push(AggregatePoint { step, mean, std, runs: n });
    }
    out
}

/// Most frequent curriculum; ties go to the lexicographically smallest.
pub fn modal_curriculum<'a>(summaries: impl IntoIterator<Item = &'a RunSummary>) -> Option<Vec<TaskId>> {
    let mut counts: BTreeMap<Vec<TaskId>, usize> = BTreeMap::new();
    for s in summaries {
        *counts.entry(s.curriculum.clone()).or_default() += 1;
    }
    let mut best: Option<(&Vec<TaskId>, usize)> = None;
    for (c, &n) in &counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((c, n));
        }
    }
    best.map(|(c, _)| c.clone())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

fn opt(v: Option<u64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub const SUMMARY_HEADER: [&str; 16] = [
    "selector",
    "run_id",
    "seed",
    "curriculum",
    "preprocess_steps",
    "selection_steps",
    "training_steps",
    "target_steps",
    "curriculum_cost",
    "total_steps",
    "time_to_threshold",
    "total_reward",
    "reward_complete",
    "budget_exhausted",
    "measured_pairs",
    "predicted_pairs",
];

/// Writes `runs_<selector>.csv`, `aggregate.csv`, `summary.csv`, transfer
/// matrices and, if any run failed, `failures.csv`.
pub fn write_outputs(cfg: &ExperimentConfig, report: &MonteCarloReport, dir: &Path) -> Result<(), HarnessError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |e: io::Error| HarnessError::Io { path: p, source: e }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut agg = csv_writer(&dir.join("aggregate.csv"))?;
    agg.write_record(["selector", "step", "mean_cumulative_reward", "std_cumulative_reward", "runs"])?;
    for kind in &cfg.selectors {
        let name = kind.to_string();
        let records: Vec<&RunRecord> = report
            .outcomes
            .iter()
            .filter(|o| o.summary.selector == name)
            .flat_map(|o| o.records.iter())
            .collect();
        let mut w = csv_writer(&dir.join(format!("runs_{}.csv", file_stem(&name))))?;
        w.write_record(RUN_HEADER)?;
        for r in &records {
            w.write_record(r.fields())?;
        }
        w.flush().map_err(io_err(dir))?;
        let owned: Vec<RunRecord> = records.into_iter().cloned().collect();
        for p in aggregate(&owned) {
            agg.write_record([
                name.clone(),
                p.step.to_string(),
                p.mean.to_string(),
                p.std.to_string(),
                p.runs.to_string(),
            ])?;
        }
    }
    agg.flush().map_err(io_err(dir))?;

    let mut sum = csv_writer(&dir.join("summary.csv"))?;
    sum.write_record(SUMMARY_HEADER)?;
    for o in &report.outcomes {
        let s = &o.summary;
        sum.write_record([
            s.selector.clone(),
            s.run_id.to_string(),
            s.seed.to_string(),
            format_permutation(&s.curriculum),
            s.preprocess_steps.to_string(),
            s.selection_steps.to_string(),
            s.training_steps.to_string(),
            s.target_steps.to_string(),
            s.curriculum_cost().to_string(),
            s.total_steps().to_string(),
            opt(s.time_to_threshold),
            s.total_reward.to_string(),
            s.reward_complete.to_string(),
            s.budget_exhausted.to_string(),
            s.measured_pairs.to_string(),
            s.predicted_pairs.to_string(),
        ])?;
    }
    sum.flush().map_err(io_err(dir))?;

    let with_matrix: Vec<&RunOutcome> = report.outcomes.iter().filter(|o| o.matrix.is_some()).collect();
    if !with_matrix.is_empty() {
        let mdir = dir.join("matrices");
        fs::create_dir_all(&mdir).map_err(io_err(&mdir))?;
        for o in with_matrix {
            let path = mdir.join(format!("{}_run{}.csv", file_stem(&o.summary.selector), o.summary.run_id));
            let file = fs::File::create(&path).map_err(io_err(&path))?;
            if let Some(m) = &o.matrix {
                m.write_csv(io::BufWriter::new(file))?;
            }
        }
    }

    let failures = dir.join("failures.csv");
    if report.failures.is_empty() {
        if failures.exists() {
            fs::remove_file(&failures).map_err(io_err(&failures))?;
        }
    } else {
        let mut w = csv_writer(&failures)?;
        w.write_record(["selector", "run_id", "seed", "message"])?;
        for f in &report.failures {
            w.write_record([f.selector.clone(), f.run_id.to_string(), f.seed.to_string(), f.message.clone()])?;
        }
        w.flush().map_err(io_err(&failures))?;
    }
    Ok(())
}

/// Selector name safe for file names (`fixed:0-1` becomes `fixed_0-1`).
pub fn file_stem(selector: &str) -> String {
    selector.replace(':', "_")
}

/// Reads a `runs_<selector>.csv` file back.
pub fn read_run_records(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let bad = |what: &str| HarnessError::Domain(format!("{}: bad {what}", path.display()));
        out.push(RunRecord {
            run_id: field(0).parse().map_err(|_| bad("run_id"))?,
            seed: field(1).parse().map_err(|_| bad("seed"))?,
            selector: field(2).to_string(),
            phase: field(3).parse().map_err(|_| bad("phase"))?,
            stage: field(4).parse().map_err(|_| bad("stage"))?,
            cumulative_steps: field(5).parse().map_err(|_| bad("cumulative_steps"))?,
            episode_index: field(6).parse().map_err(|_| bad("episode_index"))?,
            episode_reward: field(7).parse().map_err(|_| bad("episode_reward"))?,
            cumulative_reward: field(8).parse().map_err(|_| bad("cumulative_reward"))?,
            converged: field(9).parse().map_err(|_| bad("converged"))?,
        });
    }
    Ok(out)
}
