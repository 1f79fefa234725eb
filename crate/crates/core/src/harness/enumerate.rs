//! Exhaustive evaluation of every full-length curriculum.

use std::path::Path;

use crate::selectors::TaskId;

use super::config::{format_permutation, ExperimentConfig, SelectorKind};
use super::experiment::build_experiment;
use super::runner::{mean, run_selectors, sample_std, RunFailure};
use super::{csv_writer, HarnessError};

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<TaskId>> {
    let mut current: Vec<TaskId> = (0..k).collect();
    let mut out = vec![current.clone()];
    // Standard next-permutation step.
    loop {
        let Some(i) = (1..current.len()).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..current.len()).rev().find(|&j| current[j] > current[i - 1]).unwrap_or(i);
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationRow {
    /// `None` for the baseline row.
    pub index: Option<usize>,
    pub permutation: Vec<TaskId>,
    /// Mean time-to-threshold over converged runs; `None` if none converged.
    pub mean_steps: Option<f64>,
    pub std_steps: Option<f64>,
    pub converged_runs: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Enumeration {
    pub rows: Vec<EnumerationRow>,
    pub failures: Vec<RunFailure>,
}

impl Enumeration {
    pub fn baseline(&self) -> Option<&EnumerationRow> {
        self.rows.iter().find(|r| r.index.is_none())
    }

    pub fn curricula(&self) -> impl Iterator<Item = &EnumerationRow> {
        self.rows.iter().filter(|r| r.index.is_some())
    }

    /// 0-based rank of `perm` among the curricula by mean steps (fastest
    /// first); curricula that never converged rank last.
    pub fn rank_of(&self, perm: &[TaskId]) -> Option<usize> {
        let mine = self.curricula().find(|r| r.permutation == perm)?;
        let key = |r: &EnumerationRow| r.mean_steps.unwrap_or(f64::INFINITY);
        Some(self.curricula().filter(|r| key(r) < key(mine)).count())
    }
}

/// Runs the fixed selector for every permutation of the sources plus the
/// baseline, `cfg.runs` times each.
pub fn enumerate_curricula(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Enumeration, HarnessError> {
    let k = cfg.source_count();
    if k > cfg.enumerate_cap {
        return Err(HarnessError::TooManyTasks {
            tasks: k,
            cap: cfg.enumerate_cap,
        });
    }
    let exp = build_experiment(cfg)?;
    let perms = permutations(k);
    let mut kinds: Vec<SelectorKind> = perms.iter().cloned().map(SelectorKind::Fixed).collect();
    kinds.push(SelectorKind::Baseline);
    let report = run_selectors(cfg, &exp, &kinds, jobs, false)?;

    let mut rows = Vec::with_capacity(kinds.len());
    for (idx, kind) in kinds.iter().enumerate() {
        let name = kind.to_string();
        let steps: Vec<f64> = report
            .summaries(&name)
            .filter_map(|s| s.time_to_threshold)
            .map(|t| t as f64)
            .collect();
        let (mean_steps, std_steps) = if steps.is_empty() {
            (None, None)
        } else {
            (Some(mean(&steps)), Some(sample_std(&steps)))
        };
        rows.push(EnumerationRow {
            index: (idx < perms.len()).then_some(idx),
            permutation: perms.get(idx).cloned().unwrap_or_default(),
            mean_steps,
            std_steps,
            converged_runs: steps.len(),
        });
    }
    Ok(Enumeration {
        rows,
        failures: report.failures,
    })
}

/// Writes `curriculum_index,permutation,mean_steps_to_convergence,std`.
pub fn write_enumeration(e: &Enumeration, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    w.write_record(["curriculum_index", "permutation", "mean_steps_to_convergence", "std"])?;
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    for r in &e.rows {
        let (index, perm) = match r.index {
            Some(i) => (i.to_string(), format_permutation(&r.permutation)),
            None => ("baseline".to_string(), "none".to_string()),
        };
        w.write_record([index, perm, na(r.mean_steps), na(r.std_steps)])?;
    }
    w.flush().map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}
