//! Task descriptors for the domain-aware selectors: per-task raw features,
//! bias-augmented pair and sequence-task vectors, and the diversity score.

use crate::environments::{bfs_distance, GridLayout, LayoutError};

use super::{SelectError, TaskId};

/// `[1, (f_ik − f_jk) / max(f_ik, ε) for k]`.
pub fn pair_feature(fi: &[f64], fj: &[f64], eps: f64) -> Result<Vec<f64>, SelectError> {
    if fi.len() != fj.len() {
        return Err(SelectError::Features(format!(
            "feature dimensions differ: {} vs {}",
            fi.len(),
            fj.len()
        )));
    }
    if !(eps > 0.0) {
        return Err(SelectError::Features("epsilon must be positive".into()));
    }
    let mut out = Vec::with_capacity(fi.len() + 1);
    out.push(1.0);
    out.extend(fi.iter().zip(fj).map(|(a, b)| (a - b) / a.max(eps)));
    Ok(out)
}

/// Fraction of task i's feasible cells that are also feasible in task j.
pub fn maze_task_feature(task_i: &GridLayout, task_j: &GridLayout) -> f64 {
    let si = task_i.feasible_set();
    let sj = task_j.feasible_set();
    si.intersection(&sj).count() as f64 / si.len() as f64
}

/// Shortest-path length from a grid-world task's start to its goal.
pub fn start_goal_distance(layout: &GridLayout) -> Result<f64, SelectError> {
    let start = layout
        .start()
        .ok_or_else(|| SelectError::Features("grid-world task has no start".into()))?;
    match bfs_distance(layout, start, layout.goal()) {
        Ok(Some(d)) => Ok(d as f64),
        Ok(None) => Err(SelectError::Features("goal unreachable from start".into())),
        Err(e) => Err(SelectError::Features(e.to_string())),
    }
}

/// Difference of start-to-goal distances, `f^i − f^j`.
pub fn gridworld_task_feature(task_i: &GridLayout, task_j: &GridLayout) -> Result<f64, SelectError> {
    Ok(start_goal_distance(task_i)? - start_goal_distance(task_j)?)
}

/// Componentwise mean of the member tasks' raw features.
pub fn sequence_feature(members: &[&[f64]]) -> Result<Vec<f64>, SelectError> {
    let first = members
        .first()
        .ok_or_else(|| SelectError::Features("empty sequence".into()))?;
    let n = first.len();
    let mut out = vec![0.0; n];
    for m in members {
        if m.len() != n {
            return Err(SelectError::Features("inconsistent feature dimensions".into()));
        }
        for (o, v) in out.iter_mut().zip(m.iter()) {
            *o += v;
        }
    }
    let count = members.len() as f64;
    out.iter_mut().for_each(|o| *o /= count);
    Ok(out)
}

pub fn sequence_task_feature(f_seq: &[f64], f_j: &[f64], eps: f64) -> Result<Vec<f64>, SelectError> {
    pair_feature(f_seq, f_j, eps)
}

/// Minimum Euclidean distance from `f_task` to any member; infinite for an
/// empty sequence.
pub fn diversity_score(f_task: &[f64], members: &[&[f64]]) -> f64 {
    members
        .iter()
        .map(|m| {
            m.iter()
                .zip(f_task)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Keep a task iff its diversity score exceeds `threshold`.
pub fn diversity_keep(f_task: &[f64], members: &[&[f64]], threshold: f64) -> bool {
    members.is_empty() || diversity_score(f_task, members) > threshold
}

/// Features for K source tasks and the target (index K).
#[derive(Debug, Clone, PartialEq)]
pub struct TaskFeatures {
    raw: Vec<Vec<f64>>,
    pair: Vec<Vec<Vec<f64>>>,
    epsilon: f64,
}

impl TaskFeatures {
    /// Pair vectors from the generic ratio formula over raw features.
    pub fn from_raw(raw: Vec<Vec<f64>>, epsilon: f64) -> Result<Self, SelectError> {
        if raw.len() < 2 {
            return Err(SelectError::Features("need at least one source and the target".into()));
        }
        let k = raw.len() - 1;
        let mut pair = Vec::with_capacity(k);
        for i in 0..k {
            let mut row = Vec::with_capacity(k + 1);
            for j in 0..=k {
                row.push(pair_feature(&raw[i], &raw[j], epsilon)?);
            }
            pair.push(row);
        }
        Ok(Self { raw, pair, epsilon })
    }

    /// Maze features: raw = feasible-cell count, pair = `[1, overlap fraction]`.
    /// `layouts` lists the sources followed by the target.
    pub fn maze(layouts: &[GridLayout], epsilon: f64) -> Result<Self, SelectError> {
        let raw = layouts
            .iter()
            .map(|l| vec![l.feasible_cells().len() as f64])
            .collect();
        let mut f = Self::from_raw(raw, epsilon)?;
        let k = layouts.len() - 1;
        for i in 0..k {
            for j in 0..=k {
                f.pair[i][j] = vec![1.0, maze_task_feature(&layouts[i], &layouts[j])];
            }
        }
        Ok(f)
    }

    /// Grid-world features: raw = start-to-goal distance, pair =
    /// `[1, f^i − f^j]`.
    pub fn gridworld(layouts: &[GridLayout], epsilon: f64) -> Result<Self, SelectError> {
        let raw = layouts
            .iter()
            .map(|l| start_goal_distance(l).map(|d| vec![d]))
            .collect::<Result<Vec<_>, _>>()?;
        let mut f = Self::from_raw(raw, epsilon)?;
        let k = layouts.len() - 1;
        for i in 0..k {
            for j in 0..=k {
                f.pair[i][j] = vec![1.0, f.raw[i][0] - f.raw[j][0]];
            }
        }
        Ok(f)
    }

    pub fn source_count(&self) -> usize {
        self.raw.len() - 1
    }

    pub fn raw(&self, task: TaskId) -> &[f64] {
        &self.raw[task]
    }

    pub fn raw_dim(&self) -> usize {
        self.raw[0].len()
    }

    /// Bias-augmented vector for transfer from source `i` to task `j`
    /// (`j == K` is the target).
    pub fn pair(&self, i: TaskId, j: TaskId) -> &[f64] {
        &self.pair[i][j]
    }

    pub fn pair_dim(&self) -> usize {
        self.pair[0][0].len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Sequence-task vector for appending `task` to `curriculum`.
    pub fn sequence_task(&self, curriculum: &[TaskId], task: TaskId) -> Result<Vec<f64>, SelectError> {
        let members: Vec<&[f64]> = curriculum.iter().map(|&c| self.raw(c)).collect();
        let f_seq = sequence_feature(&members)?;
        sequence_task_feature(&f_seq, self.raw(task), self.epsilon)
    }
}

impl From<LayoutError> for SelectError {
    fn from(e: LayoutError) -> Self {
        SelectError::Features(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::parse_grid_layout;

    #[test]
    fn pair_feature_examples() {
        assert_eq!(pair_feature(&[4.0], &[2.0], 1e-6).unwrap(), vec![1.0, 0.5]);
        assert_eq!(pair_feature(&[3.0, 1.0], &[3.0, 1.0], 1e-6).unwrap(), vec![1.0, 0.0, 0.0]);
        let v = pair_feature(&[0.0], &[3.0], 0.001).unwrap();
        assert!((v[1] + 3000.0).abs() < 1e-9);
        assert!(pair_feature(&[1.0], &[1.0, 2.0], 1e-6).is_err());
    }

    #[test]
    fn overlap_feature() {
        let a = parse_grid_layout("G...\n....").unwrap();
        assert_eq!(maze_task_feature(&a, &a), 1.0);
        let left = parse_grid_layout("G.##\n####").unwrap();
        let right = parse_grid_layout("##G.\n####").unwrap();
        assert_eq!(maze_task_feature(&left, &right), 0.0);
        let four = parse_grid_layout("G.\n..").unwrap();
        let two = parse_grid_layout("G.\n##").unwrap();
        assert_eq!(maze_task_feature(&four, &two), 0.5);
        assert_eq!(maze_task_feature(&two, &four), 1.0);
    }

    #[test]
    fn gridworld_feature() {
        let far = parse_grid_layout("G......S").unwrap();
        let near = parse_grid_layout("G.S.....").unwrap();
        assert_eq!(gridworld_task_feature(&far, &far).unwrap(), 0.0);
        assert_eq!(gridworld_task_feature(&far, &near).unwrap(), 5.0);
        let blocked = parse_grid_layout("G#S").unwrap();
        assert!(gridworld_task_feature(&blocked, &far).is_err());
    }

    #[test]
    fn sequence_mean() {
        assert_eq!(sequence_feature(&[&[2.0]]).unwrap(), vec![2.0]);
        assert_eq!(sequence_feature(&[&[2.0], &[4.0]]).unwrap(), vec![3.0]);
        assert!(sequence_feature(&[]).is_err());
        let v = sequence_task_feature(&[4.0], &[2.0], 1e-6).unwrap();
        assert_eq!(v, vec![1.0, 0.5]);
    }

    #[test]
    fn diversity_rules() {
        assert!(diversity_keep(&[1.0], &[], 10.0));
        assert!(!diversity_keep(&[1.0, 2.0], &[&[1.0, 2.0]], 1e-9));
        assert!(diversity_keep(&[1.0, 2.0], &[&[1.0, 2.5]], 0.0));
        assert_eq!(diversity_score(&[0.0, 0.0], &[&[3.0, 4.0], &[0.0, 1.0]]), 1.0);
    }
}
