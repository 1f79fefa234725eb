//! Independent reference computations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;

use activesim::agent::{Agent, AgentConfig, StopRule};
use activesim::environments::{Cell, GridLayout, TableEnv};
use activesim::mdp::{Environment, Rng};
use nalgebra::{DMatrix, DVector};

/// Q* of a deterministic table MDP by value iteration.
pub fn value_iteration(env: &TableEnv, gamma: f64) -> Vec<Vec<f64>> {
    let (n, m) = (env.state_count(), env.action_count());
    let mut q = vec![vec![0.0; m]; n];
    for _ in 0..2000 {
        let v: Vec<f64> = q.iter().map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
        for s in 0..n {
            if env.is_absorbing(s) {
                continue;
            }
            for a in 0..m {
                let next = env.successor(s, a);
                let future = if env.is_absorbing(next) { 0.0 } else { v[next] };
                q[s][a] = env.reward_of(s, a) + gamma * future;
            }
        }
    }
    q
}

/// Chain with state 0 as the absorbing goal; action 0 moves left, 1 right.
pub fn chain(rewards: &[[f64; 2]]) -> TableEnv {
    let n = rewards.len();
    let next = (0..n).map(|s| vec![s.saturating_sub(1), (s + 1).min(n - 1)]).collect();
    let reward = rewards.iter().map(|r| r.to_vec()).collect();
    let mut absorbing = vec![false; n];
    absorbing[0] = true;
    TableEnv::new(next, reward, absorbing, n - 1, 20)
}

/// Uniformly random behaviour policy.
pub fn explorer() -> AgentConfig {
    AgentConfig {
        epsilon_start: 1.0,
        epsilon_decay: 1.0,
        epsilon_floor: 1.0,
        ..AgentConfig::default()
    }
}

/// Trains from every non-absorbing start in turn.
pub fn sweep(agent: &mut Agent, env: &TableEnv, rounds: usize, rng: &mut Rng) {
    for _ in 0..rounds {
        for s in 0..env.state_count() {
            if env.is_absorbing(s) {
                continue;
            }
            let mut e = env.clone().with_start(s);
            agent.tlearn(&mut e, StopRule::FixedSteps(40), rng).unwrap();
        }
    }
}

/// Largest |Q − Q*| over non-absorbing states, and whether every greedy
/// action is optimal within `tol`.
pub fn oracle_gap(agent: &Agent, env: &TableEnv, tol: f64) -> (f64, bool) {
    let q_star = value_iteration(env, agent.config.discount);
    let mut gap = 0.0f64;
    let mut policy_ok = true;
    for s in 0..env.state_count() {
        if env.is_absorbing(s) {
            continue;
        }
        for a in 0..env.action_count() {
            gap = gap.max((agent.q.get(s, a) - q_star[s][a]).abs());
        }
        let best = q_star[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        policy_ok &= q_star[s][agent.q.argmax(s)] > best - tol;
    }
    (gap, policy_ok)
}

/// Dijkstra with unit edge weights over the feasible cells.
pub fn dijkstra(layout: &GridLayout, from: Cell, to: Cell) -> Option<usize> {
    let mut dist: BTreeMap<Cell, usize> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(from, 0);
    heap.push(Reverse((0usize, from)));
    while let Some(Reverse((d, c))) = heap.pop() {
        if c == to {
            return Some(d);
        }
        if dist.get(&c).is_some_and(|&best| d > best) {
            continue;
        }
        let (r, col) = (c.0 as isize, c.1 as isize);
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r + dr, col + dc);
            if nr < 0 || nc < 0 {
                continue;
            }
            let n = (nr as usize, nc as usize);
            if !layout.in_bounds(n) || !layout.is_feasible(n) {
                continue;
            }
            if dist.get(&n).is_none_or(|&best| d + 1 < best) {
                dist.insert(n, d + 1);
                heap.push(Reverse((d + 1, n)));
            }
        }
    }
    None
}

/// Least squares by SVD.
pub fn svd_least_squares(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let d = rows[0].len();
    let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(y);
    x.svd(true, true).solve(&b, 1e-14).unwrap().as_slice().to_vec()
}

/// Mean of ‖θ̂ − θ*‖² over `reps` noisy refits on a fixed design, and the
/// closed-form expectation σ²·Tr[(XᵀX)⁻¹] by direct inversion.
pub fn ols_error_monte_carlo(
    fit: impl Fn(&[Vec<f64>], &[f64]) -> Vec<f64>,
    rows: &[Vec<f64>],
    theta: &[f64],
    sigma: f64,
    reps: usize,
    rng: &mut Rng,
) -> (f64, f64) {
    let d = theta.len();
    let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let expected = sigma * sigma * (x.transpose() * &x).try_inverse().unwrap().trace();
    let clean: Vec<f64> = rows.iter().map(|r| r.iter().zip(theta).map(|(a, b)| a * b).sum()).collect();
    let mut total = 0.0;
    for _ in 0..reps {
        let y: Vec<f64> = clean.iter().map(|c| c + sigma * rng.normal()).collect();
        let est = fit(rows, &y);
        total += est.iter().zip(theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    (total / reps as f64, expected)
}

/// The `rank`-th permutation of `0..k` in lexicographic order, by the
/// factorial number system.
pub fn unrank_permutation(k: usize, mut rank: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..k).collect();
    let mut out = Vec::with_capacity(k);
    for i in (0..k).rev() {
        let f: usize = (1..=i).product();
        out.push(pool.remove(rank / f));
        rank %= f;
    }
    out
}
