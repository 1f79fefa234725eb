//! Episodic MDP abstraction shared by every task family and by the agent.
//!
//! Environments own their episode state (current state, step counter) and
//! expose it through [`Environment::reset`] and [`Environment::step`]. All
//! randomness flows through an explicitly passed [`Rng`].

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Index into a task's discrete state set.
pub type StateId = usize;

/// Index into a task's discrete action set.
pub type ActionId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("action {action} out of range (environment has {count} actions)")]
    InvalidAction { action: ActionId, count: usize },
    #[error("state {state} out of range (environment has {count} states)")]
    InvalidState { state: StateId, count: usize },
    #[error("step called on an environment with no active episode")]
    EpisodeNotActive,
}

/// One state-action-reward-state cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: StateId,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: StateId,
    /// The episode is over after this step (goal, failure or step cap).
    pub terminal: bool,
    /// The episode ended only because the step cap was reached.
    pub truncated: bool,
}

impl Transition {
    /// True when the successor state has no future value: the episode ended
    /// inside the MDP rather than by the step cap.
    pub fn absorbing(&self) -> bool {
        self.terminal && !self.truncated
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    pub transitions: Vec<Transition>,
    pub total_reward: f64,
    pub steps: usize,
}

impl EpisodeTrace {
    pub fn push(&mut self, t: Transition) {
        self.total_reward += t.reward;
        self.steps += 1;
        self.transitions.push(t);
    }
}

/// Task-independent name of a state, used to map Q values between tasks
/// whose state spaces overlap.
#[derive(Debug, Clone, PartialEq)]
pub enum StateLabel {
    /// Grid cell (row, col).
    Cell(usize, usize),
    /// Representative point of a discretized continuous cell.
    Point(Vec<f64>),
    /// Opaque index for environments without geometry.
    Index(usize),
}

/// An episodic MDP with a discrete state and action set.
pub trait Environment: Send + Sync {
    fn name(&self) -> &str;
    fn state_count(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Maximum number of steps in one episode.
    fn step_cap(&self) -> usize;
    /// Starts a new episode and returns its initial state.
    fn reset(&mut self, rng: &mut Rng) -> StateId;
    /// Applies `action` in the current state.
    fn step(&mut self, action: ActionId, rng: &mut Rng) -> Result<Transition, MdpError>;
    fn label(&self, state: StateId) -> StateLabel;
    /// Inverse of [`Environment::label`] for labels coming from another task.
    fn locate(&self, label: &StateLabel) -> Option<StateId>;
    fn box_clone(&self) -> Box<dyn Environment>;
}

impl Clone for Box<dyn Environment> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Deterministic pseudo-random stream.
///
/// Identical seeds give identical streams. Child streams for Monte Carlo
/// runs are derived from `(master seed, run index)`; probes fork a fresh
/// stream from the parent so they never share state with it.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for run `index` of an experiment seeded with `master`.
    pub fn child(master: u64, index: u64) -> Self {
        Self::new(splitmix64(master ^ splitmix64(index.wrapping_add(1))))
    }

    /// Splits off an independent stream, advancing this one by one draw.
    pub fn fork(&mut self) -> Self {
        let s = self.inner.next_u64();
        Self::new(splitmix64(s))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform in [lo, hi].
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n). Panics when n == 0.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Standard normal draw (Box-Muller).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Runs one full episode from a reset, choosing actions with `policy`.
pub fn run_episode<P>(
    env: &mut dyn Environment,
    mut policy: P,
    rng: &mut Rng,
) -> Result<EpisodeTrace, MdpError>
where
    P: FnMut(StateId, &mut Rng) -> ActionId,
{
    let mut trace = EpisodeTrace::default();
    let mut state = env.reset(rng);
    loop {
        let action = policy(state, rng);
        let t = env.step(action, rng)?;
        state = t.next_state;
        trace.push(t);
        if t.terminal {
            return Ok(trace);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn child_streams_differ_per_run() {
        let mut a = Rng::child(1, 0);
        let mut b = Rng::child(1, 1);
        let xs: Vec<f64> = (0..8).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..8).map(|_| b.uniform()).collect();
        assert_ne!(xs, ys);
        assert_eq!(Rng::child(1, 3).seed(), Rng::child(1, 3).seed());
    }

    #[test]
    fn fork_is_deterministic() {
        let mut a = Rng::new(3);
        let mut b = Rng::new(3);
        let mut fa = a.fork();
        let mut fb = b.fork();
        assert_eq!(fa.below(1000), fb.below(1000));
        assert_eq!(a.below(1000), b.below(1000));
    }
}
