//! Small explicit MDPs: deterministic transition tables and a constant-reward
//! stub. Used for oracle checks and for exercising selectors with known
//! rewards.

use crate::mdp::{ActionId, Environment, MdpError, Rng, StateId, StateLabel, Transition};

/// Deterministic finite MDP given by `next[s][a]` and `reward[s][a]`.
/// Entering a state listed in `absorbing` ends the episode.
#[derive(Debug, Clone)]
pub struct TableEnv {
    name: String,
    next: Vec<Vec<StateId>>,
    reward: Vec<Vec<f64>>,
    absorbing: Vec<bool>,
    start: StateId,
    step_cap: usize,
    current: Option<StateId>,
    steps: usize,
}

impl TableEnv {
    pub fn new(
        next: Vec<Vec<StateId>>,
        reward: Vec<Vec<f64>>,
        absorbing: Vec<bool>,
        start: StateId,
        step_cap: usize,
    ) -> Self {
        assert!(!next.is_empty() && next.len() == reward.len() && next.len() == absorbing.len());
        assert!(start < next.len() && !absorbing[start]);
        Self {
            name: "table".into(),
            next,
            reward,
            absorbing,
            start,
            step_cap: step_cap.max(1),
            current: None,
            steps: 0,
        }
    }

    /// Corridor of `n` cells with the goal in cell 0; action 0 moves toward
    /// the goal, action 1 away (bouncing at the far wall). Reward 1 on
    /// entering the goal. The episode starts in the far cell.
    pub fn corridor(n: usize, step_cap: usize) -> Self {
        assert!(n >= 2);
        let next = (0..n)
            .map(|s| vec![s.saturating_sub(1), (s + 1).min(n - 1)])
            .collect();
        let reward = (0..n)
            .map(|s| vec![if s == 1 { 1.0 } else { 0.0 }, 0.0])
            .collect();
        let mut absorbing = vec![false; n];
        absorbing[0] = true;
        Self::new(next, reward, absorbing, n - 1, step_cap)
    }

    pub fn with_start(mut self, start: StateId) -> Self {
        assert!(start < self.next.len() && !self.absorbing[start]);
        self.start = start;
        self
    }

    pub fn successor(&self, s: StateId, a: ActionId) -> StateId {
        self.next[s][a]
    }

    pub fn reward_of(&self, s: StateId, a: ActionId) -> f64 {
        self.reward[s][a]
    }

    pub fn is_absorbing(&self, s: StateId) -> bool {
        self.absorbing[s]
    }

    /// Copy with every reward multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.reward {
            for r in row {
                *r *= c;
            }
        }
        out
    }
}

impl Environment for TableEnv {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_count(&self) -> usize {
        self.next.len()
    }

    fn action_count(&self) -> usize {
        self.next[0].len()
    }

    fn step_cap(&self) -> usize {
        self.step_cap
    }

    fn reset(&mut self, _rng: &mut Rng) -> StateId {
        self.current = Some(self.start);
        self.steps = 0;
        self.start
    }

    fn step(&mut self, action: ActionId, _rng: &mut Rng) -> Result<Transition, MdpError> {
        let state = self.current.ok_or(MdpError::EpisodeNotActive)?;
        if action >= self.action_count() {
            return Err(MdpError::InvalidAction {
                action,
                count: self.action_count(),
            });
        }
        let next = self.next[state][action];
        self.steps += 1;
        let done = self.absorbing[next];
        let capped = !done && self.steps >= self.step_cap;
        let t = Transition {
            state,
            action,
            reward: self.reward[state][action],
            next_state: next,
            terminal: done || capped,
            truncated: capped,
        };
        self.current = if t.terminal { None } else { Some(next) };
        Ok(t)
    }

    fn label(&self, state: StateId) -> StateLabel {
        StateLabel::Index(state)
    }

    fn locate(&self, label: &StateLabel) -> Option<StateId> {
        match *label {
            StateLabel::Index(i) if i < self.state_count() => Some(i),
            _ => None,
        }
    }

    fn box_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}

/// Single-state task paying a fixed reward every step, with episodes of a
/// fixed length. Probe rewards on it are known in closed form.
#[derive(Debug, Clone)]
pub struct ConstantRewardEnv {
    name: String,
    reward: f64,
    episode_len: usize,
    actions: usize,
    steps: usize,
    active: bool,
}

impl ConstantRewardEnv {
    pub fn new(name: &str, reward: f64, episode_len: usize, actions: usize) -> Self {
        Self {
            name: name.into(),
            reward,
            episode_len: episode_len.max(1),
            actions: actions.max(1),
            steps: 0,
            active: false,
        }
    }
}

impl Environment for ConstantRewardEnv {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_count(&self) -> usize {
        1
    }

    fn action_count(&self) -> usize {
        self.actions
    }

    fn step_cap(&self) -> usize {
        self.episode_len
    }

    fn reset(&mut self, _rng: &mut Rng) -> StateId {
        self.steps = 0;
        self.active = true;
        0
    }

    fn step(&mut self, action: ActionId, _rng: &mut Rng) -> Result<Transition, MdpError> {
        if !self.active {
            return Err(MdpError::EpisodeNotActive);
        }
        if action >= self.actions {
            return Err(MdpError::InvalidAction {
                action,
                count: self.actions,
            });
        }
        self.steps += 1;
        let terminal = self.steps >= self.episode_len;
        self.active = !terminal;
        Ok(Transition {
            state: 0,
            action,
            reward: self.reward,
            next_state: 0,
            terminal,
            truncated: terminal,
        })
    }

    fn label(&self, state: StateId) -> StateLabel {
        StateLabel::Index(state)
    }

    fn locate(&self, label: &StateLabel) -> Option<StateId> {
        matches!(label, StateLabel::Index(0)).then_some(0)
    }

    fn box_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}
