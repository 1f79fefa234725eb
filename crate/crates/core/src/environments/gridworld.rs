use crate::mdp::{ActionId, Environment, MdpError, Rng, StateId, StateLabel, Transition};

use super::grid::{Cell, GridLayout, LayoutError, MOVES};

pub const MAZE_STEP_CAP: usize = 200;
pub const GRIDWORLD_STEP_CAP: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartRule {
    /// Uniform over feasible non-goal cells.
    Random,
    Fixed(Cell),
}

/// Navigation task on a grid: four moves, +1 on reaching the goal, walls
/// and the grid edge leave the agent in place.
#[derive(Debug, Clone)]
pub struct GridEnv {
    name: String,
    layout: GridLayout,
    start: StartRule,
    starts: Vec<Cell>,
    step_cap: usize,
    current: Option<StateId>,
    steps: usize,
}

/// Maze task: random feasible start, 200-step episodes.
pub fn make_maze_env(layout: GridLayout) -> GridEnv {
    GridEnv::new("maze", layout, StartRule::Random, MAZE_STEP_CAP)
}

/// Grid-world task: the layout's start cell, 500-step episodes.
pub fn make_gridworld_env(layout: GridLayout) -> Result<GridEnv, LayoutError> {
    let start = layout.start().ok_or(LayoutError::MissingStart)?;
    Ok(GridEnv::new(
        "gridworld",
        layout,
        StartRule::Fixed(start),
        GRIDWORLD_STEP_CAP,
    ))
}

impl GridEnv {
    pub fn new(name: &str, layout: GridLayout, start: StartRule, step_cap: usize) -> Self {
        let goal = layout.goal();
        let starts = layout
            .feasible_cells()
            .into_iter()
            .filter(|&c| c != goal)
            .collect();
        Self {
            name: name.to_string(),
            layout,
            start,
            starts,
            step_cap: step_cap.max(1),
            current: None,
            steps: 0,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_step_cap(mut self, cap: usize) -> Self {
        self.step_cap = cap.max(1);
        self
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    /// Starts an episode in a chosen feasible, non-goal cell.
    pub fn reset_to(&mut self, cell: Cell) -> Result<StateId, LayoutError> {
        if !self.layout.is_feasible(cell) {
            return Err(LayoutError::Infeasible(cell.0, cell.1));
        }
        if cell == self.layout.goal() {
            return Err(LayoutError::GoalCell(cell.0, cell.1));
        }
        let s = self.layout.index(cell);
        self.current = Some(s);
        self.steps = 0;
        Ok(s)
    }

    /// Deterministic successor of `cell` under `action`.
    pub fn successor(&self, cell: Cell, action: ActionId) -> Cell {
        let (dr, dc) = MOVES[action];
        match self.layout.offset(cell, dr, dc) {
            Some(n) if self.layout.is_feasible(n) => n,
            _ => cell,
        }
    }
}

impl Environment for GridEnv {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_count(&self) -> usize {
        self.layout.cell_count()
    }

    fn action_count(&self) -> usize {
        MOVES.len()
    }

    fn step_cap(&self) -> usize {
        self.step_cap
    }

    fn reset(&mut self, rng: &mut Rng) -> StateId {
        let cell = match self.start {
            StartRule::Fixed(c) => c,
            StartRule::Random => self.starts[rng.below(self.starts.len())],
        };
        let s = self.layout.index(cell);
        self.current = Some(s);
        self.steps = 0;
        s
    }

    fn step(&mut self, action: ActionId, _rng: &mut Rng) -> Result<Transition, MdpError> {
        let state = self.current.ok_or(MdpError::EpisodeNotActive)?;
        if action >= MOVES.len() {
            return Err(MdpError::InvalidAction {
                action,
                count: MOVES.len(),
            });
        }
        let next = self.successor(self.layout.cell(state), action);
        self.steps += 1;
        let at_goal = next == self.layout.goal();
        let capped = !at_goal && self.steps >= self.step_cap;
        let t = Transition {
            state,
            action,
            reward: if at_goal { 1.0 } else { 0.0 },
            next_state: self.layout.index(next),
            terminal: at_goal || capped,
            truncated: capped,
        };
        self.current = if t.terminal { None } else { Some(t.next_state) };
        Ok(t)
    }

    fn label(&self, state: StateId) -> StateLabel {
        let (r, c) = self.layout.cell(state);
        StateLabel::Cell(r, c)
    }

    fn locate(&self, label: &StateLabel) -> Option<StateId> {
        match *label {
            StateLabel::Cell(r, c) if self.layout.is_feasible((r, c)) => {
                Some(self.layout.index((r, c)))
            }
            _ => None,
        }
    }

    fn box_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}
