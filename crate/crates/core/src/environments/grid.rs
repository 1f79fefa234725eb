//! Grid layouts: parsing, serialization, shortest paths and the two
//! source-task generators (shrinking the feasible region, moving the start).

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// (row, col), origin at the top-left corner.
pub type Cell = (usize, usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("layout is empty")]
    Empty,
    #[error("row {row} has width {found}, expected {expected}")]
    NotRectangular {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown character {ch:?} at row {row}, col {col}")]
    UnknownChar { ch: char, row: usize, col: usize },
    #[error("layout has no goal cell")]
    MissingGoal,
    #[error("second goal at row {row}, col {col}")]
    DuplicateGoal { row: usize, col: usize },
    #[error("second start at row {row}, col {col}")]
    DuplicateStart { row: usize, col: usize },
    #[error("layout has no start cell")]
    MissingStart,
    #[error("layout has no feasible cell besides the goal")]
    NoFeasibleStart,
    #[error("cell ({0}, {1}) is blocked or outside the grid")]
    Infeasible(usize, usize),
    #[error("cell ({0}, {1}) is the goal")]
    GoalCell(usize, usize),
    #[error("region does not contain the goal")]
    RegionExcludesGoal,
}

/// Inclusive rectangle of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl Region {
    pub fn contains(&self, (r, c): Cell) -> bool {
        r >= self.top && r <= self.bottom && c >= self.left && c <= self.right
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
    goal: Cell,
    start: Option<Cell>,
}

impl GridLayout {
    /// Builds and validates a layout from its parts.
    pub fn new(
        width: usize,
        height: usize,
        blocked: &BTreeSet<Cell>,
        goal: Cell,
        start: Option<Cell>,
    ) -> Result<Self, LayoutError> {
        if width == 0 || height == 0 {
            return Err(LayoutError::Empty);
        }
        let mut mask = vec![false; width * height];
        for &(r, c) in blocked {
            if r < height && c < width {
                mask[r * width + c] = true;
            }
        }
        let layout = Self {
            width,
            height,
            blocked: mask,
            goal,
            start,
        };
        layout.validate()?;
        Ok(layout)
    }

    fn validate(&self) -> Result<(), LayoutError> {
        if !self.is_feasible(self.goal) {
            return Err(LayoutError::Infeasible(self.goal.0, self.goal.1));
        }
        if let Some(s) = self.start {
            if !self.is_feasible(s) {
                return Err(LayoutError::Infeasible(s.0, s.1));
            }
            if s == self.goal {
                return Err(LayoutError::GoalCell(s.0, s.1));
            }
        }
        if self.feasible_cells().len() < 2 {
            return Err(LayoutError::NoFeasibleStart);
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn start(&self) -> Option<Cell> {
        self.start
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, (r, c): Cell) -> usize {
        r * self.width + c
    }

    pub fn cell(&self, index: usize) -> Cell {
        (index / self.width, index % self.width)
    }

    pub fn in_bounds(&self, (r, c): Cell) -> bool {
        r < self.height && c < self.width
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        !self.in_bounds(cell) || self.blocked[self.index(cell)]
    }

    pub fn is_feasible(&self, cell: Cell) -> bool {
        !self.is_blocked(cell)
    }

    /// Feasible cells in row-major order, goal included.
    pub fn feasible_cells(&self) -> Vec<Cell> {
        (0..self.cell_count())
            .filter(|&i| !self.blocked[i])
            .map(|i| self.cell(i))
            .collect()
    }

    pub fn feasible_set(&self) -> BTreeSet<Cell> {
        self.feasible_cells().into_iter().collect()
    }

    pub fn blocked_set(&self) -> BTreeSet<Cell> {
        (0..self.cell_count())
            .filter(|&i| self.blocked[i])
            .map(|i| self.cell(i))
            .collect()
    }

    /// Neighbour reached by a unit move, if it stays on the grid.
    pub fn offset(&self, (r, c): Cell, dr: isize, dc: isize) -> Option<Cell> {
        let nr = r.checked_add_signed(dr)?;
        let nc = c.checked_add_signed(dc)?;
        self.in_bounds((nr, nc)).then_some((nr, nc))
    }

    fn neighbours(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        MOVES
            .iter()
            .filter_map(move |&(dr, dc)| self.offset(cell, dr, dc))
            .filter(|&n| self.is_feasible(n))
    }
}

/// Unit moves in action order: up, down, left, right.
pub const MOVES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Parses the text layout format: one line per row, `#` blocked, `.` free,
/// `G` goal (exactly one), `S` start (at most one). Trailing blank lines
/// and `\r` are ignored.
pub fn parse_grid_layout(text: &str) -> Result<GridLayout, LayoutError> {
    let mut rows: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    while rows.last().is_some_and(|l| l.is_empty()) {
        rows.pop();
    }
    if rows.is_empty() {
        return Err(LayoutError::Empty);
    }
    let width = rows[0].chars().count();
    if width == 0 {
        return Err(LayoutError::Empty);
    }
    let mut blocked = BTreeSet::new();
    let mut goal = None;
    let mut start = None;
    for (r, line) in rows.iter().enumerate() {
        let found = line.chars().count();
        if found != width {
            return Err(LayoutError::NotRectangular {
                row: r,
                expected: width,
                found,
            });
        }
        for (c, ch) in line.chars().enumerate() {
            match ch {
                '#' => {
                    blocked.insert((r, c));
                }
                '.' => {}
                'G' => {
                    if goal.is_some() {
                        return Err(LayoutError::DuplicateGoal { row: r, col: c });
                    }
                    goal = Some((r, c));
                }
                'S' => {
                    if start.is_some() {
                        return Err(LayoutError::DuplicateStart { row: r, col: c });
                    }
                    start = Some((r, c));
                }
                other => {
                    return Err(LayoutError::UnknownChar {
                        ch: other,
                        row: r,
                        col: c,
                    })
                }
            }
        }
    }
    let goal = goal.ok_or(LayoutError::MissingGoal)?;
    GridLayout::new(width, rows.len(), &blocked, goal, start)
}

impl fmt::Display for GridLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.height {
            for c in 0..self.width {
                let ch = if (r, c) == self.goal {
                    'G'
                } else if Some((r, c)) == self.start {
                    'S'
                } else if self.is_blocked((r, c)) {
                    '#'
                } else {
                    '.'
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Length of the shortest 4-connected path between two feasible cells, or
/// `None` when `to` cannot be reached.
pub fn bfs_distance(layout: &GridLayout, from: Cell, to: Cell) -> Result<Option<usize>, LayoutError> {
    for cell in [from, to] {
        if !layout.is_feasible(cell) {
            return Err(LayoutError::Infeasible(cell.0, cell.1));
        }
    }
    let mut dist = vec![usize::MAX; layout.cell_count()];
    let mut queue = VecDeque::new();
    dist[layout.index(from)] = 0;
    queue.push_back(from);
    while let Some(cell) = queue.pop_front() {
        let d = dist[layout.index(cell)];
        if cell == to {
            return Ok(Some(d));
        }
        for n in layout.neighbours(cell) {
            let i = layout.index(n);
            if dist[i] == usize::MAX {
                dist[i] = d + 1;
                queue.push_back(n);
            }
        }
    }
    Ok(None)
}

/// Blocks every cell outside `keep`. The goal must lie inside the region;
/// a start cell that falls outside is dropped.
pub fn shrink_maze(layout: &GridLayout, keep: Region) -> Result<GridLayout, LayoutError> {
    if !keep.contains(layout.goal) {
        return Err(LayoutError::RegionExcludesGoal);
    }
    let mut out = layout.clone();
    for i in 0..out.cell_count() {
        if !keep.contains(out.cell(i)) {
            out.blocked[i] = true;
        }
    }
    if let Some(s) = out.start {
        if out.is_blocked(s) {
            out.start = None;
        }
    }
    out.validate()?;
    Ok(out)
}

/// Same layout with a different start cell.
pub fn move_start(layout: &GridLayout, new_start: Cell) -> Result<GridLayout, LayoutError> {
    if !layout.is_feasible(new_start) {
        return Err(LayoutError::Infeasible(new_start.0, new_start.1));
    }
    if new_start == layout.goal {
        return Err(LayoutError::GoalCell(new_start.0, new_start.1));
    }
    let mut out = layout.clone();
    out.start = Some(new_start);
    Ok(out)
}
