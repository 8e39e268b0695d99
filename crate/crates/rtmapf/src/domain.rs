//! Core value types for grids, timed paths, conflicts, and solution cost
//! metrics. Everything here is an immutable value after construction and all
//! operations are pure functions, so the types can be freely copied across
//! threads.

use std::fmt;

use thiserror::Error;

/// A grid cell, addressed by column (`x`) and row (`y`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

impl fmt::Debug for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// True if `a` and `b` are the same cell (a wait) or 4-adjacent (a move).
pub fn adjacent_or_equal(a: Cell, b: Cell) -> bool {
    let dx = a.x.abs_diff(b.x);
    let dy = a.y.abs_diff(b.y);
    dx + dy <= 1
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("grid dimensions must be at least 1x1")]
    EmptyGrid,
    #[error("blocked vector has {got} entries, expected {expected}")]
    BlockedLength { expected: usize, got: usize },
    #[error("cell {0} is out of bounds")]
    OutOfBounds(Cell),
    #[error("cell {0} is blocked")]
    BlockedCell(Cell),
    #[error("a timed path must contain at least one cell")]
    EmptyPath,
    #[error("cells {0} and {1} are neither identical nor 4-adjacent")]
    IllegalStep(Cell, Cell),
    #[error("agent ids must be 0..k in order, found {0} at position {1}")]
    BadAgentId(usize, usize),
    #[error("agents {0} and {1} share start cell {2}")]
    DuplicateStart(usize, usize, Cell),
    #[error("agents {0} and {1} share goal cell {2}")]
    DuplicateGoal(usize, usize, Cell),
    #[error("horizon {horizon} is smaller than window {window}")]
    HorizonTooShort { horizon: u32, window: u32 },
    #[error("planning budget must be at least 1")]
    ZeroBudget,
    #[error("execution window must be at least 1")]
    ZeroWindow,
    #[error("permutation of length {0} is not a bijection on agent ids")]
    NotAPermutation(usize),
}

/// A 4-connected grid with blocked cells, stored row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct GridMap {
    width: u32,
    height: u32,
    blocked: Vec<bool>,
}

impl GridMap {
    pub fn new(width: u32, height: u32, blocked: Vec<bool>) -> Result<Self, DomainError> {
        if width == 0 || height == 0 {
            return Err(DomainError::EmptyGrid);
        }
        let expected = (width as usize) * (height as usize);
        if blocked.len() != expected {
            return Err(DomainError::BlockedLength {
                expected,
                got: blocked.len(),
            });
        }
        Ok(Self {
            width,
            height,
            blocked,
        })
    }

    /// An all-open grid.
    pub fn open(width: u32, height: u32) -> Self {
        Self::new(width, height, vec![false; (width as usize) * (height as usize)])
            .expect("open grid dimensions must be positive")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        (self.width as usize) * (self.height as usize)
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.x < self.width && cell.y < self.height
    }

    /// Row-major index of a cell; also the deterministic tie-break order used
    /// by the planners.
    pub fn index(&self, cell: Cell) -> usize {
        (cell.y as usize) * (self.width as usize) + cell.x as usize
    }

    /// Out-of-bounds cells count as blocked.
    pub fn is_blocked(&self, cell: Cell) -> bool {
        !self.in_bounds(cell) || self.blocked[self.index(cell)]
    }

    /// The unblocked 4-neighbors of `cell`, in fixed (up, down, left, right)
    /// generation order.
    pub fn neighbors4(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        let candidates = [
            cell.y.checked_sub(1).map(|y| Cell::new(cell.x, y)),
            (cell.y + 1 < self.height).then(|| Cell::new(cell.x, cell.y + 1)),
            cell.x.checked_sub(1).map(|x| Cell::new(x, cell.y)),
            (cell.x + 1 < self.width).then(|| Cell::new(cell.x + 1, cell.y)),
        ];
        candidates
            .into_iter()
            .flatten()
            .filter(|&c| !self.is_blocked(c))
    }

    pub fn unblocked_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
            .filter(|&c| !self.is_blocked(c))
    }
}

impl fmt::Debug for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "GridMap {}x{}", self.width, self.height)?;
        for y in 0..self.height {
            for x in 0..self.width {
                let ch = if self.is_blocked(Cell::new(x, y)) { '@' } else { '.' };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// One agent's start/goal assignment. `id` is the agent's index in the
/// instance's agent list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AgentTask {
    pub id: usize,
    pub start: Cell,
    pub goal: Cell,
}

/// A full problem instance: the grid, the agents, and the per-period planning
/// contract (budget `B`, execution window `w`, planning horizon `h`, and the
/// makespan cap used by the experiment harness).
#[derive(Clone, Debug)]
pub struct Instance {
    map: GridMap,
    agents: Vec<AgentTask>,
    budget: u64,
    window: u32,
    horizon: u32,
    makespan_cap: u32,
}

impl Instance {
    pub fn new(
        map: GridMap,
        agents: Vec<AgentTask>,
        budget: u64,
        window: u32,
        horizon: u32,
        makespan_cap: u32,
    ) -> Result<Self, DomainError> {
        if budget == 0 {
            return Err(DomainError::ZeroBudget);
        }
        if window == 0 {
            return Err(DomainError::ZeroWindow);
        }
        if horizon < window {
            return Err(DomainError::HorizonTooShort { horizon, window });
        }
        for (pos, task) in agents.iter().enumerate() {
            if task.id != pos {
                return Err(DomainError::BadAgentId(task.id, pos));
            }
            for cell in [task.start, task.goal] {
                if !map.in_bounds(cell) {
                    return Err(DomainError::OutOfBounds(cell));
                }
                if map.is_blocked(cell) {
                    return Err(DomainError::BlockedCell(cell));
                }
            }
        }
        for i in 0..agents.len() {
            for j in (i + 1)..agents.len() {
                if agents[i].start == agents[j].start {
                    return Err(DomainError::DuplicateStart(i, j, agents[i].start));
                }
                if agents[i].goal == agents[j].goal {
                    return Err(DomainError::DuplicateGoal(i, j, agents[i].goal));
                }
            }
        }
        Ok(Self {
            map,
            agents,
            budget,
            window,
            horizon,
            makespan_cap,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn agents(&self) -> &[AgentTask] {
        &self.agents
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn makespan_cap(&self) -> u32 {
        self.makespan_cap
    }

    pub fn starts(&self) -> Vec<Cell> {
        self.agents.iter().map(|a| a.start).collect()
    }

    pub fn goals(&self) -> Vec<Cell> {
        self.agents.iter().map(|a| a.goal).collect()
    }
}

/// A per-timestep vertex sequence for one agent, starting at the agent's
/// position at the start of the current planning period. Consecutive cells
/// are identical (wait) or 4-adjacent (move). Beyond its last cell the agent
/// is taken to wait there forever (implicit tail padding).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TimedPath {
    cells: Vec<Cell>,
}

impl TimedPath {
    pub fn new(cells: Vec<Cell>) -> Result<Self, DomainError> {
        if cells.is_empty() {
            return Err(DomainError::EmptyPath);
        }
        for pair in cells.windows(2) {
            if !adjacent_or_equal(pair[0], pair[1]) {
                return Err(DomainError::IllegalStep(pair[0], pair[1]));
            }
        }
        Ok(Self { cells })
    }

    /// A length-1 path: the agent has no plan beyond its current cell.
    pub fn stay(cell: Cell) -> Self {
        Self { cells: vec![cell] }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> Cell {
        self.cells[0]
    }

    pub fn end(&self) -> Cell {
        *self.cells.last().expect("paths are never empty")
    }

    /// Path cost `C(pi) = |cells| - 1`: the number of timesteps needed to
    /// traverse the path.
    pub fn cost(&self) -> u32 {
        (self.cells.len() - 1) as u32
    }

    /// Position at timestep `t`, with implicit waiting at the final cell for
    /// every `t` beyond the end of the path.
    pub fn position_at(&self, t: u32) -> Cell {
        let idx = (t as usize).min(self.cells.len() - 1);
        self.cells[idx]
    }
}

/// An agent-to-path mapping covering every agent. It may contain conflicts
/// and paths that do not reach their targets; unplanned agents hold a
/// length-1 path at their current cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialSolution {
    paths: Vec<TimedPath>,
}

impl PartialSolution {
    pub fn new(paths: Vec<TimedPath>) -> Self {
        Self { paths }
    }

    /// Every agent waiting at its current position.
    pub fn all_stay(positions: &[Cell]) -> Self {
        Self {
            paths: positions.iter().map(|&c| TimedPath::stay(c)).collect(),
        }
    }

    pub fn paths(&self) -> &[TimedPath] {
        &self.paths
    }

    pub fn path(&self, agent: usize) -> &TimedPath {
        &self.paths[agent]
    }

    pub fn set_path(&mut self, agent: usize, path: TimedPath) {
        self.paths[agent] = path;
    }

    pub fn agent_count(&self) -> usize {
        self.paths.len()
    }

    pub fn positions_at(&self, t: u32) -> Vec<Cell> {
        self.paths.iter().map(|p| p.position_at(t)).collect()
    }
}

/// The two classical conflict kinds between a pair of agents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConflictKind {
    /// Both agents occupy `cell` at the conflict time.
    Vertex { cell: Cell },
    /// The lower-id agent moves `from -> to` while the other moves
    /// `to -> from` between time-1 and time.
    Swap { from: Cell, to: Cell },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conflict {
    /// Unordered pair stored as (min id, max id).
    pub agents: (usize, usize),
    pub time: u32,
    pub kind: ConflictKind,
}

impl Conflict {
    pub fn involves(&self, agent: usize) -> bool {
        self.agents.0 == agent || self.agents.1 == agent
    }
}

/// Every vertex and swap conflict between all agent pairs for timesteps
/// `0..=up_to`, using tail padding for positions beyond each path's end.
/// Output is sorted by (time, min agent id, max agent id).
pub fn find_conflicts(sol: &PartialSolution, up_to: u32) -> Vec<Conflict> {
    let k = sol.agent_count();
    let mut out = Vec::new();
    if k < 2 {
        return out;
    }
    let mut prev = sol.positions_at(0);
    for t in 0..=up_to {
        let cur = if t == 0 { prev.clone() } else { sol.positions_at(t) };
        for i in 0..k {
            for j in (i + 1)..k {
                if cur[i] == cur[j] {
                    out.push(Conflict {
                        agents: (i, j),
                        time: t,
                        kind: ConflictKind::Vertex { cell: cur[i] },
                    });
                } else if t > 0 && cur[i] == prev[j] && cur[j] == prev[i] && prev[i] != prev[j] {
                    out.push(Conflict {
                        agents: (i, j),
                        time: t,
                        kind: ConflictKind::Swap {
                            from: prev[i],
                            to: cur[i],
                        },
                    });
                }
            }
        }
        prev = cur;
    }
    out
}

/// Per-agent conflict involvement counts; sums to twice the conflict count.
pub fn conflicts_per_agent(sol: &PartialSolution, up_to: u32) -> Vec<usize> {
    let mut counts = vec![0usize; sol.agent_count()];
    for c in find_conflicts(sol, up_to) {
        counts[c.agents.0] += 1;
        counts[c.agents.1] += 1;
    }
    counts
}

/// Makespan(sol) = max over agents of the path cost.
pub fn makespan(sol: &PartialSolution) -> u32 {
    sol.paths().iter().map(|p| p.cost()).max().unwrap_or(0)
}

/// SOC(sol) = sum over agents of the path cost.
pub fn soc(sol: &PartialSolution) -> u64 {
    sol.paths().iter().map(|p| p.cost() as u64).sum()
}
