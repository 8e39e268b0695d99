//! Budget-metered windowed single-agent search: space-time A* over the
//! time-expanded grid with hard constraints (forbidden vertex/edge
//! occupancies) and soft constraints (penalized collisions with other agents'
//! paths), charging every node expansion to a shared meter.
//!
//! An expansion is one state removed from the open list and having its
//! successors generated; duplicate-state reopenings count again. Stale heap
//! entries (dominated by a lower-collision copy of the same state) are
//! discarded without charge since they generate nothing.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use crate::domain::{Cell, GridMap, TimedPath};

/// Marker distance for cells that cannot reach the goal.
pub const UNREACHABLE: u32 = u32::MAX;

/// Monotone counter of single-agent search node expansions with a hard
/// ceiling. Charging beyond the ceiling is impossible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BudgetMeter {
    ceiling: u64,
    used: u64,
}

impl BudgetMeter {
    pub fn new(ceiling: u64) -> Self {
        Self { ceiling, used: 0 }
    }

    pub fn ceiling(&self) -> u64 {
        self.ceiling
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn remaining(&self) -> u64 {
        self.ceiling - self.used
    }

    pub fn is_exhausted(&self) -> bool {
        self.used == self.ceiling
    }

    /// Charge one expansion. Returns false (charging nothing) once the
    /// ceiling is reached.
    pub fn charge_one(&mut self) -> bool {
        if self.used == self.ceiling {
            return false;
        }
        self.used += 1;
        true
    }
}

/// Exact shortest unconstrained grid distances from every cell to one goal,
/// from a reverse breadth-first search. Computed once per goal and never
/// charged to the planning budget.
#[derive(Clone, Debug)]
pub struct DistanceMap {
    width: u32,
    goal: Cell,
    dist: Vec<u32>,
    max_finite: u32,
}

impl DistanceMap {
    pub fn get(&self, cell: Cell) -> u32 {
        self.dist[(cell.y as usize) * (self.width as usize) + cell.x as usize]
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    /// The largest finite distance in the map (the goal's eccentricity).
    pub fn max_finite(&self) -> u32 {
        self.max_finite
    }
}

pub fn build_distance_map(map: &GridMap, goal: Cell) -> DistanceMap {
    debug_assert!(!map.is_blocked(goal), "distance map goal must be unblocked");
    let mut dist = vec![UNREACHABLE; map.cell_count()];
    dist[map.index(goal)] = 0;
    let mut queue = VecDeque::from([goal]);
    let mut max_finite = 0;
    while let Some(cell) = queue.pop_front() {
        let d = dist[map.index(cell)];
        for next in map.neighbors4(cell) {
            let slot = &mut dist[map.index(next)];
            if *slot == UNREACHABLE {
                *slot = d + 1;
                max_finite = max_finite.max(d + 1);
                queue.push_back(next);
            }
        }
    }
    DistanceMap {
        width: map.width(),
        goal,
        dist,
        max_finite,
    }
}

/// Hard and soft space-time occupancies against which one agent plans.
///
/// Hard paths must never be violated within the horizon; soft paths only
/// contribute penalized collisions. Both are tail-padded: an agent parks at
/// its final cell and keeps occupying it through the horizon. Constraints
/// beyond the horizon do not exist — windowed planners ignore conflicts
/// there.
#[derive(Clone, Debug)]
pub struct ConstraintTable {
    horizon: u32,
    hard_vertices: HashSet<(Cell, u32)>,
    hard_edges: HashSet<(Cell, Cell, u32)>,
    hard_last_at: HashMap<Cell, u32>,
    soft_vertices: HashMap<(Cell, u32), u32>,
    soft_edges: HashMap<(Cell, Cell, u32), u32>,
}

impl ConstraintTable {
    pub fn new(horizon: u32) -> Self {
        Self {
            horizon,
            hard_vertices: HashSet::new(),
            hard_edges: HashSet::new(),
            hard_last_at: HashMap::new(),
            soft_vertices: HashMap::new(),
            soft_edges: HashMap::new(),
        }
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn add_hard_path(&mut self, path: &TimedPath) {
        for t in 0..=self.horizon {
            let cell = path.position_at(t);
            self.hard_vertices.insert((cell, t));
            let last = self.hard_last_at.entry(cell).or_insert(t);
            *last = (*last).max(t);
            if t > 0 {
                let prev = path.position_at(t - 1);
                if prev != cell {
                    self.hard_edges.insert((prev, cell, t));
                }
            }
        }
    }

    pub fn add_soft_path(&mut self, path: &TimedPath) {
        for t in 0..=self.horizon {
            let cell = path.position_at(t);
            *self.soft_vertices.entry((cell, t)).or_insert(0) += 1;
            if t > 0 {
                let prev = path.position_at(t - 1);
                if prev != cell {
                    *self.soft_edges.entry((prev, cell, t)).or_insert(0) += 1;
                }
            }
        }
    }

    /// Is `(cell, t)` hard-occupied? Always false beyond the horizon.
    pub fn hard_blocks_vertex(&self, cell: Cell, t: u32) -> bool {
        t <= self.horizon && self.hard_vertices.contains(&(cell, t))
    }

    /// Would moving `from -> to`, arriving at `t`, swap with a hard path?
    pub fn hard_blocks_move(&self, from: Cell, to: Cell, t: u32) -> bool {
        t <= self.horizon && self.hard_edges.contains(&(to, from, t))
    }

    /// Number of soft paths occupying `(cell, t)`.
    pub fn soft_vertex_hits(&self, cell: Cell, t: u32) -> u32 {
        if t > self.horizon {
            return 0;
        }
        self.soft_vertices.get(&(cell, t)).copied().unwrap_or(0)
    }

    /// Number of soft paths traversing `to -> from` arriving at `t` (a swap
    /// against a `from -> to` move).
    pub fn soft_move_hits(&self, from: Cell, to: Cell, t: u32) -> u32 {
        if t > self.horizon {
            return 0;
        }
        self.soft_edges.get(&(to, from, t)).copied().unwrap_or(0)
    }

    /// Earliest arrival time from which an agent may park at `cell` forever
    /// without violating a hard constraint within the horizon.
    pub fn earliest_park(&self, cell: Cell) -> u32 {
        self.hard_last_at.get(&cell).map(|&t| t + 1).unwrap_or(0)
    }
}

/// Planning failure outcomes. The caller applies its budget or fail policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanFailure {
    /// The per-call expansion budget ran out before a solution was found.
    BudgetExhausted,
    /// The open list emptied: provably no path under the constraints within
    /// the time cap.
    NoPath,
}

/// What counts as a finished plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    /// The path must reach the goal (and park there safely). Searches may
    /// run past the horizon, where constraints no longer apply.
    ReachGoal,
    /// Plan only up to the horizon: a path may instead end anywhere at the
    /// horizon, scored by its remaining distance to the goal. Keeps every
    /// search inside the `cells x horizon` state space.
    HorizonPrefix,
}

/// How soft collisions enter the objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoftObjective {
    /// Collisions dominate lexicographically: fewest weighted collisions
    /// first, then path cost. Avoids collisions at all costs.
    Lexicographic,
    /// Each collision is priced at `soft_weight` extra steps, folded into a
    /// single cost term. Keeps searches cheap and paths direct; collisions
    /// are tolerated when a detour would cost more than the penalty.
    Additive,
}

/// Static limits for one query.
#[derive(Clone, Copy, Debug)]
pub struct SearchLimits {
    pub horizon: u32,
    /// States beyond this timestep are never generated. Without a cap,
    /// proving NoPath in the time-expanded graph would not terminate.
    pub time_cap: u32,
    /// Penalty per soft vertex/edge overlap.
    pub soft_weight: u32,
    pub mode: SearchMode,
    pub objective: SoftObjective,
}

impl SearchLimits {
    /// Reach-goal, collisions-first search with the standard cap: horizon +
    /// the goal's eccentricity + one window.
    pub fn new(horizon: u32, window: u32, dmap: &DistanceMap) -> Self {
        Self {
            horizon,
            time_cap: horizon + dmap.max_finite() + window,
            soft_weight: 1,
            mode: SearchMode::ReachGoal,
            objective: SoftObjective::Lexicographic,
        }
    }

    /// Horizon-prefix search: states never leave `t <= horizon`.
    pub fn windowed(horizon: u32) -> Self {
        Self {
            horizon,
            time_cap: horizon,
            soft_weight: 1,
            mode: SearchMode::HorizonPrefix,
            objective: SoftObjective::Lexicographic,
        }
    }

    pub fn with_soft_penalty(mut self, weight: u32) -> Self {
        self.soft_weight = weight;
        self.objective = SoftObjective::Additive;
        self
    }
}

struct Node {
    cell: Cell,
    time: u32,
    collisions: u64,
    parent: Option<u32>,
}

// Min-order key: (primary, secondary) objective pair, then higher g, then
// smaller cell index, terminal entries ahead of regular ones, then insertion
// order. Fully deterministic given the inputs. Lexicographic objectives put
// weighted collisions in the primary slot and f in the secondary; additive
// objectives fold both into the secondary.
type OpenKey = (u64, u64, Reverse<u32>, usize, bool, u32);

/// Search for a path from `start` to `goal` through the time-expanded grid.
///
/// The objective is lexicographic: first the (weighted) number of soft
/// vertex/edge collisions within the horizon — including collisions incurred
/// by waiting at the goal after arrival, per the tail-padding convention —
/// then path cost. Hard constraints are never violated within the horizon and
/// a returned path is terminal-safe: waiting at the goal after its end
/// violates no hard constraint within the horizon. Every expansion charges
/// both `meter` and the per-call counter; when the per-call counter reaches
/// `agent_budget` before a solution the search stops with
/// [`PlanFailure::BudgetExhausted`].
///
/// Under [`SearchMode::HorizonPrefix`] a plan may also end anywhere at the
/// horizon; such prefixes are scored by arrival time plus the remaining
/// distance to the goal, so the tie-break among equal-collision plans favors
/// real progress over waiting the window out.
#[allow(clippy::too_many_arguments)]
pub fn plan_path(
    map: &GridMap,
    start: Cell,
    goal: Cell,
    constraints: &ConstraintTable,
    dmap: &DistanceMap,
    limits: &SearchLimits,
    agent_budget: u64,
    meter: &mut BudgetMeter,
) -> Result<TimedPath, PlanFailure> {
    debug_assert!(!map.is_blocked(start) && !map.is_blocked(goal));
    debug_assert_eq!(dmap.goal(), goal, "distance map must match the query goal");
    let budget = agent_budget.min(meter.remaining());
    let horizon = limits.horizon;
    let earliest_park = constraints.earliest_park(goal);

    // Suffix sums of soft occupancy at the goal: cost of parking there from
    // t+1 through the horizon.
    let mut tail = vec![0u64; horizon as usize + 2];
    for t in (0..=horizon).rev() {
        tail[t as usize] = tail[t as usize + 1]
            + u64::from(constraints.soft_vertex_hits(goal, t)) * u64::from(limits.soft_weight);
    }
    let tail_from = |t: u32| -> u64 {
        if t >= horizon {
            0
        } else {
            tail[t as usize + 1]
        }
    };

    let mut arena: Vec<Node> = Vec::new();
    let mut open: BinaryHeap<Reverse<OpenKey>> = BinaryHeap::new();
    let mut best: HashMap<(Cell, u32), u64> = HashMap::new();

    let key_of = |collisions: u64, f: u32| -> (u64, u64) {
        match limits.objective {
            SoftObjective::Lexicographic => (collisions, u64::from(f)),
            SoftObjective::Additive => (0, u64::from(f) + collisions),
        }
    };
    let push = |arena: &mut Vec<Node>,
                open: &mut BinaryHeap<Reverse<OpenKey>>,
                best: &mut HashMap<(Cell, u32), u64>,
                cell: Cell,
                time: u32,
                collisions: u64,
                parent: Option<u32>| {
        match best.get(&(cell, time)) {
            Some(&b) if b <= collisions => return,
            _ => {}
        }
        best.insert((cell, time), collisions);
        let idx = arena.len() as u32;
        arena.push(Node {
            cell,
            time,
            collisions,
            parent,
        });
        let at_frontier = limits.mode == SearchMode::HorizonPrefix && time >= limits.horizon;
        if !at_frontier {
            let (p, s) = key_of(collisions, time + dmap.get(cell));
            open.push(Reverse((p, s, Reverse(time), map.index(cell), true, idx)));
        }
        if cell == goal && time >= earliest_park {
            // Terminal twin: commit to parking here. Its key is the exact
            // final objective, so popping one yields the optimum.
            let (p, s) = key_of(collisions + tail_from(time), time);
            open.push(Reverse((p, s, Reverse(time), map.index(cell), false, idx)));
        } else if at_frontier {
            // Horizon-prefix terminal: stop here, scored by remaining
            // distance.
            let (p, s) = key_of(collisions, time + dmap.get(cell));
            open.push(Reverse((p, s, Reverse(time), map.index(cell), false, idx)));
        }
    };

    push(&mut arena, &mut open, &mut best, start, 0, 0, None);

    let mut expansions = 0u64;
    while let Some(Reverse((_p, _s, _g, _ci, regular, idx))) = open.pop() {
        let (cell, time, collisions) = {
            let n = &arena[idx as usize];
            (n.cell, n.time, n.collisions)
        };
        if !regular {
            // Reconstruct the finished path.
            let mut cells = Vec::with_capacity(time as usize + 1);
            let mut cursor = Some(idx);
            while let Some(i) = cursor {
                let n = &arena[i as usize];
                cells.push(n.cell);
                cursor = n.parent;
            }
            cells.reverse();
            return Ok(TimedPath::new(cells).expect("search steps are grid moves"));
        }
        if collisions > best[&(cell, time)] {
            continue; // stale: a lower-collision copy was already expanded
        }
        if expansions == budget {
            return Err(PlanFailure::BudgetExhausted);
        }
        if !meter.charge_one() {
            return Err(PlanFailure::BudgetExhausted);
        }
        expansions += 1;

        let nt = time + 1;
        if nt > limits.time_cap {
            continue;
        }
        let moves = map.neighbors4(cell).chain(std::iter::once(cell));
        for next in moves {
            if dmap.get(next) == UNREACHABLE {
                continue;
            }
            if constraints.hard_blocks_vertex(next, nt)
                || constraints.hard_blocks_move(cell, next, nt)
            {
                continue;
            }
            let added = u64::from(constraints.soft_vertex_hits(next, nt))
                + u64::from(constraints.soft_move_hits(cell, next, nt));
            let ncoll = collisions + added * u64::from(limits.soft_weight);
            push(&mut arena, &mut open, &mut best, next, nt, ncoll, Some(idx));
        }
    }
    Err(PlanFailure::NoPath)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{GridMap, PartialSolution};
    use proptest::prelude::*;

    fn c(x: u32, y: u32) -> Cell {
        Cell::new(x, y)
    }

    // Independent BFS oracle: plain grid distances, no time dimension.
    fn bfs_oracle(map: &GridMap, from: Cell, to: Cell) -> u32 {
        let mut dist = vec![UNREACHABLE; map.cell_count()];
        dist[map.index(from)] = 0;
        let mut q = std::collections::VecDeque::from([from]);
        while let Some(cell) = q.pop_front() {
            if cell == to {
                return dist[map.index(cell)];
            }
            for n in map.neighbors4(cell) {
                if dist[map.index(n)] == UNREACHABLE {
                    dist[map.index(n)] = dist[map.index(cell)] + 1;
                    q.push_back(n);
                }
            }
        }
        UNREACHABLE
    }

    // Brute-force search over the time-expanded graph honoring hard
    // constraints; returns the minimum cost of a terminal-safe goal arrival.
    fn time_expanded_oracle(
        map: &GridMap,
        start: Cell,
        goal: Cell,
        table: &ConstraintTable,
        max_t: u32,
    ) -> Option<u32> {
        let mut seen = std::collections::HashSet::new();
        let mut q = std::collections::VecDeque::from([(start, 0u32)]);
        seen.insert((start, 0u32));
        while let Some((cell, t)) = q.pop_front() {
            if cell == goal && t >= table.earliest_park(goal) {
                return Some(t);
            }
            if t == max_t {
                continue;
            }
            for next in map.neighbors4(cell).chain(std::iter::once(cell)) {
                if table.hard_blocks_vertex(next, t + 1)
                    || table.hard_blocks_move(cell, next, t + 1)
                {
                    continue;
                }
                if seen.insert((next, t + 1)) {
                    q.push_back((next, t + 1));
                }
            }
        }
        None
    }

    #[test]
    fn distance_map_manhattan_on_empty_grid() {
        let map = GridMap::open(3, 3);
        let dmap = build_distance_map(&map, c(0, 0));
        assert_eq!(dmap.get(c(2, 2)), 4);
        assert_eq!(dmap.get(c(0, 0)), 0);
        assert_eq!(dmap.max_finite(), 4);
    }

    #[test]
    fn distance_map_walled_off_cell_is_unreachable() {
        // . @ .
        // @ @ .
        // . . .
        let blocked = vec![
            false, true, false, //
            true, true, false, //
            false, false, false,
        ];
        let map = GridMap::new(3, 3, blocked).unwrap();
        let dmap = build_distance_map(&map, c(2, 2));
        assert_eq!(dmap.get(c(0, 0)), UNREACHABLE);
        assert_eq!(dmap.get(c(2, 0)), 2);
    }

    #[test]
    fn plan_path_unconstrained_is_manhattan() {
        let map = GridMap::open(3, 3);
        let dmap = build_distance_map(&map, c(2, 2));
        let table = ConstraintTable::new(10);
        let limits = SearchLimits::new(10, 5, &dmap);
        let mut meter = BudgetMeter::new(1_000);
        let path = plan_path(&map, c(0, 0), c(2, 2), &table, &dmap, &limits, u64::MAX, &mut meter)
            .unwrap();
        assert_eq!(path.cost(), 4);
        assert_eq!(path.start(), c(0, 0));
        assert_eq!(path.end(), c(2, 2));
    }

    #[test]
    fn plan_path_waits_out_hard_blocks() {
        let map = GridMap::open(3, 3);
        let dmap = build_distance_map(&map, c(2, 2));
        let mut table = ConstraintTable::new(10);
        // Block both distance-reducing first moves at t=1 by hand.
        table.hard_vertices.insert((c(1, 0), 1));
        table.hard_vertices.insert((c(0, 1), 1));
        let limits = SearchLimits::new(10, 5, &dmap);
        let mut meter = BudgetMeter::new(10_000);
        let path = plan_path(&map, c(0, 0), c(2, 2), &table, &dmap, &limits, u64::MAX, &mut meter)
            .unwrap();
        let oracle = time_expanded_oracle(&map, c(0, 0), c(2, 2), &table, limits.time_cap).unwrap();
        assert_eq!(oracle, 5);
        assert_eq!(path.cost(), oracle);
    }

    #[test]
    fn budget_one_exhausts_after_single_expansion() {
        let map = GridMap::open(3, 3);
        let dmap = build_distance_map(&map, c(2, 2));
        let table = ConstraintTable::new(10);
        let limits = SearchLimits::new(10, 5, &dmap);
        let mut meter = BudgetMeter::new(1_000);
        let out = plan_path(&map, c(0, 0), c(2, 2), &table, &dmap, &limits, 1, &mut meter);
        assert_eq!(out.unwrap_err(), PlanFailure::BudgetExhausted);
        assert_eq!(meter.used(), 1);
    }

    #[test]
    fn zero_budget_fails_without_charge() {
        let map = GridMap::open(3, 3);
        let dmap = build_distance_map(&map, c(2, 2));
        let table = ConstraintTable::new(10);
        let limits = SearchLimits::new(10, 5, &dmap);
        let mut meter = BudgetMeter::new(1_000);
        let out = plan_path(&map, c(0, 0), c(2, 2), &table, &dmap, &limits, 0, &mut meter);
        assert_eq!(out.unwrap_err(), PlanFailure::BudgetExhausted);
        assert_eq!(meter.used(), 0);
    }

    #[test]
    fn at_goal_query_is_free() {
        let map = GridMap::open(3, 3);
        let dmap = build_distance_map(&map, c(1, 1));
        let table = ConstraintTable::new(10);
        let limits = SearchLimits::new(10, 5, &dmap);
        let mut meter = BudgetMeter::new(1_000);
        let path =
            plan_path(&map, c(1, 1), c(1, 1), &table, &dmap, &limits, 0, &mut meter).unwrap();
        assert_eq!(path.cells(), &[c(1, 1)]);
        assert_eq!(meter.used(), 0);
    }

    #[test]
    fn meter_never_exceeds_ceiling() {
        let map = GridMap::open(8, 8);
        let dmap = build_distance_map(&map, c(7, 7));
        let table = ConstraintTable::new(10);
        let limits = SearchLimits::new(10, 5, &dmap);
        let mut meter = BudgetMeter::new(3);
        let out = plan_path(&map, c(0, 0), c(7, 7), &table, &dmap, &limits, u64::MAX, &mut meter);
        assert_eq!(out.unwrap_err(), PlanFailure::BudgetExhausted);
        assert_eq!(meter.used(), 3);
        assert!(meter.is_exhausted());
    }

    #[test]
    fn no_path_when_goal_component_disconnected() {
        // start | wall | goal
        let blocked = vec![false, true, false];
        let map = GridMap::new(3, 1, blocked).unwrap();
        let dmap = build_distance_map(&map, c(2, 0));
        let table = ConstraintTable::new(10);
        let limits = SearchLimits::new(10, 5, &dmap);
        let mut meter = BudgetMeter::new(1_000);
        let out = plan_path(&map, c(0, 0), c(2, 0), &table, &dmap, &limits, u64::MAX, &mut meter);
        assert_eq!(out.unwrap_err(), PlanFailure::NoPath);
    }

    #[test]
    fn returned_path_is_terminal_safe() {
        // A hard path crosses the goal cell after the agent's natural arrival
        // time, so parking early would collide: the planner must delay.
        let map = GridMap::open(4, 2);
        let goal = c(3, 0);
        let dmap = build_distance_map(&map, goal);
        let mut table = ConstraintTable::new(8);
        let crosser = TimedPath::new(vec![
            c(3, 1),
            c(3, 1),
            c(3, 1),
            c(3, 1),
            c(3, 0), // crosses the goal at t=4
            c(2, 0),
        ])
        .unwrap();
        table.add_hard_path(&crosser);
        assert_eq!(table.earliest_park(goal), 5);
        let limits = SearchLimits::new(8, 4, &dmap);
        let mut meter = BudgetMeter::new(100_000);
        let path = plan_path(&map, c(0, 0), goal, &table, &dmap, &limits, u64::MAX, &mut meter)
            .expect("a delayed arrival exists");
        assert!(path.cost() >= 5, "must arrive after the crossing, got {path:?}");
        let oracle = time_expanded_oracle(&map, c(0, 0), goal, &table, limits.time_cap).unwrap();
        assert_eq!(path.cost(), oracle);
        for t in 0..=limits.horizon {
            assert!(
                !table.hard_blocks_vertex(path.position_at(t), t),
                "vertex violation at t={t}"
            );
            if t > 0 {
                assert!(!table.hard_blocks_move(
                    path.position_at(t - 1),
                    path.position_at(t),
                    t
                ));
            }
        }
    }

    fn arb_obstacle_map(w: u32, h: u32) -> impl Strategy<Value = GridMap> {
        proptest::collection::vec(proptest::bool::weighted(0.25), (w * h) as usize)
            .prop_map(move |blocked| GridMap::new(w, h, blocked).unwrap())
    }

    proptest! {
        // With empty constraints and unlimited budget the search is plain
        // shortest-path; compare against the independent BFS oracle.
        #[test]
        fn optimal_against_bfs_oracle(map in arb_obstacle_map(8, 8), sx in 0u32..8, sy in 0u32..8, gx in 0u32..8, gy in 0u32..8) {
            let (start, goal) = (c(sx, sy), c(gx, gy));
            prop_assume!(!map.is_blocked(start) && !map.is_blocked(goal));
            let dmap = build_distance_map(&map, goal);
            let expected = bfs_oracle(&map, start, goal);
            prop_assert_eq!(dmap.get(start), expected);
            let table = ConstraintTable::new(6);
            let limits = SearchLimits::new(6, 3, &dmap);
            let mut meter = BudgetMeter::new(u64::MAX);
            match plan_path(&map, start, goal, &table, &dmap, &limits, u64::MAX, &mut meter) {
                Ok(path) => prop_assert_eq!(path.cost(), expected),
                Err(PlanFailure::NoPath) => prop_assert_eq!(expected, UNREACHABLE),
                Err(e) => prop_assert!(false, "unexpected {:?}", e),
            }
        }

        // Hard-safety: paths returned under random hard constraints violate
        // nothing within the horizon, and match the brute-force cost.
        #[test]
        fn hard_safety_and_cost(map in arb_obstacle_map(6, 6), seeds in proptest::collection::vec((0u32..6, 0u32..6), 2), sx in 0u32..6, sy in 0u32..6, gx in 0u32..6, gy in 0u32..6) {
            let (start, goal) = (c(sx, sy), c(gx, gy));
            prop_assume!(!map.is_blocked(start) && !map.is_blocked(goal));
            let horizon = 6;
            let mut table = ConstraintTable::new(horizon);
            for (hx, hy) in seeds {
                let from = c(hx, hy);
                if map.is_blocked(from) || from == start {
                    continue;
                }
                // A short greedy walk as a hard path.
                let mut cells = vec![from];
                for _ in 0..3 {
                    let cur = *cells.last().unwrap();
                    match map.neighbors4(cur).next() {
                        Some(n) => cells.push(n),
                        None => break,
                    }
                }
                table.add_hard_path(&TimedPath::new(cells).unwrap());
            }
            prop_assume!(!table.hard_blocks_vertex(start, 0));
            let dmap = build_distance_map(&map, goal);
            let limits = SearchLimits::new(horizon, 3, &dmap);
            let mut meter = BudgetMeter::new(u64::MAX);
            let result = plan_path(&map, start, goal, &table, &dmap, &limits, u64::MAX, &mut meter);
            let oracle = time_expanded_oracle(&map, start, goal, &table, limits.time_cap);
            match (result, oracle) {
                (Ok(path), Some(cost)) => {
                    prop_assert_eq!(path.cost(), cost);
                    for t in 0..=horizon {
                        prop_assert!(!table.hard_blocks_vertex(path.position_at(t), t));
                        if t > 0 {
                            prop_assert!(!table.hard_blocks_move(
                                path.position_at(t - 1),
                                path.position_at(t),
                                t
                            ));
                        }
                    }
                }
                (Err(PlanFailure::NoPath), None) => {}
                (got, want) => prop_assert!(false, "planner {:?} vs oracle {:?}", got, want),
            }
        }

        // Soft-optimality: on a 5x5 grid with up to 2 soft paths, the
        // (collisions, cost) objective matches exhaustive enumeration of all
        // paths up to a cost cap.
        #[test]
        fn soft_objective_matches_enumeration(softs in proptest::collection::vec(proptest::collection::vec((0u32..5, 0u32..5), 1..5), 0..3), gx in 0u32..5, gy in 0u32..5) {
            let map = GridMap::open(5, 5);
            let start = c(0, 0);
            let goal = c(gx, gy);
            let horizon = 6u32;
            let mut table = ConstraintTable::new(horizon);
            let mut soft_paths = Vec::new();
            for raw in softs {
                // Make the raw cells a legal walk by bridging gaps with waits.
                let mut cells = vec![c(raw[0].0, raw[0].1)];
                for &(x, y) in &raw[1..] {
                    let target = c(x, y);
                    while *cells.last().unwrap() != target {
                        let cur = *cells.last().unwrap();
                        let step = if cur.x < target.x {
                            c(cur.x + 1, cur.y)
                        } else if cur.x > target.x {
                            c(cur.x - 1, cur.y)
                        } else if cur.y < target.y {
                            c(cur.x, cur.y + 1)
                        } else {
                            c(cur.x, cur.y - 1)
                        };
                        cells.push(step);
                    }
                }
                let path = TimedPath::new(cells).unwrap();
                table.add_soft_path(&path);
                soft_paths.push(path);
            }

            let cost_cap = horizon + 4;
            // Exhaustive DFS over all paths of cost <= cost_cap, evaluating
            // each with find_conflicts-style padded counting.
            fn evaluate(path: &[Cell], softs: &[TimedPath], horizon: u32) -> u64 {
                let at = |cells: &[Cell], t: u32| cells[(t as usize).min(cells.len() - 1)];
                let mut collisions = 0u64;
                for s in softs {
                    for t in 1..=horizon {
                        let (p, q) = (at(path, t), s.position_at(t));
                        if p == q {
                            collisions += 1;
                        } else if at(path, t - 1) == q
                            && s.position_at(t - 1) == p
                            && p != at(path, t - 1)
                        {
                            collisions += 1;
                        }
                    }
                }
                collisions
            }
            let mut best: Option<(u64, u32)> = None;
            let mut stack = vec![vec![start]];
            while let Some(cells) = stack.pop() {
                let cur = *cells.last().unwrap();
                if cur == goal {
                    let obj = (evaluate(&cells, &soft_paths, horizon), (cells.len() - 1) as u32);
                    best = Some(match best {
                        None => obj,
                        Some(b) if obj < b => obj,
                        Some(b) => b,
                    });
                }
                if (cells.len() - 1) as u32 == cost_cap {
                    continue;
                }
                for next in map.neighbors4(cur).chain(std::iter::once(cur)) {
                    let mut extended = cells.clone();
                    extended.push(next);
                    stack.push(extended);
                }
            }

            let dmap = build_distance_map(&map, goal);
            let limits = SearchLimits {
                horizon,
                time_cap: cost_cap,
                soft_weight: 1,
                mode: SearchMode::ReachGoal,
                objective: SoftObjective::Lexicographic,
            };
            let mut meter = BudgetMeter::new(u64::MAX);
            let path = plan_path(&map, start, goal, &table, &dmap, &limits, u64::MAX, &mut meter)
                .expect("open 5x5 grid always has a path");
            let got = (evaluate(path.cells(), &soft_paths, horizon), path.cost());
            prop_assert_eq!(got, best.unwrap());

            // Cross-check the collision count with find_conflicts on the
            // padded pair, one soft path at a time.
            let mut from_domain = 0u64;
            for s in &soft_paths {
                let sol = PartialSolution::new(vec![path.clone(), s.clone()]);
                from_domain += crate::domain::find_conflicts(&sol, horizon)
                    .iter()
                    .filter(|cf| cf.time > 0)
                    .count() as u64;
            }
            prop_assert_eq!(from_domain, got.0);
        }

        #[test]
        fn meter_monotone_and_bounded(budget in 1u64..40) {
            let map = GridMap::open(8, 8);
            let dmap = build_distance_map(&map, c(7, 7));
            let table = ConstraintTable::new(10);
            let limits = SearchLimits::new(10, 5, &dmap);
            let mut meter = BudgetMeter::new(budget);
            let before = meter.used();
            let _ = plan_path(&map, c(0, 0), c(7, 7), &table, &dmap, &limits, u64::MAX, &mut meter);
            prop_assert!(meter.used() >= before);
            prop_assert!(meter.used() <= meter.ceiling());
        }
    }
}
