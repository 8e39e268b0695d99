//! PIBT: a one-step-at-a-time planner with dynamic priorities, priority
//! inheritance, and backtracking, plus the hybrid combiner that runs PIBT and
//! LNS2 side by side and keeps the better partial solution. PIBT never
//! touches a budget meter; its expansions are modeled as free.

use std::collections::{HashMap, HashSet};

use rand::Rng;

use crate::domain::{Cell, GridMap, Instance, PartialSolution, TimedPath};
use crate::lns2::{lns2_plan, LnsConfig, NeighborhoodBudgetPolicy};
use crate::runtime::{resolve, FailPolicy};
use crate::search::{BudgetMeter, DistanceMap, UNREACHABLE};

/// Per-agent dynamic priority state: steps since the agent last stood on its
/// goal (0 while parked there), with the agent id as the deterministic
/// tie-break. Owned by the runtime loop and threaded across periods.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PibtState {
    positions: Vec<Cell>,
    epochs: Vec<u64>,
}

impl PibtState {
    pub fn new(positions: Vec<Cell>) -> Self {
        let epochs = vec![0; positions.len()];
        Self { positions, epochs }
    }

    pub fn with_epochs(positions: Vec<Cell>, epochs: Vec<u64>) -> Self {
        assert_eq!(positions.len(), epochs.len());
        Self { positions, epochs }
    }

    pub fn positions(&self) -> &[Cell] {
        &self.positions
    }

    pub fn epochs(&self) -> &[u64] {
        &self.epochs
    }
}

struct StepSolver<'a> {
    map: &'a GridMap,
    dmaps: &'a [DistanceMap],
    positions: &'a [Cell],
    occupant: HashMap<Cell, usize>,
    next: Vec<Option<Cell>>,
    reserved: HashSet<Cell>,
}

impl StepSolver<'_> {
    fn commit(&mut self, agent: usize, cell: Cell) {
        self.next[agent] = Some(cell);
        self.reserved.insert(cell);
    }

    fn retract(&mut self, agent: usize, cell: Cell) {
        self.next[agent] = None;
        self.reserved.remove(&cell);
    }

    // Classic PIBT assignment. Returns false only when called through
    // inheritance and every candidate (including waiting, whose cell the
    // parent just reserved) fails; the parent then tries its next candidate.
    fn solve(&mut self, agent: usize) -> bool {
        let from = self.positions[agent];
        let mut candidates: Vec<Cell> = self
            .map
            .neighbors4(from)
            .chain(std::iter::once(from))
            .collect();
        candidates.sort_by_key(|&c| (self.dmaps[agent].get(c), self.map.index(c)));
        for cand in candidates {
            if self.reserved.contains(&cand) {
                continue;
            }
            match self.occupant.get(&cand).copied() {
                Some(other) if other != agent => {
                    match self.next[other] {
                        Some(dest) => {
                            if dest == from {
                                continue; // would swap with a committed move
                            }
                            // `other` is vacating; the cell is free at t+1.
                            self.commit(agent, cand);
                            return true;
                        }
                        None => {
                            // Priority inheritance: the occupant must vacate
                            // before this move stands.
                            self.commit(agent, cand);
                            if self.solve(other) {
                                return true;
                            }
                            self.retract(agent, cand);
                            continue;
                        }
                    }
                }
                _ => {
                    self.commit(agent, cand);
                    return true;
                }
            }
        }
        false
    }
}

/// One synchronized step for all agents, in descending priority order. The
/// assignment never contains vertex or swap conflicts and costs nothing on
/// any meter. `state` is advanced: positions move, epochs reset to 0 at the
/// goal and increment elsewhere.
pub fn pibt_step(
    map: &GridMap,
    state: &mut PibtState,
    goals: &[Cell],
    dmaps: &[DistanceMap],
) -> Vec<Cell> {
    let k = state.positions.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&a| (std::cmp::Reverse(state.epochs[a]), a));

    let mut solver = StepSolver {
        map,
        dmaps,
        positions: &state.positions,
        occupant: state
            .positions
            .iter()
            .enumerate()
            .map(|(a, &c)| (c, a))
            .collect(),
        next: vec![None; k],
        reserved: HashSet::new(),
    };
    for a in order {
        if solver.next[a].is_none() {
            let ok = solver.solve(a);
            debug_assert!(ok, "top-level PIBT assignment cannot fail");
        }
    }
    let next: Vec<Cell> = solver
        .next
        .into_iter()
        .map(|c| c.expect("every agent is assigned"))
        .collect();

    #[cfg(debug_assertions)]
    {
        let distinct: HashSet<Cell> = next.iter().copied().collect();
        debug_assert_eq!(distinct.len(), k, "vertex conflict in PIBT step");
        for i in 0..k {
            for j in (i + 1)..k {
                debug_assert!(
                    !(next[i] == state.positions[j]
                        && next[j] == state.positions[i]
                        && state.positions[i] != state.positions[j]),
                    "swap conflict in PIBT step"
                );
            }
        }
    }

    state.positions = next.clone();
    for a in 0..k {
        state.epochs[a] = if state.positions[a] == goals[a] {
            0
        } else {
            state.epochs[a] + 1
        };
    }
    next
}

/// Apply [`pibt_step`] `w` times, threading the priority state. The result is
/// a conflict-free `w`-step prefix for every agent, at zero metered cost.
pub fn pibt_prefix(
    map: &GridMap,
    state: &mut PibtState,
    goals: &[Cell],
    dmaps: &[DistanceMap],
    w: u32,
) -> PartialSolution {
    let k = state.positions.len();
    let mut cells: Vec<Vec<Cell>> = state.positions.iter().map(|&c| vec![c]).collect();
    for _ in 0..w {
        let step = pibt_step(map, state, goals, dmaps);
        for a in 0..k {
            cells[a].push(step[a]);
        }
    }
    PartialSolution::new(
        cells
            .into_iter()
            .map(|c| TimedPath::new(c).expect("PIBT steps are grid moves"))
            .collect(),
    )
}

/// Progress score of a partial solution: the number of agents whose resolved
/// `w`-step prefix strictly decreases their distance to goal, then (for
/// tie-breaks, lower is better) the post-window sum of goal distances.
fn prefix_score(
    sol: &PartialSolution,
    fail_policy: FailPolicy,
    dmaps: &[DistanceMap],
    w: u32,
) -> (usize, u64) {
    let prefix = resolve(sol, fail_policy, w);
    let mut progressing = 0usize;
    let mut post_window = 0u64;
    for (a, path) in prefix.paths().iter().enumerate() {
        let before = dmaps[a].get(path.position_at(0));
        let after = dmaps[a].get(path.position_at(w));
        if after < before {
            progressing += 1;
        }
        post_window += if after == UNREACHABLE {
            1_000_000
        } else {
            u64::from(after)
        };
    }
    (progressing, post_window)
}

/// Run LNS2 (metered) and a PIBT prefix (free) and return whichever partial
/// solution commits more useful progress: more agents moving strictly closer
/// to their goals after fail-policy resolution, then the lower post-window
/// distance sum. Ties keep the LNS2 solution. Meter usage is exactly
/// LNS2's usage.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_plan<R: Rng>(
    instance: &Instance,
    positions: &[Cell],
    epochs: &[u64],
    nb_policy: NeighborhoodBudgetPolicy,
    cfg: &LnsConfig,
    fail_policy: FailPolicy,
    dmaps: &[DistanceMap],
    meter: &mut BudgetMeter,
    rng: &mut R,
) -> PartialSolution {
    let w = instance.window();
    let goals = instance.goals();
    let lns = lns2_plan(instance, positions, nb_policy, cfg, dmaps, meter, rng).solution;
    let mut sim = PibtState::with_epochs(positions.to_vec(), epochs.to_vec());
    let pibt = pibt_prefix(instance.map(), &mut sim, &goals, dmaps, w);

    let lns_score = prefix_score(&lns, fail_policy, dmaps, w);
    let pibt_score = prefix_score(&pibt, fail_policy, dmaps, w);
    let pibt_wins =
        pibt_score.0 > lns_score.0 || (pibt_score.0 == lns_score.0 && pibt_score.1 < lns_score.1);
    if pibt_wins {
        pibt
    } else {
        lns
    }
}
