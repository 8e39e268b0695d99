//! MAPF-LNS2: an initial prioritized pass where earlier agents' paths are
//! soft constraints only, then a neighborhood repair loop that replans small
//! agent subsets to drive down the conflict count. Each repair iteration is
//! funded through a pluggable neighborhood budget policy; ConflictProportion
//! allocates in proportion to the neighborhood's share of the incumbent's
//! conflicts, floored by a per-neighborhood lower bound.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::domain::{
    find_conflicts, makespan, soc, Cell, Conflict, ConflictKind, Instance, PartialSolution,
    TimedPath,
};
use crate::prp::{allocate_fixed, AgentBudgetPolicy};
use crate::search::{
    plan_path, BudgetMeter, ConstraintTable, DistanceMap, PlanFailure, SearchLimits, SearchMode,
};

/// How much of the remaining period budget one chosen neighborhood receives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborhoodBudgetPolicy {
    /// The whole remaining pool, until the neighborhood succeeds or fails.
    Shared,
    /// A fixed allowance per neighborhood.
    Fixed(u64),
    /// Proportional to the neighborhood's share of conflicts, floored by the
    /// per-neighborhood lower bound.
    ConflictProportion,
}

impl fmt::Display for NeighborhoodBudgetPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Shared => write!(f, "shared"),
            Self::Fixed(b) => write!(f, "fixed:{b}"),
            Self::ConflictProportion => write!(f, "cpb"),
        }
    }
}

impl FromStr for NeighborhoodBudgetPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared" => Ok(Self::Shared),
            "cpb" => Ok(Self::ConflictProportion),
            other => match other.strip_prefix("fixed:").and_then(|v| v.parse().ok()) {
                Some(b) if b >= 1 => Ok(Self::Fixed(b)),
                _ => Err(format!(
                    "unknown neighborhood budget policy `{other}` (expected shared, cpb, or fixed:<B_F>)"
                )),
            },
        }
    }
}

/// The agent subset replanned together in one repair iteration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    agents: Vec<usize>,
}

impl Neighborhood {
    /// `agents` must be nonempty and duplicate-free; stored sorted.
    pub fn new(mut agents: Vec<usize>) -> Self {
        assert!(!agents.is_empty(), "a neighborhood cannot be empty");
        agents.sort_unstable();
        agents.dedup();
        Self { agents }
    }

    pub fn agents(&self) -> &[usize] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, agent: usize) -> bool {
        self.agents.binary_search(&agent).is_ok()
    }
}

/// Which timesteps are scanned when counting an agent's conflicts for the
/// ConflictProportion formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConflictScope {
    /// Within the planning horizon only (consistent with windowed planning).
    Horizon,
    /// Over the incumbent's full paths.
    FullPath,
}

#[derive(Clone, Copy, Debug)]
pub struct LnsConfig {
    /// Agents per neighborhood.
    pub nb_size: usize,
    /// Probability of conflict-seeded neighborhood selection (the rest of the
    /// draws use a uniform random subset).
    pub p_conflict: f64,
    /// Budget split across agents inside one neighborhood replan.
    pub intra: AgentBudgetPolicy,
    pub conflict_scope: ConflictScope,
    /// Initial-phase search mode; reach-goal by default, horizon prefixes as
    /// the windowed variant.
    pub phase1_mode: SearchMode,
    /// Initial-phase collision penalty in steps. The initial pass prices
    /// collisions instead of forbidding them, which keeps its searches cheap
    /// and its paths direct; the repair phase is what drives collisions out.
    pub phase1_soft_weight: u32,
}

impl Default for LnsConfig {
    fn default() -> Self {
        Self {
            nb_size: 4,
            p_conflict: 0.8,
            intra: AgentBudgetPolicy::Shared,
            conflict_scope: ConflictScope::Horizon,
            phase1_mode: SearchMode::ReachGoal,
            phase1_soft_weight: 5,
        }
    }
}

/// Budget granted to neighborhood `n`.
///
/// Shared takes everything that is left. Fixed(B_F) takes `min(B_F,
/// remaining)`. ConflictProportion takes `min(remaining, max(B(N), B_L(N)))`
/// with `B(N) = remaining * sum_{i in N} conflicts(i) / sum_{j} conflicts(j)`
/// rounded down (zero when no conflicts are recorded at all) and the lower
/// bound `B_L(N) = (|N|(|N|+1)/2 + 1) * w`.
pub fn neighborhood_budget(
    policy: NeighborhoodBudgetPolicy,
    n: &Neighborhood,
    conflicts_per_agent: &[usize],
    remaining: u64,
    window: u32,
) -> u64 {
    match policy {
        NeighborhoodBudgetPolicy::Shared => remaining,
        NeighborhoodBudgetPolicy::Fixed(bf) => bf.min(remaining),
        NeighborhoodBudgetPolicy::ConflictProportion => {
            let sum_all: u64 = conflicts_per_agent.iter().map(|&c| c as u64).sum();
            let sum_n: u64 = n
                .agents()
                .iter()
                .map(|&a| conflicts_per_agent[a] as u64)
                .sum();
            let proportional = if sum_all == 0 {
                0
            } else {
                ((remaining as u128 * sum_n as u128) / sum_all as u128) as u64
            };
            let size = n.len() as u64;
            let lower_bound = (size * (size + 1) / 2 + 1) * u64::from(window);
            proportional.max(lower_bound).min(remaining)
        }
    }
}

/// Pick the next neighborhood. With probability `p_conflict` the draw is
/// conflict-seeded: start from a uniformly random conflicting agent and grow
/// by a random walk over agents it conflicts with, falling back to uniform
/// random agents when the walk gets stuck. Otherwise it is a uniform random
/// subset.
pub fn select_neighborhood<R: Rng>(
    conflicts: &[Conflict],
    agent_count: usize,
    nb_size: usize,
    p_conflict: f64,
    rng: &mut R,
) -> Neighborhood {
    debug_assert!(!conflicts.is_empty(), "selection requires a conflict");
    let size = nb_size.min(agent_count).max(1);
    if size == agent_count {
        return Neighborhood::new((0..agent_count).collect());
    }

    if rng.random_bool(p_conflict) {
        // Partner lists per agent, sorted for determinism.
        let mut partners: Vec<Vec<usize>> = vec![Vec::new(); agent_count];
        for cf in conflicts {
            partners[cf.agents.0].push(cf.agents.1);
            partners[cf.agents.1].push(cf.agents.0);
        }
        for list in &mut partners {
            list.sort_unstable();
            list.dedup();
        }
        let mut conflicting: Vec<usize> = (0..agent_count)
            .filter(|&a| !partners[a].is_empty())
            .collect();
        conflicting.sort_unstable();

        let seed = conflicting[rng.random_range(0..conflicting.len())];
        let mut chosen = vec![seed];
        let mut in_set: HashSet<usize> = HashSet::from([seed]);
        let mut cursor = seed;
        while chosen.len() < size {
            let next: Vec<usize> = partners[cursor]
                .iter()
                .copied()
                .filter(|a| !in_set.contains(a))
                .collect();
            if next.is_empty() {
                break;
            }
            cursor = next[rng.random_range(0..next.len())];
            chosen.push(cursor);
            in_set.insert(cursor);
        }
        while chosen.len() < size {
            let complement: Vec<usize> =
                (0..agent_count).filter(|a| !in_set.contains(a)).collect();
            let pick = complement[rng.random_range(0..complement.len())];
            chosen.push(pick);
            in_set.insert(pick);
        }
        Neighborhood::new(chosen)
    } else {
        let mut ids: Vec<usize> = (0..agent_count).collect();
        for i in 0..size {
            let j = rng.random_range(i..agent_count);
            ids.swap(i, j);
        }
        ids.truncate(size);
        Neighborhood::new(ids)
    }
}

/// Replan the agents of `n` with a prioritized pass: hard constraints against
/// the neighborhood paths planned so far this call, soft constraints against
/// the incumbent paths of every agent outside `n`. Charges at most
/// `allocation` expansions. Succeeds only if every neighborhood agent finds a
/// path; on failure the incumbent is untouched (charges stand).
#[allow(clippy::too_many_arguments)]
pub fn replan_neighborhood<R: Rng>(
    instance: &Instance,
    incumbent: &PartialSolution,
    n: &Neighborhood,
    allocation: u64,
    intra: AgentBudgetPolicy,
    dmaps: &[DistanceMap],
    meter: &mut BudgetMeter,
    rng: &mut R,
) -> Result<Vec<(usize, TimedPath)>, PlanFailure> {
    debug_assert!(allocation <= meter.remaining());
    if allocation == 0 {
        return Err(PlanFailure::BudgetExhausted);
    }
    let horizon = instance.horizon();
    let window = instance.window();
    let goals = instance.goals();

    let mut table = ConstraintTable::new(horizon);
    for agent in 0..incumbent.agent_count() {
        if !n.contains(agent) {
            table.add_soft_path(incumbent.path(agent));
        }
    }

    let mut order = n.agents().to_vec();
    order.shuffle(rng);
    let (parked, movers): (Vec<usize>, Vec<usize>) = order
        .into_iter()
        .partition(|&a| incumbent.path(a).start() == goals[a]);

    let mut out = Vec::with_capacity(n.len());
    for a in parked {
        let path = TimedPath::stay(goals[a]);
        table.add_hard_path(&path);
        out.push((a, path));
    }

    let mut allocation_left = allocation;
    for (idx, &a) in movers.iter().enumerate() {
        let agent_budget = match intra {
            AgentBudgetPolicy::Shared => allocation_left,
            AgentBudgetPolicy::Fixed => allocate_fixed(allocation_left, movers.len() - idx),
        };
        let limits = SearchLimits::new(horizon, window, &dmaps[a]);
        let before = meter.used();
        let result = plan_path(
            instance.map(),
            incumbent.path(a).start(),
            goals[a],
            &table,
            &dmaps[a],
            &limits,
            agent_budget,
            meter,
        );
        allocation_left -= meter.used() - before;
        match result {
            Ok(path) => {
                table.add_hard_path(&path);
                out.push((a, path));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Diagnostics from one LNS2 planning period.
#[derive(Clone, Debug)]
pub struct LnsOutcome {
    pub solution: PartialSolution,
    /// Within-horizon conflict pairs after the initial phase.
    pub initial_conflicts: usize,
    /// Incumbent conflict-pair count after each repair iteration.
    pub conflict_history: Vec<usize>,
    pub phase1_expansions: u64,
    pub iterations: usize,
}

/// One full LNS2 planning period: the soft-constrained initial pass, then the
/// repair loop while budget and within-horizon conflicts remain. A candidate
/// replaces the incumbent only with strictly fewer within-horizon conflict
/// pairs, or with equal pairs and strictly lower sum-of-costs. The returned
/// solution may still contain conflicts; the fail policy deals with them.
pub fn lns2_plan<R: Rng>(
    instance: &Instance,
    positions: &[Cell],
    nb_policy: NeighborhoodBudgetPolicy,
    cfg: &LnsConfig,
    dmaps: &[DistanceMap],
    meter: &mut BudgetMeter,
    rng: &mut R,
) -> LnsOutcome {
    let k = instance.agent_count();
    let horizon = instance.horizon();
    let window = instance.window();
    let goals = instance.goals();

    // Phase 1: prioritized pass with earlier paths as soft constraints only.
    let mut paths: Vec<TimedPath> = positions.iter().map(|&p| TimedPath::stay(p)).collect();
    let mut soft = ConstraintTable::new(horizon);
    let order: Vec<usize> = {
        let mut ids: Vec<usize> = (0..k).collect();
        ids.shuffle(rng);
        ids
    };
    let (parked, movers): (Vec<usize>, Vec<usize>) =
        order.into_iter().partition(|&a| positions[a] == goals[a]);
    for a in parked {
        soft.add_soft_path(&paths[a]);
    }
    for &a in &movers {
        let limits = match cfg.phase1_mode {
            SearchMode::ReachGoal => SearchLimits::new(horizon, window, &dmaps[a]),
            SearchMode::HorizonPrefix => SearchLimits::windowed(horizon),
        }
        .with_soft_penalty(cfg.phase1_soft_weight);
        if let Ok(path) = plan_path(
            instance.map(),
            positions[a],
            goals[a],
            &soft,
            &dmaps[a],
            &limits,
            meter.remaining(),
            meter,
        ) {
            soft.add_soft_path(&path);
            paths[a] = path;
        }
    }
    let phase1_expansions = meter.used();
    let mut outcome = lns2_repair(
        instance,
        PartialSolution::new(paths),
        nb_policy,
        cfg,
        dmaps,
        meter,
        rng,
    );
    outcome.phase1_expansions = phase1_expansions;
    outcome
}

/// The repair phase alone, starting from an arbitrary incumbent: loop while
/// budget and within-horizon conflicts remain, replanning one neighborhood
/// per iteration under the budget policy.
pub fn lns2_repair<R: Rng>(
    instance: &Instance,
    incumbent: PartialSolution,
    nb_policy: NeighborhoodBudgetPolicy,
    cfg: &LnsConfig,
    dmaps: &[DistanceMap],
    meter: &mut BudgetMeter,
    rng: &mut R,
) -> LnsOutcome {
    let k = instance.agent_count();
    let horizon = instance.horizon();
    let window = instance.window();
    let mut solution = incumbent;
    let mut conflicts = find_conflicts(&solution, horizon);
    let initial_conflicts = conflicts.len();
    let mut pair_count = conflicts.len();
    let mut per_agent = count_per_agent(&conflicts, k);
    let mut soc_now = soc(&solution);
    let mut history = Vec::new();
    let mut iterations = 0usize;
    let mut stalled = 0usize;
    let stall_limit = 4 * k + 16;

    while pair_count > 0 && !meter.is_exhausted() {
        let n = select_neighborhood(&conflicts, k, cfg.nb_size, cfg.p_conflict, rng);
        let budget_counts = match cfg.conflict_scope {
            ConflictScope::Horizon => per_agent.clone(),
            ConflictScope::FullPath => {
                let up_to = horizon.max(makespan(&solution));
                count_per_agent(&find_conflicts(&solution, up_to), k)
            }
        };
        let allocation =
            neighborhood_budget(nb_policy, &n, &budget_counts, meter.remaining(), window);
        let before = meter.used();
        let mut accepted = false;
        if let Ok(new_paths) =
            replan_neighborhood(instance, &solution, &n, allocation, cfg.intra, dmaps, meter, rng)
        {
            let new_n_conflicts = conflicts_replacing(&solution, &n, &new_paths, horizon);
            let old_n: usize = conflicts
                .iter()
                .filter(|c| n.contains(c.agents.0) || n.contains(c.agents.1))
                .count();
            let new_pair_count = pair_count - old_n + new_n_conflicts.len();
            let old_cost: u64 = n
                .agents()
                .iter()
                .map(|&a| solution.path(a).cost() as u64)
                .sum();
            let new_cost: u64 = new_paths.iter().map(|(_, p)| p.cost() as u64).sum();
            let new_soc = soc_now - old_cost + new_cost;
            if new_pair_count < pair_count
                || (new_pair_count == pair_count && new_soc < soc_now)
            {
                for (a, path) in new_paths {
                    solution.set_path(a, path);
                }
                conflicts.retain(|c| !n.contains(c.agents.0) && !n.contains(c.agents.1));
                conflicts.extend(new_n_conflicts);
                pair_count = new_pair_count;
                per_agent = count_per_agent(&conflicts, k);
                soc_now = new_soc;
                accepted = true;
            }
        }
        iterations += 1;
        history.push(pair_count);
        if meter.used() == before && !accepted {
            stalled += 1;
            if stalled > stall_limit {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    LnsOutcome {
        solution,
        initial_conflicts,
        conflict_history: history,
        phase1_expansions: 0,
        iterations,
    }
}

fn count_per_agent(conflicts: &[Conflict], k: usize) -> Vec<usize> {
    let mut counts = vec![0usize; k];
    for c in conflicts {
        counts[c.agents.0] += 1;
        counts[c.agents.1] += 1;
    }
    counts
}

/// Conflicts involving at least one neighborhood agent, evaluated as if the
/// neighborhood held `new_paths` while everyone else keeps the incumbent.
fn conflicts_replacing(
    sol: &PartialSolution,
    n: &Neighborhood,
    new_paths: &[(usize, TimedPath)],
    up_to: u32,
) -> Vec<Conflict> {
    let path_of = |a: usize| -> &TimedPath {
        new_paths
            .iter()
            .find(|(id, _)| *id == a)
            .map(|(_, p)| p)
            .unwrap_or_else(|| sol.path(a))
    };
    let k = sol.agent_count();
    let mut out = Vec::new();
    for &i in n.agents() {
        let pi = path_of(i);
        for j in 0..k {
            if j == i || (n.contains(j) && j < i) {
                continue;
            }
            let pj = path_of(j);
            for t in 0..=up_to {
                let (a, b) = (pi.position_at(t), pj.position_at(t));
                let pair = (i.min(j), i.max(j));
                if a == b {
                    out.push(Conflict {
                        agents: pair,
                        time: t,
                        kind: ConflictKind::Vertex { cell: a },
                    });
                } else if t > 0 {
                    let (pa, pb) = (pi.position_at(t - 1), pj.position_at(t - 1));
                    if a == pb && b == pa && pa != pb {
                        let (from, to) = if i < j { (pa, a) } else { (pb, b) };
                        out.push(Conflict {
                            agents: pair,
                            time: t,
                            kind: ConflictKind::Swap { from, to },
                        });
                    }
                }
            }
        }
    }
    out
}
