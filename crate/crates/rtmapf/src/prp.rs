//! Prioritized Planning under a planning budget, with pluggable per-agent
//! budget allocation (a Shared pool, or Fixed even splitting with excess
//! redistribution) and the Persist behavior: one agent's failure never stops
//! planning for the agents after it.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::domain::{Cell, DomainError, Instance, PartialSolution, TimedPath};
use crate::search::{plan_path, BudgetMeter, ConstraintTable, DistanceMap, SearchLimits};

/// A bijection on agent ids; earlier entries plan first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriorityOrder(Vec<usize>);

impl PriorityOrder {
    pub fn new(perm: Vec<usize>) -> Result<Self, DomainError> {
        let mut seen = vec![false; perm.len()];
        for &a in &perm {
            if a >= perm.len() || seen[a] {
                return Err(DomainError::NotAPermutation(perm.len()));
            }
            seen[a] = true;
        }
        Ok(Self(perm))
    }

    pub fn identity(k: usize) -> Self {
        Self((0..k).collect())
    }

    pub fn random<R: Rng>(k: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(rng);
        Self(perm)
    }

    pub fn agents(&self) -> &[usize] {
        &self.0
    }
}

/// How the per-period budget is split across agents within one sequential
/// planning pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentBudgetPolicy {
    /// Every agent may draw from the whole remaining pool.
    Shared,
    /// Even split over the agents not yet planned, with unused allocation
    /// returned to the pool.
    Fixed,
}

impl fmt::Display for AgentBudgetPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Shared => write!(f, "shared"),
            Self::Fixed => write!(f, "fixed"),
        }
    }
}

impl FromStr for AgentBudgetPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared" => Ok(Self::Shared),
            "fixed" => Ok(Self::Fixed),
            other => Err(format!("unknown agent budget policy `{other}`")),
        }
    }
}

/// The Fixed policy's allocation for the next agent: an even share of what is
/// left. Re-applied after every agent, so unused budget is redistributed over
/// the agents that have not planned yet.
pub fn allocate_fixed(total_remaining: u64, agents_remaining: usize) -> u64 {
    debug_assert!(agents_remaining >= 1);
    total_remaining / agents_remaining as u64
}

/// Per-agent diagnostics from one prioritized planning pass, in planning
/// order.
#[derive(Clone, Debug)]
pub struct AgentPlanStat {
    pub agent: usize,
    pub planned: bool,
    pub expansions: u64,
    pub allocation: u64,
}

#[derive(Clone, Debug)]
pub struct PrpOutcome {
    pub solution: PartialSolution,
    pub stats: Vec<AgentPlanStat>,
}

impl PrpOutcome {
    pub fn planned(&self, agent: usize) -> bool {
        self.stats
            .iter()
            .find(|s| s.agent == agent)
            .map(|s| s.planned)
            .unwrap_or(false)
    }
}

/// One prioritized planning pass. Agents already at their goals are planned
/// first with trivial stay-paths at zero cost; the rest follow `order`, each
/// hard-constrained by every path found so far this period (tail-padded
/// within the horizon). On NoPath or BudgetExhausted the agent keeps a
/// length-1 path and planning persists with the next agent. Planned paths are
/// mutually hard-conflict-free within the horizon.
pub fn prp_plan(
    instance: &Instance,
    positions: &[Cell],
    order: &PriorityOrder,
    policy: AgentBudgetPolicy,
    dmaps: &[DistanceMap],
    meter: &mut BudgetMeter,
) -> PrpOutcome {
    let horizon = instance.horizon();
    let window = instance.window();
    let goals = instance.goals();
    let mut paths: Vec<TimedPath> = positions.iter().map(|&p| TimedPath::stay(p)).collect();
    let mut stats = Vec::with_capacity(order.agents().len());
    let mut table = ConstraintTable::new(horizon);

    let (parked, movers): (Vec<usize>, Vec<usize>) = order
        .agents()
        .iter()
        .copied()
        .partition(|&a| positions[a] == goals[a]);

    for a in parked {
        table.add_hard_path(&paths[a]);
        stats.push(AgentPlanStat {
            agent: a,
            planned: true,
            expansions: 0,
            allocation: 0,
        });
    }

    for (idx, &a) in movers.iter().enumerate() {
        let pool = meter.remaining();
        let allocation = match policy {
            AgentBudgetPolicy::Shared => pool,
            AgentBudgetPolicy::Fixed => allocate_fixed(pool, movers.len() - idx),
        };
        let limits = SearchLimits::new(horizon, window, &dmaps[a]);
        let before = meter.used();
        let planned = match plan_path(
            instance.map(),
            positions[a],
            goals[a],
            &table,
            &dmaps[a],
            &limits,
            allocation,
            meter,
        ) {
            Ok(path) => {
                table.add_hard_path(&path);
                paths[a] = path;
                true
            }
            Err(_) => false,
        };
        stats.push(AgentPlanStat {
            agent: a,
            planned,
            expansions: meter.used() - before,
            allocation,
        });
    }

    PrpOutcome {
        solution: PartialSolution::new(paths),
        stats,
    }
}
