//! The plan/commit/execute loop: per-period budget metering, fail-policy
//! resolution of partial solutions into conflict-free `w`-step prefixes,
//! execution, termination detection, and per-episode metrics.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thiserror::Error;

use crate::domain::{find_conflicts, Cell, Instance, PartialSolution, TimedPath};
use crate::lns2::{lns2_plan, LnsConfig, NeighborhoodBudgetPolicy};
use crate::pibt::{hybrid_plan, pibt_prefix, PibtState};
use crate::prp::{prp_plan, AgentBudgetPolicy, PriorityOrder};
use crate::search::{build_distance_map, BudgetMeter, DistanceMap};

/// Converts a partial solution into a conflict-free `w`-step commitment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailPolicy {
    /// Every agent waits out the window. Trivially safe, never progresses.
    AllStay,
    /// Conflicting (and unplanned) agents stay; everyone else keeps moving.
    IStay,
}

impl fmt::Display for FailPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AllStay => write!(f, "allstay"),
            Self::IStay => write!(f, "istay"),
        }
    }
}

impl FromStr for FailPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "allstay" => Ok(Self::AllStay),
            "istay" => Ok(Self::IStay),
            other => Err(format!("unknown fail policy `{other}`")),
        }
    }
}

/// Exactly `w+1` cells per agent: the position at period start plus `w`
/// committed steps, conflict-free by construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionPrefix {
    window: u32,
    paths: Vec<TimedPath>,
}

impl SolutionPrefix {
    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn paths(&self) -> &[TimedPath] {
        &self.paths
    }
}

/// Resolve a partial solution into a committed prefix.
///
/// AllStay parks everyone for the window. IStay computes a fixpoint: the stay
/// set starts with every agent that has only a length-1 path or whose padded
/// `w`-step prefix participates in any conflict; then any moving agent whose
/// prefix would cross a staying agent's cell joins the set, until nothing
/// changes. The set only grows, so the fixpoint terminates.
pub fn resolve(partial: &PartialSolution, policy: FailPolicy, w: u32) -> SolutionPrefix {
    let k = partial.agent_count();
    let starts: Vec<Cell> = (0..k).map(|a| partial.path(a).start()).collect();
    let paths = match policy {
        FailPolicy::AllStay => starts
            .iter()
            .map(|&s| TimedPath::new(vec![s; w as usize + 1]).expect("stays are legal"))
            .collect(),
        FailPolicy::IStay => {
            let mut stay = vec![false; k];
            for (a, slot) in stay.iter_mut().enumerate() {
                *slot = partial.path(a).len() == 1;
            }
            for conflict in find_conflicts(partial, w) {
                stay[conflict.agents.0] = true;
                stay[conflict.agents.1] = true;
            }
            loop {
                let stay_cells: std::collections::HashSet<Cell> = (0..k)
                    .filter(|&a| stay[a])
                    .map(|a| starts[a])
                    .collect();
                let mut changed = false;
                for a in 0..k {
                    if stay[a] {
                        continue;
                    }
                    let path = partial.path(a);
                    if (1..=w).any(|t| stay_cells.contains(&path.position_at(t))) {
                        stay[a] = true;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            (0..k)
                .map(|a| {
                    let cells = if stay[a] {
                        vec![starts[a]; w as usize + 1]
                    } else {
                        (0..=w).map(|t| partial.path(a).position_at(t)).collect()
                    };
                    TimedPath::new(cells).expect("prefixes keep path geometry")
                })
                .collect()
        }
    };
    let prefix = SolutionPrefix { window: w, paths };
    debug_assert!(
        find_conflicts(&PartialSolution::new(prefix.paths.clone()), w).is_empty(),
        "resolved prefix must be conflict-free"
    );
    prefix
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Pibt,
    Prp,
    Lns2,
    Lns2Pibt,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pibt => write!(f, "pibt"),
            Self::Prp => write!(f, "prp"),
            Self::Lns2 => write!(f, "lns2"),
            Self::Lns2Pibt => write!(f, "lns2+pibt"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pibt" => Ok(Self::Pibt),
            "prp" => Ok(Self::Prp),
            "lns2" => Ok(Self::Lns2),
            "lns2+pibt" => Ok(Self::Lns2Pibt),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("neighborhood size must be at least 1")]
    ZeroNeighborhoodSize,
    #[error("p_conflict must lie in [0, 1], got {0}")]
    BadConflictProbability(f64),
    #[error("fixed neighborhood budget must be at least 1")]
    ZeroFixedBudget,
}

/// Full planner configuration for one episode.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Per-agent budget policy for PrP.
    pub prp_policy: AgentBudgetPolicy,
    /// Neighborhood budget policy for LNS2 and the hybrid.
    pub nb_policy: NeighborhoodBudgetPolicy,
    pub lns: LnsConfig,
    pub fail_policy: FailPolicy,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            prp_policy: AgentBudgetPolicy::Shared,
            nb_policy: NeighborhoodBudgetPolicy::ConflictProportion,
            lns: LnsConfig::default(),
            fail_policy: FailPolicy::IStay,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.lns.nb_size == 0 {
            return Err(ConfigError::ZeroNeighborhoodSize);
        }
        if !(0.0..=1.0).contains(&self.lns.p_conflict) {
            return Err(ConfigError::BadConflictProbability(self.lns.p_conflict));
        }
        if let NeighborhoodBudgetPolicy::Fixed(0) = self.nb_policy {
            return Err(ConfigError::ZeroFixedBudget);
        }
        Ok(())
    }

    /// The budget-policy column written to results CSVs.
    pub fn policy_label(&self) -> String {
        match self.algorithm {
            Algorithm::Pibt => "none".to_string(),
            Algorithm::Prp => self.prp_policy.to_string(),
            Algorithm::Lns2 | Algorithm::Lns2Pibt => self.nb_policy.to_string(),
        }
    }
}

/// What one episode did, step by step.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub solved: bool,
    /// First timestep with every agent at its goal, capped at the makespan
    /// cap when unsolved.
    pub makespan: u32,
    pub periods: u32,
    pub expansions_per_period: Vec<u64>,
    /// Conflicts present in the partial solution handed to the fail policy,
    /// per period.
    pub resolved_conflicts_per_period: Vec<usize>,
    pub expansions_total: u64,
    /// The executed trajectory, one per-timestep path per agent.
    pub trajectory: Vec<TimedPath>,
}

/// Run one full episode: alternate planning (within a fresh budget meter) and
/// execution of the fail-policy-resolved `w`-step prefix, until every agent
/// stands on its goal simultaneously or the makespan cap is hit. Goal arrival
/// is checked at every timestep, not just period boundaries. Deterministic
/// given (instance, config, seed).
pub fn run_episode(
    instance: &Instance,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<EpisodeResult, ConfigError> {
    cfg.validate()?;
    let k = instance.agent_count();
    let w = instance.window();
    let cap = instance.makespan_cap();
    let goals = instance.goals();
    let dmaps: Vec<DistanceMap> = instance
        .agents()
        .iter()
        .map(|a| build_distance_map(instance.map(), a.goal))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = instance.starts();
    let mut epochs = vec![0u64; k];
    let mut trajectory: Vec<Vec<Cell>> = positions.iter().map(|&c| vec![c]).collect();
    let mut expansions_per_period = Vec::new();
    let mut resolved_per_period = Vec::new();

    let all_home = |pos: &[Cell]| pos.iter().zip(&goals) .all(|(p, g)| p == g);

    let mut t = 0u32;
    let mut solved = all_home(&positions);
    let mut makespan = if solved { 0 } else { cap };

    while !solved && t < cap {
        let mut meter = BudgetMeter::new(instance.budget());
        let partial = match cfg.algorithm {
            Algorithm::Pibt => {
                let mut state = PibtState::with_epochs(positions.clone(), epochs.clone());
                pibt_prefix(instance.map(), &mut state, &goals, &dmaps, w)
            }
            Algorithm::Prp => {
                let order = PriorityOrder::random(k, &mut rng);
                prp_plan(instance, &positions, &order, cfg.prp_policy, &dmaps, &mut meter).solution
            }
            Algorithm::Lns2 => lns2_plan(
                instance,
                &positions,
                cfg.nb_policy,
                &cfg.lns,
                &dmaps,
                &mut meter,
                &mut rng,
            )
            .solution,
            Algorithm::Lns2Pibt => hybrid_plan(
                instance,
                &positions,
                &epochs,
                cfg.nb_policy,
                &cfg.lns,
                cfg.fail_policy,
                &dmaps,
                &mut meter,
                &mut rng,
            ),
        };
        debug_assert!(meter.used() <= instance.budget());
        let conflicts_before = find_conflicts(&partial, w).len();
        let prefix = resolve(&partial, cfg.fail_policy, w);
        expansions_per_period.push(meter.used());
        resolved_per_period.push(conflicts_before);

        for step in 1..=w {
            for a in 0..k {
                positions[a] = prefix.paths()[a].position_at(step);
                trajectory[a].push(positions[a]);
                epochs[a] = if positions[a] == goals[a] {
                    0
                } else {
                    epochs[a] + 1
                };
            }
            t += 1;
            if all_home(&positions) {
                solved = true;
                makespan = t;
                break;
            }
            if t == cap {
                break;
            }
        }
    }

    Ok(EpisodeResult {
        solved,
        makespan,
        periods: expansions_per_period.len() as u32,
        expansions_total: expansions_per_period.iter().sum(),
        expansions_per_period,
        resolved_conflicts_per_period: resolved_per_period,
        trajectory: trajectory
            .into_iter()
            .map(|cells| TimedPath::new(cells).expect("executed steps are legal moves"))
            .collect(),
    })
}
