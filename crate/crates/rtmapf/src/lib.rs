//! Real-time multi-agent pathfinding (RT-MAPF) on 4-connected grids.
//!
//! Planning and execution alternate: every planning period gets a hard budget
//! of single-agent search node expansions, and whatever the planner managed
//! to produce is resolved by a fail policy into a conflict-free window of
//! steps that the agents then commit to. The crate provides:
//!
//! - [`domain`]: grids, timed paths, conflicts, and cost metrics;
//! - [`search`]: budget-metered space-time A* with hard and soft constraints;
//! - [`prp`]: prioritized planning with Shared/Fixed agent budget policies;
//! - [`lns2`]: MAPF-LNS2 with Shared, Fixed(B_F), and ConflictProportion
//!   neighborhood budget policies;
//! - [`pibt`]: PIBT and the LNS2+PIBT hybrid;
//! - [`runtime`]: the plan/commit/execute loop with AllStay/IStay fail
//!   policies;
//! - [`benchio`]: MovingAI benchmark file parsing and results CSV output.
//!
//! ```
//! use rtmapf::domain::{AgentTask, Cell, GridMap, Instance};
//! use rtmapf::runtime::{run_episode, Algorithm, SolverConfig};
//!
//! let map = GridMap::open(8, 8);
//! let agents = vec![
//!     AgentTask { id: 0, start: Cell::new(0, 0), goal: Cell::new(7, 7) },
//!     AgentTask { id: 1, start: Cell::new(7, 0), goal: Cell::new(0, 7) },
//! ];
//! let instance = Instance::new(map, agents, 60, 5, 10, 100).unwrap();
//! let result = run_episode(&instance, &SolverConfig::new(Algorithm::Lns2), 0).unwrap();
//! assert!(result.solved);
//! ```

pub mod benchio;
pub mod domain;
pub mod lns2;
pub mod pibt;
pub mod prp;
pub mod runtime;
pub mod search;

pub use domain::{
    conflicts_per_agent, find_conflicts, makespan, soc, AgentTask, Cell, Conflict, ConflictKind,
    GridMap, Instance, PartialSolution, TimedPath,
};
pub use runtime::{run_episode, Algorithm, EpisodeResult, FailPolicy, SolverConfig};
pub use search::{BudgetMeter, PlanFailure};
