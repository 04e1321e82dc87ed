//! Exact and iterative solvers for deterministic, continuing,
//! fully connected MDPs with sparse positive rewards.
//!
//! Worlds are four-action grids or explicit transition graphs. The
//! iterative path is classic value iteration with a residual stopping
//! rule. The exact path exploits the problem's structure: the optimal
//! value function is the upper envelope of a handful of geometric peaks,
//! one or two per reward source, so it can be assembled directly from
//! action-count distances — no convergence loop, and a cost driven by the
//! reward count rather than the discount.
//!
//! Supporting modules cover seeded scenario generation and a timing
//! harness that sweeps reward count, state count, or discount and writes
//! CSV/JSON records.

pub mod bench;
pub mod distance;
pub mod exact;
pub mod scenario;
pub mod scenario_gen;
pub mod value_iteration;
pub mod world;

pub use bench::{
    emit_results, run_sweep, summarize, time_solver, BenchError, BenchmarkRecord, OutputFormat,
    SolverId, SummaryRow, SweepFailure, SweepOutcome, SweepSpec, SweepVariable,
};
pub use distance::{
    distance_field_to, manhattan_distance, min_cycle_length, DistanceField, DistanceOracle,
    MinCycleLength,
};
pub use exact::{ExactSolution, ExactSolver, Peak, PeakKind, ProcessedPeak, SolveError};
pub use scenario::{
    Policy, RewardSource, Scenario, ScenarioError, ValidationError, ValueFunction,
};
pub use scenario_gen::{random_scenario, GenError, GenSpec, SplitMix64};
pub use value_iteration::{
    bellman_backup, evaluate_policy, extract_policy, ViConfig, ViError, ViSolution,
};
pub use world::{GridAction, GridWorld, TransitionGraph, World, WorldError};
