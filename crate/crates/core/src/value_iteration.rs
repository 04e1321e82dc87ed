//! Synchronous value iteration: Bellman backups, greedy policy extraction,
//! and policy rollouts.
//!
//! For a deterministic world the backup collapses to
//! `v'(s) = R(s) + gamma * max_a v(T(s, a))`, one term per available
//! action, so an iteration costs O(|S| * |A|). The operator contracts the
//! sup norm by `gamma`; stopping at residual < epsilon leaves the result
//! within `epsilon * gamma / (1 - gamma)` of the fixed point.

use std::fmt;

use crate::scenario::{Policy, Scenario, ValidationError, ValueFunction};

/// Stopping parameters for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViConfig {
    /// Terminate once the sup-norm residual of one backup drops below this.
    pub epsilon: f64,
    /// Give up (with an error) after this many backups.
    pub max_iterations: usize,
}

impl Default for ViConfig {
    fn default() -> ViConfig {
        ViConfig { epsilon: 1e-8, max_iterations: 1_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct ViSolution {
    pub values: ValueFunction,
    /// Number of backups performed.
    pub iterations: usize,
    /// Sup-norm residual of each backup, in order.
    pub residuals: Vec<f64>,
}

impl ViSolution {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug)]
pub enum ViError {
    Invalid(Vec<ValidationError>),
    NoConvergence { iterations: usize, residual: f64, epsilon: f64 },
}

impl fmt::Display for ViError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViError::Invalid(violations) => {
                write!(f, "invalid scenario: ")?;
                for (i, v) in violations.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
            ViError::NoConvergence { iterations, residual, epsilon } => write!(
                f,
                "value iteration did not converge: residual {residual:e} after {iterations} \
                 iterations (epsilon {epsilon:e})"
            ),
        }
    }
}

impl std::error::Error for ViError {}

/// Flattened successor and reward tables for the inner loop.
struct DenseModel {
    actions: usize,
    next: Vec<Option<usize>>,
    rewards: Vec<f64>,
}

impl DenseModel {
    fn new(scenario: &Scenario) -> DenseModel {
        let n = scenario.world.state_count();
        let actions = scenario.world.action_count();
        let mut next = Vec::with_capacity(n * actions);
        for s in 0..n {
            for a in 0..actions {
                next.push(scenario.world.next_state(s, a));
            }
        }
        DenseModel { actions, next, rewards: scenario.dense_rewards() }
    }

    /// One synchronous backup of `v` into `out`; returns the sup-norm
    /// residual. States with no available action keep value R(s).
    fn backup(&self, gamma: f64, v: &[f64], out: &mut [f64]) -> f64 {
        let mut residual = 0.0f64;
        for s in 0..v.len() {
            let mut best = f64::NEG_INFINITY;
            let base = s * self.actions;
            for a in 0..self.actions {
                if let Some(t) = self.next[base + a] {
                    if v[t] > best {
                        best = v[t];
                    }
                }
            }
            if best == f64::NEG_INFINITY {
                best = 0.0;
            }
            let new = self.rewards[s] + gamma * best;
            let d = (new - v[s]).abs();
            if d > residual {
                residual = d;
            }
            out[s] = new;
        }
        residual
    }
}

/// One synchronous Bellman backup over the whole state space. Returns the
/// updated table and the sup-norm residual `max_s |v'(s) - v(s)|`.
///
/// Panics if `v` does not match the scenario's state count.
pub fn bellman_backup(v: &ValueFunction, scenario: &Scenario) -> (ValueFunction, f64) {
    assert_eq!(
        v.len(),
        scenario.world.state_count(),
        "value table length must match the state count"
    );
    let model = DenseModel::new(scenario);
    let mut out = vec![0.0; v.len()];
    let residual = model.backup(scenario.gamma, v.as_slice(), &mut out);
    (ValueFunction::from_vec(out), residual)
}

/// Runs synchronous value iteration from the zero table until the residual
/// drops below `cfg.epsilon`, erroring if `cfg.max_iterations` backups do
/// not get there.
pub fn solve(scenario: &Scenario, cfg: &ViConfig) -> Result<ViSolution, ViError> {
    scenario.validate().map_err(ViError::Invalid)?;
    let n = scenario.world.state_count();
    let model = DenseModel::new(scenario);
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residuals = Vec::new();
    for iteration in 1..=cfg.max_iterations {
        let residual = model.backup(scenario.gamma, &v, &mut next);
        std::mem::swap(&mut v, &mut next);
        residuals.push(residual);
        if residual < cfg.epsilon {
            return Ok(ViSolution {
                values: ValueFunction::from_vec(v),
                iterations: iteration,
                residuals,
            });
        }
    }
    Err(ViError::NoConvergence {
        iterations: cfg.max_iterations,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
        epsilon: cfg.epsilon,
    })
}

/// Greedy policy with respect to `v`. Ties break toward the lowest action
/// index (Up < Down < Left < Right on grids).
pub fn extract_policy(v: &ValueFunction, scenario: &Scenario) -> Policy {
    assert_eq!(v.len(), scenario.world.state_count());
    let world = &scenario.world;
    let actions = (0..world.state_count())
        .map(|s| {
            let mut best: Option<(usize, f64)> = None;
            for (a, t) in world.successors(s) {
                let val = v[t];
                if best.map_or(true, |(_, b)| val > b) {
                    best = Some((a, val));
                }
            }
            best.expect("every state needs an available action").0
        })
        .collect();
    Policy { actions }
}

/// Discounted return of the deterministic rollout that starts in `start`
/// and follows `policy` for `horizon` steps: the sum of
/// `gamma^t * R(s_t)` for `t` in `0..horizon`.
pub fn evaluate_policy(scenario: &Scenario, policy: &Policy, start: usize, horizon: usize) -> f64 {
    assert_eq!(policy.actions.len(), scenario.world.state_count());
    assert!(start < scenario.world.state_count(), "start state out of range");
    let rewards = scenario.dense_rewards();
    let mut state = start;
    let mut acc = 0.0;
    let mut pow = 1.0;
    for _ in 0..horizon {
        acc += pow * rewards[state];
        pow *= scenario.gamma;
        state = scenario
            .world
            .next_state(state, policy.actions[state])
            .expect("policy picked an unavailable action");
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::RewardSource;
    use crate::world::{GridAction, GridWorld, World};

    fn single_peak_5x5(gamma: f64) -> Scenario {
        let g = GridWorld::new(5, 5).unwrap();
        let peak = g.state_index(2, 2).unwrap();
        Scenario::new(World::Grid(g), gamma, vec![RewardSource { state: peak, value: 1.0 }])
            .unwrap()
    }

    #[test]
    fn backup_of_zero_rewards_is_zero() {
        let s = Scenario {
            world: World::Grid(GridWorld::new(3, 3).unwrap()),
            gamma: 0.9,
            rewards: vec![],
        };
        let (v, residual) = bellman_backup(&ValueFunction::zeros(9), &s);
        assert_eq!(v.as_slice(), &[0.0; 9]);
        assert_eq!(residual, 0.0);
    }

    #[test]
    fn first_backup_plants_the_rewards() {
        let s = single_peak_5x5(0.9);
        let (v, residual) = bellman_backup(&ValueFunction::zeros(25), &s);
        assert_eq!(v[12], 1.0);
        assert_eq!(v[0], 0.0);
        assert_eq!(residual, 1.0);
    }

    #[test]
    fn single_peak_converges_to_the_closed_form() {
        let s = single_peak_5x5(0.9);
        let sol = solve(&s, &ViConfig { epsilon: 1e-10, max_iterations: 100_000 }).unwrap();
        // collect-forever value r / (1 - gamma^2), one-step neighbor a factor
        // gamma below
        assert!((sol.values[12] - 5.263157894736842).abs() < 1e-8);
        assert!((sol.values[17] - 4.7368421052631575).abs() < 1e-8);
        assert!(sol.final_residual() < 1e-10);
    }

    #[test]
    fn too_few_iterations_is_an_error_not_an_answer() {
        let s = single_peak_5x5(0.9);
        let err = solve(&s, &ViConfig { epsilon: 1e-10, max_iterations: 5 }).unwrap_err();
        match err {
            ViError::NoConvergence { iterations, residual, .. } => {
                assert_eq!(iterations, 5);
                assert!(residual > 1e-10);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn invalid_scenario_is_rejected_before_iterating() {
        let s = Scenario {
            world: World::Grid(GridWorld::new(3, 3).unwrap()),
            gamma: 1.0,
            rewards: vec![RewardSource { state: 0, value: 1.0 }],
        };
        assert!(matches!(solve(&s, &ViConfig::default()), Err(ViError::Invalid(_))));
    }

    #[test]
    fn residuals_contract_by_gamma() {
        let s = single_peak_5x5(0.9);
        let sol = solve(&s, &ViConfig { epsilon: 1e-9, max_iterations: 10_000 }).unwrap();
        for pair in sol.residuals.windows(2) {
            assert!(
                pair[1] <= pair[0] * s.gamma + 1e-12,
                "residual grew: {} -> {}",
                pair[0],
                pair[1]
            );
        }
        assert!(sol.final_residual() < sol.residuals[0]);
    }

    #[test]
    fn different_initializations_meet_at_the_fixed_point() {
        let s = single_peak_5x5(0.5);
        let epsilon = 1e-9;
        let mut runs = Vec::new();
        for init in [0.0, 100.0] {
            let mut v = ValueFunction::from_vec(vec![init; 25]);
            loop {
                let (next, residual) = bellman_backup(&v, &s);
                v = next;
                if residual < epsilon {
                    break;
                }
            }
            runs.push(v);
        }
        let bound = 2.0 * epsilon * s.gamma / (1.0 - s.gamma);
        assert!(runs[0].linf_diff(&runs[1]).unwrap() <= bound);
    }

    #[test]
    fn greedy_policy_points_at_the_peak() {
        let s = single_peak_5x5(0.9);
        let sol = solve(&s, &ViConfig::default()).unwrap();
        let policy = extract_policy(&sol.values, &s);
        let g = GridWorld::new(5, 5).unwrap();
        let at = |x, y| policy.actions[g.state_index(x, y).unwrap()];
        assert_eq!(at(0, 2), GridAction::Right.index());
        assert_eq!(at(4, 2), GridAction::Left.index());
        // at the peak all four neighbors tie; Up wins the tie-break
        assert_eq!(at(2, 2), GridAction::Up.index());
    }

    #[test]
    fn uniform_values_fall_back_to_the_lowest_action_index() {
        let s = single_peak_5x5(0.9);
        let policy = extract_policy(&ValueFunction::zeros(25), &s);
        let g = GridWorld::new(5, 5).unwrap();
        // Up everywhere it exists; on the top row Down is the first available
        assert_eq!(policy.actions[g.state_index(2, 2).unwrap()], GridAction::Up.index());
        assert_eq!(policy.actions[g.state_index(2, 4).unwrap()], GridAction::Down.index());
    }

    #[test]
    fn rollout_of_one_step_collects_the_start_reward() {
        let s = single_peak_5x5(0.9);
        let sol = solve(&s, &ViConfig::default()).unwrap();
        let policy = extract_policy(&sol.values, &s);
        assert_eq!(evaluate_policy(&s, &policy, 12, 1), 1.0);
    }

    #[test]
    fn rollout_discounts_repeat_visits() {
        // two cells, reward on the left one; the rollout bounces 0,1,0,1
        let g = GridWorld::new(2, 1).unwrap();
        let s = Scenario::new(
            World::Grid(g),
            0.5,
            vec![RewardSource { state: 0, value: 1.0 }],
        )
        .unwrap();
        let policy = Policy {
            actions: vec![GridAction::Right.index(), GridAction::Left.index()],
        };
        assert_eq!(evaluate_policy(&s, &policy, 0, 4), 1.25);
        assert_eq!(evaluate_policy(&s, &policy, 0, 0), 0.0);
    }

    #[test]
    fn zero_reward_rollout_is_zero() {
        let s = Scenario {
            world: World::Grid(GridWorld::new(2, 1).unwrap()),
            gamma: 0.9,
            rewards: vec![],
        };
        let policy = Policy {
            actions: vec![GridAction::Right.index(), GridAction::Left.index()],
        };
        assert_eq!(evaluate_policy(&s, &policy, 0, 10), 0.0);
    }
}
