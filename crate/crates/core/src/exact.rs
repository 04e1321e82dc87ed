//! Exact solver for deterministic continuing worlds with sparse positive
//! rewards.
//!
//! The optimal value function of such a world is the upper envelope of a
//! small number of geometric "peaks", each anchored at a reward state and
//! decaying by a factor of `gamma` per step of distance. Three peak kinds
//! cover every way a policy can exploit a reward:
//!
//! * **Baseline** — collect one reward forever by looping through its
//!   anchor. Height `B = r / (1 - gamma^phi)`, where `phi` is the minimum
//!   cycle length through the anchor.
//! * **Combined** — shuttle between two mutually adjacent rewards. Height
//!   `B_p + gamma * B_s` at the primary anchor, and the field is the
//!   superposition of both member baselines:
//!   `gamma^d(s, s_p) * B_p + gamma^d(s, s_s) * B_s`.
//! * **Delta** — collect a reward once, then continue: follow the value
//!   already accumulated, or divert through other uncollected rewards
//!   first. `delta_i = r_i + max(v(s_i), max_j gamma^d(s_i, s_j) * delta_j)`,
//!   relaxed over the remaining rewards each iteration.
//!
//! The solver retires the globally best candidate per iteration and folds
//! its field into the running table with an element-wise max, so the loop
//! finishes after at most one selection per reward — the cost is driven by
//! the reward count, not by the discount.
//!
//! Every peak is the value of a policy the agent can actually follow, so
//! the envelope never exceeds the optimum. It attains the optimum on grid
//! worlds and on graphs with a single reward. On arbitrary graphs with
//! several rewards the optimal policy may cycle through three or more
//! rewards forever; the delta relaxation approaches such tours only from
//! below within its sweep budget, so there the envelope is a lower bound.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use crate::distance::{manhattan_distance, DistanceOracle};
use crate::scenario::{Scenario, ValidationError, ValueFunction};
use crate::world::World;

/// Peak kinds, in selection-priority order for equal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakKind {
    Combined,
    Baseline,
    Delta,
}

impl PeakKind {
    pub fn name(self) -> &'static str {
        match self {
            PeakKind::Combined => "combined",
            PeakKind::Baseline => "baseline",
            PeakKind::Delta => "delta",
        }
    }

    fn rank(self) -> u8 {
        match self {
            PeakKind::Combined => 0,
            PeakKind::Baseline => 1,
            PeakKind::Delta => 2,
        }
    }
}

/// How a peak's field decays away from its anchor(s).
#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    /// `gamma^d(s, anchor) * value`.
    Single,
    /// Superposition of the two member baselines.
    Pair { primary_height: f64, secondary_height: f64 },
}

/// A candidate local maximum of the optimal value function.
#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub kind: PeakKind,
    /// Reward state the peak is anchored at.
    pub anchor: usize,
    /// Second anchor of a combined peak.
    pub secondary_anchor: Option<usize>,
    /// Field height at the anchor; the selection-order key.
    pub value: f64,
    shape: Shape,
}

impl Peak {
    /// Reward states retired when this peak is selected.
    pub fn affected_states(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.anchor).chain(self.secondary_anchor)
    }

    pub fn affects(&self, state: usize) -> bool {
        self.anchor == state || self.secondary_anchor == Some(state)
    }

    fn shares_affected(&self, other: &Peak) -> bool {
        other.affected_states().any(|s| self.affects(s))
    }
}

/// Total selection order: higher value first, then Combined before
/// Baseline before Delta, then lower anchor id. No two candidates in one
/// solve compare equal, so selection is deterministic.
pub fn selection_order(a: &Peak, b: &Peak) -> Ordering {
    b.value
        .partial_cmp(&a.value)
        .expect("peak values are finite")
        .then(a.kind.rank().cmp(&b.kind.rank()))
        .then(a.anchor.cmp(&b.anchor))
}

/// Baseline and combined peaks awaiting selection, best first.
#[derive(Debug, Clone, Default)]
pub struct PeakQueue {
    entries: Vec<Peak>,
}

impl PeakQueue {
    pub fn new() -> PeakQueue {
        PeakQueue::default()
    }

    pub fn insert(&mut self, peak: Peak) {
        let at = self
            .entries
            .partition_point(|e| selection_order(e, &peak) == Ordering::Less);
        self.entries.insert(at, peak);
    }

    /// Best remaining entry.
    pub fn head(&self) -> Option<&Peak> {
        self.entries.first()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Peak> {
        self.entries.iter()
    }

    pub fn retain(&mut self, keep: impl FnMut(&Peak) -> bool) {
        self.entries.retain(keep);
    }
}

/// Mutable state of one solve.
#[derive(Debug, Clone)]
pub struct SolveState {
    pub values: ValueFunction,
    pub queue: PeakQueue,
    /// `remaining[i]` is true while reward `i` has not been retired.
    pub remaining: Vec<bool>,
    pub processed: Vec<ProcessedPeak>,
    /// Peaks built plus deltas evaluated; a layout-determined work measure
    /// that is independent of the discount.
    pub candidate_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedPeak {
    pub peak: Peak,
    /// 1-based selection index, for the audit trail.
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub values: ValueFunction,
    /// Audit trail: every selected peak in selection order.
    pub processed: Vec<ProcessedPeak>,
    /// Number of selections; at most the reward count.
    pub iterations: usize,
    pub candidate_evaluations: usize,
}

#[derive(Debug)]
pub enum SolveError {
    Invalid(Vec<ValidationError>),
    NotAdjacent { primary: usize, secondary: usize },
    Internal(String),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::Invalid(violations) => {
                write!(f, "invalid scenario: ")?;
                for (i, v) in violations.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
            SolveError::NotAdjacent { primary, secondary } => write!(
                f,
                "states {primary} and {secondary} are not mutually adjacent; no combined peak exists"
            ),
            SolveError::Internal(msg) => write!(f, "internal solver error: {msg}"),
        }
    }
}

impl std::error::Error for SolveError {}

/// Solves a validated scenario exactly. Convenience wrapper around
/// [`ExactSolver`].
pub fn solve(scenario: &Scenario) -> Result<ExactSolution, SolveError> {
    ExactSolver::new(scenario)?.solve()
}

/// Peak construction and the selection loop for one scenario.
///
/// Construction validates the scenario, precomputes one distance field per
/// reward state (graphs only; grids answer distance queries in O(1)), and
/// tabulates the powers of `gamma` up to the largest distance the
/// propagation can encounter.
pub struct ExactSolver<'a> {
    scenario: &'a Scenario,
    distances: DistanceOracle,
    /// `powers[d] = gamma^d`.
    powers: Vec<f64>,
    reward_states: Vec<usize>,
    reward_values: Vec<f64>,
    reward_index_by_state: HashMap<usize, usize>,
}

impl<'a> ExactSolver<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<ExactSolver<'a>, SolveError> {
        scenario.validate().map_err(SolveError::Invalid)?;
        let reward_states: Vec<usize> = scenario.rewards.iter().map(|r| r.state).collect();
        let reward_values: Vec<f64> = scenario.rewards.iter().map(|r| r.value).collect();
        let reward_index_by_state = reward_states
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, i))
            .collect();
        let distances = DistanceOracle::new(&scenario.world, reward_states.iter().copied());
        let max_power = match &scenario.world {
            World::Grid(g) => (g.width() - 1 + g.height() - 1).max(2),
            // BFS distances stay below |S|; cycle lengths reach |S|
            World::Graph(_) => scenario.world.state_count(),
        };
        let powers = (0..=max_power as i32).map(|d| scenario.gamma.powi(d)).collect();
        Ok(ExactSolver {
            scenario,
            distances,
            powers,
            reward_states,
            reward_values,
            reward_index_by_state,
        })
    }

    /// Collect-forever height of reward `i` (index into the scenario's
    /// reward list): `r / (1 - gamma^phi)` with `phi` the minimum cycle
    /// length through the reward state.
    pub fn baseline_peak(&self, i: usize) -> Peak {
        let state = self.reward_states[i];
        let phi = self
            .distances
            .min_cycle(state)
            .expect("validated worlds admit a cycle through every state");
        let value = self.reward_values[i] / (1.0 - self.powers[phi as usize]);
        Peak {
            kind: PeakKind::Baseline,
            anchor: state,
            secondary_anchor: None,
            value,
            shape: Shape::Single,
        }
    }

    /// Shuttle peak between rewards `p` and `s` (reward indices), anchored
    /// at `p`. The pair must be mutually adjacent: one action each way.
    pub fn combined_peak(&self, p: usize, s: usize) -> Result<Peak, SolveError> {
        let (sp, ss) = (self.reward_states[p], self.reward_states[s]);
        let mutually_adjacent = self.distances.distance(sp, ss) == Some(1)
            && self.distances.distance(ss, sp) == Some(1);
        if !mutually_adjacent {
            return Err(SolveError::NotAdjacent { primary: sp, secondary: ss });
        }
        let primary_height = self.baseline_peak(p).value;
        let secondary_height = self.baseline_peak(s).value;
        Ok(Peak {
            kind: PeakKind::Combined,
            anchor: sp,
            secondary_anchor: Some(ss),
            value: primary_height + self.scenario.gamma * secondary_height,
            shape: Shape::Pair { primary_height, secondary_height },
        })
    }

    /// All baselines, plus one combined peak per reward that has a
    /// mutually adjacent rewarded neighbor (the highest-valued one; ties go
    /// to the lowest state id). O(|R| * |A|).
    pub fn precompute_peaks(&self) -> PeakQueue {
        let mut queue = PeakQueue::new();
        for i in 0..self.reward_states.len() {
            queue.insert(self.baseline_peak(i));
            if let Some(j) = self.best_adjacent_reward(i) {
                queue.insert(self.combined_peak(i, j).expect("checked adjacency"));
            }
        }
        queue
    }

    fn best_adjacent_reward(&self, i: usize) -> Option<usize> {
        let state = self.reward_states[i];
        let mut best: Option<usize> = None;
        for (_, t) in self.scenario.world.successors(state) {
            if t == state {
                continue; // self-loop, not a neighbor
            }
            let Some(&j) = self.reward_index_by_state.get(&t) else {
                continue;
            };
            if self.distances.distance(t, state) != Some(1) {
                continue; // adjacency must hold in both directions
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let (bv, jv) = (self.reward_values[b], self.reward_values[j]);
                    jv > bv || (jv == bv && self.reward_states[j] < self.reward_states[b])
                }
            };
            if better {
                best = Some(j);
            }
        }
        best
    }

    /// Fresh solve state: zero values, the precomputed queue, every reward
    /// remaining.
    pub fn initial_state(&self) -> SolveState {
        let queue = self.precompute_peaks();
        SolveState {
            values: ValueFunction::zeros(self.scenario.world.state_count()),
            candidate_evaluations: queue.len(),
            queue,
            remaining: vec![true; self.reward_states.len()],
            processed: Vec::new(),
        }
    }

    /// One delta candidate per remaining reward: the value of collecting
    /// the reward once and continuing optimally, where the continuation
    /// either follows the current table or diverts through other remaining
    /// rewards first:
    ///
    /// `delta_i = r_i + max( v(s_i), max_{j != i} gamma^d(s_i, s_j) * delta_j )`
    ///
    /// The mutual terms are relaxed Gauss-Seidel style, one sweep per
    /// remaining reward. The single-shot form `r_i + v(s_i)` misses chains:
    /// when two rewards sit on a common route to a stronger field, the
    /// upstream delta must include the downstream reward collected en
    /// route, but a max-first selection can retire the upstream state
    /// before the downstream delta ever folds into the table. Each sweep
    /// settles one more link of every such chain, so chains are exact
    /// within the sweep budget; mutually supporting groups (shuttles)
    /// approach their tour value from below and stay dominated by the
    /// exact combined and baseline peaks still in the queue. The fixed
    /// budget keeps the per-round work independent of gamma.
    ///
    /// Deltas are emitted unconditionally. A delta dominated by its
    /// neighborhood is still correct under the element-wise max, and
    /// unconditional emission keeps every iteration supplied with a
    /// candidate, which is what bounds the loop at |R| selections.
    pub fn compute_deltas(&self, state: &SolveState) -> Vec<Peak> {
        let remaining: Vec<usize> = (0..self.reward_states.len())
            .filter(|&i| state.remaining[i])
            .collect();
        let mut heights: Vec<f64> = remaining
            .iter()
            .map(|&i| self.reward_values[i] + state.values[self.reward_states[i]])
            .collect();
        for _ in 0..remaining.len() {
            let mut changed = false;
            for a in 0..remaining.len() {
                let anchor = self.reward_states[remaining[a]];
                let mut continuation = state.values[anchor];
                for b in 0..remaining.len() {
                    if b == a {
                        continue;
                    }
                    let other = self.reward_states[remaining[b]];
                    if let Some(d) = self.distances.distance(anchor, other) {
                        let via = self.powers[d as usize] * heights[b];
                        if via > continuation {
                            continuation = via;
                        }
                    }
                }
                let next = self.reward_values[remaining[a]] + continuation;
                if next > heights[a] {
                    heights[a] = next;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        remaining
            .into_iter()
            .zip(heights)
            .map(|(i, value)| Peak {
                kind: PeakKind::Delta,
                anchor: self.reward_states[i],
                secondary_anchor: None,
                value,
                shape: Shape::Single,
            })
            .collect()
    }

    /// Drops queued peaks invalidated by the current table: a peak whose
    /// anchor has a neighbor with strictly higher value can no longer be a
    /// local maximum (leaving beats looping). Equal values keep the peak.
    pub fn prune_invalid_peaks(&self, state: &mut SolveState) {
        let world = &self.scenario.world;
        let values = &state.values;
        state.queue.retain(|p| {
            !world
                .successors(p.anchor)
                .iter()
                .any(|&(_, t)| values[t] > p.value)
        });
    }

    /// Removes every queue entry sharing a reward with `selected` and
    /// marks those rewards retired.
    pub fn remove_affected_peaks(&self, state: &mut SolveState, selected: &Peak) {
        state.queue.retain(|p| !p.shares_affected(selected));
        for s in selected.affected_states() {
            if let Some(&i) = self.reward_index_by_state.get(&s) {
                state.remaining[i] = false;
            }
        }
    }

    /// The peak's full field: `gamma^distance-to-anchor` times the height,
    /// summed over both anchors for a combined peak. States that cannot
    /// reach an anchor receive nothing from it.
    pub fn propagate(&self, peak: &Peak) -> ValueFunction {
        let mut out = vec![0.0; self.scenario.world.state_count()];
        match peak.shape {
            Shape::Single => self.decay_into(peak.anchor, peak.value, &mut out),
            Shape::Pair { primary_height, secondary_height } => {
                self.decay_into(peak.anchor, primary_height, &mut out);
                let secondary = peak.secondary_anchor.expect("combined peaks have two anchors");
                self.decay_into(secondary, secondary_height, &mut out);
            }
        }
        ValueFunction::from_vec(out)
    }

    fn decay_into(&self, anchor: usize, height: f64, out: &mut [f64]) {
        match &self.scenario.world {
            World::Grid(g) => {
                let a = g.coords(anchor);
                for (s, slot) in out.iter_mut().enumerate() {
                    let d = manhattan_distance(g.coords(s), a);
                    *slot += self.powers[d as usize] * height;
                }
            }
            World::Graph(_) => {
                let field = self
                    .distances
                    .field_to(anchor)
                    .expect("anchor fields are precomputed");
                for (s, slot) in out.iter_mut().enumerate() {
                    if let Some(d) = field.get(s) {
                        *slot += self.powers[d as usize] * height;
                    }
                }
            }
        }
    }

    /// Runs the selection loop to completion.
    ///
    /// Each iteration: refresh the deltas, prune invalidated queue
    /// entries, pick the globally best candidate, retire its rewards,
    /// propagate its field, and fold it into the table with an
    /// element-wise max. Terminates after at most one selection per
    /// reward.
    pub fn solve(&self) -> Result<ExactSolution, SolveError> {
        let reward_count = self.reward_states.len();
        let mut state = self.initial_state();
        let mut iteration = 0;
        while state.remaining.iter().any(|&r| r) {
            iteration += 1;
            if iteration > reward_count {
                return Err(SolveError::Internal(format!(
                    "selection loop ran past the reward count ({reward_count})"
                )));
            }
            let deltas = self.compute_deltas(&state);
            state.candidate_evaluations += deltas.len();
            self.prune_invalid_peaks(&mut state);
            let best_delta = deltas.into_iter().min_by(selection_order);
            let chosen = match (state.queue.head(), best_delta) {
                (Some(h), Some(d)) => {
                    if selection_order(h, &d) == Ordering::Less {
                        h.clone()
                    } else {
                        d
                    }
                }
                (Some(h), None) => h.clone(),
                (None, Some(d)) => d,
                (None, None) => {
                    return Err(SolveError::Internal(
                        "no candidate peak although rewards remain".into(),
                    ))
                }
            };
            self.remove_affected_peaks(&mut state, &chosen);
            let interim = self.propagate(&chosen);
            state
                .values
                .max_update(&interim)
                .map_err(|e| SolveError::Internal(e.to_string()))?;
            state.processed.push(ProcessedPeak { peak: chosen, iteration });
        }
        Ok(ExactSolution {
            values: state.values,
            iterations: state.processed.len(),
            processed: state.processed,
            candidate_evaluations: state.candidate_evaluations,
        })
    }
}
