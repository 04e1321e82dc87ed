//! Problem instances: a world, a strict discount, and sparse positive rewards.

use std::collections::VecDeque;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::world::{GridWorld, TransitionGraph, World, WorldError};

/// A positive reward attached to a single state, collected every time the
/// agent occupies that state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardSource {
    pub state: usize,
    pub value: f64,
}

/// A solvable instance. Invariants (see [`Scenario::validate`]): the
/// discount is strictly inside (0,1), rewards are positive, finite, and on
/// pairwise distinct in-range states, every state has at least one action,
/// and graph worlds are strongly connected.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub world: World,
    pub gamma: f64,
    pub rewards: Vec<RewardSource>,
}

impl Scenario {
    /// Builds and validates in one step.
    pub fn new(
        world: World,
        gamma: f64,
        rewards: Vec<RewardSource>,
    ) -> Result<Scenario, ScenarioError> {
        let s = Scenario { world, gamma, rewards };
        match s.validate() {
            Ok(()) => Ok(s),
            Err(violations) => Err(ScenarioError::Invalid(violations)),
        }
    }

    /// Checks every instance invariant and reports all violations, not just
    /// the first.
    pub fn validate(&self) -> Result<(), Vec<ValidationError>> {
        let mut violations = Vec::new();
        if !(self.gamma.is_finite() && 0.0 < self.gamma && self.gamma < 1.0) {
            violations.push(ValidationError::Gamma(self.gamma));
        }
        if self.rewards.is_empty() {
            violations.push(ValidationError::NoRewards);
        }
        let count = self.world.state_count();
        let mut seen = vec![false; count];
        for r in &self.rewards {
            if r.state >= count {
                violations.push(ValidationError::RewardStateOutOfBounds {
                    state: r.state,
                    count,
                });
                continue;
            }
            if !(r.value.is_finite() && r.value > 0.0) {
                violations.push(ValidationError::NonPositiveReward {
                    state: r.state,
                    value: r.value,
                });
            }
            if seen[r.state] {
                violations.push(ValidationError::DuplicateRewardState(r.state));
            }
            seen[r.state] = true;
        }
        if let World::Graph(_) = &self.world {
            for s in 0..count {
                if self.world.available_actions(s).is_empty() {
                    violations.push(ValidationError::NoAvailableActions(s));
                }
            }
            // Strong connectivity <=> every ordered state pair is connected.
            // Grids are always connected; graphs need the explicit check.
            if violations.is_empty() {
                if let Some(v) = self.connectivity_violation() {
                    violations.push(v);
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// One search out of state 0 and one over reversed edges suffice:
    /// both cover everything iff the graph is strongly connected.
    fn connectivity_violation(&self) -> Option<ValidationError> {
        let n = self.world.state_count();
        let mut forward = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        forward[0] = true;
        while let Some(s) = queue.pop_front() {
            for (_, t) in self.world.successors(s) {
                if !forward[t] {
                    forward[t] = true;
                    queue.push_back(t);
                }
            }
        }
        if let Some(t) = forward.iter().position(|r| !r) {
            return Some(ValidationError::Unreachable { from: 0, to: t });
        }
        let mut reverse_adj = vec![Vec::new(); n];
        for s in 0..n {
            for (_, t) in self.world.successors(s) {
                reverse_adj[t].push(s);
            }
        }
        let mut backward = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        backward[0] = true;
        while let Some(s) = queue.pop_front() {
            for &p in &reverse_adj[s] {
                if !backward[p] {
                    backward[p] = true;
                    queue.push_back(p);
                }
            }
        }
        backward
            .iter()
            .position(|r| !r)
            .map(|s| ValidationError::Unreachable { from: s, to: 0 })
    }

    /// Per-state reward table (zero where no source sits).
    pub fn dense_rewards(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.world.state_count()];
        for source in &self.rewards {
            r[source.state] += source.value;
        }
        r
    }

    /// Reward at `state`, if a source sits there.
    pub fn reward_at(&self, state: usize) -> Option<f64> {
        self.rewards
            .iter()
            .find(|r| r.state == state)
            .map(|r| r.value)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = fs::read_to_string(path).map_err(ScenarioError::Io)?;
        Scenario::from_json_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        fs::write(path, self.to_json_string()).map_err(ScenarioError::Io)
    }

    pub fn from_json_str(text: &str) -> Result<Scenario, ScenarioError> {
        let raw: ScenarioJson = serde_json::from_str(text).map_err(ScenarioError::Parse)?;
        raw.into_scenario()
    }

    /// Deterministic serialization: identical scenarios produce identical bytes.
    pub fn to_json_string(&self) -> String {
        let raw = ScenarioJson::from_scenario(self);
        let mut s = serde_json::to_string_pretty(&raw).expect("scenario serialization");
        s.push('\n');
        s
    }
}

/// Dense per-state value table.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(n: usize) -> ValueFunction {
        ValueFunction { values: vec![0.0; n] }
    }

    pub fn from_vec(values: Vec<f64>) -> ValueFunction {
        ValueFunction { values }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// In-place element-wise maximum with `other`.
    pub fn max_update(&mut self, other: &ValueFunction) -> Result<(), LengthMismatch> {
        if self.len() != other.len() {
            return Err(LengthMismatch { left: self.len(), right: other.len() });
        }
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            if *o > *v {
                *v = *o;
            }
        }
        Ok(())
    }

    /// Element-wise maximum, leaving both inputs untouched.
    pub fn pointwise_max(&self, other: &ValueFunction) -> Result<ValueFunction, LengthMismatch> {
        let mut out = self.clone();
        out.max_update(other)?;
        Ok(out)
    }

    /// L-infinity distance to `other`.
    pub fn linf_diff(&self, other: &ValueFunction) -> Result<f64, LengthMismatch> {
        if self.len() != other.len() {
            return Err(LengthMismatch { left: self.len(), right: other.len() });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Plain left-to-right sum; used as the benchmark checksum.
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl std::ops::Index<usize> for ValueFunction {
    type Output = f64;

    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// One action id per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthMismatch {
    pub left: usize,
    pub right: usize,
}

impl fmt::Display for LengthMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "value tables differ in length: {} vs {}", self.left, self.right)
    }
}

impl std::error::Error for LengthMismatch {}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationError {
    Gamma(f64),
    NoRewards,
    RewardStateOutOfBounds { state: usize, count: usize },
    NonPositiveReward { state: usize, value: f64 },
    DuplicateRewardState(usize),
    NoAvailableActions(usize),
    Unreachable { from: usize, to: usize },
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationError::Gamma(g) => write!(f, "gamma must lie in (0,1), got {g}"),
            ValidationError::NoRewards => write!(f, "scenario needs at least one reward source"),
            ValidationError::RewardStateOutOfBounds { state, count } => {
                write!(f, "reward state {state} out of range (world has {count} states)")
            }
            ValidationError::NonPositiveReward { state, value } => {
                write!(f, "reward at state {state} must be positive and finite, got {value}")
            }
            ValidationError::DuplicateRewardState(s) => {
                write!(f, "duplicate reward state {s}")
            }
            ValidationError::NoAvailableActions(s) => {
                write!(f, "state {s} has no available action")
            }
            ValidationError::Unreachable { from, to } => {
                write!(f, "state {to} is unreachable from state {from}; the world must be fully connected")
            }
        }
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug)]
pub enum ScenarioError {
    Io(std::io::Error),
    Parse(serde_json::Error),
    Shape(String),
    World(WorldError),
    Invalid(Vec<ValidationError>),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Io(e) => write!(f, "scenario io error: {e}"),
            ScenarioError::Parse(e) => write!(
                f,
                "scenario parse error at line {}, column {}: {e}",
                e.line(),
                e.column()
            ),
            ScenarioError::Shape(msg) => write!(f, "scenario shape error: {msg}"),
            ScenarioError::World(e) => write!(f, "scenario world error: {e}"),
            ScenarioError::Invalid(violations) => {
                write!(f, "invalid scenario: ")?;
                for (i, v) in violations.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<WorldError> for ScenarioError {
    fn from(e: WorldError) -> ScenarioError {
        ScenarioError::World(e)
    }
}

// --- JSON wire format -------------------------------------------------------
//
// Grid scenarios:
//   {"grid": {"width": W, "height": H}, "gamma": G,
//    "rewards": [{"x": X, "y": Y, "value": V}, ...]}
// Graph scenarios:
//   {"graph": {"states": N, "actions": M, "next": [[t or -1, ...], ...]},
//    "gamma": G, "rewards": [{"state": S, "value": V}, ...]}

#[derive(Serialize, Deserialize)]
struct GridJson {
    width: usize,
    height: usize,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    states: usize,
    actions: usize,
    next: Vec<Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRewardJson {
    x: usize,
    y: usize,
    value: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRewardJson {
    state: usize,
    value: f64,
}

// untagged: the field set alone distinguishes the two forms, and
// deny_unknown_fields on each keeps a mixed entry from matching either
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RewardJson {
    Grid(GridRewardJson),
    Graph(GraphRewardJson),
}

#[derive(Serialize, Deserialize)]
struct ScenarioJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    graph: Option<GraphJson>,
    gamma: f64,
    rewards: Vec<RewardJson>,
}

impl ScenarioJson {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let world = match (self.grid, self.graph) {
            (Some(g), None) => World::Grid(GridWorld::new(g.width, g.height)?),
            (None, Some(g)) => {
                let mut next = Vec::with_capacity(g.states * g.actions);
                for (s, row) in g.next.iter().enumerate() {
                    if row.len() != g.actions {
                        return Err(ScenarioError::Shape(format!(
                            "state {s} lists {} transitions, expected {}",
                            row.len(),
                            g.actions
                        )));
                    }
                    for &t in row {
                        next.push(match t {
                            -1 => None,
                            t if t >= 0 => Some(t as usize),
                            t => {
                                return Err(ScenarioError::Shape(format!(
                                    "state {s} has transition target {t}; use -1 for unavailable"
                                )))
                            }
                        });
                    }
                }
                if g.next.len() != g.states {
                    return Err(ScenarioError::Shape(format!(
                        "transition table lists {} states, expected {}",
                        g.next.len(),
                        g.states
                    )));
                }
                World::Graph(TransitionGraph::new(g.states, g.actions, next)?)
            }
            _ => {
                return Err(ScenarioError::Shape(
                    "scenario must define exactly one of \"grid\" or \"graph\"".into(),
                ))
            }
        };
        let mut rewards = Vec::with_capacity(self.rewards.len());
        for r in self.rewards {
            match (&world, r) {
                (World::Grid(g), RewardJson::Grid(GridRewardJson { x, y, value })) => {
                    rewards.push(RewardSource { state: g.state_index(x, y)?, value });
                }
                (World::Graph(_), RewardJson::Graph(GraphRewardJson { state, value })) => {
                    rewards.push(RewardSource { state, value });
                }
                (World::Grid(_), RewardJson::Graph { .. }) => {
                    return Err(ScenarioError::Shape(
                        "grid scenarios address rewards by x/y, not state".into(),
                    ))
                }
                (World::Graph(_), RewardJson::Grid { .. }) => {
                    return Err(ScenarioError::Shape(
                        "graph scenarios address rewards by state, not x/y".into(),
                    ))
                }
            }
        }
        Scenario::new(world, self.gamma, rewards)
    }

    fn from_scenario(s: &Scenario) -> ScenarioJson {
        match &s.world {
            World::Grid(g) => ScenarioJson {
                grid: Some(GridJson { width: g.width(), height: g.height() }),
                graph: None,
                gamma: s.gamma,
                rewards: s
                    .rewards
                    .iter()
                    .map(|r| {
                        let (x, y) = g.coords(r.state);
                        RewardJson::Grid(GridRewardJson { x, y, value: r.value })
                    })
                    .collect(),
            },
            World::Graph(g) => ScenarioJson {
                grid: None,
                graph: Some(GraphJson {
                    states: g.states(),
                    actions: g.actions(),
                    next: (0..g.states())
                        .map(|s| {
                            (0..g.actions())
                                .map(|a| g.next(s, a).map_or(-1, |t| t as i64))
                                .collect()
                        })
                        .collect(),
                }),
                gamma: s.gamma,
                rewards: s
                    .rewards
                    .iter()
                    .map(|r| RewardJson::Graph(GraphRewardJson { state: r.state, value: r.value }))
                    .collect(),
            },
        }
    }
}
