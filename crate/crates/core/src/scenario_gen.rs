//! Seeded random scenario generation with a portable, hand-pinned PRNG.
//!
//! The generator is deterministic given its spec: the same seed yields the
//! same scenario bit for bit, on any platform and in any language that
//! implements the same recurrence. That is why the PRNG is written out
//! here instead of pulled from a crate whose stream might change between
//! versions.

use std::fmt;

use crate::scenario::{RewardSource, Scenario, ScenarioError, ValidationError};
use crate::world::{GridWorld, World, WorldError};

/// SplitMix64: 64 bits of state, one addition and three xor-multiply
/// rounds per output.
///
/// Recurrence: `state += 0x9E3779B97F4A7C15`, then
/// `z = (z ^ (z >> 30)) * 0xBF58476D1CE4B5B9`,
/// `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`,
/// output `z ^ (z >> 31)`, all wrapping.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_B5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, bound)` by reduction. The modulo bias is below
    /// `bound / 2^64`, which is negligible for the state counts involved.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        self.next_u64() % bound
    }
}

/// Parameters for one generated grid scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub width: usize,
    pub height: usize,
    pub reward_count: usize,
    /// Inclusive bounds for reward values; must be positive and ordered.
    pub value_range: (f64, f64),
    pub gamma: f64,
    pub seed: u64,
}

#[derive(Debug)]
pub enum GenError {
    RewardCount { requested: usize, states: usize },
    ValueRange { lo: f64, hi: f64 },
    World(WorldError),
    Invalid(Vec<ValidationError>),
}

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenError::RewardCount { requested, states } => write!(
                f,
                "reward count must be between 1 and the state count ({states}), got {requested}"
            ),
            GenError::ValueRange { lo, hi } => write!(
                f,
                "value range must satisfy 0 < lo <= hi and be finite, got {lo}..{hi}"
            ),
            GenError::World(e) => write!(f, "{e}"),
            GenError::Invalid(violations) => {
                write!(f, "generated spec is invalid: ")?;
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

impl std::error::Error for GenError {}

impl From<WorldError> for GenError {
    fn from(e: WorldError) -> GenError {
        GenError::World(e)
    }
}

/// Builds a grid scenario with `reward_count` distinct reward cells.
///
/// Draw order is fixed so streams stay reproducible: all positions first
/// (a partial Fisher–Yates over the state ids), then one value per reward
/// in the same order.
pub fn random_scenario(spec: &GenSpec) -> Result<Scenario, GenError> {
    let grid = GridWorld::new(spec.width, spec.height)?;
    let states = grid.state_count();
    if spec.reward_count == 0 || spec.reward_count > states {
        return Err(GenError::RewardCount { requested: spec.reward_count, states });
    }
    let (lo, hi) = spec.value_range;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(GenError::ValueRange { lo, hi });
    }

    let mut rng = SplitMix64::new(spec.seed);
    let mut ids: Vec<usize> = (0..states).collect();
    for i in 0..spec.reward_count {
        let j = i + rng.next_below((states - i) as u64) as usize;
        ids.swap(i, j);
    }
    let rewards: Vec<RewardSource> = ids[..spec.reward_count]
        .iter()
        .map(|&state| RewardSource { state, value: lo + (hi - lo) * rng.next_f64() })
        .collect();

    Scenario::new(World::Grid(grid), spec.gamma, rewards).map_err(|e| match e {
        ScenarioError::Invalid(v) => GenError::Invalid(v),
        other => unreachable!("construction can only fail validation here: {other}"),
    })
}
