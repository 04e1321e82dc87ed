//! Timed experiment runner: sweeps over reward count, state count, or
//! discount, timing both solvers on seeded scenarios and emitting
//! machine-readable records.
//!
//! Sweeps run sequentially on the calling thread. Timing integrity demands
//! that no other timed work shares the worker, and a single thread is the
//! simplest arrangement that guarantees it; records land in order.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::exact::{self, SolveError};
use crate::scenario::Scenario;
use crate::scenario_gen::{random_scenario, GenSpec};
use crate::value_iteration::{self, ViConfig, ViError};
use crate::world::World;

/// Which solver a record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverId {
    Exact,
    ValueIteration,
}

impl SolverId {
    pub fn name(self) -> &'static str {
        match self {
            SolverId::Exact => "exact",
            SolverId::ValueIteration => "value_iteration",
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One timed solve. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub solver: SolverId,
    pub width: usize,
    pub height: usize,
    /// Number of reward sources in the scenario.
    pub rewards: usize,
    pub gamma: f64,
    pub seed: u64,
    /// Minimum wall time over the configured repetitions, in seconds.
    pub wall_time_s: f64,
    /// Bellman sweeps for value iteration; processed peaks for exact.
    pub iters: usize,
    /// Sum of all value entries, for cross-solver drift detection.
    pub checksum: f64,
}

/// Quantity varied across sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Rewards,
    States,
    Discount,
}

/// One sweep: a variable, its grid of points, and the fixed parameters.
///
/// `points` are reward counts, square-grid side lengths, or discount
/// factors depending on `variable`; integer-valued variables round to the
/// nearest integer. Every field except `variable` and `points` has a
/// default, so a sweep file only names what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub points: Vec<f64>,
    #[serde(default = "default_dim")]
    pub width: usize,
    #[serde(default = "default_dim")]
    pub height: usize,
    #[serde(default = "default_reward_count")]
    pub reward_count: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_value_lo")]
    pub value_lo: f64,
    #[serde(default = "default_value_hi")]
    pub value_hi: f64,
    /// Scenarios per point; 50 keeps a full sweep at desk scale.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Timed runs per scenario; wall time is their minimum.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Residual threshold for the timed value-iteration runs. Looser than
    /// the verification threshold on purpose: it matches how the solver is
    /// typically run, which keeps timing comparisons interpretable.
    #[serde(default = "default_vi_epsilon")]
    pub vi_epsilon: f64,
}

fn default_dim() -> usize {
    50
}
fn default_reward_count() -> usize {
    5
}
fn default_gamma() -> f64 {
    0.9
}
fn default_value_lo() -> f64 {
    1.0
}
fn default_value_hi() -> f64 {
    10.0
}
fn default_trials() -> usize {
    50
}
fn default_repetitions() -> usize {
    3
}
fn default_vi_epsilon() -> f64 {
    1e-6
}

impl SweepSpec {
    /// Generation parameters for one point, with the variable applied.
    fn gen_spec_at(&self, point: f64, seed: u64) -> GenSpec {
        let mut g = GenSpec {
            width: self.width,
            height: self.height,
            reward_count: self.reward_count,
            value_range: (self.value_lo, self.value_hi),
            gamma: self.gamma,
            seed,
        };
        match self.variable {
            SweepVariable::Rewards => g.reward_count = point.round() as usize,
            SweepVariable::States => {
                let side = point.round() as usize;
                g.width = side;
                g.height = side;
            }
            SweepVariable::Discount => g.gamma = point,
        }
        g
    }
}

/// A point × trial that produced no record, with enough context to replay.
#[derive(Debug, Clone)]
pub struct SweepFailure {
    pub point: f64,
    pub seed: u64,
    /// `None` when the failure precedes solving (generation, cross-check).
    pub solver: Option<SolverId>,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub records: Vec<BenchmarkRecord>,
    pub failures: Vec<SweepFailure>,
}

#[derive(Debug)]
pub enum BenchError {
    ZeroRepetitions,
    Exact { seed: u64, source: SolveError },
    Vi { seed: u64, source: ViError },
    InvalidSweep(String),
    NoRecords,
    Csv(csv::Error),
    Json(serde_json::Error),
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::ZeroRepetitions => write!(f, "repetitions must be positive"),
            BenchError::Exact { seed, source } => {
                write!(f, "exact solver failed on seed {seed}: {source}")
            }
            BenchError::Vi { seed, source } => {
                write!(f, "value iteration failed on seed {seed}: {source}")
            }
            BenchError::InvalidSweep(msg) => write!(f, "invalid sweep: {msg}"),
            BenchError::NoRecords => write!(f, "no records"),
            BenchError::Csv(e) => write!(f, "csv output failed: {e}"),
            BenchError::Json(e) => write!(f, "json output failed: {e}"),
        }
    }
}

impl std::error::Error for BenchError {}

/// Times one solver on one scenario: `repetitions` runs, minimum wall
/// time. The minimum is the standard noise floor — scheduling hiccups only
/// ever add time. The result fields come from the last run; solves are
/// deterministic, so every run agrees.
///
/// `seed` is carried into the record (and any error) so the scenario can
/// be regenerated. Graph worlds record their state count as `width` with
/// `height` 1.
pub fn time_solver(
    solver: SolverId,
    scenario: &Scenario,
    seed: u64,
    repetitions: usize,
    vi: &ViConfig,
) -> Result<BenchmarkRecord, BenchError> {
    if repetitions == 0 {
        return Err(BenchError::ZeroRepetitions);
    }
    let (width, height) = match &scenario.world {
        World::Grid(g) => (g.width(), g.height()),
        World::Graph(_) => (scenario.world.state_count(), 1),
    };
    let mut wall_time_s = f64::INFINITY;
    let mut iters = 0;
    let mut checksum = 0.0;
    for _ in 0..repetitions {
        let start = Instant::now();
        let (i, c) = match solver {
            SolverId::Exact => {
                let sol = exact::solve(scenario)
                    .map_err(|source| BenchError::Exact { seed, source })?;
                (sol.iterations, sol.values.sum())
            }
            SolverId::ValueIteration => {
                let sol = value_iteration::solve(scenario, vi)
                    .map_err(|source| BenchError::Vi { seed, source })?;
                (sol.iterations, sol.values.sum())
            }
        };
        wall_time_s = wall_time_s.min(start.elapsed().as_secs_f64());
        iters = i;
        checksum = c;
    }
    Ok(BenchmarkRecord {
        solver,
        width,
        height,
        rewards: scenario.rewards.len(),
        gamma: scenario.gamma,
        seed,
        wall_time_s,
        iters,
        checksum,
    })
}

/// Runs every point × trial of a sweep, timing both solvers on each
/// generated scenario.
///
/// Scenario seeds are `base_seed + point_index * trials + trial`, so the
/// scenario set is a pure function of the sweep spec. A failing point is
/// recorded and skipped; the sweep continues. After both solvers succeed
/// on a scenario their checksums are cross-checked against the
/// value-iteration error bound, and a deviation is reported as a failure
/// without discarding the records.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome, BenchError> {
    if spec.points.len() < 2 {
        return Err(BenchError::InvalidSweep(format!(
            "need at least two points, got {}",
            spec.points.len()
        )));
    }
    if spec.trials == 0 {
        return Err(BenchError::InvalidSweep("trials must be positive".into()));
    }
    if spec.repetitions == 0 {
        return Err(BenchError::InvalidSweep("repetitions must be positive".into()));
    }
    if !(spec.vi_epsilon.is_finite() && spec.vi_epsilon > 0.0) {
        return Err(BenchError::InvalidSweep(format!(
            "vi_epsilon must be positive and finite, got {}",
            spec.vi_epsilon
        )));
    }
    let vi = ViConfig { epsilon: spec.vi_epsilon, ..ViConfig::default() };
    let mut outcome = SweepOutcome::default();
    for (pi, &point) in spec.points.iter().enumerate() {
        for trial in 0..spec.trials {
            let seed = spec.base_seed + (pi * spec.trials + trial) as u64;
            let scenario = match random_scenario(&spec.gen_spec_at(point, seed)) {
                Ok(s) => s,
                Err(e) => {
                    outcome.failures.push(SweepFailure {
                        point,
                        seed,
                        solver: None,
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            let mut checksums = [None, None];
            for (slot, solver) in [SolverId::Exact, SolverId::ValueIteration]
                .into_iter()
                .enumerate()
            {
                match time_solver(solver, &scenario, seed, spec.repetitions, &vi) {
                    Ok(record) => {
                        checksums[slot] = Some(record.checksum);
                        outcome.records.push(record);
                    }
                    Err(e) => outcome.failures.push(SweepFailure {
                        point,
                        seed,
                        solver: Some(solver),
                        message: e.to_string(),
                    }),
                }
            }
            if let [Some(exact_sum), Some(vi_sum)] = checksums {
                let gamma = scenario.gamma;
                let tol = spec.vi_epsilon * gamma / (1.0 - gamma)
                    * scenario.world.state_count() as f64;
                let dev = (exact_sum - vi_sum).abs();
                if dev > tol {
                    outcome.failures.push(SweepFailure {
                        point,
                        seed,
                        solver: None,
                        message: format!(
                            "solver checksums deviate by {dev:.3e}, tolerance {tol:.3e}"
                        ),
                    });
                }
            }
        }
    }
    Ok(outcome)
}

/// Output encodings for [`emit_results`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Writes records as CSV (header plus one row per record, line-feed
/// terminated) or as a JSON array with the same field names. An empty
/// record list is an error: silently writing nothing hides a failed sweep.
pub fn emit_results(
    records: &[BenchmarkRecord],
    format: OutputFormat,
    dest: &mut dyn Write,
) -> Result<(), BenchError> {
    if records.is_empty() {
        return Err(BenchError::NoRecords);
    }
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(dest);
            for r in records {
                w.serialize(r).map_err(BenchError::Csv)?;
            }
            w.flush().map_err(csv::Error::from).map_err(BenchError::Csv)?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *dest, records).map_err(BenchError::Json)?;
            dest.write_all(b"\n")
                .map_err(serde_json::Error::io)
                .map_err(BenchError::Json)?;
        }
    }
    Ok(())
}

/// Per-point, per-solver wall-time statistics over a sweep's records.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub solver: SolverId,
    pub point: f64,
    pub samples: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub min_s: f64,
}

/// Groups records by (solver, point) in first-appearance order and
/// reduces wall times to mean, population standard deviation, and
/// minimum. The point value is read back out of each record according to
/// the swept variable.
pub fn summarize(records: &[BenchmarkRecord], variable: SweepVariable) -> Vec<SummaryRow> {
    let point_of = |r: &BenchmarkRecord| match variable {
        SweepVariable::Rewards => r.rewards as f64,
        SweepVariable::States => r.width as f64,
        SweepVariable::Discount => r.gamma,
    };
    let mut groups: Vec<(SolverId, f64, Vec<f64>)> = Vec::new();
    for r in records {
        let p = point_of(r);
        match groups.iter_mut().find(|(s, q, _)| *s == r.solver && *q == p) {
            Some((_, _, times)) => times.push(r.wall_time_s),
            None => groups.push((r.solver, p, vec![r.wall_time_s])),
        }
    }
    groups
        .into_iter()
        .map(|(solver, point, times)| {
            let n = times.len() as f64;
            let mean = times.iter().sum::<f64>() / n;
            let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
            let min = times.iter().copied().fold(f64::INFINITY, f64::min);
            SummaryRow {
                solver,
                point,
                samples: times.len(),
                mean_s: mean,
                std_s: var.sqrt(),
                min_s: min,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::RewardSource;
    use crate::world::GridWorld;

    fn small_scenario() -> Scenario {
        let g = GridWorld::new(5, 5).unwrap();
        Scenario::new(
            World::Grid(g),
            0.9,
            vec![RewardSource { state: 12, value: 1.0 }],
        )
        .unwrap()
    }

    fn sweep(variable: SweepVariable, points: Vec<f64>) -> SweepSpec {
        SweepSpec {
            variable,
            points,
            width: 6,
            height: 6,
            reward_count: 2,
            gamma: 0.9,
            value_lo: 1.0,
            value_hi: 10.0,
            trials: 2,
            base_seed: 11,
            repetitions: 1,
            vi_epsilon: 1e-6,
        }
    }

    #[test]
    fn single_peak_scenario_records_one_iteration() {
        let r = time_solver(SolverId::Exact, &small_scenario(), 9, 3, &ViConfig::default())
            .unwrap();
        assert_eq!(r.iters, 1);
        assert_eq!((r.width, r.height, r.rewards), (5, 5, 1));
        assert_eq!(r.seed, 9);
        assert!(r.wall_time_s > 0.0 && r.wall_time_s.is_finite());
        assert!(r.checksum.is_finite());
    }

    #[test]
    fn zero_repetitions_is_rejected() {
        let err = time_solver(SolverId::Exact, &small_scenario(), 0, 0, &ViConfig::default());
        assert!(matches!(err, Err(BenchError::ZeroRepetitions)));
    }

    #[test]
    fn both_solvers_agree_on_the_checksum() {
        let s = small_scenario();
        let vi = ViConfig { epsilon: 1e-6, ..ViConfig::default() };
        let a = time_solver(SolverId::Exact, &s, 1, 1, &vi).unwrap();
        let b = time_solver(SolverId::ValueIteration, &s, 1, 1, &vi).unwrap();
        let tol = 1e-6 * 0.9 / 0.1 * 25.0;
        assert!((a.checksum - b.checksum).abs() <= tol);
    }

    #[test]
    fn csv_output_has_the_pinned_header_and_round_trips() {
        let s = small_scenario();
        let vi = ViConfig::default();
        let records = vec![
            time_solver(SolverId::Exact, &s, 3, 1, &vi).unwrap(),
            time_solver(SolverId::ValueIteration, &s, 3, 1, &vi).unwrap(),
        ];
        let mut buf = Vec::new();
        emit_results(&records, OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "solver,width,height,rewards,gamma,seed,wall_time_s,iters,checksum\n"
        ));
        assert!(!text.contains('\r'));
        let parsed: Vec<BenchmarkRecord> = csv::Reader::from_reader(buf.as_slice())
            .deserialize()
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(parsed, records);
    }

    #[test]
    fn json_output_uses_the_same_field_names_and_round_trips() {
        let records =
            vec![time_solver(SolverId::Exact, &small_scenario(), 3, 1, &ViConfig::default())
                .unwrap()];
        let mut buf = Vec::new();
        emit_results(&records, OutputFormat::Json, &mut buf).unwrap();
        let value: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let mut keys: Vec<&str> =
            value[0].as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            ["checksum", "gamma", "height", "iters", "rewards", "seed", "solver", "wall_time_s", "width"]
        );
        assert_eq!(value[0]["solver"], "exact");
        // field order in the emitted text matches the CSV column order
        let text = String::from_utf8(buf.clone()).unwrap();
        let offsets: Vec<usize> =
            ["\"solver\"", "\"width\"", "\"height\"", "\"rewards\"", "\"gamma\"", "\"seed\"", "\"wall_time_s\"", "\"iters\"", "\"checksum\""]
                .iter()
                .map(|k| text.find(k).unwrap())
                .collect();
        assert!(offsets.windows(2).all(|w| w[0] < w[1]));
        let parsed: Vec<BenchmarkRecord> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(parsed, records);
    }

    #[test]
    fn empty_record_lists_are_an_error() {
        let mut buf = Vec::new();
        let err = emit_results(&[], OutputFormat::Csv, &mut buf).unwrap_err();
        assert!(err.to_string().contains("no records"));
    }

    #[test]
    fn reward_sweeps_vary_the_reward_count_and_complete() {
        let outcome = run_sweep(&sweep(SweepVariable::Rewards, vec![1.0, 3.0])).unwrap();
        assert!(outcome.failures.is_empty());
        assert_eq!(outcome.records.len(), 2 * 2 * 2); // points x trials x solvers
        assert!(outcome.records[..4].iter().all(|r| r.rewards == 1));
        assert!(outcome.records[4..].iter().all(|r| r.rewards == 3));
        assert!(outcome.records.iter().all(|r| (r.width, r.height) == (6, 6)));
    }

    #[test]
    fn state_sweeps_resize_the_grid() {
        let outcome = run_sweep(&sweep(SweepVariable::States, vec![4.0, 5.0])).unwrap();
        assert!(outcome.failures.is_empty());
        let sides: Vec<usize> = outcome.records.iter().map(|r| r.width).collect();
        assert_eq!(sides, [4, 4, 4, 4, 5, 5, 5, 5]);
        assert!(outcome.records.iter().all(|r| r.width == r.height));
    }

    #[test]
    fn discount_sweeps_vary_gamma() {
        let outcome = run_sweep(&sweep(SweepVariable::Discount, vec![0.5, 0.9])).unwrap();
        assert!(outcome.failures.is_empty());
        let gammas: Vec<f64> = outcome.records.iter().map(|r| r.gamma).collect();
        assert_eq!(gammas, [0.5, 0.5, 0.5, 0.5, 0.9, 0.9, 0.9, 0.9]);
    }

    #[test]
    fn sweeps_are_reproducible_up_to_wall_time() {
        let spec = sweep(SweepVariable::Rewards, vec![1.0, 2.0]);
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep(&spec).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.seed, y.seed);
            assert_eq!(x.checksum, y.checksum);
            assert_eq!(x.iters, y.iters);
        }
    }

    #[test]
    fn failing_points_are_recorded_and_the_sweep_continues() {
        // 200 rewards cannot fit on a 6x6 grid; the other point still runs
        let outcome = run_sweep(&sweep(SweepVariable::Rewards, vec![200.0, 2.0])).unwrap();
        assert_eq!(outcome.failures.len(), 2); // one per trial of the bad point
        assert!(outcome.failures.iter().all(|f| f.point == 200.0 && f.solver.is_none()));
        assert_eq!(outcome.records.len(), 4);
    }

    #[test]
    fn degenerate_sweep_specs_are_rejected() {
        let one_point = sweep(SweepVariable::Rewards, vec![1.0]);
        assert!(matches!(run_sweep(&one_point), Err(BenchError::InvalidSweep(_))));
        let no_trials = SweepSpec { trials: 0, ..sweep(SweepVariable::Rewards, vec![1.0, 2.0]) };
        assert!(matches!(run_sweep(&no_trials), Err(BenchError::InvalidSweep(_))));
        let no_reps =
            SweepSpec { repetitions: 0, ..sweep(SweepVariable::Rewards, vec![1.0, 2.0]) };
        assert!(matches!(run_sweep(&no_reps), Err(BenchError::InvalidSweep(_))));
    }

    #[test]
    fn sweep_specs_deserialize_with_defaults() {
        let spec: SweepSpec =
            serde_json::from_str(r#"{"variable": "discount", "points": [0.5, 0.9]}"#).unwrap();
        assert_eq!(spec.variable, SweepVariable::Discount);
        assert_eq!((spec.width, spec.height, spec.reward_count), (50, 50, 5));
        assert_eq!((spec.trials, spec.repetitions), (50, 3));
        assert_eq!(spec.vi_epsilon, 1e-6);
        assert_eq!(spec.base_seed, 0);
        let err = serde_json::from_str::<SweepSpec>(r#"{"variable": "speed", "points": []}"#);
        assert!(err.is_err());
    }

    #[test]
    fn summaries_group_by_solver_and_point() {
        let mk = |solver, rewards, t| BenchmarkRecord {
            solver,
            width: 6,
            height: 6,
            rewards,
            gamma: 0.9,
            seed: 0,
            wall_time_s: t,
            iters: 1,
            checksum: 0.0,
        };
        let records = vec![
            mk(SolverId::Exact, 1, 2.0),
            mk(SolverId::Exact, 1, 4.0),
            mk(SolverId::ValueIteration, 1, 10.0),
            mk(SolverId::Exact, 2, 8.0),
        ];
        let rows = summarize(&records, SweepVariable::Rewards);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].solver, SolverId::Exact);
        assert_eq!(rows[0].point, 1.0);
        assert_eq!(rows[0].samples, 2);
        assert_eq!(rows[0].mean_s, 3.0);
        assert_eq!(rows[0].std_s, 1.0);
        assert_eq!(rows[0].min_s, 2.0);
        assert_eq!(rows[1].solver, SolverId::ValueIteration);
        assert_eq!(rows[2].point, 2.0);
    }
}
