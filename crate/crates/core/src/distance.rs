//! Shortest-path distances, per-target distance fields, and minimum cycle
//! lengths.
//!
//! Distances count actions, so they are directed: `d(a, b)` and `d(b, a)`
//! can differ on graph worlds. Unreachable pairs are `None`, never a large
//! finite stand-in.

use std::collections::{HashMap, VecDeque};

use crate::world::{GridWorld, World};

/// Distances from every state to one fixed target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    target: usize,
    dist: Vec<Option<u32>>,
}

impl DistanceField {
    #[inline]
    pub fn target(&self) -> usize {
        self.target
    }

    /// Distance from `state` to the field's target.
    #[inline]
    pub fn get(&self, state: usize) -> Option<u32> {
        self.dist[state]
    }

    pub fn as_slice(&self) -> &[Option<u32>] {
        &self.dist
    }
}

/// Minimum action count between two grid cells.
#[inline]
pub fn manhattan_distance(a: (usize, usize), b: (usize, usize)) -> u32 {
    (a.0.abs_diff(b.0) + a.1.abs_diff(b.1)) as u32
}

/// Distances from every state *to* `target`.
///
/// Grids use the closed form; graphs run one breadth-first search over the
/// reversed transition relation, so the whole field costs O(|S|·|A|).
pub fn distance_field_to(world: &World, target: usize) -> DistanceField {
    assert!(target < world.state_count(), "target {target} out of range");
    match world {
        World::Grid(g) => {
            let t = g.coords(target);
            let dist = (0..g.state_count())
                .map(|s| Some(manhattan_distance(g.coords(s), t)))
                .collect();
            DistanceField { target, dist }
        }
        World::Graph(_) => {
            let n = world.state_count();
            let mut reverse_adj = vec![Vec::new(); n];
            for s in 0..n {
                for (_, t) in world.successors(s) {
                    reverse_adj[t].push(s);
                }
            }
            let mut dist = vec![None; n];
            dist[target] = Some(0);
            let mut queue = VecDeque::from([target]);
            while let Some(s) = queue.pop_front() {
                let d = dist[s].expect("queued states have distances");
                for &p in &reverse_adj[s] {
                    if dist[p].is_none() {
                        dist[p] = Some(d + 1);
                        queue.push_back(p);
                    }
                }
            }
            DistanceField { target, dist }
        }
    }
}

/// Length of the shortest action sequence that leaves `state` and returns
/// to it; `None` when no cycle through `state` exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinCycleLength {
    pub state: usize,
    pub length: Option<u32>,
}

/// Shortest cycle through `state`: one action out, then the shortest way
/// back, minimised over the available actions. A self-loop gives 1; on a
/// grid every move can be reversed, so the answer is always 2.
pub fn min_cycle_length(world: &World, state: usize) -> MinCycleLength {
    let length = match world {
        World::Grid(_) => Some(2),
        World::Graph(_) => {
            let field = distance_field_to(world, state);
            world
                .successors(state)
                .iter()
                .filter_map(|&(_, t)| field.get(t).map(|d| d + 1))
                .min()
        }
    };
    MinCycleLength { state, length }
}

/// Distance and cycle queries for a fixed target set, precomputed once so
/// each later query is O(1). Grid queries use the closed form and need no
/// precomputation; graph queries build one field per target.
#[derive(Debug, Clone)]
pub struct DistanceOracle {
    grid: Option<GridWorld>,
    fields: HashMap<usize, DistanceField>,
    cycles: HashMap<usize, Option<u32>>,
}

impl DistanceOracle {
    pub fn new(world: &World, targets: impl IntoIterator<Item = usize>) -> DistanceOracle {
        match world {
            World::Grid(g) => DistanceOracle {
                grid: Some(*g),
                fields: HashMap::new(),
                cycles: HashMap::new(),
            },
            World::Graph(_) => {
                let mut fields = HashMap::new();
                let mut cycles = HashMap::new();
                for t in targets {
                    let field = distance_field_to(world, t);
                    let cycle = world
                        .successors(t)
                        .iter()
                        .filter_map(|&(_, n)| field.get(n).map(|d| d + 1))
                        .min();
                    fields.insert(t, field);
                    cycles.insert(t, cycle);
                }
                DistanceOracle { grid: None, fields, cycles }
            }
        }
    }

    /// Distance from `from` to `to`. For graph worlds `to` must be one of
    /// the precomputed targets.
    #[inline]
    pub fn distance(&self, from: usize, to: usize) -> Option<u32> {
        match &self.grid {
            Some(g) => Some(manhattan_distance(g.coords(from), g.coords(to))),
            None => self
                .fields
                .get(&to)
                .expect("distance queried for a target outside the precomputed set")
                .get(from),
        }
    }

    /// Precomputed field into `target`, if one was built (graph worlds only).
    #[inline]
    pub fn field_to(&self, target: usize) -> Option<&DistanceField> {
        self.fields.get(&target)
    }

    /// Minimum cycle length through `state` (a precomputed target on graphs).
    #[inline]
    pub fn min_cycle(&self, state: usize) -> Option<u32> {
        match &self.grid {
            Some(_) => Some(2),
            None => *self
                .cycles
                .get(&state)
                .expect("cycle length queried for a target outside the precomputed set"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::TransitionGraph;
    use proptest::prelude::*;

    fn four_ring() -> World {
        let next = vec![
            Some(1), Some(3),
            Some(2), Some(0),
            Some(3), Some(1),
            Some(0), Some(2),
        ];
        World::Graph(TransitionGraph::new(4, 2, next).unwrap())
    }

    /// Every action sequence of length <= `max_len`, checked for a return
    /// to `start`; independent of the BFS implementation above.
    fn brute_force_min_cycle(world: &World, start: usize, max_len: u32) -> Option<u32> {
        let mut frontier = vec![start];
        for depth in 1..=max_len {
            let mut next_frontier = Vec::new();
            for s in frontier {
                for (_, t) in world.successors(s) {
                    if t == start {
                        return Some(depth);
                    }
                    next_frontier.push(t);
                }
            }
            next_frontier.sort_unstable();
            next_frontier.dedup();
            frontier = next_frontier;
        }
        None
    }

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan_distance((0, 0), (3, 4)), 7);
        assert_eq!(manhattan_distance((2, 2), (2, 2)), 0);
        assert_eq!(manhattan_distance((2, 3), (2, 2)), 1);
    }

    #[test]
    fn grid_field_matches_closed_form() {
        let g = GridWorld::new(5, 5).unwrap();
        let target = g.state_index(2, 2).unwrap();
        let field = distance_field_to(&World::Grid(g), target);
        assert_eq!(field.get(g.state_index(0, 0).unwrap()), Some(4));
        assert_eq!(field.get(target), Some(0));
    }

    #[test]
    fn ring_field_uses_the_short_way_round() {
        let field = distance_field_to(&four_ring(), 3);
        assert_eq!(field.get(0), Some(1)); // s0 -(action 1)-> s3
        assert_eq!(field.get(2), Some(1));
        assert_eq!(field.get(1), Some(2));
        assert_eq!(field.get(3), Some(0));
    }

    #[test]
    fn states_with_no_inbound_edges_are_unreachable() {
        // s0 -> s1, s1 -> s1: nothing enters s0.
        let g = TransitionGraph::new(2, 1, vec![Some(1), Some(1)]).unwrap();
        let field = distance_field_to(&World::Graph(g), 0);
        assert_eq!(field.get(1), None);
        assert_eq!(field.get(0), Some(0));
    }

    #[test]
    fn grid_min_cycle_is_two() {
        let w = World::Grid(GridWorld::new(5, 5).unwrap());
        for s in 0..w.state_count() {
            assert_eq!(min_cycle_length(&w, s).length, Some(2));
        }
    }

    #[test]
    fn self_loop_min_cycle_is_one() {
        let g = TransitionGraph::new(1, 1, vec![Some(0)]).unwrap();
        assert_eq!(min_cycle_length(&World::Graph(g), 0).length, Some(1));
    }

    #[test]
    fn ring_min_cycle_matches_exhaustive_enumeration() {
        let w = four_ring();
        let by_search = min_cycle_length(&w, 0).length;
        let by_enumeration = brute_force_min_cycle(&w, 0, 4);
        assert_eq!(by_search, Some(2)); // one step out, one step back
        assert_eq!(by_search, by_enumeration);
    }

    #[test]
    fn oracle_answers_grid_queries_without_precomputation() {
        let w = World::Grid(GridWorld::new(4, 3).unwrap());
        let oracle = DistanceOracle::new(&w, []);
        assert_eq!(oracle.distance(0, 11), Some(5));
        assert_eq!(oracle.min_cycle(5), Some(2));
    }

    #[test]
    fn oracle_precomputes_graph_targets() {
        let w = four_ring();
        let oracle = DistanceOracle::new(&w, [0, 2]);
        assert_eq!(oracle.distance(1, 2), Some(1));
        assert_eq!(oracle.distance(1, 0), Some(1));
        assert_eq!(oracle.min_cycle(2), Some(2));
    }

    /// Turns a grid into the equivalent explicit graph so BFS can be
    /// checked against the closed form.
    fn grid_as_graph(g: GridWorld) -> World {
        let world = World::Grid(g);
        let n = world.state_count();
        let a = world.action_count();
        let mut next = Vec::with_capacity(n * a);
        for s in 0..n {
            for act in 0..a {
                next.push(world.next_state(s, act));
            }
        }
        World::Graph(TransitionGraph::new(n, a, next).unwrap())
    }

    #[test]
    fn bfs_equals_manhattan_on_grids_up_to_8x8() {
        for w in 1..=8usize {
            for h in 1..=8usize {
                if w * h < 2 {
                    continue;
                }
                let g = GridWorld::new(w, h).unwrap();
                let graph = grid_as_graph(g);
                for target in 0..g.state_count() {
                    let field = distance_field_to(&graph, target);
                    for s in 0..g.state_count() {
                        let expected = manhattan_distance(g.coords(s), g.coords(target));
                        assert_eq!(field.get(s), Some(expected), "{w}x{h} {s}->{target}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn triangle_inequality_on_grids(
            w in 1usize..30,
            h in 1usize..30,
            seeds in prop::collection::vec(0usize..900, 3),
        ) {
            prop_assume!(w * h >= 2);
            let g = GridWorld::new(w, h).unwrap();
            let pick = |i: usize| seeds[i] % g.state_count();
            let (a, b, c) = (pick(0), pick(1), pick(2));
            let d = |x: usize, y: usize| manhattan_distance(g.coords(x), g.coords(y));
            prop_assert!(d(a, c) <= d(a, b) + d(b, c));
            prop_assert_eq!(d(a, b), d(b, a));
            prop_assert_eq!(d(a, a), 0);
        }

        #[test]
        fn min_cycle_matches_enumeration_on_small_graphs(
            states in 2usize..=6,
            actions in 1usize..=3,
            table in prop::collection::vec(prop::option::of(0usize..6), 36),
            start in 0usize..6,
        ) {
            let start = start % states;
            let mut next: Vec<Option<usize>> = (0..states * actions)
                .map(|i| table[i].map(|t| t % states))
                .collect();
            // keep the table legal: every state needs one available action
            for s in 0..states {
                let row = &mut next[s * actions..(s + 1) * actions];
                if row.iter().all(|e| e.is_none()) {
                    row[0] = Some((s + 1) % states);
                }
            }
            let w = World::Graph(TransitionGraph::new(states, actions, next).unwrap());
            let expected = brute_force_min_cycle(&w, start, states as u32);
            prop_assert_eq!(min_cycle_length(&w, start).length, expected);
        }
    }
}
