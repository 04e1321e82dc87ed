//! Grid and graph world models: states, actions, deterministic transitions.

use std::fmt;

/// The four grid moves.
///
/// `Up` increases `y`, `Down` decreases `y`, `Left` decreases `x`, `Right`
/// increases `x`. The declaration order doubles as the action index order
/// (0..4) used wherever ties are broken deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [
        GridAction::Up,
        GridAction::Down,
        GridAction::Left,
        GridAction::Right,
    ];

    /// Action index in tie-break order.
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<GridAction> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GridAction::Up => "up",
            GridAction::Down => "down",
            GridAction::Left => "left",
            GridAction::Right => "right",
        }
    }
}

/// Rectangular grid world; moves that would leave the grid are absent from
/// the action set, so every remaining action is legal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridWorld {
    width: usize,
    height: usize,
}

impl GridWorld {
    /// Builds a grid. At least two cells are required: a 1x1 grid has no
    /// legal move, which leaves a continuing process undefined.
    pub fn new(width: usize, height: usize) -> Result<GridWorld, WorldError> {
        if width == 0 || height == 0 || width * height < 2 {
            return Err(WorldError::InvalidGrid { width, height });
        }
        Ok(GridWorld { width, height })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn state_count(&self) -> usize {
        self.width * self.height
    }

    /// Row-major state id of cell `(x, y)`.
    pub fn state_index(&self, x: usize, y: usize) -> Result<usize, WorldError> {
        if x >= self.width || y >= self.height {
            return Err(WorldError::CellOutOfBounds {
                x,
                y,
                width: self.width,
                height: self.height,
            });
        }
        Ok(y * self.width + x)
    }

    /// Inverse of [`state_index`](Self::state_index). Panics on an out-of-range id.
    #[inline]
    pub fn coords(&self, state: usize) -> (usize, usize) {
        assert!(state < self.state_count(), "state {state} out of range");
        (state % self.width, state / self.width)
    }

    /// Successor of `state` under `action`, or `None` at the grid edge.
    #[inline]
    pub fn step(&self, state: usize, action: GridAction) -> Option<usize> {
        let (x, y) = self.coords(state);
        let (nx, ny) = match action {
            GridAction::Up => (x, y + 1),
            GridAction::Down => (x, y.wrapping_sub(1)),
            GridAction::Left => (x.wrapping_sub(1), y),
            GridAction::Right => (x + 1, y),
        };
        if nx >= self.width || ny >= self.height {
            None
        } else {
            Some(ny * self.width + nx)
        }
    }
}

/// Explicit deterministic transition table over `states` x `actions`.
///
/// `next[s * actions + a]` is the successor of `s` under action `a`, or
/// `None` where the action is unavailable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionGraph {
    states: usize,
    actions: usize,
    next: Vec<Option<usize>>,
}

impl TransitionGraph {
    pub fn new(
        states: usize,
        actions: usize,
        next: Vec<Option<usize>>,
    ) -> Result<TransitionGraph, WorldError> {
        if states == 0 || actions == 0 {
            return Err(WorldError::MalformedGraph(format!(
                "graph needs at least one state and one action (got {states} states, {actions} actions)"
            )));
        }
        if next.len() != states * actions {
            return Err(WorldError::MalformedGraph(format!(
                "transition table has {} entries, expected {} ({} states x {} actions)",
                next.len(),
                states * actions,
                states,
                actions
            )));
        }
        for (i, entry) in next.iter().enumerate() {
            if let Some(target) = entry {
                if *target >= states {
                    return Err(WorldError::MalformedGraph(format!(
                        "transition ({}, {}) points at state {} but only {} states exist",
                        i / actions,
                        i % actions,
                        target,
                        states
                    )));
                }
            }
        }
        Ok(TransitionGraph {
            states,
            actions,
            next,
        })
    }

    #[inline]
    pub fn states(&self) -> usize {
        self.states
    }

    #[inline]
    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn next(&self, state: usize, action: usize) -> Option<usize> {
        self.next[state * self.actions + action]
    }
}

/// A deterministic world: either a grid or an explicit transition graph.
#[derive(Debug, Clone, PartialEq)]
pub enum World {
    Grid(GridWorld),
    Graph(TransitionGraph),
}

impl World {
    #[inline]
    pub fn state_count(&self) -> usize {
        match self {
            World::Grid(g) => g.state_count(),
            World::Graph(g) => g.states(),
        }
    }

    /// Size of the action alphabet; a given state may support fewer.
    #[inline]
    pub fn action_count(&self) -> usize {
        match self {
            World::Grid(_) => GridAction::ALL.len(),
            World::Graph(g) => g.actions(),
        }
    }

    /// Successor of `state` under `action`, or `None` where the action is
    /// unavailable. Panics on an out-of-range state or action id.
    #[inline]
    pub fn next_state(&self, state: usize, action: usize) -> Option<usize> {
        match self {
            World::Grid(g) => g.step(state, GridAction::from_index(action).expect("action id")),
            World::Graph(g) => g.next(state, action),
        }
    }

    /// Checked transition: out-of-range or unavailable actions are errors.
    pub fn transition(&self, state: usize, action: usize) -> Result<usize, WorldError> {
        if state >= self.state_count() {
            return Err(WorldError::StateOutOfBounds {
                state,
                count: self.state_count(),
            });
        }
        if action >= self.action_count() {
            return Err(WorldError::UnavailableAction { state, action });
        }
        self.next_state(state, action)
            .ok_or(WorldError::UnavailableAction { state, action })
    }

    /// Available action ids at `state`, in ascending order.
    pub fn available_actions(&self, state: usize) -> Vec<usize> {
        (0..self.action_count())
            .filter(|&a| self.next_state(state, a).is_some())
            .collect()
    }

    /// `(action, successor)` pairs at `state`, in ascending action order.
    pub fn successors(&self, state: usize) -> Vec<(usize, usize)> {
        (0..self.action_count())
            .filter_map(|a| self.next_state(state, a).map(|n| (a, n)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorldError {
    InvalidGrid { width: usize, height: usize },
    CellOutOfBounds { x: usize, y: usize, width: usize, height: usize },
    StateOutOfBounds { state: usize, count: usize },
    UnavailableAction { state: usize, action: usize },
    MalformedGraph(String),
}

impl fmt::Display for WorldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorldError::InvalidGrid { width, height } => write!(
                f,
                "grid must contain at least two cells, got {width}x{height}"
            ),
            WorldError::CellOutOfBounds { x, y, width, height } => {
                write!(f, "cell ({x}, {y}) outside {width}x{height} grid")
            }
            WorldError::StateOutOfBounds { state, count } => {
                write!(f, "state {state} out of range (world has {count} states)")
            }
            WorldError::UnavailableAction { state, action } => {
                write!(f, "action {action} unavailable in state {state}")
            }
            WorldError::MalformedGraph(msg) => write!(f, "malformed transition graph: {msg}"),
        }
    }
}

impl std::error::Error for WorldError {}
