//! The Miner gridworld.
//!
//! A miner wanders a grid partitioned into four blocks. Arriving at the Gold
//! cell pays +1; a trap may be active on one of the trap cells of Block D.
//! After collecting gold or being caught the miner is carried back to the
//! start cell on the next step, whatever action it chose. Nothing ever
//! terminates: entrapment only ends the *target-policy* return, via `γ = 0`
//! on the entrapped observation states.
//!
//! Each step runs in this order:
//! 1. trap lifecycle: with no active trap, one is activated with probability
//!    `activation` on a uniformly chosen trap cell with a lifetime of three
//!    steps; otherwise the active trap's lifetime is decremented and the trap
//!    cleared at zero;
//! 2. a pending teleport moves the miner to the start cell, otherwise the
//!    action moves it (moves into a wall leave it in place);
//! 3. arriving on Gold pays +1;
//! 4. the miner is entrapped if its cell now holds the active trap;
//! 5. gold or entrapment schedules a teleport for the next step.
//!
//! The learner observes `(cell, entrapped)`; [`MinerModel`] is the exact
//! finite MDP over `(cell, trap status)` used by the analytic routines.

use rand_core::RngCore;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::mdp::{MdpModel, Policy, PredictionTask, StateSignals};
use crate::rng::{stream, uniform01, Stream};
use crate::scalar::Scalar;

pub const TRAP_LIFETIME: u8 = 3;
pub const TRAP_ACTIVATION: f64 = 0.25;
pub const DISCOUNT: f64 = 0.99;
pub const NUM_ACTIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    A,
    B,
    C,
    D,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::A, Block::B, Block::C, Block::D];

    pub fn index(self) -> usize {
        self as usize
    }

    fn from_char(c: char) -> Option<Block> {
        match c {
            'A' => Some(Block::A),
            'B' => Some(Block::B),
            'C' => Some(Block::C),
            'D' => Some(Block::D),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Left = 0,
    Right = 1,
    Up = 2,
    Down = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Left, Action::Right, Action::Up, Action::Down];

    pub fn from_index(i: usize) -> Action {
        Self::ALL[i]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("layout has no rows or empty rows")]
    Empty,
    #[error("row {row} has {got} cells, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("unknown block marker {marker:?} at row {row}, column {col}")]
    Marker { row: usize, col: usize, marker: char },
    #[error("{what} ({col}, {row}) is outside the grid")]
    OutOfBounds { what: &'static str, col: usize, row: usize },
    #[error("{0}")]
    Invalid(&'static str),
}

/// Grid geometry. Cells are indexed `row * width + col` with row 0 at the
/// bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinerLayout {
    width: usize,
    height: usize,
    blocks: Vec<Block>,
    start: usize,
    gold: usize,
    traps: Vec<usize>,
}

impl MinerLayout {
    /// 5×5 grid: Block A is the bottom two rows, Block C the top row, Block D
    /// the two cells of column 1 in rows 2–3, Block B the rest of rows 2–3.
    /// Start is (1, 0), Gold is (1, 4), and both D cells carry traps.
    pub fn canonical() -> Self {
        Self::from_rows(&["CCCCC", "BDBBB", "BDBBB", "AAAAA", "AAAAA"], (1, 0), (1, 4), None)
            .expect("canonical layout is valid")
    }

    /// `rows` lists block letters top row first. `start`, `gold` and `traps`
    /// are `(col, row)` with row 0 at the bottom. Without `traps`, every
    /// Block-D cell is a trap cell.
    pub fn from_rows<S: AsRef<str>>(
        rows: &[S],
        start: (usize, usize),
        gold: (usize, usize),
        traps: Option<&[(usize, usize)]>,
    ) -> Result<Self, LayoutError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().chars().count());
        if height == 0 || width == 0 {
            return Err(LayoutError::Empty);
        }
        let mut blocks = vec![Block::A; width * height];
        for (top_index, line) in rows.iter().enumerate() {
            let row = height - 1 - top_index;
            let chars: Vec<char> = line.as_ref().chars().collect();
            if chars.len() != width {
                return Err(LayoutError::Ragged { row, expected: width, got: chars.len() });
            }
            for (col, &c) in chars.iter().enumerate() {
                blocks[row * width + col] =
                    Block::from_char(c).ok_or(LayoutError::Marker { row, col, marker: c })?;
            }
        }
        let cell = |what: &'static str, (col, row): (usize, usize)| {
            if col < width && row < height {
                Ok(row * width + col)
            } else {
                Err(LayoutError::OutOfBounds { what, col, row })
            }
        };
        let start = cell("start", start)?;
        let gold = cell("gold", gold)?;
        if start == gold {
            return Err(LayoutError::Invalid("start and gold must differ"));
        }
        let traps: Vec<usize> = match traps {
            Some(list) => list.iter().map(|&p| cell("trap", p)).collect::<Result<_, _>>()?,
            None => (0..width * height).filter(|&c| blocks[c] == Block::D).collect(),
        };
        if traps.is_empty() {
            return Err(LayoutError::Invalid("at least one trap cell is required"));
        }
        for (k, &t) in traps.iter().enumerate() {
            if traps[..k].contains(&t) {
                return Err(LayoutError::Invalid("trap cells must be distinct"));
            }
            if blocks[t] != Block::D {
                return Err(LayoutError::Invalid("trap cells must lie in block D"));
            }
            if t == start || t == gold {
                return Err(LayoutError::Invalid("start and gold cannot be trap cells"));
            }
        }
        Ok(MinerLayout { width, height, blocks, start, gold, traps })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.blocks.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn gold(&self) -> usize {
        self.gold
    }

    pub fn traps(&self) -> &[usize] {
        &self.traps
    }

    pub fn block(&self, cell: usize) -> Block {
        self.blocks[cell]
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    /// Destination of `action` from `cell`; walls leave the miner in place.
    pub fn move_from(&self, cell: usize, action: Action) -> usize {
        let (c, r) = self.coords(cell);
        let (c, r) = match action {
            Action::Left if c > 0 => (c - 1, r),
            Action::Right if c + 1 < self.width => (c + 1, r),
            Action::Up if r + 1 < self.height => (c, r + 1),
            Action::Down if r > 0 => (c, r - 1),
            _ => (c, r),
        };
        r * self.width + c
    }

    /// Observation index of `(cell, entrapped)`.
    pub fn observation(&self, cell: usize, entrapped: bool) -> usize {
        cell + if entrapped { self.num_cells() } else { 0 }
    }

    pub fn num_observations(&self) -> usize {
        2 * self.num_cells()
    }

    /// Inverse of [`observation`](Self::observation).
    pub fn decode_observation(&self, obs: usize) -> (usize, bool) {
        (obs % self.num_cells(), obs >= self.num_cells())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrapStatus {
    Inactive,
    /// `trap` indexes [`MinerLayout::traps`].
    Active { trap: usize, remaining: u8 },
}

impl TrapStatus {
    fn active_cell(self, layout: &MinerLayout) -> Option<usize> {
        match self {
            TrapStatus::Inactive => None,
            TrapStatus::Active { trap, .. } => Some(layout.traps[trap]),
        }
    }

    /// Successor statuses with their probabilities.
    fn successors(self, num_traps: usize, activation: f64) -> Vec<(f64, TrapStatus)> {
        match self {
            TrapStatus::Inactive => {
                let mut out = vec![(1.0 - activation, TrapStatus::Inactive)];
                out.extend(
                    (0..num_traps)
                        .map(|trap| (activation / num_traps as f64, TrapStatus::Active { trap, remaining: TRAP_LIFETIME })),
                );
                out
            }
            TrapStatus::Active { remaining: 1, .. } => vec![(1.0, TrapStatus::Inactive)],
            TrapStatus::Active { trap, remaining } => vec![(1.0, TrapStatus::Active { trap, remaining: remaining - 1 })],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinerStep {
    pub observation: usize,
    pub gold: bool,
    pub entrapped: bool,
}

impl MinerStep {
    pub fn reward<T: Scalar>(&self) -> T {
        if self.gold {
            T::one()
        } else {
            T::zero()
        }
    }
}

/// The simulator. Owns the random stream that drives the traps.
#[derive(Debug, Clone)]
pub struct MinerGridworld {
    layout: MinerLayout,
    activation: f64,
    position: usize,
    trap: TrapStatus,
    pending_teleport: bool,
    rng: Stream,
}

impl MinerGridworld {
    pub fn new(layout: MinerLayout, seed: u64) -> Self {
        Self::with_activation(layout, TRAP_ACTIVATION, seed)
    }

    pub fn with_activation(layout: MinerLayout, activation: f64, seed: u64) -> Self {
        let position = layout.start;
        MinerGridworld {
            layout,
            activation,
            position,
            trap: TrapStatus::Inactive,
            pending_teleport: false,
            rng: stream(seed),
        }
    }

    /// Back to the start cell with no active trap. The random stream is not
    /// rewound.
    pub fn reset(&mut self) -> usize {
        self.position = self.layout.start;
        self.trap = TrapStatus::Inactive;
        self.pending_teleport = false;
        self.observation()
    }

    pub fn layout(&self) -> &MinerLayout {
        &self.layout
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn trap(&self) -> TrapStatus {
        self.trap
    }

    pub fn pending_teleport(&self) -> bool {
        self.pending_teleport
    }

    pub fn entrapped(&self) -> bool {
        self.trap.active_cell(&self.layout) == Some(self.position)
    }

    pub fn observation(&self) -> usize {
        self.layout.observation(self.position, self.entrapped())
    }

    fn advance_trap(&mut self) {
        self.trap = match self.trap {
            TrapStatus::Inactive => {
                if uniform01(&mut self.rng) < self.activation {
                    let n = self.layout.traps.len();
                    let trap = ((uniform01(&mut self.rng) * n as f64) as usize).min(n - 1);
                    TrapStatus::Active { trap, remaining: TRAP_LIFETIME }
                } else {
                    TrapStatus::Inactive
                }
            }
            TrapStatus::Active { remaining: 1, .. } => TrapStatus::Inactive,
            TrapStatus::Active { trap, remaining } => TrapStatus::Active { trap, remaining: remaining - 1 },
        };
    }

    pub fn step(&mut self, action: Action) -> MinerStep {
        self.advance_trap();
        let gold = if self.pending_teleport {
            self.position = self.layout.start;
            false
        } else {
            self.position = self.layout.move_from(self.position, action);
            self.position == self.layout.gold
        };
        let entrapped = self.entrapped();
        self.pending_teleport = gold || entrapped;
        MinerStep { observation: self.observation(), gold, entrapped }
    }
}

/// Behavior policy and the three target policies, over observation states.
#[derive(Debug, Clone, PartialEq)]
pub struct MinerPolicies<T> {
    pub behavior: Policy<T>,
    pub uniform: Policy<T>,
    pub headfirst: Policy<T>,
    pub cautious: Policy<T>,
}

impl<T: Scalar> MinerPolicies<T> {
    pub const TARGETS: [&'static str; 3] = ["uniform", "headfirst", "cautious"];

    pub fn new(layout: &MinerLayout) -> Self {
        let favour = |action: Action, p: f64| {
            let rest = (1.0 - p) / 3.0;
            let mut row = [T::lit(rest); NUM_ACTIONS];
            row[action as usize] = T::lit(p);
            row
        };
        let even = [T::lit(0.25); NUM_ACTIONS];
        let build = |f: &dyn Fn(Block) -> [T; NUM_ACTIONS]| {
            let probs = (0..layout.num_observations())
                .flat_map(|obs| f(layout.block(layout.decode_observation(obs).0)))
                .collect();
            Policy::new(layout.num_observations(), NUM_ACTIONS, probs).expect("block policies are stochastic")
        };
        MinerPolicies {
            behavior: build(&|b| match b {
                Block::A => even,
                Block::B | Block::D => favour(Action::Up, 0.4),
                Block::C => favour(Action::Left, 0.4),
            }),
            uniform: build(&|_| even),
            headfirst: build(&|b| match b {
                Block::A | Block::D => favour(Action::Up, 0.9),
                Block::B | Block::C => even,
            }),
            cautious: build(&|b| match b {
                Block::A => favour(Action::Right, 0.6),
                Block::B | Block::D => favour(Action::Up, 0.6),
                Block::C => favour(Action::Left, 0.6),
            }),
        }
    }

    /// Target policy by name.
    pub fn target(&self, name: &str) -> Option<&Policy<T>> {
        match name {
            "uniform" => Some(&self.uniform),
            "headfirst" => Some(&self.headfirst),
            "cautious" => Some(&self.cautious),
            "behavior" => Some(&self.behavior),
            _ => None,
        }
    }
}

/// Per-observation discount, bootstrapping, interest and block features.
#[derive(Debug, Clone, PartialEq)]
pub struct MinerTask<T> {
    pub gamma: Vec<T>,
    pub lam: Vec<T>,
    pub interest: Vec<T>,
    /// One-hot block indicator, `num_observations × 4`.
    pub features: Matrix<T>,
}

/// What the learner sees about its current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningState<'a, T> {
    pub index: usize,
    pub features: &'a [T],
    pub gamma: T,
    pub lam: T,
    pub interest: T,
}

impl<T: Scalar> MinerTask<T> {
    pub fn new(layout: &MinerLayout) -> Self {
        let n = layout.num_observations();
        let mut gamma = Vec::with_capacity(n);
        let mut lam = Vec::with_capacity(n);
        let mut interest = Vec::with_capacity(n);
        let mut features = Matrix::zeros(n, Block::ALL.len());
        for obs in 0..n {
            let (cell, entrapped) = layout.decode_observation(obs);
            let block = layout.block(cell);
            gamma.push(if entrapped { T::zero() } else { T::lit(DISCOUNT) });
            lam.push(T::lit(match block {
                Block::A => 0.0,
                Block::D => 1.0,
                Block::B | Block::C => 0.9,
            }));
            interest.push(if block == Block::A { T::one() } else { T::zero() });
            features[(obs, block.index())] = T::one();
        }
        MinerTask { gamma, lam, interest, features }
    }

    pub fn signals(&self) -> StateSignals<'_, T> {
        StateSignals { features: &self.features, gamma: &self.gamma, lam: &self.lam, interest: &self.interest }
    }

    pub fn learning_state(&self, env: &MinerGridworld) -> LearningState<'_, T> {
        let obs = env.observation();
        LearningState {
            index: obs,
            features: self.features.row(obs),
            gamma: self.gamma[obs],
            lam: self.lam[obs],
            interest: self.interest[obs],
        }
    }
}

/// Everything needed to run the Miner experiment.
#[derive(Debug, Clone)]
pub struct MinerSetup<T> {
    pub env: MinerGridworld,
    pub policies: MinerPolicies<T>,
    pub task: MinerTask<T>,
}

pub fn build_miner<T: Scalar>(layout_override: Option<MinerLayout>, seed: u64) -> MinerSetup<T> {
    let layout = layout_override.unwrap_or_else(MinerLayout::canonical);
    MinerSetup {
        policies: MinerPolicies::new(&layout),
        task: MinerTask::new(&layout),
        env: MinerGridworld::new(layout, seed),
    }
}

/// Exact finite MDP of the Miner dynamics over `(cell, trap status)`.
#[derive(Debug, Clone)]
pub struct MinerModel<T> {
    pub layout: MinerLayout,
    pub statuses: Vec<TrapStatus>,
    pub model: MdpModel<T>,
}

impl<T: Scalar> MinerModel<T> {
    pub fn new(layout: MinerLayout, activation: f64) -> Self {
        let mut statuses = vec![TrapStatus::Inactive];
        for trap in 0..layout.traps.len() {
            for remaining in (1..=TRAP_LIFETIME).rev() {
                statuses.push(TrapStatus::Active { trap, remaining });
            }
        }
        let ns = statuses.len();
        let num_states = layout.num_cells() * ns;
        let index_of = |cell: usize, status: TrapStatus| {
            cell * ns + statuses.iter().position(|&s| s == status).expect("known status")
        };
        let mut trans = vec![T::zero(); num_states * NUM_ACTIONS * num_states];
        let mut reward = vec![T::zero(); trans.len()];
        for cell in 0..layout.num_cells() {
            for &status in &statuses {
                let s = index_of(cell, status);
                let pending = cell == layout.gold || status.active_cell(&layout) == Some(cell);
                for action in Action::ALL {
                    let next_cell = if pending { layout.start } else { layout.move_from(cell, action) };
                    let pays = !pending && next_cell == layout.gold;
                    for (p, next_status) in status.successors(layout.traps.len(), activation) {
                        if p == 0.0 {
                            continue;
                        }
                        let n = index_of(next_cell, next_status);
                        let k = (s * NUM_ACTIONS + action as usize) * num_states + n;
                        trans[k] += T::lit(p);
                        if pays {
                            reward[k] = T::one();
                        }
                    }
                }
            }
        }
        let model = MdpModel::new(num_states, NUM_ACTIONS, trans, reward).expect("miner dynamics are stochastic");
        MinerModel { layout, statuses, model }
    }

    pub fn num_states(&self) -> usize {
        self.model.num_states()
    }

    pub fn state_index(&self, cell: usize, status: TrapStatus) -> usize {
        cell * self.statuses.len() + self.statuses.iter().position(|&s| s == status).expect("known status")
    }

    /// Start cell with no active trap: the state a fresh simulator is in.
    pub fn start_state(&self) -> usize {
        self.state_index(self.layout.start, TrapStatus::Inactive)
    }

    /// Observation seen by the learner in full state `s`.
    pub fn observation(&self, s: usize) -> usize {
        let ns = self.statuses.len();
        let (cell, status) = (s / ns, self.statuses[s % ns]);
        self.layout.observation(cell, status.active_cell(&self.layout) == Some(cell))
    }

    /// Lifts observation-level policies and signals to a full-state task.
    pub fn prediction_task(&self, target: &Policy<T>, behavior: &Policy<T>, task: &MinerTask<T>) -> PredictionTask<T> {
        let n = self.num_states();
        let obs: Vec<usize> = (0..n).map(|s| self.observation(s)).collect();
        let lift = |p: &Policy<T>| {
            Policy::new(n, NUM_ACTIONS, obs.iter().flat_map(|&o| p.row(o).to_vec()).collect()).expect("lifted policy")
        };
        PredictionTask::new(
            self.model.clone(),
            lift(target),
            lift(behavior),
            obs.iter().map(|&o| task.gamma[o]).collect(),
            obs.iter().map(|&o| task.lam[o]).collect(),
            obs.iter().map(|&o| task.interest[o]).collect(),
            Matrix::from_fn(n, task.features.cols(), |s, j| task.features[(obs[s], j)]),
        )
        .expect("lifted miner task is valid")
    }
}

/// Samples an action for observation `obs` and steps the simulator.
pub fn step_with_policy<T: Scalar, R: RngCore + ?Sized>(
    env: &mut MinerGridworld,
    policy: &Policy<T>,
    rng: &mut R,
) -> (usize, MinerStep) {
    let a = policy.sample(env.observation(), rng);
    (a, env.step(Action::from_index(a)))
}
