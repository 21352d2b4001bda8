//! Deterministic single-room navigation environment.
//!
//! One agent and one goal cell inside a walled rectangle. Three primitive
//! actions. An episode is a pure function of (config, reset seed, action
//! sequence); there is no hidden randomness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;

/// Cell coordinates: `x` grows eastward, `y` grows southward, `(0, 0)` is the
/// north-west wall corner.
pub type Pos = (u32, u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    /// Unit displacement of one forward move, in (dx, dy).
    pub fn delta(self) -> (i64, i64) {
        match self {
            Direction::North => (0, -1),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
        }
    }

    pub fn turned_left(self) -> Direction {
        match self {
            Direction::North => Direction::West,
            Direction::West => Direction::South,
            Direction::South => Direction::East,
            Direction::East => Direction::North,
        }
    }

    pub fn turned_right(self) -> Direction {
        match self {
            Direction::North => Direction::East,
            Direction::East => Direction::South,
            Direction::South => Direction::West,
            Direction::West => Direction::North,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Direction::North => 0,
            Direction::East => 1,
            Direction::South => 2,
            Direction::West => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Direction> {
        Direction::ALL.get(i).copied()
    }

    /// Single-letter tag used in text checkpoints.
    pub fn letter(self) -> char {
        match self {
            Direction::North => 'N',
            Direction::East => 'E',
            Direction::South => 'S',
            Direction::West => 'W',
        }
    }

    pub fn from_letter(c: char) -> Option<Direction> {
        match c {
            'N' => Some(Direction::North),
            'E' => Some(Direction::East),
            'S' => Some(Direction::South),
            'W' => Some(Direction::West),
            _ => None,
        }
    }
}

/// Index order puts Forward first so that greedy tie-breaking on untrained
/// all-zero rows keeps the agent moving instead of spinning in place; with
/// turn actions first, a policy mid-training stalls on every unvisited state
/// and the success-rate targets are unreachable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Forward,
    TurnRight,
    TurnLeft,
}

impl Action {
    pub const COUNT: usize = 3;
    pub const ALL: [Action; 3] = [Action::Forward, Action::TurnRight, Action::TurnLeft];

    pub fn index(self) -> usize {
        match self {
            Action::Forward => 0,
            Action::TurnRight => 1,
            Action::TurnLeft => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::TurnLeft => "turn_left",
            Action::TurnRight => "turn_right",
            Action::Forward => "forward",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub width: u32,
    pub height: u32,
    pub max_steps: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 8,
            height: 8,
            max_steps: 64,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), EnvConfigError> {
        // 4x4 is the smallest grid with two distinct interior cells.
        if self.width < 4 || self.height < 4 {
            return Err(EnvConfigError::GridTooSmall {
                width: self.width,
                height: self.height,
            });
        }
        if self.max_steps == 0 {
            return Err(EnvConfigError::ZeroMaxSteps);
        }
        Ok(())
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum EnvConfigError {
    #[error("grid must be at least 4x4 to hold two interior cells, got {width}x{height}")]
    GridTooSmall { width: u32, height: u32 },
    #[error("max_steps must be positive")]
    ZeroMaxSteps,
    #[error("position ({0}, {1}) is not an interior cell")]
    PoseNotInterior(u32, u32),
    #[error("agent and goal must start on distinct cells")]
    AgentOnGoal,
}

#[derive(Error, Debug, PartialEq, Eq)]
#[error("step called after the episode ended; reset first")]
pub struct EpisodeOver;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub agent_pos: Pos,
    pub agent_dir: Direction,
    pub goal_pos: Pos,
    pub steps_remaining: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// Goal bearing relative to the agent's facing, plus a coarse range bucket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Heading {
    Ahead,
    Left,
    Right,
    Behind,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::Ahead, Heading::Left, Heading::Right, Heading::Behind];

    pub fn index(self) -> usize {
        match self {
            Heading::Ahead => 0,
            Heading::Left => 1,
            Heading::Right => 2,
            Heading::Behind => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Heading::Ahead => "Ahead",
            Heading::Left => "Left",
            Heading::Right => "Right",
            Heading::Behind => "Behind",
        }
    }

    pub fn from_name(s: &str) -> Option<Heading> {
        Heading::ALL.iter().copied().find(|h| h.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DistanceBucket {
    Adjacent,
    Near,
    Far,
}

impl DistanceBucket {
    pub const ALL: [DistanceBucket; 3] =
        [DistanceBucket::Adjacent, DistanceBucket::Near, DistanceBucket::Far];

    pub fn index(self) -> usize {
        match self {
            DistanceBucket::Adjacent => 0,
            DistanceBucket::Near => 1,
            DistanceBucket::Far => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DistanceBucket::Adjacent => "Adjacent",
            DistanceBucket::Near => "Near",
            DistanceBucket::Far => "Far",
        }
    }

    pub fn from_name(s: &str) -> Option<DistanceBucket> {
        DistanceBucket::ALL.iter().copied().find(|d| d.name() == s)
    }

    pub fn from_manhattan(d: u64) -> DistanceBucket {
        match d {
            0..=1 => DistanceBucket::Adjacent,
            2..=4 => DistanceBucket::Near,
            _ => DistanceBucket::Far,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelativeGoal {
    pub heading: Heading,
    pub distance: DistanceBucket,
}

/// Classifies where the goal lies relative to the agent's facing.
///
/// The goal offset is projected onto the forward and rightward axes. The
/// larger projection wins; on an exact diagonal the bearing is Ahead while the
/// goal is in front (forward progress breaks the tie) and the lateral side
/// when it is behind. A zero offset classifies as (Ahead, Adjacent).
pub fn relative_goal(obs: &Observation) -> RelativeGoal {
    let dx = obs.goal_pos.0 as i64 - obs.agent_pos.0 as i64;
    let dy = obs.goal_pos.1 as i64 - obs.agent_pos.1 as i64;
    let manhattan = dx.unsigned_abs() + dy.unsigned_abs();
    let distance = DistanceBucket::from_manhattan(manhattan);
    if dx == 0 && dy == 0 {
        return RelativeGoal {
            heading: Heading::Ahead,
            distance,
        };
    }
    let (fx, fy) = obs.agent_dir.delta();
    let (rx, ry) = obs.agent_dir.turned_right().delta();
    let forward = dx * fx + dy * fy;
    let lateral = dx * rx + dy * ry;
    let heading = if forward.abs() > lateral.abs() {
        if forward > 0 {
            Heading::Ahead
        } else {
            Heading::Behind
        }
    } else if lateral.abs() > forward.abs() {
        if lateral > 0 {
            Heading::Right
        } else {
            Heading::Left
        }
    } else if forward > 0 {
        Heading::Ahead
    } else if lateral > 0 {
        Heading::Right
    } else {
        Heading::Left
    };
    RelativeGoal { heading, distance }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridWorld {
    config: GridConfig,
    agent_pos: Pos,
    agent_dir: Direction,
    goal_pos: Pos,
    step_count: u32,
    rng: SplitMix64,
}

impl GridWorld {
    /// Builds the environment with a placeholder layout (agent in the NW
    /// interior corner facing East, goal in the SE interior corner). Call
    /// [`GridWorld::reset`] to draw a seeded episode layout.
    pub fn new(config: GridConfig) -> Result<Self, EnvConfigError> {
        config.validate()?;
        Ok(Self {
            config,
            agent_pos: (1, 1),
            agent_dir: Direction::East,
            goal_pos: (config.width - 2, config.height - 2),
            step_count: 0,
            rng: SplitMix64::new(0),
        })
    }

    /// Builds the environment in an explicit pose. Both cells must be
    /// interior and distinct.
    pub fn with_poses(
        config: GridConfig,
        agent_pos: Pos,
        agent_dir: Direction,
        goal_pos: Pos,
    ) -> Result<Self, EnvConfigError> {
        config.validate()?;
        for &(x, y) in [&agent_pos, &goal_pos] {
            if x == 0 || y == 0 || x >= config.width - 1 || y >= config.height - 1 {
                return Err(EnvConfigError::PoseNotInterior(x, y));
            }
        }
        if agent_pos == goal_pos {
            return Err(EnvConfigError::AgentOnGoal);
        }
        Ok(Self {
            config,
            agent_pos,
            agent_dir,
            goal_pos,
            step_count: 0,
            rng: SplitMix64::new(0),
        })
    }

    pub fn config(&self) -> GridConfig {
        self.config
    }

    fn interior_width(&self) -> u32 {
        self.config.width - 2
    }

    fn interior_cell(&self, idx: u64) -> Pos {
        let w = self.interior_width() as u64;
        (1 + (idx % w) as u32, 1 + (idx / w) as u32)
    }

    /// Draws a fresh episode layout from `seed`: agent cell uniform over the
    /// interior, goal uniform over the remaining cells, facing uniform over
    /// the four directions. Draw order is frozen; changing it would change
    /// every seeded run.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.rng = SplitMix64::new(seed);
        let cells = (self.interior_width() * (self.config.height - 2)) as u64;
        let agent_idx = self.rng.next_below(cells);
        let goal_draw = self.rng.next_below(cells - 1);
        let goal_idx = if goal_draw >= agent_idx { goal_draw + 1 } else { goal_draw };
        let dir_idx = self.rng.next_below(4);
        self.agent_pos = self.interior_cell(agent_idx);
        self.goal_pos = self.interior_cell(goal_idx);
        self.agent_dir = Direction::from_index(dir_idx as usize).expect("dir index < 4");
        self.step_count = 0;
        self.observe()
    }

    pub fn observe(&self) -> Observation {
        Observation {
            agent_pos: self.agent_pos,
            agent_dir: self.agent_dir,
            goal_pos: self.goal_pos,
            steps_remaining: self.config.max_steps - self.step_count,
        }
    }

    pub fn is_wall(&self, x: i64, y: i64) -> bool {
        x <= 0 || y <= 0 || x >= (self.config.width - 1) as i64 || y >= (self.config.height - 1) as i64
    }

    pub fn episode_over(&self) -> bool {
        self.agent_pos == self.goal_pos || self.step_count >= self.config.max_steps
    }

    /// Applies one action. Forward into a wall leaves the position unchanged
    /// but still consumes the step. Reaching the goal terminates with reward
    /// `1 - 0.9 * (step_count / max_steps)`; running out of steps truncates
    /// with reward 0.
    pub fn step(&mut self, action: Action) -> Result<StepOutcome, EpisodeOver> {
        if self.episode_over() {
            return Err(EpisodeOver);
        }
        match action {
            Action::TurnLeft => self.agent_dir = self.agent_dir.turned_left(),
            Action::TurnRight => self.agent_dir = self.agent_dir.turned_right(),
            Action::Forward => {
                let (dx, dy) = self.agent_dir.delta();
                let nx = self.agent_pos.0 as i64 + dx;
                let ny = self.agent_pos.1 as i64 + dy;
                if !self.is_wall(nx, ny) {
                    self.agent_pos = (nx as u32, ny as u32);
                }
            }
        }
        self.step_count += 1;
        let terminated = self.agent_pos == self.goal_pos;
        let truncated = !terminated && self.step_count >= self.config.max_steps;
        let reward = if terminated {
            1.0 - 0.9 * (self.step_count as f64 / self.config.max_steps as f64)
        } else {
            0.0
        };
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            terminated,
            truncated,
        })
    }
}
