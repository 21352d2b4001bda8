//! Token-conditioned tabular student: an action-value table over
//! (state, token, action), a state-value table, epsilon-greedy control, and
//! TD(0) updates whose error doubles as the advantage estimate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::gridworld::{Action, Direction, Observation, Pos};
use crate::rng::SplitMix64;
use crate::teacher::{Token, VOCAB_SIZE};

/// Canonical table key for one observation. Injective for a fixed grid
/// config: every field of the full state appears.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateKey {
    pub agent_pos: Pos,
    pub agent_dir: Direction,
    pub goal_pos: Pos,
}

impl From<&Observation> for StateKey {
    fn from(obs: &Observation) -> Self {
        Self {
            agent_pos: obs.agent_pos,
            agent_dir: obs.agent_dir,
            goal_pos: obs.goal_pos,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub s: StateKey,
    pub x: Token,
    pub a: Action,
    pub r: f64,
    pub s_next: StateKey,
    pub terminal: bool,
}

/// The TD error delta, standing in for an advantage estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEstimate(pub f64);

/// Linear epsilon decay from `start` to `end` over the first half of the
/// training budget, flat afterwards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub total_episodes: u64,
}

impl EpsilonSchedule {
    pub fn at(&self, episode: u64) -> f64 {
        let half = (self.total_episodes / 2).max(1);
        if episode >= half {
            // Hold at `end` exactly; interpolating frac = 1 leaves roundoff.
            return self.end;
        }
        let frac = episode as f64 / half as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudentPolicy {
    // BTreeMaps keep iteration order canonical, so checkpoints and traces
    // come out byte-identical across runs.
    q: BTreeMap<(StateKey, u8), [f64; Action::COUNT]>,
    v: BTreeMap<StateKey, f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl StudentPolicy {
    pub fn new(alpha: f64, gamma: f64, epsilon: f64) -> Self {
        Self {
            q: BTreeMap::new(),
            v: BTreeMap::new(),
            alpha,
            gamma,
            epsilon,
        }
    }

    /// Q row for (state, token); unvisited rows read as zeros.
    pub fn q_row(&self, s: &StateKey, x: Token) -> [f64; Action::COUNT] {
        self.q.get(&(*s, x.index() as u8)).copied().unwrap_or([0.0; Action::COUNT])
    }

    /// State value; unvisited states read as 0.
    pub fn value(&self, s: &StateKey) -> f64 {
        self.v.get(s).copied().unwrap_or(0.0)
    }

    /// Argmax over the Q row, ties broken toward the lowest action index.
    pub fn greedy_action(&self, s: &StateKey, x: Token) -> Action {
        let row = self.q_row(s, x);
        let mut best = 0;
        for (i, &q) in row.iter().enumerate().skip(1) {
            if q > row[best] {
                best = i;
            }
        }
        Action::from_index(best).expect("row index < COUNT")
    }

    /// Epsilon-greedy: explore uniformly with probability epsilon, otherwise
    /// act greedily. Always consumes exactly one f64 draw, plus one integer
    /// draw when exploring.
    pub fn select_action(&self, s: &StateKey, x: Token, rng: &mut SplitMix64) -> Action {
        if rng.next_f64() < self.epsilon {
            Action::from_index(rng.next_below(Action::COUNT as u64) as usize)
                .expect("draw < COUNT")
        } else {
            self.greedy_action(s, x)
        }
    }

    /// One TD(0) update of both tables. Returns the TD error
    /// `delta = r + gamma * V(s') * (1 - terminal) - V(s)` computed from
    /// pre-update values; terminal transitions never read the s' tables.
    ///
    /// The Q bootstrap maxes over the next state's token rows as well as its
    /// actions: the next token is the teacher's draw, unknown at update time,
    /// and every token row estimates the same underlying action values.
    /// Bootstrapping only the current token's row would freeze value at every
    /// context boundary (rows the teacher never pairs with that state stay
    /// zero), which caps greedy success near chance.
    pub fn td_update(&mut self, tr: &Transition) -> AdvantageEstimate {
        let v_s = self.value(&tr.s);
        let v_next = if tr.terminal { 0.0 } else { self.value(&tr.s_next) };
        let delta = tr.r + self.gamma * v_next - v_s;

        let q_next_max = if tr.terminal { 0.0 } else { self.best_q(&tr.s_next) };
        let mut row = self.q_row(&tr.s, tr.x);
        let a = tr.a.index();
        row[a] += self.alpha * (tr.r + self.gamma * q_next_max - row[a]);
        self.q.insert((tr.s, tr.x.index() as u8), row);

        self.v.insert(tr.s, v_s + self.alpha * delta);
        AdvantageEstimate(delta)
    }

    /// Max of Q over every (token, action) pair at `s`; absent rows read 0.
    pub fn best_q(&self, s: &StateKey) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut rows = 0;
        for (_, row) in self.q.range((*s, 0u8)..=(*s, u8::MAX)) {
            rows += 1;
            for &v in row {
                best = best.max(v);
            }
        }
        if rows < VOCAB_SIZE {
            best = best.max(0.0);
        }
        best
    }

    /// Episode-start advantage: mean of the Q row minus the state value at
    /// the first (state, token) of the episode. Zero tables give 0.
    pub fn initial_advantage(&self, s0: &StateKey, x0: Token) -> AdvantageEstimate {
        let row = self.q_row(s0, x0);
        let mean = row.iter().sum::<f64>() / Action::COUNT as f64;
        AdvantageEstimate(mean - self.value(s0))
    }

    pub fn q_len(&self) -> usize {
        self.q.len()
    }

    pub fn q_entries(&self) -> impl Iterator<Item = (StateKey, Token, [f64; Action::COUNT])> + '_ {
        self.q.iter().map(|(&(s, x), &row)| {
            (s, Token::from_index(x as usize).expect("stored index valid"), row)
        })
    }

    pub fn v_entries(&self) -> impl Iterator<Item = (StateKey, f64)> + '_ {
        self.v.iter().map(|(&s, &val)| (s, val))
    }

    pub fn set_q_row(&mut self, s: StateKey, x: Token, row: [f64; Action::COUNT]) {
        self.q.insert((s, x.index() as u8), row);
    }

    pub fn set_value(&mut self, s: StateKey, value: f64) {
        self.v.insert(s, value);
    }
}
