//! Per-step orchestration: teacher emits a token, student acts, the TD error
//! becomes the new advantage estimate, and its comparison against the carried
//! estimate produces the signed feedback returned to the teacher.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{Action, EpisodeOver, GridWorld, RelativeGoal, relative_goal};
use crate::protocol::ProtocolError;
use crate::rng::SplitMix64;
use crate::student::{AdvantageEstimate, StateKey, StudentPolicy, Transition};
use crate::teacher::{FeedbackSignal, Teacher, TeacherContext, Token};

/// Carried loop variables. `prev_advantage` is the running estimate the next
/// step is compared against; it never crosses an episode boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopState {
    pub prev_advantage: AdvantageEstimate,
    pub t: u32,
    pub episode: u64,
    pub feedback_enabled: bool,
}

impl LoopState {
    pub fn new(feedback_enabled: bool) -> Self {
        Self {
            prev_advantage: AdvantageEstimate(0.0),
            t: 0,
            episode: 0,
            feedback_enabled,
        }
    }
}

/// Audit record of one step; traces serialize one record per line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u32,
    pub episode: u64,
    pub ctx: RelativeGoal,
    pub token: Token,
    pub action: Action,
    pub reward: f64,
    /// The carried estimate this step was compared against.
    pub advantage_prev: f64,
    /// The TD error produced by this step's update.
    pub advantage: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<FeedbackSignal>,
}

#[derive(Error, Debug)]
pub enum LoopError {
    #[error(transparent)]
    Env(#[from] EpisodeOver),
    #[error(transparent)]
    Teacher(#[from] ProtocolError),
}

/// Negative iff the carried estimate strictly exceeds the new one; ties are
/// Positive.
pub fn compare_advantage(prev: AdvantageEstimate, new: AdvantageEstimate) -> FeedbackSignal {
    if prev.0 > new.0 {
        FeedbackSignal::Negative
    } else {
        FeedbackSignal::Positive
    }
}

/// One step of the loop, in fixed order: context, token, action, environment
/// step, TD update, then (when enabled) feedback from the advantage
/// comparison. At t = 0 the carried estimate is seeded from
/// [`StudentPolicy::initial_advantage`] for the episode's first (state,
/// token) before any comparison.
pub fn run_step(
    env: &mut GridWorld,
    teacher: &mut dyn Teacher,
    student: &mut StudentPolicy,
    state: &mut LoopState,
    rng: &mut SplitMix64,
) -> Result<StepRecord, LoopError> {
    let obs = env.observe();
    let s = StateKey::from(&obs);
    let rel = relative_goal(&obs);
    let ctx = TeacherContext::new(rel);

    let token = teacher.emit(ctx, rng, state.episode, state.t)?;
    if state.t == 0 {
        state.prev_advantage = student.initial_advantage(&s, token);
    }
    let action = student.select_action(&s, token, rng);
    let outcome = env.step(action)?;
    let transition = Transition {
        s,
        x: token,
        a: action,
        r: outcome.reward,
        s_next: StateKey::from(&outcome.observation),
        terminal: outcome.terminated,
    };
    let delta = student.td_update(&transition);

    let feedback = if state.feedback_enabled {
        let signal = compare_advantage(state.prev_advantage, delta);
        teacher.apply_feedback(ctx, token, signal)?;
        Some(signal)
    } else {
        None
    };

    let record = StepRecord {
        t: state.t,
        episode: state.episode,
        ctx: rel,
        token,
        action,
        reward: outcome.reward,
        advantage_prev: state.prev_advantage.0,
        advantage: delta.0,
        feedback,
    };
    state.prev_advantage = delta;
    state.t += 1;
    Ok(record)
}

/// Runs one full episode: seeded reset, then steps until termination or
/// truncation. Bumps the episode counter and resets t when done.
pub fn run_episode(
    env: &mut GridWorld,
    teacher: &mut dyn Teacher,
    student: &mut StudentPolicy,
    state: &mut LoopState,
    rng: &mut SplitMix64,
    reset_seed: u64,
) -> Result<Vec<StepRecord>, LoopError> {
    env.reset(reset_seed);
    state.t = 0;
    let mut records = Vec::new();
    while !env.episode_over() {
        records.push(run_step(env, teacher, student, state, rng)?);
    }
    state.episode += 1;
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplayStats {
    pub records: usize,
    pub episodes: usize,
    pub feedback_checked: usize,
}

#[derive(Error, Debug, PartialEq)]
pub enum ReplayViolation {
    #[error("episode {episode} step {t}: feedback {got:?} contradicts the advantage comparison (prev {prev}, new {new})")]
    SignMismatch {
        episode: u64,
        t: u32,
        prev: f64,
        new: f64,
        got: FeedbackSignal,
    },
    #[error("episode {episode} step {t}: advantage_prev {got} does not chain from the previous record's advantage {expected}")]
    BrokenChain {
        episode: u64,
        t: u32,
        expected: f64,
        got: f64,
    },
    #[error("episode {episode} step {t}: step counter out of order (expected t={expected})")]
    StepOrder { episode: u64, t: u32, expected: u32 },
    #[error("episode {episode} step {t}: feedback presence flips mid-trace")]
    MixedPresence { episode: u64, t: u32 },
}

/// Re-verifies a trace against the comparison rule: every record's feedback
/// must match `compare_advantage(advantage_prev, advantage)`, carried
/// estimates must chain within an episode, step counters must be contiguous,
/// and feedback presence must be uniform.
pub fn verify_trace(records: &[StepRecord]) -> Result<ReplayStats, ReplayViolation> {
    let mut episodes = 0usize;
    let mut feedback_checked = 0usize;
    let mut presence: Option<bool> = None;
    let mut prev: Option<&StepRecord> = None;
    for rec in records {
        let fresh_episode = prev.is_none_or(|p| p.episode != rec.episode);
        if fresh_episode {
            episodes += 1;
            if rec.t != 0 {
                return Err(ReplayViolation::StepOrder {
                    episode: rec.episode,
                    t: rec.t,
                    expected: 0,
                });
            }
        } else {
            let p = prev.expect("non-fresh episode has a predecessor");
            if rec.t != p.t + 1 {
                return Err(ReplayViolation::StepOrder {
                    episode: rec.episode,
                    t: rec.t,
                    expected: p.t + 1,
                });
            }
            if rec.advantage_prev != p.advantage {
                return Err(ReplayViolation::BrokenChain {
                    episode: rec.episode,
                    t: rec.t,
                    expected: p.advantage,
                    got: rec.advantage_prev,
                });
            }
        }
        match (presence, rec.feedback.is_some()) {
            (None, now) => presence = Some(now),
            (Some(was), now) if was != now => {
                return Err(ReplayViolation::MixedPresence {
                    episode: rec.episode,
                    t: rec.t,
                });
            }
            _ => {}
        }
        if let Some(got) = rec.feedback {
            let expected = compare_advantage(
                AdvantageEstimate(rec.advantage_prev),
                AdvantageEstimate(rec.advantage),
            );
            if got != expected {
                return Err(ReplayViolation::SignMismatch {
                    episode: rec.episode,
                    t: rec.t,
                    prev: rec.advantage_prev,
                    new: rec.advantage,
                    got,
                });
            }
            feedback_checked += 1;
        }
        prev = Some(rec);
    }
    Ok(ReplayStats {
        records: records.len(),
        episodes,
        feedback_checked,
    })
}
