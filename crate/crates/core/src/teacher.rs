//! Teacher side of the loop: instruction tokens, a learnable softmax policy
//! over goal contexts, a scripted oracle, and the signed-feedback update.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::gridworld::{DistanceBucket, Heading, RelativeGoal};
use crate::protocol::ProtocolError;
use crate::rng::SplitMix64;

/// Fixed instruction vocabulary, index order frozen.
pub const VOCAB: [&str; 5] = ["go_forward", "turn_left", "turn_right", "goal_behind", "explore"];
pub const VOCAB_SIZE: usize = VOCAB.len();

/// 4 headings x 3 distance buckets.
pub const CONTEXT_COUNT: usize = 12;

/// One instruction token; a validated index into [`VOCAB`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(u8);

impl Token {
    pub const GO_FORWARD: Token = Token(0);
    pub const TURN_LEFT: Token = Token(1);
    pub const TURN_RIGHT: Token = Token(2);
    pub const GOAL_BEHIND: Token = Token(3);
    pub const EXPLORE: Token = Token(4);

    pub fn from_index(i: usize) -> Option<Token> {
        (i < VOCAB_SIZE).then_some(Token(i as u8))
    }

    pub fn from_name(name: &str) -> Option<Token> {
        VOCAB.iter().position(|&n| n == name).map(|i| Token(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        VOCAB[self.index()]
    }

    pub fn all() -> impl Iterator<Item = Token> {
        (0..VOCAB_SIZE).map(|i| Token(i as u8))
    }
}

impl Serialize for Token {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Token, D::Error> {
        let name = String::deserialize(deserializer)?;
        Token::from_name(&name)
            .ok_or_else(|| D::Error::custom(format!("token {name:?} is not in the vocabulary")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackSignal {
    Positive,
    Negative,
}

/// What the teacher conditions on: the discretized goal bearing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TeacherContext {
    pub rel_goal: RelativeGoal,
}

impl TeacherContext {
    pub fn new(rel_goal: RelativeGoal) -> Self {
        Self { rel_goal }
    }

    /// Dense index in `[0, CONTEXT_COUNT)`, row-major by heading.
    pub fn index(self) -> usize {
        self.rel_goal.heading.index() * DistanceBucket::ALL.len() + self.rel_goal.distance.index()
    }

    pub fn all() -> impl Iterator<Item = TeacherContext> {
        Heading::ALL.into_iter().flat_map(|heading| {
            DistanceBucket::ALL.into_iter().map(move |distance| {
                TeacherContext::new(RelativeGoal { heading, distance })
            })
        })
    }
}

/// Learnable tabular stand-in for an instruction-emitting language model:
/// one logit row per context, sampled through a temperature softmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeacherPolicy {
    logits: [[f64; VOCAB_SIZE]; CONTEXT_COUNT],
    pub temperature: f64,
    pub beta: f64,
}

impl TeacherPolicy {
    /// Zero-initialized logits: every context starts uniform.
    pub fn new(temperature: f64, beta: f64) -> Self {
        debug_assert!(temperature > 0.0 && beta > 0.0);
        Self {
            logits: [[0.0; VOCAB_SIZE]; CONTEXT_COUNT],
            temperature,
            beta,
        }
    }

    pub fn from_logits(
        logits: [[f64; VOCAB_SIZE]; CONTEXT_COUNT],
        temperature: f64,
        beta: f64,
    ) -> Self {
        Self {
            logits,
            temperature,
            beta,
        }
    }

    pub fn logits(&self) -> &[[f64; VOCAB_SIZE]; CONTEXT_COUNT] {
        &self.logits
    }

    /// softmax(logits[ctx] / temperature), computed max-shifted for stability.
    pub fn probabilities(&self, ctx: TeacherContext) -> [f64; VOCAB_SIZE] {
        let row = &self.logits[ctx.index()];
        let mut scaled = [0.0; VOCAB_SIZE];
        for (s, &z) in scaled.iter_mut().zip(row) {
            *s = z / self.temperature;
        }
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs = [0.0; VOCAB_SIZE];
        let mut sum = 0.0;
        for (p, &s) in probs.iter_mut().zip(&scaled) {
            *p = (s - max).exp();
            sum += *p;
        }
        for p in &mut probs {
            *p /= sum;
        }
        probs
    }

    /// Samples one token from the context's softmax distribution.
    pub fn sample(&self, ctx: TeacherContext, rng: &mut SplitMix64) -> Token {
        let probs = self.probabilities(ctx);
        let r = rng.next_f64();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if r < acc {
                return Token(i as u8);
            }
        }
        Token((VOCAB_SIZE - 1) as u8)
    }

    /// Nudges exactly one logit by +-beta; every other entry is untouched.
    pub fn update(&mut self, ctx: TeacherContext, token: Token, signal: FeedbackSignal) {
        let step = match signal {
            FeedbackSignal::Positive => self.beta,
            FeedbackSignal::Negative => -self.beta,
        };
        self.logits[ctx.index()][token.index()] += step;
    }
}

/// Deterministic context-to-token map used by the scripted teacher and as
/// the degraded-mode fallback for remote teachers.
pub fn oracle_token(ctx: TeacherContext) -> Token {
    match ctx.rel_goal.heading {
        Heading::Ahead => Token::GO_FORWARD,
        Heading::Left => Token::TURN_LEFT,
        Heading::Right => Token::TURN_RIGHT,
        Heading::Behind => Token::GOAL_BEHIND,
    }
}

/// A token source the loop can drive. Implementations: scripted oracle,
/// learnable tabular policy, constant token, remote process.
pub trait Teacher {
    fn emit(
        &mut self,
        ctx: TeacherContext,
        rng: &mut SplitMix64,
        episode: u64,
        t: u32,
    ) -> Result<Token, ProtocolError>;

    fn apply_feedback(
        &mut self,
        ctx: TeacherContext,
        token: Token,
        signal: FeedbackSignal,
    ) -> Result<(), ProtocolError>;
}

impl Teacher for TeacherPolicy {
    fn emit(
        &mut self,
        ctx: TeacherContext,
        rng: &mut SplitMix64,
        _episode: u64,
        _t: u32,
    ) -> Result<Token, ProtocolError> {
        Ok(self.sample(ctx, rng))
    }

    fn apply_feedback(
        &mut self,
        ctx: TeacherContext,
        token: Token,
        signal: FeedbackSignal,
    ) -> Result<(), ProtocolError> {
        self.update(ctx, token, signal);
        Ok(())
    }
}

/// Stateless scripted teacher; ignores feedback.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleTeacher;

impl Teacher for OracleTeacher {
    fn emit(
        &mut self,
        ctx: TeacherContext,
        _rng: &mut SplitMix64,
        _episode: u64,
        _t: u32,
    ) -> Result<Token, ProtocolError> {
        Ok(oracle_token(ctx))
    }

    fn apply_feedback(
        &mut self,
        _ctx: TeacherContext,
        _token: Token,
        _signal: FeedbackSignal,
    ) -> Result<(), ProtocolError> {
        Ok(())
    }
}

/// Emits the same token forever; the no-guidance ablation.
#[derive(Clone, Copy, Debug)]
pub struct ConstantTeacher(pub Token);

impl Teacher for ConstantTeacher {
    fn emit(
        &mut self,
        _ctx: TeacherContext,
        _rng: &mut SplitMix64,
        _episode: u64,
        _t: u32,
    ) -> Result<Token, ProtocolError> {
        Ok(self.0)
    }

    fn apply_feedback(
        &mut self,
        _ctx: TeacherContext,
        _token: Token,
        _signal: FeedbackSignal,
    ) -> Result<(), ProtocolError> {
        Ok(())
    }
}
