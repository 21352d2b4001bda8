//! Versioned text checkpoints for the learned tables.
//!
//! Line-oriented format, one `(key, value)` entry per line:
//!
//! ```text
//! mentor-checkpoint v1
//! q <ax> <ay> <dir> <gx> <gy> <token> <q_forward> <q_turn_right> <q_turn_left>
//! v <ax> <ay> <dir> <gx> <gy> <value>
//! t <heading> <distance> <token> <logit>
//! ```
//!
//! Floats print in Rust's shortest round-trip form, so write -> read is
//! lossless bit-for-bit. Entries follow table iteration order, which is
//! canonical, so identical tables produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::gridworld::{Action, Direction, DistanceBucket, Heading, RelativeGoal};
use crate::student::{StateKey, StudentPolicy};
use crate::teacher::{TeacherContext, TeacherPolicy, Token, CONTEXT_COUNT, VOCAB_SIZE};

pub const FORMAT_HEADER: &str = "mentor-checkpoint v1";

#[derive(Error, Debug)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Tables as read back from disk, hyperparameter-free; pair them with the
/// run config to rebuild live policies.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckpointData {
    pub q: Vec<(StateKey, Token, [f64; Action::COUNT])>,
    pub v: Vec<(StateKey, f64)>,
    pub teacher_logits: Option<[[f64; VOCAB_SIZE]; CONTEXT_COUNT]>,
}

impl CheckpointData {
    pub fn into_student(self, alpha: f64, gamma: f64, epsilon: f64) -> StudentPolicy {
        let mut student = StudentPolicy::new(alpha, gamma, epsilon);
        for (s, x, row) in self.q {
            student.set_q_row(s, x, row);
        }
        for (s, value) in self.v {
            student.set_value(s, value);
        }
        student
    }
}

pub fn checkpoint_string(student: &StudentPolicy, teacher: Option<&TeacherPolicy>) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_HEADER);
    out.push('\n');
    for (s, x, row) in student.q_entries() {
        out.push_str(&format!(
            "q {} {} {} {} {} {} {} {} {}\n",
            s.agent_pos.0,
            s.agent_pos.1,
            s.agent_dir.letter(),
            s.goal_pos.0,
            s.goal_pos.1,
            x.name(),
            row[0],
            row[1],
            row[2]
        ));
    }
    for (s, value) in student.v_entries() {
        out.push_str(&format!(
            "v {} {} {} {} {} {}\n",
            s.agent_pos.0,
            s.agent_pos.1,
            s.agent_dir.letter(),
            s.goal_pos.0,
            s.goal_pos.1,
            value
        ));
    }
    if let Some(policy) = teacher {
        for ctx in TeacherContext::all() {
            for token in Token::all() {
                out.push_str(&format!(
                    "t {} {} {} {}\n",
                    ctx.rel_goal.heading.name(),
                    ctx.rel_goal.distance.name(),
                    token.name(),
                    policy.logits()[ctx.index()][token.index()]
                ));
            }
        }
    }
    out
}

pub fn write_checkpoint(
    path: &Path,
    student: &StudentPolicy,
    teacher: Option<&TeacherPolicy>,
) -> Result<(), CheckpointError> {
    fs::write(path, checkpoint_string(student, teacher)).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<CheckpointData, CheckpointError> {
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_checkpoint(&text)
}

pub fn parse_checkpoint(text: &str) -> Result<CheckpointData, CheckpointError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == FORMAT_HEADER => {}
        Some((_, header)) => {
            return Err(CheckpointError::Parse {
                line: 1,
                reason: format!("unsupported header {header:?}, expected {FORMAT_HEADER:?}"),
            });
        }
        None => {
            return Err(CheckpointError::Parse {
                line: 1,
                reason: "empty checkpoint".to_string(),
            });
        }
    }
    let mut data = CheckpointData::default();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let fail = |reason: String| CheckpointError::Parse { line: line_no, reason };
        match fields[0] {
            "q" => {
                if fields.len() != 10 {
                    return Err(fail(format!("q entry needs 10 fields, got {}", fields.len())));
                }
                let s = parse_state_key(&fields[1..6]).map_err(&fail)?;
                let token = Token::from_name(fields[6])
                    .ok_or_else(|| fail(format!("unknown token {:?}", fields[6])))?;
                let mut row = [0.0; Action::COUNT];
                for (slot, raw) in row.iter_mut().zip(&fields[7..10]) {
                    *slot = parse_f64(raw).map_err(&fail)?;
                }
                data.q.push((s, token, row));
            }
            "v" => {
                if fields.len() != 7 {
                    return Err(fail(format!("v entry needs 7 fields, got {}", fields.len())));
                }
                let s = parse_state_key(&fields[1..6]).map_err(&fail)?;
                let value = parse_f64(fields[6]).map_err(&fail)?;
                data.v.push((s, value));
            }
            "t" => {
                if fields.len() != 5 {
                    return Err(fail(format!("t entry needs 5 fields, got {}", fields.len())));
                }
                let heading = Heading::from_name(fields[1])
                    .ok_or_else(|| fail(format!("unknown heading {:?}", fields[1])))?;
                let distance = DistanceBucket::from_name(fields[2])
                    .ok_or_else(|| fail(format!("unknown distance {:?}", fields[2])))?;
                let token = Token::from_name(fields[3])
                    .ok_or_else(|| fail(format!("unknown token {:?}", fields[3])))?;
                let logit = parse_f64(fields[4]).map_err(&fail)?;
                let ctx = TeacherContext::new(RelativeGoal { heading, distance });
                let logits = data
                    .teacher_logits
                    .get_or_insert([[0.0; VOCAB_SIZE]; CONTEXT_COUNT]);
                logits[ctx.index()][token.index()] = logit;
            }
            other => return Err(fail(format!("unknown entry tag {other:?}"))),
        }
    }
    Ok(data)
}

fn parse_state_key(fields: &[&str]) -> Result<StateKey, String> {
    let ax: u32 = parse_num(fields[0])?;
    let ay: u32 = parse_num(fields[1])?;
    let dir_field = fields[2];
    let dir = dir_field
        .chars()
        .next()
        .filter(|_| dir_field.len() == 1)
        .and_then(Direction::from_letter)
        .ok_or_else(|| format!("unknown direction {dir_field:?}"))?;
    let gx: u32 = parse_num(fields[3])?;
    let gy: u32 = parse_num(fields[4])?;
    Ok(StateKey {
        agent_pos: (ax, ay),
        agent_dir: dir,
        goal_pos: (gx, gy),
    })
}

fn parse_num<T: std::str::FromStr>(raw: &str) -> Result<T, String> {
    raw.parse().map_err(|_| format!("bad integer {raw:?}"))
}

fn parse_f64(raw: &str) -> Result<f64, String> {
    raw.parse().map_err(|_| format!("bad float {raw:?}"))
}
