//! Newline-delimited JSON protocol for remote teachers.
//!
//! One UTF-8 JSON object per line in each direction. Requests are `emit`,
//! `feedback`, and `shutdown`; responses are `token` and `ack`. Field order
//! never matters. Vocabulary checks happen in the client, not the codec.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::RelativeGoal;
use crate::teacher::FeedbackSignal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Emit {
        ctx: RelativeGoal,
        // Older peers omit the episode counter; treat it as 0.
        #[serde(default)]
        episode: u64,
        t: u32,
    },
    Feedback {
        signal: FeedbackSignal,
        ctx: RelativeGoal,
        token: String,
    },
    Shutdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    Token { name: String },
    Ack,
}

/// Serializes a message as one newline-terminated JSON line.
pub fn encode<T: Serialize>(msg: &T) -> String {
    let mut line = serde_json::to_string(msg).expect("wire types always serialize");
    line.push('\n');
    line
}

pub fn decode_request(line: &str) -> Result<Request, ProtocolError> {
    decode(line)
}

pub fn decode_response(line: &str) -> Result<Response, ProtocolError> {
    decode(line)
}

fn decode<T: for<'de> Deserialize<'de>>(line: &str) -> Result<T, ProtocolError> {
    let payload = line.trim_end_matches(['\r', '\n']);
    serde_json::from_str(payload).map_err(|e| ProtocolError::Malformed {
        reason: e.to_string(),
        payload: payload.to_string(),
    })
}

#[derive(Error, Debug)]
pub enum ProtocolError {
    #[error("i/o failure on teacher connection: {0}")]
    Io(#[from] std::io::Error),
    #[error("remote teacher did not answer within {0:?}")]
    Timeout(Duration),
    #[error("malformed message ({reason}); payload: {payload}")]
    Malformed { reason: String, payload: String },
    #[error("token {name:?} is not in the vocabulary")]
    UnknownToken { name: String },
    #[error("unexpected response: {got}")]
    UnexpectedResponse { got: String },
    #[error("remote teacher closed the connection")]
    ConnectionClosed,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{DistanceBucket, Heading};

    fn ctx(heading: Heading, distance: DistanceBucket) -> RelativeGoal {
        RelativeGoal { heading, distance }
    }

    #[test]
    fn emit_request_decodes_with_or_without_episode() {
        let line = r#"{"type":"emit","ctx":{"heading":"Ahead","distance":"Far"},"t":3}"#;
        assert_eq!(
            decode_request(line).unwrap(),
            Request::Emit {
                ctx: ctx(Heading::Ahead, DistanceBucket::Far),
                episode: 0,
                t: 3,
            }
        );
        let line = r#"{"type":"emit","ctx":{"heading":"Left","distance":"Near"},"episode":12,"t":0}"#;
        assert_eq!(
            decode_request(line).unwrap(),
            Request::Emit {
                ctx: ctx(Heading::Left, DistanceBucket::Near),
                episode: 12,
                t: 0,
            }
        );
    }

    #[test]
    fn field_order_is_insignificant() {
        let line = r#"{"t":3,"ctx":{"distance":"Far","heading":"Ahead"},"type":"emit"}"#;
        assert!(matches!(decode_request(line).unwrap(), Request::Emit { t: 3, .. }));
    }

    #[test]
    fn token_response_codec_identity() {
        let resp = Response::Token {
            name: "go_forward".to_string(),
        };
        let line = encode(&resp);
        assert_eq!(line, "{\"type\":\"token\",\"name\":\"go_forward\"}\n");
        assert_eq!(decode_response(&line).unwrap(), resp);
    }

    #[test]
    fn every_message_type_round_trips() {
        let requests = [
            Request::Emit {
                ctx: ctx(Heading::Behind, DistanceBucket::Adjacent),
                episode: 7,
                t: 31,
            },
            Request::Feedback {
                signal: FeedbackSignal::Negative,
                ctx: ctx(Heading::Right, DistanceBucket::Far),
                token: "turn_right".to_string(),
            },
            Request::Shutdown,
        ];
        for req in requests {
            assert_eq!(decode_request(&encode(&req)).unwrap(), req);
        }
        for resp in [
            Response::Token {
                name: "explore".to_string(),
            },
            Response::Ack,
        ] {
            assert_eq!(decode_response(&encode(&resp)).unwrap(), resp);
        }
    }

    #[test]
    fn feedback_signal_uses_lowercase_on_the_wire() {
        let req = Request::Feedback {
            signal: FeedbackSignal::Positive,
            ctx: ctx(Heading::Ahead, DistanceBucket::Near),
            token: "go_forward".to_string(),
        };
        let line = encode(&req);
        assert!(line.contains("\"signal\":\"positive\""), "line: {line}");
    }

    #[test]
    fn malformed_lines_keep_the_raw_payload() {
        let err = decode_request("{\"type\":\"emit\"").unwrap_err();
        match err {
            ProtocolError::Malformed { payload, .. } => {
                assert_eq!(payload, "{\"type\":\"emit\"");
            }
            other => panic!("expected Malformed, got {other:?}"),
        }
        assert!(decode_response("not json at all\n").is_err());
        assert!(decode_request(r#"{"type":"dance"}"#).is_err());
    }
}
