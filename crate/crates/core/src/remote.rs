//! TCP adapter for out-of-process teachers, plus the reference stub server.
//!
//! The client speaks the newline-delimited JSON protocol from
//! [`crate::protocol`], one request in flight at a time. A read that misses
//! the deadline either degrades the teacher to the scripted oracle for the
//! rest of the run or aborts, per configuration.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::time::Duration;

use crate::protocol::{decode_request, decode_response, encode, ProtocolError, Request, Response};
use crate::rng::SplitMix64;
use crate::teacher::{oracle_token, FeedbackSignal, Teacher, TeacherContext, Token};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeoutFallback {
    /// Answer from the scripted oracle for the rest of the run.
    Oracle,
    /// Surface the timeout as an error and let the run abort.
    Abort,
}

pub struct RemoteTeacher {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    timeout: Duration,
    fallback: TimeoutFallback,
    degraded: bool,
}

impl RemoteTeacher {
    pub fn connect(
        addr: &str,
        timeout: Duration,
        fallback: TimeoutFallback,
    ) -> Result<Self, ProtocolError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        let writer = stream.try_clone()?;
        Ok(Self {
            reader: BufReader::new(stream),
            writer,
            timeout,
            fallback,
            degraded: false,
        })
    }

    /// True once a timeout has switched this client to oracle answers.
    pub fn is_degraded(&self) -> bool {
        self.degraded
    }

    fn round_trip(&mut self, req: &Request) -> Result<Response, ProtocolError> {
        self.writer.write_all(encode(req).as_bytes())?;
        self.writer.flush()?;
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Err(ProtocolError::ConnectionClosed),
            Ok(_) => decode_response(&line),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                Err(ProtocolError::Timeout(self.timeout))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Applies the fallback policy to a timed-out exchange.
    fn on_timeout<T>(&mut self, fallback_value: T) -> Result<T, ProtocolError> {
        match self.fallback {
            TimeoutFallback::Oracle => {
                self.degraded = true;
                Ok(fallback_value)
            }
            TimeoutFallback::Abort => Err(ProtocolError::Timeout(self.timeout)),
        }
    }

    /// Best-effort shutdown notice; the remote closes the connection.
    pub fn shutdown(&mut self) {
        let _ = self.writer.write_all(encode(&Request::Shutdown).as_bytes());
        let _ = self.writer.flush();
    }
}

impl Teacher for RemoteTeacher {
    fn emit(
        &mut self,
        ctx: TeacherContext,
        _rng: &mut SplitMix64,
        episode: u64,
        t: u32,
    ) -> Result<Token, ProtocolError> {
        if self.degraded {
            return Ok(oracle_token(ctx));
        }
        let req = Request::Emit {
            ctx: ctx.rel_goal,
            episode,
            t,
        };
        match self.round_trip(&req) {
            Ok(Response::Token { name }) => {
                Token::from_name(&name).ok_or(ProtocolError::UnknownToken { name })
            }
            Ok(other) => Err(ProtocolError::UnexpectedResponse {
                got: encode(&other).trim_end().to_string(),
            }),
            Err(ProtocolError::Timeout(_)) => self.on_timeout(oracle_token(ctx)),
            Err(e) => Err(e),
        }
    }

    fn apply_feedback(
        &mut self,
        ctx: TeacherContext,
        token: Token,
        signal: FeedbackSignal,
    ) -> Result<(), ProtocolError> {
        if self.degraded {
            return Ok(());
        }
        let req = Request::Feedback {
            signal,
            ctx: ctx.rel_goal,
            token: token.name().to_string(),
        };
        match self.round_trip(&req) {
            Ok(Response::Ack) => Ok(()),
            Ok(other) => Err(ProtocolError::UnexpectedResponse {
                got: encode(&other).trim_end().to_string(),
            }),
            Err(ProtocolError::Timeout(_)) => self.on_timeout(()),
            Err(e) => Err(e),
        }
    }
}

/// Reference teacher server: answers every emit with the oracle token (or a
/// fixed override name), acks every feedback, and returns once a client sends
/// shutdown. Serves one connection at a time.
pub fn serve_stub(listener: TcpListener, token_override: Option<&str>) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        if serve_connection(stream, token_override)? {
            return Ok(());
        }
    }
    Ok(())
}

/// Serves one client; Ok(true) means a shutdown request arrived.
fn serve_connection(stream: TcpStream, token_override: Option<&str>) -> std::io::Result<bool> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = match line {
            Ok(l) => l,
            // Client went away mid-line; wait for the next connection.
            Err(_) => return Ok(false),
        };
        if line.trim().is_empty() {
            continue;
        }
        let request = match decode_request(&line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("stub teacher: dropping connection: {e}");
                return Ok(false);
            }
        };
        let response = match request {
            Request::Emit { ctx, .. } => {
                let name = token_override
                    .map(str::to_string)
                    .unwrap_or_else(|| oracle_token(TeacherContext::new(ctx)).name().to_string());
                Some(Response::Token { name })
            }
            Request::Feedback { .. } => Some(Response::Ack),
            Request::Shutdown => None,
        };
        match response {
            Some(resp) => {
                writer.write_all(encode(&resp).as_bytes())?;
                writer.flush()?;
            }
            None => return Ok(true),
        }
    }
    Ok(false)
}
