//! Tabular teacher/student loop on a deterministic gridworld.
//!
//! A teacher policy emits one instruction token per step from a small fixed
//! vocabulary; a student policy conditions its action-values on that token.
//! After every environment transition the student's TD error is compared
//! against the previous step's advantage estimate, and the sign of the
//! comparison is returned to the teacher as a binary feedback signal. The
//! [`harness`] module runs ablations of that loop over seed sweeps; the
//! whole stack is deterministic for a fixed config, down to the serialized
//! artifact bytes.

#![forbid(unsafe_code)]

pub mod checkpoint;
pub mod config;
pub mod feedback_loop;
pub mod gridworld;
pub mod harness;
pub mod protocol;
pub mod remote;
pub mod rng;
pub mod student;
pub mod teacher;
