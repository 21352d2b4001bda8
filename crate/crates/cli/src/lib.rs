//! Command-line front end for the training loop: train, evaluate, replay,
//! and serve-check over the core harness.

#![forbid(unsafe_code)]

pub mod args;
pub mod commands;
pub mod error;
