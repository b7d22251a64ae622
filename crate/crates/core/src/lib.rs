//! Counterexample-guided safety-aware apprenticeship learning for
//! multi-agent Markov games.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: Markov games, joint index algebra, features, grid worlds.
//! * [`dtmc`]: chains induced by decision rules and their explicit text form.
//! * [`checker`]: PCTL evaluation and safety verdicts.
//! * [`cex`]: strongest evidences and smallest counterexamples.
//! * [`solve`]: value iteration, feature expectations, Nash-Q learning.
//! * [`expert`]: demonstration synthesis and expert feature expectations.
//! * [`learner`]: max-margin weights, apprenticeship learning and the
//!   counterexample-guided loop.

pub mod cex;
pub mod checker;
pub mod dtmc;
pub mod error;
pub mod expert;
pub mod learner;
mod linalg;
pub mod model;
pub mod solve;

pub use error::{Error, Result};
