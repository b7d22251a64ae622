//! Planning and policy evaluation on Markov games.

mod expectation;
mod nash_q;
mod value;

pub(crate) use expectation::{chunked_moments, rollout_rng, sample, sample_successor};
pub use expectation::{
    default_horizon, discounted_occupancy, feature_expectations_exact, feature_expectations_mc,
    feature_expectations_mc_sequential, McEstimate,
};
pub use nash_q::{nash_q_learning, AlphaSchedule, NashQParams, QTableSet, Reward};
pub use value::{value_iteration, value_iteration_with, ValueTable, VALUE_MAX_SWEEPS, VALUE_TOL};
