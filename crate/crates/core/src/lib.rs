//! Curriculum learning for tabular Q-learning agents over families of
//! simulated tasks, with active-regression variants of the task selectors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod environments;
pub mod harness;
pub mod mdp;
pub mod orchestrator;
pub mod regression;
pub mod selectors;

pub use agent::{Agent, AgentConfig, StopRule, TrainReport};
pub use mdp::{Environment, Rng};
pub use orchestrator::{run_active_simulators, RunConfig, RunResult};
