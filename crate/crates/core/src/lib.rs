//! Planning for partially observable semi-Markov decision processes.
//!
//! Transitions take random, continuously distributed sojourn times, the agent
//! observes both the elapsed time and a noisy observation, and values are
//! discounted continuously at rate β. The solver is a randomized point-based
//! value iteration whose backups integrate over sojourn times by importance
//! sampling from a single pool of collected times.
//!
//! Typical flow: build or load a [`model::PosmdpModel`], collect a
//! [`sampler::SampleBank`], then [`solver::solve`] from an initial value
//! function and roll the resulting policy out with [`simulator`].

pub mod belief;
pub mod distributions;
pub mod format;
pub mod model;
pub mod parallel;
pub mod quadrature;
pub mod sampler;
pub mod simulator;
pub mod solver;

pub use belief::{Belief, BeliefError};
pub use distributions::{BetaDensity, SojournDistribution};
pub use model::{load_model, PosmdpModel, StageRewardTable, ValidationReport};
pub use parallel::Execution;
pub use sampler::{collect, SampleBank};
pub use simulator::{evaluate, rollout, Evaluation, HistoryRecord};
pub use solver::{AlphaVector, Policy, SolverConfig, ValueFunction};
