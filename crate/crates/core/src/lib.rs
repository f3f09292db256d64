//! Bayesian active reinforcement learning in tabular MDPs.
//!
//! In active RL an agent only sees the reward of a step if it pays a query
//! cost, yet every reward still counts toward its return. This crate
//! provides:
//!
//! * [`env`]: ground-truth MDPs, the query/step protocol and the benchmark
//!   constructors (Bernoulli bandits, Late/Early Fork, Double-Loop, random
//!   MDPs);
//! * [`belief`]: the Dirichlet/Beta posterior, which ignores null rewards;
//! * [`mcts`]: the BAMCP and BAMCP++ planners;
//! * [`baselines`]: ε-greedy Q-learners with First-N and MCCH query rules;
//! * [`oracle`]: finite-horizon value iteration and exact Bayes-optimal
//!   bandit enumeration;
//! * [`harness`]: seeded experiments, summaries, gridsearch and CSV output.

pub mod baselines;
pub mod belief;
mod dist;
pub mod env;
pub mod error;
pub mod harness;
pub mod mcts;
pub mod oracle;
pub mod qtable;
pub mod rng;

pub use belief::{BeliefState, Prior};
pub use env::{return_of, step, ActionPair, ArlProblem, MdpLayout, StepOutcome, TabularMdp, Trace};
pub use error::{ArlError, Result};
pub use mcts::{Planner, PlannerConfig, RootState};
pub use qtable::QTable;
