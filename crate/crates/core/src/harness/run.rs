//! Seeded replicate execution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_model_free, ModelFreeAgentState};
use crate::belief::BeliefState;
use crate::env::{return_of, ArlProblem, Trace};
use crate::error::Result;
use crate::mcts::{run_bayes_agent, BayesAgentConfig, Planner, RootSnapshot, RootState};
use crate::qtable::QTable;
use crate::rng::stream;

use super::config::{AgentConfig, ExperimentConfig};

/// One timestep of one run, as written to `runs.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub replicate: usize,
    pub episode: usize,
    pub step: usize,
    pub state: usize,
    pub query: u8,
    pub action: usize,
    /// Empty when the reward was not observed.
    pub observed_reward: Option<f64>,
    pub true_reward: f64,
    pub cum_return: f64,
}

/// Complete record of one replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub task: String,
    pub agent: String,
    pub horizon: usize,
    pub replicate: usize,
    pub query_cost: f64,
    pub rows: Vec<StepRow>,
    pub total_return: f64,
    pub num_queries: usize,
}

impl RunRecord {
    pub fn from_trace(
        task: &str,
        agent: &str,
        horizon: usize,
        replicate: usize,
        trace: &Trace,
        query_cost: f64,
    ) -> Self {
        let mut cum = 0.0;
        let rows = trace
            .steps
            .iter()
            .map(|s| {
                cum += s.outcome.true_reward - f64::from(s.act.indicator()) * query_cost;
                StepRow {
                    replicate,
                    episode: s.episode,
                    step: s.t,
                    state: s.state,
                    query: s.act.indicator(),
                    action: s.act.action,
                    observed_reward: s.outcome.observed_reward,
                    true_reward: s.outcome.true_reward,
                    cum_return: cum,
                }
            })
            .collect();
        RunRecord {
            task: task.to_string(),
            agent: agent.to_string(),
            horizon,
            replicate,
            query_cost,
            rows,
            total_return: return_of(trace, query_cost),
            num_queries: trace.num_queries(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Plays one agent on one problem. The environment and the agent draw from
/// the separate streams `("env", r)` and `("agent", r)`.
pub fn run_agent(
    problem: &ArlProblem,
    agent: &AgentConfig,
    master_seed: u64,
    replicate: usize,
) -> Result<Trace> {
    let r = replicate as u64;
    let mut agent_rng = stream(master_seed, "agent", r);
    match agent {
        AgentConfig::Bayes(cfg) => {
            let mut env_rng = stream(master_seed, "env", r);
            run_bayes_agent(problem, cfg, &mut env_rng, &mut agent_rng)
        }
        AgentConfig::ModelFree(cfg) => {
            let mut state = ModelFreeAgentState::new(
                std::sync::Arc::clone(problem.layout()),
                *cfg,
                problem.query_cost,
                &mut agent_rng,
            )?;
            run_model_free(problem, &mut state, &mut agent_rng)
        }
    }
}

/// Root values of the first search of a run, recorded after each count in
/// `checkpoints`. The search uses `max(checkpoints)` simulations.
pub fn root_trace(
    problem: &ArlProblem,
    agent: &BayesAgentConfig,
    checkpoints: &[usize],
    master_seed: u64,
) -> Result<Vec<RootSnapshot>> {
    let mut rng = stream(master_seed, "agent", 0);
    let belief = BeliefState::new(problem, agent.prior)?;
    let q_m = QTable::random(std::sync::Arc::clone(problem.layout()), &mut rng);
    let mut cfg = agent.planner.clone();
    cfg.query_cost = problem.query_cost;
    cfg.allow_queries &= !problem.known_rewards;
    cfg.num_simulations = checkpoints.iter().copied().max().unwrap_or(0);
    let remaining = problem.total_steps() - 1;
    cfg.max_depth = agent.depth_cap.map_or(remaining, |cap| cap.min(remaining));
    let root = RootState {
        state: problem.layout().initial_state,
        episode_step: 0,
    };
    let mut planner = Planner::new(cfg)?;
    Ok(planner
        .search_traced(root, &belief, &q_m, checkpoints, &mut rng)?
        .1)
}

/// Runs replicate `replicate` at `horizon`.
pub fn run_replicate(
    cfg: &ExperimentConfig,
    horizon: usize,
    replicate: usize,
) -> Result<RunRecord> {
    let problem = cfg.environment.build(horizon, cfg.master_seed, replicate)?;
    let agent = cfg.agent.resolve(problem.query_cost);
    let trace = run_agent(&problem, &agent, cfg.master_seed, replicate)?;
    Ok(RunRecord::from_trace(
        &cfg.task_label(horizon),
        cfg.agent.name(),
        horizon,
        replicate,
        &trace,
        problem.query_cost,
    ))
}

/// Runs every (horizon, replicate) cell. Records come back ordered by
/// horizon, then replicate, whether or not the pool is used.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = cfg
        .horizons
        .iter()
        .flat_map(|&h| (0..cfg.replicates).map(move |r| (h, r)))
        .collect();
    if cfg.parallel {
        cells
            .par_iter()
            .map(|&(h, r)| run_replicate(cfg, h, r))
            .collect()
    } else {
        cells
            .iter()
            .map(|&(h, r)| run_replicate(cfg, h, r))
            .collect()
    }
}
