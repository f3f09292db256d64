use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Planner, PlannerConfig, RootState};
use crate::belief::{BeliefState, Prior};
use crate::env::{step, ArlProblem, Trace, TraceStep};
use crate::error::Result;
use crate::qtable::QTable;

/// A Bayesian planning agent acting in the real environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesAgentConfig {
    pub planner: PlannerConfig,
    pub prior: Prior,
    /// Optional cap on the search depth; by default every search looks ahead
    /// to the end of the horizon.
    #[serde(default)]
    pub depth_cap: Option<usize>,
}

/// Plays the full horizon: search, act, update the posterior, and train the
/// real-data Q-table on every revealed reward.
///
/// `env_rng` drives the true environment; `agent_rng` initializes the
/// Q-table and drives every search.
pub fn run_bayes_agent<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    problem: &ArlProblem,
    cfg: &BayesAgentConfig,
    env_rng: &mut R1,
    agent_rng: &mut R2,
) -> Result<Trace> {
    let layout = Arc::clone(problem.layout());
    let mut belief = BeliefState::new(problem, cfg.prior)?;
    let mut planner_cfg = cfg.planner.clone();
    planner_cfg.query_cost = problem.query_cost;
    planner_cfg.allow_queries &= !problem.known_rewards;
    let mut planner = Planner::new(planner_cfg)?;
    let mut q_m = QTable::random(Arc::clone(&layout), agent_rng);

    let total = problem.total_steps();
    let tau = layout.episode_len;
    let mut trace = Trace::with_capacity(total);
    let mut state = layout.initial_state;
    for t in 0..total {
        let episode_step = t % tau;
        let remaining = total - t;
        let depth = cfg
            .depth_cap
            .map_or(remaining - 1, |cap| cap.min(remaining - 1));
        planner.config_mut().max_depth = depth;
        let act = planner.search(
            RootState {
                state,
                episode_step,
            },
            &belief,
            &q_m,
            agent_rng,
        )?;
        let outcome = step(problem, state, act, env_rng)?;
        belief.update(state, act.action, &outcome);

        let next = (!layout.ends_episode(episode_step)).then_some(outcome.next_state);
        let revealed = outcome
            .observed_reward
            .or_else(|| belief.known_reward(state, act.action));
        if let Some(r) = revealed {
            let p = planner.config();
            q_m.learn(state, act.action, r, next, p.qlearn_rate, p.qlearn_discount);
        }

        trace.push(TraceStep {
            episode: t / tau,
            t,
            state,
            act,
            outcome,
        });
        state = layout.successor(episode_step, outcome.next_state);
    }
    Ok(trace)
}
