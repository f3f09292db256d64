//! Model-free active-RL agents: an ε-greedy Q-learner combined with a rule
//! for when to pay for a reward.
//!
//! * [`QueryHeuristic::None`]: plain ε-greedy over joint (query, action)
//!   choices. A revealed reward trains both the query and the silent value of
//!   the pair, since they differ only by the known cost. Querying therefore
//!   never looks better than not querying, and queries end up coming only
//!   from exploration.
//! * [`QueryHeuristic::FirstN`]: query each pair on its first N visits.
//!   Exploratory moves only pick pairs that still have queries left.
//! * [`QueryHeuristic::Mcch`]: query while `c * mu < E * (q_max - v_bar)`,
//!   then latch into pure exploitation of the frozen Q-table.
//!
//! All of them learn only from revealed rewards.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{step, ActionPair, ArlProblem, MdpLayout, Trace, TraceStep};
use crate::error::{ArlError, Result};
use crate::qtable::QTable;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryHeuristic {
    None,
    FirstN { n: u32 },
    Mcch { mu: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFreeConfig {
    pub epsilon: f64,
    pub learn_rate: f64,
    pub discount: f64,
    pub heuristic: QueryHeuristic,
}

impl ModelFreeConfig {
    pub fn new(heuristic: QueryHeuristic) -> Self {
        ModelFreeConfig {
            epsilon: 0.1,
            learn_rate: 0.2,
            discount: 1.0,
            heuristic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(ArlError::param("epsilon must lie in [0, 1]"));
        }
        if !(self.learn_rate > 0.0 && self.learn_rate <= 1.0) {
            return Err(ArlError::param("learning rate must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(ArlError::param("discount must lie in [0, 1]"));
        }
        if let QueryHeuristic::Mcch { mu } = self.heuristic {
            if !(mu > 0.0) {
                return Err(ArlError::param("MCCH mu must be positive"));
            }
        }
        Ok(())
    }
}

/// True iff `cost * mu < episodes_remaining * (q_max - v_bar)`.
pub fn mcch_should_query(
    cost: f64,
    mu: f64,
    episodes_remaining: usize,
    q_max: f64,
    v_bar: f64,
) -> bool {
    cost * mu < episodes_remaining as f64 * (q_max - v_bar)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFreeAgentState {
    /// Values of silent actions.
    pub q: QTable,
    /// Values of query actions; used only without a heuristic.
    pub q_query: QTable,
    pub visits: Vec<u32>,
    pub queries: Vec<u32>,
    pub epsilon: f64,
    pub learn_rate: f64,
    pub discount: f64,
    pub query_cost: f64,
    pub heuristic: QueryHeuristic,
    /// MCCH latch; never resets once set.
    pub stopped_querying: bool,
}

impl ModelFreeAgentState {
    /// Fresh agent with Q-values drawn uniform on [0, 1).
    pub fn new<R: Rng + ?Sized>(
        layout: Arc<MdpLayout>,
        cfg: ModelFreeConfig,
        query_cost: f64,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = layout.num_pairs();
        let q = QTable::random(Arc::clone(&layout), rng);
        let q_query = QTable::random(layout, rng);
        Ok(ModelFreeAgentState {
            q,
            q_query,
            visits: vec![0; n],
            queries: vec![0; n],
            epsilon: cfg.epsilon,
            learn_rate: cfg.learn_rate,
            discount: cfg.discount,
            query_cost,
            heuristic: cfg.heuristic,
            stopped_querying: false,
        })
    }

    fn layout(&self) -> &MdpLayout {
        self.q.layout()
    }

    pub fn query_count(&self, state: usize, action: usize) -> u32 {
        self.queries[self.layout().sa(state, action)]
    }

    /// Q-learning on a revealed reward. `next` is `None` at the end of an
    /// episode.
    pub fn q_learn_update(
        &mut self,
        state: usize,
        action: usize,
        reward: Option<f64>,
        next: Option<usize>,
    ) -> Result<()> {
        let r = reward.ok_or(ArlError::NullReward)?;
        match self.heuristic {
            QueryHeuristic::None => {
                let bootstrap = next.map_or(0.0, |s| {
                    self.discount * self.q.max_value(s).max(self.q_query.max_value(s))
                });
                let silent = self.q.get(state, action);
                let query = self.q_query.get(state, action);
                self.q.set(
                    state,
                    action,
                    silent + self.learn_rate * (r + bootstrap - silent),
                );
                self.q_query.set(
                    state,
                    action,
                    query + self.learn_rate * (r - self.query_cost + bootstrap - query),
                );
            }
            _ => self
                .q
                .learn(state, action, r, next, self.learn_rate, self.discount),
        }
        Ok(())
    }

    /// First-N choice: explore among pairs with queries left, otherwise act
    /// greedily; query iff the chosen pair has fewer than `n` queries.
    pub fn first_n_act<R: Rng + ?Sized>(&self, state: usize, n: u32, rng: &mut R) -> ActionPair {
        let action = if rng.random::<f64>() < self.epsilon {
            let open: Vec<usize> = self
                .layout()
                .actions(state)
                .iter()
                .copied()
                .filter(|&a| self.query_count(state, a) < n)
                .collect();
            if open.is_empty() {
                self.q.greedy(state, rng)
            } else {
                open[rng.random_range(0..open.len())]
            }
        } else {
            self.q.greedy(state, rng)
        };
        ActionPair::new(self.query_count(state, action) < n, action)
    }

    /// ε-greedy over joint (query, action) choices.
    pub fn joint_act<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> ActionPair {
        let actions = self.layout().actions(state);
        if rng.random::<f64>() < self.epsilon {
            let i = rng.random_range(0..2 * actions.len());
            return ActionPair::new(i % 2 == 1, actions[i / 2]);
        }
        let mut best = f64::NEG_INFINITY;
        let mut chosen = ActionPair::silent(actions[0]);
        let mut ties = 0u32;
        for &a in actions {
            for (pair, v) in [
                (ActionPair::silent(a), self.q.get(state, a)),
                (ActionPair::queried(a), self.q_query.get(state, a)),
            ] {
                if v > best {
                    best = v;
                    chosen = pair;
                    ties = 1;
                } else if v == best {
                    ties += 1;
                    if rng.random_range(0..ties) == 0 {
                        chosen = pair;
                    }
                }
            }
        }
        chosen
    }

    /// Value of the current greedy policy at the initial state.
    pub fn greedy_value(&self) -> f64 {
        self.q.max_value(self.layout().initial_state)
    }

    /// MCCH choice; updates the latch.
    pub fn mcch_act<R: Rng + ?Sized>(
        &mut self,
        state: usize,
        mu: f64,
        episodes_remaining: usize,
        rng: &mut R,
    ) -> ActionPair {
        if !self.stopped_querying {
            let layout = self.layout();
            let q_max = layout.episode_len as f64 * layout.max_reward();
            if !mcch_should_query(
                self.query_cost,
                mu,
                episodes_remaining,
                q_max,
                self.greedy_value(),
            ) {
                self.stopped_querying = true;
            }
        }
        if self.stopped_querying {
            return ActionPair::silent(self.q.greedy(state, rng));
        }
        let actions = self.layout().actions(state);
        let action = if rng.random::<f64>() < self.epsilon {
            actions[rng.random_range(0..actions.len())]
        } else {
            self.q.greedy(state, rng)
        };
        ActionPair::queried(action)
    }

    pub fn act<R: Rng + ?Sized>(
        &mut self,
        state: usize,
        episodes_remaining: usize,
        rng: &mut R,
    ) -> ActionPair {
        match self.heuristic {
            QueryHeuristic::None => self.joint_act(state, rng),
            QueryHeuristic::FirstN { n } => self.first_n_act(state, n, rng),
            QueryHeuristic::Mcch { mu } => self.mcch_act(state, mu, episodes_remaining, rng),
        }
    }
}

/// Plays the full horizon with a model-free agent. One generator drives both
/// the agent and the environment.
pub fn run_model_free<R: Rng + ?Sized>(
    problem: &ArlProblem,
    agent: &mut ModelFreeAgentState,
    rng: &mut R,
) -> Result<Trace> {
    let layout = Arc::clone(problem.layout());
    let total = problem.total_steps();
    let tau = layout.episode_len;
    let mut trace = Trace::with_capacity(total);
    let mut state = layout.initial_state;
    for t in 0..total {
        let episode = t / tau;
        let episode_step = t % tau;
        let act = agent.act(state, problem.horizon - episode, rng);
        let outcome = step(problem, state, act, rng)?;
        let sa = layout.sa(state, act.action);
        agent.visits[sa] += 1;
        if act.query {
            agent.queries[sa] += 1;
            let next = (!layout.ends_episode(episode_step)).then_some(outcome.next_state);
            agent.q_learn_update(state, act.action, outcome.observed_reward, next)?;
        }
        trace.push(TraceStep {
            episode,
            t,
            state,
            act,
            outcome,
        });
        state = layout.successor(episode_step, outcome.next_state);
    }
    Ok(trace)
}
