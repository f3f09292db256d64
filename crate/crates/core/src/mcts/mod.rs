//! BAMCP and BAMCP++ planners for active RL.
//!
//! Every simulation draws one model from the root posterior (root sampling),
//! then descends the history tree with UCB over joint (query, action) edges.
//! At a leaf it runs a rollout that never queries, with actions drawn from a
//! Boltzmann distribution over a rollout Q-table. Returns are undiscounted
//! and include every simulated reward, minus the query cost on query steps.
//!
//! BAMCP++ differs from BAMCP in two switches on [`PlannerConfig`]:
//!
//! * `expansion_threshold`: a leaf accumulates this many rollout returns
//!   before it becomes a UCB node (1 gives BAMCP's one-node-per-simulation
//!   growth).
//! * `episodic_rollouts`: the rollout table is a per-simulation copy of the
//!   agent's real-data Q-table that keeps learning from the rewards revealed
//!   by simulated queries inside the tree. With the switch off, rollouts use
//!   the real-data table unchanged.

mod agent;
mod tree;

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{BeliefState, ModelSampler, SimModel};
use crate::env::{ActionPair, MdpLayout};
use crate::error::{ArlError, Result};
pub use crate::qtable::QTable;

pub use agent::{run_bayes_agent, BayesAgentConfig};
pub use tree::{
    child_key, ucb_score, ucb_select, Edge, EdgeId, EdgeStats, Node, NodeId, SearchTree,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub num_simulations: usize,
    /// UCB exploration constant.
    pub ucb_constant: f64,
    /// Simulations stop after depth `max_depth` (the root is depth 0).
    pub max_depth: usize,
    pub expansion_threshold: u32,
    pub episodic_rollouts: bool,
    pub softmax_temperature: f64,
    pub qlearn_rate: f64,
    pub qlearn_discount: f64,
    pub query_cost: f64,
    /// Also train the rollout table on rewards of silent simulated steps.
    #[serde(default)]
    pub learn_from_unqueried: bool,
    /// Draw model components on first access instead of up front.
    #[serde(default)]
    pub lazy_sampling: bool,
    /// Whether query edges exist at all (false for regular RL).
    #[serde(default = "default_true")]
    pub allow_queries: bool,
}

fn default_true() -> bool {
    true
}

impl PlannerConfig {
    /// BAMCP: immediate expansion, rollouts driven by the real-data table.
    pub fn bamcp(num_simulations: usize, ucb_constant: f64, query_cost: f64) -> Self {
        PlannerConfig {
            num_simulations,
            ucb_constant,
            max_depth: 0,
            expansion_threshold: 1,
            episodic_rollouts: false,
            softmax_temperature: 0.1,
            qlearn_rate: 0.2,
            qlearn_discount: 1.0,
            query_cost,
            learn_from_unqueried: false,
            lazy_sampling: false,
            allow_queries: true,
        }
    }

    /// BAMCP++: delayed expansion and episodic rollouts.
    pub fn bamcp_pp(num_simulations: usize, ucb_constant: f64, query_cost: f64) -> Self {
        PlannerConfig {
            expansion_threshold: 8,
            episodic_rollouts: true,
            ..PlannerConfig::bamcp(num_simulations, ucb_constant, query_cost)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_simulations == 0 {
            return Err(ArlError::ZeroSimulations);
        }
        if self.expansion_threshold == 0 {
            return Err(ArlError::param("expansion threshold must be at least 1"));
        }
        if !(self.softmax_temperature > 0.0) {
            return Err(ArlError::param("softmax temperature must be positive"));
        }
        if !(self.qlearn_rate > 0.0 && self.qlearn_rate <= 1.0) {
            return Err(ArlError::param("Q-learning rate must lie in (0, 1]"));
        }
        if !(self.qlearn_discount > 0.0 && self.qlearn_discount <= 1.0) {
            return Err(ArlError::param("Q-learning discount must lie in (0, 1]"));
        }
        if !(self.ucb_constant >= 0.0 && self.ucb_constant.is_finite()) {
            return Err(ArlError::param("UCB constant must be non-negative"));
        }
        if !(self.query_cost.is_finite() && self.query_cost > 0.0) {
            return Err(ArlError::param("query cost must be positive"));
        }
        Ok(())
    }
}

/// Position of the real agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RootState {
    pub state: usize,
    /// Steps already taken in the current episode.
    pub episode_step: usize,
}

/// Root statistics of one (query, action) edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootEdge {
    pub pair: ActionPair,
    pub visits: u32,
    pub q: f64,
}

/// Root values after a given number of simulations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootSnapshot {
    pub simulations: usize,
    /// Best mean return over visited query edges.
    pub query_q: Option<f64>,
    /// Best mean return over visited silent edges.
    pub silent_q: Option<f64>,
}

/// Leaf rollout: silent actions drawn from the Boltzmann distribution over
/// `policy` until depth `max_depth` is passed. Returns the summed simulated
/// rewards.
#[allow(clippy::too_many_arguments)]
pub fn rollout<R: Rng + ?Sized>(
    layout: &MdpLayout,
    model: &mut SimModel,
    sampler: &ModelSampler,
    policy: &QTable,
    mut state: usize,
    mut episode_step: usize,
    mut depth: usize,
    max_depth: usize,
    temperature: f64,
    rng: &mut R,
) -> f64 {
    let mut total = 0.0;
    while depth <= max_depth {
        let a = policy.softmax_sample(state, temperature, rng);
        let (success, raw_next) = model.step(sampler, state, a, rng);
        if success {
            total += layout.reward_scale[layout.sa(state, a)];
        }
        state = layout.successor(episode_step, raw_next);
        episode_step = (episode_step + 1) % layout.episode_len;
        depth += 1;
    }
    total
}

/// Monte-Carlo planner. The tree and scratch buffers are reused across
/// searches.
pub struct Planner {
    cfg: PlannerConfig,
    tree: SearchTree,
    path: Vec<(EdgeId, f64)>,
    root: NodeId,
}

impl Planner {
    pub fn new(cfg: PlannerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Planner {
            cfg,
            tree: SearchTree::new(),
            path: Vec::new(),
            root: 0,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn config_mut(&mut self) -> &mut PlannerConfig {
        &mut self.cfg
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    /// Runs the configured number of simulations and returns the root
    /// action with the highest mean return.
    pub fn search<R: Rng + ?Sized>(
        &mut self,
        root: RootState,
        belief: &BeliefState,
        q_m: &QTable,
        rng: &mut R,
    ) -> Result<ActionPair> {
        self.search_traced(root, belief, q_m, &[], rng)
            .map(|(a, _)| a)
    }

    /// [`Planner::search`], recording root values after each number of
    /// simulations listed in `checkpoints`.
    pub fn search_traced<R: Rng + ?Sized>(
        &mut self,
        root: RootState,
        belief: &BeliefState,
        q_m: &QTable,
        checkpoints: &[usize],
        rng: &mut R,
    ) -> Result<(ActionPair, Vec<RootSnapshot>)> {
        self.cfg.validate()?;
        let layout = std::sync::Arc::clone(&belief.layout);
        if root.state >= layout.num_states || root.episode_step >= layout.episode_len {
            return Err(ArlError::param("root state does not fit the belief"));
        }
        let sampler = ModelSampler::new(belief);
        let mut model = SimModel::new(std::sync::Arc::clone(&layout), self.cfg.lazy_sampling);
        let mut q_pi = q_m.clone();

        self.tree.clear();
        self.root = self.tree.add_node(root.state, root.episode_step, 0);
        self.tree.expand(self.root, &layout, self.cfg.allow_queries);

        let mut snapshots = Vec::with_capacity(checkpoints.len());
        for sim in 1..=self.cfg.num_simulations {
            model.resample(&sampler, rng);
            if self.cfg.episodic_rollouts {
                q_pi.copy_from(q_m);
            }
            self.simulate(&layout, &mut model, &sampler, &mut q_pi, rng);
            if checkpoints.contains(&sim) {
                snapshots.push(self.snapshot(sim));
            }
        }
        Ok((self.best_root_action(rng), snapshots))
    }

    /// One simulation from the root under the current model draw.
    fn simulate<R: Rng + ?Sized>(
        &mut self,
        layout: &MdpLayout,
        model: &mut SimModel,
        sampler: &ModelSampler,
        q_pi: &mut QTable,
        rng: &mut R,
    ) {
        let cfg = &self.cfg;
        self.path.clear();
        let mut node = self.root;
        let leaf_return;
        loop {
            let (state, episode_step, depth) = {
                let n = self.tree.node(node);
                (n.state, n.episode_step, n.depth)
            };
            if !self.tree.node(node).is_expanded() {
                let ret = rollout(
                    layout,
                    model,
                    sampler,
                    q_pi,
                    state,
                    episode_step,
                    depth,
                    cfg.max_depth,
                    cfg.softmax_temperature,
                    rng,
                );
                self.tree.record_rollout(
                    node,
                    ret,
                    cfg.expansion_threshold,
                    layout,
                    cfg.allow_queries,
                );
                leaf_return = ret;
                break;
            }

            let edges = self.tree.edge_ids(node);
            let visits = self.tree.node(node).visits;
            let pick = ucb_select(self.tree.edges_of(node), visits, cfg.ucb_constant, rng);
            let edge = edges.start + pick as EdgeId;
            self.tree.note_selection(node);
            let pair = self.tree.edge(edge).pair;

            let (success, raw_next) = model.step(sampler, state, pair.action, rng);
            let sa = layout.sa(state, pair.action);
            let reward = if success {
                layout.reward_scale[sa]
            } else {
                0.0
            };
            let ends = layout.ends_episode(episode_step);
            let learn_next = if ends { None } else { Some(raw_next) };
            let net = if pair.query {
                if cfg.episodic_rollouts {
                    q_pi.learn(
                        state,
                        pair.action,
                        reward,
                        learn_next,
                        cfg.qlearn_rate,
                        cfg.qlearn_discount,
                    );
                }
                reward - cfg.query_cost
            } else {
                if cfg.episodic_rollouts && cfg.learn_from_unqueried {
                    q_pi.learn(
                        state,
                        pair.action,
                        reward,
                        learn_next,
                        cfg.qlearn_rate,
                        cfg.qlearn_discount,
                    );
                }
                reward
            };
            self.path.push((edge, net));

            let depth = depth + 1;
            if depth > cfg.max_depth {
                leaf_return = 0.0;
                break;
            }
            let next_state = layout.successor(episode_step, raw_next);
            let next_step = (episode_step + 1) % layout.episode_len;
            node = self.tree.child_or_insert(
                edge,
                child_key(pair, success, raw_next),
                next_state,
                next_step,
                depth,
            );
        }
        self.tree.backup(&self.path, leaf_return);
    }

    fn snapshot(&self, simulations: usize) -> RootSnapshot {
        let best = |query: bool| {
            self.tree
                .edges_of(self.root)
                .iter()
                .filter(|e| e.pair.query == query && e.stats.visits > 0)
                .map(|e| e.stats.mean())
                .reduce(f64::max)
        };
        RootSnapshot {
            simulations,
            query_q: best(true),
            silent_q: best(false),
        }
    }

    fn best_root_action<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionPair {
        let edges = self.tree.edges_of(self.root);
        let mut best = f64::NEG_INFINITY;
        let mut chosen = edges[0].pair;
        let mut ties = 0u32;
        for e in edges.iter().filter(|e| e.stats.visits > 0) {
            if e.stats.mean() > best {
                best = e.stats.mean();
                chosen = e.pair;
                ties = 1;
            } else if e.stats.mean() == best {
                ties += 1;
                if rng.random_range(0..ties) == 0 {
                    chosen = e.pair;
                }
            }
        }
        chosen
    }

    /// Root (query, action) statistics of the last search.
    pub fn root_stats(&self) -> Vec<RootEdge> {
        if self.tree.num_nodes() == 0 {
            return Vec::new();
        }
        self.tree
            .edges_of(self.root)
            .iter()
            .map(|e| RootEdge {
                pair: e.pair,
                visits: e.stats.visits,
                q: e.stats.mean(),
            })
            .collect()
    }

    /// Highest mean return among visited root edges.
    pub fn root_value(&self) -> f64 {
        self.root_stats()
            .iter()
            .filter(|e| e.visits > 0)
            .map(|e| e.q)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Root table of the last search as CSV (`query,action,visits,q`).
    pub fn root_table_csv(&self) -> String {
        let mut out = String::from("query,action,visits,q\n");
        for e in self.root_stats() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                e.pair.indicator(),
                e.pair.action,
                e.visits,
                e.q
            );
        }
        out
    }
}

/// One-shot search with a fresh planner.
pub fn search<R: Rng + ?Sized>(
    root: RootState,
    belief: &BeliefState,
    q_m: &QTable,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<ActionPair> {
    Planner::new(cfg.clone())?.search(root, belief, q_m, rng)
}

#[cfg(test)]
mod tests;
