//! Ground-truth tabular MDPs and the active-RL interaction protocol.
//!
//! An agent acts with an [`ActionPair`]: an action plus a query indicator.
//! The reward is always drawn and always counts toward the return, but it is
//! only revealed to the agent when the query indicator is set, at a fixed
//! cost per query.

mod builders;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ArlError, Result};

pub use builders::{
    early_fork_with_rewards, late_fork_with_rewards, make_bandit, make_double_loop,
    make_early_fork, make_late_fork, sample_random_mdp, ForkRewards, RANDOM_MDP_EPISODE_LEN,
};

const ROW_TOLERANCE: f64 = 1e-9;

/// The part of an MDP an agent always knows: state and action sets, the
/// payoff magnitude of each reward, and the episode structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpLayout {
    pub num_states: usize,
    pub num_actions: usize,
    /// Actions available in each state, in increasing order.
    pub available_actions: Vec<Vec<usize>>,
    /// Payoff of a successful Bernoulli draw, per state-action pair.
    pub reward_scale: Vec<f64>,
    /// Steps per episode. After the last step the state resets to
    /// `initial_state`.
    pub episode_len: usize,
    pub initial_state: usize,
}

impl MdpLayout {
    #[inline]
    pub fn sa(&self, state: usize, action: usize) -> usize {
        state * self.num_actions + action
    }

    #[inline]
    pub fn actions(&self, state: usize) -> &[usize] {
        &self.available_actions[state]
    }

    pub fn is_available(&self, state: usize, action: usize) -> bool {
        state < self.num_states && self.available_actions[state].contains(&action)
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    /// All available (state, action) pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.available_actions
            .iter()
            .enumerate()
            .flat_map(|(s, acts)| acts.iter().map(move |&a| (s, a)))
    }

    /// Whether the step taken at `episode_step` (0-based) is the last one of
    /// its episode.
    #[inline]
    pub fn ends_episode(&self, episode_step: usize) -> bool {
        episode_step + 1 >= self.episode_len
    }

    /// State occupied after a step, applying the episode reset.
    #[inline]
    pub fn successor(&self, episode_step: usize, raw_next: usize) -> usize {
        if self.ends_episode(episode_step) {
            self.initial_state
        } else {
            raw_next
        }
    }

    /// Largest single-step payoff.
    pub fn max_reward(&self) -> f64 {
        self.pairs()
            .map(|(s, a)| self.reward_scale[self.sa(s, a)])
            .fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        if self.num_states == 0 || self.num_actions == 0 {
            return Err(ArlError::mdp("empty state or action set"));
        }
        if self.available_actions.len() != self.num_states {
            return Err(ArlError::mdp("available_actions must list every state"));
        }
        if self.reward_scale.len() != self.num_pairs() {
            return Err(ArlError::mdp("reward_scale has the wrong length"));
        }
        if self.episode_len == 0 {
            return Err(ArlError::mdp("episode length must be at least 1"));
        }
        if self.initial_state >= self.num_states {
            return Err(ArlError::mdp("initial state out of range"));
        }
        for (s, acts) in self.available_actions.iter().enumerate() {
            if acts.is_empty() {
                return Err(ArlError::mdp(format!("state {s} has no actions")));
            }
            if acts.windows(2).any(|w| w[0] >= w[1]) || acts.iter().any(|&a| a >= self.num_actions)
            {
                return Err(ArlError::mdp(format!(
                    "state {s} has a malformed action list"
                )));
            }
            for &a in acts {
                let scale = self.reward_scale[self.sa(s, a)];
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(ArlError::mdp(format!(
                        "reward scale at ({s},{a}) must be positive"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A finite MDP with Bernoulli rewards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub layout: Arc<MdpLayout>,
    /// Successor distribution per state-action pair (indexed by
    /// [`MdpLayout::sa`]); empty for unavailable pairs.
    pub transition: Vec<Vec<f64>>,
    /// Bernoulli success probability per state-action pair.
    pub reward_param: Vec<f64>,
}

impl TabularMdp {
    pub fn new(
        layout: MdpLayout,
        transition: Vec<Vec<f64>>,
        reward_param: Vec<f64>,
    ) -> Result<Self> {
        let mdp = TabularMdp {
            layout: Arc::new(layout),
            transition,
            reward_param,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn num_states(&self) -> usize {
        self.layout.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.layout.num_actions
    }

    pub fn episode_len(&self) -> usize {
        self.layout.episode_len
    }

    pub fn initial_state(&self) -> usize {
        self.layout.initial_state
    }

    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        &self.transition[self.layout.sa(state, action)]
    }

    pub fn reward_param(&self, state: usize, action: usize) -> f64 {
        self.reward_param[self.layout.sa(state, action)]
    }

    /// Expected one-step reward.
    pub fn mean_reward(&self, state: usize, action: usize) -> f64 {
        let sa = self.layout.sa(state, action);
        self.reward_param[sa] * self.layout.reward_scale[sa]
    }

    /// Copy with a different episode length.
    pub fn with_episode_len(&self, episode_len: usize) -> Result<Self> {
        let mut layout = (*self.layout).clone();
        layout.episode_len = episode_len;
        TabularMdp::new(layout, self.transition.clone(), self.reward_param.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let layout = &self.layout;
        layout.validate()?;
        if self.transition.len() != layout.num_pairs()
            || self.reward_param.len() != layout.num_pairs()
        {
            return Err(ArlError::mdp("parameter tables have the wrong length"));
        }
        for (s, a) in layout.pairs() {
            let sa = layout.sa(s, a);
            let row = &self.transition[sa];
            if row.len() != layout.num_states {
                return Err(ArlError::mdp(format!(
                    "transition row ({s},{a}) has the wrong length"
                )));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(ArlError::mdp(format!(
                    "transition row ({s},{a}) has a negative entry"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_TOLERANCE {
                return Err(ArlError::mdp(format!(
                    "transition row ({s},{a}) sums to {total}"
                )));
            }
            let p = self.reward_param[sa];
            if !(0.0..=1.0).contains(&p) {
                return Err(ArlError::mdp(format!(
                    "reward parameter {p} at ({s},{a}) is not a probability"
                )));
            }
        }
        Ok(())
    }
}

/// A tabular MDP together with the query cost, horizon and prior knowledge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArlProblem {
    pub mdp: TabularMdp,
    pub query_cost: f64,
    /// Number of episodes (trials, for bandits).
    pub horizon: usize,
    pub known_transitions: bool,
    pub known_rewards: bool,
}

impl ArlProblem {
    pub fn new(
        mdp: TabularMdp,
        query_cost: f64,
        horizon: usize,
        known_transitions: bool,
        known_rewards: bool,
    ) -> Result<Self> {
        if !(query_cost.is_finite() && query_cost > 0.0) {
            return Err(ArlError::param(format!(
                "query cost must be positive, got {query_cost}"
            )));
        }
        if horizon == 0 {
            return Err(ArlError::param("horizon must be at least one episode"));
        }
        mdp.validate()?;
        Ok(ArlProblem {
            mdp,
            query_cost,
            horizon,
            known_transitions,
            known_rewards,
        })
    }

    /// A regular RL problem: rewards known up front, so queries are pointless.
    pub fn regular_rl(mdp: TabularMdp, horizon: usize) -> Result<Self> {
        ArlProblem::new(mdp, 1.0, horizon, false, true)
    }

    pub fn layout(&self) -> &Arc<MdpLayout> {
        &self.mdp.layout
    }

    pub fn total_steps(&self) -> usize {
        self.horizon * self.mdp.episode_len()
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        ArlProblem::new(
            self.mdp.clone(),
            self.query_cost,
            horizon,
            self.known_transitions,
            self.known_rewards,
        )
    }

    /// Serializes the environment descriptor as pretty-printed JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("environment descriptors always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let problem: ArlProblem =
            serde_json::from_str(text).map_err(|e| ArlError::Config(e.to_string()))?;
        ArlProblem::new(
            problem.mdp,
            problem.query_cost,
            problem.horizon,
            problem.known_transitions,
            problem.known_rewards,
        )
    }
}

/// Joint query/action choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionPair {
    pub query: bool,
    pub action: usize,
}

impl ActionPair {
    pub fn new(query: bool, action: usize) -> Self {
        ActionPair { query, action }
    }

    pub fn silent(action: usize) -> Self {
        ActionPair {
            query: false,
            action,
        }
    }

    pub fn queried(action: usize) -> Self {
        ActionPair {
            query: true,
            action,
        }
    }

    /// The query indicator as 0/1.
    pub fn indicator(&self) -> u8 {
        u8::from(self.query)
    }
}

/// Result of one environment step. `observed_reward` is `None` (the null
/// reward) exactly when the step was not queried.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Successor drawn from the transition row, before any episode reset.
    pub next_state: usize,
    pub observed_reward: Option<f64>,
    /// Harness bookkeeping; never shown to agents.
    pub true_reward: f64,
}

impl StepOutcome {
    /// Whether the Bernoulli draw succeeded, if it was observed.
    pub fn observed_success(&self) -> Option<bool> {
        self.observed_reward.map(|r| r > 0.0)
    }
}

/// Draws a successor index from a probability row.
#[inline]
pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left a sliver above the cumulative sum.
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Performs one interaction step in the true environment.
pub fn step<R: Rng + ?Sized>(
    problem: &ArlProblem,
    state: usize,
    act: ActionPair,
    rng: &mut R,
) -> Result<StepOutcome> {
    let mdp = &problem.mdp;
    if !mdp.layout.is_available(state, act.action) {
        return Err(ArlError::UnavailableAction {
            state,
            action: act.action,
        });
    }
    let sa = mdp.layout.sa(state, act.action);
    let next_state = sample_row(&mdp.transition[sa], rng);
    let success = rng.random::<f64>() < mdp.reward_param[sa];
    let true_reward = if success {
        mdp.layout.reward_scale[sa]
    } else {
        0.0
    };
    Ok(StepOutcome {
        next_state,
        observed_reward: act.query.then_some(true_reward),
        true_reward,
    })
}

/// One row of an interaction history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub episode: usize,
    /// Global timestep.
    pub t: usize,
    pub state: usize,
    pub act: ActionPair,
    pub outcome: StepOutcome,
}

/// Interaction history of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Trace {
            steps: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, step: TraceStep) {
        self.steps.push(step);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn num_queries(&self) -> usize {
        self.steps.iter().filter(|s| s.act.query).count()
    }

    pub fn total_true_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.outcome.true_reward).sum()
    }
}

/// Total return: every true reward counts, queried or not, minus the cost of
/// each query.
pub fn return_of(trace: &Trace, query_cost: f64) -> f64 {
    trace
        .steps
        .iter()
        .map(|s| s.outcome.true_reward - f64::from(s.act.indicator()) * query_cost)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn outcome(r: f64, query: bool) -> TraceStep {
        TraceStep {
            episode: 0,
            t: 0,
            state: 0,
            act: ActionPair::new(query, 0),
            outcome: StepOutcome {
                next_state: 0,
                observed_reward: query.then_some(r),
                true_reward: r,
            },
        }
    }

    #[test]
    fn return_of_examples() {
        assert_eq!(return_of(&Trace::new(), 0.5), 0.0);
        let trace = Trace {
            steps: vec![outcome(1.0, true), outcome(0.0, false), outcome(1.0, false)],
        };
        assert_eq!(return_of(&trace, 0.5), 1.5);
    }

    #[test]
    fn step_hides_unqueried_rewards() {
        let problem = make_bandit(&[1.0, 0.0], 5, 0.5).unwrap();
        let mut rng = seeded(3);
        let queried = step(&problem, 0, ActionPair::queried(0), &mut rng).unwrap();
        assert_eq!(queried.observed_reward, Some(1.0));
        assert_eq!(queried.true_reward, 1.0);
        let silent = step(&problem, 0, ActionPair::silent(0), &mut rng).unwrap();
        assert_eq!(silent.observed_reward, None);
        assert_eq!(silent.true_reward, 1.0);
    }

    #[test]
    fn step_rejects_unavailable_action() {
        let problem = make_late_fork(2, 0.5, 3, true).unwrap();
        let mut rng = seeded(0);
        let err = step(&problem, 0, ActionPair::silent(1), &mut rng).unwrap_err();
        assert!(matches!(
            err,
            ArlError::UnavailableAction {
                state: 0,
                action: 1
            }
        ));
    }

    #[test]
    fn late_fork_chain_is_deterministic() {
        let problem = make_late_fork(2, 0.5, 3, true).unwrap();
        let mut rng = seeded(11);
        for _ in 0..100 {
            let out = step(&problem, 0, ActionPair::silent(0), &mut rng).unwrap();
            assert_eq!(out.next_state, 1);
        }
    }

    #[test]
    fn bernoulli_concentration() {
        let problem = make_bandit(&[0.3], 1, 0.5).unwrap();
        let mut rng = seeded(2024);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| {
                step(&problem, 0, ActionPair::silent(0), &mut rng)
                    .unwrap()
                    .true_reward
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.3).abs() <= 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn rejects_bad_rows_and_costs() {
        let layout = MdpLayout {
            num_states: 1,
            num_actions: 1,
            available_actions: vec![vec![0]],
            reward_scale: vec![1.0],
            episode_len: 1,
            initial_state: 0,
        };
        assert!(TabularMdp::new(layout.clone(), vec![vec![0.9]], vec![0.5]).is_err());
        assert!(TabularMdp::new(layout.clone(), vec![vec![1.0]], vec![1.5]).is_err());
        let mdp = TabularMdp::new(layout, vec![vec![1.0]], vec![0.5]).unwrap();
        assert!(ArlProblem::new(mdp.clone(), 0.0, 1, true, false).is_err());
        assert!(ArlProblem::new(mdp, 0.5, 0, true, false).is_err());
    }

    #[test]
    fn descriptor_json_round_trip() {
        let problem = make_early_fork(3, 0.5, 7, false).unwrap();
        let text = problem.to_json();
        assert_eq!(ArlProblem::from_json(&text).unwrap(), problem);
    }

    #[test]
    fn successor_applies_reset() {
        let problem = make_early_fork(3, 0.5, 2, true).unwrap();
        let layout = problem.layout();
        assert_eq!(layout.successor(0, 1), 1);
        assert_eq!(layout.successor(2, 5), layout.initial_state);
    }
}
