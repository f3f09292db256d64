//! Benchmark environment constructors.
//!
//! Fork layouts (both variants have exactly one two-action state):
//!
//! * Late Fork(N): states `0..N` form a forced chain (one action each) that
//!   ends in the fork, state `N`. Both fork actions return to state 0 and end
//!   the episode, so an episode has N+1 steps and there is no terminal state.
//! * Early Fork(N): state 0 is the fork. Action k enters chain k, made of
//!   N-1 forced states; the last chain action moves to a shared terminal
//!   state. That gives 2(N-1)+2 states and N steps per episode. The terminal
//!   state carries one zero-reward self-loop action that is never taken
//!   because the episode resets first.
//!
//! Every action carries its own Bernoulli reward.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ArlProblem, MdpLayout, TabularMdp};
use crate::dist::{sample_beta, sample_dirichlet};
use crate::error::{ArlError, Result};

/// Episode length of sampled random MDPs (10 episodes of 10 steps give the
/// 100-step random-MDP benchmark).
pub const RANDOM_MDP_EPISODE_LEN: usize = 10;

fn check_prob(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ArlError::param(format!("{what} {p} is not in [0, 1]")))
    }
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    row[i] = 1.0;
    row
}

/// K-armed Bernoulli bandit: one state, self-loop transitions, one step per
/// trial.
pub fn make_bandit(arm_means: &[f64], trials: usize, query_cost: f64) -> Result<ArlProblem> {
    if arm_means.is_empty() {
        return Err(ArlError::param("bandit needs at least one arm"));
    }
    for &p in arm_means {
        check_prob(p, "arm mean")?;
    }
    if trials == 0 {
        return Err(ArlError::param("bandit needs at least one trial"));
    }
    let k = arm_means.len();
    let layout = MdpLayout {
        num_states: 1,
        num_actions: k,
        available_actions: vec![(0..k).collect()],
        reward_scale: vec![1.0; k],
        episode_len: 1,
        initial_state: 0,
    };
    let mdp = TabularMdp::new(layout, vec![vec![1.0]; k], arm_means.to_vec())?;
    ArlProblem::new(mdp, query_cost, trials, true, false)
}

/// Reward parameters of a fork MDP.
///
/// `fork` holds the two fork actions. `chain` lists the forced actions: for
/// Late Fork the N chain states in order; for Early Fork the N-1 states of
/// branch 0 followed by the N-1 states of branch 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForkRewards {
    pub fork: [f64; 2],
    pub chain: Vec<f64>,
}

impl ForkRewards {
    /// Late Fork defaults: unavoidable actions pay 0.5, fork arms 0.2 and 0.8.
    pub fn late_default(chain_len: usize) -> Self {
        ForkRewards {
            fork: [0.2, 0.8],
            chain: vec![0.5; chain_len],
        }
    }

    /// Early Fork defaults: the first step favours branch 0 while the rest of
    /// branch 1 pays more, so rewards along the whole branch matter.
    pub fn early_default(chain_len: usize) -> Self {
        let per_branch = chain_len.saturating_sub(1);
        let mut chain = vec![0.3; per_branch];
        chain.extend(std::iter::repeat_n(0.7, per_branch));
        ForkRewards {
            fork: [0.7, 0.3],
            chain,
        }
    }
}

/// Late Fork with the default rewards.
pub fn make_late_fork(
    chain_len: usize,
    query_cost: f64,
    horizon: usize,
    known_transitions: bool,
) -> Result<ArlProblem> {
    late_fork_with_rewards(
        chain_len,
        &ForkRewards::late_default(chain_len),
        query_cost,
        horizon,
        known_transitions,
    )
}

pub fn late_fork_with_rewards(
    chain_len: usize,
    rewards: &ForkRewards,
    query_cost: f64,
    horizon: usize,
    known_transitions: bool,
) -> Result<ArlProblem> {
    if chain_len == 0 {
        return Err(ArlError::param(
            "Late Fork needs a chain of at least one state",
        ));
    }
    if rewards.chain.len() != chain_len {
        return Err(ArlError::param(
            "Late Fork needs one chain reward per chain state",
        ));
    }
    let n = chain_len + 1;
    let layout = MdpLayout {
        num_states: n,
        num_actions: 2,
        available_actions: (0..n)
            .map(|s| if s == chain_len { vec![0, 1] } else { vec![0] })
            .collect(),
        reward_scale: vec![1.0; 2 * n],
        episode_len: n,
        initial_state: 0,
    };
    let mut transition = vec![Vec::new(); 2 * n];
    let mut reward = vec![0.0; 2 * n];
    for s in 0..chain_len {
        let sa = layout.sa(s, 0);
        transition[sa] = one_hot(n, s + 1);
        check_prob(rewards.chain[s], "chain reward")?;
        reward[sa] = rewards.chain[s];
    }
    for a in 0..2 {
        let sa = layout.sa(chain_len, a);
        transition[sa] = one_hot(n, 0);
        check_prob(rewards.fork[a], "fork reward")?;
        reward[sa] = rewards.fork[a];
    }
    let mdp = TabularMdp::new(layout, transition, reward)?;
    ArlProblem::new(mdp, query_cost, horizon, known_transitions, false)
}

/// Early Fork with the default rewards.
pub fn make_early_fork(
    chain_len: usize,
    query_cost: f64,
    horizon: usize,
    known_transitions: bool,
) -> Result<ArlProblem> {
    early_fork_with_rewards(
        chain_len,
        &ForkRewards::early_default(chain_len),
        query_cost,
        horizon,
        known_transitions,
    )
}

pub fn early_fork_with_rewards(
    chain_len: usize,
    rewards: &ForkRewards,
    query_cost: f64,
    horizon: usize,
    known_transitions: bool,
) -> Result<ArlProblem> {
    if chain_len < 2 {
        return Err(ArlError::param("Early Fork needs N >= 2"));
    }
    let per_branch = chain_len - 1;
    if rewards.chain.len() != 2 * per_branch {
        return Err(ArlError::param("Early Fork needs 2(N-1) chain rewards"));
    }
    let n = 2 * per_branch + 2;
    let terminal = n - 1;
    let branch_start = |k: usize| 1 + k * per_branch;
    let layout = MdpLayout {
        num_states: n,
        num_actions: 2,
        available_actions: (0..n)
            .map(|s| if s == 0 { vec![0, 1] } else { vec![0] })
            .collect(),
        reward_scale: vec![1.0; 2 * n],
        episode_len: chain_len,
        initial_state: 0,
    };
    let mut transition = vec![Vec::new(); 2 * n];
    let mut reward = vec![0.0; 2 * n];
    for k in 0..2 {
        let sa = layout.sa(0, k);
        transition[sa] = one_hot(n, branch_start(k));
        check_prob(rewards.fork[k], "fork reward")?;
        reward[sa] = rewards.fork[k];
        for j in 0..per_branch {
            let s = branch_start(k) + j;
            let next = if j + 1 == per_branch { terminal } else { s + 1 };
            let sa = layout.sa(s, 0);
            transition[sa] = one_hot(n, next);
            let p = rewards.chain[k * per_branch + j];
            check_prob(p, "chain reward")?;
            reward[sa] = p;
        }
    }
    let sa = layout.sa(terminal, 0);
    transition[sa] = one_hot(n, terminal);
    let mdp = TabularMdp::new(layout, transition, reward)?;
    ArlProblem::new(mdp, query_cost, horizon, known_transitions, false)
}

/// Double-Loop: from the start state, action 0 enters the left loop and
/// action 1 the right loop. Each loop is a forced chain of L states that
/// returns to the start; closing the left loop pays 2, the right loop 1, and
/// every other step 0. One circuit (L+1 steps) is one episode, which
/// coincides with the return to the start state.
pub fn make_double_loop(loop_len: usize) -> Result<TabularMdp> {
    if loop_len < 2 {
        return Err(ArlError::param("Double-Loop needs loops of length >= 2"));
    }
    let n = 2 * loop_len + 1;
    let first = |k: usize| 1 + k * loop_len;
    let mut layout = MdpLayout {
        num_states: n,
        num_actions: 2,
        available_actions: (0..n)
            .map(|s| if s == 0 { vec![0, 1] } else { vec![0] })
            .collect(),
        reward_scale: vec![1.0; 2 * n],
        episode_len: loop_len + 1,
        initial_state: 0,
    };
    let mut transition = vec![Vec::new(); 2 * n];
    let mut reward = vec![0.0; 2 * n];
    for k in 0..2 {
        transition[layout.sa(0, k)] = one_hot(n, first(k));
        for j in 0..loop_len {
            let s = first(k) + j;
            let sa = layout.sa(s, 0);
            if j + 1 == loop_len {
                transition[sa] = one_hot(n, 0);
                reward[sa] = 1.0;
                layout.reward_scale[sa] = if k == 0 { 2.0 } else { 1.0 };
            } else {
                transition[sa] = one_hot(n, s + 1);
            }
        }
    }
    TabularMdp::new(layout, transition, reward)
}

/// Random MDP from the generating prior: every transition row is symmetric
/// Dirichlet(`transition_alpha`) and every reward parameter
/// Beta(`reward_alpha`, `reward_alpha`). All actions are available in every
/// state, the initial state is 0 and episodes last
/// [`RANDOM_MDP_EPISODE_LEN`] steps.
pub fn sample_random_mdp<R: Rng + ?Sized>(
    num_states: usize,
    num_actions: usize,
    reward_alpha: f64,
    transition_alpha: f64,
    rng: &mut R,
) -> Result<TabularMdp> {
    for (name, a) in [
        ("reward_alpha", reward_alpha),
        ("transition_alpha", transition_alpha),
    ] {
        if !(a.is_finite() && a > 0.0) {
            return Err(ArlError::param(format!("{name} must be positive, got {a}")));
        }
    }
    if num_states == 0 || num_actions == 0 {
        return Err(ArlError::param("random MDP needs states and actions"));
    }
    let layout = MdpLayout {
        num_states,
        num_actions,
        available_actions: vec![(0..num_actions).collect(); num_states],
        reward_scale: vec![1.0; num_states * num_actions],
        episode_len: RANDOM_MDP_EPISODE_LEN,
        initial_state: 0,
    };
    let alphas = vec![transition_alpha; num_states];
    let mut transition = Vec::with_capacity(layout.num_pairs());
    let mut reward = Vec::with_capacity(layout.num_pairs());
    for _ in 0..layout.num_pairs() {
        let mut row = vec![0.0; num_states];
        sample_dirichlet(&alphas, &mut row, rng);
        transition.push(row);
        reward.push(sample_beta(reward_alpha, reward_alpha, rng));
    }
    Ok(TabularMdp {
        layout: Arc::new(layout),
        transition,
        reward_param: reward,
    })
}
