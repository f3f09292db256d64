//! Exact reference solutions.
//!
//! [`value_iteration`] solves a known MDP over a finite number of steps with
//! episode resets. [`bayes_optimal_bandit`] enumerates the belief MDP of a
//! small Beta-Bernoulli active-RL bandit: querying an arm branches on the
//! posterior-predictive outcome and updates that arm's counts, while a silent
//! pull earns the posterior-mean reward and leaves the belief unchanged.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::env::{ActionPair, TabularMdp};
use crate::error::{ArlError, Result};

/// Tolerance for treating action values as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Default cap on bandit enumeration depth.
pub const DEFAULT_TRIAL_CAP: usize = 16;

/// Finite-horizon optimum of a known MDP.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    /// `q[t][sa]`: optimal value of taking `a` in `s` at global step `t`;
    /// `-inf` for unavailable pairs.
    pub q: Vec<Vec<f64>>,
    /// `v[t][s]`, with `v[total_steps]` all zero.
    pub v: Vec<Vec<f64>>,
    /// Optimal expected total reward from the initial state at step 0.
    pub optimal_return: f64,
}

/// Backward induction over `total_steps` steps with expected rewards.
pub fn value_iteration(mdp: &TabularMdp, total_steps: usize) -> ExactSolution {
    let layout = &mdp.layout;
    let ns = layout.num_states;
    let mut v = vec![vec![0.0; ns]; total_steps + 1];
    let mut q = vec![vec![f64::NEG_INFINITY; layout.num_pairs()]; total_steps];
    for t in (0..total_steps).rev() {
        let episode_step = t % layout.episode_len;
        let (now, later) = v.split_at_mut(t + 1);
        let next_v = &later[0];
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            for &a in layout.actions(s) {
                let sa = layout.sa(s, a);
                let continuation = if layout.ends_episode(episode_step) {
                    next_v[layout.initial_state]
                } else {
                    mdp.transition[sa]
                        .iter()
                        .zip(next_v)
                        .map(|(p, v)| p * v)
                        .sum()
                };
                let value = mdp.mean_reward(s, a) + continuation;
                q[t][sa] = value;
                best = best.max(value);
            }
            now[t][s] = best;
        }
    }
    let optimal_return = v[0][layout.initial_state];
    ExactSolution {
        q,
        v,
        optimal_return,
    }
}

/// Beta pseudo-counts (successes, failures) of one arm.
pub type ArmCounts = (f64, f64);

/// Memoized expectimax over Beta-Bernoulli bandit beliefs.
///
/// The memo is keyed on the sorted multiset of arm counts plus the trials
/// remaining; values do not depend on arm order.
pub struct BanditOracle {
    cost: f64,
    cap: usize,
    memo: HashMap<(Vec<(u64, u64)>, usize), f64>,
}

impl BanditOracle {
    pub fn new(query_cost: f64, trial_cap: usize) -> Self {
        BanditOracle {
            cost: query_cost,
            cap: trial_cap,
            memo: HashMap::new(),
        }
    }

    pub fn query_cost(&self) -> f64 {
        self.cost
    }

    fn key(counts: &[ArmCounts], trials: usize) -> (Vec<(u64, u64)>, usize) {
        let mut k: Vec<(u64, u64)> = counts
            .iter()
            .map(|&(a, b)| (a.to_bits(), b.to_bits()))
            .collect();
        k.sort_unstable();
        (k, trials)
    }

    fn check(&self, trials: usize) -> Result<()> {
        if trials > self.cap {
            Err(ArlError::HorizonTooLarge {
                trials,
                cap: self.cap,
            })
        } else {
            Ok(())
        }
    }

    /// Bayes-optimal expected return with `trials` pulls left.
    pub fn value(&mut self, counts: &[ArmCounts], trials: usize) -> Result<f64> {
        self.check(trials)?;
        Ok(self.value_unchecked(counts, trials))
    }

    fn value_unchecked(&mut self, counts: &[ArmCounts], trials: usize) -> f64 {
        if trials == 0 {
            return 0.0;
        }
        let key = Self::key(counts, trials);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let v = self
            .action_values_unchecked(counts, trials)
            .into_iter()
            .map(|(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        self.memo.insert(key, v);
        v
    }

    fn action_values_unchecked(
        &mut self,
        counts: &[ArmCounts],
        trials: usize,
    ) -> Vec<(ActionPair, f64)> {
        let stay = self.value_unchecked(counts, trials - 1);
        let mut out = Vec::with_capacity(2 * counts.len());
        let mut next = counts.to_vec();
        for (k, &(a, b)) in counts.iter().enumerate() {
            let mean = a / (a + b);
            out.push((ActionPair::silent(k), mean + stay));
            next[k] = (a + 1.0, b);
            let win = self.value_unchecked(&next, trials - 1);
            next[k] = (a, b + 1.0);
            let lose = self.value_unchecked(&next, trials - 1);
            next[k] = (a, b);
            out.push((
                ActionPair::queried(k),
                -self.cost + mean * (1.0 + win) + (1.0 - mean) * lose,
            ));
        }
        out
    }

    /// Value of every (query, action) pair at a belief node.
    pub fn action_values(
        &mut self,
        counts: &[ArmCounts],
        trials: usize,
    ) -> Result<Vec<(ActionPair, f64)>> {
        self.check(trials)?;
        if trials == 0 {
            return Ok(Vec::new());
        }
        Ok(self.action_values_unchecked(counts, trials))
    }

    /// Actions whose value is within [`TIE_TOLERANCE`] of the best.
    pub fn optimal_actions(
        &mut self,
        counts: &[ArmCounts],
        trials: usize,
    ) -> Result<Vec<ActionPair>> {
        let values = self.action_values(counts, trials)?;
        let best = values
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(values
            .into_iter()
            .filter(|&(_, v)| v >= best - TIE_TOLERANCE)
            .map(|(a, _)| a)
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditSolution {
    pub prior: Vec<ArmCounts>,
    pub trials: usize,
    pub query_cost: f64,
    pub value: f64,
    /// One Bayes-optimal first action (the first of the tie set).
    pub first_action: ActionPair,
    /// Every first action within [`TIE_TOLERANCE`] of optimal.
    pub optimal_first_actions: Vec<ActionPair>,
}

impl BanditSolution {
    pub fn is_optimal_first_action(&self, act: ActionPair) -> bool {
        self.optimal_first_actions.contains(&act)
    }
}

/// Exact Bayes-optimal value and first action of an active-RL bandit, with
/// the default enumeration cap.
pub fn bayes_optimal_bandit(
    prior: &[ArmCounts],
    trials: usize,
    query_cost: f64,
) -> Result<BanditSolution> {
    bayes_optimal_bandit_capped(prior, trials, query_cost, DEFAULT_TRIAL_CAP)
}

pub fn bayes_optimal_bandit_capped(
    prior: &[ArmCounts],
    trials: usize,
    query_cost: f64,
    cap: usize,
) -> Result<BanditSolution> {
    if prior.is_empty() {
        return Err(ArlError::param("bandit needs at least one arm"));
    }
    if prior.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0)) {
        return Err(ArlError::param("Beta counts must be positive"));
    }
    if trials == 0 {
        return Err(ArlError::param("bandit needs at least one trial"));
    }
    let mut oracle = BanditOracle::new(query_cost, cap);
    let value = oracle.value(prior, trials)?;
    let optimal_first_actions = oracle.optimal_actions(prior, trials)?;
    Ok(BanditSolution {
        prior: prior.to_vec(),
        trials,
        query_cost,
        value,
        first_action: optimal_first_actions[0],
        optimal_first_actions,
    })
}

/// Checks that along every belief path that follows Bayes-optimal actions,
/// once a silent action has been taken a silent action stays optimal at
/// every later step.
pub fn optimal_query_structure_check(solution: &BanditSolution) -> Result<bool> {
    let mut oracle = BanditOracle::new(solution.query_cost, solution.trials.max(DEFAULT_TRIAL_CAP));
    let mut seen = HashSet::new();
    walk(
        &mut oracle,
        solution.prior.clone(),
        solution.trials,
        false,
        &mut seen,
    )
}

fn walk(
    oracle: &mut BanditOracle,
    counts: Vec<ArmCounts>,
    trials: usize,
    silent_taken: bool,
    seen: &mut HashSet<(Vec<(u64, u64)>, usize, bool)>,
) -> Result<bool> {
    if trials == 0 {
        return Ok(true);
    }
    let (k, t) = BanditOracle::key(&counts, trials);
    if !seen.insert((k, t, silent_taken)) {
        return Ok(true);
    }
    let optimal = oracle.optimal_actions(&counts, trials)?;
    let has_silent = optimal.iter().any(|a| !a.query);
    if silent_taken && !has_silent {
        return Ok(false);
    }
    if has_silent && !walk(oracle, counts.clone(), trials - 1, true, seen)? {
        return Ok(false);
    }
    if silent_taken {
        return Ok(true);
    }
    for act in optimal.into_iter().filter(|a| a.query) {
        for success in [true, false] {
            let mut next = counts.clone();
            let (a, b) = next[act.action];
            next[act.action] = if success { (a + 1.0, b) } else { (a, b + 1.0) };
            if !walk(oracle, next, trials - 1, false, seen)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
