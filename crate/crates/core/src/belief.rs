//! Conjugate posterior over an MDP's transitions and Bernoulli rewards.
//!
//! Transition rows carry Dirichlet pseudo-counts and reward parameters Beta
//! pseudo-counts, one independent posterior per state-action pair.
//! Components the problem declares known are pinned to the ground truth and
//! never move. A step observed without a query (null reward) updates the
//! transition counts only.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{beta_from_gammas, normalize_gammas, UnitGamma};
use crate::env::{sample_row, ArlProblem, MdpLayout, StepOutcome, TabularMdp};
use crate::error::{ArlError, Result};

/// Symmetric prior hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub reward_alpha: f64,
    pub reward_beta: f64,
    pub transition_alpha: f64,
}

impl Default for Prior {
    fn default() -> Self {
        Prior {
            reward_alpha: 0.5,
            reward_beta: 0.5,
            transition_alpha: 0.5,
        }
    }
}

impl Prior {
    pub fn new(reward_alpha: f64, reward_beta: f64, transition_alpha: f64) -> Result<Self> {
        let prior = Prior {
            reward_alpha,
            reward_beta,
            transition_alpha,
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("reward_alpha", self.reward_alpha),
            ("reward_beta", self.reward_beta),
            ("transition_alpha", self.transition_alpha),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ArlError::param(format!(
                    "prior {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TransitionBelief {
    Known(Vec<f64>),
    Dirichlet(Vec<f64>),
}

impl TransitionBelief {
    pub fn mean(&self) -> Vec<f64> {
        match self {
            TransitionBelief::Known(row) => row.clone(),
            TransitionBelief::Dirichlet(counts) => {
                let total: f64 = counts.iter().sum();
                counts.iter().map(|c| c / total).collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RewardBelief {
    Known(f64),
    Beta { successes: f64, failures: f64 },
}

impl RewardBelief {
    pub fn mean(&self) -> f64 {
        match *self {
            RewardBelief::Known(p) => p,
            RewardBelief::Beta {
                successes,
                failures,
            } => successes / (successes + failures),
        }
    }
}

/// Posterior snapshot. Unavailable pairs hold empty, pinned placeholders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub layout: Arc<MdpLayout>,
    pub transitions: Vec<TransitionBelief>,
    pub rewards: Vec<RewardBelief>,
}

/// A concrete MDP drawn from a posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledModel(pub TabularMdp);

impl BeliefState {
    /// Prior belief for `problem`. Known components are copied from the
    /// ground truth; everything else starts at the symmetric prior.
    pub fn new(problem: &ArlProblem, prior: Prior) -> Result<Self> {
        prior.validate()?;
        let mdp = &problem.mdp;
        let layout = Arc::clone(&mdp.layout);
        let n = layout.num_pairs();
        let mut transitions = vec![TransitionBelief::Known(Vec::new()); n];
        let mut rewards = vec![RewardBelief::Known(0.0); n];
        for (s, a) in layout.pairs() {
            let sa = layout.sa(s, a);
            transitions[sa] = if problem.known_transitions {
                TransitionBelief::Known(mdp.transition[sa].clone())
            } else {
                TransitionBelief::Dirichlet(vec![prior.transition_alpha; layout.num_states])
            };
            rewards[sa] = if problem.known_rewards {
                RewardBelief::Known(mdp.reward_param[sa])
            } else {
                RewardBelief::Beta {
                    successes: prior.reward_alpha,
                    failures: prior.reward_beta,
                }
            };
        }
        Ok(BeliefState {
            layout,
            transitions,
            rewards,
        })
    }

    pub fn transition(&self, state: usize, action: usize) -> &TransitionBelief {
        &self.transitions[self.layout.sa(state, action)]
    }

    pub fn reward(&self, state: usize, action: usize) -> &RewardBelief {
        &self.rewards[self.layout.sa(state, action)]
    }

    /// Expected reward if the reward component is pinned.
    pub fn known_reward(&self, state: usize, action: usize) -> Option<f64> {
        let sa = self.layout.sa(state, action);
        match self.rewards[sa] {
            RewardBelief::Known(p) => Some(p * self.layout.reward_scale[sa]),
            RewardBelief::Beta { .. } => None,
        }
    }

    /// Conditions on one observed step. The successor count always moves;
    /// the reward counts move only when the reward was observed.
    pub fn update(&mut self, state: usize, action: usize, outcome: &StepOutcome) {
        let sa = self.layout.sa(state, action);
        if let TransitionBelief::Dirichlet(counts) = &mut self.transitions[sa] {
            counts[outcome.next_state] += 1.0;
        }
        if let (
            Some(success),
            RewardBelief::Beta {
                successes,
                failures,
            },
        ) = (outcome.observed_success(), &mut self.rewards[sa])
        {
            if success {
                *successes += 1.0;
            } else {
                *failures += 1.0;
            }
        }
    }

    /// Value-returning form of [`BeliefState::update`].
    pub fn updated(&self, state: usize, action: usize, outcome: &StepOutcome) -> Self {
        let mut next = self.clone();
        next.update(state, action, outcome);
        next
    }

    /// Draws one complete MDP from the posterior.
    pub fn sample_model<R: Rng + ?Sized>(&self, rng: &mut R) -> SampledModel {
        let sampler = ModelSampler::new(self);
        let n = self.layout.num_pairs();
        let mut transition = vec![Vec::new(); n];
        let mut reward = vec![0.0; n];
        for (s, a) in self.layout.pairs() {
            let sa = self.layout.sa(s, a);
            let mut row = vec![0.0; self.layout.num_states];
            sampler.sample_row(sa, &mut row, rng);
            transition[sa] = row;
            reward[sa] = sampler.sample_reward(sa, rng);
        }
        SampledModel(TabularMdp {
            layout: Arc::clone(&self.layout),
            transition,
            reward_param: reward,
        })
    }

    /// The MDP whose parameters are the posterior means.
    pub fn posterior_mean(&self) -> TabularMdp {
        let n = self.layout.num_pairs();
        let mut transition = vec![Vec::new(); n];
        let mut reward = vec![0.0; n];
        for (s, a) in self.layout.pairs() {
            let sa = self.layout.sa(s, a);
            transition[sa] = self.transitions[sa].mean();
            reward[sa] = self.rewards[sa].mean();
        }
        TabularMdp {
            layout: Arc::clone(&self.layout),
            transition,
            reward_param: reward,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("beliefs always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ArlError::Config(e.to_string()))
    }
}

/// Free-function form of [`BeliefState::new`].
pub fn init_belief(problem: &ArlProblem, prior: Prior) -> Result<BeliefState> {
    BeliefState::new(problem, prior)
}

enum RowSampler {
    Known(Vec<f64>),
    Dirichlet {
        alphas: Vec<f64>,
        gammas: Vec<UnitGamma>,
    },
}

enum RewardSampler {
    Known(f64),
    Beta(UnitGamma, UnitGamma),
}

/// Posterior sampler with the gamma distributions prebuilt, for drawing many
/// models from one frozen belief.
pub struct ModelSampler {
    layout: Arc<MdpLayout>,
    rows: Vec<RowSampler>,
    rewards: Vec<RewardSampler>,
}

impl ModelSampler {
    pub fn new(belief: &BeliefState) -> Self {
        let rows = belief
            .transitions
            .iter()
            .map(|t| match t {
                TransitionBelief::Known(row) => RowSampler::Known(row.clone()),
                TransitionBelief::Dirichlet(counts) => RowSampler::Dirichlet {
                    alphas: counts.clone(),
                    gammas: counts.iter().map(|&c| UnitGamma::new(c)).collect(),
                },
            })
            .collect();
        let rewards = belief
            .rewards
            .iter()
            .map(|r| match *r {
                RewardBelief::Known(p) => RewardSampler::Known(p),
                RewardBelief::Beta {
                    successes,
                    failures,
                } => RewardSampler::Beta(UnitGamma::new(successes), UnitGamma::new(failures)),
            })
            .collect();
        ModelSampler {
            layout: Arc::clone(&belief.layout),
            rows,
            rewards,
        }
    }

    pub fn layout(&self) -> &Arc<MdpLayout> {
        &self.layout
    }

    fn sample_row<R: Rng + ?Sized>(&self, sa: usize, out: &mut [f64], rng: &mut R) {
        match &self.rows[sa] {
            RowSampler::Known(row) => out.copy_from_slice(row),
            RowSampler::Dirichlet { alphas, gammas } => {
                for (x, g) in out.iter_mut().zip(gammas) {
                    *x = g.sample(rng);
                }
                normalize_gammas(out, alphas, rng);
            }
        }
    }

    fn sample_reward<R: Rng + ?Sized>(&self, sa: usize, rng: &mut R) -> f64 {
        match &self.rewards[sa] {
            RewardSampler::Known(p) => *p,
            RewardSampler::Beta(a, b) => beta_from_gammas(a, b, rng),
        }
    }
}

/// Root-sampled model used inside simulations.
///
/// In eager mode every pair is drawn when the model is resampled. In lazy
/// mode a pair's transition row and reward parameter are drawn the first
/// time a simulation touches it; the marginal law of every touched pair is
/// the same as under eager sampling.
pub struct SimModel {
    layout: Arc<MdpLayout>,
    pairs: Vec<usize>,
    /// Transition rows, `num_pairs * num_states`.
    rows: Vec<f64>,
    reward_param: Vec<f64>,
    stamp: Vec<u32>,
    generation: u32,
    lazy: bool,
}

impl SimModel {
    pub fn new(layout: Arc<MdpLayout>, lazy: bool) -> Self {
        let n = layout.num_pairs();
        SimModel {
            pairs: layout.pairs().map(|(s, a)| layout.sa(s, a)).collect(),
            rows: vec![0.0; n * layout.num_states],
            reward_param: vec![0.0; n],
            stamp: vec![0; n],
            generation: 0,
            lazy,
            layout,
        }
    }

    pub fn is_lazy(&self) -> bool {
        self.lazy
    }

    /// Starts a fresh model draw.
    pub fn resample<R: Rng + ?Sized>(&mut self, sampler: &ModelSampler, rng: &mut R) {
        if self.generation == u32::MAX {
            self.stamp.iter_mut().for_each(|x| *x = 0);
            self.generation = 0;
        }
        self.generation += 1;
        if !self.lazy {
            for i in 0..self.pairs.len() {
                self.draw(sampler, self.pairs[i], rng);
            }
        }
    }

    fn draw<R: Rng + ?Sized>(&mut self, sampler: &ModelSampler, sa: usize, rng: &mut R) {
        let ns = self.layout.num_states;
        sampler.sample_row(sa, &mut self.rows[sa * ns..(sa + 1) * ns], rng);
        self.reward_param[sa] = sampler.sample_reward(sa, rng);
        self.stamp[sa] = self.generation;
    }

    #[inline]
    fn ensure<R: Rng + ?Sized>(&mut self, sampler: &ModelSampler, sa: usize, rng: &mut R) {
        if self.stamp[sa] != self.generation {
            self.draw(sampler, sa, rng);
        }
    }

    /// Simulates one step: returns whether the reward draw succeeded and the
    /// raw successor.
    #[inline]
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        sampler: &ModelSampler,
        state: usize,
        action: usize,
        rng: &mut R,
    ) -> (bool, usize) {
        let sa = self.layout.sa(state, action);
        self.ensure(sampler, sa, rng);
        let success = rng.random::<f64>() < self.reward_param[sa];
        let ns = self.layout.num_states;
        let next = sample_row(&self.rows[sa * ns..(sa + 1) * ns], rng);
        (success, next)
    }

    /// Parameters of one pair under the current draw.
    pub fn pair<R: Rng + ?Sized>(
        &mut self,
        sampler: &ModelSampler,
        state: usize,
        action: usize,
        rng: &mut R,
    ) -> (Vec<f64>, f64) {
        let sa = self.layout.sa(state, action);
        self.ensure(sampler, sa, rng);
        let ns = self.layout.num_states;
        (
            self.rows[sa * ns..(sa + 1) * ns].to_vec(),
            self.reward_param[sa],
        )
    }
}
