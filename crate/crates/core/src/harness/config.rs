//! Experiment configuration, read from and written to TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{ModelFreeConfig, QueryHeuristic};
use crate::belief::Prior;
use crate::env::{
    early_fork_with_rewards, late_fork_with_rewards, make_bandit, make_double_loop,
    sample_random_mdp, ArlProblem, ForkRewards,
};
use crate::error::{ArlError, Result};
use crate::mcts::{BayesAgentConfig, PlannerConfig};
use crate::rng::stream;

fn default_cost() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

/// Benchmark family and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EnvSpec {
    Bandit {
        arm_means: Vec<f64>,
        #[serde(default = "default_cost")]
        query_cost: f64,
    },
    LateFork {
        chain_len: usize,
        #[serde(default = "default_cost")]
        query_cost: f64,
        #[serde(default)]
        known_transitions: bool,
        #[serde(default)]
        rewards: Option<ForkRewards>,
    },
    EarlyFork {
        chain_len: usize,
        #[serde(default = "default_cost")]
        query_cost: f64,
        #[serde(default)]
        known_transitions: bool,
        #[serde(default)]
        rewards: Option<ForkRewards>,
    },
    /// Regular RL: rewards are always observed and there are no queries.
    DoubleLoop { loop_len: usize },
    /// A fresh MDP from the generating prior for every replicate.
    Random {
        num_states: usize,
        num_actions: usize,
        reward_alpha: f64,
        transition_alpha: f64,
        #[serde(default = "default_cost")]
        query_cost: f64,
    },
}

impl EnvSpec {
    pub fn family(&self) -> &'static str {
        match self {
            EnvSpec::Bandit { .. } => "bandit",
            EnvSpec::LateFork { .. } => "late_fork",
            EnvSpec::EarlyFork { .. } => "early_fork",
            EnvSpec::DoubleLoop { .. } => "double_loop",
            EnvSpec::Random { .. } => "random",
        }
    }

    /// Short task label, e.g. `late_fork-2` or `random-5x3`.
    pub fn label(&self) -> String {
        match self {
            EnvSpec::Bandit { arm_means, .. } => format!("bandit-{}", arm_means.len()),
            EnvSpec::LateFork { chain_len, .. } | EnvSpec::EarlyFork { chain_len, .. } => {
                format!("{}-{chain_len}", self.family())
            }
            EnvSpec::DoubleLoop { loop_len } => format!("double_loop-{loop_len}"),
            EnvSpec::Random {
                num_states,
                num_actions,
                ..
            } => format!("random-{num_states}x{num_actions}"),
        }
    }

    pub fn is_regular_rl(&self) -> bool {
        matches!(self, EnvSpec::DoubleLoop { .. })
    }

    /// Builds the problem for one replicate. Only the random family uses the
    /// seed: replicate `r` draws its MDP from stream `("mdp", r)`.
    pub fn build(&self, horizon: usize, master_seed: u64, replicate: usize) -> Result<ArlProblem> {
        match self {
            EnvSpec::Bandit {
                arm_means,
                query_cost,
            } => make_bandit(arm_means, horizon, *query_cost),
            EnvSpec::LateFork {
                chain_len,
                query_cost,
                known_transitions,
                rewards,
            } => {
                let rewards = rewards
                    .clone()
                    .unwrap_or_else(|| ForkRewards::late_default(*chain_len));
                late_fork_with_rewards(
                    *chain_len,
                    &rewards,
                    *query_cost,
                    horizon,
                    *known_transitions,
                )
            }
            EnvSpec::EarlyFork {
                chain_len,
                query_cost,
                known_transitions,
                rewards,
            } => {
                let rewards = rewards
                    .clone()
                    .unwrap_or_else(|| ForkRewards::early_default(*chain_len));
                early_fork_with_rewards(
                    *chain_len,
                    &rewards,
                    *query_cost,
                    horizon,
                    *known_transitions,
                )
            }
            EnvSpec::DoubleLoop { loop_len } => {
                ArlProblem::regular_rl(make_double_loop(*loop_len)?, horizon)
            }
            EnvSpec::Random {
                num_states,
                num_actions,
                reward_alpha,
                transition_alpha,
                query_cost,
            } => {
                let mut rng = stream(master_seed, "mdp", replicate as u64);
                let mdp = sample_random_mdp(
                    *num_states,
                    *num_actions,
                    *reward_alpha,
                    *transition_alpha,
                    &mut rng,
                )?;
                ArlProblem::new(mdp, *query_cost, horizon, false, false)
            }
        }
    }
}

fn default_prior() -> Prior {
    Prior::default()
}

/// Hyperparameters of BAMCP and BAMCP++. Unset fields take the variant's
/// defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub simulations: usize,
    pub ucb_constant: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion_threshold: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub softmax_temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qlearn_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_cap: Option<usize>,
    #[serde(default)]
    pub lazy_sampling: bool,
    #[serde(default)]
    pub learn_from_unqueried: bool,
    #[serde(default = "default_prior")]
    pub prior: Prior,
}

impl PlannerParams {
    pub fn new(simulations: usize, ucb_constant: f64) -> Self {
        PlannerParams {
            simulations,
            ucb_constant,
            expansion_threshold: None,
            softmax_temperature: None,
            qlearn_rate: None,
            depth_cap: None,
            lazy_sampling: false,
            learn_from_unqueried: false,
            prior: Prior::default(),
        }
    }

    fn to_agent(&self, base: PlannerConfig) -> BayesAgentConfig {
        let mut planner = base;
        if let Some(k) = self.expansion_threshold {
            planner.expansion_threshold = k;
        }
        if let Some(t) = self.softmax_temperature {
            planner.softmax_temperature = t;
        }
        if let Some(a) = self.qlearn_rate {
            planner.qlearn_rate = a;
        }
        planner.lazy_sampling = self.lazy_sampling;
        planner.learn_from_unqueried = self.learn_from_unqueried;
        BayesAgentConfig {
            planner,
            prior: self.prior,
            depth_cap: self.depth_cap,
        }
    }
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_learn_rate() -> f64 {
    0.2
}

fn default_discount() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_learn_rate")]
    pub learn_rate: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            epsilon: default_epsilon(),
            learn_rate: default_learn_rate(),
            discount: default_discount(),
        }
    }
}

/// Which agent to run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    Bamcp(PlannerParams),
    BamcpPp(PlannerParams),
    /// ε-greedy over joint (query, action) pairs.
    Egreedy(LearnerParams),
    FirstN {
        n: u32,
        #[serde(default)]
        learner: LearnerParams,
    },
    Mcch {
        mu: f64,
        #[serde(default)]
        learner: LearnerParams,
    },
}

/// Resolved agent, ready to run.
#[derive(Clone, Debug, PartialEq)]
pub enum AgentConfig {
    Bayes(BayesAgentConfig),
    ModelFree(ModelFreeConfig),
}

impl AgentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AgentSpec::Bamcp(_) => "bamcp",
            AgentSpec::BamcpPp(_) => "bamcp_pp",
            AgentSpec::Egreedy(_) => "egreedy",
            AgentSpec::FirstN { .. } => "first_n",
            AgentSpec::Mcch { .. } => "mcch",
        }
    }

    pub fn resolve(&self, query_cost: f64) -> AgentConfig {
        let model_free = |l: &LearnerParams, heuristic| ModelFreeConfig {
            epsilon: l.epsilon,
            learn_rate: l.learn_rate,
            discount: l.discount,
            heuristic,
        };
        match self {
            AgentSpec::Bamcp(p) => AgentConfig::Bayes(p.to_agent(PlannerConfig::bamcp(
                p.simulations,
                p.ucb_constant,
                query_cost,
            ))),
            AgentSpec::BamcpPp(p) => AgentConfig::Bayes(p.to_agent(PlannerConfig::bamcp_pp(
                p.simulations,
                p.ucb_constant,
                query_cost,
            ))),
            AgentSpec::Egreedy(l) => AgentConfig::ModelFree(model_free(l, QueryHeuristic::None)),
            AgentSpec::FirstN { n, learner } => {
                AgentConfig::ModelFree(model_free(learner, QueryHeuristic::FirstN { n: *n }))
            }
            AgentSpec::Mcch { mu, learner } => {
                AgentConfig::ModelFree(model_free(learner, QueryHeuristic::Mcch { mu: *mu }))
            }
        }
    }

    /// Sets a named hyperparameter, as used by gridsearch.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let agent = self.name();
        let bad = || ArlError::Config(format!("agent `{agent}` has no grid parameter `{name}`"));
        let as_count = |v: f64| -> Result<u64> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as u64)
            } else {
                Err(ArlError::Config(format!(
                    "`{name}` must be a whole number, got {v}"
                )))
            }
        };
        match self {
            AgentSpec::Bamcp(p) | AgentSpec::BamcpPp(p) => match name {
                "simulations" => p.simulations = as_count(value)? as usize,
                "ucb_constant" => p.ucb_constant = value,
                "expansion_threshold" => p.expansion_threshold = Some(as_count(value)? as u32),
                "softmax_temperature" => p.softmax_temperature = Some(value),
                "qlearn_rate" => p.qlearn_rate = Some(value),
                _ => return Err(bad()),
            },
            AgentSpec::Egreedy(l) => set_learner(l, name, value).ok_or_else(bad)?,
            AgentSpec::FirstN { n, learner } => {
                if name == "n" {
                    *n = as_count(value)? as u32;
                } else {
                    set_learner(learner, name, value).ok_or_else(bad)?;
                }
            }
            AgentSpec::Mcch { mu, learner } => {
                if name == "mu" {
                    *mu = value;
                } else {
                    set_learner(learner, name, value).ok_or_else(bad)?;
                }
            }
        }
        Ok(())
    }
}

fn set_learner(l: &mut LearnerParams, name: &str, value: f64) -> Option<()> {
    match name {
        "epsilon" => l.epsilon = value,
        "learn_rate" => l.learn_rate = value,
        "discount" => l.discount = value,
        _ => return None,
    }
    Some(())
}

/// A full experiment: one environment family, one agent, a grid of
/// horizons and a number of seeded replicates per horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Overrides the task label in summaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub master_seed: u64,
    pub replicates: usize,
    /// Bandit trials, or episodes for episodic MDPs.
    pub horizons: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub environment: EnvSpec,
    pub agent: AgentSpec,
    /// Run replicates on the rayon pool.
    #[serde(default = "default_true")]
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn new(
        environment: EnvSpec,
        agent: AgentSpec,
        horizon: usize,
        replicates: usize,
        master_seed: u64,
    ) -> Self {
        ExperimentConfig {
            name: None,
            master_seed,
            replicates,
            horizons: vec![horizon],
            out_dir: None,
            environment,
            agent,
            parallel: true,
        }
    }

    pub fn task_label(&self, horizon: usize) -> String {
        let base = self
            .name
            .clone()
            .unwrap_or_else(|| self.environment.label());
        format!("{base}/h{horizon}")
    }

    /// Checks the config, including that the agent can run on the
    /// environment.
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(ArlError::Config(
                "replicate count must be at least 1".into(),
            ));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(ArlError::Config(
                "horizons must be a nonempty list of positive values".into(),
            ));
        }
        let probe = self.environment.build(1, self.master_seed, 0)?;
        match self.agent.resolve(probe.query_cost) {
            AgentConfig::Bayes(cfg) => {
                cfg.prior.validate()?;
                cfg.planner.validate()?;
            }
            AgentConfig::ModelFree(cfg) => {
                cfg.validate()?;
                if self.environment.is_regular_rl() {
                    return Err(ArlError::InvalidCombination {
                        agent: self.agent.name().into(),
                        env: self.environment.family().into(),
                        reason: "model-free learners only train on queried rewards, and this benchmark has no queries"
                            .into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ArlError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| ArlError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ArlError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
master_seed = 7
replicates = 4
horizons = [10, 20]

[environment]
family = "late_fork"
chain_len = 2
query_cost = 0.5

[agent]
kind = "bamcp_pp"
simulations = 2000
ucb_constant = 3.0
expansion_threshold = 4
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.horizons, vec![10, 20]);
        assert!(cfg.parallel);
        let AgentSpec::BamcpPp(p) = &cfg.agent else {
            panic!("wrong agent")
        };
        assert_eq!(p.expansion_threshold, Some(4));
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn round_trips_every_agent() {
        let agents = [
            AgentSpec::Bamcp(PlannerParams::new(10, 1.0)),
            AgentSpec::Egreedy(LearnerParams::default()),
            AgentSpec::FirstN {
                n: 3,
                learner: LearnerParams::default(),
            },
            AgentSpec::Mcch {
                mu: 2.0,
                learner: LearnerParams::default(),
            },
        ];
        let env = EnvSpec::Random {
            num_states: 5,
            num_actions: 3,
            reward_alpha: 0.5,
            transition_alpha: 0.2,
            query_cost: 1.0,
        };
        for agent in agents {
            let cfg = ExperimentConfig::new(env.clone(), agent, 10, 2, 1);
            let text = cfg.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg, "{text}");
        }
    }

    #[test]
    fn unknown_family_is_rejected() {
        let text = SAMPLE.replace("late_fork", "gridworld");
        assert!(matches!(
            ExperimentConfig::from_toml(&text),
            Err(ArlError::Config(_))
        ));
    }

    #[test]
    fn zero_replicates_is_rejected() {
        let text = SAMPLE.replace("replicates = 4", "replicates = 0");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn model_free_on_regular_rl_is_rejected() {
        let cfg = ExperimentConfig::new(
            EnvSpec::DoubleLoop { loop_len: 4 },
            AgentSpec::Egreedy(LearnerParams::default()),
            5,
            1,
            0,
        );
        assert!(matches!(
            cfg.validate(),
            Err(ArlError::InvalidCombination { .. })
        ));
    }

    #[test]
    fn set_param_targets_named_fields() {
        let mut agent = AgentSpec::FirstN {
            n: 1,
            learner: LearnerParams::default(),
        };
        agent.set_param("n", 4.0).unwrap();
        agent.set_param("epsilon", 0.3).unwrap();
        assert!(agent.set_param("n", 1.5).is_err());
        assert!(agent.set_param("ucb_constant", 1.0).is_err());
        let AgentSpec::FirstN { n, learner } = agent else {
            unreachable!()
        };
        assert_eq!((n, learner.epsilon), (4, 0.3));
    }

    #[test]
    fn random_family_resamples_per_replicate() {
        let env = EnvSpec::Random {
            num_states: 3,
            num_actions: 2,
            reward_alpha: 0.5,
            transition_alpha: 0.2,
            query_cost: 1.0,
        };
        let a = env.build(5, 9, 0).unwrap();
        let b = env.build(5, 9, 1).unwrap();
        assert_eq!(a, env.build(5, 9, 0).unwrap());
        assert_ne!(a.mdp.reward_param, b.mdp.reward_param);
    }
}
