use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use arl_core::harness::{
    emit_experiment, gridsearch, root_trace, run_experiment, summarize, write_root_trace,
    AgentConfig, AgentSpec, EnvSpec, ExperimentConfig, LearnerParams, ParamGrid, PlannerParams,
};
use arl_core::oracle::{
    bayes_optimal_bandit_capped, optimal_query_structure_check, DEFAULT_TRIAL_CAP,
};

/// Bayesian active reinforcement learning experiments.
#[derive(Parser)]
#[command(name = "arl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-arm (or k-arm) Bernoulli bandit with query costs.
    Bandit {
        /// Arm success probabilities.
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.8")]
        arms: Vec<f64>,
        /// Also write root Q estimates of the first search after each of
        /// these simulation counts to root_trace.csv.
        #[arg(long, value_delimiter = ',')]
        root_trace: Vec<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Late or Early Fork chain MDPs.
    Fork {
        #[arg(long, value_enum, default_value_t = ForkVariant::Late)]
        variant: ForkVariant,
        /// Chain length N.
        #[arg(long, default_value_t = 2)]
        chain_len: usize,
        #[arg(long)]
        known_transitions: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Double-Loop, a regular RL benchmark (rewards always observed).
    DoubleLoop {
        #[arg(long, default_value_t = 4)]
        loop_len: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// MDPs drawn from the generating prior, one per replicate.
    Random {
        #[arg(long, default_value_t = 5)]
        states: usize,
        #[arg(long, default_value_t = 3)]
        actions: usize,
        #[arg(long, default_value_t = 0.5)]
        reward_alpha: f64,
        #[arg(long, default_value_t = 0.2)]
        transition_alpha: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Exact Bayes-optimal value of a Bernoulli bandit under a Beta prior.
    Oracle {
        #[arg(long, default_value_t = 6)]
        horizon: usize,
        #[arg(long, default_value_t = 0.05)]
        cost: f64,
        /// Beta prior pseudo-counts (alpha,beta), shared by every arm.
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.5")]
        prior: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        num_arms: usize,
        #[arg(long, default_value_t = DEFAULT_TRIAL_CAP)]
        trial_cap: usize,
        /// Write oracle.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive hyperparameter search over an experiment config.
    Gridsearch {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Grid axis as `name=v1,v2,...`; repeatable.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Write grid.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ForkVariant {
    Late,
    Early,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentKind {
    Bamcp,
    BamcpPp,
    Egreedy,
    FirstN,
    Mcch,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value_t = AgentKind::BamcpPp)]
    agent: AgentKind,
    /// Horizon grid: trials for bandits, episodes otherwise.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    horizon: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    cost: f64,
    /// Simulations per planning step.
    #[arg(long, default_value_t = 10_000)]
    sims: usize,
    #[arg(long, default_value_t = 3.0)]
    ucb: f64,
    /// Delayed-expansion threshold (BAMCP++).
    #[arg(long)]
    expansion_threshold: Option<u32>,
    /// Boltzmann temperature of the rollout policy.
    #[arg(long)]
    temperature: Option<f64>,
    /// Learning rate of the rollout Q-learner.
    #[arg(long)]
    qlearn_rate: Option<f64>,
    /// Let the rollout Q-learner also learn from unqueried simulated rewards.
    #[arg(long)]
    learn_unqueried: bool,
    /// Cap on the search depth.
    #[arg(long)]
    depth_cap: Option<usize>,
    /// First-N query budget per state-action pair.
    #[arg(long, default_value_t = 1)]
    first_n: u32,
    /// MCCH cost multiplier.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Output directory for the CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Experiment config (TOML). Its environment family must match the
    /// subcommand; --seed, --replicates and --out override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run replicates on one thread.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn agent_spec(&self) -> AgentSpec {
        let planner = PlannerParams {
            expansion_threshold: self.expansion_threshold,
            softmax_temperature: self.temperature,
            qlearn_rate: self.qlearn_rate,
            learn_from_unqueried: self.learn_unqueried,
            depth_cap: self.depth_cap,
            ..PlannerParams::new(self.sims, self.ucb)
        };
        let learner = LearnerParams {
            epsilon: self.epsilon,
            ..LearnerParams::default()
        };
        match self.agent {
            AgentKind::Bamcp => AgentSpec::Bamcp(planner),
            AgentKind::BamcpPp => AgentSpec::BamcpPp(planner),
            AgentKind::Egreedy => AgentSpec::Egreedy(learner),
            AgentKind::FirstN => AgentSpec::FirstN {
                n: self.first_n,
                learner,
            },
            AgentKind::Mcch => AgentSpec::Mcch {
                mu: self.mu,
                learner,
            },
        }
    }

    fn experiment(&self, env: EnvSpec) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let cfg = ExperimentConfig::load(path)?;
                if cfg.environment.family() != env.family() {
                    bail!(
                        "config {} describes a {} experiment, not {}",
                        path.display(),
                        cfg.environment.family(),
                        env.family()
                    );
                }
                cfg
            }
            None => {
                let mut cfg = ExperimentConfig::new(env, self.agent_spec(), 1, 10, 0);
                cfg.horizons = self.horizon.clone();
                cfg
            }
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(r) = self.replicates {
            cfg.replicates = r;
        }
        if self.out.is_some() {
            cfg.out_dir = self.out.clone();
        }
        if self.sequential {
            cfg.parallel = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(args: &RunArgs, env: EnvSpec) -> Result<ExperimentConfig> {
    let cfg = args.experiment(env)?;
    let records = run_experiment(&cfg)?;
    println!("task,agent,mean_return,sd_return,mean_queries");
    for s in summarize(&records)? {
        println!(
            "{},{},{:.4},{:.4},{:.3}",
            s.task, s.agent, s.mean_return, s.sd_return, s.mean_queries
        );
    }
    if let Some(dir) = &cfg.out_dir {
        emit_experiment(&records, dir)?;
        let text = ExperimentConfig {
            out_dir: None,
            ..cfg.clone()
        }
        .to_toml()?;
        write_file(&dir.join("config.toml"), &text)?;
    }
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parse_axis(spec: &str) -> Result<(String, Vec<f64>)> {
    let (name, values) = spec
        .split_once('=')
        .with_context(|| format!("grid axis `{spec}` is not of the form name=v1,v2"))?;
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("bad grid value `{v}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((name.trim().to_string(), values))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bandit {
            arms,
            root_trace: checkpoints,
            run: args,
        } => {
            let env = EnvSpec::Bandit {
                arm_means: arms,
                query_cost: args.cost,
            };
            let cfg = run(&args, env)?;
            if !checkpoints.is_empty() {
                let horizon = cfg.horizons[0];
                let problem = cfg.environment.build(horizon, cfg.master_seed, 0)?;
                let AgentConfig::Bayes(agent) = cfg.agent.resolve(problem.query_cost) else {
                    bail!("--root-trace needs a Bayesian agent");
                };
                let snaps = root_trace(&problem, &agent, &checkpoints, cfg.master_seed)?;
                let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
                write_root_trace(&snaps, &dir.join("root_trace.csv"))?;
            }
        }
        Command::Fork {
            variant,
            chain_len,
            known_transitions,
            run: args,
        } => {
            let env = match variant {
                ForkVariant::Late => EnvSpec::LateFork {
                    chain_len,
                    query_cost: args.cost,
                    known_transitions,
                    rewards: None,
                },
                ForkVariant::Early => EnvSpec::EarlyFork {
                    chain_len,
                    query_cost: args.cost,
                    known_transitions,
                    rewards: None,
                },
            };
            run(&args, env)?;
        }
        Command::DoubleLoop {
            loop_len,
            run: args,
        } => {
            run(&args, EnvSpec::DoubleLoop { loop_len })?;
        }
        Command::Random {
            states,
            actions,
            reward_alpha,
            transition_alpha,
            run: args,
        } => {
            let env = EnvSpec::Random {
                num_states: states,
                num_actions: actions,
                reward_alpha,
                transition_alpha,
                query_cost: args.cost,
            };
            run(&args, env)?;
        }
        Command::Oracle {
            horizon,
            cost,
            prior,
            num_arms,
            trial_cap,
            out,
        } => {
            let [a, b] = prior[..] else {
                bail!("--prior takes exactly two values");
            };
            let sol =
                bayes_optimal_bandit_capped(&vec![(a, b); num_arms], horizon, cost, trial_cap)?;
            let structured = optimal_query_structure_check(&sol)?;
            let actions: Vec<String> = sol
                .optimal_first_actions
                .iter()
                .map(|p| format!("({},{})", p.indicator(), p.action))
                .collect();
            let mut text = String::from(
                "horizon,query_cost,value,optimal_first_actions,queries_precede_silent\n",
            );
            text.push_str(&format!(
                "{horizon},{cost},{},{},{structured}\n",
                sol.value,
                actions.join(" ")
            ));
            print!("{text}");
            if let Some(dir) = out {
                write_file(&dir.join("oracle.csv"), &text)?;
            }
        }
        Command::Gridsearch {
            config,
            params,
            seed,
            replicates,
            out,
        } => {
            let mut task = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                task.master_seed = s;
            }
            if let Some(r) = replicates {
                task.replicates = r;
            }
            let grid: ParamGrid = params
                .iter()
                .map(|p| parse_axis(p))
                .collect::<Result<BTreeMap<_, _>>>()?;
            let result = gridsearch(&grid, &task)?;
            let names: Vec<&str> = grid.keys().map(String::as_str).collect();
            let mut text = format!("{},mean_return,mean_queries\n", names.join(","));
            for e in &result.evaluations {
                let values: Vec<String> = e.point.iter().map(|(_, v)| v.to_string()).collect();
                text.push_str(&format!(
                    "{},{},{}\n",
                    values.join(","),
                    e.mean_return,
                    e.mean_queries
                ));
            }
            print!("{text}");
            let best: Vec<String> = result
                .best
                .point
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            println!("best: {}", best.join(" "));
            if let Some(dir) = out {
                write_file(&dir.join("grid.csv"), &text)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
