use std::sync::Arc;

use super::*;
use crate::belief::{BeliefState, Prior, RewardBelief};
use crate::env::{late_fork_with_rewards, make_bandit, ArlProblem, ForkRewards};
use crate::oracle::bayes_optimal_bandit;
use crate::rng::seeded;

const ROOT: RootState = RootState {
    state: 0,
    episode_step: 0,
};

fn bandit_belief(trials: usize) -> (ArlProblem, BeliefState) {
    let problem = make_bandit(&[0.2, 0.8], trials, 0.5).unwrap();
    let belief = BeliefState::new(&problem, Prior::default()).unwrap();
    (problem, belief)
}

fn pinned_bandit(p: f64) -> BeliefState {
    let problem = make_bandit(&[p, p], 3, 0.5).unwrap();
    let mut belief = BeliefState::new(&problem, Prior::default()).unwrap();
    belief.rewards = vec![RewardBelief::Known(p); 2];
    belief
}

fn q_table(belief: &BeliefState, seed: u64) -> QTable {
    QTable::random(Arc::clone(&belief.layout), &mut seeded(seed))
}

fn cfg(sims: usize, depth: usize) -> PlannerConfig {
    PlannerConfig {
        max_depth: depth,
        ..PlannerConfig::bamcp_pp(sims, 1.0, 0.5)
    }
}

#[test]
fn zero_simulations_is_an_error() {
    let (_, belief) = bandit_belief(3);
    let err = search(
        ROOT,
        &belief,
        &q_table(&belief, 0),
        &cfg(0, 2),
        &mut seeded(0),
    )
    .unwrap_err();
    assert!(matches!(err, crate::error::ArlError::ZeroSimulations));
}

#[test]
fn last_step_never_queries() {
    let (_, belief) = bandit_belief(1);
    for seed in 0..10 {
        let act = search(
            ROOT,
            &belief,
            &q_table(&belief, seed),
            &cfg(2000, 0),
            &mut seeded(seed),
        )
        .unwrap();
        assert!(!act.query);
    }
}

#[test]
fn query_step_contributes_reward_minus_cost() {
    let belief = pinned_bandit(1.0);
    let mut planner = Planner::new(cfg(200, 0)).unwrap();
    planner
        .search(ROOT, &belief, &q_table(&belief, 1), &mut seeded(2))
        .unwrap();
    for e in planner.root_stats() {
        assert!(e.visits > 0);
        let expect = if e.pair.query { 0.5 } else { 1.0 };
        assert_eq!(e.q, expect);
    }
}

#[test]
fn zero_reward_model_returns_only_costs() {
    let belief = pinned_bandit(0.0);
    let mut planner = Planner::new(cfg(3000, 4)).unwrap();
    planner
        .search(ROOT, &belief, &q_table(&belief, 1), &mut seeded(3))
        .unwrap();
    for e in planner.root_stats() {
        assert!(e.q <= 0.0 && e.q >= -2.5);
        if e.pair.query {
            assert!(e.q <= -0.5);
        } else {
            assert!(e.q > -2.5);
        }
    }
    let silent_best = planner
        .root_stats()
        .iter()
        .filter(|e| !e.pair.query)
        .map(|e| e.q)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(planner.root_value(), silent_best);
}

#[test]
fn search_is_deterministic() {
    let (_, belief) = bandit_belief(6);
    let q = q_table(&belief, 4);
    let run = || {
        let mut planner = Planner::new(cfg(5000, 5)).unwrap();
        let act = planner.search(ROOT, &belief, &q, &mut seeded(99)).unwrap();
        (act, planner.root_table_csv())
    };
    assert_eq!(run(), run());
}

#[test]
fn one_node_per_simulation_without_delay() {
    let (_, belief) = bandit_belief(50);
    let mut planner = Planner::new(PlannerConfig {
        max_depth: 49,
        ..PlannerConfig::bamcp(300, 1.0, 0.5)
    })
    .unwrap();
    planner
        .search(ROOT, &belief, &q_table(&belief, 0), &mut seeded(1))
        .unwrap();
    assert_eq!(planner.tree().num_nodes(), 301);
    let tree = planner.tree();
    for id in 0..tree.num_nodes() as NodeId {
        let node = tree.node(id);
        assert!(node.is_expanded());
        let edge_visits: u32 = tree.edges_of(id).iter().map(|e| e.stats.visits).sum();
        assert_eq!(node.visits, edge_visits);
    }
}

#[test]
fn delayed_expansion_accumulates_threshold_rollouts() {
    let (_, belief) = bandit_belief(20);
    let mut planner = Planner::new(PlannerConfig {
        max_depth: 19,
        expansion_threshold: 5,
        ..PlannerConfig::bamcp_pp(2000, 1.0, 0.5)
    })
    .unwrap();
    planner
        .search(ROOT, &belief, &q_table(&belief, 0), &mut seeded(1))
        .unwrap();
    let tree = planner.tree();
    let mut expanded = 0;
    for id in 1..tree.num_nodes() as NodeId {
        let node = tree.node(id);
        if node.is_expanded() {
            expanded += 1;
            assert_eq!(node.pending_rollouts(), 5);
        } else {
            assert!(node.pending_rollouts() < 5);
        }
    }
    assert!(expanded > 10);
}

#[test]
fn query_edges_branch_on_reward() {
    let (_, belief) = bandit_belief(4);
    let mut planner = Planner::new(cfg(4000, 3)).unwrap();
    planner
        .search(ROOT, &belief, &q_table(&belief, 0), &mut seeded(5))
        .unwrap();
    let tree = planner.tree();
    let mut saw_branching = false;
    for id in 0..tree.num_nodes() as NodeId {
        for e in tree.edges_of(id) {
            let keys: Vec<u32> = e.children().iter().map(|&(k, _)| k).collect();
            if e.pair.query {
                assert!(keys
                    .iter()
                    .all(|&k| k == child_key(e.pair, true, 0) || k == child_key(e.pair, false, 0)));
                saw_branching |= keys.len() == 2;
            } else {
                assert!(keys.len() <= 1);
            }
        }
    }
    assert!(saw_branching);
}

#[test]
fn rollout_on_forced_chain_sums_rewards() {
    let rewards = ForkRewards {
        fork: [1.0, 1.0],
        chain: vec![1.0, 1.0, 1.0],
    };
    let problem = late_fork_with_rewards(3, &rewards, 0.5, 5, true).unwrap();
    let pinned = ArlProblem {
        known_rewards: true,
        ..problem
    };
    let belief = BeliefState::new(&pinned, Prior::default()).unwrap();
    let sampler = ModelSampler::new(&belief);
    let mut model = SimModel::new(Arc::clone(&belief.layout), false);
    let mut rng = seeded(0);
    model.resample(&sampler, &mut rng);
    let q = q_table(&belief, 1);
    let ret = rollout(
        &belief.layout,
        &mut model,
        &sampler,
        &q,
        0,
        0,
        0,
        9,
        0.1,
        &mut rng,
    );
    assert_eq!(ret, 10.0);
}

#[test]
fn traced_search_records_checkpoints() {
    let (_, belief) = bandit_belief(5);
    let mut planner = Planner::new(cfg(1000, 4)).unwrap();
    let (_, snaps) = planner
        .search_traced(
            ROOT,
            &belief,
            &q_table(&belief, 0),
            &[10, 100, 1000],
            &mut seeded(0),
        )
        .unwrap();
    assert_eq!(
        snaps.iter().map(|s| s.simulations).collect::<Vec<_>>(),
        vec![10, 100, 1000]
    );
    assert!(snaps[2].query_q.is_some() && snaps[2].silent_q.is_some());
}

#[test]
fn two_step_bandit_matches_oracle() {
    let problem = make_bandit(&[0.2, 0.8], 2, 0.05).unwrap();
    let belief = BeliefState::new(&problem, Prior::default()).unwrap();
    let exact = bayes_optimal_bandit(&[(0.5, 0.5), (0.5, 0.5)], 2, 0.05).unwrap();
    let config = PlannerConfig {
        max_depth: 1,
        ..PlannerConfig::bamcp_pp(100_000, 1.0, 0.05)
    };
    let mut planner = Planner::new(config).unwrap();
    let act = planner
        .search(ROOT, &belief, &q_table(&belief, 7), &mut seeded(7))
        .unwrap();
    assert!(
        (planner.root_value() - exact.value).abs() < 0.05,
        "{}",
        planner.root_value()
    );
    assert!(exact.is_optimal_first_action(act));
}

#[test]
fn lazy_and_eager_sampling_agree_in_law() {
    use crate::env::sample_random_mdp;
    let mdp = sample_random_mdp(4, 2, 0.5, 0.5, &mut seeded(1)).unwrap();
    let problem = ArlProblem::new(mdp, 0.5, 2, false, false).unwrap();
    let mut belief = BeliefState::new(&problem, Prior::new(2.0, 1.0, 0.5).unwrap()).unwrap();
    if let crate::belief::TransitionBelief::Dirichlet(c) = &mut belief.transitions[3] {
        c[2] += 3.0;
    }
    let sampler = ModelSampler::new(&belief);
    let mut eager = SimModel::new(Arc::clone(&belief.layout), false);
    let mut lazy = SimModel::new(Arc::clone(&belief.layout), true);
    let mut rng = seeded(11);
    let n = 50_000;
    let (mut e_row, mut l_row) = (vec![0.0; 4], vec![0.0; 4]);
    let (mut e_rew, mut l_rew) = (0.0, 0.0);
    for _ in 0..n {
        eager.resample(&sampler, &mut rng);
        lazy.resample(&sampler, &mut rng);
        // Touch other pairs first so the lazy draw order differs.
        lazy.step(&sampler, 0, 0, &mut rng);
        lazy.step(&sampler, 2, 1, &mut rng);
        let (row, r) = eager.pair(&sampler, 1, 1, &mut rng);
        e_row.iter_mut().zip(&row).for_each(|(a, b)| *a += b);
        e_rew += r;
        let (row, r) = lazy.pair(&sampler, 1, 1, &mut rng);
        l_row.iter_mut().zip(&row).for_each(|(a, b)| *a += b);
        l_rew += r;
    }
    let expect = belief.transitions[3].mean();
    for i in 0..4 {
        let (e, l) = (e_row[i] / n as f64, l_row[i] / n as f64);
        assert!(
            (e - expect[i]).abs() < 0.01 && (l - expect[i]).abs() < 0.01,
            "{e} {l} {}",
            expect[i]
        );
    }
    assert!((e_rew / n as f64 - 2.0 / 3.0).abs() < 0.01);
    assert!((l_rew / n as f64 - 2.0 / 3.0).abs() < 0.01);
}

#[test]
fn bayes_agent_plays_full_horizon() {
    let problem = make_bandit(&[0.2, 0.8], 6, 0.5).unwrap();
    let cfg = BayesAgentConfig {
        planner: PlannerConfig::bamcp_pp(500, 1.0, 0.5),
        prior: Prior::default(),
        depth_cap: None,
    };
    let trace = run_bayes_agent(&problem, &cfg, &mut seeded(1), &mut seeded(2)).unwrap();
    assert_eq!(trace.len(), 6);
    let again = run_bayes_agent(&problem, &cfg, &mut seeded(1), &mut seeded(2)).unwrap();
    assert_eq!(trace, again);
}

#[test]
fn more_simulations_do_not_hurt_on_two_step_bandit() {
    let problem = make_bandit(&[0.2, 0.8], 2, 0.05).unwrap();
    let belief = BeliefState::new(&problem, Prior::default()).unwrap();
    let exact = bayes_optimal_bandit(&[(0.5, 0.5), (0.5, 0.5)], 2, 0.05)
        .unwrap()
        .value;
    let mean_error = |sims: usize| {
        (0..20u64)
            .map(|seed| {
                let mut planner = Planner::new(PlannerConfig {
                    max_depth: 1,
                    ..PlannerConfig::bamcp_pp(sims, 1.0, 0.05)
                })
                .unwrap();
                planner
                    .search(ROOT, &belief, &q_table(&belief, seed), &mut seeded(seed))
                    .unwrap();
                (planner.root_value() - exact).abs()
            })
            .sum::<f64>()
            / 20.0
    };
    let (coarse, fine) = (mean_error(10_000), mean_error(100_000));
    assert!(fine <= coarse, "{fine} > {coarse}");
}
