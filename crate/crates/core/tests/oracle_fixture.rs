use std::collections::HashMap;

use arl_core::env::ActionPair;
use arl_core::oracle::{bayes_optimal_bandit, BanditOracle, TIE_TOLERANCE};
use serde::Deserialize;

#[derive(Deserialize)]
struct Fixture {
    case: Vec<Case>,
}

#[derive(Deserialize)]
struct Case {
    trials: usize,
    query_cost: f64,
    value: f64,
    silent_q: f64,
    query_q: f64,
    optimal: Vec<[u8; 2]>,
}

fn fixture() -> Fixture {
    toml::from_str(include_str!("fixtures/bandit_oracle.toml")).unwrap()
}

/// Plain recursive expectimax over per-arm (alpha, beta) counts, keyed by
/// the counts as integers of half-units.
struct Naive {
    cost: f64,
    memo: HashMap<(Vec<(u32, u32)>, usize), f64>,
}

impl Naive {
    fn value(&mut self, halves: &[(u32, u32)], t: usize) -> f64 {
        if t == 0 {
            return 0.0;
        }
        if let Some(&v) = self.memo.get(&(halves.to_vec(), t)) {
            return v;
        }
        let best = self
            .action_values(halves, t)
            .into_iter()
            .map(|(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        self.memo.insert((halves.to_vec(), t), best);
        best
    }

    fn action_values(&mut self, halves: &[(u32, u32)], t: usize) -> Vec<((u8, usize), f64)> {
        let mut out = Vec::new();
        for (arm, &(a, b)) in halves.iter().enumerate() {
            let p = f64::from(a) / f64::from(a + b);
            let stay = self.value(halves, t - 1);
            out.push(((0, arm), p + stay));
            let mut win = halves.to_vec();
            win[arm].0 += 2;
            let mut lose = halves.to_vec();
            lose[arm].1 += 2;
            let q =
                p - self.cost + p * self.value(&win, t - 1) + (1.0 - p) * self.value(&lose, t - 1);
            out.push(((1, arm), q));
        }
        out
    }
}

#[test]
fn fixture_matches_naive_expectimax() {
    for case in fixture().case {
        let mut naive = Naive {
            cost: case.query_cost,
            memo: HashMap::new(),
        };
        let root = [(1, 1), (1, 1)];
        assert!((naive.value(&root, case.trials) - case.value).abs() < 1e-12);
        for ((i, _), q) in naive.action_values(&root, case.trials) {
            let expect = if i == 1 { case.query_q } else { case.silent_q };
            assert!((q - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn library_oracle_matches_fixture() {
    for case in fixture().case {
        let prior = [(0.5, 0.5), (0.5, 0.5)];
        let sol = bayes_optimal_bandit(&prior, case.trials, case.query_cost).unwrap();
        assert!(
            (sol.value - case.value).abs() < 1e-12,
            "T={} c={}",
            case.trials,
            case.query_cost
        );
        let mut expected: Vec<ActionPair> = case
            .optimal
            .iter()
            .map(|&[i, a]| ActionPair::new(i == 1, usize::from(a)))
            .collect();
        let mut got = sol.optimal_first_actions.clone();
        expected.sort_by_key(|p| (p.indicator(), p.action));
        got.sort_by_key(|p| (p.indicator(), p.action));
        assert_eq!(got, expected);

        let mut oracle = BanditOracle::new(case.query_cost, 16);
        for (pair, q) in oracle.action_values(&prior, case.trials).unwrap() {
            let expect = if pair.query {
                case.query_q
            } else {
                case.silent_q
            };
            assert!((q - expect).abs() < TIE_TOLERANCE);
        }
    }
}
