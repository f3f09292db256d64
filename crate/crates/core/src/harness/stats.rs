//! Query-frequency curves and return summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ArlError, Result};

use super::run::RunRecord;

/// Fraction of records that queried at each timestep.
pub fn query_frequency_curve(records: &[RunRecord]) -> Result<Vec<f64>> {
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    let len = first.len();
    let mut counts = vec![0usize; len];
    for rec in records {
        if rec.len() != len {
            return Err(ArlError::RaggedHorizons {
                expected: len,
                found: rec.len(),
            });
        }
        for (c, row) in counts.iter_mut().zip(&rec.rows) {
            *c += usize::from(row.query);
        }
    }
    let n = records.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Mean and sample standard deviation. A single value has SD 0.
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    // Sorting makes the result independent of input order.
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    if sorted.len() == 1 {
        return Some((mean, 0.0));
    }
    let ss: f64 = sorted.iter().map(|v| (v - mean).powi(2)).sum();
    Some((mean, (ss / (n - 1.0)).sqrt()))
}

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: String,
    pub agent: String,
    pub mean_return: f64,
    pub sd_return: f64,
    pub mean_queries: f64,
}

/// Summarizes one group of records.
pub fn summarize_group(task: &str, agent: &str, records: &[&RunRecord]) -> Result<Summary> {
    let returns: Vec<f64> = records.iter().map(|r| r.total_return).collect();
    let (mean_return, sd_return) =
        mean_sd(&returns).ok_or_else(|| ArlError::EmptyGroup(format!("{task} / {agent}")))?;
    let queries: Vec<f64> = records.iter().map(|r| r.num_queries as f64).collect();
    let (mean_queries, _) = mean_sd(&queries).unwrap_or_default();
    Ok(Summary {
        task: task.to_string(),
        agent: agent.to_string(),
        mean_return,
        sd_return,
        mean_queries,
    })
}

/// Groups records by (task, agent) and summarizes each group. Groups come
/// out sorted by task, then agent.
pub fn summarize(records: &[RunRecord]) -> Result<Vec<Summary>> {
    let mut groups: BTreeMap<(&str, &str), Vec<&RunRecord>> = BTreeMap::new();
    for rec in records {
        groups.entry((&rec.task, &rec.agent)).or_default().push(rec);
    }
    groups
        .into_iter()
        .map(|((task, agent), recs)| summarize_group(task, agent, &recs))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::StepRow;

    fn record(task: &str, queries: &[u8], total_return: f64) -> RunRecord {
        let rows = queries
            .iter()
            .enumerate()
            .map(|(t, &q)| StepRow {
                replicate: 0,
                episode: t,
                step: t,
                state: 0,
                query: q,
                action: 0,
                observed_reward: (q == 1).then_some(0.0),
                true_reward: 0.0,
                cum_return: 0.0,
            })
            .collect();
        RunRecord {
            task: task.into(),
            agent: "a".into(),
            horizon: queries.len(),
            replicate: 0,
            query_cost: 1.0,
            rows,
            total_return,
            num_queries: queries.iter().map(|&q| q as usize).sum(),
        }
    }

    #[test]
    fn curve_examples() {
        let all_first = [record("t", &[1, 0, 0], 0.0), record("t", &[1, 1, 0], 0.0)];
        assert_eq!(
            query_frequency_curve(&all_first).unwrap(),
            vec![1.0, 0.5, 0.0]
        );
        let never = [record("t", &[0, 0], 0.0), record("t", &[0, 0], 0.0)];
        assert_eq!(query_frequency_curve(&never).unwrap(), vec![0.0, 0.0]);
        assert!(query_frequency_curve(&[]).unwrap().is_empty());
    }

    #[test]
    fn ragged_horizons_error() {
        let recs = [record("t", &[0, 0], 0.0), record("t", &[0], 0.0)];
        assert!(matches!(
            query_frequency_curve(&recs),
            Err(ArlError::RaggedHorizons {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn summary_arithmetic() {
        let recs: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&r| record("t", &[1, 0], r))
            .collect();
        let s = &summarize(&recs).unwrap()[0];
        assert_eq!(
            (s.mean_return, s.sd_return, s.mean_queries),
            (2.0, 1.0, 1.0)
        );
        let single = summarize(&recs[..1]).unwrap();
        assert_eq!(single[0].sd_return, 0.0);
    }

    #[test]
    fn groups_are_separated() {
        let recs = [
            record("b", &[0], 1.0),
            record("a", &[1], 5.0),
            record("b", &[0], 3.0),
        ];
        let s = summarize(&recs).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].task.as_str(), s[0].mean_return), ("a", 5.0));
        assert_eq!((s[1].task.as_str(), s[1].mean_return), ("b", 2.0));
    }

    #[test]
    fn empty_group_errors() {
        assert!(matches!(
            summarize_group("t", "a", &[]),
            Err(ArlError::EmptyGroup(_))
        ));
    }
}
