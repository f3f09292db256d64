//! Exhaustive hyperparameter search.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{ArlError, Result};

use super::config::ExperimentConfig;
use super::run::run_experiment;
use super::stats::mean_sd;

/// Candidate values per named parameter.
pub type ParamGrid = BTreeMap<String, Vec<f64>>;

/// One assignment of every grid parameter, ordered by name.
pub type GridPoint = Vec<(String, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub struct GridEvaluation {
    pub point: GridPoint,
    pub mean_return: f64,
    pub mean_queries: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    pub best: GridEvaluation,
    /// Every evaluation, in grid enumeration order.
    pub evaluations: Vec<GridEvaluation>,
}

/// Cartesian product of the grid, last parameter varying fastest.
pub fn grid_points(grid: &ParamGrid) -> Result<Vec<GridPoint>> {
    if grid.is_empty() || grid.values().any(Vec::is_empty) {
        return Err(ArlError::EmptyGrid);
    }
    let mut points: Vec<GridPoint> = vec![Vec::new()];
    for (name, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((name.clone(), v));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

/// Higher return wins, then fewer queries, then the lexicographically
/// smaller point.
fn better(a: &GridEvaluation, b: &GridEvaluation) -> bool {
    let by_values = || {
        a.point
            .iter()
            .zip(&b.point)
            .map(|(x, y)| x.1.total_cmp(&y.1))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    };
    match a.mean_return.total_cmp(&b.mean_return) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match a.mean_queries.total_cmp(&b.mean_queries) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => by_values().is_lt(),
        },
    }
}

/// Evaluates every grid point with `evaluate`, which returns
/// (mean return, mean queries).
pub fn gridsearch_with<F>(grid: &ParamGrid, mut evaluate: F) -> Result<GridResult>
where
    F: FnMut(&GridPoint) -> Result<(f64, f64)>,
{
    let mut evaluations = Vec::new();
    for point in grid_points(grid)? {
        let (mean_return, mean_queries) = evaluate(&point)?;
        evaluations.push(GridEvaluation {
            point,
            mean_return,
            mean_queries,
        });
    }
    let mut best = &evaluations[0];
    for e in &evaluations[1..] {
        if better(e, best) {
            best = e;
        }
    }
    Ok(GridResult {
        best: best.clone(),
        evaluations,
    })
}

/// Applies a grid point to the agent hyperparameters of `task`.
pub fn apply_point(task: &ExperimentConfig, point: &GridPoint) -> Result<ExperimentConfig> {
    let mut cfg = task.clone();
    for (name, value) in point {
        cfg.agent.set_param(name, *value)?;
    }
    Ok(cfg)
}

/// Runs the full experiment at every grid point (same seeds and replicate
/// budget each time) and keeps the point with the best mean return.
pub fn gridsearch(grid: &ParamGrid, task: &ExperimentConfig) -> Result<GridResult> {
    gridsearch_with(grid, |point| {
        let records = run_experiment(&apply_point(task, point)?)?;
        let returns: Vec<f64> = records.iter().map(|r| r.total_return).collect();
        let queries: Vec<f64> = records.iter().map(|r| r.num_queries as f64).collect();
        let (mean_return, _) = mean_sd(&returns).unwrap_or_default();
        let (mean_queries, _) = mean_sd(&queries).unwrap_or_default();
        Ok((mean_return, mean_queries))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(entries: &[(&str, &[f64])]) -> ParamGrid {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_vec()))
            .collect()
    }

    #[test]
    fn empty_grid_errors() {
        assert!(matches!(
            grid_points(&ParamGrid::new()),
            Err(ArlError::EmptyGrid)
        ));
        assert!(matches!(
            grid_points(&grid(&[("u", &[])])),
            Err(ArlError::EmptyGrid)
        ));
    }

    #[test]
    fn singleton_grid_returns_its_point() {
        let r = gridsearch_with(&grid(&[("u", &[3.0])]), |_| Ok((1.0, 0.0))).unwrap();
        assert_eq!(r.best.point, vec![("u".to_string(), 3.0)]);
    }

    #[test]
    fn product_order() {
        let pts = grid_points(&grid(&[("a", &[1.0, 2.0]), ("b", &[5.0, 6.0])])).unwrap();
        let flat: Vec<(f64, f64)> = pts.iter().map(|p| (p[0].1, p[1].1)).collect();
        assert_eq!(flat, vec![(1.0, 5.0), (1.0, 6.0), (2.0, 5.0), (2.0, 6.0)]);
    }

    #[test]
    fn ties_prefer_fewer_queries_then_smaller_point() {
        let g = grid(&[("u", &[1.0, 3.0, 10.0])]);
        let r = gridsearch_with(&g, |p| Ok((2.0, if p[0].1 == 10.0 { 0.5 } else { 1.0 }))).unwrap();
        assert_eq!(r.best.point[0].1, 10.0);
        let r = gridsearch_with(&g, |_| Ok((2.0, 1.0))).unwrap();
        assert_eq!(r.best.point[0].1, 1.0);
        let r = gridsearch_with(&g, |p| Ok((p[0].1.min(3.0), 1.0))).unwrap();
        assert_eq!(r.best.point[0].1, 3.0);
    }
}
