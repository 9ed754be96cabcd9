use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{FittedModel, Prediction};
use crate::data::MultiviewDataset;
use crate::error::{Error, Result};
use crate::optimizer::FitConfig;
use crate::outcome::Outcome;
use crate::prox::{GroupStructure, Penalty, SparseGroup};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Search {
    Grid,
    /// `k` distinct combinations drawn from the full grid.
    Random(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    /// Candidate `ρ` values, one list per view.
    pub rho_grid: Vec<Vec<f64>>,
    pub eta: f64,
    pub folds: usize,
    pub search: Search,
    pub seed: u64,
    /// Standardize each training fold's columns, as `fit_standardized` does.
    pub standardize: bool,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            rho_grid: Vec::new(),
            eta: 0.5,
            folds: 3,
            search: Search::Grid,
            seed: 0,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub rho: Vec<f64>,
    /// Held-out score per fold; `None` where the fit failed.
    pub fold_scores: Vec<Option<f64>>,
    /// Mean over folds; `None` if any fold failed.
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: Vec<f64>,
    pub best_score: f64,
    pub table: Vec<CvRow>,
}

impl CvPlan {
    fn total_combinations(&self) -> usize {
        self.rho_grid.iter().map(Vec::len).product()
    }

    fn validate(&self, n_views: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.rho_grid.len() != n_views {
            return bad(format!("{} rho grids for {n_views} views", self.rho_grid.len()));
        }
        if self.rho_grid.iter().any(Vec::is_empty) {
            return bad("every rho grid needs at least one value".into());
        }
        if self.rho_grid.iter().flatten().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return bad("rho values must be finite and >= 0".into());
        }
        if self.folds < 2 {
            return bad("at least two folds are required".into());
        }
        if let Search::Random(k) = self.search {
            if k == 0 || k > self.total_combinations() {
                return bad(format!(
                    "random search over {k} of {} combinations",
                    self.total_combinations()
                ));
            }
        }
        Ok(())
    }

    /// Candidate combinations in grid order (first view varies slowest).
    pub fn candidates(&self) -> Vec<Vec<f64>> {
        let total = self.total_combinations();
        let decode = |mut idx: usize| {
            let mut combo = vec![0.0; self.rho_grid.len()];
            for (d, grid) in self.rho_grid.iter().enumerate().rev() {
                combo[d] = grid[idx % grid.len()];
                idx /= grid.len();
            }
            combo
        };
        match self.search {
            Search::Grid => (0..total).map(decode).collect(),
            Search::Random(k) => {
                let mut rng = seed::rng(self.seed, "cv-search", 0);
                let mut picked = rand::seq::index::sample(&mut rng, total, k.min(total)).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(decode).collect()
            }
        }
    }
}

/// Fold index per sample. Categorical outcomes are stratified: each class is
/// shuffled and dealt round-robin, continuing the rotation across classes.
pub fn fold_assignment(outcome: &Outcome, folds: usize, seed_: u64) -> Vec<usize> {
    let n = outcome.len();
    let mut assignment = vec![0; n];
    let strata: Vec<Vec<usize>> = match outcome {
        Outcome::Categorical(labels) => {
            let mut by_class = vec![Vec::new(); labels.n_classes()];
            for (i, &l) in labels.labels().iter().enumerate() {
                by_class[l].push(i);
            }
            by_class
        }
        _ => vec![(0..n).collect()],
    };
    let mut next = 0;
    for (s, mut members) in strata.into_iter().enumerate() {
        let mut rng = seed::rng(seed_, "folds", s as u64);
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

/// Held-out error: mean squared error on the raw outcome scale, or the
/// misclassification rate.
pub fn held_out_error(truth: &Outcome, prediction: &Prediction) -> Result<f64> {
    let mismatch = || Error::DimensionMismatch("prediction kind does not match outcome".into());
    match (truth, prediction) {
        (Outcome::Continuous(y), Prediction::Continuous(p)) => {
            Ok((y - p).norm_squared() / y.len() as f64)
        }
        (Outcome::MultiContinuous(y), Prediction::MultiContinuous(p)) => {
            Ok((y - p).norm_squared() / y.len() as f64)
        }
        (Outcome::Categorical(labels), Prediction::Classes(c)) => {
            let wrong = labels.labels().iter().zip(c).filter(|(a, b)| a != b).count();
            Ok(wrong as f64 / c.len() as f64)
        }
        _ => Err(mismatch()),
    }
}

fn penalties_for(data: &MultiviewDataset, rho: &[f64], eta: f64) -> Result<Vec<Penalty>> {
    data.views
        .iter()
        .zip(&data.groups)
        .zip(rho)
        .map(|((x, groups), &rho)| {
            let groups = match groups {
                Some(g) => g.clone(),
                None => GroupStructure::from_labels(&(0..x.ncols()).collect::<Vec<_>>())?,
            };
            Ok(Penalty::SparseGroup(SparseGroup::new(rho, eta, groups)?))
        })
        .collect()
}

/// K-fold search over sparse-group `ρ` combinations. Views without a group
/// structure use one group per variable. A failed fold marks its
/// combination as failed rather than aborting the search.
pub fn cross_validate(data: &MultiviewDataset, plan: &CvPlan, config: &FitConfig) -> Result<CvResult> {
    plan.validate(data.n_views())?;
    let assignment = fold_assignment(&data.outcome, plan.folds, plan.seed);
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..plan.folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..data.n_samples()).partition(|&i| assignment[i] == f);
            (train, test)
        })
        .collect();
    if splits.iter().any(|(train, test)| train.is_empty() || test.is_empty()) {
        return Err(Error::InvalidConfig(format!(
            "{} samples cannot fill {} folds",
            data.n_samples(),
            plan.folds
        )));
    }

    let mut table = Vec::new();
    for rho in plan.candidates() {
        let penalties = penalties_for(data, &rho, plan.eta)?;
        let cfg = FitConfig {
            penalties,
            ..config.clone()
        };
        let mut fold_scores = Vec::with_capacity(plan.folds);
        let mut error = None;
        for (train, test) in &splits {
            let outcome = (|| {
                let subset = data.subset(train)?;
                let model = if plan.standardize {
                    FittedModel::fit_standardized(&subset, &cfg)?
                } else {
                    FittedModel::fit(&subset, &cfg)?
                };
                let held = data.subset(test)?;
                held_out_error(&held.outcome, &model.predict(&held.views)?)
            })();
            match outcome {
                Ok(s) => fold_scores.push(Some(s)),
                Err(e) => {
                    error.get_or_insert_with(|| format!("{}: {e}", e.kind()));
                    fold_scores.push(None);
                }
            }
        }
        let score = if error.is_none() {
            Some(fold_scores.iter().flatten().sum::<f64>() / plan.folds as f64)
        } else {
            None
        };
        table.push(CvRow {
            rho,
            fold_scores,
            score,
            error,
        });
    }

    let best = table
        .iter()
        .filter_map(|row| row.score.map(|s| (s, row)))
        .fold(None::<(f64, &CvRow)>, |acc, (s, row)| match acc {
            None => Some((s, row)),
            Some((bs, brow)) => {
                let sparser = row.rho.iter().sum::<f64>() > brow.rho.iter().sum::<f64>();
                if s < bs || (s == bs && sparser) {
                    Some((s, row))
                } else {
                    Some((bs, brow))
                }
            }
        });
    let Some((best_score, best_row)) = best else {
        return Err(Error::InvalidConfig("every rho combination failed".into()));
    };
    Ok(CvResult {
        best: best_row.rho.clone(),
        best_score,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::standard_normal;
    use crate::outcome::ClassLabels;
    use nalgebra::DVector;

    #[test]
    fn grid_order_and_random_subset() {
        let plan = CvPlan {
            rho_grid: vec![vec![0.1, 0.2], vec![1.0, 2.0, 3.0]],
            ..CvPlan::default()
        };
        let grid = plan.candidates();
        assert_eq!(grid.len(), 6);
        assert_eq!(grid[0], vec![0.1, 1.0]);
        assert_eq!(grid[1], vec![0.1, 2.0]);
        assert_eq!(grid[5], vec![0.2, 3.0]);
        let all = CvPlan {
            search: Search::Random(6),
            ..plan.clone()
        };
        assert_eq!(all.candidates(), grid);
        let some = CvPlan {
            search: Search::Random(3),
            ..plan
        };
        let picked = some.candidates();
        assert_eq!(picked.len(), 3);
        assert!(picked.iter().all(|c| grid.contains(c)));
    }

    #[test]
    fn stratified_folds_keep_proportions() {
        let labels: Vec<usize> = (0..90).map(|i| usize::from(i >= 60)).collect();
        let outcome = Outcome::Categorical(ClassLabels::new(labels.clone(), 2).unwrap());
        let a = fold_assignment(&outcome, 3, 5);
        for f in 0..3 {
            let ones = (0..90).filter(|&i| a[i] == f && labels[i] == 1).count();
            let zeros = (0..90).filter(|&i| a[i] == f && labels[i] == 0).count();
            assert_eq!((zeros, ones), (20, 10));
        }
        assert_eq!(a, fold_assignment(&outcome, 3, 5));
        assert_ne!(a, fold_assignment(&outcome, 3, 6));
    }

    #[test]
    fn continuous_folds_are_balanced() {
        let outcome = Outcome::Continuous(DVector::zeros(10));
        let a = fold_assignment(&outcome, 3, 1);
        let sizes: Vec<usize> = (0..3).map(|f| a.iter().filter(|&&x| x == f).count()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
    }

    #[test]
    fn single_candidate_and_failed_rows() {
        let mut r = seed::rng(1, "cv-test", 0);
        let x1 = standard_normal(30, 3, &mut r);
        let x2 = standard_normal(30, 3, &mut r);
        let y = x1.column(0).into_owned();
        let data = MultiviewDataset::new(vec![x1, x2], Outcome::Continuous(y)).unwrap();
        let config = FitConfig {
            n_features: 10,
            n_components: 2,
            max_outer_iter: 3,
            ..FitConfig::default()
        };
        let plan = CvPlan {
            rho_grid: vec![vec![0.01], vec![0.01]],
            ..CvPlan::default()
        };
        let res = cross_validate(&data, &plan, &config).unwrap();
        assert_eq!(res.best, vec![0.01, 0.01]);
        assert_eq!(res.table.len(), 1);
        assert_eq!(res.table[0].fold_scores.len(), 3);

        // r larger than a training fold forces failures, recorded per row
        let too_big = FitConfig {
            n_components: 25,
            n_features: 30,
            ..config
        };
        assert!(cross_validate(&data, &plan, &too_big).is_err());
    }

    #[test]
    fn rejects_bad_plans() {
        let mut r = seed::rng(2, "cv-test", 0);
        let x = standard_normal(12, 2, &mut r);
        let data =
            MultiviewDataset::new(vec![x.clone(), x], Outcome::Continuous(DVector::zeros(12))).unwrap();
        let config = FitConfig::default();
        let plan = CvPlan {
            rho_grid: vec![vec![0.1]],
            ..CvPlan::default()
        };
        assert!(cross_validate(&data, &plan, &config).is_err());
        let plan = CvPlan {
            rho_grid: vec![vec![0.1], vec![0.1]],
            search: Search::Random(2),
            ..CvPlan::default()
        };
        assert!(cross_validate(&data, &plan, &config).is_err());
    }
}
