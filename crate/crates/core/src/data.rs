use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::column_moments;
use crate::outcome::Outcome;
use crate::prox::GroupStructure;
use crate::randfeatures::check_finite;

/// `D ≥ 1` views on the same `n` samples plus an outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiviewDataset {
    pub views: Vec<DMatrix<f64>>,
    pub outcome: Outcome,
    /// Optional non-overlapping variable groups, one slot per view.
    pub groups: Vec<Option<GroupStructure>>,
}

impl MultiviewDataset {
    pub fn new(views: Vec<DMatrix<f64>>, outcome: Outcome) -> Result<Self> {
        let groups = vec![None; views.len()];
        Self::with_groups(views, outcome, groups)
    }

    pub fn with_groups(
        views: Vec<DMatrix<f64>>,
        outcome: Outcome,
        groups: Vec<Option<GroupStructure>>,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::InvalidDimension("at least one view is required".into()));
        }
        if groups.len() != views.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} group slots for {} views",
                groups.len(),
                views.len()
            )));
        }
        let n = views[0].nrows();
        for (d, v) in views.iter().enumerate() {
            if v.nrows() != n {
                return Err(Error::DimensionMismatch(format!(
                    "view {} has {} rows, view 1 has {n}",
                    d + 1,
                    v.nrows()
                )));
            }
            if v.ncols() == 0 {
                return Err(Error::InvalidDimension(format!("view {} has no columns", d + 1)));
            }
            check_finite(v)?;
            if let Some(g) = &groups[d] {
                if g.n_variables() != v.ncols() {
                    return Err(Error::GroupMismatch(format!(
                        "view {} has {} variables but its groups cover {}",
                        d + 1,
                        v.ncols(),
                        g.n_variables()
                    )));
                }
            }
        }
        if outcome.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "outcome has {} rows, views have {n}",
                outcome.len()
            )));
        }
        Ok(Self {
            views,
            outcome,
            groups,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].nrows()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    /// Row subset keeping groups intact.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Self::with_groups(
            self.views.iter().map(|v| v.select_rows(rows)).collect(),
            self.outcome.subset(rows)?,
            self.groups.clone(),
        )
    }
}

/// Per-column affine map `x ↦ (x − mean) / sd`. Constant columns keep
/// `sd = 1` so they center to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl ColumnScaling {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let (means, sds) = column_moments(x);
        let sds = sds
            .into_iter()
            .map(|s| if s > 0.0 { s } else { 1.0 })
            .collect();
        Self { means, sds }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch(format!(
                "scaling fitted on {} columns, got {}",
                self.means.len(),
                x.ncols()
            )));
        }
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.sds[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }
}
