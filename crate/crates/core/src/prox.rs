//! Proximal operators for the variable-scaling penalties.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-overlapping partition of a view's variables into groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStructure {
    group_of: Vec<usize>,
    sizes: Vec<usize>,
}

impl GroupStructure {
    /// Builds a partition from one label per variable. Labels may be any
    /// integers; groups are numbered in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::GroupMismatch("no variables".into()));
        }
        let mut seen: Vec<usize> = Vec::new();
        let mut sizes = Vec::new();
        let group_of = labels
            .iter()
            .map(|label| match seen.iter().position(|s| s == label) {
                Some(g) => {
                    sizes[g] += 1;
                    g
                }
                None => {
                    seen.push(*label);
                    sizes.push(1);
                    seen.len() - 1
                }
            })
            .collect();
        Ok(Self { group_of, sizes })
    }

    /// All variables in one group.
    pub fn single(p: usize) -> Self {
        Self {
            group_of: vec![0; p],
            sizes: vec![p],
        }
    }

    pub fn n_variables(&self) -> usize {
        self.group_of.len()
    }

    pub fn n_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn group_of(&self, variable: usize) -> usize {
        self.group_of[variable]
    }

    pub fn labels(&self) -> &[usize] {
        &self.group_of
    }

    /// Per-group Euclidean norms of `v`.
    pub fn group_norms(&self, v: &DVector<f64>) -> Vec<f64> {
        let mut sq = vec![0.0; self.n_groups()];
        for (s, value) in v.iter().enumerate() {
            sq[self.group_of[s]] += value * value;
        }
        sq.into_iter().map(f64::sqrt).collect()
    }
}

/// Sparse-group lasso weights `η₁ = ηρ` and `η₂ = (1 − η)ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseGroup {
    pub rho: f64,
    pub eta: f64,
    pub groups: GroupStructure,
}

impl SparseGroup {
    pub fn new(rho: f64, eta: f64, groups: GroupStructure) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidConfig(format!("rho must be >= 0, got {rho}")));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidConfig(format!("eta must lie in [0, 1], got {eta}")));
        }
        Ok(Self { rho, eta, groups })
    }

    pub fn lasso_weight(&self) -> f64 {
        self.eta * self.rho
    }

    pub fn group_weight(&self) -> f64 {
        (1.0 - self.eta) * self.rho
    }

    /// `η₁‖γ‖₁ + η₂ Σ_l √p_l ‖γ_l‖₂`.
    pub fn value(&self, gamma: &DVector<f64>) -> f64 {
        let l1 = gamma.lp_norm(1);
        let group: f64 = self
            .groups
            .group_norms(gamma)
            .iter()
            .zip(self.groups.sizes())
            .map(|(norm, size)| (*size as f64).sqrt() * norm)
            .sum();
        self.lasso_weight() * l1 + self.group_weight() * group
    }

    /// Proximal map of `step · P` at `v`.
    pub fn prox(&self, v: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
        prox_sparse_group(
            v,
            self.lasso_weight() * step,
            self.group_weight() * step,
            &self.groups,
        )
    }
    /// Proximal map of `step · P` plus the constraint `γ ≥ 0`. The penalty is
    /// symmetric under coordinate sign flips, so this is the unconstrained
    /// map applied to the positive part of `v`.
    pub fn prox_nonnegative(&self, v: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
        self.prox(&v.map(|x| if x > 0.0 { x } else { 0.0 }), step)
    }
}

/// Variable-selection mode for one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Penalty {
    /// `γ` restricted to the probability simplex.
    Simplex,
    SparseGroup(SparseGroup),
}

impl Penalty {
    /// Penalty contribution to the objective. The simplex mode carries the
    /// linear term `1ᵀγ`.
    pub fn value(&self, gamma: &DVector<f64>) -> f64 {
        match self {
            Penalty::Simplex => gamma.sum(),
            Penalty::SparseGroup(sg) => sg.value(gamma),
        }
    }

    /// `ρ` of a sparse-group penalty; `None` for the simplex mode.
    pub fn rho(&self) -> Option<f64> {
        match self {
            Penalty::Simplex => None,
            Penalty::SparseGroup(sg) => Some(sg.rho),
        }
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        match self {
            Penalty::Simplex => Penalty::Simplex,
            Penalty::SparseGroup(sg) => Penalty::SparseGroup(SparseGroup {
                rho,
                ..sg.clone()
            }),
        }
    }
}

/// Euclidean projection onto `{w : w ≥ 0, Σ w = 1}` by sort-and-threshold.
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            tau = candidate;
        }
    }
    v.map(|x| (x - tau).max(0.0))
}

/// Entrywise `sgn(v)·max(|v| − ρ, 0)`.
pub fn soft_threshold(v: &DVector<f64>, threshold: f64) -> DVector<f64> {
    v.map(|x| x.signum() * (x.abs() - threshold).max(0.0))
}

/// Sparse-group lasso proximal map: soft-threshold at `lasso`, then shrink
/// each group `l` by `max(1 − group·√p_l / ‖v_l‖, 0)`, zeroing it outright
/// when `‖v_l‖ ≤ group·√p_l`.
pub fn prox_sparse_group(
    v: &DVector<f64>,
    lasso: f64,
    group: f64,
    groups: &GroupStructure,
) -> Result<DVector<f64>> {
    if groups.n_variables() != v.len() {
        return Err(Error::GroupMismatch(format!(
            "vector has {} entries but the groups cover {}",
            v.len(),
            groups.n_variables()
        )));
    }
    let mut out = soft_threshold(v, lasso);
    let norms = groups.group_norms(&out);
    let factors: Vec<f64> = norms
        .iter()
        .zip(groups.sizes())
        .map(|(norm, size)| {
            let cut = group * (*size as f64).sqrt();
            if *norm <= cut {
                0.0
            } else {
                (1.0 - cut / norm).max(0.0)
            }
        })
        .collect();
    for (s, value) in out.iter_mut().enumerate() {
        *value *= factors[groups.group_of(s)];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn simplex_examples() {
        assert_eq!(project_simplex(&dv(&[0.5, 0.5])), dv(&[0.5, 0.5]));
        assert_eq!(project_simplex(&dv(&[1.0, 1.0])), dv(&[0.5, 0.5]));
        let w = project_simplex(&dv(&[0.8, 0.3, -0.2]));
        assert_abs_diff_eq!(w[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.25, epsilon = 1e-12);
        assert_eq!(w[2], 0.0);
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&dv(&[2.0]), 0.5), dv(&[1.5]));
        assert_eq!(soft_threshold(&dv(&[-0.3]), 0.5)[0], 0.0);
        let out = soft_threshold(&dv(&[1.0, -2.0, 0.1]), 1.0);
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], -1.0);
        assert_eq!(out[2], 0.0);
    }

    #[test]
    fn group_shrinkage_examples() {
        // ‖(3,4)‖ = 5, cut 2.5 → factor 0.5
        let g = GroupStructure::single(2);
        let out = prox_sparse_group(&dv(&[3.0, 4.0]), 0.0, 2.5 / 2f64.sqrt(), &g).unwrap();
        assert_abs_diff_eq!(out[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 2.0, epsilon = 1e-12);

        // ‖v‖ = 1 with cut 1.5 → zero group
        let g1 = GroupStructure::single(1);
        let out = prox_sparse_group(&dv(&[1.0]), 0.0, 1.5, &g1).unwrap();
        assert_eq!(out[0], 0.0);

        let g3 = GroupStructure::from_labels(&[4, 4, 9]).unwrap();
        let v = dv(&[0.3, -1.2, 2.0]);
        assert_eq!(prox_sparse_group(&v, 0.0, 0.0, &g3).unwrap(), v);
    }

    #[test]
    fn group_mismatch_is_reported() {
        let g = GroupStructure::single(3);
        assert!(matches!(
            prox_sparse_group(&dv(&[1.0, 2.0]), 0.1, 0.1, &g),
            Err(Error::GroupMismatch(_))
        ));
    }

    #[test]
    fn labels_are_renumbered_by_first_appearance() {
        let g = GroupStructure::from_labels(&[7, 2, 7, 5, 2]).unwrap();
        assert_eq!(g.labels(), &[0, 1, 0, 2, 1]);
        assert_eq!(g.sizes(), &[2, 2, 1]);
    }

    #[test]
    fn sparse_group_step_scales_thresholds() {
        let sg = SparseGroup::new(1.0, 0.5, GroupStructure::single(2)).unwrap();
        let v = dv(&[3.0, 4.0]);
        let a = sg.prox(&v, 0.5).unwrap();
        let b = prox_sparse_group(&v, 0.25, 0.25, &sg.groups).unwrap();
        assert_eq!(a, b);
        assert!(SparseGroup::new(-1.0, 0.5, GroupStructure::single(2)).is_err());
        assert!(SparseGroup::new(1.0, 1.5, GroupStructure::single(2)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn simplex_projection_kkt(v in proptest::collection::vec(-3.0f64..3.0, 1..8)) {
            let v = DVector::from_vec(v);
            let w = project_simplex(&v);
            prop_assert!((w.sum() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|x| *x >= 0.0));
            // one threshold explains every positive entry
            let (idx, _) = w.iter().enumerate().find(|(_, x)| **x > 0.0).unwrap();
            let tau = v[idx] - w[idx];
            for (vi, wi) in v.iter().zip(w.iter()) {
                prop_assert!((wi - (vi - tau).max(0.0)).abs() < 1e-12);
            }
        }

        #[test]
        fn prox_operators_are_nonexpansive(
            pair in (1usize..6).prop_flat_map(|p| (
                proptest::collection::vec(-3.0f64..3.0, p),
                proptest::collection::vec(-3.0f64..3.0, p),
                proptest::collection::vec(0usize..3, p),
            )),
            lasso in 0.0f64..1.0,
            group in 0.0f64..1.0,
        ) {
            let (u, v, labels) = pair;
            let u = DVector::from_vec(u);
            let v = DVector::from_vec(v);
            let dist = (&u - &v).norm() + 1e-12;
            let groups = GroupStructure::from_labels(&labels).unwrap();
            prop_assert!((project_simplex(&u) - project_simplex(&v)).norm() <= dist);
            prop_assert!((soft_threshold(&u, lasso) - soft_threshold(&v, lasso)).norm() <= dist);
            let pu = prox_sparse_group(&u, lasso, group, &groups).unwrap();
            let pv = prox_sparse_group(&v, lasso, group, &groups).unwrap();
            prop_assert!((pu - pv).norm() <= dist);
        }
    }
}
