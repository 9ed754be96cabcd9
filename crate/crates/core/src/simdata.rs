//! Synthetic two-view designs with 20 nonlinear signal variables, for a
//! binary outcome or a continuous one, plus selection accuracy metrics.
//!
//! Each class of `m` rows uses a grid `θ` of `m/2` evenly spaced points and
//! a curve `s` of length `m` built from two halves. Column 1 is `[θ; θ]`,
//! columns 2..20 repeat `s`, the remaining columns carry noise only. The
//! second view is `5X¹ + σ₂E²`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::MultiviewDataset;
use crate::error::{Error, Result};
use crate::outcome::{ClassLabels, Outcome};
use crate::prox::{GroupStructure, Penalty};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "lowercase")]
pub enum Scenario {
    /// Two classes with `n1` and `n2` rows, concatenated in that order.
    Binary { n1: usize, n2: usize },
    Continuous { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub scenario: Scenario,
    /// Variables per view; both views have the same width.
    pub p: usize,
    pub signal_count: usize,
    /// Noise scale of the first view.
    pub sigma1: f64,
    /// Noise scale of the second view.
    pub sigma2: f64,
    /// Outcome noise scale (continuous scenario).
    pub sigma_y: f64,
    /// Fixed outcome weights for the continuous scenario; drawn from
    /// `U(0, 1)³` when absent.
    pub theta: Option<[f64; 3]>,
    pub seed: u64,
}

impl SimSpec {
    pub fn binary(n1: usize, n2: usize, p: usize, seed: u64) -> Self {
        Self {
            scenario: Scenario::Binary { n1, n2 },
            p,
            signal_count: 20,
            sigma1: 0.1,
            sigma2: 0.2,
            sigma_y: 0.3,
            theta: None,
            seed,
        }
    }

    pub fn continuous(n: usize, p: usize, seed: u64) -> Self {
        Self {
            scenario: Scenario::Continuous { n },
            ..Self::binary(0, 0, p, seed)
        }
    }

    /// Noise off in both views and the outcome.
    pub fn noiseless(self) -> Self {
        Self {
            sigma1: 0.0,
            sigma2: 0.0,
            sigma_y: 0.0,
            ..self
        }
    }

    pub fn n_samples(&self) -> usize {
        match self.scenario {
            Scenario::Binary { n1, n2 } => n1 + n2,
            Scenario::Continuous { n } => n,
        }
    }

    pub fn signal_set(&self) -> Vec<usize> {
        (0..self.signal_count).collect()
    }

    /// Signal variables in one group and noise variables in the other.
    pub fn oracle_groups(&self) -> GroupStructure {
        let labels: Vec<usize> = (0..self.p).map(|j| usize::from(j >= self.signal_count)).collect();
        GroupStructure::from_labels(&labels).expect("non-empty labels")
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        let sizes: Vec<usize> = match self.scenario {
            Scenario::Binary { n1, n2 } => vec![n1, n2],
            Scenario::Continuous { n } => vec![n],
        };
        if sizes.iter().any(|&m| m < 4 || m % 2 != 0) {
            return bad(format!("class sizes must be even and at least 4, got {sizes:?}"));
        }
        if self.signal_count == 0 || self.p < self.signal_count {
            return bad(format!(
                "p ({}) must be at least the signal count ({})",
                self.p, self.signal_count
            ));
        }
        if [self.sigma1, self.sigma2, self.sigma_y]
            .iter()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return bad("noise scales must be finite and >= 0".into());
        }
        if let Scenario::Continuous { n } = self.scenario {
            if n < 3 {
                return bad("the continuous outcome needs at least 3 samples".into());
            }
        }
        Ok(())
    }
}

/// `m` evenly spaced points on `[lo, hi]`, endpoints included.
fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![lo];
    }
    (0..m)
        .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
        .collect()
}

struct ClassCurve {
    lo: f64,
    hi: f64,
    first: fn(f64) -> f64,
    second: fn(f64) -> f64,
}

const CLASS_ONE: ClassCurve = ClassCurve {
    lo: 0.6,
    hi: 2.5,
    first: |t| (t - 1.0).powi(2),
    second: |t| (t + 0.1).powi(2) - 2.0 * (t - 1.0).powi(2),
};

const CLASS_TWO: ClassCurve = ClassCurve {
    lo: 0.96,
    hi: 1.67,
    first: |t| (t - 1.0).powi(2) + 0.25,
    second: |t| (t + 0.1).powi(2) - 3.5 * (t - 1.0).powi(2) + 0.25,
};

/// Noise-free signal block for one class: rows `[θ; θ]` in column 1 and
/// `s` in the remaining signal columns.
fn class_block(curve: &ClassCurve, rows: usize, p: usize, signal: usize) -> DMatrix<f64> {
    let theta = linspace(curve.lo, curve.hi, rows / 2);
    let s: Vec<f64> = theta
        .iter()
        .map(|&t| (curve.first)(t))
        .chain(theta.iter().map(|&t| (curve.second)(t)))
        .collect();
    DMatrix::from_fn(rows, p, |i, j| match j {
        0 => theta[i % theta.len()],
        j if j < signal => s[i],
        _ => 0.0,
    })
}

/// Adds `σE` with one independent stream per column, so widening a view
/// leaves its existing columns untouched.
fn add_column_noise(x: &mut DMatrix<f64>, sigma: f64, master: u64, label: &str) {
    if sigma == 0.0 {
        return;
    }
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let mut rng = seed::rng(master, label, j as u64);
        for v in col.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += sigma * e;
        }
    }
}

fn views(spec: &SimSpec, curves: &[(&ClassCurve, usize)]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n: usize = curves.iter().map(|(_, m)| m).sum();
    let mut x1 = DMatrix::zeros(n, spec.p);
    let mut row = 0;
    for (curve, m) in curves {
        x1.view_mut((row, 0), (*m, spec.p))
            .copy_from(&class_block(curve, *m, spec.p, spec.signal_count));
        row += m;
    }
    add_column_noise(&mut x1, spec.sigma1, spec.seed, "sim-view1-noise");
    let mut x2 = &x1 * 5.0;
    add_column_noise(&mut x2, spec.sigma2, spec.seed, "sim-view2-noise");
    (x1, x2)
}

/// Two-class design; class 1 occupies the first `n1` rows.
pub fn gen_binary(spec: &SimSpec) -> Result<MultiviewDataset> {
    spec.validate()?;
    let Scenario::Binary { n1, n2 } = spec.scenario else {
        return Err(Error::InvalidSpec("gen_binary needs the binary scenario".into()));
    };
    let (x1, x2) = views(spec, &[(&CLASS_ONE, n1), (&CLASS_TWO, n2)]);
    let labels = (0..n1 + n2).map(|i| usize::from(i >= n1)).collect();
    MultiviewDataset::new(vec![x1, x2], Outcome::Categorical(ClassLabels::new(labels, 2)?))
}

/// Top `k` left singular vectors of `[X¹, X²]`, ordered by singular value.
/// Each sign is fixed so the largest-magnitude entry of the matching right
/// singular vector is positive; the loadings describe the population, so
/// independent draws get consistently oriented columns.
pub fn leading_left_singular_vectors(x1: &DMatrix<f64>, x2: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut joined = DMatrix::zeros(x1.nrows(), x1.ncols() + x2.ncols());
    joined.columns_mut(0, x1.ncols()).copy_from(x1);
    joined.columns_mut(x1.ncols(), x2.ncols()).copy_from(x2);
    let svd = joined.svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let signs: Vec<f64> = order[..k]
        .iter()
        .map(|&c| {
            let peak = v_t.row(c).iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if peak < 0.0 {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    DMatrix::from_fn(x1.nrows(), k, |i, j| signs[j] * u[(i, order[j])])
}

/// One-class design with `y = 5Gθ + σ_y e`, `G` the top three left singular
/// vectors of the concatenated views and `θ ∈ ℝ³`.
pub fn gen_continuous(spec: &SimSpec) -> Result<MultiviewDataset> {
    spec.validate()?;
    let Scenario::Continuous { n } = spec.scenario else {
        return Err(Error::InvalidSpec("gen_continuous needs the continuous scenario".into()));
    };
    let (x1, x2) = views(spec, &[(&CLASS_ONE, n)]);
    let g = leading_left_singular_vectors(&x1, &x2, 3);
    let theta = DVector::from_row_slice(&continuous_theta(spec));
    let mut y = &g * theta * 5.0;
    if spec.sigma_y > 0.0 {
        let mut rng = seed::rng(spec.seed, "sim-outcome-noise", 0);
        for v in y.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += spec.sigma_y * e;
        }
    }
    MultiviewDataset::new(vec![x1, x2], Outcome::Continuous(y))
}

/// Outcome weights used by [`gen_continuous`].
pub fn continuous_theta(spec: &SimSpec) -> [f64; 3] {
    spec.theta.unwrap_or_else(|| {
        let mut rng = seed::rng(spec.seed, "sim-outcome-theta", 0);
        [rng.random(), rng.random(), rng.random()]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Selected iff `γ_s > 0`; used with the sparse-group penalty.
    Positive,
    /// Selected iff `γ_s > 1/p`; used on the simplex.
    AboveUniform,
}

impl SelectionRule {
    pub fn for_penalty(penalty: &Penalty) -> Self {
        match penalty {
            Penalty::Simplex => SelectionRule::AboveUniform,
            Penalty::SparseGroup(_) => SelectionRule::Positive,
        }
    }

    pub fn threshold(self, p: usize) -> f64 {
        match self {
            SelectionRule::Positive => 0.0,
            SelectionRule::AboveUniform => 1.0 / p as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub tpr: f64,
    pub fpr: f64,
    pub selected: Vec<usize>,
    pub rule: SelectionRule,
    pub threshold: f64,
}

/// True and false positive rates of the variables selected from `gamma`.
/// An empty signal (or noise) set reports a rate of 0.
pub fn selection_metrics(gamma: &DVector<f64>, signal: &[usize], rule: SelectionRule) -> Result<SelectionReport> {
    let p = gamma.len();
    if let Some(&bad) = signal.iter().find(|&&s| s >= p) {
        return Err(Error::InvalidDimension(format!("signal index {bad} outside 0..{p}")));
    }
    let threshold = rule.threshold(p);
    let selected: Vec<usize> = (0..p).filter(|&s| gamma[s] > threshold).collect();
    let mut is_signal = vec![false; p];
    for &s in signal {
        is_signal[s] = true;
    }
    let n_signal = is_signal.iter().filter(|&&b| b).count();
    let n_noise = p - n_signal;
    let hits = selected.iter().filter(|&&s| is_signal[s]).count();
    let false_hits = selected.len() - hits;
    let rate = |k: usize, total: usize| if total == 0 { 0.0 } else { k as f64 / total as f64 };
    Ok(SelectionReport {
        tpr: rate(hits, n_signal),
        fpr: rate(false_hits, n_noise),
        selected,
        rule,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn noiseless_binary_masks_and_scales() {
        let data = gen_binary(&SimSpec::binary(500, 200, 50, 1).noiseless()).unwrap();
        let (x1, x2) = (&data.views[0], &data.views[1]);
        assert_eq!(x1.shape(), (700, 50));
        for j in 20..50 {
            assert!(x1.column(j).iter().all(|v| *v == 0.0));
            assert!(x2.column(j).iter().all(|v| *v == 0.0));
        }
        assert_eq!(*x2, x1 * 5.0);
    }

    #[test]
    fn first_column_is_the_duplicated_grid() {
        let data = gen_binary(&SimSpec::binary(500, 200, 50, 1).noiseless()).unwrap();
        let x1 = &data.views[0];
        let grid = linspace(0.6, 2.5, 250);
        for i in 0..250 {
            assert_eq!(x1[(i, 0)], grid[i]);
            assert_eq!(x1[(i + 250, 0)], grid[i]);
        }
        assert_eq!(x1[(0, 0)], 0.6);
        assert_eq!(x1[(249, 0)], 2.5);
        // class 2 grid in rows 500.. and the curve in columns 2..20
        let grid2 = linspace(0.96, 1.67, 100);
        assert_eq!(x1[(500, 0)], grid2[0]);
        let t = grid[3];
        for j in 1..20 {
            assert_eq!(x1[(3, j)], (t - 1.0).powi(2));
            assert_eq!(x1[(253, j)], (t + 0.1).powi(2) - 2.0 * (t - 1.0).powi(2));
        }
        let t2 = grid2[5];
        assert_eq!(x1[(505, 7)], (t2 - 1.0).powi(2) + 0.25);
        assert_eq!(x1[(605, 7)], (t2 + 0.1).powi(2) - 3.5 * (t2 - 1.0).powi(2) + 0.25);
        let Outcome::Categorical(labels) = &data.outcome else { panic!() };
        assert_eq!(labels.counts(), vec![500, 200]);
        assert_eq!(labels.labels()[499], 0);
        assert_eq!(labels.labels()[500], 1);
    }

    #[test]
    fn padding_keeps_signal_columns() {
        let narrow = gen_binary(&SimSpec::binary(40, 20, 25, 3)).unwrap();
        let wide = gen_binary(&SimSpec::binary(40, 20, 60, 3)).unwrap();
        for v in 0..2 {
            assert_eq!(
                narrow.views[v].columns(0, 25),
                wide.views[v].columns(0, 25)
            );
        }
    }

    #[test]
    fn rejects_odd_or_narrow_specs() {
        assert!(matches!(gen_binary(&SimSpec::binary(501, 200, 50, 1)), Err(Error::InvalidSpec(_))));
        assert!(gen_binary(&SimSpec::binary(500, 200, 10, 1)).is_err());
        assert!(gen_continuous(&SimSpec::binary(500, 200, 50, 1)).is_err());
        assert!(gen_binary(&SimSpec::continuous(100, 50, 1)).is_err());
    }

    #[test]
    fn noiseless_outcome_lies_in_the_singular_span() {
        let spec = SimSpec::continuous(100, 30, 4).noiseless();
        let data = gen_continuous(&spec).unwrap();
        let g = leading_left_singular_vectors(&data.views[0], &data.views[1], 3);
        let Outcome::Continuous(y) = &data.outcome else { panic!() };
        // least-squares oracle: Gᵀy recovers 5θ, residual vanishes
        let coef = g.tr_mul(y);
        let theta = continuous_theta(&spec);
        for k in 0..3 {
            assert!((coef[k] - 5.0 * theta[k]).abs() <= 1e-6);
        }
        assert!((y - &g * coef).norm() <= 1e-9);
    }

    #[test]
    fn singular_vectors_are_oriented_alike_across_draws() {
        // loadings Xᵀg of two independent draws point the same way
        let loadings = |seed| {
            let data = gen_continuous(&SimSpec::continuous(300, 25, seed)).unwrap();
            let g = leading_left_singular_vectors(&data.views[0], &data.views[1], 3);
            let l = data.views[0].tr_mul(&g);
            l.normalize()
        };
        let (a, b) = (loadings(1), loadings(2));
        for k in 0..3 {
            assert!(a.column(k).dot(&b.column(k)) > 0.0, "component {k}");
        }
    }

    #[test]
    fn zero_theta_gives_pure_noise() {
        let spec = SimSpec {
            theta: Some([0.0; 3]),
            ..SimSpec::continuous(400, 25, 5)
        };
        let data = gen_continuous(&spec).unwrap();
        let Outcome::Continuous(y) = &data.outcome else { panic!() };
        let var = y.map(|v| v * v).mean();
        assert!((var - 0.09).abs() < 0.02, "{var}");
    }

    #[test]
    fn generators_are_deterministic() {
        let s = SimSpec::continuous(60, 22, 9);
        assert_eq!(gen_continuous(&s).unwrap(), gen_continuous(&s).unwrap());
    }

    #[test]
    fn selection_examples() {
        let signal: Vec<usize> = (0..20).collect();
        let mut gamma = DVector::zeros(50);
        for s in 0..20 {
            gamma[s] = 0.3;
        }
        let r = selection_metrics(&gamma, &signal, SelectionRule::Positive).unwrap();
        assert_eq!((r.tpr, r.fpr), (1.0, 0.0));

        let uniform = DVector::from_element(50, 1.0 / 50.0);
        let r = selection_metrics(&uniform, &signal, SelectionRule::AboveUniform).unwrap();
        assert_eq!((r.tpr, r.fpr), (0.0, 0.0));
        assert!(r.selected.is_empty());

        let mut gamma = DVector::zeros(50);
        for s in 0..15 {
            gamma[s] = 1.0;
        }
        for s in [20, 30, 40] {
            gamma[s] = 1.0;
        }
        let r = selection_metrics(&gamma, &signal, SelectionRule::Positive).unwrap();
        assert_eq!((r.tpr, r.fpr), (0.75, 0.1));
        assert!(selection_metrics(&gamma, &[50], SelectionRule::Positive).is_err());
    }

    proptest! {
        #[test]
        fn rates_stay_in_unit_interval(
            gamma in proptest::collection::vec(0.0f64..1.0, 1..30),
            frac in 0.0f64..1.0,
        ) {
            let p = gamma.len();
            let k = ((p as f64) * frac) as usize;
            let signal: Vec<usize> = (0..k).collect();
            for rule in [SelectionRule::Positive, SelectionRule::AboveUniform] {
                let r = selection_metrics(&DVector::from_vec(gamma.clone()), &signal, rule).unwrap();
                prop_assert!((0.0..=1.0).contains(&r.tpr));
                prop_assert!((0.0..=1.0).contains(&r.fpr));
            }
        }
    }
}
