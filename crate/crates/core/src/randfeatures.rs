//! Random Fourier features for the Gaussian kernel.
//!
//! A map draws `M` frequency vectors `ε_m ~ N(0, ν⁻² I)` and phases
//! `b_m ~ U[0, 2π)` once, then sends a row `x` to
//! `z(x)_m = √2 cos(ε_mᵀ (γ ⊙ x) + b_m)`. Rows of `Z` are stored without the
//! `1/√M` factor, so `(1/M) z(x)ᵀ z(x')` is the kernel estimate.
//!
//! The per-variable scaling `γ` is the learnable part: a zero entry removes
//! that variable from every frequency at once.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::seed;
use crate::trig;

/// Pair cap for the median heuristic before it switches to subsampling.
pub const DEFAULT_MAX_PAIRS: usize = 500_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomFeatureMap {
    /// `M × p` frequencies, fixed at construction.
    pub epsilon: DMatrix<f64>,
    /// `M` phase offsets in `[0, 2π)`.
    pub offsets: DVector<f64>,
    pub bandwidth: f64,
    /// `p` nonnegative variable scalings.
    pub gamma: DVector<f64>,
}

impl RandomFeatureMap {
    /// Draws frequencies and phases; `gamma` starts at all-ones.
    pub fn sample(p: usize, m: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        let (epsilon, offsets) = sample_frequencies(p, m, bandwidth, seed)?;
        Ok(Self {
            epsilon,
            offsets,
            bandwidth,
            gamma: DVector::from_element(p, 1.0),
        })
    }

    pub fn n_features(&self) -> usize {
        self.epsilon.nrows()
    }

    pub fn n_variables(&self) -> usize {
        self.epsilon.ncols()
    }

    pub fn with_gamma(mut self, gamma: DVector<f64>) -> Self {
        self.gamma = gamma;
        self
    }

    /// `Z = √2 cos((X ⊙ γ) εᵀ + 1 bᵀ)` using the stored `γ`.
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        feature_map(x, self)
    }

    /// Phase matrix `U = (X ⊙ γ) εᵀ + 1 bᵀ` for an arbitrary `γ`.
    pub(crate) fn phases(&self, x: &DMatrix<f64>, gamma: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = x.clone();
        for (mut col, g) in scaled.column_iter_mut().zip(gamma.iter()) {
            col *= *g;
        }
        let mut u = scaled * self.epsilon.transpose();
        for (mut col, b) in u.column_iter_mut().zip(self.offsets.iter()) {
            col.add_scalar_mut(*b);
        }
        u
    }
}

/// `ε` (`M × p`, entries `N(0, 1/ν²)`) and `b` (`M`, entries `U[0, 2π)`).
/// Identical arguments give bit-identical output.
pub fn sample_frequencies(
    p: usize,
    m: usize,
    bandwidth: f64,
    seed: u64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if p == 0 || m == 0 {
        return Err(Error::InvalidDimension(format!(
            "feature map needs p >= 1 and M >= 1, got p={p}, M={m}"
        )));
    }
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::InvalidDimension(format!(
            "bandwidth must be positive and finite, got {bandwidth}"
        )));
    }
    let mut rng = seed::rng(seed, "frequencies", 0);
    let scale = 1.0 / bandwidth;
    let eps: Vec<f64> = (0..m * p)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let phase = Uniform::new(0.0, 2.0 * PI).expect("valid range");
    let offsets = DVector::from_iterator(m, (0..m).map(|_| rng.sample(phase)));
    Ok((DMatrix::from_row_slice(m, p, &eps), offsets))
}

pub fn feature_map(x: &DMatrix<f64>, map: &RandomFeatureMap) -> Result<DMatrix<f64>> {
    if x.ncols() != map.gamma.len() || x.ncols() != map.n_variables() {
        return Err(Error::DimensionMismatch(format!(
            "view has {} columns but the feature map expects {}",
            x.ncols(),
            map.gamma.len()
        )));
    }
    let mut z = map.phases(x, &map.gamma);
    trig::cos_in_place(z.as_mut_slice());
    z *= SQRT_2;
    Ok(z)
}

/// `K_ij = exp(−‖x_i − x_j‖² / (2ν²))`.
pub fn exact_gaussian_gram(x: &DMatrix<f64>, bandwidth: f64) -> Result<DMatrix<f64>> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::InvalidDimension(format!(
            "bandwidth must be positive and finite, got {bandwidth}"
        )));
    }
    check_finite(x)?;
    let n = x.nrows();
    let sq = squared_distances(x);
    let denom = 2.0 * bandwidth * bandwidth;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            (-sq[(i, j)] / denom).exp()
        }
    }))
}

fn squared_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (x.row(i) - x.row(j)).norm_squared();
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    out
}

/// Lower median of pairwise Euclidean distances between rows.
///
/// All `n(n−1)/2` pairs are used when that count fits in `max_pairs`;
/// otherwise `max_pairs` distinct-index pairs are drawn with `seed`. A zero
/// median (heavily duplicated rows) falls back to the smallest positive
/// distance seen.
pub fn median_heuristic_bandwidth(x: &DMatrix<f64>, max_pairs: usize, seed: u64) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "median heuristic needs at least two rows, got {n}"
        )));
    }
    if max_pairs == 0 {
        return Err(Error::InvalidDimension("max_pairs must be >= 1".into()));
    }
    check_finite(x)?;

    let total = n * (n - 1) / 2;
    let mut dists = Vec::with_capacity(total.min(max_pairs));
    let dist = |i: usize, j: usize| (x.row(i) - x.row(j)).norm();
    if total <= max_pairs {
        for i in 0..n {
            for j in (i + 1)..n {
                dists.push(dist(i, j));
            }
        }
    } else {
        let mut rng = seed::rng(seed, "bandwidth", 0);
        for _ in 0..max_pairs {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            dists.push(dist(i, j));
        }
    }

    dists.sort_by(|a, b| a.total_cmp(b));
    let median = dists[(dists.len() - 1) / 2];
    if median > 0.0 {
        return Ok(median);
    }
    dists
        .iter()
        .copied()
        .find(|d| *d > 0.0)
        .ok_or(Error::AllRowsIdentical)
}

pub(crate) fn check_finite(x: &DMatrix<f64>) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput("view matrix"))
    }
}
