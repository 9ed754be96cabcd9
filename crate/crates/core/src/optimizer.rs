//! Block-coordinate fitting of the joint multiview objective
//!
//! ```text
//! L(T, G, Θ) + (1/2n) Σ_d ‖G − Z_d A_d‖² + Σ_d (λ_d/2) ‖A_d‖² + Σ_d P_d(γ_d),   GᵀG = I
//! ```
//!
//! where `T` is the centered response (or the optimal-scoring response for
//! classes) and `Z_d` is the random-feature expansion of view `d` under its
//! current scaling `γ_d`. One cycle updates every `γ_d` (FISTA), every `A_d`
//! (ridge solve), then `G` (Procrustes) and `Θ` (least squares). Each block
//! step is a descent step, so the objective trace never increases.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::MultiviewDataset;
use crate::error::{Error, Result};
use crate::fista::{self, CompositeProblem, FistaOptions};
use crate::linalg::{orthonormality_error, procrustes, random_orthonormal, solve_symmetric, standard_normal};
use crate::outcome::{loss, OutcomeMeta};
use crate::prox::{project_simplex, Penalty, SparseGroup};
use crate::randfeatures::{median_heuristic_bandwidth, RandomFeatureMap, DEFAULT_MAX_PAIRS};
use crate::seed;
use crate::trig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Ridge weight per view; a single entry applies to every view.
    pub lambda: Vec<f64>,
    /// Random features per view (`M`).
    pub n_features: usize,
    /// Shared components (`r`).
    pub n_components: usize,
    pub max_outer_iter: usize,
    /// Relative objective change that ends the outer loop.
    pub outer_tol: f64,
    /// Budget for each γ update; warm-started across outer iterations.
    pub fista: FistaOptions,
    pub seed: u64,
    /// Penalty per view; empty means the simplex mode everywhere.
    pub penalties: Vec<Penalty>,
    /// Fixed bandwidths per view; the median heuristic is used when absent.
    pub bandwidths: Option<Vec<f64>>,
    pub max_pairs: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda: vec![1.0],
            n_features: 100,
            n_components: 2,
            max_outer_iter: 200,
            outer_tol: 1e-5,
            fista: FistaOptions {
                max_iter: 100,
                ..FistaOptions::default()
            },
            seed: 0,
            penalties: Vec::new(),
            bandwidths: None,
            max_pairs: DEFAULT_MAX_PAIRS,
        }
    }
}

impl FitConfig {
    pub fn lambda_for(&self, view: usize) -> f64 {
        if self.lambda.len() == 1 {
            self.lambda[0]
        } else {
            self.lambda[view]
        }
    }

    pub fn penalty_for(&self, view: usize) -> Penalty {
        self.penalties.get(view).cloned().unwrap_or(Penalty::Simplex)
    }

    pub fn validate(&self, data: &MultiviewDataset) -> Result<()> {
        let d = data.n_views();
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_components == 0 {
            return bad("r must be >= 1".into());
        }
        if self.n_features < self.n_components {
            return bad(format!(
                "M ({}) must be at least r ({})",
                self.n_features, self.n_components
            ));
        }
        if self.n_components > data.n_samples() {
            return bad(format!(
                "r ({}) exceeds the sample count ({})",
                self.n_components,
                data.n_samples()
            ));
        }
        if !(self.lambda.len() == 1 || self.lambda.len() == d) {
            return bad(format!("{} lambda values for {d} views", self.lambda.len()));
        }
        if self.lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad("lambda must be finite and >= 0".into());
        }
        if !self.penalties.is_empty() && self.penalties.len() != d {
            return bad(format!("{} penalties for {d} views", self.penalties.len()));
        }
        for (v, p) in self.penalties.iter().enumerate() {
            if let Penalty::SparseGroup(sg) = p {
                if sg.groups.n_variables() != data.views[v].ncols() {
                    return Err(Error::GroupMismatch(format!(
                        "view {} has {} variables but its groups cover {}",
                        v + 1,
                        data.views[v].ncols(),
                        sg.groups.n_variables()
                    )));
                }
            }
        }
        if let Some(bw) = &self.bandwidths {
            if bw.len() != d || bw.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
                return bad("bandwidths must be positive, one per view".into());
            }
        }
        if self.max_outer_iter == 0 {
            return bad("max_outer_iter must be >= 1".into());
        }
        Ok(())
    }
}

/// Everything the alternating fit produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// `n × r`, orthonormal columns.
    pub shared: DMatrix<f64>,
    /// `M × r` per view.
    pub loadings: Vec<DMatrix<f64>>,
    /// `r × q'`.
    pub theta: DMatrix<f64>,
    pub maps: Vec<RandomFeatureMap>,
    /// Objective at initialization followed by one value per outer cycle.
    pub objective_trace: Vec<f64>,
    /// `‖GᵀG − I‖_max` after each G update.
    pub orthonormality_trace: Vec<f64>,
    pub converged: bool,
    pub outcome: OutcomeMeta,
}

/// `A = (ZᵀZ/n + λI)⁻¹ ZᵀG/n`.
pub fn update_loadings(z: &DMatrix<f64>, g: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if z.nrows() != g.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "Z has {} rows, G has {}",
            z.nrows(),
            g.nrows()
        )));
    }
    let n = z.nrows() as f64;
    let mut lhs = z.tr_mul(z) / n;
    for i in 0..lhs.nrows() {
        lhs[(i, i)] += lambda;
    }
    let rhs = z.tr_mul(g) / n;
    if lambda > 0.0 {
        solve_symmetric(lhs, &rhs)
    } else {
        let lu = lhs.lu();
        lu.solve(&rhs).ok_or(Error::SingularSystem)
    }
}

/// Procrustes update of `G` from `TΘᵀ + Σ_d Z_d A_d`.
pub fn update_shared(
    target: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    fitted_views: &[DMatrix<f64>],
) -> Result<DMatrix<f64>> {
    let mut m = target * theta.transpose();
    for za in fitted_views {
        if za.shape() != m.shape() {
            return Err(Error::DimensionMismatch(format!(
                "view fit {:?} vs {:?}",
                za.shape(),
                m.shape()
            )));
        }
        m += za;
    }
    m /= target.nrows() as f64;
    procrustes(&m)
}

/// Least-squares `Θ = (GᵀG)⁻¹Gᵀ T`, which is `GᵀT` for orthonormal `G`.
pub fn update_theta(g: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if g.nrows() != target.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "G has {} rows, target has {}",
            g.nrows(),
            target.nrows()
        )));
    }
    Ok(g.tr_mul(target))
}

/// The γ subproblem for one view: `(1/2n)‖G − Z(γ)A‖² + P(γ)`.
pub struct GammaProblem<'a> {
    pub view: &'a DMatrix<f64>,
    pub map: &'a RandomFeatureMap,
    pub loadings: &'a DMatrix<f64>,
    pub shared: &'a DMatrix<f64>,
    pub penalty: &'a Penalty,
}

impl GammaProblem<'_> {
    fn fit_value(&self, gamma: &DVector<f64>) -> f64 {
        let n = self.view.nrows() as f64;
        let mut z = self.map.phases(self.view, gamma);
        trig::cos_in_place(z.as_mut_slice());
        z *= SQRT_2;
        (self.shared - z * self.loadings).norm_squared() / (2.0 * n)
    }

    fn fit_value_and_grad(&self, gamma: &DVector<f64>) -> (f64, DVector<f64>) {
        let n = self.view.nrows() as f64;
        let mut z = self.map.phases(self.view, gamma);
        let mut slope = DMatrix::zeros(z.nrows(), z.ncols());
        trig::sin_cos_in_place(z.as_mut_slice(), slope.as_mut_slice());
        z *= SQRT_2;
        slope *= SQRT_2;
        let e = self.shared - z * self.loadings;
        let value = e.norm_squared() / (2.0 * n);
        // R = E Aᵀ, weighted by −dZ/du = √2 sin(u); the sign cancels against E = G − ZA
        let mut weights = &e * self.loadings.transpose();
        weights.component_mul_assign(&slope);
        let back = weights * &self.map.epsilon;
        let grad = DVector::from_iterator(
            gamma.len(),
            back.column_iter()
                .zip(self.view.column_iter())
                .map(|(b, x)| b.dot(&x) / n),
        );
        (value, grad)
    }
}

impl CompositeProblem for GammaProblem<'_> {
    fn smooth_value(&self, x: &DVector<f64>) -> f64 {
        match self.penalty {
            Penalty::Simplex => self.fit_value(x) + x.sum(),
            Penalty::SparseGroup(_) => self.fit_value(x),
        }
    }

    fn smooth_value_and_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (v, g) = self.fit_value_and_grad(x);
        match self.penalty {
            Penalty::Simplex => (v + x.sum(), g.add_scalar(1.0)),
            Penalty::SparseGroup(_) => (v, g),
        }
    }

    fn penalty(&self, x: &DVector<f64>) -> f64 {
        match self.penalty {
            Penalty::Simplex => 0.0,
            Penalty::SparseGroup(sg) => sg.value(x),
        }
    }

    fn prox(&self, v: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
        match self.penalty {
            Penalty::Simplex => Ok(project_simplex(v)),
            Penalty::SparseGroup(sg) => sg.prox_nonnegative(v, step),
        }
    }
}

/// Gradient in `γ` of `(1/2n)‖G − Z(γ)A‖²_F`.
pub fn gamma_objective_grad(
    gamma: &DVector<f64>,
    view: &DMatrix<f64>,
    map: &RandomFeatureMap,
    loadings: &DMatrix<f64>,
    shared: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    check_gamma_dims(gamma, view, map, loadings, shared)?;
    let problem = GammaProblem {
        view,
        map,
        loadings,
        shared,
        penalty: &Penalty::Simplex,
    };
    Ok(problem.fit_value_and_grad(gamma).1)
}

/// `(1/2n)‖G − Z(γ)A‖²_F`.
pub fn gamma_objective(
    gamma: &DVector<f64>,
    view: &DMatrix<f64>,
    map: &RandomFeatureMap,
    loadings: &DMatrix<f64>,
    shared: &DMatrix<f64>,
) -> Result<f64> {
    check_gamma_dims(gamma, view, map, loadings, shared)?;
    let problem = GammaProblem {
        view,
        map,
        loadings,
        shared,
        penalty: &Penalty::Simplex,
    };
    Ok(problem.fit_value(gamma))
}

fn check_gamma_dims(
    gamma: &DVector<f64>,
    view: &DMatrix<f64>,
    map: &RandomFeatureMap,
    loadings: &DMatrix<f64>,
    shared: &DMatrix<f64>,
) -> Result<()> {
    let ok = gamma.len() == view.ncols()
        && map.n_variables() == view.ncols()
        && loadings.nrows() == map.n_features()
        && loadings.ncols() == shared.ncols()
        && shared.nrows() == view.nrows();
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "γ {}, view {:?}, ε {:?}, A {:?}, G {:?}",
            gamma.len(),
            view.shape(),
            map.epsilon.shape(),
            loadings.shape(),
            shared.shape()
        )))
    }
}

/// Starting scaling: uniform on the simplex, divided by `√p_l` per group in
/// the sparse-group mode.
pub fn initial_gamma(p: usize, penalty: &Penalty) -> DVector<f64> {
    let uniform = 1.0 / p as f64;
    match penalty {
        Penalty::Simplex => DVector::from_element(p, uniform),
        Penalty::SparseGroup(sg) => DVector::from_iterator(
            p,
            (0..p).map(|s| uniform / (sg.groups.sizes()[sg.groups.group_of(s)] as f64).sqrt()),
        ),
    }
}

/// Median-heuristic bandwidth of the view as the kernel first sees it,
/// `γ₀ ⊙ x`, so the starting kernel has the usual median length scale.
pub fn initial_bandwidth(x: &DMatrix<f64>, gamma: &DVector<f64>, max_pairs: usize, seed_: u64) -> Result<f64> {
    let mut scaled = x.clone();
    for (mut col, g) in scaled.column_iter_mut().zip(gamma.iter()) {
        col *= *g;
    }
    median_heuristic_bandwidth(&scaled, max_pairs, seed_)
}

/// Full objective for the state and training views.
pub fn objective(
    state: &ModelState,
    views: &[DMatrix<f64>],
    target: &DMatrix<f64>,
    config: &FitConfig,
) -> Result<f64> {
    let zs = views
        .iter()
        .zip(&state.maps)
        .map(|(x, map)| map.transform(x))
        .collect::<Result<Vec<_>>>()?;
    objective_with_features(state, &zs, target, config)
}

fn objective_with_features(
    state: &ModelState,
    features: &[DMatrix<f64>],
    target: &DMatrix<f64>,
    config: &FitConfig,
) -> Result<f64> {
    let n = target.nrows() as f64;
    let mut total = loss(target, &state.shared, &state.theta)?;
    for (d, (z, a)) in features.iter().zip(&state.loadings).enumerate() {
        total += (&state.shared - z * a).norm_squared() / (2.0 * n);
        total += 0.5 * config.lambda_for(d) * a.norm_squared();
        total += config.penalty_for(d).value(&state.maps[d].gamma);
    }
    Ok(total)
}

struct Init {
    state: ModelState,
    target: DMatrix<f64>,
    features: Vec<DMatrix<f64>>,
}

fn initialize(data: &MultiviewDataset, config: &FitConfig) -> Result<Init> {
    config.validate(data)?;
    let n = data.n_samples();
    let r = config.n_components;
    let (target, outcome) = data.outcome.prepare()?;

    let mut maps = Vec::with_capacity(data.n_views());
    let mut loadings = Vec::with_capacity(data.n_views());
    for (d, x) in data.views.iter().enumerate() {
        let gamma = initial_gamma(x.ncols(), &config.penalty_for(d));
        let bandwidth = match &config.bandwidths {
            Some(bw) => bw[d],
            None => initial_bandwidth(x, &gamma, config.max_pairs, seed::derive(config.seed, "bandwidth", d as u64))?,
        };
        let map = RandomFeatureMap::sample(
            x.ncols(),
            config.n_features,
            bandwidth,
            seed::derive(config.seed, "frequencies", d as u64),
        )?
        .with_gamma(gamma);
        maps.push(map);

        let mut rng = seed::rng(config.seed, "init-loadings", d as u64);
        let a = standard_normal(config.n_features, r, &mut rng);
        let norm = a.norm();
        loadings.push(a / norm);
    }
    let mut rng = seed::rng(config.seed, "init-shared", 0);
    let shared = random_orthonormal(n, r, &mut rng);
    let theta = DMatrix::zeros(r, target.ncols());

    let features = data
        .views
        .iter()
        .zip(&maps)
        .map(|(x, m)| m.transform(x))
        .collect::<Result<Vec<_>>>()?;

    let mut state = ModelState {
        orthonormality_trace: vec![orthonormality_error(&shared)],
        shared,
        loadings,
        theta,
        maps,
        objective_trace: Vec::new(),
        converged: false,
        outcome,
    };
    let start = objective_with_features(&state, &features, &target, config)?;
    state.objective_trace.push(start);
    Ok(Init {
        state,
        target,
        features,
    })
}

/// Runs the alternating minimization. Hitting `max_outer_iter` is not an
/// error; the returned state reports `converged = false`.
pub fn fit(data: &MultiviewDataset, config: &FitConfig) -> Result<ModelState> {
    let Init {
        mut state,
        target,
        mut features,
    } = initialize(data, config)?;

    for _ in 0..config.max_outer_iter {
        for (d, x) in data.views.iter().enumerate() {
            let penalty = config.penalty_for(d);
            let problem = GammaProblem {
                view: x,
                map: &state.maps[d],
                loadings: &state.loadings[d],
                shared: &state.shared,
                penalty: &penalty,
            };
            let start = state.maps[d].gamma.clone();
            let result = fista::minimize(&problem, start, &config.fista)?;
            state.maps[d].gamma = result.x;
            features[d] = state.maps[d].transform(x)?;
        }

        for (d, z) in features.iter().enumerate() {
            state.loadings[d] = update_loadings(z, &state.shared, config.lambda_for(d))?;
        }
        let fitted: Vec<DMatrix<f64>> = features
            .iter()
            .zip(&state.loadings)
            .map(|(z, a)| z * a)
            .collect();
        state.shared = update_shared(&target, &state.theta, &fitted)?;
        state
            .orthonormality_trace
            .push(orthonormality_error(&state.shared));
        state.theta = update_theta(&state.shared, &target)?;

        let value = objective_with_features(&state, &features, &target, config)?;
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective {
                iteration: state.objective_trace.len(),
            });
        }
        let previous = *state.objective_trace.last().expect("trace starts non-empty");
        state.objective_trace.push(value);
        if (previous - value).abs() / previous.abs().max(1.0) <= config.outer_tol {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

/// Smallest `ρ` per sparse-group view for which the γ update zeroes every
/// group at initialization: the first proximal step (taken at the initial
/// step constant) and the stationarity test at `γ = 0` both return zero.
/// Views in the simplex mode report `None`.
pub fn rho_max(data: &MultiviewDataset, config: &FitConfig) -> Result<Vec<Option<f64>>> {
    let Init { state, .. } = initialize(data, config)?;
    let step = 1.0 / config.fista.initial_lipschitz;
    data.views
        .iter()
        .enumerate()
        .map(|(d, x)| {
            let Penalty::SparseGroup(sg) = config.penalty_for(d) else {
                return Ok(None);
            };
            let map = &state.maps[d];
            let grad_at = |gamma: &DVector<f64>| {
                gamma_objective_grad(gamma, x, map, &state.loadings[d], &state.shared)
            };
            let first = &map.gamma - grad_at(&map.gamma)? * step;
            let at_zero = -grad_at(&DVector::zeros(x.ncols()))?;
            let a = smallest_zeroing_rho(&first, step, &sg)?;
            let b = smallest_zeroing_rho(&at_zero, 1.0, &sg)?;
            Ok(Some(a.max(b)))
        })
        .collect()
}

/// Smallest `ρ` with `prox_{step·P_ρ}(v) = 0`, by bisection.
fn smallest_zeroing_rho(v: &DVector<f64>, step: f64, sg: &SparseGroup) -> Result<f64> {
    let zeroes = |rho: f64| -> Result<bool> {
        let probe = SparseGroup { rho, ..sg.clone() };
        Ok(probe.prox_nonnegative(v, step)?.iter().all(|x| *x == 0.0))
    };
    if v.iter().all(|x| *x <= 0.0) {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while !zeroes(hi)? {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::InvalidConfig("no finite rho zeroes every group".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if zeroes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(hi)
}
