//! Estimator front end: fitting with stored preprocessing, hyperparameter
//! heuristics, out-of-sample embedding and prediction.

mod cv;
mod persist;

pub use cv::{cross_validate, fold_assignment, held_out_error, CvPlan, CvResult, CvRow, Search};
pub use persist::{from_json, load_model, save_model, to_json, FORMAT_VERSION};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::{ColumnScaling, MultiviewDataset};
use crate::error::{Error, Result};
use crate::linalg::procrustes;
use crate::optimizer::{self, FitConfig, ModelState};
use crate::outcome::{nearest_centroid, OutcomeMeta};
use crate::randfeatures::{exact_gaussian_gram, median_heuristic_bandwidth, DEFAULT_MAX_PAIRS};
use crate::seed;

/// Rows used for the Gram spectrum in [`select_components`].
pub const SPECTRUM_MAX_ROWS: usize = 1000;

/// A fitted model plus everything needed to score new samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub state: ModelState,
    pub config: FitConfig,
    /// Per-view standardization applied before the feature map, if any.
    pub scalings: Option<Vec<ColumnScaling>>,
    /// Training scores `U = GΘ`.
    pub u_train: DMatrix<f64>,
    /// Original class names by label index (categorical outcomes only).
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Continuous(DVector<f64>),
    MultiContinuous(DMatrix<f64>),
    /// 0-based class indices.
    Classes(Vec<usize>),
}

impl Prediction {
    pub fn len(&self) -> usize {
        match self {
            Prediction::Continuous(y) => y.len(),
            Prediction::MultiContinuous(y) => y.nrows(),
            Prediction::Classes(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FittedModel {
    /// Fits on the views as given.
    pub fn fit(data: &MultiviewDataset, config: &FitConfig) -> Result<Self> {
        let state = optimizer::fit(data, config)?;
        let u_train = &state.shared * &state.theta;
        Ok(Self {
            state,
            config: config.clone(),
            scalings: None,
            u_train,
            class_names: Vec::new(),
        })
    }

    /// Standardizes each view column-wise, fits, and keeps the scaling so
    /// that [`predict`](Self::predict) accepts raw inputs.
    pub fn fit_standardized(data: &MultiviewDataset, config: &FitConfig) -> Result<Self> {
        let scalings: Vec<ColumnScaling> = data.views.iter().map(ColumnScaling::fit).collect();
        let views = data
            .views
            .iter()
            .zip(&scalings)
            .map(|(x, s)| s.apply(x))
            .collect::<Result<Vec<_>>>()?;
        let scaled = MultiviewDataset::with_groups(views, data.outcome.clone(), data.groups.clone())?;
        let mut model = Self::fit(&scaled, config)?;
        model.scalings = Some(scalings);
        Ok(model)
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Self {
        self.class_names = names;
        self
    }

    pub fn n_train(&self) -> usize {
        self.state.shared.nrows()
    }

    pub fn n_views(&self) -> usize {
        self.state.maps.len()
    }

    /// Learned variable scalings, one vector per view.
    pub fn gammas(&self) -> Vec<&DVector<f64>> {
        self.state.maps.iter().map(|m| &m.gamma).collect()
    }

    fn prepare_views(&self, views: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        if views.len() != self.n_views() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} views, got {}",
                self.n_views(),
                views.len()
            )));
        }
        let n = views[0].nrows();
        for (d, (x, map)) in views.iter().zip(&self.state.maps).enumerate() {
            if x.ncols() != map.n_variables() {
                return Err(Error::DimensionMismatch(format!(
                    "view {} has {} columns, model expects {}",
                    d + 1,
                    x.ncols(),
                    map.n_variables()
                )));
            }
            if x.nrows() != n {
                return Err(Error::DimensionMismatch(format!(
                    "view {} has {} rows, view 1 has {n}",
                    d + 1,
                    x.nrows()
                )));
            }
        }
        match &self.scalings {
            Some(s) => views.iter().zip(s).map(|(x, s)| s.apply(x)).collect(),
            None => Ok(views.to_vec()),
        }
    }

    /// Random-feature matrices of the target views under the frozen maps.
    pub fn target_features(&self, views: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        let views = self.prepare_views(views)?;
        views
            .iter()
            .zip(&self.state.maps)
            .map(|(x, m)| m.transform(x))
            .collect()
    }

    /// Orthonormal target embedding: Procrustes solution of `Σ_d Z_d A_d`.
    pub fn embed_target(&self, views: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        let features = self.target_features(views)?;
        let mut sum = DMatrix::zeros(features[0].nrows(), self.state.shared.ncols());
        for (z, a) in features.iter().zip(&self.state.loadings) {
            sum += z * a;
        }
        procrustes(&sum)
    }

    /// Target scores `U_target`, on the scale of the training scores.
    ///
    /// The orthonormal embedding has unit-norm columns whatever the number
    /// of target rows, while the training `G` has unit-norm columns over
    /// `n_train` rows; the embedding is rescaled by `√(n_target/n_train)` so
    /// that per-sample magnitudes agree.
    pub fn target_scores(&self, views: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        let g = self.embed_target(views)?;
        let scale = (g.nrows() as f64 / self.n_train() as f64).sqrt();
        Ok(g * &self.state.theta * scale)
    }

    pub fn predict(&self, views: &[DMatrix<f64>]) -> Result<Prediction> {
        let u = self.target_scores(views)?;
        match &self.state.outcome {
            OutcomeMeta::Continuous { means, multi } => {
                let mut y = u;
                for (mut col, m) in y.column_iter_mut().zip(means) {
                    col.add_scalar_mut(*m);
                }
                if *multi {
                    Ok(Prediction::MultiContinuous(y))
                } else {
                    Ok(Prediction::Continuous(y.column(0).into_owned()))
                }
            }
            OutcomeMeta::Categorical { train_labels, .. } => Ok(Prediction::Classes(
                nearest_centroid(&u, &self.u_train, train_labels)?,
            )),
        }
    }
}

/// Number of shared components from the Gram spectra of the views; the
/// minimum of the per-view choices.
pub fn select_components(views: &[DMatrix<f64>], threshold: f64, seed_: u64) -> Result<usize> {
    if views.is_empty() {
        return Err(Error::InvalidDimension("at least one view is required".into()));
    }
    let mut best = usize::MAX;
    for (d, x) in views.iter().enumerate() {
        let x = if x.nrows() > SPECTRUM_MAX_ROWS {
            let rows = subsample_rows(x.nrows(), SPECTRUM_MAX_ROWS, seed::derive(seed_, "spectrum-rows", d as u64));
            x.select_rows(&rows)
        } else {
            x.clone()
        };
        let bandwidth = median_heuristic_bandwidth(
            &x,
            DEFAULT_MAX_PAIRS,
            seed::derive(seed_, "spectrum-bandwidth", d as u64),
        )?;
        let gram = exact_gaussian_gram(&x, bandwidth)?;
        let mut eigs: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().copied().collect();
        eigs.sort_by(|a, b| b.total_cmp(a));
        best = best.min(components_from_spectrum(&eigs, threshold));
    }
    Ok(best.max(1))
}

/// Eigen-gap rule on a decreasing spectrum: with `r'` the smallest index
/// `≥ 2` where `(λ_{r'−1} − λ_{r'}) / λ_{r'−1} < threshold`, the spectrum
/// flattens after `r' − 1` leading eigenvalues, which is the count returned.
/// A flat spectrum gives 1.
pub fn components_from_spectrum(eigenvalues: &[f64], threshold: f64) -> usize {
    let Some(&top) = eigenvalues.first() else {
        return 1;
    };
    if eigenvalues.iter().all(|l| (l - top).abs() <= 1e-12 * top.abs().max(1.0)) {
        return 1;
    }
    for k in 1..eigenvalues.len() {
        let prev = eigenvalues[k - 1];
        if prev <= 1e-12 * top.abs().max(1e-300) {
            return k.max(1);
        }
        let change = (prev - eigenvalues[k]).abs() / prev;
        if change < threshold {
            return k.max(1);
        }
    }
    eigenvalues.len()
}

/// Default number of random features for `n` samples.
pub fn choose_m(n: usize) -> usize {
    if n > 1000 {
        300
    } else {
        (n / 2).max(2)
    }
}

/// Sorted sample of `k` distinct indices from `0..n`.
pub(crate) fn subsample_rows(n: usize, k: usize, seed_: u64) -> Vec<usize> {
    use rand::seq::index::sample;
    let mut rng = seed::rng(seed_, "subsample", 0);
    let mut rows = sample(&mut rng, n, k.min(n)).into_vec();
    rows.sort_unstable();
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormality_error, random_orthonormal, standard_normal};
    use crate::outcome::{ClassLabels, Outcome};

    fn rng(i: u64) -> rand_chacha::ChaCha8Rng {
        seed::rng(i, "model-test", 0)
    }

    #[test]
    fn choose_m_examples() {
        assert_eq!(choose_m(5000), 300);
        assert_eq!(choose_m(120), 60);
        assert_eq!(choose_m(4), 2);
        assert_eq!(choose_m(1000), 500);
    }

    #[test]
    fn spectrum_examples() {
        assert_eq!(components_from_spectrum(&[1.0; 6], 0.1), 1);
        assert_eq!(components_from_spectrum(&[10.0, 5.0, 4.9, 4.89, 4.88], 0.1), 2);
        assert_eq!(components_from_spectrum(&[9.0, 6.0, 4.0, 3.9], 0.1), 3);
        assert_eq!(components_from_spectrum(&[8.0, 4.0, 2.0, 1.0, 0.5], 0.1), 5);
    }

    #[test]
    fn select_components_takes_the_minimum_over_views() {
        let mut r = rng(10);
        let a = standard_normal(40, 2, &mut r);
        let b = standard_normal(40, 8, &mut r);
        let ra = select_components(std::slice::from_ref(&a), 0.1, 1).unwrap();
        let rb = select_components(std::slice::from_ref(&b), 0.1, 1).unwrap();
        assert_eq!(select_components(&[a, b], 0.1, 1).unwrap(), ra.min(rb));
        assert!(ra >= 1 && rb >= 1);
    }

    fn tiny_model(n: usize, seed_: u64) -> (MultiviewDataset, FittedModel) {
        let mut r = rng(seed_);
        let x1 = standard_normal(n, 4, &mut r);
        let x2 = standard_normal(n, 3, &mut r);
        let y = x1.column(0).map(|v| v.tanh()) + x2.column(1) * 0.5;
        let data = MultiviewDataset::new(vec![x1, x2], Outcome::Continuous(y)).unwrap();
        let config = FitConfig {
            n_features: 20,
            n_components: 2,
            max_outer_iter: 10,
            seed: seed_,
            ..FitConfig::default()
        };
        let model = FittedModel::fit(&data, &config).unwrap();
        (data, model)
    }

    #[test]
    fn training_features_reproduce_exactly() {
        let (data, model) = tiny_model(30, 1);
        let z = model.target_features(&data.views).unwrap();
        for (d, zd) in z.iter().enumerate() {
            assert_eq!(*zd, model.state.maps[d].transform(&data.views[d]).unwrap());
        }
    }

    #[test]
    fn embedding_is_orthonormal_and_optimal() {
        let (data, model) = tiny_model(25, 2);
        let g = model.embed_target(&data.views).unwrap();
        assert!(orthonormality_error(&g) <= 1e-10);
        let z = model.target_features(&data.views).unwrap();
        let m = &z[0] * &model.state.loadings[0] + &z[1] * &model.state.loadings[1];
        let best = (m.transpose() * &g).trace();
        for i in 0..10_000u64 {
            let q = random_orthonormal(25, 2, &mut seed::rng(i, "embed-oracle", 0));
            assert!((m.transpose() * q).trace() <= best + 1e-12);
        }
    }

    #[test]
    fn noise_variables_with_zero_gamma_do_not_move_the_embedding() {
        let (data, mut model) = tiny_model(20, 3);
        model.state.maps[0].gamma[3] = 0.0;
        let g = model.embed_target(&data.views).unwrap();
        let mut noisy = data.views.clone();
        let mut r = rng(99);
        noisy[0].set_column(3, &standard_normal(20, 1, &mut r).column(0));
        assert_eq!(g, model.embed_target(&noisy).unwrap());
    }

    #[test]
    fn zero_theta_predicts_training_mean() {
        let (data, mut model) = tiny_model(20, 4);
        model.state.theta.fill(0.0);
        let Outcome::Continuous(y) = &data.outcome else { unreachable!() };
        let Prediction::Continuous(pred) = model.predict(&data.views).unwrap() else {
            panic!("continuous prediction expected")
        };
        assert!(pred.iter().all(|p| (p - y.mean()).abs() < 1e-12));
    }

    #[test]
    fn prediction_is_repeatable() {
        let (data, model) = tiny_model(20, 5);
        assert_eq!(model.predict(&data.views).unwrap(), model.predict(&data.views).unwrap());
    }

    #[test]
    fn rejects_wrong_shapes() {
        let (data, model) = tiny_model(20, 6);
        assert!(matches!(
            model.predict(&data.views[..1]),
            Err(Error::DimensionMismatch(_))
        ));
        let bad = vec![data.views[0].clone(), data.views[0].clone()];
        assert!(matches!(model.predict(&bad), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn exact_multi_response_is_reproduced() {
        // Replace the fitted state by an exact model: Y = GΘ with G the
        // training embedding, so predicting the training inputs returns Y.
        let (data, mut model) = tiny_model(24, 7);
        let g = model.embed_target(&data.views).unwrap();
        model.state.shared = g.clone();
        let theta = standard_normal(2, 3, &mut rng(8));
        let y = &g * &theta;
        model.state.theta = theta;
        model.state.outcome = OutcomeMeta::Continuous { means: vec![0.0; 3], multi: true };
        let Prediction::MultiContinuous(pred) = model.predict(&data.views).unwrap() else {
            panic!("multi prediction expected")
        };
        assert!((pred - y).amax() < 1e-6);
    }

    #[test]
    fn standardized_fit_accepts_raw_inputs() {
        let mut r = rng(9);
        let x1 = standard_normal(30, 3, &mut r) * 100.0;
        let x2 = standard_normal(30, 3, &mut r).add_scalar(50.0);
        let labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let data = MultiviewDataset::new(
            vec![x1, x2],
            Outcome::Categorical(ClassLabels::new(labels, 2).unwrap()),
        )
        .unwrap();
        let config = FitConfig {
            n_features: 16,
            n_components: 2,
            max_outer_iter: 5,
            ..FitConfig::default()
        };
        let model = FittedModel::fit_standardized(&data, &config).unwrap();
        let Prediction::Classes(c) = model.predict(&data.views).unwrap() else {
            panic!("classes expected")
        };
        assert_eq!(c.len(), 30);
        assert!(model.scalings.is_some());
    }
}
