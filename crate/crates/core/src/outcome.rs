//! Outcome handling: losses, optimal scoring for class labels and
//! nearest-centroid assignment.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class labels coded `0..K`, every class non-empty, `K ≥ 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabels {
    labels: Vec<usize>,
    n_classes: usize,
}

impl ClassLabels {
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::SingleClass);
        }
        let counts = count_classes(&labels, n_classes)?;
        if let Some(empty) = counts.iter().position(|c| *c == 0) {
            return Err(Error::EmptyClass(empty));
        }
        Ok(Self { labels, n_classes })
    }

    /// Labels for scoring predictions only: classes may be empty.
    pub fn for_scoring(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        count_classes(&labels, n_classes)?;
        Ok(Self { labels, n_classes })
    }

    /// Infers `K` as one past the largest label.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(labels, k)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        count_classes(&self.labels, self.n_classes).expect("validated at construction")
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Self::new(rows.iter().map(|&i| self.labels[i]).collect(), self.n_classes)
    }
}

fn count_classes(labels: &[usize], n_classes: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(Error::InvalidConfig(format!(
                "label {l} outside 0..{n_classes}"
            )));
        }
        counts[l] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Continuous(DVector<f64>),
    MultiContinuous(DMatrix<f64>),
    Categorical(ClassLabels),
}

impl Outcome {
    pub fn len(&self) -> usize {
        match self {
            Outcome::Continuous(y) => y.len(),
            Outcome::MultiContinuous(y) => y.nrows(),
            Outcome::Categorical(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Ok(match self {
            Outcome::Continuous(y) => Outcome::Continuous(y.select_rows(rows)),
            Outcome::MultiContinuous(y) => Outcome::MultiContinuous(y.select_rows(rows)),
            Outcome::Categorical(c) => Outcome::Categorical(c.subset(rows)?),
        })
    }

    /// Fitting target (centered response or optimal-scoring response) and
    /// the metadata needed to undo the transformation at prediction time.
    pub fn prepare(&self) -> Result<(DMatrix<f64>, OutcomeMeta)> {
        match self {
            Outcome::Continuous(y) => {
                let (target, means) = center(&DMatrix::from_column_slice(y.len(), 1, y.as_slice()))?;
                Ok((target, OutcomeMeta::Continuous { means, multi: false }))
            }
            Outcome::MultiContinuous(y) => {
                let (target, means) = center(y)?;
                Ok((target, OutcomeMeta::Continuous { means, multi: true }))
            }
            Outcome::Categorical(labels) => {
                let scoring = OptimalScoring::build(labels)?;
                let target = scoring.transformed.clone();
                Ok((
                    target,
                    OutcomeMeta::Categorical {
                        scores: scoring.scores,
                        train_labels: labels.clone(),
                    },
                ))
            }
        }
    }
}

fn center(y: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("outcome"));
    }
    let means: Vec<f64> = y.column_iter().map(|c| c.mean()).collect();
    let mut centered = y.clone();
    for (mut col, m) in centered.column_iter_mut().zip(&means) {
        col.add_scalar_mut(-m);
    }
    Ok((centered, means))
}

/// What a fitted model remembers about its outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeMeta {
    Continuous { means: Vec<f64>, multi: bool },
    Categorical { scores: DMatrix<f64>, train_labels: ClassLabels },
}

impl OutcomeMeta {
    pub fn response_width(&self) -> usize {
        match self {
            OutcomeMeta::Continuous { means, .. } => means.len(),
            OutcomeMeta::Categorical { scores, .. } => scores.ncols(),
        }
    }
}

/// Optimal-scoring encoding of `K` classes as `K − 1` continuous columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalScoring {
    /// `K × (K−1)` score matrix `B`.
    pub scores: DMatrix<f64>,
    /// `n × (K−1)` response `Ȳ = W B`.
    pub transformed: DMatrix<f64>,
    pub class_counts: Vec<usize>,
    /// `s_k = n_1 + … + n_k`.
    pub cumulative: Vec<usize>,
}

impl OptimalScoring {
    /// Column `l` of `B` puts `√(n n_{l+1} / (s_l s_{l+1}))` on classes
    /// `1..=l`, `−√(n s_l / (n_{l+1} s_{l+1}))` on class `l+1` and zero
    /// after. Then `ȲᵀȲ = nI` and `Ȳᵀ1 = 0`.
    pub fn build(labels: &ClassLabels) -> Result<Self> {
        let k = labels.n_classes();
        let counts = labels.counts();
        let n = labels.len() as f64;
        let cumulative: Vec<usize> = counts
            .iter()
            .scan(0, |acc, c| {
                *acc += c;
                Some(*acc)
            })
            .collect();

        let mut scores = DMatrix::zeros(k, k - 1);
        for l in 0..k - 1 {
            let s_l = cumulative[l] as f64;
            let s_next = cumulative[l + 1] as f64;
            let n_next = counts[l + 1] as f64;
            let upper = (n * n_next).sqrt() / (s_l * s_next).sqrt();
            for row in 0..=l {
                scores[(row, l)] = upper;
            }
            scores[(l + 1, l)] = -(n * s_l).sqrt() / (n_next * s_next).sqrt();
        }

        let transformed = DMatrix::from_fn(labels.len(), k - 1, |i, j| {
            scores[(labels.labels()[i], j)]
        });
        Ok(Self {
            scores,
            transformed,
            class_counts: counts,
            cumulative,
        })
    }
}

/// `(1/2n)‖target − GΘ‖²_F`.
pub fn loss(target: &DMatrix<f64>, g: &DMatrix<f64>, theta: &DMatrix<f64>) -> Result<f64> {
    if g.nrows() != target.nrows() || g.ncols() != theta.nrows() || theta.ncols() != target.ncols()
    {
        return Err(Error::DimensionMismatch(format!(
            "target {:?}, G {:?}, Θ {:?}",
            target.shape(),
            g.shape(),
            theta.shape()
        )));
    }
    let n = target.nrows() as f64;
    Ok((target - g * theta).norm_squared() / (2.0 * n))
}

/// Class centroids of the training scores, one row per class.
pub fn class_centroids(u_train: &DMatrix<f64>, labels: &ClassLabels) -> Result<DMatrix<f64>> {
    if u_train.nrows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} score rows but {} labels",
            u_train.nrows(),
            labels.len()
        )));
    }
    let k = labels.n_classes();
    let mut sums = DMatrix::zeros(k, u_train.ncols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.labels().iter().enumerate() {
        let mut row = sums.row_mut(l);
        row += u_train.row(i);
        counts[l] += 1;
    }
    for (c, count) in counts.iter().enumerate() {
        if *count == 0 {
            return Err(Error::EmptyClass(c));
        }
        let mut row = sums.row_mut(c);
        row /= *count as f64;
    }
    Ok(sums)
}

/// Assigns each target row to the class with the closest training centroid;
/// ties go to the smallest class index.
pub fn nearest_centroid(
    u_target: &DMatrix<f64>,
    u_train: &DMatrix<f64>,
    train_labels: &ClassLabels,
) -> Result<Vec<usize>> {
    if u_target.ncols() != u_train.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "target scores have {} columns, training scores {}",
            u_target.ncols(),
            u_train.ncols()
        )));
    }
    let centroids = class_centroids(u_train, train_labels)?;
    Ok(u_target
        .row_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for (c, centroid) in centroids.row_iter().enumerate() {
                let d = (row - centroid).norm_squared();
                if d < best_dist {
                    best = c;
                    best_dist = d;
                }
            }
            best
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_orthonormal, standard_normal};
    use crate::seed;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn constraint_errors(scoring: &OptimalScoring) -> (f64, f64) {
        let y = &scoring.transformed;
        let n = y.nrows() as f64;
        let gram = y.tr_mul(y) - DMatrix::identity(y.ncols(), y.ncols()) * n;
        let col_sums = y.row_sum();
        (gram.amax(), col_sums.amax())
    }

    #[test]
    fn two_balanced_classes_code_plus_minus_one() {
        let labels = ClassLabels::from_labels(vec![0, 1, 0, 1, 1, 0]).unwrap();
        let s = OptimalScoring::build(&labels).unwrap();
        assert_eq!(s.scores, DMatrix::from_column_slice(2, 1, &[1.0, -1.0]));
        for (i, l) in labels.labels().iter().enumerate() {
            assert_eq!(s.transformed[(i, 0)], if *l == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn three_balanced_classes_are_orthogonal() {
        let labels = ClassLabels::from_labels(vec![0, 1, 2, 2, 1, 0, 0, 1, 2]).unwrap();
        let s = OptimalScoring::build(&labels).unwrap();
        let (gram_err, sum_err) = constraint_errors(&s);
        assert!(gram_err < 1e-10 && sum_err < 1e-10);
        assert_eq!(s.class_counts, vec![3, 3, 3]);
        assert_eq!(s.cumulative, vec![3, 6, 9]);
    }

    #[test]
    fn label_validation() {
        assert!(matches!(
            ClassLabels::from_labels(vec![0, 0, 0]),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            ClassLabels::new(vec![0, 2, 0], 3),
            Err(Error::EmptyClass(1))
        ));
    }

    #[test]
    fn loss_examples() {
        let mut rng = seed::rng(0, "test", 0);
        let g = random_orthonormal(6, 2, &mut rng);
        let theta = DMatrix::from_row_slice(2, 1, &[0.4, -1.1]);
        let y = &g * &theta;
        assert_abs_diff_eq!(loss(&y, &g, &theta).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(
            loss(&DMatrix::zeros(6, 1), &g, &DMatrix::zeros(2, 1)).unwrap(),
            0.0
        );

        // y = (1,2,3,4) centered = (-1.5,-0.5,0.5,1.5); G = e1,e2; Θ = Gᵀy
        // residual = (0, 0, 0.5, 1.5), loss = (0.25 + 2.25)/8
        let g4 = DMatrix::from_fn(4, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let yc = DMatrix::from_column_slice(4, 1, &[-1.5, -0.5, 0.5, 1.5]);
        let th = g4.tr_mul(&yc);
        assert_abs_diff_eq!(loss(&yc, &g4, &th).unwrap(), 2.5 / 8.0, epsilon = 1e-15);

        assert!(loss(&yc, &g4, &DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn nearest_centroid_examples() {
        let labels = ClassLabels::from_labels(vec![0, 0, 1, 1]).unwrap();
        let train = DMatrix::from_column_slice(4, 1, &[-1.5, -0.5, 0.5, 1.5]);
        // centroids −1 and +1
        let target = DMatrix::from_column_slice(3, 1, &[0.2, 1.0, 0.0]);
        let pred = nearest_centroid(&target, &train, &labels).unwrap();
        assert_eq!(pred, vec![1, 1, 0]);
        assert!(nearest_centroid(&DMatrix::zeros(1, 2), &train, &labels).is_err());
    }

    #[test]
    fn prepare_centers_continuous() {
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 6.0]);
        let (target, meta) = Outcome::Continuous(y).prepare().unwrap();
        assert_abs_diff_eq!(target.sum(), 0.0, epsilon = 1e-14);
        assert_eq!(meta, OutcomeMeta::Continuous { means: vec![3.0], multi: false });
    }

    fn random_labels(seed: u64) -> ClassLabels {
        let mut rng = seed::rng(seed, "labels", 0);
        let k = rng.random_range(2..=5);
        let n = rng.random_range(k..40);
        let mut labels: Vec<usize> = (0..k).collect();
        labels.extend((k..n).map(|_| rng.random_range(0..k)));
        ClassLabels::new(labels, k).unwrap()
    }

    proptest! {
        #[test]
        fn optimal_scoring_constraints(seed in 0u64..100_000) {
            let s = OptimalScoring::build(&random_labels(seed)).unwrap();
            let (gram_err, sum_err) = constraint_errors(&s);
            prop_assert!(gram_err < 1e-8, "gram {}", gram_err);
            prop_assert!(sum_err < 1e-8, "sum {}", sum_err);
        }

        #[test]
        fn loss_invariant_under_rotation(seed in 0u64..10_000) {
            let mut rng = seed::rng(seed, "test", 3);
            let g = random_orthonormal(8, 3, &mut rng);
            let theta = standard_normal(3, 2, &mut rng);
            let y = standard_normal(8, 2, &mut rng);
            let q = random_orthonormal(3, 3, &mut rng);
            let a = loss(&y, &g, &theta).unwrap();
            let b = loss(&y, &(&g * &q), &(q.transpose() * &theta)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn nearest_centroid_rigid_invariance(seed in 0u64..10_000) {
            let mut rng = seed::rng(seed, "test", 4);
            let labels = ClassLabels::new(vec![0, 1, 2, 0, 1, 2, 0, 1], 3).unwrap();
            let train = standard_normal(8, 2, &mut rng);
            let target = standard_normal(5, 2, &mut rng);
            let q = random_orthonormal(2, 2, &mut rng);
            let shift = standard_normal(1, 2, &mut rng);
            let move_rows = |m: &DMatrix<f64>| {
                let mut out = m * &q;
                for mut row in out.row_iter_mut() { row += &shift; }
                out
            };
            let a = nearest_centroid(&target, &train, &labels).unwrap();
            let b = nearest_centroid(&move_rows(&target), &move_rows(&train), &labels).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
