//! Dense linear-algebra helpers shared by the optimizer and the estimator.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Orthonormal-column maximizer of `tr(Mᵀ G)`: `G = U Vᵀ` from the thin SVD
/// of `m`. Fails only when `m` is zero or non-finite. When `m` has rank below
/// its column count the maximizer is not unique and one valid completion is
/// returned.
pub fn procrustes(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, r) = m.shape();
    if n < r {
        return Err(Error::DimensionMismatch(format!(
            "Procrustes needs at least as many rows as columns, got {n}x{r}"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("Procrustes input"));
    }
    if m.amax() == 0.0 {
        return Err(Error::RankDeficient);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.ok_or(Error::RankDeficient)?;
    let v_t = svd.v_t.ok_or(Error::RankDeficient)?;
    let g = u * v_t;
    if orthonormality_error(&g) > 1e-10 {
        return Err(Error::RankDeficient);
    }
    Ok(g)
}

/// `max |GᵀG − I|`.
pub fn orthonormality_error(g: &DMatrix<f64>) -> f64 {
    let gram = g.tr_mul(g);
    let r = gram.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..r {
        for i in 0..r {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Thin-QR orthonormalization of a standard-normal `n × r` draw.
pub fn random_orthonormal<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    let raw = standard_normal(n, r, rng);
    let q = raw.qr().q();
    q.columns(0, r).into_owned()
}

/// Row-major fill so the draw order does not depend on storage layout.
pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let values: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &values)
}

/// Solve `(a) x = b` for symmetric `a`: Cholesky first, LU as fallback.
pub fn solve_symmetric(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(b));
    }
    let lu = a.lu();
    lu.solve(b).ok_or(Error::SingularSystem)
}

/// Column means and (population) standard deviations.
pub fn column_moments(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    x.column_iter()
        .map(|c| {
            let mean = c.sum() / n;
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn procrustes_of_orthonormal_is_identity_map() {
        let mut rng = seed::rng(1, "test", 0);
        let w = random_orthonormal(9, 3, &mut rng);
        let g = procrustes(&w).unwrap();
        assert!((g - &w).amax() < 1e-12);
        let g2 = procrustes(&(w.clone() * 4.5)).unwrap();
        assert!((g2 - w).amax() < 1e-12);
    }

    #[test]
    fn procrustes_rejects_zero() {
        assert!(matches!(
            procrustes(&DMatrix::zeros(5, 2)),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn procrustes_rank_deficient_still_orthonormal() {
        let mut m = DMatrix::zeros(6, 3);
        m[(0, 0)] = 2.0;
        m[(1, 0)] = 1.0;
        let g = procrustes(&m).unwrap();
        assert!(orthonormality_error(&g) < 1e-10);
    }

    #[test]
    fn random_orthonormal_columns() {
        let mut rng = seed::rng(3, "test", 0);
        let q = random_orthonormal(20, 4, &mut rng);
        assert_eq!(q.shape(), (20, 4));
        assert!(orthonormality_error(&q) < 1e-12);
    }
}
