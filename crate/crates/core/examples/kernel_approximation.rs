//! Random Fourier features approximate the Gaussian kernel; the error
//! shrinks as the number of features grows.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use randmv::linalg::standard_normal;
use randmv::randfeatures::{exact_gaussian_gram, median_heuristic_bandwidth, DEFAULT_MAX_PAIRS};
use randmv::RandomFeatureMap;

fn main() -> randmv::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = standard_normal(200, 5, &mut rng);
    let nu = median_heuristic_bandwidth(&x, DEFAULT_MAX_PAIRS, 1)?;
    let exact = exact_gaussian_gram(&x, nu)?;
    println!("bandwidth {nu:.4}");
    for m in [50, 200, 800, 3200] {
        let z = RandomFeatureMap::sample(5, m, nu, 7)?.transform(&x)?;
        let approx: DMatrix<f64> = &z * z.transpose() / m as f64;
        let mae = (approx - &exact).abs().mean();
        println!("M = {m:4}  mean |K̂ − K| = {mae:.4}");
    }
    Ok(())
}
