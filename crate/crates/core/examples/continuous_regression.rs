//! Continuous outcome driven by the leading shared directions of both views.

use randmv::simdata::{gen_continuous, SimSpec};
use randmv::{FitConfig, FittedModel, Outcome, Prediction};

fn main() -> randmv::Result<()> {
    let spec = SimSpec::continuous(200, 30, 5);
    let train = gen_continuous(&spec)?;
    let test = gen_continuous(&SimSpec { seed: 6, ..spec.clone() })?;

    let config = FitConfig {
        n_features: 100,
        n_components: 3,
        seed: 5,
        ..FitConfig::default()
    };
    let model = FittedModel::fit_standardized(&train, &config)?;

    let (Prediction::Continuous(yhat), Outcome::Continuous(y)) = (model.predict(&test.views)?, &test.outcome) else {
        unreachable!("single continuous outcome");
    };
    let mse = (&yhat - y).norm_squared() / y.len() as f64;
    let var = y.variance();
    println!("held-out MSE {mse:.4}, outcome variance {var:.4}, ratio {:.3}", mse / var);
    Ok(())
}
