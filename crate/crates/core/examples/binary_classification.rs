//! Two-class simulation: fit with the signal/noise group structure, classify
//! held-out samples, and check which variables survived.

use randmv::simdata::{gen_binary, selection_metrics, SelectionRule, SimSpec};
use randmv::{FitConfig, FittedModel, Outcome, Penalty, Prediction, SparseGroup};

fn main() -> randmv::Result<()> {
    let spec = SimSpec::binary(120, 80, 30, 3);
    let train = gen_binary(&spec)?;
    let test = gen_binary(&SimSpec { seed: 4, ..spec.clone() })?;

    let penalty = Penalty::SparseGroup(SparseGroup::new(3e-4, 0.5, spec.oracle_groups())?);
    let config = FitConfig {
        n_features: 100,
        n_components: 3,
        penalties: vec![penalty.clone(), penalty],
        seed: 3,
        ..FitConfig::default()
    };
    config.validate(&train)?;
    let model = FittedModel::fit_standardized(&train, &config)?;

    let (Prediction::Classes(predicted), Outcome::Categorical(truth)) = (model.predict(&test.views)?, &test.outcome)
    else {
        unreachable!("binary outcome");
    };
    let wrong = predicted.iter().zip(truth.labels()).filter(|(a, b)| a != b).count();
    println!("held-out error {:.3}", wrong as f64 / predicted.len() as f64);
    println!("outer cycles {}", model.state.objective_trace.len() - 1);
    for (d, gamma) in model.gammas().into_iter().enumerate() {
        let r = selection_metrics(gamma, &spec.signal_set(), SelectionRule::Positive)?;
        println!("view {}: {} selected, TPR {:.2}, FPR {:.2}", d + 1, r.selected.len(), r.tpr, r.fpr);
    }
    Ok(())
}
