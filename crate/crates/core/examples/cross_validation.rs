//! Three-fold search over per-view sparse-group penalty levels.

use randmv::model::{cross_validate, CvPlan};
use randmv::simdata::{gen_binary, SimSpec};
use randmv::{FitConfig, MultiviewDataset};

fn main() -> randmv::Result<()> {
    let spec = SimSpec::binary(60, 40, 25, 11);
    let data = gen_binary(&spec)?;
    let groups = Some(spec.oracle_groups());
    let data = MultiviewDataset::with_groups(data.views, data.outcome, vec![groups.clone(), groups])?;

    let plan = CvPlan {
        rho_grid: vec![vec![1e-4, 1e-2], vec![1e-4, 1e-2]],
        seed: 11,
        ..CvPlan::default()
    };
    let mut config = FitConfig {
        n_features: 50,
        n_components: 2,
        max_outer_iter: 30,
        seed: 11,
        ..FitConfig::default()
    };
    config.fista.max_iter = 20;
    let result = cross_validate(&data, &plan, &config)?;
    for row in &result.table {
        println!("rho {:?} -> {:?}", row.rho, row.score);
    }
    println!("best {:?} with error {:.3}", result.best, result.best_score);
    Ok(())
}
