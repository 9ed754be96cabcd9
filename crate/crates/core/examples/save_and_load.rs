//! A fitted model survives a save/load round trip and predicts identically.

use randmv::model::{load_model, save_model};
use randmv::simdata::{gen_continuous, SimSpec};
use randmv::{FitConfig, FittedModel};

fn main() -> randmv::Result<()> {
    let data = gen_continuous(&SimSpec::continuous(80, 20, 2))?;
    let config = FitConfig {
        n_features: 40,
        n_components: 2,
        max_outer_iter: 20,
        ..FitConfig::default()
    };
    let model = FittedModel::fit_standardized(&data, &config)?;

    let path = std::env::temp_dir().join(format!("randmv-example-{}.json", std::process::id()));
    save_model(&model, &path)?;
    let loaded = load_model(&path)?;
    let bytes = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    std::fs::remove_file(&path).ok();

    assert_eq!(loaded, model);
    assert_eq!(loaded.predict(&data.views)?, model.predict(&data.views)?);
    println!("saved {bytes} bytes; reloaded model matches");
    Ok(())
}
