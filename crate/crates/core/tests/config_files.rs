use std::path::PathBuf;

use bdsde::experiments::{load_config, ExperimentConfig, GChoice};
use bdsde::solver::SolverMode;

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn reference_file_is_the_default_setup() {
    let c = load_config(&shipped("reference.json")).unwrap();
    assert_eq!(c, ExperimentConfig::default());
    assert_eq!((c.strike, c.x0, c.horizon, c.steps, c.delta), (115.0, 100.0, 0.25, 20, 1.0));
}

#[test]
fn forward_contract_file() {
    let c = load_config(&shipped("forward_contract.json")).unwrap();
    assert_eq!(c.g_choice, GChoice::None);
    assert_eq!(c.mode, SolverMode::Bsde);
}
