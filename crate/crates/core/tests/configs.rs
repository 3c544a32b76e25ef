//! Every shipped config parses and validates.

use ordered_async::experiment::ExperimentConfig;

#[test]
fn shipped_configs_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.validate_grid(false).unwrap_or_else(|e| {
                assert!(cfg.sweep.is_some(), "{}: {e}", path.display());
            });
            assert!(!cfg.expand(cfg.sweep.is_some()).unwrap().is_empty());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn sweep_config_round_trips_through_toml() {
    let cfg = ExperimentConfig::from_toml_str(include_str!("../configs/lr_robustness.toml")).unwrap();
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
}
