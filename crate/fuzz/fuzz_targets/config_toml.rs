#![no_main]

use libfuzzer_sys::fuzz_target;
use openworld::harness::PipelineConfig;

fuzz_target!(|text: &str| {
    let Ok(config) = PipelineConfig::from_toml(text) else { return };
    let again = PipelineConfig::from_toml(&config.to_toml()).unwrap();
    assert_eq!(again.to_toml(), config.to_toml());
});
