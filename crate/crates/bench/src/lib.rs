//! Shared fixtures for the benchmarks in `benches/`.

use mnar_core::synth::{simulate, ScenarioConfig};
use mnar_core::{ModelParams, PersonRecord};

/// Observed records and true parameters of the bundled desk scenario.
pub fn desk_fixture() -> (Vec<PersonRecord>, ModelParams) {
    let config = ScenarioConfig::preset("desk").expect("bundled preset");
    let sim = simulate(&config).expect("desk scenario simulates");
    (sim.observed, config.model_params())
}
