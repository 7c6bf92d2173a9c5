//! Scenario harness: seeded generators, declarative configuration, preset
//! experiments, and CSV/JSON emission behind the command-line interface.

pub mod config;
pub mod emit;
pub mod gen;
pub mod kuramoto;
pub mod presets;
pub mod run;

pub use config::{CheckSpec, CompareCfg, CompareMode, InitCfg, OutputCfg, ScenarioConfig};
pub use gen::{
    gen_frequencies, gen_near_identity_ensemble, gen_random_unitary, gen_sphere_ensemble,
    FreqKind, Stream,
};
pub use presets::{preset, PRESET_NAMES};
pub use run::{run_scenario, CheckOutcome, MonitorOutcome, RunSummary};
