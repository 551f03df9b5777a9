//! Orchestration around the `pairstate` library: figure presets, single
//! runs, parameter sweeps and the command-line front end.

pub mod presets;
pub mod run;
pub mod sweep;

pub use presets::{figure_configs, preset, Preset};
pub use run::{analyze, run_once, ResultRow, RunOutcome};
pub use sweep::{run_sweep, SweepAxis, SweepResult, SweepSpec};
