//! Named configurations `fig2`, `fig3` and `fig4`.
//!
//! Only the field parameters are fixed by the figure setups. Window length,
//! truncation and the numerical knobs are chosen here and listed in
//! [`Preset::assumed`], so emitted configs say which values are assumed.

use std::f64::consts::FRAC_PI_4;

use pairstate::physconfig::{field_from_si, HelicityRelation, NumericsParams, RunConfig, WindowParams};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub config: RunConfig,
    /// Config fields whose values are assumed rather than given by the setup.
    pub assumed: Vec<&'static str>,
}

const ASSUMED: [&str; 7] = [
    "window.ramp_cycles",
    "window.plateau_cycles",
    "numerics.n_cut",
    "numerics.steps_per_cycle",
    "numerics.k0_offset",
    "numerics.prune_threshold",
    "numerics.n_sector_max",
];

fn numerics() -> NumericsParams {
    NumericsParams { n_sector_max: 4, ..NumericsParams::with_cutoff(4) }
}

fn window() -> WindowParams {
    WindowParams { ramp_cycles: 5, plateau_cycles: 20 }
}

fn same_helicity() -> RunConfig {
    RunConfig {
        field: field_from_si(4.9e17, 0.746, 0.2 * FRAC_PI_4, HelicityRelation::Same).expect("positive field"),
        window: window(),
        numerics: numerics(),
    }
}

fn opposite_helicity() -> RunConfig {
    RunConfig {
        field: field_from_si(3.1e17, 0.4715, 0.7 * FRAC_PI_4, HelicityRelation::Opposite).expect("positive field"),
        window: window(),
        numerics: numerics(),
    }
}

/// Presets `fig2`, `fig3` (identical to `fig2`) and `fig4`.
pub fn figure_configs() -> Vec<Preset> {
    let mut fig3_assumed = ASSUMED.to_vec();
    fig3_assumed.push("numerics (taken equal to fig2)");
    vec![
        Preset { name: "fig2", config: same_helicity(), assumed: ASSUMED.to_vec() },
        Preset { name: "fig3", config: same_helicity(), assumed: fig3_assumed },
        Preset { name: "fig4", config: opposite_helicity(), assumed: ASSUMED.to_vec() },
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    figure_configs().into_iter().find(|p| p.name == name)
}
